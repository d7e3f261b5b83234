//! Exact two-phase primal simplex.
//!
//! Dense rational tableau. Pivoting uses Dantzig's rule but degrades to
//! Bland's rule whenever a run of degenerate pivots is detected, so cycling
//! is impossible and termination is guaranteed. Returned optima are
//! re-checkable: substitute the point into every row of the model.

use super::{LinearProgram, Sense};
use crate::error::{Error, Result};
use crate::ratio::Rat;
use num::traits::{Signed, Zero};

/// Hard cap on tableau dimensions; larger models are refused, not attempted.
const SIZE_CAP: usize = 20_000;

#[derive(Debug, Clone)]
pub enum LpOutcome {
    Optimal { value: Rat, point: Vec<Rat> },
    Infeasible,
    Unbounded,
}

struct Tableau {
    /// rows[i] has len = num_cols + 1; last entry is the rhs.
    rows: Vec<Vec<Rat>>,
    basis: Vec<usize>,
    num_cols: usize,
}

impl Tableau {
    fn rhs(&self, i: usize) -> &Rat {
        &self.rows[i][self.num_cols]
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let piv = self.rows[pr][pc].clone();
        for x in self.rows[pr].iter_mut() {
            *x /= &piv;
        }
        for i in 0..self.rows.len() {
            if i == pr || self.rows[i][pc].is_zero() {
                continue;
            }
            let factor = self.rows[i][pc].clone();
            for j in 0..=self.num_cols {
                let delta = &factor * &self.rows[pr][j];
                self.rows[i][j] -= delta;
            }
        }
        self.basis[pr] = pc;
    }

    /// Maximizes `costs` over the current basis. `allowed` limits entering
    /// columns. Returns false when unbounded.
    fn optimize(&mut self, costs: &[Rat], allowed: usize) -> bool {
        // maintained reduced-cost row: z = c_B . B^{-1}A - c, so basic columns
        // read exactly 0 and a negative entry means the column improves
        let mut z: Vec<Rat> = (0..=self.num_cols)
            .map(|j| {
                if j < self.num_cols {
                    -costs[j].clone()
                } else {
                    Rat::zero()
                }
            })
            .collect();
        for (i, &b) in self.basis.iter().enumerate() {
            if !costs[b].is_zero() {
                let cb = costs[b].clone();
                for j in 0..=self.num_cols {
                    if !self.rows[i][j].is_zero() {
                        let d = &cb * &self.rows[i][j];
                        z[j] += d;
                    }
                }
            }
        }
        // Dantzig's rule for speed; after a streak of degenerate pivots switch
        // to Bland's rule until the objective strictly improves again, which
        // keeps the termination guarantee.
        const DEGENERATE_SWITCH: usize = 25;
        let mut degenerate_streak = 0usize;
        loop {
            let bland = degenerate_streak >= DEGENERATE_SWITCH;
            let mut entering: Option<usize> = None;
            for j in 0..allowed {
                if z[j].is_negative() {
                    match entering {
                        None => entering = Some(j),
                        Some(e) => {
                            if !bland && z[j] < z[e] {
                                entering = Some(j);
                            }
                        }
                    }
                    if bland {
                        break; // smallest improving index
                    }
                }
            }
            let Some(pc) = entering else {
                return true;
            };
            let mut best: Option<(Rat, usize)> = None;
            for i in 0..self.rows.len() {
                if self.rows[i][pc].is_positive() {
                    let ratio = self.rhs(i) / &self.rows[i][pc];
                    let better = match &best {
                        None => true,
                        Some((r, bi)) => {
                            ratio < *r || (ratio == *r && self.basis[i] < self.basis[*bi])
                        }
                    };
                    if better {
                        best = Some((ratio, i));
                    }
                }
            }
            let Some((ratio, pr)) = best else {
                return false;
            };
            degenerate_streak = if ratio.is_zero() {
                degenerate_streak + 1
            } else {
                0
            };
            self.pivot(pr, pc);
            let factor = z[pc].clone();
            if !factor.is_zero() {
                for j in 0..=self.num_cols {
                    if !self.rows[pr][j].is_zero() {
                        let d = &factor * &self.rows[pr][j];
                        z[j] -= d;
                    }
                }
            }
        }
    }
}

/// Solves the program exactly. Upper bounds and positive lower bounds are
/// lowered to explicit rows first.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpOutcome> {
    let n = lp.num_vars();
    let mut rows: Vec<(Vec<(usize, Rat)>, Sense, Rat)> = lp
        .rows
        .iter()
        .map(|r| (r.coeffs.clone(), r.sense, r.rhs.clone()))
        .collect();
    for (v, (lo, up)) in lp.bounds.iter().enumerate() {
        if lo.is_negative() {
            return Err(Error::contract(
                "negative lower bounds are not supported by the solver",
            ));
        }
        if lo.is_positive() {
            rows.push((vec![(v, Rat::from_integer(1.into()))], Sense::Ge, lo.clone()));
        }
        if let Some(u) = up {
            rows.push((vec![(v, Rat::from_integer(1.into()))], Sense::Le, u.clone()));
        }
    }
    let m = rows.len();
    if n > SIZE_CAP || m > SIZE_CAP {
        return Err(Error::budget(format!(
            "model has {n} variables and {m} rows; solver cap is {SIZE_CAP}"
        )));
    }

    // normalize to rhs >= 0 by flipping the sense now and the signs when the
    // tableau rows are materialized below
    let mut slack_cols = 0usize;
    let mut art_cols = 0usize;
    for (_, sense, rhs) in rows.iter_mut() {
        if rhs.is_negative() {
            *sense = match sense {
                Sense::Le => Sense::Ge,
                Sense::Ge => Sense::Le,
                Sense::Eq => Sense::Eq,
            };
        }
    }
    for (_, sense, _) in &rows {
        match sense {
            Sense::Le => slack_cols += 1, // slack starts basic
            Sense::Ge => {
                slack_cols += 1; // surplus
                art_cols += 1;
            }
            Sense::Eq => art_cols += 1,
        }
    }
    let num_cols = n + slack_cols + art_cols;
    let mut tab = Tableau {
        rows: Vec::with_capacity(m),
        basis: Vec::with_capacity(m),
        num_cols,
    };
    let mut next_slack = n;
    let mut next_art = n + slack_cols;
    for (coeffs, sense, rhs) in rows {
        let mut row = vec![Rat::zero(); num_cols + 1];
        let neg = rhs.is_negative();
        let sgn = if neg {
            -Rat::from_integer(1.into())
        } else {
            Rat::from_integer(1.into())
        };
        for (v, c) in coeffs {
            row[v] = c * &sgn;
        }
        row[num_cols] = rhs * &sgn;
        let basic;
        match sense {
            Sense::Le => {
                row[next_slack] = Rat::from_integer(1.into());
                basic = next_slack;
                next_slack += 1;
            }
            Sense::Ge => {
                row[next_slack] = -Rat::from_integer(1.into());
                next_slack += 1;
                row[next_art] = Rat::from_integer(1.into());
                basic = next_art;
                next_art += 1;
            }
            Sense::Eq => {
                row[next_art] = Rat::from_integer(1.into());
                basic = next_art;
                next_art += 1;
            }
        }
        tab.rows.push(row);
        tab.basis.push(basic);
    }

    // phase 1: drive artificials to zero
    if art_cols > 0 {
        let mut costs = vec![Rat::zero(); num_cols];
        for c in costs.iter_mut().skip(n + slack_cols) {
            *c = -Rat::from_integer(1.into());
        }
        let bounded = tab.optimize(&costs, num_cols);
        debug_assert!(bounded, "phase 1 is never unbounded");
        let mut art_sum = Rat::zero();
        for (i, &b) in tab.basis.iter().enumerate() {
            if b >= n + slack_cols {
                art_sum += tab.rhs(i);
            }
        }
        if !art_sum.is_zero() {
            return Ok(LpOutcome::Infeasible);
        }
        // pivot out degenerate basic artificials; drop redundant rows
        let mut i = 0;
        while i < tab.rows.len() {
            if tab.basis[i] >= n + slack_cols {
                let pc = (0..n + slack_cols).find(|&j| !tab.rows[i][j].is_zero());
                match pc {
                    Some(pc) => tab.pivot(i, pc),
                    None => {
                        tab.rows.remove(i);
                        tab.basis.remove(i);
                        continue;
                    }
                }
            }
            i += 1;
        }
    }

    // phase 2: original objective, artificial columns may not re-enter
    let mut costs = vec![Rat::zero(); num_cols];
    let obj_sign = if lp.maximize {
        Rat::from_integer(1.into())
    } else {
        -Rat::from_integer(1.into())
    };
    for (v, c) in lp.objective.iter().enumerate() {
        costs[v] = c * &obj_sign;
    }
    if !tab.optimize(&costs, n + slack_cols) {
        return Ok(LpOutcome::Unbounded);
    }

    let mut point = vec![Rat::zero(); n];
    for (i, &b) in tab.basis.iter().enumerate() {
        if b < n {
            point[b] = tab.rhs(i).clone();
        }
    }
    let mut value = Rat::zero();
    for (v, c) in lp.objective.iter().enumerate() {
        value += c * &point[v];
    }
    Ok(LpOutcome::Optimal { value, point })
}
