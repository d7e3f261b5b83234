//! Exact linear programs: model building for the basic and level-t
//! Sherali-Adams relaxations, a rational simplex solver, and LP-format text
//! export/import.

pub mod format;
pub mod simplex;

use crate::csp::Instance;
use crate::error::{Error, Result};
use crate::ratio::{rat_usize, Rat};
use num::traits::{One, Zero};
use std::collections::BTreeMap;

pub use format::{export_lp, parse_lp};
pub use simplex::{solve_lp, LpOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Eq,
    Le,
    Ge,
}

impl Sense {
    pub fn symbol(&self) -> &'static str {
        match self {
            Sense::Eq => "=",
            Sense::Le => "<=",
            Sense::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone)]
pub struct LpRow {
    pub name: String,
    /// Sparse coefficients, sorted by variable index.
    pub coeffs: Vec<(usize, Rat)>,
    pub sense: Sense,
    pub rhs: Rat,
}

/// A linear program in exact rational arithmetic. All variables carry a lower
/// bound (default 0) and an optional upper bound.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub maximize: bool,
    pub var_names: Vec<String>,
    pub objective: Vec<Rat>,
    pub rows: Vec<LpRow>,
    pub bounds: Vec<(Rat, Option<Rat>)>,
}

impl LinearProgram {
    pub fn new(maximize: bool) -> Self {
        LinearProgram {
            maximize,
            var_names: Vec::new(),
            objective: Vec::new(),
            rows: Vec::new(),
            bounds: Vec::new(),
        }
    }

    pub fn add_var(&mut self, name: impl Into<String>) -> usize {
        self.var_names.push(name.into());
        self.objective.push(Rat::zero());
        self.bounds.push((Rat::zero(), None));
        self.var_names.len() - 1
    }

    pub fn num_vars(&self) -> usize {
        self.var_names.len()
    }

    pub fn set_objective(&mut self, var: usize, coeff: Rat) {
        self.objective[var] = coeff;
    }

    pub fn add_objective(&mut self, var: usize, coeff: &Rat) {
        self.objective[var] += coeff;
    }

    pub fn add_row(
        &mut self,
        name: impl Into<String>,
        coeffs: Vec<(usize, Rat)>,
        sense: Sense,
        rhs: Rat,
    ) {
        let mut coeffs = coeffs;
        coeffs.sort_by_key(|&(v, _)| v);
        self.rows.push(LpRow {
            name: name.into(),
            coeffs,
            sense,
            rhs,
        });
    }

    /// Substitutes a point into every row and bound; returns the first
    /// violated row name, or the exact objective value when feasible.
    pub fn check_point(&self, point: &[Rat]) -> Result<Rat> {
        if point.len() != self.num_vars() {
            return Err(Error::structure("point dimension mismatch"));
        }
        for (v, (lo, up)) in self.bounds.iter().enumerate() {
            if &point[v] < lo {
                return Err(Error::violation(format!(
                    "variable {} below lower bound",
                    self.var_names[v]
                )));
            }
            if let Some(u) = up {
                if &point[v] > u {
                    return Err(Error::violation(format!(
                        "variable {} above upper bound",
                        self.var_names[v]
                    )));
                }
            }
        }
        for row in &self.rows {
            let mut lhs = Rat::zero();
            for (v, c) in &row.coeffs {
                lhs += c * &point[*v];
            }
            let ok = match row.sense {
                Sense::Eq => lhs == row.rhs,
                Sense::Le => lhs <= row.rhs,
                Sense::Ge => lhs >= row.rhs,
            };
            if !ok {
                return Err(Error::violation(format!("row {} violated", row.name)));
            }
        }
        let mut obj = Rat::zero();
        for (v, c) in self.objective.iter().enumerate() {
            obj += c * &point[v];
        }
        Ok(obj)
    }
}

/// Canonical LP variable name for the distribution variable `x_{(S, alpha)}`.
pub fn set_var_name(set: &[usize], alpha: &[u8]) -> String {
    let vars: Vec<String> = set.iter().map(|v| v.to_string()).collect();
    let vals: Vec<String> = alpha.iter().map(|v| v.to_string()).collect();
    format!("x_{}__{}", vars.join("_"), vals.join("_"))
}

fn tuples(q: usize, len: usize) -> Vec<Vec<u8>> {
    crate::csp::TupleIter::new(q, len).collect()
}

/// Builds the basic LP relaxation: singleton variables `x_{(i,b)}` with
/// normalization rows, per-constraint scope variables with marginalization
/// rows, and the averaged satisfaction objective.
pub fn build_basic_lp(inst: &Instance) -> Result<LinearProgram> {
    let q = inst.predicate.q();
    let k = inst.predicate.k();
    let mut lp = LinearProgram::new(true);

    // singleton variables and normalization rows
    let mut singleton: Vec<Vec<usize>> = Vec::with_capacity(inst.n);
    for i in 0..inst.n {
        let vars: Vec<usize> = (0..q)
            .map(|b| lp.add_var(set_var_name(&[i], &[b as u8])))
            .collect();
        lp.add_row(
            format!("norm_{i}"),
            vars.iter().map(|&v| (v, Rat::one())).collect(),
            Sense::Eq,
            Rat::one(),
        );
        singleton.push(vars);
    }

    // scope variables: one block per distinct sorted scope (shared between
    // repeated constraints, which only affects the objective)
    let mut scope_vars: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
    for c in &inst.constraints {
        let mut dom = c.scope.clone();
        dom.sort_unstable();
        if scope_vars.contains_key(&dom) {
            continue;
        }
        let assignments = tuples(q, k);
        let vars: Vec<usize> = assignments
            .iter()
            .map(|a| lp.add_var(set_var_name(&dom, a)))
            .collect();
        // marginalization rows: sum over alpha with alpha(i)=b equals x_{(i,b)}
        for (pos, &i) in dom.iter().enumerate() {
            for b in 0..q as u8 {
                let mut coeffs: Vec<(usize, Rat)> = assignments
                    .iter()
                    .zip(&vars)
                    .filter(|(a, _)| a[pos] == b)
                    .map(|(_, &v)| (v, Rat::one()))
                    .collect();
                coeffs.push((singleton[i][b as usize], -Rat::one()));
                lp.add_row(
                    format!("marg_{}_{}_{}", set_name(&dom), i, b),
                    coeffs,
                    Sense::Eq,
                    Rat::zero(),
                );
            }
        }
        scope_vars.insert(dom, vars);
    }

    // objective: average over constraints of expected satisfaction
    let m_inv = Rat::one() / rat_usize(inst.m());
    for c in &inst.constraints {
        let mut dom = c.scope.clone();
        dom.sort_unstable();
        let vars = &scope_vars[&dom];
        for (a, &var) in tuples(q, k).iter().zip(vars) {
            // a assigns values to dom; evaluate in scope order with shift
            let tuple: Vec<u8> = c
                .scope
                .iter()
                .zip(&c.shift)
                .map(|(&v, &b)| {
                    let pos = dom.binary_search(&v).unwrap();
                    (a[pos] + b) % q as u8
                })
                .collect();
            if inst.predicate.eval_tuple(&tuple) {
                lp.add_objective(var, &m_inv);
            }
        }
    }
    Ok(lp)
}

fn set_name(set: &[usize]) -> String {
    set.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("_")
}

/// Number of LP variables of the level-t relaxation, refusing over budget.
pub fn sa_lp_size(n: usize, q: usize, t: usize) -> Option<u128> {
    let mut total: u128 = 1; // empty set variable
    let mut binom: u128 = 1;
    for s in 1..=t.min(n) {
        binom = binom.checked_mul((n - s + 1) as u128)? / s as u128;
        let qs = (q as u128).checked_pow(s as u32)?;
        total = total.checked_add(binom.checked_mul(qs)?)?;
    }
    Some(total)
}

/// Builds the level-t Sherali-Adams LP: variables for every subset of size at
/// most t, the unit empty-set variable, and consistency rows for every
/// `T ⊂ S` with `|S \ T| = 1` (which imply all nested marginalizations).
pub fn build_sa_lp(inst: &Instance, t: usize, size_budget: u128) -> Result<LinearProgram> {
    let q = inst.predicate.q();
    let k = inst.predicate.k();
    if t < k {
        return Err(Error::contract(format!("level t = {t} below arity k = {k}")));
    }
    let size = sa_lp_size(inst.n, q, t)
        .ok_or_else(|| Error::budget("Sherali-Adams model size overflows"))?;
    if size > size_budget {
        return Err(Error::budget(format!(
            "Sherali-Adams model needs {size} variables, budget is {size_budget}"
        )));
    }

    let mut lp = LinearProgram::new(true);
    let empty = lp.add_var("x_empty");
    lp.add_row(
        "unit",
        vec![(empty, Rat::one())],
        Sense::Eq,
        Rat::one(),
    );

    // enumerate subsets by size
    let mut vars_by_set: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
    let mut sets_by_size: Vec<Vec<Vec<usize>>> = vec![vec![Vec::new()]];
    for s in 1..=t.min(inst.n) {
        let mut level = Vec::new();
        for prev in &sets_by_size[s - 1] {
            let start = prev.last().map_or(0, |&l| l + 1);
            for v in start..inst.n {
                let mut next = prev.clone();
                next.push(v);
                level.push(next);
            }
        }
        sets_by_size.push(level);
    }
    for level in sets_by_size.iter().skip(1) {
        for set in level {
            let assignments = tuples(q, set.len());
            let vars: Vec<usize> = assignments
                .iter()
                .map(|a| lp.add_var(set_var_name(set, a)))
                .collect();
            vars_by_set.insert(set.clone(), vars);
        }
    }

    // consistency rows for |S \ T| = 1 (T may be empty: normalization)
    for (set, vars) in &vars_by_set {
        let assignments = tuples(q, set.len());
        for drop_pos in 0..set.len() {
            let mut sub = set.clone();
            sub.remove(drop_pos);
            let sub_assignments = tuples(q, sub.len());
            for (bi, beta) in sub_assignments.iter().enumerate() {
                let mut coeffs: Vec<(usize, Rat)> = assignments
                    .iter()
                    .zip(vars)
                    .filter(|(a, _)| {
                        let mut it = a
                            .iter()
                            .enumerate()
                            .filter(|&(p, _)| p != drop_pos)
                            .map(|(_, &v)| v);
                        beta.iter().all(|&b| it.next() == Some(b))
                    })
                    .map(|(_, &v)| (v, Rat::one()))
                    .collect();
                let target = if sub.is_empty() {
                    empty
                } else {
                    vars_by_set[&sub][bi]
                };
                coeffs.push((target, -Rat::one()));
                lp.add_row(
                    format!("cons_{}_{}_{}", set_name(set), set[drop_pos], bi),
                    coeffs,
                    Sense::Eq,
                    Rat::zero(),
                );
            }
            if set.len() == 1 {
                break; // only one way to drop to the empty set
            }
        }
    }

    // objective over constraint scopes
    let m_inv = Rat::one() / rat_usize(inst.m());
    for c in &inst.constraints {
        let mut dom = c.scope.clone();
        dom.sort_unstable();
        let vars = &vars_by_set[&dom];
        for (a, &var) in tuples(q, k).iter().zip(vars) {
            let tuple: Vec<u8> = c
                .scope
                .iter()
                .zip(&c.shift)
                .map(|(&v, &b)| {
                    let pos = dom.binary_search(&v).unwrap();
                    (a[pos] + b) % q as u8
                })
                .collect();
            if inst.predicate.eval_tuple(&tuple) {
                lp.add_objective(var, &m_inv);
            }
        }
    }
    Ok(lp)
}
