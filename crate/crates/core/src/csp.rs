//! Predicates, instances, assignments, and optimum computation for
//! MAX k-CSP over the alphabet `[q] = {0, ..., q-1}`.
//!
//! A constraint applies the predicate to its scope variables after adding a
//! per-position shift mod q, i.e. `f(x_{i_1} + b_1, ..., x_{i_k} + b_k)`.

use crate::error::{Error, Result};
use crate::ratio::{rat_usize, Rat};
use crate::rng::{stream, CounterRng};
use serde::{Deserialize, Serialize};

/// A predicate `f : [q]^k -> {0,1}` stored as its full truth table.
///
/// The table is indexed row-major with the last coordinate fastest: the entry
/// for the tuple `(a_1, ..., a_k)` sits at `a_1*q^{k-1} + ... + a_k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Predicate {
    q: usize,
    k: usize,
    table: Vec<bool>,
}

impl Predicate {
    pub fn new(q: usize, k: usize, table: Vec<bool>) -> Result<Self> {
        if q < 2 {
            return Err(Error::contract(format!("alphabet size {q} < 2")));
        }
        if k < 2 {
            return Err(Error::contract(format!("arity {k} < 2")));
        }
        let want = q
            .checked_pow(k as u32)
            .ok_or_else(|| Error::budget(format!("q^k overflow for q={q}, k={k}")))?;
        if table.len() != want {
            return Err(Error::contract(format!(
                "table length {} != q^k = {}",
                table.len(),
                want
            )));
        }
        if table.iter().all(|&b| b) || table.iter().all(|&b| !b) {
            return Err(Error::contract(
                "predicate must have at least one satisfying and one falsifying entry",
            ));
        }
        Ok(Predicate { q, k, table })
    }

    /// Parses a 0/1 string in table order, e.g. `"0110"` for XOR on two bits.
    pub fn from_bits(q: usize, k: usize, bits: &str) -> Result<Self> {
        let table = bits
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(Error::Parse(format!("bad table character {c:?}"))),
            })
            .collect::<Result<Vec<bool>>>()?;
        Predicate::new(q, k, table)
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn table_bits(&self) -> String {
        self.table.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }

    /// Evaluates the raw table at a tuple (no shift applied).
    pub fn eval_tuple(&self, tuple: &[u8]) -> bool {
        debug_assert_eq!(tuple.len(), self.k);
        let mut idx = 0usize;
        for &v in tuple {
            debug_assert!((v as usize) < self.q);
            idx = idx * self.q + v as usize;
        }
        self.table[idx]
    }

    /// Iterates over all tuples in table order (last coordinate fastest).
    pub fn tuples(&self) -> impl Iterator<Item = Vec<u8>> + '_ {
        TupleIter::new(self.q, self.k)
    }

    pub fn satisfying_count(&self) -> usize {
        self.table.iter().filter(|&&b| b).count()
    }

    /// XOR of two bits: the MAX-CUT predicate.
    pub fn xor2() -> Predicate {
        Predicate::from_bits(2, 2, "0110").unwrap()
    }

    /// Odd parity on three bits.
    pub fn xor3() -> Predicate {
        Predicate::from_bits(2, 3, "01101001").unwrap()
    }
}

/// Odometer over `[q]^k` in table order (last coordinate fastest).
pub struct TupleIter {
    q: usize,
    cur: Option<Vec<u8>>,
}

impl TupleIter {
    pub fn new(q: usize, k: usize) -> Self {
        TupleIter {
            q,
            cur: Some(vec![0u8; k]),
        }
    }
}

impl Iterator for TupleIter {
    type Item = Vec<u8>;

    fn next(&mut self) -> Option<Vec<u8>> {
        let cur = self.cur.take()?;
        let mut next = cur.clone();
        let mut i = next.len();
        loop {
            if i == 0 {
                self.cur = None;
                break;
            }
            i -= 1;
            if (next[i] as usize) + 1 < self.q {
                next[i] += 1;
                for v in next[i + 1..].iter_mut() {
                    *v = 0;
                }
                self.cur = Some(next);
                break;
            }
        }
        Some(cur)
    }
}

/// One shifted constraint: an ordered scope of distinct variables plus the
/// per-position shift tuple.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Constraint {
    pub scope: Vec<usize>,
    pub shift: Vec<u8>,
}

impl Constraint {
    pub fn new(scope: Vec<usize>, shift: Vec<u8>) -> Self {
        Constraint { scope, shift }
    }
}

/// A MAX k-CSP instance: a predicate, `n` variables, an optional partition of
/// the variables into blocks, and a multiset of constraints.
///
/// Constraints may repeat; `sat_fraction` counts with multiplicity.
#[derive(Debug, Clone)]
pub struct Instance {
    pub predicate: Predicate,
    pub n: usize,
    /// Block partition as half-open ranges `[start, end)`, covering `[0, n)`.
    pub parts: Option<Vec<(usize, usize)>>,
    pub constraints: Vec<Constraint>,
}

impl Instance {
    pub fn new(
        predicate: Predicate,
        n: usize,
        parts: Option<Vec<(usize, usize)>>,
        constraints: Vec<Constraint>,
    ) -> Result<Self> {
        let k = predicate.k();
        let q = predicate.q();
        for (ci, c) in constraints.iter().enumerate() {
            if c.scope.len() != k || c.shift.len() != k {
                return Err(Error::contract(format!(
                    "constraint {ci}: scope/shift length != k = {k}"
                )));
            }
            for &v in &c.scope {
                if v >= n {
                    return Err(Error::contract(format!(
                        "constraint {ci}: variable {v} out of range (n = {n})"
                    )));
                }
            }
            let mut sorted = c.scope.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != k {
                return Err(Error::contract(format!(
                    "constraint {ci}: scope variables must be distinct"
                )));
            }
            if c.shift.iter().any(|&b| b as usize >= q) {
                return Err(Error::contract(format!(
                    "constraint {ci}: shift entry out of alphabet [0, {q})"
                )));
            }
        }
        if let Some(parts) = &parts {
            let mut covered = vec![false; n];
            for &(s, e) in parts {
                if s >= e || e > n {
                    return Err(Error::contract(format!("bad block range [{s}, {e})")));
                }
                for c in covered.iter_mut().take(e).skip(s) {
                    if *c {
                        return Err(Error::contract("blocks overlap"));
                    }
                    *c = true;
                }
            }
            if covered.iter().any(|&c| !c) {
                return Err(Error::contract("blocks do not cover all variables"));
            }
        }
        Ok(Instance {
            predicate,
            n,
            parts,
            constraints,
        })
    }

    pub fn m(&self) -> usize {
        self.constraints.len()
    }

    /// Block index of a variable, when a partition is present.
    pub fn block_of(&self, v: usize) -> Option<usize> {
        let parts = self.parts.as_ref()?;
        parts.iter().position(|&(s, e)| v >= s && v < e)
    }

    /// The classic 5-cycle MAX-CUT instance (basic-LP value 1, optimum 4/5).
    pub fn c5_maxcut() -> Instance {
        let edges = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)];
        Instance::new(
            Predicate::xor2(),
            5,
            None,
            edges
                .iter()
                .map(|&(u, v)| Constraint::new(vec![u, v], vec![0, 0]))
                .collect(),
        )
        .unwrap()
    }

    /// Triangle MAX-CUT (basic-LP value 1, optimum 2/3, SA level 3 exact).
    pub fn k3_maxcut() -> Instance {
        let edges = [(0, 1), (1, 2), (2, 0)];
        Instance::new(
            Predicate::xor2(),
            3,
            None,
            edges
                .iter()
                .map(|&(u, v)| Constraint::new(vec![u, v], vec![0, 0]))
                .collect(),
        )
        .unwrap()
    }
}

/// An assignment of alphabet values to all `n` variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment(pub Vec<u8>);

impl Assignment {
    pub fn new(values: Vec<u8>, q: usize) -> Result<Self> {
        if values.iter().any(|&v| v as usize >= q) {
            return Err(Error::contract("assignment value out of alphabet"));
        }
        Ok(Assignment(values))
    }
}

/// Evaluates one constraint under an assignment: the table entry at the
/// shifted scope tuple.
pub fn eval_constraint(pred: &Predicate, c: &Constraint, a: &Assignment) -> Result<bool> {
    if c.scope.len() != pred.k() {
        return Err(Error::contract("constraint arity != predicate arity"));
    }
    let q = pred.q() as u8;
    let tuple: Vec<u8> = c
        .scope
        .iter()
        .zip(&c.shift)
        .map(|(&v, &b)| {
            let x = a.0[v];
            (x + b) % q
        })
        .collect();
    Ok(pred.eval_tuple(&tuple))
}

/// Exact fraction of constraints satisfied by the assignment.
pub fn sat_fraction(inst: &Instance, a: &Assignment) -> Result<Rat> {
    if inst.m() == 0 {
        return Err(Error::contract("instance has no constraints"));
    }
    if a.0.len() != inst.n {
        return Err(Error::contract("assignment length != n"));
    }
    let mut sat = 0usize;
    for c in &inst.constraints {
        if eval_constraint(&inst.predicate, c, a)? {
            sat += 1;
        }
    }
    Ok(rat_usize(sat) / rat_usize(inst.m()))
}

/// Returns `q^n` if it fits in the budget arithmetic, else `None`.
fn pow_checked(q: usize, n: usize) -> Option<u128> {
    let mut acc: u128 = 1;
    for _ in 0..n {
        acc = acc.checked_mul(q as u128)?;
    }
    Some(acc)
}

/// Exact optimum by enumerating all `q^n` assignments.
///
/// Refuses when `q^n` exceeds the budget; callers fall back to
/// `opt_local_search` in that case.
pub fn opt_exhaustive(inst: &Instance, budget: u128) -> Result<(Rat, Assignment)> {
    let space = pow_checked(inst.predicate.q(), inst.n)
        .filter(|&s| s <= budget)
        .ok_or_else(|| {
            Error::budget(format!(
                "q^n = {}^{} exceeds exhaustive budget {budget}",
                inst.predicate.q(),
                inst.n
            ))
        })?;
    let _ = space;
    if inst.m() == 0 {
        return Err(Error::contract("instance has no constraints"));
    }
    let mut best: Option<(usize, Assignment)> = None;
    for values in TupleIter::new(inst.predicate.q(), inst.n) {
        let a = Assignment(values);
        let mut sat = 0usize;
        for c in &inst.constraints {
            if eval_constraint(&inst.predicate, c, &a)? {
                sat += 1;
            }
        }
        match &best {
            Some((b, _)) if *b >= sat => {}
            _ => best = Some((sat, a)),
        }
    }
    let (sat, a) = best.unwrap();
    Ok((rat_usize(sat) / rat_usize(inst.m()), a))
}

/// Lower bound on the optimum by best-improvement hill climbing with seeded
/// random restarts. Deterministic given the seed.
pub fn opt_local_search(
    inst: &Instance,
    seed: u64,
    restarts: usize,
) -> Result<(Rat, Assignment)> {
    if restarts == 0 {
        return Err(Error::contract("restarts must be >= 1"));
    }
    if inst.m() == 0 {
        return Err(Error::contract("instance has no constraints"));
    }
    let q = inst.predicate.q();
    // incidence lists so a flip only re-evaluates touching constraints
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); inst.n];
    for (ci, c) in inst.constraints.iter().enumerate() {
        for &v in &c.scope {
            incident[v].push(ci);
        }
    }
    let mut best: Option<(usize, Assignment)> = None;
    for r in 0..restarts {
        let mut rng = CounterRng::new(seed, &[stream::LOCAL_SEARCH, r as u64]);
        let mut a = Assignment((0..inst.n).map(|_| rng.below(q) as u8).collect());
        let mut sat_by: Vec<bool> = inst
            .constraints
            .iter()
            .map(|c| eval_constraint(&inst.predicate, c, &a).unwrap())
            .collect();
        let mut sat: usize = sat_by.iter().filter(|&&s| s).count();
        loop {
            // best single-variable move across all (variable, value) pairs
            let mut move_best: Option<(isize, usize, u8)> = None;
            for v in 0..inst.n {
                let old = a.0[v];
                for new in 0..q as u8 {
                    if new == old {
                        continue;
                    }
                    a.0[v] = new;
                    let mut delta: isize = 0;
                    for &ci in &incident[v] {
                        let now =
                            eval_constraint(&inst.predicate, &inst.constraints[ci], &a).unwrap();
                        delta += now as isize - sat_by[ci] as isize;
                    }
                    a.0[v] = old;
                    if delta > 0 && move_best.map_or(true, |(d, _, _)| delta > d) {
                        move_best = Some((delta, v, new));
                    }
                }
            }
            match move_best {
                None => break,
                Some((delta, v, new)) => {
                    a.0[v] = new;
                    for &ci in &incident[v] {
                        sat_by[ci] =
                            eval_constraint(&inst.predicate, &inst.constraints[ci], &a).unwrap();
                    }
                    sat = (sat as isize + delta) as usize;
                }
            }
        }
        match &best {
            Some((b, _)) if *b >= sat => {}
            _ => best = Some((sat, a)),
        }
    }
    let (sat, a) = best.unwrap();
    Ok((rat_usize(sat) / rat_usize(inst.m()), a))
}
