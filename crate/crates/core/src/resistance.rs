//! Approximation-resistance machinery for boolean predicates: Fourier
//! coefficients, the bias polytope C(f), vanishing measures, the interval
//! instance generator, exact bias rounding, and the induced basic-LP
//! certificate.
//!
//! Biases live in the +/-1 convention: the bias of a coordinate is
//! `E[(-1)^alpha_i]`, so bit 0 contributes +1 and bit 1 contributes -1.
//! C(f) is the polytope of bias vectors of distributions supported on the
//! satisfying assignments. A measure on C(f) is vanishing when, for every
//! level t, its sign-twisted, Fourier-weighted pushforwards cancel exactly;
//! for finitely supported measures this is decidable by exact accumulation
//! of signed masses at coincident rational points.

use crate::cert::{BasicCertificate, LocalDistribution};
use crate::csp::{Constraint, Instance, Predicate, TupleIter};
use crate::error::{Error, Result};
use crate::gap::LiftedInstance;
use crate::lp::{solve_lp, LinearProgram, LpOutcome, Sense};
use crate::ratio::{rat_usize, Rat};
use crate::rng::{stream, CounterRng};
use num::traits::{One, Signed, Zero};
use std::collections::BTreeMap;

/// Maximum arity for the exact permutation enumeration in vanishing checks.
const MAX_VANISHING_ARITY: usize = 6;

/// All Fourier coefficients of a boolean predicate, exact.
#[derive(Debug, Clone)]
pub struct FourierTable {
    k: usize,
    /// Coefficient per subset bitmask (bit i set means coordinate i in S).
    coeffs: Vec<Rat>,
    density: Rat,
}

impl FourierTable {
    pub fn k(&self) -> usize {
        self.k
    }

    /// f̂(S) for the subset bitmask.
    pub fn coeff(&self, mask: usize) -> &Rat {
        &self.coeffs[mask]
    }

    /// Fraction of satisfying assignments rho(f) = f̂(∅).
    pub fn density(&self) -> &Rat {
        &self.density
    }
}

/// Exact Fourier transform `f̂(S) = E_x[f(x) prod_{i in S} (-1)^{x_i}]`.
pub fn fourier(pred: &Predicate) -> Result<FourierTable> {
    if pred.q() != 2 {
        return Err(Error::contract("Fourier transform needs a boolean predicate"));
    }
    let k = pred.k();
    let full = 1usize << k;
    let scale = Rat::one() / rat_usize(full);
    let mut coeffs = vec![Rat::zero(); full];
    let mut sat = 0usize;
    for x in pred.tuples() {
        if !pred.eval_tuple(&x) {
            continue;
        }
        sat += 1;
        for (mask, c) in coeffs.iter_mut().enumerate() {
            let mut parity = 0u32;
            for (i, &xi) in x.iter().enumerate() {
                if mask & (1 << i) != 0 && xi == 1 {
                    parity ^= 1;
                }
            }
            if parity == 0 {
                *c += &scale;
            } else {
                *c -= &scale;
            }
        }
    }
    Ok(FourierTable {
        k,
        coeffs,
        density: rat_usize(sat) / rat_usize(full),
    })
}

/// Bias vector of a distribution on {0,1}^k.
pub fn biases_of(dist: &BTreeMap<Vec<u8>, Rat>, k: usize) -> Vec<Rat> {
    let mut out = vec![Rat::zero(); k];
    for (alpha, p) in dist {
        for i in 0..k {
            if alpha[i] == 0 {
                out[i] += p;
            } else {
                out[i] -= p;
            }
        }
    }
    out
}

/// Exact feasibility: is `zeta` the bias vector of some distribution on the
/// satisfying assignments? Returns a witness distribution or None.
pub fn polytope_membership(
    pred: &Predicate,
    zeta: &[Rat],
) -> Result<Option<BTreeMap<Vec<u8>, Rat>>> {
    if pred.q() != 2 {
        return Err(Error::contract("bias polytope needs a boolean predicate"));
    }
    let k = pred.k();
    if zeta.len() != k {
        return Err(Error::contract("bias vector length != k"));
    }
    let sat: Vec<Vec<u8>> = pred.tuples().filter(|x| pred.eval_tuple(x)).collect();
    let mut lp = LinearProgram::new(true);
    let vars: Vec<usize> = (0..sat.len()).map(|i| lp.add_var(format!("nu{i}"))).collect();
    lp.add_row(
        "norm",
        vars.iter().map(|&v| (v, Rat::one())).collect(),
        Sense::Eq,
        Rat::one(),
    );
    for i in 0..k {
        let coeffs: Vec<(usize, Rat)> = sat
            .iter()
            .zip(&vars)
            .map(|(alpha, &v)| {
                let sign = if alpha[i] == 0 { Rat::one() } else { -Rat::one() };
                (v, sign)
            })
            .collect();
        lp.add_row(format!("bias{i}"), coeffs, Sense::Eq, zeta[i].clone());
    }
    match solve_lp(&lp)? {
        LpOutcome::Optimal { point, .. } => {
            let mut witness = BTreeMap::new();
            for (alpha, &v) in sat.iter().zip(&vars) {
                if !point[v].is_zero() {
                    witness.insert(alpha.clone(), point[v].clone());
                }
            }
            // re-check the biases exactly
            let back = biases_of(&witness, k);
            if back != zeta {
                return Err(Error::violation("membership witness does not reproduce biases"));
            }
            Ok(Some(witness))
        }
        LpOutcome::Infeasible => Ok(None),
        LpOutcome::Unbounded => Err(Error::violation("membership LP cannot be unbounded")),
    }
}

/// A finitely supported measure on C(f): atoms with positive weights summing
/// to one, each carrying a witness distribution certifying membership.
#[derive(Debug, Clone)]
pub struct AtomicMeasure {
    pub atoms: Vec<MeasureAtom>,
}

#[derive(Debug, Clone)]
pub struct MeasureAtom {
    pub zeta: Vec<Rat>,
    pub weight: Rat,
    /// Distribution on {0,1}^k with supp(nu) ⊆ f^{-1}(1) and biases zeta.
    pub witness: BTreeMap<Vec<u8>, Rat>,
}

impl AtomicMeasure {
    /// Point mass at the origin with the given witness.
    pub fn delta_zero(pred: &Predicate) -> Result<AtomicMeasure> {
        let k = pred.k();
        let zeta = vec![Rat::zero(); k];
        let witness = polytope_membership(pred, &zeta)?.ok_or_else(|| {
            Error::contract("origin is not in the bias polytope of this predicate")
        })?;
        Ok(AtomicMeasure {
            atoms: vec![MeasureAtom {
                zeta,
                weight: Rat::one(),
                witness,
            }],
        })
    }

    /// Validates weights and every atom's witness: support inside f^{-1}(1),
    /// exact probability, biases reproduce zeta.
    pub fn validate(&self, pred: &Predicate) -> Result<()> {
        let k = pred.k();
        let mut total = Rat::zero();
        for (ai, atom) in self.atoms.iter().enumerate() {
            if atom.zeta.len() != k {
                return Err(Error::contract(format!("atom {ai}: zeta length != k")));
            }
            if !atom.weight.is_positive() {
                return Err(Error::contract(format!("atom {ai}: weight must be positive")));
            }
            total += &atom.weight;
            let mut mass = Rat::zero();
            for (alpha, p) in &atom.witness {
                if alpha.len() != k {
                    return Err(Error::contract(format!("atom {ai}: witness arity mismatch")));
                }
                if !pred.eval_tuple(alpha) {
                    return Err(Error::violation(format!(
                        "atom {ai}: witness mass on a falsifying assignment {alpha:?}"
                    )));
                }
                if p.is_negative() {
                    return Err(Error::contract(format!("atom {ai}: negative witness mass")));
                }
                mass += p;
            }
            if !mass.is_one() {
                return Err(Error::violation(format!(
                    "atom {ai}: witness mass sums to {mass}, not 1"
                )));
            }
            if biases_of(&atom.witness, k) != atom.zeta {
                return Err(Error::violation(format!(
                    "atom {ai}: witness biases do not reproduce zeta"
                )));
            }
        }
        if !total.is_one() {
            return Err(Error::violation(format!(
                "atom weights sum to {total}, not 1"
            )));
        }
        Ok(())
    }
}

fn subsets_of_size(k: usize, t: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if t > k {
        return out;
    }
    let mut cur: Vec<usize> = (0..t).collect();
    loop {
        out.push(cur.clone());
        let mut i = t;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] + 1 <= k - (t - i) {
                cur[i] += 1;
                for j in i + 1..t {
                    cur[j] = cur[j - 1] + 1;
                }
                break;
            }
        }
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = vec![Vec::new()];
    for i in 0..n {
        let mut next = Vec::new();
        for p in &out {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, i);
                next.push(q);
            }
        }
        out = next;
    }
    out
}

/// Per-level signed pushforward masses of one atom, excluding its weight.
///
/// For level t, every subset S of size t, permutation pi of S and sign
/// pattern b, the atom lands at the point with coordinates
/// `(-1)^{b_{pi(i)}} * zeta_{pi(i)}` (listed in the sorted order of S) with
/// signed coefficient `parity(b) * f̂(S) / (C(k,t) t! 2^t)`.
fn pushforward_masses(
    table: &FourierTable,
    zeta: &[Rat],
) -> Vec<BTreeMap<Vec<Rat>, Rat>> {
    let k = table.k();
    let mut by_level: Vec<BTreeMap<Vec<Rat>, Rat>> = vec![BTreeMap::new(); k + 1];
    for t in 1..=k {
        let subsets = subsets_of_size(k, t);
        let perms = permutations(t);
        let norm = rat_usize(subsets.len()) * rat_usize(perms.len()) * rat_usize(1 << t);
        for s in &subsets {
            let mask = s.iter().fold(0usize, |m, &i| m | (1 << i));
            let fhat = table.coeff(mask);
            if fhat.is_zero() {
                continue;
            }
            for perm in &perms {
                // pi maps position i (in sorted S order) to s[perm[i]]
                for b in 0..(1usize << t) {
                    let parity = if (b.count_ones() & 1) == 0 {
                        Rat::one()
                    } else {
                        -Rat::one()
                    };
                    let point: Vec<Rat> = (0..t)
                        .map(|i| {
                            let src = s[perm[i]];
                            // b is indexed by position within S of pi(i)
                            if b & (1 << perm[i]) != 0 {
                                -zeta[src].clone()
                            } else {
                                zeta[src].clone()
                            }
                        })
                        .collect();
                    let mass = &parity * fhat / &norm;
                    *by_level[t].entry(point).or_insert_with(Rat::zero) += mass;
                }
            }
        }
    }
    by_level
}

/// Per-level residuals of the vanishing condition: the total absolute signed
/// mass left after accumulating all pushforwards at coincident points.
/// All residuals zero means the measure is vanishing.
pub fn vanishing_check(pred: &Predicate, measure: &AtomicMeasure) -> Result<Vec<Rat>> {
    if pred.k() > MAX_VANISHING_ARITY {
        return Err(Error::budget(format!(
            "vanishing check enumerates |S|! permutations; arity capped at {MAX_VANISHING_ARITY}"
        )));
    }
    measure.validate(pred)?;
    let table = fourier(pred)?;
    let k = pred.k();
    let mut accum: Vec<BTreeMap<Vec<Rat>, Rat>> = vec![BTreeMap::new(); k + 1];
    for atom in &measure.atoms {
        let masses = pushforward_masses(&table, &atom.zeta);
        for t in 1..=k {
            for (point, mass) in &masses[t] {
                *accum[t].entry(point.clone()).or_insert_with(Rat::zero) +=
                    mass * &atom.weight;
            }
        }
    }
    Ok((1..=k)
        .map(|t| {
            accum[t]
                .values()
                .fold(Rat::zero(), |acc, m| acc + m.abs())
        })
        .collect())
}

/// Searches for a vanishing measure supported on the given grid of atoms
/// (each pre-certified in C(f)): exact LP over atom weights with one
/// cancellation equality per accumulated point, or grid-infeasibility.
///
/// Grid-infeasibility says nothing about measures outside the grid.
pub fn find_vanishing_measure(
    pred: &Predicate,
    grid: &[MeasureAtom],
) -> Result<Option<AtomicMeasure>> {
    if grid.is_empty() {
        return Err(Error::contract("empty atom grid"));
    }
    if pred.k() > MAX_VANISHING_ARITY {
        return Err(Error::budget(format!(
            "vanishing search enumerates |S|! permutations; arity capped at {MAX_VANISHING_ARITY}"
        )));
    }
    let table = fourier(pred)?;
    let k = pred.k();
    // per-atom pushforward masses and the union of points per level
    let per_atom: Vec<Vec<BTreeMap<Vec<Rat>, Rat>>> = grid
        .iter()
        .map(|a| pushforward_masses(&table, &a.zeta))
        .collect();
    let mut lp = LinearProgram::new(true);
    let vars: Vec<usize> = (0..grid.len())
        .map(|i| lp.add_var(format!("w{i}")))
        .collect();
    lp.add_row(
        "norm",
        vars.iter().map(|&v| (v, Rat::one())).collect(),
        Sense::Eq,
        Rat::one(),
    );
    for t in 1..=k {
        let mut points: Vec<&Vec<Rat>> = per_atom
            .iter()
            .flat_map(|m| m[t].keys())
            .collect();
        points.sort();
        points.dedup();
        for (pi, point) in points.iter().enumerate() {
            let coeffs: Vec<(usize, Rat)> = per_atom
                .iter()
                .zip(&vars)
                .filter_map(|(m, &v)| m[t].get(*point).map(|c| (v, c.clone())))
                .filter(|(_, c)| !c.is_zero())
                .collect();
            if coeffs.is_empty() {
                continue;
            }
            lp.add_row(format!("cancel_{t}_{pi}"), coeffs, Sense::Eq, Rat::zero());
        }
    }
    match solve_lp(&lp)? {
        LpOutcome::Optimal { point, .. } => {
            let atoms: Vec<MeasureAtom> = grid
                .iter()
                .zip(&vars)
                .filter(|(_, &v)| !point[v].is_zero())
                .map(|(a, &v)| MeasureAtom {
                    zeta: a.zeta.clone(),
                    weight: point[v].clone(),
                    witness: a.witness.clone(),
                })
                .collect();
            let measure = AtomicMeasure { atoms };
            // round-trip: a found measure must pass the checker exactly
            let residuals = vanishing_check(pred, &measure)?;
            if residuals.iter().any(|r| !r.is_zero()) {
                return Err(Error::violation(
                    "vanishing-measure LP solution fails the exact checker",
                ));
            }
            Ok(Some(measure))
        }
        LpOutcome::Infeasible => Ok(None),
        LpOutcome::Unbounded => Err(Error::violation("vanishing LP cannot be unbounded")),
    }
}

/// Generation trace of one interval-model instance, enough to rebuild its
/// certificate: per constraint the atom index, the scaled bias vector, and
/// the negation pattern actually used.
#[derive(Debug, Clone)]
pub struct KtwTrace {
    pub epsilon: f64,
    pub delta: Rat,
    pub n0: usize,
    pub per_constraint: Vec<KtwConstraintTrace>,
}

#[derive(Debug, Clone)]
pub struct KtwConstraintTrace {
    pub atom: usize,
    /// (1 - delta)-scaled bias per coordinate.
    pub zeta: Vec<Rat>,
    /// Interval index per coordinate.
    pub blocks: Vec<usize>,
}

/// Smallest interval index whose interval contains |z|: I_0 = {0},
/// I_i = ((i-1)/n0, i/n0].
fn interval_index(z: &Rat, n0: usize) -> usize {
    let a = z.abs();
    if a.is_zero() {
        return 0;
    }
    // ceil(a * n0) exactly
    let scaled = a * rat_usize(n0);
    let num = scaled.numer().clone();
    let den = scaled.denom().clone();
    let q = &num / &den;
    let r = &num % &den;
    let c = if r.is_zero() { q } else { q + 1 };
    // a <= 1 guarantees this fits
    let idx: usize = c.to_string().parse().unwrap_or(n0);
    idx.min(n0)
}

/// Samples an instance from the interval model: per constraint draw an atom,
/// scale its biases by (1 - delta), place each coordinate in the interval
/// block of |zeta_j|, pick a uniform fresh variable there, and negate (via
/// the shift) when zeta_j < 0, or with probability 1/2 when zeta_j = 0.
pub fn ktw_generate(
    pred: &Predicate,
    measure: &AtomicMeasure,
    epsilon: f64,
    delta: &Rat,
    n: usize,
    m: usize,
    seed: u64,
) -> Result<(LiftedInstance, KtwTrace)> {
    if pred.q() != 2 {
        return Err(Error::contract("interval model needs a boolean predicate"));
    }
    if !(epsilon > 0.0) {
        return Err(Error::contract("epsilon must be positive"));
    }
    if delta.is_negative() || delta >= &Rat::one() {
        return Err(Error::contract("delta must lie in [0, 1)"));
    }
    measure.validate(pred)?;
    let k = pred.k();
    let n0 = (1.0 / epsilon).ceil() as usize;
    let blocks = n0 + 1; // I_0 .. I_{n0}
    let big_n = blocks * n;
    let parts: Vec<(usize, usize)> = (0..blocks).map(|b| (b * n, (b + 1) * n)).collect();
    let scale = Rat::one() - delta;

    // cumulative weights for atom sampling (weights are exact rationals;
    // the draw uses a 53-bit uniform against the exact CDF)
    let mut rng = CounterRng::new(seed, &[stream::KTW]);
    let mut constraints = Vec::with_capacity(m);
    let mut origins = Vec::with_capacity(m);
    let mut traces = Vec::with_capacity(m);
    for _ in 0..m {
        let roll = rng.next_f64();
        let mut acc = 0.0;
        let mut atom_idx = measure.atoms.len() - 1;
        for (ai, atom) in measure.atoms.iter().enumerate() {
            acc += crate::ratio::rat_to_f64(&atom.weight);
            if roll < acc {
                atom_idx = ai;
                break;
            }
        }
        let atom = &measure.atoms[atom_idx];
        let zeta: Vec<Rat> = atom.zeta.iter().map(|z| z * &scale).collect();
        let mut scope = Vec::with_capacity(k);
        let mut shift = Vec::with_capacity(k);
        let mut block_ids = Vec::with_capacity(k);
        for z in &zeta {
            let block = interval_index(z, n0);
            block_ids.push(block);
            let mut tries = 0;
            loop {
                let v = block * n + rng.below(n);
                if !scope.contains(&v) {
                    scope.push(v);
                    break;
                }
                tries += 1;
                if tries > 1000 {
                    return Err(Error::budget(
                        "interval-model collision resampling exhausted; increase n",
                    ));
                }
            }
            let negate = if z.is_negative() {
                true
            } else if z.is_zero() {
                rng.below(2) == 1
            } else {
                false
            };
            shift.push(if negate { 1u8 } else { 0u8 });
        }
        constraints.push(Constraint::new(scope, shift));
        origins.push(atom_idx);
        traces.push(KtwConstraintTrace {
            atom: atom_idx,
            zeta,
            blocks: block_ids,
        });
    }
    let instance = Instance::new(pred.clone(), big_n, Some(parts), constraints)?;
    Ok((
        LiftedInstance {
            instance,
            origins,
            seed,
            n_per_block: n,
        },
        KtwTrace {
            epsilon,
            delta: delta.clone(),
            n0,
            per_constraint: traces,
        },
    ))
}

/// Exact bias rounding by the hybrid construction: coordinate by coordinate,
/// mix with a product distribution whose j-th bit is pinned to the sign of
/// the required move, with the mixing weight solving the bias equation
/// exactly. Returns the rounded distribution and its l1 distance from nu.
///
/// Requires |t_j - |zeta_j|| < delta/2 for every coordinate.
pub fn bias_round(
    nu: &BTreeMap<Vec<u8>, Rat>,
    zeta: &[Rat],
    targets: &[Rat],
    delta: &Rat,
) -> Result<(BTreeMap<Vec<u8>, Rat>, Rat)> {
    let k = zeta.len();
    if targets.len() != k {
        return Err(Error::contract("target length != k"));
    }
    let half_delta = delta / rat_usize(2);
    for j in 0..k {
        let gap = (&targets[j] - zeta[j].abs()).abs();
        if &gap >= &half_delta && !delta.is_zero() {
            return Err(Error::contract(format!(
                "target {j} moves the bias by {gap}, at least delta/2"
            )));
        }
        if delta.is_zero() && !gap.is_zero() {
            return Err(Error::contract(
                "delta = 0 permits no bias movement at all",
            ));
        }
    }
    let mut current: BTreeMap<Vec<u8>, Rat> = nu.clone();
    let mut cur_bias: Vec<Rat> = biases_of(&current, k);
    for j in 0..k {
        let sign_pos = !zeta[j].is_negative();
        let r_j = if sign_pos {
            targets[j].clone()
        } else {
            -targets[j].clone()
        };
        if r_j == cur_bias[j] {
            continue;
        }
        let move_up = r_j > cur_bias[j];
        let pinned_bit: u8 = if move_up { 0 } else { 1 };
        let pinned_bias = if move_up { Rat::one() } else { -Rat::one() };
        // tau solves r = (1 - tau) * current + tau * pinned
        let tau = (&r_j - &cur_bias[j]) / (&pinned_bias - &cur_bias[j]);
        if tau.is_negative() || tau > Rat::one() {
            return Err(Error::violation(format!(
                "mixing weight tau = {tau} escapes [0, 1] at coordinate {j}"
            )));
        }
        // product distribution: bit j pinned, others independent at the
        // current biases: P(bit i = 1) = (1 - bias_i) / 2
        let mut mix: BTreeMap<Vec<u8>, Rat> = BTreeMap::new();
        for alpha in TupleIter::new(2, k) {
            if alpha[j] != pinned_bit {
                continue;
            }
            let mut mass = Rat::one();
            for (i, &bit) in alpha.iter().enumerate() {
                if i == j {
                    continue;
                }
                let p1 = (Rat::one() - &cur_bias[i]) / rat_usize(2);
                mass *= if bit == 1 { p1 } else { Rat::one() - p1 };
                if mass.is_zero() {
                    break;
                }
            }
            if !mass.is_zero() {
                mix.insert(alpha, mass);
            }
        }
        let keep = Rat::one() - &tau;
        let mut next: BTreeMap<Vec<u8>, Rat> = BTreeMap::new();
        for (alpha, p) in &current {
            let scaled = p * &keep;
            if !scaled.is_zero() {
                next.insert(alpha.clone(), scaled);
            }
        }
        for (alpha, p) in &mix {
            let add = p * &tau;
            *next.entry(alpha.clone()).or_insert_with(Rat::zero) += add;
        }
        current = next;
        cur_bias = biases_of(&current, k);
        if cur_bias[j] != r_j {
            return Err(Error::violation(format!(
                "bias rounding failed to hit the target exactly at coordinate {j}"
            )));
        }
    }
    // targets reached exactly; measure the l1 distance
    let mut keys: Vec<&Vec<u8>> = nu.keys().collect();
    keys.extend(current.keys());
    keys.sort();
    keys.dedup();
    let zero = Rat::zero();
    let mut l1 = Rat::zero();
    for key in keys {
        let a = nu.get(key).unwrap_or(&zero);
        let b = current.get(key).unwrap_or(&zero);
        l1 += (a - b).abs();
    }
    Ok((current, l1))
}

/// Builds the basic-LP certificate for an interval-model instance: block
/// singleton biases sit at the right endpoints of their intervals, and each
/// constraint's distribution is the atom witness rounded to those endpoints
/// and shifted by the constraint's negations.
///
/// Returns the certificate together with the largest l1 rounding distance.
pub fn ktw_basic_certificate(
    pred: &Predicate,
    measure: &AtomicMeasure,
    lifted: &LiftedInstance,
    trace: &KtwTrace,
) -> Result<(BasicCertificate, Rat)> {
    let k = pred.k();
    let inst = &lifted.instance;
    let n = lifted.n_per_block;
    let n0 = trace.n0;
    let scale = Rat::one() - &trace.delta;

    // singleton distribution per block: bias i/n0
    let block_bias = |b: usize| rat_usize(b) / rat_usize(n0);
    let per_variable: Vec<LocalDistribution> = (0..inst.n)
        .map(|v| {
            let t = block_bias(v / n);
            let p0 = (Rat::one() + &t) / rat_usize(2);
            let p1 = (Rat::one() - &t) / rat_usize(2);
            LocalDistribution::singleton(v, &[p0, p1])
        })
        .collect::<Result<Vec<_>>>()?;

    let mut worst_l1 = Rat::zero();
    let mut per_constraint = Vec::with_capacity(inst.m());
    for (ci, c) in inst.constraints.iter().enumerate() {
        let tr = &trace.per_constraint[ci];
        let atom = &measure.atoms[tr.atom];
        // delta-mixed witness: nu = (1 - delta) nu0 + delta U_k
        let mut nu: BTreeMap<Vec<u8>, Rat> = BTreeMap::new();
        if trace.delta.is_zero() {
            nu = atom.witness.clone();
        } else {
            let unif = &trace.delta / rat_usize(1 << k);
            for alpha in TupleIter::new(2, k) {
                let base = atom.witness.get(&alpha).cloned().unwrap_or_else(Rat::zero);
                let mass = base * &scale + &unif;
                if !mass.is_zero() {
                    nu.insert(alpha, mass);
                }
            }
        }
        let targets: Vec<Rat> = tr.blocks.iter().map(|&b| block_bias(b)).collect();
        let (rounded, l1) = bias_round(&nu, &tr.zeta, &targets, &trace.delta)?;
        if l1 > worst_l1 {
            worst_l1 = l1;
        }
        // D_{S_C}(alpha) = nu'(alpha + b_C): build over the sorted scope
        let mut dom = c.scope.clone();
        dom.sort_unstable();
        let mut probs: BTreeMap<Vec<u8>, Rat> = BTreeMap::new();
        for (beta, p) in &rounded {
            // beta is the literal assignment in scope order; alpha is the
            // variable assignment with alpha_j = beta_j - b_j mod 2
            let mut values = vec![0u8; k];
            for (pos, &v) in c.scope.iter().enumerate() {
                let alpha = (beta[pos] + c.shift[pos]) % 2;
                values[dom.binary_search(&v).unwrap()] = alpha;
            }
            *probs.entry(values).or_insert_with(Rat::zero) += p;
        }
        per_constraint.push(LocalDistribution::new(dom, probs)?);
    }
    Ok((
        BasicCertificate {
            per_constraint,
            per_variable,
        },
        worst_l1,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cert::{verify_basic, BasicOutcome};
    use crate::csp::{opt_local_search, Predicate};
    use crate::ratio::{rat, rat_int};

    #[test]
    fn xor3_fourier() {
        let table = fourier(&Predicate::xor3()).unwrap();
        assert_eq!(table.coeff(0), &rat(1, 2));
        assert_eq!(table.coeff(0b111), &rat(-1, 2));
        for mask in [0b001, 0b010, 0b100, 0b011, 0b101, 0b110] {
            assert_eq!(table.coeff(mask), &rat_int(0), "mask {mask}");
        }
        assert_eq!(table.density(), &rat(1, 2));
    }

    #[test]
    fn and2_fourier_and_parseval() {
        // AND on two bits: satisfied only by (1,1) -> density 1/4
        let and2 = Predicate::from_bits(2, 2, "0001").unwrap();
        let table = fourier(&and2).unwrap();
        assert_eq!(table.coeff(0), &rat(1, 4));
        // Parseval across small predicates: sum of squares = density
        for bits in ["0001", "0110", "0111", "1000", "0011"] {
            let p = Predicate::from_bits(2, 2, bits).unwrap();
            let t = fourier(&p).unwrap();
            let sum: Rat = (0..4).map(|m| t.coeff(m) * t.coeff(m)).sum();
            assert_eq!(&sum, t.density(), "bits {bits}");
        }
        for bits in ["01101001", "00010111", "11101000"] {
            let p = Predicate::from_bits(2, 3, bits).unwrap();
            let t = fourier(&p).unwrap();
            let sum: Rat = (0..8).map(|m| t.coeff(m) * t.coeff(m)).sum();
            assert_eq!(&sum, t.density(), "bits {bits}");
        }
    }

    #[test]
    fn membership_examples() {
        let xor3 = Predicate::xor3();
        let zero = vec![rat_int(0); 3];
        let w = polytope_membership(&xor3, &zero).unwrap().unwrap();
        assert_eq!(biases_of(&w, 3), zero);

        let and2 = Predicate::from_bits(2, 2, "0001").unwrap();
        // only satisfying assignment (1,1): bias (-1,-1) feasible
        let w = polytope_membership(&and2, &[rat_int(-1), rat_int(-1)])
            .unwrap()
            .unwrap();
        assert_eq!(w.len(), 1);
        assert!(polytope_membership(&and2, &[rat_int(1), rat_int(1)])
            .unwrap()
            .is_none());
        // outside the cube
        assert!(polytope_membership(&xor3, &[rat_int(2), rat_int(0), rat_int(0)])
            .unwrap()
            .is_none());
    }

    #[test]
    fn delta_zero_vanishes_for_xor3() {
        let xor3 = Predicate::xor3();
        let m = AtomicMeasure::delta_zero(&xor3).unwrap();
        let residuals = vanishing_check(&xor3, &m).unwrap();
        assert!(residuals.iter().all(|r| r.is_zero()), "{residuals:?}");
    }

    #[test]
    fn vertex_atom_on_and2_has_positive_residual() {
        // AND2's only satisfying assignment gives zeta = (-1, -1); the
        // level-1 pushforwards cannot cancel because f-hat({1}) = 1/4 != 0
        let and2 = Predicate::from_bits(2, 2, "0001").unwrap();
        let mut witness = BTreeMap::new();
        witness.insert(vec![1u8, 1u8], rat_int(1));
        let m = AtomicMeasure {
            atoms: vec![MeasureAtom {
                zeta: vec![rat_int(-1), rat_int(-1)],
                weight: rat_int(1),
                witness,
            }],
        };
        let residuals = vanishing_check(&and2, &m).unwrap();
        assert!(residuals[0] > rat_int(0), "{residuals:?}");
    }

    #[test]
    fn find_vanishing_on_grid() {
        let xor3 = Predicate::xor3();
        // grid: the origin plus a non-cancelling corner
        let origin = AtomicMeasure::delta_zero(&xor3).unwrap().atoms[0].clone();
        let mut corner_witness = BTreeMap::new();
        corner_witness.insert(vec![1u8, 0, 0], rat_int(1));
        let corner = MeasureAtom {
            zeta: vec![rat_int(-1), rat_int(1), rat_int(1)],
            weight: rat_int(1),
            witness: corner_witness,
        };
        let found = find_vanishing_measure(&xor3, &[origin, corner.clone()])
            .unwrap()
            .expect("origin alone should produce a vanishing measure");
        let residuals = vanishing_check(&xor3, &found).unwrap();
        assert!(residuals.iter().all(|r| r.is_zero()));

        // a single non-cancelling atom is grid-infeasible
        assert!(find_vanishing_measure(&xor3, &[corner]).unwrap().is_none());
    }

    #[test]
    fn interval_index_arithmetic() {
        // n0 = 10: 0.28 lies in I_3 = (0.2, 0.3]
        assert_eq!(interval_index(&rat(28, 100), 10), 3);
        assert_eq!(interval_index(&rat(3, 10), 10), 3);
        assert_eq!(interval_index(&rat(-28, 100), 10), 3);
        assert_eq!(interval_index(&rat_int(0), 10), 0);
        assert_eq!(interval_index(&rat_int(1), 10), 10);
    }

    #[test]
    fn ktw_delta_zero_generates_block_structure() {
        let xor3 = Predicate::xor3();
        let m = AtomicMeasure::delta_zero(&xor3).unwrap();
        let (lifted, trace) =
            ktw_generate(&xor3, &m, 0.1, &rat_int(0), 20, 200, 5).unwrap();
        assert_eq!(trace.n0, 10);
        assert_eq!(lifted.instance.n, 11 * 20);
        // all coordinates land in block 0
        for c in &lifted.instance.constraints {
            for &v in &c.scope {
                assert!(v < 20, "variable outside block I_0");
            }
        }
        // negations roughly fair coin: between 20% and 80% ones
        let ones: usize = lifted
            .instance
            .constraints
            .iter()
            .flat_map(|c| c.shift.iter())
            .filter(|&&b| b == 1)
            .count();
        let total = 3 * 200;
        assert!(ones > total / 5 && ones < 4 * total / 5);
    }

    #[test]
    fn bias_round_single_coordinate_case() {
        // zeta = 0.28, target 0.3: tau = 0.02/0.72 = 1/36, bias exactly 3/10
        let zeta = vec![rat(28, 100)];
        // a 1-coordinate distribution with bias 0.28
        let mut nu = BTreeMap::new();
        nu.insert(vec![0u8], rat(64, 100));
        nu.insert(vec![1u8], rat(36, 100));
        let (rounded, l1) = bias_round(&nu, &zeta, &[rat(3, 10)], &rat(1, 2)).unwrap();
        let b = biases_of(&rounded, 1);
        assert_eq!(b[0], rat(3, 10));
        // tau = 1/36 mixes a point mass on bit 0: l1 = 2 tau (1 - P(0... )
        // verify the mass moved matches tau * (1 - p0) * 2
        let tau = rat(1, 36);
        let expected_l1 = &tau * (rat_int(1) - rat(64, 100)) * rat_usize(2);
        assert_eq!(l1, expected_l1);
        // no-op targets return the distribution unchanged
        let (same, l1) = bias_round(&nu, &zeta, &[rat(28, 100)], &rat(1, 2)).unwrap();
        assert_eq!(same, nu);
        assert!(l1.is_zero());
    }

    #[test]
    fn bias_round_refuses_large_moves() {
        let zeta = vec![rat(1, 10)];
        let mut nu = BTreeMap::new();
        nu.insert(vec![0u8], rat(11, 20));
        nu.insert(vec![1u8], rat(9, 20));
        assert!(matches!(
            bias_round(&nu, &zeta, &[rat(9, 10)], &rat(1, 2)),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn bias_round_random_trials_distance_bound() {
        // measured l1 distance <= 8 k eps / delta when eps/delta <= 0.05
        let mut rng = CounterRng::new(4, &[81]);
        let k = 3;
        let delta = rat(1, 2);
        for _ in 0..50 {
            // random distribution on {0,1}^3 with rational masses
            let mut nu: BTreeMap<Vec<u8>, Rat> = BTreeMap::new();
            let mut total = Rat::zero();
            for alpha in TupleIter::new(2, k) {
                let w = rat_usize(1 + rng.below(9));
                total += &w;
                nu.insert(alpha, w);
            }
            for w in nu.values_mut() {
                *w /= &total;
            }
            let zeta = biases_of(&nu, k);
            // scale into C_delta style range and perturb targets by <= eps
            let zeta: Vec<Rat> = zeta.iter().map(|z| z * &delta).collect();
            let mut nu_scaled: BTreeMap<Vec<u8>, Rat> = BTreeMap::new();
            // mix with uniform so the biases match the scaled zeta
            let unif = (Rat::one() - &delta) / rat_usize(1 << k);
            for alpha in TupleIter::new(2, k) {
                let base = nu.get(&alpha).cloned().unwrap_or_else(Rat::zero);
                nu_scaled.insert(alpha, base * &delta + &unif);
            }
            let eps = rat(1, 80); // eps/delta = 1/40 = 0.025
            let targets: Vec<Rat> = zeta
                .iter()
                .map(|z| {
                    let wiggle = rat_usize(rng.below(3)) * &eps / rat_usize(2);
                    let t = z.abs() + wiggle;
                    if t > Rat::one() {
                        Rat::one()
                    } else {
                        t
                    }
                })
                .collect();
            let (rounded, l1) = bias_round(&nu_scaled, &zeta, &targets, &delta).unwrap();
            let got = biases_of(&rounded, k);
            for j in 0..k {
                let want = if zeta[j].is_negative() {
                    -targets[j].clone()
                } else {
                    targets[j].clone()
                };
                assert_eq!(got[j], want);
            }
            let bound = rat_usize(8 * k) * &eps / &delta;
            assert!(l1 <= bound, "l1 = {l1} exceeds {bound}");
        }
    }

    #[test]
    fn ktw_certificate_delta_zero_value_one() {
        let xor3 = Predicate::xor3();
        let m = AtomicMeasure::delta_zero(&xor3).unwrap();
        let (lifted, trace) = ktw_generate(&xor3, &m, 0.1, &rat_int(0), 15, 300, 11).unwrap();
        let (cert, worst_l1) = ktw_basic_certificate(&xor3, &m, &lifted, &trace).unwrap();
        assert!(worst_l1.is_zero());
        match verify_basic(&lifted.instance, &cert).unwrap() {
            BasicOutcome::Valid(v) => assert_eq!(v, rat_int(1)),
            BasicOutcome::Violated(v) => panic!("{v}"),
        }
    }

    #[test]
    fn ktw_soundness_stays_near_density() {
        // random-assignment value of XOR3 is 1/2; local search on generated
        // instances stays within +-0.1 of it
        let xor3 = Predicate::xor3();
        let m = AtomicMeasure::delta_zero(&xor3).unwrap();
        for seed in 0..5u64 {
            let (lifted, _) = ktw_generate(&xor3, &m, 0.1, &rat_int(0), 25, 12 * 11 * 25, seed)
                .unwrap();
            let (v, _) = opt_local_search(&lifted.instance, seed, 6).unwrap();
            assert!(v >= rat(2, 5) && v <= rat(3, 5), "seed {seed}: {v}");
        }
    }
}
