//! Local-distribution certificates and their exact verifiers.
//!
//! A basic-LP or Sherali-Adams solution is presented as a family of local
//! probability distributions with exact rational weights. Verification never
//! touches floating point: a certificate either satisfies every marginal
//! equation exactly or the first violated row is reported with both sides.

use crate::csp::Instance;
use crate::error::{Error, Result};
use crate::ratio::{rat_to_string, Rat};
use num::traits::{One, Signed, Zero};
use std::collections::BTreeMap;

/// A probability distribution over assignments to a sorted set of variables.
/// Only assignments with nonzero weight are stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalDistribution {
    domain: Vec<usize>,
    probs: BTreeMap<Vec<u8>, Rat>,
}

impl LocalDistribution {
    pub fn new(domain: Vec<usize>, probs: BTreeMap<Vec<u8>, Rat>) -> Result<Self> {
        if domain.is_empty() {
            return Err(Error::contract("distribution domain is empty"));
        }
        if domain.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::contract("distribution domain must be sorted and distinct"));
        }
        let mut total = Rat::zero();
        let mut clean = BTreeMap::new();
        for (a, p) in probs {
            if a.len() != domain.len() {
                return Err(Error::contract("assignment length != domain size"));
            }
            if p.is_negative() {
                return Err(Error::contract("negative probability"));
            }
            if p.is_zero() {
                continue;
            }
            total += &p;
            clean.insert(a, p);
        }
        if !total.is_one() {
            return Err(Error::contract(format!(
                "probabilities sum to {}, not 1",
                rat_to_string(&total)
            )));
        }
        Ok(LocalDistribution {
            domain,
            probs: clean,
        })
    }

    /// Point mass on a single assignment.
    pub fn point(domain: Vec<usize>, values: Vec<u8>) -> Result<Self> {
        let mut probs = BTreeMap::new();
        probs.insert(values, Rat::one());
        LocalDistribution::new(domain, probs)
    }

    /// Singleton distribution for one variable.
    pub fn singleton(var: usize, weights: &[Rat]) -> Result<Self> {
        let probs = weights
            .iter()
            .enumerate()
            .map(|(b, w)| (vec![b as u8], w.clone()))
            .collect();
        LocalDistribution::new(vec![var], probs)
    }

    pub fn domain(&self) -> &[usize] {
        &self.domain
    }

    pub fn support(&self) -> impl Iterator<Item = (&Vec<u8>, &Rat)> {
        self.probs.iter()
    }

    pub fn prob_of(&self, values: &[u8]) -> Rat {
        self.probs.get(values).cloned().unwrap_or_else(Rat::zero)
    }

    /// Exact marginal onto a subset of the domain (given sorted).
    pub fn marginal(&self, onto: &[usize]) -> Result<LocalDistribution> {
        let positions: Vec<usize> = onto
            .iter()
            .map(|v| {
                self.domain
                    .binary_search(v)
                    .map_err(|_| Error::structure(format!("variable {v} not in domain")))
            })
            .collect::<Result<Vec<usize>>>()?;
        let mut probs: BTreeMap<Vec<u8>, Rat> = BTreeMap::new();
        for (a, p) in &self.probs {
            let key: Vec<u8> = positions.iter().map(|&i| a[i]).collect();
            *probs.entry(key).or_insert_with(Rat::zero) += p;
        }
        LocalDistribution::new(onto.to_vec(), probs)
    }

    /// Independent product with a distribution on disjoint variables.
    pub fn product(&self, other: &LocalDistribution) -> Result<LocalDistribution> {
        let mut domain: Vec<usize> = self.domain.clone();
        domain.extend_from_slice(&other.domain);
        let mut merged: Vec<(usize, usize, bool)> = Vec::new(); // (var, src idx, from self)
        for (i, &v) in self.domain.iter().enumerate() {
            merged.push((v, i, true));
        }
        for (i, &v) in other.domain.iter().enumerate() {
            merged.push((v, i, false));
        }
        merged.sort_unstable();
        if merged.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::contract("product of overlapping domains"));
        }
        let dom: Vec<usize> = merged.iter().map(|&(v, _, _)| v).collect();
        let mut probs = BTreeMap::new();
        for (a, p) in &self.probs {
            for (b, q) in &other.probs {
                let key: Vec<u8> = merged
                    .iter()
                    .map(|&(_, i, mine)| if mine { a[i] } else { b[i] })
                    .collect();
                probs.insert(key, p * q);
            }
        }
        LocalDistribution::new(dom, probs)
    }

    /// Largest absolute difference against another distribution on the same
    /// domain (0 means exactly equal).
    pub fn max_abs_diff(&self, other: &LocalDistribution) -> Result<Rat> {
        if self.domain != other.domain {
            return Err(Error::structure("distributions on different domains"));
        }
        let mut keys: Vec<&Vec<u8>> = self.probs.keys().collect();
        keys.extend(other.probs.keys());
        keys.sort();
        keys.dedup();
        let mut worst = Rat::zero();
        for k in keys {
            let d = (self.prob_of(k) - other.prob_of(k)).abs();
            if d > worst {
                worst = d;
            }
        }
        Ok(worst)
    }

    /// Expected value of the shifted predicate evaluation over this
    /// distribution, for a constraint whose scope set equals the domain.
    pub fn constraint_value(&self, inst: &Instance, ci: usize) -> Result<Rat> {
        let c = &inst.constraints[ci];
        let mut sorted = c.scope.clone();
        sorted.sort_unstable();
        if sorted != self.domain {
            return Err(Error::structure(format!(
                "distribution domain does not match scope of constraint {ci}"
            )));
        }
        let q = inst.predicate.q() as u8;
        let mut value = Rat::zero();
        for (a, p) in &self.probs {
            // a is indexed by the sorted domain; evaluate in scope order
            let tuple: Vec<u8> = c
                .scope
                .iter()
                .zip(&c.shift)
                .map(|(&v, &b)| {
                    let pos = self.domain.binary_search(&v).unwrap();
                    (a[pos] + b) % q
                })
                .collect();
            if inst.predicate.eval_tuple(&tuple) {
                value += p;
            }
        }
        Ok(value)
    }
}

/// Basic-LP certificate: one distribution per constraint scope and one per
/// variable.
#[derive(Debug, Clone)]
pub struct BasicCertificate {
    pub per_constraint: Vec<LocalDistribution>,
    pub per_variable: Vec<LocalDistribution>,
}

/// Location and both sides of the first violated marginal row.
#[derive(Debug, Clone)]
pub struct MarginalViolation {
    pub constraint: usize,
    pub variable: usize,
    pub value: u8,
    pub lhs: Rat,
    pub rhs: Rat,
}

impl std::fmt::Display for MarginalViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "constraint {} variable {} value {}: marginal {} != singleton {}",
            self.constraint,
            self.variable,
            self.value,
            rat_to_string(&self.lhs),
            rat_to_string(&self.rhs)
        )
    }
}

/// Outcome of `verify_basic`.
#[derive(Debug, Clone)]
pub enum BasicOutcome {
    /// All rows hold exactly; carries the exact objective.
    Valid(Rat),
    /// First violated marginalization row.
    Violated(MarginalViolation),
}

/// Checks a basic-LP certificate exactly against the instance: every
/// constraint marginal must equal the singleton distribution of the variable.
pub fn verify_basic(inst: &Instance, cert: &BasicCertificate) -> Result<BasicOutcome> {
    if cert.per_constraint.len() != inst.m() {
        return Err(Error::structure(format!(
            "certificate has {} constraint distributions, instance has {}",
            cert.per_constraint.len(),
            inst.m()
        )));
    }
    if cert.per_variable.len() != inst.n {
        return Err(Error::structure(format!(
            "certificate has {} variable distributions, instance has {}",
            cert.per_variable.len(),
            inst.n
        )));
    }
    let q = inst.predicate.q();
    for (v, d) in cert.per_variable.iter().enumerate() {
        if d.domain() != [v] {
            return Err(Error::structure(format!(
                "singleton distribution {v} has domain {:?}",
                d.domain()
            )));
        }
        let _ = q;
    }
    for (ci, c) in inst.constraints.iter().enumerate() {
        let d = &cert.per_constraint[ci];
        let mut sorted = c.scope.clone();
        sorted.sort_unstable();
        if d.domain() != sorted.as_slice() {
            return Err(Error::structure(format!(
                "constraint {ci} distribution domain {:?} != scope {:?}",
                d.domain(),
                sorted
            )));
        }
        for &v in &c.scope {
            let marg = d.marginal(&[v])?;
            for b in 0..q as u8 {
                let lhs = marg.prob_of(&[b]);
                let rhs = cert.per_variable[v].prob_of(&[b]);
                if lhs != rhs {
                    return Ok(BasicOutcome::Violated(MarginalViolation {
                        constraint: ci,
                        variable: v,
                        value: b,
                        lhs,
                        rhs,
                    }));
                }
            }
        }
    }
    let mut total = Rat::zero();
    for ci in 0..inst.m() {
        total += cert.per_constraint[ci].constraint_value(inst, ci)?;
    }
    Ok(BasicOutcome::Valid(total / Rat::from_integer(inst.m().into())))
}

/// Point-mass basic certificate induced by a global assignment.
pub fn point_mass_basic(inst: &Instance, a: &crate::csp::Assignment) -> Result<BasicCertificate> {
    let per_variable = (0..inst.n)
        .map(|v| LocalDistribution::point(vec![v], vec![a.0[v]]))
        .collect::<Result<Vec<_>>>()?;
    let per_constraint = inst
        .constraints
        .iter()
        .map(|c| {
            let mut dom = c.scope.clone();
            dom.sort_unstable();
            let vals: Vec<u8> = dom.iter().map(|&v| a.0[v]).collect();
            LocalDistribution::point(dom, vals)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BasicCertificate {
        per_constraint,
        per_variable,
    })
}

/// A level-t Sherali-Adams certificate: local distributions for the stored
/// variable subsets (keyed by sorted variable list).
#[derive(Debug, Clone)]
pub struct SaCertificate {
    pub t: usize,
    pub family: BTreeMap<Vec<usize>, LocalDistribution>,
}

/// Result of auditing an SA certificate.
#[derive(Debug, Clone)]
pub struct SaAudit {
    /// Exact objective over constraint scopes.
    pub value: Rat,
    /// Largest absolute difference over all audited marginal equations.
    pub max_residual: Rat,
    /// Number of audited (subset, superset) pairs.
    pub audited_pairs: usize,
    /// First pair with nonzero residual, if any.
    pub worst_pair: Option<(Vec<usize>, Vec<usize>)>,
}

/// Exact objective and consistency audit of an SA certificate.
///
/// `audit_pairs` lists `(T, S)` pairs with `T ⊆ S`; for each pair the
/// family's distribution on `S`, marginalized to `T`, is compared exactly to
/// the family's distribution on `T`.
pub fn verify_sa(
    inst: &Instance,
    cert: &SaCertificate,
    audit_pairs: &[(Vec<usize>, Vec<usize>)],
) -> Result<SaAudit> {
    let mut value = Rat::zero();
    for (ci, c) in inst.constraints.iter().enumerate() {
        let mut dom = c.scope.clone();
        dom.sort_unstable();
        let d = cert
            .family
            .get(&dom)
            .ok_or_else(|| Error::structure(format!("family misses scope of constraint {ci}")))?;
        value += d.constraint_value(inst, ci)?;
    }
    value /= Rat::from_integer(inst.m().into());

    let mut max_residual = Rat::zero();
    let mut worst_pair = None;
    for (t_set, s_set) in audit_pairs {
        if !t_set.iter().all(|v| s_set.contains(v)) {
            return Err(Error::contract(format!(
                "audit pair is not nested: {t_set:?} not a subset of {s_set:?}"
            )));
        }
        let ds = cert
            .family
            .get(s_set)
            .ok_or_else(|| Error::structure(format!("audited set {s_set:?} missing from family")))?;
        let dt = cert
            .family
            .get(t_set)
            .ok_or_else(|| Error::structure(format!("audited set {t_set:?} missing from family")))?;
        let marg = ds.marginal(t_set)?;
        let diff = marg.max_abs_diff(dt)?;
        if diff > max_residual {
            max_residual = diff;
            worst_pair = Some((t_set.clone(), s_set.clone()));
        }
    }
    Ok(SaAudit {
        value,
        max_residual,
        audited_pairs: audit_pairs.len(),
        worst_pair,
    })
}

/// Builds the family induced by one global distribution (used by tests: its
/// residual is exactly 0 on any audit).
pub fn family_from_global(
    global: &LocalDistribution,
    sets: &[Vec<usize>],
    t: usize,
) -> Result<SaCertificate> {
    let mut family = BTreeMap::new();
    for s in sets {
        family.insert(s.clone(), global.marginal(s)?);
    }
    Ok(SaCertificate { t, family })
}
