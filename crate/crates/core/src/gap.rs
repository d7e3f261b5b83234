//! End-to-end gap pipeline: lift a basic-LP gap template to a random
//! block-structured instance, copy its certificate, estimate soundness,
//! propagate distributions on trees, and assemble an exactly-consistent
//! Sherali-Adams certificate from seeded carving trials.
//!
//! The family is finitely representable because every set shares the same M
//! carving trials: per set and trial the partition clusters are completed to
//! their hypergraph closures and filled by tree propagation, and the final
//! distribution is the exact rational average over trials. Sets audited
//! along a chain reuse the maximal set's embedding by restriction, so all
//! audited marginal equations hold exactly, not approximately.

use crate::cert::{verify_basic, BasicCertificate, BasicOutcome, LocalDistribution, SaCertificate};
use crate::csp::{opt_exhaustive, opt_local_search, Constraint, Instance};
use crate::error::{Error, Result};
use crate::hypergraph::Hypergraph;
use crate::metric::{EmbeddedSet, MuMetric};
use crate::partition::{carve, check_partition_invariants, CarveParams};
use crate::ratio::{rat_usize, Rat};
use crate::rng::{stream, CounterRng};
use num::traits::Zero;
use std::collections::{BTreeMap, BTreeSet};

/// A basic-LP gap template: a small instance together with a verified
/// certificate of LP value `lp_value` and (claimed) integral soundness.
#[derive(Debug, Clone)]
pub struct Template {
    pub instance: Instance,
    pub certificate: BasicCertificate,
    pub lp_value: Rat,
    pub soundness: Rat,
}

impl Template {
    /// Checks the certificate exactly and that it meets the claimed value.
    pub fn validate(&self) -> Result<Rat> {
        match verify_basic(&self.instance, &self.certificate)? {
            BasicOutcome::Valid(v) => {
                if v < self.lp_value {
                    Err(Error::violation(format!(
                        "template certificate value {v} below claimed {}",
                        self.lp_value
                    )))
                } else {
                    Ok(v)
                }
            }
            BasicOutcome::Violated(v) => Err(Error::violation(format!(
                "template certificate invalid: {v}"
            ))),
        }
    }

    /// C5 MAX-CUT with the uniform-on-disagreements certificate:
    /// basic-LP value 1, integral optimum 4/5.
    pub fn c5() -> Template {
        let instance = Instance::c5_maxcut();
        let certificate = uniform_cut_certificate(&instance);
        Template {
            instance,
            certificate,
            lp_value: Rat::from_integer(1.into()),
            soundness: Rat::new(4.into(), 5.into()),
        }
    }

    /// Triangle MAX-CUT, basic-LP value 1, integral optimum 2/3.
    pub fn k3() -> Template {
        let instance = Instance::k3_maxcut();
        let certificate = uniform_cut_certificate(&instance);
        Template {
            instance,
            certificate,
            lp_value: Rat::from_integer(1.into()),
            soundness: Rat::new(2.into(), 3.into()),
        }
    }
}

/// The optimal MAX-CUT basic-LP certificate: every edge uniform on its two
/// disagreeing assignments, every singleton uniform.
pub fn uniform_cut_certificate(inst: &Instance) -> BasicCertificate {
    let half = Rat::new(1.into(), 2.into());
    let per_variable = (0..inst.n)
        .map(|v| LocalDistribution::singleton(v, &[half.clone(), half.clone()]).unwrap())
        .collect();
    let per_constraint = inst
        .constraints
        .iter()
        .map(|c| {
            let mut dom = c.scope.clone();
            dom.sort_unstable();
            let mut probs = BTreeMap::new();
            probs.insert(vec![0u8, 1u8], half.clone());
            probs.insert(vec![1u8, 0u8], half.clone());
            LocalDistribution::new(dom, probs).unwrap()
        })
        .collect();
    BasicCertificate {
        per_constraint,
        per_variable,
    }
}

/// A lifted instance: block-structured, with one back-pointer per constraint
/// to the template constraint that generated it.
#[derive(Debug, Clone)]
pub struct LiftedInstance {
    pub instance: Instance,
    /// Constraint index in the template, per lifted constraint.
    pub origins: Vec<usize>,
    pub seed: u64,
    pub n_per_block: usize,
}

/// Samples the lifted instance: each constraint picks a uniform template
/// constraint and one uniform variable from each of its scope blocks.
pub fn lift_instance(tpl: &Template, n: usize, m: usize, seed: u64) -> Result<LiftedInstance> {
    if m < 1 {
        return Err(Error::contract("need at least one lifted constraint"));
    }
    if n < 1 {
        return Err(Error::contract("blocks need at least one variable"));
    }
    tpl.validate()?;
    let n0 = tpl.instance.n;
    let m0 = tpl.instance.m();
    let big_n = n0 * n;
    let parts: Vec<(usize, usize)> = (0..n0).map(|b| (b * n, (b + 1) * n)).collect();
    let mut rng = CounterRng::new(seed, &[stream::LIFT]);
    let mut constraints = Vec::with_capacity(m);
    let mut origins = Vec::with_capacity(m);
    for _ in 0..m {
        let c0 = rng.below(m0);
        let template_constraint = &tpl.instance.constraints[c0];
        let mut scope = Vec::with_capacity(template_constraint.scope.len());
        for &block in &template_constraint.scope {
            // template scopes are distinct, so blocks differ per position;
            // the rejection guard still protects degenerate templates
            let mut tries = 0;
            loop {
                let v = block * n + rng.below(n);
                if !scope.contains(&v) {
                    scope.push(v);
                    break;
                }
                tries += 1;
                if tries > 1000 {
                    return Err(Error::budget("lift collision resampling exhausted"));
                }
            }
        }
        constraints.push(Constraint::new(scope, template_constraint.shift.clone()));
        origins.push(c0);
    }
    let instance = Instance::new(
        tpl.instance.predicate.clone(),
        big_n,
        Some(parts),
        constraints,
    )?;
    Ok(LiftedInstance {
        instance,
        origins,
        seed,
        n_per_block: n,
    })
}

/// Result of the seeded soundness experiment.
#[derive(Debug, Clone)]
pub struct SoundnessReport {
    pub per_trial: Vec<Rat>,
    pub max_observed: Rat,
    pub exhaustive: bool,
}

/// Generates `trials` independent lifted instances and returns the largest
/// optimum estimate: exact when `q^N` fits the budget, otherwise seeded
/// local search (a valid lower bound on each optimum).
pub fn soundness_estimate(
    tpl: &Template,
    n: usize,
    m: usize,
    trials: usize,
    seed: u64,
    exhaustive_budget: u128,
    restarts: usize,
) -> Result<SoundnessReport> {
    if trials == 0 {
        return Err(Error::contract("soundness estimate needs trials >= 1"));
    }
    let results = crate::par::map_indexed(trials, |i| -> Result<(Rat, bool)> {
        let trial_seed = CounterRng::derive(seed, &[stream::SOUNDNESS, i as u64]);
        let lifted = lift_instance(tpl, n, m, trial_seed)?;
        match opt_exhaustive(&lifted.instance, exhaustive_budget) {
            Ok((v, _)) => Ok((v, true)),
            Err(Error::Budget(_)) => {
                let (v, _) = opt_local_search(&lifted.instance, trial_seed, restarts)?;
                Ok((v, false))
            }
            Err(e) => Err(e),
        }
    });
    let mut per_trial = Vec::with_capacity(trials);
    let mut exhaustive = true;
    for r in results {
        let (v, ex) = r?;
        per_trial.push(v);
        exhaustive &= ex;
    }
    let max_observed = per_trial.iter().cloned().max().unwrap();
    Ok(SoundnessReport {
        per_trial,
        max_observed,
        exhaustive,
    })
}

/// Copies the template's distributions onto the lifted instance: each
/// constraint inherits its template constraint's scope distribution, each
/// variable its block's singleton distribution.
pub fn lift_basic_certificate(
    tpl: &Template,
    lifted: &LiftedInstance,
) -> Result<BasicCertificate> {
    let n = lifted.n_per_block;
    let per_variable = (0..lifted.instance.n)
        .map(|v| {
            let block = v / n;
            let src = &tpl.certificate.per_variable[block];
            let probs = src
                .support()
                .map(|(a, p)| (a.clone(), p.clone()))
                .collect();
            LocalDistribution::new(vec![v], probs)
        })
        .collect::<Result<Vec<_>>>()?;
    let per_constraint = lifted
        .instance
        .constraints
        .iter()
        .zip(&lifted.origins)
        .map(|(c, &c0)| {
            let template_constraint = &tpl.instance.constraints[c0];
            transport_distribution(
                &tpl.certificate.per_constraint[c0],
                &template_constraint.scope,
                &c.scope,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BasicCertificate {
        per_constraint,
        per_variable,
    })
}

/// Transports a distribution through the position map template scope ->
/// lifted scope (both ordered tuples; domains are the sorted sets).
fn transport_distribution(
    src: &LocalDistribution,
    src_scope: &[usize],
    dst_scope: &[usize],
) -> Result<LocalDistribution> {
    let mut dst_domain: Vec<usize> = dst_scope.to_vec();
    dst_domain.sort_unstable();
    let probs = src
        .support()
        .map(|(a, p)| {
            // src assignment indexed by sorted src domain; read through the
            // scope positions
            let mut values = vec![0u8; dst_domain.len()];
            for (pos, &sv) in src_scope.iter().enumerate() {
                let src_idx = src.domain().binary_search(&sv).unwrap();
                let dv = dst_scope[pos];
                let dst_idx = dst_domain.binary_search(&dv).unwrap();
                values[dst_idx] = a[src_idx];
            }
            (values, p.clone())
        })
        .collect();
    LocalDistribution::new(dst_domain, probs)
}

/// Exact joint distribution over the 1-closure of `u`, marginalized to `u`,
/// by propagating edge distributions over the closure's hypertree.
///
/// Preconditions checked exactly: the closure's edges must form a forest
/// (independent components multiply), and on every vertex shared by two
/// edges all incident edge marginals must equal the vertex distribution.
pub fn tree_joint(
    h: &Hypergraph,
    u: &[usize],
    edge_dists: &BTreeMap<usize, LocalDistribution>,
    vertex_dists: &dyn Fn(usize) -> Option<LocalDistribution>,
) -> Result<LocalDistribution> {
    if u.is_empty() {
        return Err(Error::contract("tree_joint on an empty set"));
    }
    let mut u_sorted = u.to_vec();
    u_sorted.sort_unstable();
    u_sorted.dedup();

    // cl(U): U plus all vertices of edges meeting U in >= 2 vertices
    let mut closure: BTreeSet<usize> = u_sorted.iter().copied().collect();
    for e in h.edges() {
        if e.iter().filter(|v| u_sorted.binary_search(v).is_ok()).count() >= 2 {
            closure.extend(e.iter().copied());
        }
    }
    let closure: Vec<usize> = closure.into_iter().collect();
    let edges_in = h.edges_within(&closure);

    // shared-vertex marginal agreement
    let mut deg: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &ei in &edges_in {
        for &v in &h.edges()[ei] {
            deg.entry(v).or_default().push(ei);
        }
    }
    for (&v, incident) in &deg {
        if incident.len() < 2 {
            continue;
        }
        let want = vertex_dists(v)
            .ok_or_else(|| Error::structure(format!("missing vertex distribution for {v}")))?;
        for &ei in incident {
            let marg = edge_dists
                .get(&ei)
                .ok_or_else(|| Error::structure(format!("missing edge distribution for {ei}")))?
                .marginal(&[v])?;
            if marg != want {
                return Err(Error::violation(format!(
                    "shared-vertex marginal mismatch at vertex {v}, edge {ei}: edge gives {:?}, vertex gives {:?}",
                    marg, want
                )));
            }
        }
    }

    // forest traversal; an edge meeting the covered set in >= 2 vertices
    // closes a cycle
    let mut visited = vec![false; edges_in.len()];
    let mut joint: Option<LocalDistribution> = None;
    for start in 0..edges_in.len() {
        if visited[start] {
            continue;
        }
        visited[start] = true;
        let e0 = edges_in[start];
        let mut component = edge_dists
            .get(&e0)
            .ok_or_else(|| Error::structure(format!("missing edge distribution for {e0}")))?
            .clone();
        let mut covered: BTreeSet<usize> = h.edges()[e0].iter().copied().collect();
        loop {
            let mut attached = false;
            for idx in 0..edges_in.len() {
                if visited[idx] {
                    continue;
                }
                let ei = edges_in[idx];
                let shared: Vec<usize> = h.edges()[ei]
                    .iter()
                    .copied()
                    .filter(|v| covered.contains(v))
                    .collect();
                match shared.len() {
                    0 => continue,
                    1 => {
                        let attach = shared[0];
                        let d_e = edge_dists.get(&ei).ok_or_else(|| {
                            Error::structure(format!("missing edge distribution for {ei}"))
                        })?;
                        component = extend_conditional(&component, d_e, attach)?;
                        covered.extend(h.edges()[ei].iter().copied());
                        visited[idx] = true;
                        attached = true;
                    }
                    _ => {
                        return Err(Error::NonTree(format!(
                            "edge {ei} meets the covered set in {:?}; closure of {:?} has a cycle",
                            shared, u_sorted
                        )))
                    }
                }
            }
            if !attached {
                break;
            }
        }
        joint = Some(match joint {
            None => component,
            Some(j) => j.product(&component)?,
        });
    }

    // isolated members of U (not covered by any closure edge)
    let covered_by_edges: BTreeSet<usize> = edges_in
        .iter()
        .flat_map(|&ei| h.edges()[ei].iter().copied())
        .collect();
    for &v in &u_sorted {
        if !covered_by_edges.contains(&v) {
            let d_v = vertex_dists(v)
                .ok_or_else(|| Error::structure(format!("missing vertex distribution for {v}")))?;
            joint = Some(match joint {
                None => d_v,
                Some(j) => j.product(&d_v)?,
            });
        }
    }
    joint.unwrap().marginal(&u_sorted)
}

/// Extends a partial joint by one edge sharing exactly the vertex `attach`:
/// new mass = old mass * edge mass / attach marginal.
fn extend_conditional(
    joint: &LocalDistribution,
    edge: &LocalDistribution,
    attach: usize,
) -> Result<LocalDistribution> {
    let attach_marg = edge.marginal(&[attach])?;
    let joint_pos = joint.domain().binary_search(&attach).unwrap();
    let edge_pos = edge.domain().binary_search(&attach).unwrap();
    // merged domain
    let mut domain: Vec<usize> = joint.domain().to_vec();
    for &v in edge.domain() {
        if v != attach {
            domain.push(v);
        }
    }
    domain.sort_unstable();
    let mut probs: BTreeMap<Vec<u8>, Rat> = BTreeMap::new();
    for (a, p) in joint.support() {
        let b = a[joint_pos];
        let denom = attach_marg.prob_of(&[b]);
        if denom.is_zero() {
            continue;
        }
        for (be, q) in edge.support() {
            if be[edge_pos] != b {
                continue;
            }
            let mut values = vec![0u8; domain.len()];
            for (i, &v) in joint.domain().iter().enumerate() {
                values[domain.binary_search(&v).unwrap()] = a[i];
            }
            for (i, &v) in edge.domain().iter().enumerate() {
                values[domain.binary_search(&v).unwrap()] = be[i];
            }
            let mass = p * q / &denom;
            *probs.entry(values).or_insert_with(Rat::zero) += mass;
        }
    }
    LocalDistribution::new(domain, probs)
}

/// Parameters of the SA certificate builder.
#[derive(Debug, Clone)]
pub struct SaParams {
    /// Certificate level: every stored set has at most t variables.
    pub t: usize,
    /// Metric damping parameter.
    pub mu: f64,
    /// Carving parameters (diameter bound, ambient radius, master seed).
    pub carve: CarveParams,
    /// Number of shared trials M; probabilities have denominator dividing M
    /// times the template denominators.
    pub trials: u64,
    /// DFS budget for hypergraph closures.
    pub closure_budget: usize,
}

/// Raw measurements from the build, enough to recompute the accounting.
#[derive(Debug, Clone)]
pub struct SaBuildReport {
    pub m_total: usize,
    pub m_deleted: usize,
    /// Per surviving constraint: (constraint index, split trials out of M).
    pub split_counts: Vec<(usize, u64)>,
    pub trials: u64,
    /// Lifted basic certificate value (exact).
    pub c_lift: Rat,
    /// Sum over surviving constraints of per-constraint certificate value,
    /// divided by m: a lower bound certified during the build.
    pub value_lower_bound: Rat,
    /// Number of unsplit (scope kept whole) trial identities checked
    /// against the lifted distributions; all must match exactly.
    pub unsplit_identities_checked: u64,
    /// Chains actually used (after embeddability filtering).
    pub chains_used: usize,
    pub delta_h: usize,
}

impl SaBuildReport {
    /// Fraction of constraints deleted by pruning and girth repair.
    pub fn f_del(&self) -> Rat {
        rat_usize(self.m_deleted) / rat_usize(self.m_total)
    }

    /// Split mass over surviving constraints: sum of per-constraint split
    /// frequencies, divided by the total constraint count.
    pub fn f_split(&self) -> Rat {
        let mut total = Rat::zero();
        for (_, s) in &self.split_counts {
            total += rat_usize(*s as usize);
        }
        total / (rat_usize(self.m_total) * rat_usize(self.trials as usize))
    }
}

/// Builds the level-t family on all constraint scopes plus the audit chains.
///
/// `repaired` must be the lifted hypergraph after degree pruning and girth
/// repair, with `deleted` the removed constraint indices; `basic` is the
/// lifted basic certificate. Every set in a chain is carved on the maximal
/// set's embedding restricted to it, so the family is exactly consistent
/// along all chains.
pub fn build_sa_certificate(
    lifted: &LiftedInstance,
    basic: &BasicCertificate,
    repaired: &Hypergraph,
    deleted: &[usize],
    params: &SaParams,
    chains: &[Vec<Vec<usize>>],
) -> Result<(SaCertificate, SaBuildReport)> {
    let inst = &lifted.instance;
    let c_lift = match verify_basic(inst, basic)? {
        BasicOutcome::Valid(v) => v,
        BasicOutcome::Violated(v) => {
            return Err(Error::violation(format!("lifted certificate invalid: {v}")))
        }
    };
    let metric = MuMetric::new(repaired, params.mu)?;
    let delta_h = metric.delta_h();
    let deleted_set: BTreeSet<usize> = deleted.iter().copied().collect();

    // surviving constraint index per repaired edge
    let surviving: Vec<usize> = (0..inst.m()).filter(|ci| !deleted_set.contains(ci)).collect();
    if surviving.len() != repaired.edges().len() {
        return Err(Error::structure(
            "repaired hypergraph does not match the deleted set",
        ));
    }
    // edge distributions on the repaired hypergraph
    let edge_dists: BTreeMap<usize, LocalDistribution> = surviving
        .iter()
        .enumerate()
        .map(|(ei, &ci)| (ei, basic.per_constraint[ci].clone()))
        .collect();
    let vertex_dists = |v: usize| -> Option<LocalDistribution> {
        basic.per_variable.get(v).cloned()
    };

    // validate chains: sorted sets, strictly nested descending, size <= t
    let mut seen_sets: BTreeSet<Vec<usize>> = BTreeSet::new();
    for chain in chains {
        if chain.is_empty() {
            return Err(Error::contract("empty audit chain"));
        }
        for (i, set) in chain.iter().enumerate() {
            if set.is_empty() || set.len() > params.t {
                return Err(Error::contract(format!(
                    "chain set {set:?} violates 1 <= |S| <= t = {}",
                    params.t
                )));
            }
            if set.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::contract("chain sets must be sorted and distinct"));
            }
            if i > 0 {
                let parent = &chain[i - 1];
                if !set.iter().all(|v| parent.binary_search(v).is_ok()) || set.len() >= parent.len()
                {
                    return Err(Error::contract(
                        "chain must be strictly nested, largest set first",
                    ));
                }
            }
            if !seen_sets.insert(set.clone()) {
                return Err(Error::contract(format!(
                    "set {set:?} appears in more than one chain"
                )));
            }
        }
    }

    // jobs: every chain, plus a singleton chain per scope set not already
    // covered by some chain
    let mut jobs: Vec<Vec<Vec<usize>>> = chains.to_vec();
    let mut scope_sets: BTreeSet<Vec<usize>> = BTreeSet::new();
    for c in &inst.constraints {
        let mut dom = c.scope.clone();
        dom.sort_unstable();
        scope_sets.insert(dom);
    }
    for set in &scope_sets {
        if !seen_sets.contains(set) {
            jobs.push(vec![set.clone()]);
        }
    }

    // constraint scopes by set, for split accounting and identity checks
    let mut constraints_by_set: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
    for (ci, c) in inst.constraints.iter().enumerate() {
        if deleted_set.contains(&ci) {
            continue;
        }
        let mut dom = c.scope.clone();
        dom.sort_unstable();
        constraints_by_set.entry(dom).or_default().push(ci);
    }

    struct JobOutput {
        dists: Vec<(Vec<usize>, LocalDistribution)>,
        splits: Vec<(Vec<usize>, u64)>,
        identities: u64,
    }

    let trials = params.trials;
    let outputs = crate::par::map_indexed(jobs.len(), |ji| -> Result<JobOutput> {
        let chain = &jobs[ji];
        let parent = metric.embed(&chain[0])?;
        let embeddings: Vec<EmbeddedSet> = chain
            .iter()
            .enumerate()
            .map(|(si, set)| {
                if si == 0 {
                    Ok(parent.clone())
                } else {
                    parent.restrict(set)
                }
            })
            .collect::<Result<_>>()?;
        let mut sums: Vec<BTreeMap<Vec<u8>, Rat>> = vec![BTreeMap::new(); chain.len()];
        let mut splits: Vec<u64> = vec![0; chain.len()];
        let mut identities = 0u64;
        for trial in 0..trials {
            for (si, set) in chain.iter().enumerate() {
                let points = &embeddings[si];
                let partition = carve(points, &params.carve, trial)?;
                check_partition_invariants(&metric, points, &partition, &params.carve)?;
                if partition.num_clusters() > 1 {
                    splits[si] += 1;
                }
                // per-trial distribution: independent product over clusters
                // of the closure joint marginalized to the cluster
                let mut trial_dist: Option<LocalDistribution> = None;
                for cluster in &partition.clusters {
                    let d = if cluster.len() == 1 {
                        vertex_dists(cluster[0]).ok_or_else(|| {
                            Error::structure(format!("missing vertex distribution {}", cluster[0]))
                        })?
                    } else {
                        let w = repaired.closure(cluster, delta_h, params.closure_budget)?;
                        tree_joint(repaired, &w, &edge_dists, &vertex_dists)?
                            .marginal(cluster)?
                    };
                    trial_dist = Some(match trial_dist {
                        None => d,
                        Some(t) => t.product(&d)?,
                    });
                }
                let trial_dist = trial_dist.unwrap();
                // unsplit-trial identity: a whole surviving scope reproduces
                // its lifted edge distribution exactly
                if partition.num_clusters() == 1 {
                    if let Some(cis) = constraints_by_set.get(set) {
                        for &ci in cis {
                            if trial_dist != basic.per_constraint[ci] {
                                return Err(Error::violation(format!(
                                    "unsplit trial {trial} does not reproduce the lifted distribution of constraint {ci}"
                                )));
                            }
                            identities += 1;
                        }
                    }
                }
                for (a, p) in trial_dist.support() {
                    *sums[si].entry(a.clone()).or_insert_with(Rat::zero) += p;
                }
            }
        }
        let m_rat = rat_usize(trials as usize);
        let dists = chain
            .iter()
            .zip(sums)
            .map(|(set, sum)| {
                let probs = sum.into_iter().map(|(a, p)| (a, p / &m_rat)).collect();
                LocalDistribution::new(set.clone(), probs).map(|d| (set.clone(), d))
            })
            .collect::<Result<Vec<_>>>()?;
        let splits = chain
            .iter()
            .cloned()
            .zip(splits)
            .collect();
        Ok(JobOutput {
            dists,
            splits,
            identities,
        })
    });

    let mut family: BTreeMap<Vec<usize>, LocalDistribution> = BTreeMap::new();
    let mut split_by_set: BTreeMap<Vec<usize>, u64> = BTreeMap::new();
    let mut identities = 0u64;
    for out in outputs {
        let out = out?;
        for (set, d) in out.dists {
            family.insert(set, d);
        }
        for (set, s) in out.splits {
            split_by_set.insert(set, s);
        }
        identities += out.identities;
    }

    // deleted scopes keep a consistent product distribution unless the set
    // is already present from a surviving constraint or a chain
    for (ci, c) in inst.constraints.iter().enumerate() {
        if !deleted_set.contains(&ci) {
            continue;
        }
        let mut dom = c.scope.clone();
        dom.sort_unstable();
        if family.contains_key(&dom) {
            continue;
        }
        let mut d: Option<LocalDistribution> = None;
        for &v in &dom {
            let dv = vertex_dists(v)
                .ok_or_else(|| Error::structure(format!("missing vertex distribution {v}")))?;
            d = Some(match d {
                None => dv,
                Some(acc) => acc.product(&dv)?,
            });
        }
        family.insert(dom, d.unwrap());
    }

    // singletons referenced by audits may be useful; they are cheap and make
    // the family self-contained for singleton consistency checks
    for v in family
        .keys()
        .flat_map(|s| s.iter().copied())
        .collect::<BTreeSet<usize>>()
    {
        let key = vec![v];
        if !family.contains_key(&key) {
            family.insert(
                key,
                vertex_dists(v)
                    .ok_or_else(|| Error::structure(format!("missing vertex distribution {v}")))?,
            );
        }
    }

    // accounting
    let mut split_counts = Vec::new();
    let mut value_lower = Rat::zero();
    for (set, cis) in &constraints_by_set {
        let splits = *split_by_set.get(set).unwrap_or(&trials);
        for &ci in cis {
            split_counts.push((ci, splits));
            // val_C >= (unsplit fraction) * value of the lifted distribution
            let unsplit = rat_usize((trials - splits) as usize) / rat_usize(trials as usize);
            let v_c = basic.per_constraint[ci].constraint_value(inst, ci)?;
            value_lower += unsplit * v_c;
        }
    }
    value_lower /= rat_usize(inst.m());
    split_counts.sort_unstable();

    let report = SaBuildReport {
        m_total: inst.m(),
        m_deleted: deleted.len(),
        split_counts,
        trials,
        c_lift,
        value_lower_bound: value_lower,
        unsplit_identities_checked: identities,
        chains_used: chains.len(),
        delta_h,
    };
    Ok((
        SaCertificate {
            t: params.t,
            family,
        },
        report,
    ))
}

/// Draws disjoint random audit chains of nested embeddable sets.
///
/// Each chain is `[S, T]` with `|S| = t`, `T ⊂ S`, skipping draws whose
/// maximal set is not embeddable in the metric.
pub fn generate_audit_chains(
    metric: &MuMetric,
    t: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<Vec<Vec<usize>>>> {
    let n = metric.hypergraph().num_vertices();
    if t < 2 || t > n {
        return Err(Error::contract("audit chains need 2 <= t <= n"));
    }
    let mut rng = CounterRng::new(seed, &[stream::AUDIT, 2]);
    let mut chains = Vec::with_capacity(count);
    let mut seen: BTreeSet<Vec<usize>> = BTreeSet::new();
    let mut attempts = 0usize;
    while chains.len() < count {
        attempts += 1;
        if attempts > 100 * count + 1000 {
            return Err(Error::budget(
                "could not draw enough embeddable audit chains",
            ));
        }
        let mut set: BTreeSet<usize> = BTreeSet::new();
        while set.len() < t {
            set.insert(rng.below(n));
        }
        let s: Vec<usize> = set.into_iter().collect();
        let child_size = 1 + rng.below(t - 1);
        let mut child: Vec<usize> = s.clone();
        while child.len() > child_size {
            let drop = rng.below(child.len());
            child.remove(drop);
        }
        if seen.contains(&s) || seen.contains(&child) {
            continue;
        }
        if metric.embed(&s).is_err() {
            continue;
        }
        seen.insert(s.clone());
        seen.insert(child.clone());
        chains.push(vec![s, child]);
    }
    Ok(chains)
}

/// All nested (subset, superset) pairs within the chains, for `verify_sa`.
pub fn chain_audit_pairs(chains: &[Vec<Vec<usize>>]) -> Vec<(Vec<usize>, Vec<usize>)> {
    let mut pairs = Vec::new();
    for chain in chains {
        for i in 0..chain.len() {
            for j in (i + 1)..chain.len() {
                pairs.push((chain[j].clone(), chain[i].clone()));
            }
        }
    }
    pairs
}

/// Default damping parameter `2 ln ln N / ln N`, clamped into (0, 1).
pub fn default_mu(big_n: usize) -> f64 {
    let n = (big_n.max(3)) as f64;
    let mu = 2.0 * n.ln().ln() / n.ln();
    mu.clamp(1e-6, 0.99)
}

/// Suggested level from the construction's parameter coupling
/// `t = eps^2 / (400 k^2 mu)`; a guide value echoed in reports.
pub fn suggested_level(epsilon: f64, k: usize, mu: f64) -> f64 {
    epsilon * epsilon / (400.0 * (k * k) as f64 * mu)
}

/// Full pipeline configuration.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    pub t: usize,
    /// Damping parameter; `None` takes `default_mu` of the lifted size.
    pub mu: Option<f64>,
    pub mu_scale: f64,
    pub delta: f64,
    pub trials: u64,
    pub epsilon: f64,
    /// Degree cap for pruning; `None` takes the construction's own
    /// `100 ln(n0/eps) k gamma`.
    pub prune_degree: Option<usize>,
    /// Girth target; `None` skips repair entirely.
    pub girth: Option<usize>,
    pub audit_chains: usize,
    pub audit_seed: u64,
    pub soundness_trials: usize,
    pub restarts: usize,
    pub exhaustive_budget: u128,
    pub closure_budget: usize,
    pub cycle_budget: usize,
}

impl PipelineConfig {
    pub fn desk(n: usize, m: usize, seed: u64, t: usize, trials: u64) -> Self {
        PipelineConfig {
            n,
            m,
            seed,
            t,
            mu: None,
            mu_scale: 1.0,
            delta: 0.5,
            trials,
            epsilon: 0.1,
            prune_degree: None,
            girth: None,
            audit_chains: 100,
            audit_seed: 1,
            soundness_trials: 0,
            restarts: 20,
            exhaustive_budget: 1 << 20,
            closure_budget: 10_000_000,
            cycle_budget: 50_000_000,
        }
    }
}

/// Everything a certify run produces; the CLI serializes this into the
/// report.
#[derive(Debug)]
pub struct PipelineOutput {
    pub lifted: LiftedInstance,
    pub basic: BasicCertificate,
    pub certificate: SaCertificate,
    pub report: SaBuildReport,
    pub audit: crate::cert::SaAudit,
    pub chains: Vec<Vec<Vec<usize>>>,
    pub deleted: Vec<usize>,
    pub prune_deleted: usize,
    pub girth_deleted: usize,
    pub mu_used: f64,
    pub degree_cap: usize,
    pub girth_target: Option<usize>,
    pub t_suggested: f64,
    pub soundness: Option<SoundnessReport>,
}

impl PipelineOutput {
    /// Completeness threshold: value >= c - eps, exact comparison.
    pub fn completeness_pass(&self, tpl: &Template, epsilon: f64) -> bool {
        let eps = Rat::from_float(epsilon).unwrap_or_else(Rat::zero);
        self.audit.max_residual.is_zero() && self.audit.value >= &tpl.lp_value - eps
    }

    /// Soundness threshold: every observed optimum <= s + eps.
    pub fn soundness_pass(&self, tpl: &Template, epsilon: f64) -> bool {
        let eps = Rat::from_float(epsilon).unwrap_or_else(Rat::zero);
        match &self.soundness {
            Some(report) => report.max_observed <= &tpl.soundness + eps,
            None => true,
        }
    }
}

/// Lift, certify, prune, carve, assemble, and audit in one deterministic
/// run.
pub fn run_pipeline(tpl: &Template, cfg: &PipelineConfig) -> Result<PipelineOutput> {
    let lifted = lift_instance(tpl, cfg.n, cfg.m, cfg.seed)?;
    let basic = lift_basic_certificate(tpl, &lifted)?;
    let h = Hypergraph::from_instance(&lifted.instance)?;

    // degree prune with the construction's own cap unless overridden
    let n0 = tpl.instance.n;
    let k = tpl.instance.predicate.k();
    let gamma = cfg.m as f64 / (cfg.n * n0).max(1) as f64;
    let degree_cap = cfg.prune_degree.unwrap_or_else(|| {
        (100.0 * (n0 as f64 / cfg.epsilon.max(1e-9)).ln() * k as f64 * gamma.max(1.0)).ceil()
            as usize
    });
    let (pruned, deleted_by_prune) = h.degree_prune(degree_cap.max(1))?;
    let prune_deleted = deleted_by_prune.len();

    // optional girth repair on the pruned hypergraph
    let (repaired, deleted_by_girth) = match cfg.girth {
        Some(g) => pruned.girth_repair(g, cfg.cycle_budget)?,
        None => (pruned, Vec::new()),
    };
    let girth_deleted = deleted_by_girth.len();

    // compose deleted sets back to original constraint indices
    let survivors_after_prune: Vec<usize> = (0..lifted.instance.m())
        .filter(|ci| !deleted_by_prune.contains(ci))
        .collect();
    let mut deleted: Vec<usize> = deleted_by_prune.clone();
    for &j in &deleted_by_girth {
        deleted.push(survivors_after_prune[j]);
    }
    deleted.sort_unstable();

    let mu_used = cfg.mu.unwrap_or_else(|| default_mu(lifted.instance.n)) * cfg.mu_scale;
    let metric = MuMetric::new(&repaired, mu_used)?;
    let chains = generate_audit_chains(&metric, cfg.t, cfg.audit_chains, cfg.audit_seed)?;

    let params = SaParams {
        t: cfg.t,
        mu: mu_used,
        carve: CarveParams {
            delta: cfg.delta,
            r0: 1.0,
            seed: cfg.seed,
        },
        trials: cfg.trials,
        closure_budget: cfg.closure_budget,
    };
    let (certificate, report) =
        build_sa_certificate(&lifted, &basic, &repaired, &deleted, &params, &chains)?;
    let pairs = chain_audit_pairs(&chains);
    let audit = crate::cert::verify_sa(&lifted.instance, &certificate, &pairs)?;

    let soundness = if cfg.soundness_trials > 0 {
        Some(soundness_estimate(
            tpl,
            cfg.n,
            cfg.m,
            cfg.soundness_trials,
            cfg.seed,
            cfg.exhaustive_budget,
            cfg.restarts,
        )?)
    } else {
        None
    };

    Ok(PipelineOutput {
        lifted,
        basic,
        certificate,
        report,
        audit,
        chains,
        deleted,
        prune_deleted,
        girth_deleted,
        mu_used,
        degree_cap,
        girth_target: cfg.girth,
        t_suggested: suggested_level(cfg.epsilon, k, mu_used),
        soundness,
    })
}
