//! Seeded ball carving over embedded point sets and consistency audits for
//! the resulting partitioning scheme.
//!
//! Centers are drawn uniformly from the ambient ball B(0, R0 + Delta/2) by a
//! counter-based stream keyed on (seed, trial), so the j-th center is a pure
//! function of (seed, trial, j, dimension) and never depends on the point
//! set. Carving a restricted embedding with the same stream therefore yields
//! exactly the restriction of the parent partition, which is the coupling the
//! certificate builder relies on.

use crate::error::{Error, Result};
use crate::metric::{l2_dist, EmbeddedSet, MuMetric};
use crate::rng::{stream, CounterRng};
use std::collections::BTreeMap;

/// Hard cap on center draws per carve; hitting it indicates parameter misuse.
const MAX_DRAWS: u64 = 1_000_000;

#[derive(Debug, Clone, Copy)]
pub struct CarveParams {
    /// Cluster l2-diameter bound (1/2 unless overridden).
    pub delta: f64,
    /// Ambient ball radius; 1 for unit-sphere embeddings.
    pub r0: f64,
    /// Master seed for the center stream.
    pub seed: u64,
}

impl Default for CarveParams {
    fn default() -> Self {
        CarveParams {
            delta: 0.5,
            r0: 1.0,
            seed: 0,
        }
    }
}

/// A partition of a vertex set into clusters, with the trial index that
/// produced it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    /// Disjoint, nonempty, sorted clusters of vertex ids covering the set.
    pub clusters: Vec<Vec<usize>>,
    pub trial: u64,
    pub draws: u64,
}

impl Partition {
    pub fn num_clusters(&self) -> usize {
        self.clusters.len()
    }

    /// Restriction to a subset: intersect every cluster, drop empties.
    pub fn restrict(&self, subset: &[usize]) -> Partition {
        let clusters: Vec<Vec<usize>> = self
            .clusters
            .iter()
            .map(|c| {
                c.iter()
                    .copied()
                    .filter(|v| subset.contains(v))
                    .collect::<Vec<usize>>()
            })
            .filter(|c| !c.is_empty())
            .collect();
        Partition {
            clusters: canonical(clusters),
            trial: self.trial,
            draws: self.draws,
        }
    }

    /// Does the partition keep the whole set in one cluster?
    pub fn is_whole(&self) -> bool {
        self.clusters.len() == 1
    }
}

fn canonical(mut clusters: Vec<Vec<usize>>) -> Vec<Vec<usize>> {
    for c in clusters.iter_mut() {
        c.sort_unstable();
    }
    clusters.sort();
    clusters
}

fn draw_center(rng: &mut CounterRng, dim: usize, radius: f64) -> Vec<f64> {
    // spherically symmetric direction, radius scaled by U^(1/d)
    let u = rng.next_f64();
    let mut g = Vec::with_capacity(dim + 1);
    while g.len() < dim {
        let (a, b) = rng.next_normal_pair();
        g.push(a);
        if g.len() < dim {
            g.push(b);
        }
    }
    let norm: f64 = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    let norm = if norm == 0.0 { 1.0 } else { norm };
    let scale = radius * u.powf(1.0 / dim as f64) / norm;
    g.iter().map(|x| x * scale).collect()
}

/// Carves the point set into clusters of l2-diameter at most delta: draw
/// centers from the seeded stream; each center claims the remaining points
/// within delta/2; repeat until no point remains.
pub fn carve(points: &EmbeddedSet, params: &CarveParams, trial: u64) -> Result<Partition> {
    if points.is_empty() {
        return Err(Error::contract("cannot carve an empty point set"));
    }
    for (i, v) in points.vectors().iter().enumerate() {
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > params.r0 + 1e-9 {
            return Err(Error::contract(format!(
                "point for vertex {} lies outside the ambient ball",
                points.vertices()[i]
            )));
        }
    }
    let dim = points.dim();
    let radius = params.r0 + params.delta / 2.0;
    let claim = params.delta / 2.0;
    let mut rng = CounterRng::new(params.seed, &[stream::CARVE, trial]);
    let mut remaining: Vec<usize> = (0..points.len()).collect();
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    let mut draws = 0u64;
    while !remaining.is_empty() {
        if draws >= MAX_DRAWS {
            return Err(Error::budget(
                "carve exceeded the center-draw cap; check delta and R0",
            ));
        }
        let center = draw_center(&mut rng, dim, radius);
        draws += 1;
        let (claimed, kept): (Vec<usize>, Vec<usize>) = remaining
            .iter()
            .partition(|&&i| l2_dist(&points.vectors()[i], &center) <= claim);
        if !claimed.is_empty() {
            clusters.push(claimed.iter().map(|&i| points.vertices()[i]).collect());
            remaining = kept;
        }
    }
    Ok(Partition {
        clusters: canonical(clusters),
        trial,
        draws,
    })
}

/// Embeds the set and carves it, enforcing both diameter invariants on the
/// result (l2 <= delta and hypergraph <= Delta_H).
pub fn sample_partition(
    metric: &MuMetric,
    set: &[usize],
    params: &CarveParams,
    trial: u64,
) -> Result<Partition> {
    let embedded = metric.embed(set)?;
    let partition = carve(&embedded, params, trial)?;
    check_partition_invariants(metric, &embedded, &partition, params)?;
    Ok(partition)
}

/// Verifies the two diameter invariants for every cluster.
pub fn check_partition_invariants(
    metric: &MuMetric,
    points: &EmbeddedSet,
    partition: &Partition,
    params: &CarveParams,
) -> Result<()> {
    let index_of = |v: usize| points.vertices().iter().position(|&u| u == v).unwrap();
    for cluster in &partition.clusters {
        for (a_pos, &a) in cluster.iter().enumerate() {
            for &b in cluster.iter().skip(a_pos + 1) {
                let d = l2_dist(
                    &points.vectors()[index_of(a)],
                    &points.vectors()[index_of(b)],
                );
                if d > params.delta + 1e-9 {
                    return Err(Error::violation(format!(
                        "cluster l2 diameter exceeded at pair ({a}, {b}): {d}"
                    )));
                }
                match metric.hypergraph().distance(a, b) {
                    Some(dh) if dh <= metric.delta_h() => {}
                    other => {
                        return Err(Error::violation(format!(
                            "cluster hypergraph diameter exceeded at pair ({a}, {b}): {other:?} > {}",
                            metric.delta_h()
                        )))
                    }
                }
            }
        }
    }
    Ok(())
}

/// Outcome of a consistency audit between `T ⊆ S`.
#[derive(Debug, Clone)]
pub enum ConsistencyReport {
    /// Per-trial coupled equality: counts of exact matches.
    Coupled { trials: u64, matches: u64 },
    /// Independent embeddings: total-variation estimate between the two
    /// empirical partition distributions of T, with a sampling band.
    Independent {
        trials: u64,
        tv_estimate: f64,
        sampling_band: f64,
        distinct_outcomes: usize,
    },
}

#[derive(Debug, Clone, Copy)]
pub enum AuditFlavor {
    Coupled,
    Independent,
}

/// Audits restriction-consistency of the partitioning scheme on a nested
/// pair. Coupled mode must match exactly on every trial; independent mode
/// compares distributions only.
pub fn scheme_consistency_audit(
    metric: &MuMetric,
    s: &[usize],
    t: &[usize],
    params: &CarveParams,
    trials: u64,
    flavor: AuditFlavor,
) -> Result<ConsistencyReport> {
    if !t.iter().all(|v| s.contains(v)) {
        return Err(Error::contract("audit pair is not nested"));
    }
    let parent = metric.embed(s)?;
    match flavor {
        AuditFlavor::Coupled => {
            let child = parent.restrict(t)?;
            let mut matches = 0u64;
            for trial in 0..trials {
                let ps = carve(&parent, params, trial)?;
                let pt = carve(&child, params, trial)?;
                if ps.restrict(t).clusters == pt.clusters {
                    matches += 1;
                }
            }
            Ok(ConsistencyReport::Coupled { trials, matches })
        }
        AuditFlavor::Independent => {
            // fresh embedding of T, padded into the parent dimension so both
            // carves see the same center law
            let fresh = metric.embed(t)?.pad_to(parent.dim())?;
            let child_seed = CounterRng::derive(params.seed, &[stream::AUDIT, 7]);
            let child_params = CarveParams {
                seed: child_seed,
                ..*params
            };
            let mut counts: BTreeMap<Vec<Vec<usize>>, (u64, u64)> = BTreeMap::new();
            for trial in 0..trials {
                let ps = carve(&parent, params, trial)?.restrict(t);
                counts.entry(ps.clusters).or_default().0 += 1;
                let pt = carve(&fresh, &child_params, trial)?;
                counts.entry(pt.clusters).or_default().1 += 1;
            }
            let tv: f64 = counts
                .values()
                .map(|&(a, b)| ((a as f64) - (b as f64)).abs())
                .sum::<f64>()
                / (2.0 * trials as f64);
            let distinct = counts.len();
            // crude Dvoretzky-style band for the difference of two empiricals
            let band = 2.0 * ((distinct as f64) / (trials as f64)).sqrt();
            Ok(ConsistencyReport::Independent {
                trials,
                tv_estimate: tv,
                sampling_band: band,
                distinct_outcomes: distinct,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csp::Instance;
    use crate::hypergraph::{sample_partite, uniform_types, Hypergraph};
    use crate::metric::Provenance;

    fn unit_points(vectors: Vec<Vec<f64>>) -> EmbeddedSet {
        // test-only: fabricate an embedded set directly
        EmbeddedSet::fabricate((0..vectors.len()).collect(), vectors, Provenance::Fresh)
    }

    #[test]
    fn singleton_and_identical_points() {
        let params = CarveParams::default();
        let one = unit_points(vec![vec![1.0, 0.0]]);
        let p = carve(&one, &params, 0).unwrap();
        assert_eq!(p.clusters, vec![vec![0]]);
        let same = unit_points(vec![vec![1.0, 0.0], vec![1.0, 0.0]]);
        for trial in 0..50 {
            let p = carve(&same, &params, trial).unwrap();
            assert_eq!(p.clusters, vec![vec![0, 1]], "identical points split");
        }
    }

    #[test]
    fn antipodal_points_always_split() {
        let params = CarveParams::default();
        let anti = unit_points(vec![vec![1.0, 0.0], vec![-1.0, 0.0]]);
        for trial in 0..50 {
            let p = carve(&anti, &params, trial).unwrap();
            assert_eq!(p.num_clusters(), 2, "distance 2 > delta yet merged");
        }
    }

    #[test]
    fn carve_is_deterministic() {
        let params = CarveParams {
            seed: 42,
            ..Default::default()
        };
        let pts = unit_points(vec![
            vec![1.0, 0.0, 0.0],
            vec![0.96, 0.28, 0.0],
            vec![0.0, 1.0, 0.0],
        ]);
        let a = carve(&pts, &params, 7).unwrap();
        let b = carve(&pts, &params, 7).unwrap();
        assert_eq!(a, b);
        let c = carve(&pts, &params, 8).unwrap();
        // different trial may differ; at least the draws counter moves
        assert_eq!(c.trial, 8);
    }

    #[test]
    fn coupled_restriction_equality_holds_exactly() {
        let h = sample_partite(2, 40, 12, &uniform_types(3, 2), 21).unwrap();
        let (h, _) = h.girth_repair(4, 10_000_000).unwrap();
        let metric = MuMetric::new(&h, 0.45).unwrap();
        let params = CarveParams {
            seed: 11,
            ..Default::default()
        };
        let mut audited = 0;
        for view in 0..40u64 {
            let mut rng = CounterRng::new(view, &[12]);
            let mut s: Vec<usize> = Vec::new();
            while s.len() < 4 {
                let v = rng.below(h.num_vertices());
                if !s.contains(&v) {
                    s.push(v);
                }
            }
            s.sort_unstable();
            let t: Vec<usize> = s.iter().copied().take(2).collect();
            match scheme_consistency_audit(&metric, &s, &t, &params, 100, AuditFlavor::Coupled)
            {
                Ok(ConsistencyReport::Coupled { trials, matches }) => {
                    assert_eq!(trials, matches, "coupled audit mismatch");
                    audited += 1;
                }
                Ok(_) => unreachable!(),
                Err(Error::NotEmbeddable { .. }) => continue,
                Err(e) => panic!("{e}"),
            }
        }
        assert!(audited >= 20);
    }

    #[test]
    fn independent_singleton_is_point_mass() {
        let inst = Instance::c5_maxcut();
        let h = Hypergraph::from_instance(&inst).unwrap();
        let metric = MuMetric::new(&h, 0.3).unwrap();
        let params = CarveParams {
            seed: 5,
            ..Default::default()
        };
        match scheme_consistency_audit(
            &metric,
            &[0, 2],
            &[2],
            &params,
            500,
            AuditFlavor::Independent,
        )
        .unwrap()
        {
            ConsistencyReport::Independent {
                tv_estimate,
                distinct_outcomes,
                ..
            } => {
                assert_eq!(distinct_outcomes, 1);
                assert_eq!(tv_estimate, 0.0);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn edge_split_frequency_within_analysis_bounds() {
        // on a forest at tiny mu the per-pair separation frequency obeys
        // 2 sqrt(d) rho / Delta + 3 sigma, and the whole-edge split
        // frequency obeys 10 k sqrt(mu t) + 3 sigma with the latter <= 0.1
        use crate::gap::{lift_instance, Template};
        let tpl = Template::c5();
        let lifted = lift_instance(&tpl, 40, 60, 33).unwrap();
        let h = Hypergraph::from_instance(&lifted.instance).unwrap();
        let (h, _) = h.girth_repair(62, 100_000_000).unwrap();
        let (mu, t, k) = (5e-6f64, 4usize, 2usize);
        let metric = MuMetric::new(&h, mu).unwrap();
        let lemma_bound = 10.0 * k as f64 * (mu * t as f64).sqrt();
        assert!(lemma_bound <= 0.1, "parameters must make the bound binding");
        let params = CarveParams {
            delta: 0.5,
            r0: 1.0,
            seed: 3,
        };
        let edge = h.edges()[0].clone();
        let points = metric.embed(&edge).unwrap();
        let trials = 10_000u64;
        let mut split = 0u64;
        for trial in 0..trials {
            if carve(&points, &params, trial).unwrap().num_clusters() > 1 {
                split += 1;
            }
        }
        let freq = split as f64 / trials as f64;
        let sigma = (freq.max(1e-9) * (1.0 - freq) / trials as f64).sqrt();
        let d = points.dim() as f64;
        let rho = metric.rho_mu(edge[0], edge[1]);
        let pair_bound = 2.0 * d.sqrt() * rho / params.delta + 3.0 * sigma;
        assert!(freq <= pair_bound, "freq {freq} > pair bound {pair_bound}");
        assert!(
            freq <= lemma_bound + 3.0 * sigma,
            "freq {freq} > split bound {}",
            lemma_bound + 3.0 * sigma
        );
    }

    #[test]
    fn separation_monotone_in_delta() {
        // statistical: separation frequency of a fixed pair does not increase
        // with delta on a grid
        let h = sample_partite(2, 30, 10, &uniform_types(3, 2), 8).unwrap();
        let (h, _) = h.girth_repair(4, 10_000_000).unwrap();
        let metric = MuMetric::new(&h, 0.4).unwrap();
        // find an adjacent pair that survived the repair
        let e = h.edges()[0].clone();
        let set = vec![e[0], e[1]];
        let mut last = f64::INFINITY;
        for delta in [0.3, 0.5, 0.8, 1.2] {
            let params = CarveParams {
                delta,
                r0: 1.0,
                seed: 77,
            };
            let emb = metric.embed(&set).unwrap();
            let mut split = 0u64;
            let trials = 3000u64;
            for trial in 0..trials {
                if carve(&emb, &params, trial).unwrap().num_clusters() > 1 {
                    split += 1;
                }
            }
            let freq = split as f64 / trials as f64;
            assert!(freq <= last + 0.03, "separation grew with delta");
            last = freq;
        }
    }
}
