//! The damped path metrics d_mu / rho_mu and unit-sphere embeddings of small
//! vertex sets via Gram-matrix PSD factorization.
//!
//! For vertices at hypergraph distance d, `d_mu = 1 - (1-mu)^(2d)` and
//! `rho_mu = sqrt((2 d_mu + mu) / (1 + mu))`; disconnected pairs take the
//! d -> infinity limit. A set S embeds isometrically into the unit sphere iff
//! the Gram matrix `G[u][v] = 1 - rho_mu(u,v)^2 / 2` is PSD; the embedding is
//! read off a spectral factorization. Everything here is floating point; the
//! exactness-critical layers never consume these coordinates, only the
//! integer partition structure derived from them.

use crate::error::{Error, Result};
use crate::hypergraph::Hypergraph;

/// PSD tolerance: eigenvalues in [-EIG_CLAMP, 0) are treated as noise.
const EIG_CLAMP: f64 = 1e-6;
/// Reproduction tolerance for pairwise distances of an embedding.
const REPRO_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct MuMetric<'a> {
    h: &'a Hypergraph,
    mu: f64,
    delta_h: usize,
}

impl<'a> MuMetric<'a> {
    /// Builds the metric and fixes the cluster-diameter cap
    /// `Delta_H = ceil(ln(8/3) / (2 mu))`, verifying numerically that any
    /// hypergraph distance with rho_mu <= 1/2 is at most Delta_H.
    pub fn new(h: &'a Hypergraph, mu: f64) -> Result<Self> {
        if !(0.0 < mu && mu < 1.0) {
            return Err(Error::contract(format!("mu = {mu} outside (0, 1)")));
        }
        let delta_h = ((8.0f64 / 3.0).ln() / (2.0 * mu)).ceil() as usize;
        let delta_h = delta_h.max(1);
        let m = MuMetric { h, mu, delta_h };
        // rho is increasing in d, so checking the first excluded distance
        // suffices
        if m.rho_of_distance(Some(delta_h + 1)) <= 0.5 {
            return Err(Error::contract(
                "Delta_H cap does not dominate the rho <= 1/2 ball",
            ));
        }
        Ok(m)
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn delta_h(&self) -> usize {
        self.delta_h
    }

    pub fn hypergraph(&self) -> &Hypergraph {
        self.h
    }

    pub fn d_mu_of_distance(&self, d: Option<usize>) -> f64 {
        match d {
            Some(0) => 0.0,
            Some(d) => 1.0 - (1.0 - self.mu).powi(2 * d as i32),
            None => 1.0,
        }
    }

    fn rho_sq_of_distance(&self, d: Option<usize>) -> f64 {
        if d == Some(0) {
            return 0.0;
        }
        (2.0 * self.d_mu_of_distance(d) + self.mu) / (1.0 + self.mu)
    }

    pub fn rho_of_distance(&self, d: Option<usize>) -> f64 {
        self.rho_sq_of_distance(d).sqrt()
    }

    pub fn d_mu(&self, u: usize, v: usize) -> f64 {
        self.d_mu_of_distance(self.h.distance(u, v))
    }

    pub fn rho_mu(&self, u: usize, v: usize) -> f64 {
        self.rho_of_distance(self.h.distance(u, v))
    }

    /// Gram matrix of the prospective unit-sphere embedding:
    /// diagonal 1, off-diagonal `1 - rho^2 / 2`.
    pub fn gram(&self, set: &[usize]) -> Vec<Vec<f64>> {
        let n = set.len();
        let mut g = vec![vec![0.0; n]; n];
        // one BFS per member instead of one per pair
        for (i, &u) in set.iter().enumerate() {
            let dist = self.h.distances_from(u);
            for (j, &v) in set.iter().enumerate() {
                if i == j {
                    g[i][j] = 1.0;
                } else {
                    g[i][j] = 1.0 - self.rho_sq_of_distance(dist[v]) / 2.0;
                }
            }
        }
        // symmetrize exactly (distances are symmetric, this guards fp order)
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (g[i][j] + g[j][i]);
                g[i][j] = avg;
                g[j][i] = avg;
            }
        }
        g
    }

    /// Embeds the set isometrically into the unit sphere, or reports the
    /// offending minimum eigenvalue.
    pub fn embed(&self, set: &[usize]) -> Result<EmbeddedSet> {
        let g = self.gram(set);
        embed_gram(set, &g, self)
    }
}

/// Unit vectors realizing rho_mu on a vertex set; dimension equals the set
/// size of the originally embedded (parent) set.
#[derive(Debug, Clone)]
pub struct EmbeddedSet {
    vertices: Vec<usize>,
    vectors: Vec<Vec<f64>>,
    dim: usize,
    provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Provenance {
    Fresh,
    RestrictedFrom(Vec<usize>),
}

impl EmbeddedSet {
    /// Test-only constructor from raw coordinates.
    #[cfg(test)]
    pub(crate) fn fabricate(
        vertices: Vec<usize>,
        vectors: Vec<Vec<f64>>,
        provenance: Provenance,
    ) -> EmbeddedSet {
        let dim = vectors.first().map_or(0, |v| v.len());
        EmbeddedSet {
            vertices,
            vectors,
            dim,
            provenance,
        }
    }

    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        l2_dist(&self.vectors[i], &self.vectors[j])
    }

    /// Coordinate-wise restriction to a subset: same ambient dimension, same
    /// vectors, provenance tagged with the parent set.
    pub fn restrict(&self, subset: &[usize]) -> Result<EmbeddedSet> {
        let mut vectors = Vec::with_capacity(subset.len());
        for &v in subset {
            let idx = self
                .vertices
                .iter()
                .position(|&u| u == v)
                .ok_or_else(|| Error::contract(format!("vertex {v} not in parent set")))?;
            vectors.push(self.vectors[idx].clone());
        }
        Ok(EmbeddedSet {
            vertices: subset.to_vec(),
            vectors,
            dim: self.dim,
            provenance: Provenance::RestrictedFrom(self.vertices.clone()),
        })
    }

    /// Pads the ambient dimension with zero coordinates (norms unchanged).
    pub fn pad_to(&self, dim: usize) -> Result<EmbeddedSet> {
        if dim < self.dim {
            return Err(Error::contract("cannot pad to a smaller dimension"));
        }
        let vectors = self
            .vectors
            .iter()
            .map(|v| {
                let mut w = v.clone();
                w.resize(dim, 0.0);
                w
            })
            .collect();
        Ok(EmbeddedSet {
            vertices: self.vertices.clone(),
            vectors,
            dim,
            provenance: self.provenance.clone(),
        })
    }
}

pub fn l2_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn embed_gram(set: &[usize], g: &[Vec<f64>], metric: &MuMetric) -> Result<EmbeddedSet> {
    let n = set.len();
    let (mut eigvals, eigvecs) = jacobi_eigen(g);
    let min_eig = eigvals.iter().cloned().fold(f64::INFINITY, f64::min);
    if min_eig < -EIG_CLAMP {
        return Err(Error::NotEmbeddable {
            min_eigenvalue: min_eig,
        });
    }
    for l in eigvals.iter_mut() {
        if *l < 0.0 {
            *l = 0.0;
        }
    }
    // point u = row u of V * sqrt(Lambda)
    let roots: Vec<f64> = eigvals.iter().map(|l| l.sqrt()).collect();
    let vectors: Vec<Vec<f64>> = (0..n)
        .map(|u| (0..n).map(|j| eigvecs[u][j] * roots[j]).collect())
        .collect();
    let embedded = EmbeddedSet {
        vertices: set.to_vec(),
        vectors,
        dim: n,
        provenance: Provenance::Fresh,
    };
    // reproduction check: unit norms and pairwise rho within tolerance
    for i in 0..n {
        let norm: f64 = embedded.vectors[i].iter().map(|x| x * x).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::violation(format!(
                "embedding vector for vertex {} has norm {norm}",
                set[i]
            )));
        }
        for j in (i + 1)..n {
            let want = metric.rho_mu(set[i], set[j]);
            let got = embedded.distance(i, j);
            if (want - got).abs() > REPRO_TOL {
                return Err(Error::violation(format!(
                    "embedding distance {got} != rho {want} for pair ({}, {})",
                    set[i], set[j]
                )));
            }
        }
    }
    Ok(embedded)
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
/// Returns (eigenvalues, row-major eigenvector matrix V with V[i][j] the
/// i-th coordinate of the j-th eigenvector).
pub fn jacobi_eigen(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut v = vec![vec![0.0; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[i][j] * m[i][j];
            }
        }
        if off < 1e-26 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for i in 0..n {
                    let mip = m[i][p];
                    let miq = m[i][q];
                    m[i][p] = c * mip - s * miq;
                    m[i][q] = s * mip + c * miq;
                }
                for j in 0..n {
                    let mpj = m[p][j];
                    let mqj = m[q][j];
                    m[p][j] = c * mpj - s * mqj;
                    m[q][j] = s * mpj + c * mqj;
                }
                for i in 0..n {
                    let vip = v[i][p];
                    let viq = v[i][q];
                    v[i][p] = c * vip - s * viq;
                    v[i][q] = s * vip + c * viq;
                }
            }
        }
    }
    let eig: Vec<f64> = (0..n).map(|i| m[i][i]).collect();
    (eig, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csp::Instance;
    use crate::hypergraph::{sample_partite, uniform_types};
    use crate::rng::CounterRng;

    fn c5() -> Hypergraph {
        Hypergraph::from_instance(&Instance::c5_maxcut()).unwrap()
    }

    #[test]
    fn metric_formula_values() {
        let h = c5();
        let m = MuMetric::new(&h, 0.1).unwrap();
        // adjacent: d_mu = 1 - 0.9^2 = 0.19
        assert!((m.d_mu(0, 1) - 0.19).abs() < 1e-12);
        assert_eq!(m.d_mu(0, 0), 0.0);
        assert_eq!(m.rho_mu(2, 2), 0.0);
        // disconnected pair
        let lonely = Hypergraph::new(3, 2, vec![vec![0, 1]], None).unwrap();
        let m = MuMetric::new(&lonely, 0.1).unwrap();
        let want = ((2.0 + 0.1) / 1.1f64).sqrt();
        assert!((m.rho_mu(0, 2) - want).abs() < 1e-12);
    }

    #[test]
    fn gram_entries() {
        let h = c5();
        let m = MuMetric::new(&h, 0.1).unwrap();
        let g = m.gram(&[0]);
        assert_eq!(g, vec![vec![1.0]]);
        let g = m.gram(&[0, 1]);
        // off-diagonal = 1 - (2*0.19 + 0.1) / (2*1.1)
        let want = 1.0 - 0.48 / 2.2;
        assert!((g[0][1] - want).abs() < 1e-12);
        assert_eq!(g[0][0], 1.0);
    }

    #[test]
    fn d_mu_monotone_in_d_and_mu() {
        let h = c5();
        let mut grid = Vec::new();
        let mut mu = 0.05;
        while mu <= 0.5 + 1e-9 {
            grid.push(mu);
            mu += 0.05;
        }
        for &mu in &grid {
            let m = MuMetric::new(&h, mu).unwrap();
            let mut last = -1.0;
            for d in 0..=20usize {
                let val = m.d_mu_of_distance(Some(d));
                assert!(val > last - 1e-15);
                last = val;
            }
        }
        for d in 1..=20usize {
            let mut last = -1.0;
            for &mu in &grid {
                let m = MuMetric::new(&h, mu).unwrap();
                let val = m.d_mu_of_distance(Some(d));
                assert!(val >= last);
                last = val;
            }
        }
    }

    #[test]
    fn rho_triangle_inequality_sampled() {
        let h = sample_partite(3, 40, 8, &uniform_types(4, 3), 9).unwrap();
        let m = MuMetric::new(&h, 0.2).unwrap();
        let n = h.num_vertices();
        let mut rng = CounterRng::new(17, &[4]);
        for _ in 0..10_000 {
            let a = rng.below(n);
            let b = rng.below(n);
            let c = rng.below(n);
            let ab = m.rho_mu(a, b);
            let bc = m.rho_mu(b, c);
            let ac = m.rho_mu(a, c);
            assert!(ac <= ab + bc + 1e-12, "triangle failed at ({a},{b},{c})");
        }
    }

    #[test]
    fn pair_always_embeddable() {
        let h = c5();
        let m = MuMetric::new(&h, 0.3).unwrap();
        let e = m.embed(&[0, 2]).unwrap();
        assert_eq!(e.dim(), 2);
        assert!((e.distance(0, 1) - m.rho_mu(0, 2)).abs() < 1e-9);
    }

    #[test]
    fn tree_sets_embed_and_forest_grams_are_psd() {
        for seed in 0..100u64 {
            let mut rng = CounterRng::new(seed, &[5]);
            let n = 8 + rng.below(5);
            let edges: Vec<Vec<usize>> = (1..n).map(|v| vec![rng.below(v), v]).collect();
            let tree = Hypergraph::new(n, 2, edges, None).unwrap();
            let m = MuMetric::new(&tree, 0.05 + 0.3 * rng.next_f64()).unwrap();
            let size = 3 + rng.below(n.min(12) - 2);
            let mut set: Vec<usize> = (0..n).collect();
            // deterministic subset choice
            while set.len() > size {
                let drop = rng.below(set.len());
                set.remove(drop);
            }
            let g = m.gram(&set);
            let (eig, _) = jacobi_eigen(&g);
            let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(min >= -1e-9, "tree gram not PSD: {min}");
            let emb = m.embed(&set).unwrap();
            for i in 0..set.len() {
                for j in (i + 1)..set.len() {
                    assert!((emb.distance(i, j) - m.rho_mu(set[i], set[j])).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn low_girth_graphs_can_fail_to_embed() {
        // a plain 4-cycle turns out to embed at every mu (its critical
        // circulant eigenvalue is (2 d_1^2 + mu) / (2 (1 + mu)) > 0), so the
        // genuine girth-4 witness is K_{3,3}: at mu = 0.09 its Gram matrix
        // has an eigenvalue near -0.06
        let mut edges = Vec::new();
        for a in 0..3usize {
            for b in 3..6usize {
                edges.push(vec![a, b]);
            }
        }
        let k33 = Hypergraph::new(6, 2, edges, None).unwrap();
        let m = MuMetric::new(&k33, 0.09).unwrap();
        match m.embed(&[0, 1, 2, 3, 4, 5]) {
            Err(Error::NotEmbeddable { min_eigenvalue }) => {
                assert!(min_eigenvalue < -1e-2);
            }
            Ok(_) => panic!("K33 at mu = 0.09 unexpectedly embedded"),
            Err(e) => panic!("unexpected error: {e}"),
        }
        // and C4 embeds at tiny mu, as the eigenvalue identity predicts
        let c4 = Hypergraph::new(
            4,
            2,
            vec![vec![0, 1], vec![1, 2], vec![2, 3], vec![3, 0]],
            None,
        )
        .unwrap();
        let m = MuMetric::new(&c4, 0.01).unwrap();
        assert!(m.embed(&[0, 1, 2, 3]).is_ok());
    }

    #[test]
    fn restriction_preserves_distances() {
        let h = sample_partite(2, 30, 10, &uniform_types(3, 2), 2).unwrap();
        let (h, _) = h.girth_repair(5, 10_000_000).unwrap();
        let m = MuMetric::new(&h, 0.4).unwrap();
        let mut rng = CounterRng::new(3, &[6]);
        let mut done = 0;
        let mut attempts = 0;
        while done < 100 && attempts < 400 {
            attempts += 1;
            let mut s: Vec<usize> = Vec::new();
            while s.len() < 5 {
                let v = rng.below(h.num_vertices());
                if !s.contains(&v) {
                    s.push(v);
                }
            }
            s.sort_unstable();
            let t: Vec<usize> = s.iter().copied().take(3).collect();
            let parent = match m.embed(&s) {
                Ok(e) => e,
                Err(Error::NotEmbeddable { .. }) => continue,
                Err(e) => panic!("{e}"),
            };
            let child = parent.restrict(&t).unwrap();
            assert_eq!(child.dim(), parent.dim());
            assert_eq!(child.provenance(), &Provenance::RestrictedFrom(s.clone()));
            // distances equal those of a fresh embedding of t
            if let Ok(fresh) = m.embed(&t) {
                for i in 0..t.len() {
                    for j in (i + 1)..t.len() {
                        assert!((child.distance(i, j) - fresh.distance(i, j)).abs() < 1e-8);
                    }
                }
            }
            done += 1;
        }
        assert!(done >= 50, "too few embeddable samples");
    }
}
