//! k-uniform constraint hypergraphs: distances, closures, cycle counting,
//! girth repair, degree pruning, sparsity audits, and the incidence graph.
//!
//! Cycles follow the hypergraph convention: a cycle of length l is an
//! alternating sequence (v_1, e_1, ..., v_l, e_l, v_1) with distinct anchor
//! vertices and distinct edges, so two edges sharing two vertices already
//! form a 2-cycle. Girth is the length of the shortest cycle.

use crate::csp::Instance;
use crate::error::{Error, Result};
use crate::rng::CounterRng;
use std::collections::{BTreeSet, VecDeque};

#[derive(Debug, Clone)]
pub struct Hypergraph {
    n: usize,
    k: usize,
    /// Sorted k-sets of distinct vertices.
    edges: Vec<Vec<usize>>,
    /// Block label per vertex, when the instance is partite.
    blocks: Option<Vec<usize>>,
    /// vertex -> indices of incident edges
    incident: Vec<Vec<usize>>,
}

impl Hypergraph {
    pub fn new(n: usize, k: usize, edges: Vec<Vec<usize>>, blocks: Option<Vec<usize>>) -> Result<Self> {
        if k < 2 {
            return Err(Error::contract("hyperedges need k >= 2"));
        }
        let mut sorted_edges = Vec::with_capacity(edges.len());
        for (ei, e) in edges.into_iter().enumerate() {
            if e.len() != k {
                return Err(Error::contract(format!("edge {ei} has {} vertices, expected {k}", e.len())));
            }
            let mut e = e;
            e.sort_unstable();
            if e.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::contract(format!("edge {ei} repeats a vertex")));
            }
            if *e.last().unwrap() >= n {
                return Err(Error::contract(format!("edge {ei} references vertex out of range")));
            }
            sorted_edges.push(e);
        }
        if let Some(b) = &blocks {
            if b.len() != n {
                return Err(Error::contract("block labels must cover every vertex"));
            }
        }
        let mut incident = vec![Vec::new(); n];
        for (ei, e) in sorted_edges.iter().enumerate() {
            for &v in e {
                incident[v].push(ei);
            }
        }
        Ok(Hypergraph {
            n,
            k,
            edges: sorted_edges,
            blocks,
            incident,
        })
    }

    /// Hypergraph of a CSP instance: one edge per constraint scope.
    pub fn from_instance(inst: &Instance) -> Result<Self> {
        let blocks = inst.parts.as_ref().map(|parts| {
            let mut labels = vec![0usize; inst.n];
            for (bi, &(s, e)) in parts.iter().enumerate() {
                for l in labels.iter_mut().take(e).skip(s) {
                    *l = bi;
                }
            }
            labels
        });
        Hypergraph::new(
            inst.n,
            inst.predicate.k(),
            inst.constraints.iter().map(|c| c.scope.clone()).collect(),
            blocks,
        )
    }

    pub fn num_vertices(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn edges(&self) -> &[Vec<usize>] {
        &self.edges
    }

    pub fn blocks(&self) -> Option<&[usize]> {
        self.blocks.as_deref()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.incident[v].len()
    }

    pub fn incident_edges(&self, v: usize) -> &[usize] {
        &self.incident[v]
    }

    /// Shortest-path distance in edge steps; `None` when disconnected.
    pub fn distance(&self, u: usize, v: usize) -> Option<usize> {
        if u == v {
            return Some(0);
        }
        let mut dist = vec![usize::MAX; self.n];
        dist[u] = 0;
        let mut queue = VecDeque::from([u]);
        while let Some(x) = queue.pop_front() {
            for &ei in &self.incident[x] {
                for &y in &self.edges[ei] {
                    if dist[y] == usize::MAX {
                        dist[y] = dist[x] + 1;
                        if y == v {
                            return Some(dist[y]);
                        }
                        queue.push_back(y);
                    }
                }
            }
        }
        None
    }

    /// BFS distances from one source (edge steps).
    pub fn distances_from(&self, u: usize) -> Vec<Option<usize>> {
        let mut dist = vec![usize::MAX; self.n];
        dist[u] = 0;
        let mut queue = VecDeque::from([u]);
        while let Some(x) = queue.pop_front() {
            for &ei in &self.incident[x] {
                for &y in &self.edges[ei] {
                    if dist[y] == usize::MAX {
                        dist[y] = dist[x] + 1;
                        queue.push_back(y);
                    }
                }
            }
        }
        dist.into_iter()
            .map(|d| if d == usize::MAX { None } else { Some(d) })
            .collect()
    }

    /// R-closure: S plus the vertex sets of all simple paths of length at
    /// most R connecting two members of S. Path vertex sets include every
    /// vertex of every traversed edge.
    ///
    /// `budget` caps the number of DFS states; exceeding it is an error.
    pub fn closure(&self, s: &[usize], r: usize, budget: usize) -> Result<Vec<usize>> {
        if r < 1 {
            return Err(Error::contract("closure radius must be >= 1"));
        }
        let mut in_s = vec![false; self.n];
        for &v in s {
            in_s[v] = true;
        }
        let mut dfs = ClosureDfs {
            h: self,
            in_s,
            result: s.iter().copied().collect(),
            used_v: vec![false; self.n],
            used_e: vec![false; self.edges.len()],
            stack_edges: Vec::new(),
            states: 0,
            budget,
        };
        for &start in s {
            dfs.used_v[start] = true;
            dfs.run(start, r)?;
            dfs.used_v[start] = false;
        }
        Ok(dfs.result.into_iter().collect())
    }

    /// Edges entirely contained in the (sorted) vertex set.
    pub fn edges_within(&self, set: &[usize]) -> Vec<usize> {
        self.edges
            .iter()
            .enumerate()
            .filter(|(_, e)| e.iter().all(|v| set.binary_search(v).is_ok()))
            .map(|(ei, _)| ei)
            .collect()
    }

    /// Removes every edge containing a vertex whose degree in `self` exceeds
    /// `d`. Returns the pruned hypergraph and the deleted edge indices.
    pub fn degree_prune(&self, d: usize) -> Result<(Hypergraph, Vec<usize>)> {
        if d < 1 {
            return Err(Error::contract("degree cap must be >= 1"));
        }
        let hot: Vec<bool> = (0..self.n).map(|v| self.degree(v) > d).collect();
        let mut kept = Vec::new();
        let mut deleted = Vec::new();
        for (ei, e) in self.edges.iter().enumerate() {
            if e.iter().any(|&v| hot[v]) {
                deleted.push(ei);
            } else {
                kept.push(e.clone());
            }
        }
        let pruned = Hypergraph::new(self.n, self.k, kept, self.blocks.clone())?;
        Ok((pruned, deleted))
    }

    /// Counts distinct cycles of length at most `l` (lengths start at 2).
    ///
    /// A cycle is counted once per equivalence class under rotation and
    /// reversal: enumeration roots at the smallest anchor vertex and requires
    /// the first edge index to be smaller than the closing edge index.
    pub fn count_cycles_upto(&self, l: usize, budget: usize) -> Result<usize> {
        if l < 2 {
            return Err(Error::contract("cycle length bound must be >= 2"));
        }
        let mut count = 0usize;
        let mut states = 0usize;
        let mut used_v = vec![false; self.n];
        let mut used_e = vec![false; self.edges.len()];
        for root in 0..self.n {
            used_v[root] = true;
            count += self.cycle_dfs(
                root, root, 1, l, None, &mut used_v, &mut used_e, &mut states, budget,
            )?;
            used_v[root] = false;
        }
        Ok(count)
    }

    #[allow(clippy::too_many_arguments)]
    fn cycle_dfs(
        &self,
        root: usize,
        at: usize,
        len: usize,
        l: usize,
        first_edge: Option<usize>,
        used_v: &mut Vec<bool>,
        used_e: &mut Vec<bool>,
        states: &mut usize,
        budget: usize,
    ) -> Result<usize> {
        let mut found = 0usize;
        for &ei in &self.incident[at] {
            if used_e[ei] {
                continue;
            }
            *states += 1;
            if *states > budget {
                return Err(Error::budget("cycle enumeration budget exceeded"));
            }
            // closing edge: contains both the current anchor and the root
            if len >= 2 {
                if let Some(fe) = first_edge {
                    if fe < ei && self.edges[ei].binary_search(&root).is_ok() {
                        found += 1;
                    }
                }
            }
            if len < l {
                used_e[ei] = true;
                let fe = first_edge.or(Some(ei));
                for &next in &self.edges[ei] {
                    if used_v[next] || next <= root {
                        continue;
                    }
                    used_v[next] = true;
                    found += self.cycle_dfs(
                        root, next, len + 1, l, fe, used_v, used_e, states, budget,
                    )?;
                    used_v[next] = false;
                }
                used_e[ei] = false;
            }
        }
        Ok(found)
    }

    /// First cycle of length < g in canonical enumeration order, as the list
    /// of its edge indices; `None` when girth >= g.
    fn find_short_cycle(&self, g: usize, budget: usize) -> Result<Option<Vec<usize>>> {
        for l in 2..g {
            let mut states = 0usize;
            for root in 0..self.n {
                let mut used_v = vec![false; self.n];
                let mut used_e = vec![false; self.edges.len()];
                used_v[root] = true;
                let mut path = Vec::new();
                if let Some(cycle) = self.find_cycle_dfs(
                    root, root, 1, l, &mut path, &mut used_v, &mut used_e, &mut states, budget,
                )? {
                    return Ok(Some(cycle));
                }
            }
        }
        Ok(None)
    }

    #[allow(clippy::too_many_arguments)]
    fn find_cycle_dfs(
        &self,
        root: usize,
        at: usize,
        len: usize,
        l: usize,
        path: &mut Vec<usize>,
        used_v: &mut Vec<bool>,
        used_e: &mut Vec<bool>,
        states: &mut usize,
        budget: usize,
    ) -> Result<Option<Vec<usize>>> {
        for &ei in &self.incident[at] {
            if used_e[ei] {
                continue;
            }
            *states += 1;
            if *states > budget {
                return Err(Error::budget("girth search budget exceeded"));
            }
            if len == l {
                // only the closing edge can complete a length-l cycle now
                if let Some(&first) = path.first() {
                    if first < ei && self.edges[ei].binary_search(&root).is_ok() {
                        let mut cycle = path.clone();
                        cycle.push(ei);
                        return Ok(Some(cycle));
                    }
                }
                continue;
            }
            used_e[ei] = true;
            path.push(ei);
            for &next in &self.edges[ei] {
                if used_v[next] || next <= root {
                    continue;
                }
                used_v[next] = true;
                if let Some(c) = self.find_cycle_dfs(
                    root, next, len + 1, l, path, used_v, used_e, states, budget,
                )? {
                    return Ok(Some(c));
                }
                used_v[next] = false;
            }
            path.pop();
            used_e[ei] = false;
        }
        Ok(None)
    }

    /// Deletes edges until no cycle of length < g remains: repeatedly find
    /// the first shortest cycle and delete its lexicographically largest
    /// edge. Returns the repaired hypergraph and deleted original indices.
    pub fn girth_repair(&self, g: usize, budget: usize) -> Result<(Hypergraph, Vec<usize>)> {
        if g < 2 {
            return Err(Error::contract("girth target must be >= 2"));
        }
        let mut current = self.clone();
        // current edge index -> original edge index
        let mut origin: Vec<usize> = (0..self.edges.len()).collect();
        let mut deleted = Vec::new();
        while let Some(cycle) = current.find_short_cycle(g, budget)? {
            let &victim = cycle
                .iter()
                .max_by(|&&a, &&b| current.edges[a].cmp(&current.edges[b]).then(a.cmp(&b)))
                .unwrap();
            deleted.push(origin[victim]);
            let kept_edges: Vec<Vec<usize>> = current
                .edges
                .iter()
                .enumerate()
                .filter(|(ei, _)| *ei != victim)
                .map(|(_, e)| e.clone())
                .collect();
            origin.remove(victim);
            current = Hypergraph::new(self.n, self.k, kept_edges, self.blocks.clone())?;
        }
        deleted.sort_unstable();
        Ok((current, deleted))
    }

    /// The bipartite vertex-edge incidence graph.
    pub fn incidence_graph(&self) -> IncidenceGraph {
        IncidenceGraph {
            num_vertices: self.n,
            num_edges: self.edges.len(),
            edge_members: self.edges.clone(),
            incident: self.incident.clone(),
        }
    }
}

struct ClosureDfs<'a> {
    h: &'a Hypergraph,
    in_s: Vec<bool>,
    result: BTreeSet<usize>,
    used_v: Vec<bool>,
    used_e: Vec<bool>,
    stack_edges: Vec<usize>,
    states: usize,
    budget: usize,
}

impl ClosureDfs<'_> {
    fn run(&mut self, at: usize, depth_left: usize) -> Result<()> {
        if depth_left == 0 {
            return Ok(());
        }
        for ii in 0..self.h.incident[at].len() {
            let ei = self.h.incident[at][ii];
            if self.used_e[ei] {
                continue;
            }
            self.states += 1;
            if self.states > self.budget {
                return Err(Error::budget("closure path enumeration budget exceeded"));
            }
            self.used_e[ei] = true;
            self.stack_edges.push(ei);
            for vi in 0..self.h.edges[ei].len() {
                let next = self.h.edges[ei][vi];
                if next == at || self.used_v[next] {
                    continue;
                }
                if self.in_s[next] {
                    for pe in self.stack_edges.clone() {
                        self.result.extend(self.h.edges[pe].iter().copied());
                    }
                }
                self.used_v[next] = true;
                self.run(next, depth_left - 1)?;
                self.used_v[next] = false;
            }
            self.stack_edges.pop();
            self.used_e[ei] = false;
        }
        Ok(())
    }
}

/// Bipartite incidence graph over V(H) and E(H); nodes 0..n are vertices,
/// nodes n..n+m are hyperedges. d_G(u, v) = 2 d_H(u, v) for CSP vertices.
#[derive(Debug, Clone)]
pub struct IncidenceGraph {
    num_vertices: usize,
    num_edges: usize,
    edge_members: Vec<Vec<usize>>,
    incident: Vec<Vec<usize>>,
}

impl IncidenceGraph {
    pub fn num_nodes(&self) -> usize {
        self.num_vertices + self.num_edges
    }

    pub fn num_bipartite_edges(&self) -> usize {
        self.edge_members.iter().map(|e| e.len()).sum()
    }

    fn neighbors(&self, node: usize) -> Vec<usize> {
        if node < self.num_vertices {
            self.incident[node]
                .iter()
                .map(|&ei| self.num_vertices + ei)
                .collect()
        } else {
            self.edge_members[node - self.num_vertices].clone()
        }
    }

    /// BFS distance between two nodes of the bipartite graph.
    pub fn distance(&self, a: usize, b: usize) -> Option<usize> {
        if a == b {
            return Some(0);
        }
        let mut dist = vec![usize::MAX; self.num_nodes()];
        dist[a] = 0;
        let mut queue = VecDeque::from([a]);
        while let Some(x) = queue.pop_front() {
            for y in self.neighbors(x) {
                if dist[y] == usize::MAX {
                    dist[y] = dist[x] + 1;
                    if y == b {
                        return Some(dist[y]);
                    }
                    queue.push_back(y);
                }
            }
        }
        None
    }

    /// Checks d_G = 2 d_H on sampled vertex pairs.
    pub fn verify_distance_identity(
        &self,
        h: &Hypergraph,
        samples: usize,
        seed: u64,
    ) -> Result<()> {
        if h.num_vertices() < 2 {
            return Ok(());
        }
        let mut rng = CounterRng::new(seed, &[crate::rng::stream::AUDIT]);
        for _ in 0..samples {
            let u = rng.below(h.num_vertices());
            let v = rng.below(h.num_vertices());
            let dg = self.distance(u, v);
            let dh = h.distance(u, v);
            let ok = match (dg, dh) {
                (None, None) => true,
                (Some(a), Some(b)) => a == 2 * b,
                _ => false,
            };
            if !ok {
                return Err(Error::violation(format!(
                    "incidence distance identity fails at ({u}, {v}): d_G = {dg:?}, d_H = {dh:?}"
                )));
            }
        }
        Ok(())
    }

    /// View as a 2-uniform hypergraph (reuses the sparsity audit).
    pub fn as_graph(&self) -> Result<Hypergraph> {
        let mut edges = Vec::new();
        for (ei, members) in self.edge_members.iter().enumerate() {
            for &v in members {
                edges.push(vec![v, self.num_vertices + ei]);
            }
        }
        Hypergraph::new(self.num_nodes(), 2, edges, None)
    }
}

/// Mode for the sparsity audit.
#[derive(Debug, Clone)]
pub enum AuditMode {
    /// Check all vertex subsets; needs |V| <= 24.
    Exhaustive,
    /// Random subsets of each size up to tau*N plus a greedy
    /// densest-subhypergraph peel as adversary.
    Sampled { samples_per_size: usize, seed: u64 },
}

/// Result of a sparsity audit.
#[derive(Debug, Clone)]
pub enum SparsityReport {
    Pass { subsets_checked: usize },
    Witness { set: Vec<usize>, edges_inside: usize },
}

/// Tests (tau, eta)-sparsity: every S with |S| <= tau*N must contain at most
/// |S|/(k-1-eta) edges.
pub fn sparsity_audit(
    h: &Hypergraph,
    eta: f64,
    tau: f64,
    mode: AuditMode,
) -> Result<SparsityReport> {
    let k = h.k() as f64;
    if eta <= 0.0 || eta >= k - 1.0 {
        return Err(Error::contract("eta must be in (0, k-1)"));
    }
    let n = h.num_vertices();
    let max_size = ((tau * n as f64).floor() as usize).min(n);
    let violates = |set_size: usize, inside: usize| -> bool {
        // |E(S)| > |S| / (k-1-eta)
        (inside as f64) * (k - 1.0 - eta) > set_size as f64
    };

    match mode {
        AuditMode::Exhaustive => {
            if n > 24 {
                return Err(Error::budget("exhaustive sparsity audit needs |V| <= 24"));
            }
            let edge_masks: Vec<u32> = h
                .edges()
                .iter()
                .map(|e| e.iter().fold(0u32, |m, &v| m | (1 << v)))
                .collect();
            let mut checked = 0usize;
            for mask in 1u32..(1u32 << n) {
                let size = mask.count_ones() as usize;
                if size > max_size {
                    continue;
                }
                checked += 1;
                let inside = edge_masks.iter().filter(|&&em| em & mask == em).count();
                if violates(size, inside) {
                    let set: Vec<usize> = (0..n).filter(|&v| mask & (1 << v) != 0).collect();
                    return Ok(SparsityReport::Witness {
                        set,
                        edges_inside: inside,
                    });
                }
            }
            Ok(SparsityReport::Pass {
                subsets_checked: checked,
            })
        }
        AuditMode::Sampled {
            samples_per_size,
            seed,
        } => {
            let mut checked = 0usize;
            let mut rng = CounterRng::new(seed, &[crate::rng::stream::AUDIT, 1]);
            for size in h.k()..=max_size {
                for _ in 0..samples_per_size {
                    let mut set: BTreeSet<usize> = BTreeSet::new();
                    while set.len() < size {
                        set.insert(rng.below(n));
                    }
                    let set: Vec<usize> = set.into_iter().collect();
                    checked += 1;
                    let inside = h.edges_within(&set).len();
                    if violates(size, inside) {
                        return Ok(SparsityReport::Witness {
                            set,
                            edges_inside: inside,
                        });
                    }
                }
            }
            // adversarial peel: repeatedly drop the min-degree vertex and
            // audit every prefix small enough to be in scope
            let mut alive = vec![true; n];
            let mut edge_alive = vec![true; h.edges().len()];
            let mut alive_count = n;
            let mut edges_alive = h.edges().len();
            while alive_count > 0 {
                if alive_count <= max_size && violates(alive_count, edges_alive) {
                    let set: Vec<usize> = (0..n).filter(|&v| alive[v]).collect();
                    return Ok(SparsityReport::Witness {
                        set,
                        edges_inside: edges_alive,
                    });
                }
                checked += 1;
                let v = (0..n)
                    .filter(|&v| alive[v])
                    .min_by_key(|&v| {
                        h.incident_edges(v)
                            .iter()
                            .filter(|&&ei| edge_alive[ei])
                            .count()
                    })
                    .unwrap();
                for &ei in h.incident_edges(v) {
                    if edge_alive[ei] {
                        edge_alive[ei] = false;
                        edges_alive -= 1;
                    }
                }
                alive[v] = false;
                alive_count -= 1;
            }
            Ok(SparsityReport::Pass {
                subsets_checked: checked,
            })
        }
    }
}

/// Samples a hypergraph from the partite model: each edge picks a weighted
/// type (a k-tuple of block indices) and one uniform vertex per coordinate,
/// resampling a coordinate on collision within the edge.
pub fn sample_partite(
    k: usize,
    m: usize,
    n_per_block: usize,
    types: &[(Vec<usize>, u64)],
    seed: u64,
) -> Result<Hypergraph> {
    if types.is_empty() {
        return Err(Error::contract("type distribution is empty"));
    }
    let n0 = types
        .iter()
        .flat_map(|(t, _)| t.iter())
        .max()
        .map_or(0, |&b| b + 1);
    for (t, w) in types {
        if t.len() != k {
            return Err(Error::contract("type tuple arity != k"));
        }
        if *w == 0 {
            return Err(Error::contract("type weight must be positive"));
        }
    }
    let total_weight: u64 = types.iter().map(|(_, w)| *w).sum();
    let n = n0 * n_per_block;
    let blocks: Vec<usize> = (0..n).map(|v| v / n_per_block).collect();
    let mut rng = CounterRng::new(seed, &[crate::rng::stream::HYPERGRAPH]);
    let mut edges = Vec::with_capacity(m);
    for _ in 0..m {
        let mut roll = rng.below(total_weight as usize) as u64;
        let mut ty = &types[0].0;
        for (t, w) in types {
            if roll < *w {
                ty = t;
                break;
            }
            roll -= w;
        }
        let mut edge: Vec<usize> = Vec::with_capacity(k);
        for &b in ty {
            let mut tries = 0;
            loop {
                let v = b * n_per_block + rng.below(n_per_block);
                if !edge.contains(&v) {
                    edge.push(v);
                    break;
                }
                tries += 1;
                if tries > 1000 {
                    return Err(Error::budget(
                        "collision resampling exhausted; block too small for type",
                    ));
                }
            }
        }
        edges.push(edge);
    }
    Hypergraph::new(n, k, edges, Some(blocks))
}

/// All k-subsets of [n0] with weight 1: the default type distribution for
/// standalone hypergraph experiments.
pub fn uniform_types(n0: usize, k: usize) -> Vec<(Vec<usize>, u64)> {
    let mut out = Vec::new();
    if k > n0 {
        return out;
    }
    let mut cur: Vec<usize> = (0..k).collect();
    loop {
        out.push((cur.clone(), 1));
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] + 1 <= n0 - (k - i) {
                cur[i] += 1;
                for j in i + 1..k {
                    cur[j] = cur[j - 1] + 1;
                }
                break;
            }
        }
    }
}
