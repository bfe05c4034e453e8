//! Graph storage, random graph models, and collection sampling.
//!
//! Graphs are simple, undirected, and unweighted, held as sorted adjacency
//! lists. Random models follow the exchangeable construction: node latents
//! `xi_i ~ Uniform(0,1)` i.i.d., then edges `A_ij ~ Bernoulli(rho * f(xi_i,
//! xi_j))` independently for `i < j`. The latent draw for node `v` of graph
//! `t` is a pure function of `(seed, t, v)`, so sampling a collection in
//! parallel, in any order, reproduces the sequential result bit for bit.

mod io;

pub use io::{load_edge_list, load_manifest, save_edge_list, save_manifest, LoadedGraph, ManifestEntry};

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use crate::rng;

/// Domain-separation tags for the counter-based generator.
const TAG_XI: u64 = 0x7869; // "xi"
const TAG_EDGE: u64 = 0x6564_6765; // "edge"
const TAG_LABEL: u64 = 0x6c62_6c73; // "lbls"

// ---------------------------------------------------------------------------
// Graph
// ---------------------------------------------------------------------------

/// Simple undirected graph on nodes `0..n`. No self-loops, each edge stored
/// once per endpoint, neighbor lists sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    m: usize,
    neighbors: Vec<Vec<u32>>,
}

impl Graph {
    /// The empty graph on `n` nodes.
    pub fn new(n: usize) -> Self {
        Graph {
            n,
            m: 0,
            neighbors: vec![Vec::new(); n],
        }
    }

    /// Builds from an edge iterator. Duplicate edges (in either orientation)
    /// collapse silently; self-loops and out-of-range endpoints are errors.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut pairs: Vec<(u32, u32)> = Vec::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::InvalidParam(format!("self-loop at node {a}")));
            }
            if a >= n || b >= n {
                return Err(Error::InvalidParam(format!(
                    "edge ({a},{b}) out of range for n={n}"
                )));
            }
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            pairs.push((lo as u32, hi as u32));
        }
        pairs.sort_unstable();
        pairs.dedup();
        Ok(Self::from_sorted_pairs(n, pairs))
    }

    fn from_sorted_pairs(n: usize, pairs: Vec<(u32, u32)>) -> Self {
        let mut neighbors = vec![Vec::new(); n];
        for &(a, b) in &pairs {
            neighbors[a as usize].push(b);
            neighbors[b as usize].push(a);
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }
        Graph {
            n,
            m: pairs.len(),
            neighbors,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of edges.
    pub fn edge_count(&self) -> usize {
        self.m
    }

    pub fn degree(&self, v: usize) -> usize {
        self.neighbors[v].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.neighbors.iter().map(Vec::len).collect()
    }

    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.neighbors[v]
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.neighbors[a].binary_search(&(b as u32)).is_ok()
    }

    /// Edges as `(i, j)` with `i < j`, ascending.
    pub fn edges(&self) -> Vec<(u32, u32)> {
        let mut out = Vec::with_capacity(self.m);
        for (i, list) in self.neighbors.iter().enumerate() {
            for &j in list {
                if (i as u32) < j {
                    out.push((i as u32, j));
                }
            }
        }
        out
    }

    /// Edge density 2m / (n(n-1)); zero for n < 2.
    pub fn density(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        2.0 * self.m as f64 / (self.n as f64 * (self.n as f64 - 1.0))
    }

    /// Dense 0/1 adjacency matrix.
    pub fn adjacency(&self) -> SymMatrix {
        let mut a = SymMatrix::zeros(self.n);
        for (i, list) in self.neighbors.iter().enumerate() {
            for &j in list {
                if (i as u32) < j {
                    a.set(i, j as usize, 1.0);
                }
            }
        }
        a
    }

    /// The graph with nodes renamed so new node `v` is old node `order[v]`.
    pub fn reordered(&self, order: &[u32]) -> Result<Graph> {
        if order.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "order has {} entries for {} nodes",
                order.len(),
                self.n
            )));
        }
        let mut inv = vec![u32::MAX; self.n];
        for (new, &old) in order.iter().enumerate() {
            if old as usize >= self.n || inv[old as usize] != u32::MAX {
                return Err(Error::InvalidParam("order is not a permutation".into()));
            }
            inv[old as usize] = new as u32;
        }
        let pairs: Vec<(u32, u32)> = self
            .edges()
            .into_iter()
            .map(|(a, b)| {
                let (x, y) = (inv[a as usize], inv[b as usize]);
                if x < y {
                    (x, y)
                } else {
                    (y, x)
                }
            })
            .collect();
        let mut sorted = pairs;
        sorted.sort_unstable();
        Ok(Graph::from_sorted_pairs(self.n, sorted))
    }
}

/// Vertex sets of the connected components, each ascending, ordered by
/// smallest member.
pub fn connected_components(g: &Graph) -> Vec<Vec<u32>> {
    let n = g.n();
    let mut comp = vec![usize::MAX; n];
    let mut out: Vec<Vec<u32>> = Vec::new();
    let mut queue = std::collections::VecDeque::new();
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        let id = out.len();
        comp[start] = id;
        out.push(vec![start as u32]);
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            for &w in g.neighbors(v) {
                if comp[w as usize] == usize::MAX {
                    comp[w as usize] = id;
                    out[id].push(w);
                    queue.push_back(w as usize);
                }
            }
        }
        out[id].sort_unstable();
    }
    out
}

/// Subgraph on `members` (ascending original ids), re-indexed to 0..len.
pub fn induced_subgraph(g: &Graph, members: &[u32]) -> Graph {
    let mut new_id = vec![u32::MAX; g.n()];
    for (new, &old) in members.iter().enumerate() {
        new_id[old as usize] = new as u32;
    }
    let mut pairs = Vec::new();
    for &(a, b) in g.edges().iter() {
        let (x, y) = (new_id[a as usize], new_id[b as usize]);
        if x != u32::MAX && y != u32::MAX {
            pairs.push((x, y));
        }
    }
    pairs.sort_unstable();
    Graph::from_sorted_pairs(members.len(), pairs)
}

/// Largest connected component, nodes re-indexed in ascending original-id
/// order. Ties between equal-sized components go to the one containing the
/// smallest original node id. Returns the component and the original id of
/// each new node.
pub fn largest_connected_component(g: &Graph) -> (Graph, Vec<u32>) {
    let comps = connected_components(g);
    let Some(best) = comps.iter().max_by_key(|c| c.len()).cloned() else {
        return (Graph::new(0), Vec::new());
    };
    // max_by_key returns the last maximum; components are ordered by
    // smallest member, so re-scan for the first one of that size.
    let best = comps
        .into_iter()
        .find(|c| c.len() == best.len())
        .expect("at least one component");
    (induced_subgraph(g, &best), best)
}

/// Counts triangles. Returns the total (each triangle once) and each node's
/// triangle membership count.
///
/// Pure integer counting over sorted neighbor lists, so the result is exact
/// and independent of node labeling.
pub fn triangle_counts(g: &Graph) -> (u64, Vec<u64>) {
    let n = g.n();
    let mut per = vec![0u64; n];
    let mut total = 0u64;
    for u in 0..n {
        for &v in g.neighbors(u) {
            let v = v as usize;
            if v <= u {
                continue;
            }
            // Common neighbors w > v close a triangle u < v < w exactly once.
            let a = g.neighbors(u);
            let b = g.neighbors(v);
            let (mut ia, mut ib) = (
                a.partition_point(|&x| x <= v as u32),
                b.partition_point(|&x| x <= v as u32),
            );
            while ia < a.len() && ib < b.len() {
                match a[ia].cmp(&b[ib]) {
                    std::cmp::Ordering::Equal => {
                        total += 1;
                        per[u] += 1;
                        per[v] += 1;
                        per[a[ia] as usize] += 1;
                        ia += 1;
                        ib += 1;
                    }
                    std::cmp::Ordering::Less => ia += 1,
                    std::cmp::Ordering::Greater => ib += 1,
                }
            }
        }
    }
    (total, per)
}

/// Canonical vertex order: relabeled copies of a graph reorder to the
/// *identical* adjacency matrix, not merely an isomorphic one.
///
/// Order-sensitive numeric code (the eigensolver above all) then returns
/// bit-identical results no matter how the input was labeled, which is what
/// lets relabeling-invariance tests assert with `==` instead of a tolerance.
///
/// The order comes from equitable color refinement plus an
/// individualization search over the refined color cells, taking the
/// lexicographically smallest adjacency certificate across branches.
/// Automorphisms discovered along the way (two branches with equal
/// certificates) prune symmetric siblings, so highly symmetric graphs —
/// complete graphs, cycles, stars — finish in polynomial time rather than
/// walking their whole automorphism group. The search carries a generous
/// step budget as a backstop; if a pathological input exhausts it, the best
/// order found so far is returned, which is still a valid (deterministic)
/// reordering, just no longer certified canonical.
pub fn canonical_order(g: &Graph) -> Vec<u32> {
    canon::Canonizer::new(g).run()
}

mod canon {
    use super::Graph;

    /// An ordered partition of the vertices: `order` lists vertices by
    /// position, `cells` lists `(start, len)` segments of `order`, and a
    /// vertex's color is the start position of its cell.
    #[derive(Clone)]
    struct Partition {
        order: Vec<u32>,
        cells: Vec<(u32, u32)>,
    }

    impl Partition {
        fn unit(n: usize) -> Partition {
            Partition {
                order: (0..n as u32).collect(),
                cells: if n == 0 { vec![] } else { vec![(0, n as u32)] },
            }
        }

        fn colors(&self, n: usize) -> Vec<u32> {
            let mut color = vec![0u32; n];
            for &(start, len) in &self.cells {
                for i in start..start + len {
                    color[self.order[i as usize] as usize] = start;
                }
            }
            color
        }

        /// First smallest cell with more than one member.
        fn target_cell(&self) -> Option<(u32, u32)> {
            self.cells
                .iter()
                .copied()
                .filter(|&(_, len)| len > 1)
                .min_by_key(|&(start, len)| (len, start))
        }
    }

    struct DisjointSet(Vec<u32>);

    impl DisjointSet {
        fn new(n: usize) -> Self {
            DisjointSet((0..n as u32).collect())
        }

        fn find(&mut self, v: u32) -> u32 {
            let mut v = v;
            while self.0[v as usize] != v {
                let p = self.0[v as usize];
                self.0[v as usize] = self.0[p as usize];
                v = p;
            }
            v
        }

        fn union(&mut self, a: u32, b: u32) {
            let (ra, rb) = (self.find(a), self.find(b));
            self.0[ra as usize] = rb;
        }
    }

    pub(super) struct Canonizer<'a> {
        g: &'a Graph,
        n: usize,
        budget: usize,
        /// Sequence of individualized vertices on the current search path.
        prefix: Vec<u32>,
        /// Discovered automorphisms, stored as vertex maps.
        gens: Vec<Vec<u32>>,
        best: Option<(Vec<u64>, Vec<u32>)>,
    }

    impl<'a> Canonizer<'a> {
        pub(super) fn new(g: &'a Graph) -> Self {
            Canonizer {
                g,
                n: g.n(),
                budget: 200_000,
                prefix: Vec::new(),
                gens: Vec::new(),
                best: None,
            }
        }

        pub(super) fn run(mut self) -> Vec<u32> {
            if self.n == 0 {
                return Vec::new();
            }
            self.search(Partition::unit(self.n));
            self.best.expect("at least one refinement leaf").1
        }

        /// Split cells by the sorted colors of each member's neighbors
        /// until the partition stops changing. Signatures are computed
        /// against a per-round snapshot of the colors, so the result
        /// depends only on the partition itself.
        fn refine(&self, p: &mut Partition) {
            loop {
                let color = p.colors(self.n);
                let mut next_cells = Vec::with_capacity(p.cells.len());
                let mut next_order = Vec::with_capacity(self.n);
                let mut changed = false;
                for &(start, len) in &p.cells {
                    if len == 1 {
                        next_cells.push((next_order.len() as u32, 1));
                        next_order.push(p.order[start as usize]);
                        continue;
                    }
                    let mut keyed: Vec<(Vec<u32>, u32)> = p.order
                        [start as usize..(start + len) as usize]
                        .iter()
                        .map(|&v| {
                            let mut sig: Vec<u32> = self
                                .g
                                .neighbors(v as usize)
                                .iter()
                                .map(|&w| color[w as usize])
                                .collect();
                            sig.sort_unstable();
                            (sig, v)
                        })
                        .collect();
                    // Stable: members with equal signatures keep their order.
                    keyed.sort_by(|a, b| a.0.cmp(&b.0));
                    let mut groups = 0;
                    let mut i = 0;
                    while i < keyed.len() {
                        let mut j = i + 1;
                        while j < keyed.len() && keyed[j].0 == keyed[i].0 {
                            j += 1;
                        }
                        next_cells.push((next_order.len() as u32, (j - i) as u32));
                        next_order.extend(keyed[i..j].iter().map(|(_, v)| *v));
                        groups += 1;
                        i = j;
                    }
                    changed |= groups > 1;
                }
                p.cells = next_cells;
                p.order = next_order;
                if !changed {
                    return;
                }
            }
        }

        /// Sorted packed edge list under the candidate order; equal
        /// certificates mean equal reordered adjacency matrices.
        fn certificate(&self, order: &[u32]) -> Vec<u64> {
            let mut pos = vec![0u32; self.n];
            for (i, &v) in order.iter().enumerate() {
                pos[v as usize] = i as u32;
            }
            let mut cert: Vec<u64> = Vec::with_capacity(self.g.edge_count());
            for (a, b) in self.g.edges() {
                let (x, y) = (pos[a as usize], pos[b as usize]);
                let (lo, hi) = if x < y { (x, y) } else { (y, x) };
                cert.push(((lo as u64) << 32) | hi as u64);
            }
            cert.sort_unstable();
            cert
        }

        /// Orbit classes under the discovered automorphisms that fix the
        /// current prefix pointwise; branching skips same-orbit siblings.
        fn prefix_orbits(&self) -> DisjointSet {
            let mut ds = DisjointSet::new(self.n);
            for gen in &self.gens {
                if self.prefix.iter().any(|&v| gen[v as usize] != v) {
                    continue;
                }
                for v in 0..self.n as u32 {
                    ds.union(v, gen[v as usize]);
                }
            }
            ds
        }

        fn search(&mut self, mut p: Partition) {
            if self.budget == 0 {
                return;
            }
            self.budget -= 1;
            self.refine(&mut p);
            let Some((start, len)) = p.target_cell() else {
                // Discrete: a leaf order.
                let cert = self.certificate(&p.order);
                match &self.best {
                    None => self.best = Some((cert, p.order)),
                    Some((best_cert, best_order)) => match cert.cmp(best_cert) {
                        std::cmp::Ordering::Less => self.best = Some((cert, p.order)),
                        std::cmp::Ordering::Equal => {
                            // Two orders with one certificate compose to an
                            // automorphism — fuel for orbit pruning.
                            let mut map = vec![0u32; self.n];
                            for (i, &v) in p.order.iter().enumerate() {
                                map[v as usize] = best_order[i];
                            }
                            self.gens.push(map);
                        }
                        std::cmp::Ordering::Greater => {}
                    },
                }
                return;
            };
            let members: Vec<u32> =
                p.order[start as usize..(start + len) as usize].to_vec();
            let mut tried: Vec<u32> = Vec::new();
            for &v in &members {
                if self.budget == 0 {
                    return;
                }
                let mut orbits = self.prefix_orbits();
                if tried.iter().any(|&t| orbits.find(t) == orbits.find(v)) {
                    continue;
                }
                tried.push(v);
                // Individualize v: split its cell into {v} + the rest,
                // keeping the rest in their current relative order.
                let mut child = p.clone();
                let seg = &mut child.order[start as usize..(start + len) as usize];
                let idx = seg
                    .iter()
                    .position(|&w| w == v)
                    .expect("member of its own cell");
                seg[..=idx].rotate_right(1);
                let cell_pos = child
                    .cells
                    .iter()
                    .position(|&(s, _)| s == start)
                    .expect("target cell present");
                child.cells[cell_pos] = (start, 1);
                child.cells.insert(cell_pos + 1, (start + 1, len - 1));
                self.prefix.push(v);
                self.search(child);
                self.prefix.pop();
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Random models
// ---------------------------------------------------------------------------

/// Built-in closed-form link functions on [0,1]^2, all symmetric with values
/// in [0,1].
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "expr", rename_all = "kebab-case")]
pub enum SmoothExpr {
    /// f(x, y) = x * y
    Product,
    /// f(x, y) = (x + y) / 2
    Average,
    /// f(x, y) = (1 + cos(pi * omega * (x - y))) / 2 — a smooth, wavy,
    /// non-monotone surface useful as a stand-in when experiments call for
    /// "a smooth graphon" without pinning a formula.
    Cosine { omega: f64 },
}

impl SmoothExpr {
    fn value(&self, x: f64, y: f64) -> f64 {
        match self {
            SmoothExpr::Product => x * y,
            SmoothExpr::Average => 0.5 * (x + y),
            SmoothExpr::Cosine { omega } => {
                0.5 * (1.0 + (std::f64::consts::PI * omega * (x - y)).cos())
            }
        }
    }

    /// Mean of f over the unit square, in closed form.
    fn mean(&self) -> f64 {
        match self {
            SmoothExpr::Product => 0.25,
            SmoothExpr::Average => 0.5,
            SmoothExpr::Cosine { omega } => {
                let a = std::f64::consts::PI * omega;
                0.5 + (1.0 - a.cos()) / (a * a)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum GraphonKind {
    /// Piecewise-constant model: block probabilities `b` with block
    /// proportions `pi`.
    Blockmodel { b: Vec<Vec<f64>>, pi: Vec<f64> },
    Smooth(SmoothExpr),
    /// Piecewise-constant values on a uniform m x m grid over [0,1]^2.
    Grid(Vec<Vec<f64>>),
}

/// An exchangeable random-graph model: symmetric `f: [0,1]^2 -> [0,1]`
/// scaled by a sparsity multiplier `rho` in (0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Graphon {
    kind: GraphonKind,
    rho: f64,
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::InvalidModel(format!("rho must lie in (0,1], got {rho}")));
    }
    Ok(())
}

impl Graphon {
    /// General blockmodel with block probabilities `b` and proportions `pi`.
    pub fn blockmodel(b: Vec<Vec<f64>>, pi: Vec<f64>, rho: f64) -> Result<Self> {
        check_rho(rho)?;
        let m = b.len();
        if m == 0 || pi.len() != m {
            return Err(Error::InvalidModel(format!(
                "blockmodel needs matching non-empty dimensions, got {}x? and {} proportions",
                m,
                pi.len()
            )));
        }
        for (i, row) in b.iter().enumerate() {
            if row.len() != m {
                return Err(Error::InvalidModel(format!("row {i} has {} entries, want {m}", row.len())));
            }
            for (j, &v) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                    return Err(Error::InvalidModel(format!("block probability ({i},{j}) = {v}")));
                }
                if b[j][i] != v {
                    return Err(Error::InvalidModel(format!(
                        "block matrix not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        let total: f64 = pi.iter().sum();
        if pi.iter().any(|&p| p <= 0.0 || !p.is_finite()) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidModel(format!(
                "block proportions must be positive and sum to 1, got sum {total}"
            )));
        }
        let pi: Vec<f64> = pi.iter().map(|p| p / total).collect();
        Ok(Graphon {
            kind: GraphonKind::Blockmodel { b, pi },
            rho,
        })
    }

    /// Planted-partition blockmodel: within-block probability `p`, between
    /// `q`, `blocks` equal blocks. The K = 1 case is Erdos-Renyi.
    pub fn planted_partition(p: f64, q: f64, blocks: usize, rho: f64) -> Result<Self> {
        if blocks == 0 {
            return Err(Error::InvalidModel("need at least one block".into()));
        }
        let b: Vec<Vec<f64>> = (0..blocks)
            .map(|i| (0..blocks).map(|j| if i == j { p } else { q }).collect())
            .collect();
        Self::blockmodel(b, vec![1.0 / blocks as f64; blocks], rho)
    }

    /// Erdos-Renyi: every pair connects with probability `rho * p`.
    pub fn erdos_renyi(p: f64, rho: f64) -> Result<Self> {
        Self::planted_partition(p, p, 1, rho)
    }

    pub fn smooth(expr: SmoothExpr, rho: f64) -> Result<Self> {
        check_rho(rho)?;
        if let SmoothExpr::Cosine { omega } = &expr {
            if !omega.is_finite() || *omega <= 0.0 {
                return Err(Error::InvalidModel(format!("cosine omega must be positive, got {omega}")));
            }
        }
        Ok(Graphon {
            kind: GraphonKind::Smooth(expr),
            rho,
        })
    }

    /// Piecewise-constant graphon on a uniform grid; `values` must be square
    /// and symmetric with entries in [0,1].
    pub fn grid(values: Vec<Vec<f64>>, rho: f64) -> Result<Self> {
        check_rho(rho)?;
        let m = values.len();
        if m == 0 {
            return Err(Error::InvalidModel("grid graphon needs at least one cell".into()));
        }
        for (i, row) in values.iter().enumerate() {
            if row.len() != m {
                return Err(Error::InvalidModel(format!("grid row {i} has {} entries, want {m}", row.len())));
            }
            for (j, &v) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                    return Err(Error::InvalidModel(format!("grid value ({i},{j}) = {v}")));
                }
                if values[j][i] != v {
                    return Err(Error::InvalidModel(format!("grid not symmetric at ({i},{j})")));
                }
            }
        }
        Ok(Graphon {
            kind: GraphonKind::Grid(values),
            rho,
        })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Same link function with a different sparsity multiplier.
    pub fn with_rho(&self, rho: f64) -> Result<Self> {
        check_rho(rho)?;
        Ok(Graphon {
            kind: self.kind.clone(),
            rho,
        })
    }

    /// The unscaled link function f(x, y).
    pub fn value(&self, x: f64, y: f64) -> f64 {
        match &self.kind {
            GraphonKind::Blockmodel { b, pi } => {
                let bi = block_of(pi, x);
                let bj = block_of(pi, y);
                b[bi][bj]
            }
            GraphonKind::Smooth(expr) => expr.value(x, y),
            GraphonKind::Grid(values) => {
                let m = values.len();
                let cell = |u: f64| ((u * m as f64) as usize).min(m - 1);
                values[cell(x)][cell(y)]
            }
        }
    }

    /// Link probability rho * f(x, y).
    pub fn prob(&self, x: f64, y: f64) -> f64 {
        self.rho * self.value(x, y)
    }

    /// Mean of the unscaled f over the unit square.
    pub fn mean_value(&self) -> f64 {
        match &self.kind {
            GraphonKind::Blockmodel { b, pi } => {
                let mut acc = 0.0;
                for (i, row) in b.iter().enumerate() {
                    for (j, &v) in row.iter().enumerate() {
                        acc += pi[i] * pi[j] * v;
                    }
                }
                acc
            }
            GraphonKind::Smooth(expr) => expr.mean(),
            GraphonKind::Grid(values) => {
                let m = values.len() as f64;
                values.iter().flatten().sum::<f64>() / (m * m)
            }
        }
    }

    /// Expected edge probability rho * mean(f); the expected average degree
    /// at size n is (n-1) times this.
    pub fn expected_density(&self) -> f64 {
        self.rho * self.mean_value()
    }

    /// Rescales rho so the expected average degree at size `n` equals
    /// `target`. Errors if that would push rho outside (0, 1].
    pub fn calibrated_to_avg_degree(&self, target: f64, n: usize) -> Result<Self> {
        if n < 2 || target <= 0.0 {
            return Err(Error::InvalidParam(format!(
                "average-degree calibration needs n >= 2 and target > 0, got n={n}, target={target}"
            )));
        }
        let mean = self.mean_value();
        if mean <= 0.0 {
            return Err(Error::InvalidModel("link function has zero mean".into()));
        }
        let rho = target / ((n as f64 - 1.0) * mean);
        if rho > 1.0 {
            return Err(Error::InvalidParam(format!(
                "target degree {target} needs rho = {rho:.4} > 1 at n = {n}"
            )));
        }
        self.with_rho(rho)
    }
}

fn block_of(pi: &[f64], x: f64) -> usize {
    let mut cum = 0.0;
    for (i, &p) in pi.iter().enumerate() {
        cum += p;
        if x < cum {
            return i;
        }
    }
    pi.len() - 1
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

/// Samples one graph. Equivalent to graph index 0 of a collection.
pub fn sample_graphon(g: &Graphon, n: usize, seed: u64) -> Graph {
    sample_indexed(g, n, seed, 0)
}

/// Samples one graph and returns the realized link-probability matrix
/// alongside it, for tests that compare against the exact conditional mean.
pub fn sample_graphon_with_p(g: &Graphon, n: usize, seed: u64) -> (Graph, SymMatrix) {
    let xi = latents(n, seed, 0);
    let mut p = SymMatrix::zeros(n);
    for i in 0..n {
        for j in i + 1..n {
            p.set(i, j, g.prob(xi[i], xi[j]));
        }
    }
    (sample_with_latents(g, &xi, seed, 0), p)
}

/// Node latents for graph `index` of the collection keyed by `seed`. Pure
/// function of (seed, index, node), hence order-independent.
fn latents(n: usize, seed: u64, index: u64) -> Vec<f64> {
    (0..n)
        .map(|v| rng::keyed_unit(&[TAG_XI, seed, index, v as u64]))
        .collect()
}

pub(crate) fn sample_indexed(g: &Graphon, n: usize, seed: u64, index: u64) -> Graph {
    let xi = latents(n, seed, index);
    sample_with_latents(g, &xi, seed, index)
}

fn sample_with_latents(g: &Graphon, xi: &[f64], seed: u64, index: u64) -> Graph {
    use rand::Rng;
    let n = xi.len();
    let mut r = rng::stream(&[TAG_EDGE, seed, index]);
    let mut pairs: Vec<(u32, u32)> = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let p = g.prob(xi[i], xi[j]);
            if r.gen::<f64>() < p {
                pairs.push((i as u32, j as u32));
            }
        }
    }
    Graph::from_sorted_pairs(n, pairs)
}

/// A finite mixture of graphons with sampling weights.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureModel {
    components: Vec<Graphon>,
    weights: Vec<f64>,
}

impl MixtureModel {
    pub fn new(components: Vec<Graphon>, weights: Vec<f64>) -> Result<Self> {
        if components.is_empty() || components.len() != weights.len() {
            return Err(Error::InvalidModel(format!(
                "mixture needs matching non-empty components ({}) and weights ({})",
                components.len(),
                weights.len()
            )));
        }
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|&w| w <= 0.0 || !w.is_finite()) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidModel(format!(
                "mixture weights must be positive and sum to 1, got sum {total}"
            )));
        }
        let weights = weights.iter().map(|w| w / total).collect();
        Ok(MixtureModel {
            components,
            weights,
        })
    }

    /// Equal-weight mixture.
    pub fn uniform(components: Vec<Graphon>) -> Result<Self> {
        let k = components.len().max(1);
        Self::new(components, vec![1.0 / k as f64; k])
    }

    pub fn components(&self) -> &[Graphon] {
        &self.components
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }
}

/// Samples `t` graphs i.i.d. from the mixture. Returns each graph with its
/// 1-based component label.
pub fn sample_mixture(m: &MixtureModel, t: usize, n: usize, seed: u64) -> Vec<(Graph, usize)> {
    (0..t)
        .map(|idx| {
            let u = rng::keyed_unit(&[TAG_LABEL, seed, idx as u64]);
            let c = block_of(&m.weights, u);
            (sample_indexed(&m.components[c], n, seed, idx as u64), c + 1)
        })
        .collect()
}

/// Samples a collection with exactly `counts[c]` graphs from component `c`,
/// emitted in component order. This is the default protocol for simulation
/// studies, where class sizes are part of the design.
pub fn sample_mixture_counts(
    m: &MixtureModel,
    counts: &[usize],
    n: usize,
    seed: u64,
) -> Result<Vec<(Graph, usize)>> {
    if counts.len() != m.k() {
        return Err(Error::InvalidModel(format!(
            "got {} counts for {} components",
            counts.len(),
            m.k()
        )));
    }
    let mut out = Vec::with_capacity(counts.iter().sum());
    let mut idx = 0u64;
    for (c, &cnt) in counts.iter().enumerate() {
        for _ in 0..cnt {
            out.push((sample_indexed(&m.components[c], n, seed, idx), c + 1));
            idx += 1;
        }
    }
    Ok(out)
}
