//! Comparison featurizers: top adjacency eigenvalues and a six-statistic
//! structural summary.
//!
//! Both produce [`FeatureVector`]s that plug into the same
//! distance/kernel/cluster chain as the moment features, so method
//! comparisons differ only in the featurization step.
//!
//! Every statistic here is *exactly* node-relabeling invariant. The
//! combinatorial ones achieve that through integer counting; the two
//! eigenvalue-based ones ([`topeig_features`], [`algebraic_connectivity`])
//! reorder the graph into its canonical form first, so the solver sees the
//! identical matrix no matter how the input was labeled.

use crate::error::{Error, Result};
use crate::graphs::{
    canonical_order, connected_components, induced_subgraph, triangle_counts, Graph,
};
use crate::linalg::{sym_eig_values, SymMatrix};
use crate::nclm::{FeatureMethod, FeatureVector};

/// Degree-quantile level for the rich-club statistic.
pub const RICH_CLUB_QUANTILE: f64 = 0.8;

/// Hop radius used by the six-statistic summary's distance distribution.
pub const DISTANCE_HOPS: usize = 3;

fn canonical_copy(g: &Graph) -> Graph {
    g.reordered(&canonical_order(g))
        .expect("canonical order is a permutation")
}

/// The `j` largest-in-magnitude eigenvalues of `A/n`, signed, in descending
/// magnitude; a magnitude tie between `+x` and `-x` puts the positive one
/// first.
pub fn topeig_features(g: &Graph, j: usize) -> Result<FeatureVector> {
    let n = g.n();
    if j == 0 {
        return Err(Error::InvalidParam("eigenvalue count must be >= 1".into()));
    }
    if j > n {
        return Err(Error::InvalidParam(format!(
            "cannot take {j} eigenvalues of a {n}-node graph"
        )));
    }
    let mut out = FeatureVector::new(FeatureMethod::TopEig, vec![0.0; j]);
    out.j = Some(j);
    if g.edge_count() == 0 {
        // A/n is the zero matrix; skip the solver so the zeros are exact.
        return Ok(out);
    }
    let canon = canonical_copy(g);
    let scaled = SymMatrix::from_fn(n, |a, b| {
        if canon.has_edge(a, b) {
            1.0 / n as f64
        } else {
            0.0
        }
    });
    let mut values = sym_eig_values(&scaled)?;
    values.sort_by(|a, b| {
        b.abs()
            .total_cmp(&a.abs())
            .then(b.total_cmp(a))
    });
    out.values = values[..j].to_vec();
    Ok(out)
}

/// Second-smallest eigenvalue of the normalized Laplacian
/// `I - D^{-1/2} A D^{-1/2}` of the largest connected component.
///
/// A tie between equal-sized components is broken by canonical form (not by
/// node ids), so the choice — and therefore the value — is the same for any
/// labeling of the input.
pub fn algebraic_connectivity(g: &Graph) -> Result<f64> {
    let comps = connected_components(g);
    let largest = comps.iter().map(|c| c.len()).max().unwrap_or(0);
    if largest < 2 {
        return Err(Error::GraphTooSmall {
            needed: 2,
            got: largest,
        });
    }
    let mut component: Option<(Vec<(u32, u32)>, Graph)> = None;
    for members in comps.iter().filter(|c| c.len() == largest) {
        let sub = induced_subgraph(g, members);
        let canon = canonical_copy(&sub);
        let key = canon.edges();
        if component.as_ref().map_or(true, |(best, _)| key < *best) {
            component = Some((key, canon));
        }
    }
    let (_, canon) = component.expect("largest >= 2 implies a component");
    let m = canon.n();
    let deg = canon.degrees();
    let inv_sqrt: Vec<f64> = deg.iter().map(|&d| 1.0 / (d as f64).sqrt()).collect();
    let lap = SymMatrix::from_fn(m, |a, b| {
        if a == b {
            1.0
        } else if canon.has_edge(a, b) {
            -inv_sqrt[a] * inv_sqrt[b]
        } else {
            0.0
        }
    });
    let values = sym_eig_values(&lap)?;
    Ok(values[1])
}

/// Global and average-local clustering coefficients.
///
/// Global: `3 * triangles / connected triples` (0 when there are no
/// triples). Local: mean over nodes of degree >= 2 of
/// `triangles_at_node / C(deg, 2)`; lower-degree nodes are excluded from
/// the mean (0 when no node qualifies).
pub fn clustering_coefficients(g: &Graph) -> (f64, f64) {
    let (total, per) = triangle_counts(g);
    let mut triples = 0u64;
    let mut ratios: Vec<f64> = Vec::new();
    for v in 0..g.n() {
        let d = g.degree(v) as u64;
        if d >= 2 {
            let pairs = d * (d - 1) / 2;
            triples += pairs;
            ratios.push(per[v] as f64 / pairs as f64);
        }
    }
    let global = if triples == 0 {
        0.0
    } else {
        3.0 * total as f64 / triples as f64
    };
    // Summing in value order (not node order) keeps the mean bit-identical
    // across relabelings.
    ratios.sort_by(f64::total_cmp);
    let local = if ratios.is_empty() {
        0.0
    } else {
        ratios.iter().sum::<f64>() / ratios.len() as f64
    };
    (global, local)
}

/// Fraction of unordered node pairs within `h` hops of each other;
/// disconnected pairs count as beyond any `h`.
pub fn distance_distribution(g: &Graph, h: usize) -> Result<f64> {
    if h == 0 {
        return Err(Error::InvalidParam("hop radius must be >= 1".into()));
    }
    let n = g.n();
    if n < 2 {
        return Ok(0.0);
    }
    let mut within: u64 = 0;
    let mut dist = vec![u32::MAX; n];
    let mut frontier: Vec<u32> = Vec::new();
    let mut next: Vec<u32> = Vec::new();
    for s in 0..n {
        dist.fill(u32::MAX);
        dist[s] = 0;
        frontier.clear();
        frontier.push(s as u32);
        for _ in 0..h {
            next.clear();
            for &v in &frontier {
                for &w in g.neighbors(v as usize) {
                    if dist[w as usize] == u32::MAX {
                        dist[w as usize] = 1; // only reachability matters
                        next.push(w);
                        if (w as usize) > s {
                            within += 1;
                        }
                    }
                }
            }
            std::mem::swap(&mut frontier, &mut next);
            if frontier.is_empty() {
                break;
            }
        }
    }
    let pairs = (n as u64) * (n as u64 - 1) / 2;
    Ok(within as f64 / pairs as f64)
}

/// Degree assortativity: Pearson correlation of endpoint degrees over the
/// `2|E|` directed edge endpoints. Regular graphs (zero degree variance)
/// return 0 by convention.
pub fn assortativity(g: &Graph) -> Result<f64> {
    let m = g.edge_count() as u64;
    if m == 0 {
        return Err(Error::InvalidParam(
            "assortativity needs at least one edge".into(),
        ));
    }
    // Over directed pairs, both marginals equal the edge-endpoint degree
    // distribution, so three integer sums determine the correlation.
    let deg = g.degrees();
    let mut sum_d2 = 0u64; // sum over directed pairs of source degree
    let mut sum_d3 = 0u64; // ... of squared source degree
    let mut sum_prod = 0u64; // ... of source*target degree
    for v in 0..g.n() {
        let d = deg[v] as u64;
        sum_d2 += d * d;
        sum_d3 += d * d * d;
    }
    for &(a, b) in g.edges().iter() {
        sum_prod += 2 * deg[a as usize] as u64 * deg[b as usize] as u64;
    }
    let count = 2.0 * m as f64;
    let mean = sum_d2 as f64 / count;
    let var = sum_d3 as f64 / count - mean * mean;
    if var <= 0.0 {
        return Ok(0.0);
    }
    let cov = sum_prod as f64 / count - mean * mean;
    Ok((cov / var).clamp(-1.0, 1.0))
}

/// Edge density among nodes whose degree strictly exceeds the nearest-rank
/// `quantile` of the degree sequence; fewer than two such nodes → 0.
pub fn rich_club(g: &Graph, quantile: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&quantile) || !quantile.is_finite() {
        return Err(Error::InvalidParam(format!(
            "quantile must lie in [0, 1], got {quantile}"
        )));
    }
    let n = g.n();
    if n == 0 {
        return Ok(0.0);
    }
    let mut degrees = g.degrees();
    degrees.sort_unstable();
    let rank = ((quantile * n as f64).ceil() as usize).clamp(1, n);
    let tau = degrees[rank - 1];
    let club: Vec<bool> = (0..n).map(|v| g.degree(v) > tau).collect();
    let size = club.iter().filter(|&&c| c).count() as u64;
    if size < 2 {
        return Ok(0.0);
    }
    let inside = g
        .edges()
        .iter()
        .filter(|&&(a, b)| club[a as usize] && club[b as usize])
        .count() as u64;
    Ok(inside as f64 / (size * (size - 1) / 2) as f64)
}

/// The six-statistic summary: (algebraic connectivity, global clustering,
/// local clustering, distance distribution at 3 hops, assortativity,
/// rich-club density at the 0.8 degree quantile).
///
/// Featurizing a batch must not abort on one degenerate graph, so a
/// statistic whose precondition fails contributes 0 and a warning instead
/// of an error.
pub fn graph_stats_features(g: &Graph) -> FeatureVector {
    let mut warnings = Vec::new();
    let connectivity = match algebraic_connectivity(g) {
        Ok(v) => v,
        Err(e) => {
            warnings.push(format!("algebraic connectivity unavailable: {e}"));
            0.0
        }
    };
    let (global_cc, local_cc) = clustering_coefficients(g);
    let within = distance_distribution(g, DISTANCE_HOPS).expect("fixed hop radius is valid");
    let assort = match assortativity(g) {
        Ok(v) => v,
        Err(e) => {
            warnings.push(format!("assortativity unavailable: {e}"));
            0.0
        }
    };
    let club = rich_club(g, RICH_CLUB_QUANTILE).expect("fixed quantile is valid");
    let mut out = FeatureVector::new(
        FeatureMethod::GraphStats,
        vec![connectivity, global_cc, local_cc, within, assort, club],
    );
    out.warnings = warnings;
    out
}
