//! Clustering a graph collection through estimated link-probability
//! matrices.
//!
//! This route requires node correspondence: every graph in the collection
//! must be observed on the same node set in the same order. The steps are
//!
//! 1. estimate each graph's link-probability matrix independently
//!    (see [`crate::graphon_est`]),
//! 2. form the `T x T` matrix of pairwise Frobenius distances between the
//!    estimates,
//! 3. embed with the `K` largest-magnitude eigenvectors of that distance
//!    matrix and run k-means on the rows.
//!
//! [`davis_kahan_check`] and the bound helpers expose the perturbation
//! analysis behind the pipeline, so experiments can report how far the
//! computed embedding can drift from the population one and how many
//! graphs could be misassigned as a result.

use std::io::Write as _;
use std::path::Path;

use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graphon_est::{Estimator, LinkProbMatrix};
use crate::graphs::Graph;
use crate::linalg::{kmeans, sym_eig, sym_eig_full, EigMode, KmeansConfig, SymMatrix};

/// Symmetric nonnegative matrix of pairwise dissimilarities with zero
/// diagonal. Indexed by graph, not node.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    inner: SymMatrix,
}

impl DistanceMatrix {
    pub fn new(m: SymMatrix) -> Result<Self> {
        let t = m.n();
        for i in 0..t {
            if m.get(i, i) != 0.0 {
                return Err(Error::InvalidParam(format!(
                    "distance diagonal must be zero, got {} at ({i},{i})",
                    m.get(i, i)
                )));
            }
            for j in i + 1..t {
                let v = m.get(i, j);
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidParam(format!(
                        "distance ({i},{j}) = {v} is not a finite nonnegative value"
                    )));
                }
            }
        }
        Ok(DistanceMatrix { inner: m })
    }

    /// Number of graphs the matrix indexes.
    pub fn t(&self) -> usize {
        self.inner.n()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.inner.get(i, j)
    }

    pub fn as_sym(&self) -> &SymMatrix {
        &self.inner
    }

    pub fn frob_dist(&self, other: &DistanceMatrix) -> Result<f64> {
        self.inner.frob_dist(&other.inner)
    }

    /// Off-diagonal entries in row-major upper-triangle order.
    pub fn off_diagonal(&self) -> Vec<f64> {
        let t = self.t();
        let mut out = Vec::with_capacity(t * t.saturating_sub(1) / 2);
        for i in 0..t {
            for j in i + 1..t {
                out.push(self.get(i, j));
            }
        }
        out
    }
}

/// Cluster labels for a graph collection, tagged with the method that
/// produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    /// One label per graph, each in `{1..k}`.
    pub labels: Vec<usize>,
    pub k: usize,
    /// Short name of the producing method, e.g. `"ncge-usvt"` or `"nclm"`.
    pub method: String,
    /// Ground-truth labels, when the collection carries them.
    pub truth: Option<Vec<usize>>,
    /// Within-cluster sum of squares of the winning k-means run.
    pub wcss: f64,
}

impl ClusterAssignment {
    pub fn new(labels: Vec<usize>, k: usize, method: impl Into<String>) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParam("cluster count k must be >= 1".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l == 0 || l > k) {
            return Err(Error::InvalidParam(format!(
                "label {bad} outside 1..={k}"
            )));
        }
        Ok(ClusterAssignment {
            labels,
            k,
            method: method.into(),
            truth: None,
            wcss: f64::NAN,
        })
    }

    pub fn with_truth(mut self, truth: Vec<usize>) -> Result<Self> {
        if truth.len() != self.labels.len() {
            return Err(Error::DimensionMismatch(format!(
                "truth has {} labels for {} graphs",
                truth.len(),
                self.labels.len()
            )));
        }
        self.truth = Some(truth);
        Ok(self)
    }

    pub fn t(&self) -> usize {
        self.labels.len()
    }
}

/// Pairwise Frobenius distances between link-probability estimates.
///
/// All estimates must share the same node count; mismatches indicate the
/// collection lacks node correspondence. Distances are computed on upper
/// triangle pairs and mirrored, so the result is exactly symmetric.
pub fn frobenius_distance_matrix(estimates: &[LinkProbMatrix]) -> Result<DistanceMatrix> {
    let t = estimates.len();
    if t < 2 {
        return Err(Error::TooFewGraphs { needed: 2, got: t });
    }
    let n0 = estimates[0].n();
    for p in estimates {
        if p.n() != n0 {
            return Err(Error::NodeCorrespondence(n0, p.n()));
        }
    }
    let rows: Vec<Vec<f64>> = (0..t)
        .into_par_iter()
        .map(|i| {
            (i + 1..t)
                .map(|j| {
                    estimates[i]
                        .frob_dist(&estimates[j])
                        .expect("sizes checked above")
                })
                .collect()
        })
        .collect();
    let mut d = SymMatrix::zeros(t);
    for (i, row) in rows.iter().enumerate() {
        for (off, &v) in row.iter().enumerate() {
            d.set(i, i + 1 + off, v);
        }
    }
    Ok(DistanceMatrix { inner: d })
}

/// Spectral clustering of a dissimilarity matrix: embed with the `k`
/// eigenvectors of largest eigenvalue magnitude, then k-means on the rows.
///
/// Rows are not normalized by default (the perturbation analysis operates
/// on raw eigenvector rows); pass `normalize_rows = true` via
/// [`spectral_cluster_distance_with`] to experiment with unit-norm rows.
pub fn spectral_cluster_distance(
    d: &DistanceMatrix,
    k: usize,
    seed: u64,
) -> Result<ClusterAssignment> {
    spectral_cluster_distance_with(d, k, seed, false)
}

pub fn spectral_cluster_distance_with(
    d: &DistanceMatrix,
    k: usize,
    seed: u64,
    normalize_rows: bool,
) -> Result<ClusterAssignment> {
    let t = d.t();
    if k > t {
        return Err(Error::TooManyClusters { k, t });
    }
    // An all-zero matrix carries no geometry and its eigenbasis is
    // arbitrary; the only labeling consistent with indistinguishable
    // inputs is a single cluster.
    if d.off_diagonal().iter().all(|&x| x == 0.0) {
        let mut assignment = ClusterAssignment::new(vec![1; t], k, "spectral-distance")?;
        assignment.wcss = 0.0;
        return Ok(assignment);
    }
    let eig = sym_eig(d.as_sym(), k, EigMode::LargestMagnitude)?;
    let mut points = eig.vectors;
    if normalize_rows {
        for mut row in points.rows_mut() {
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                row.mapv_inplace(|v| v / norm);
            }
        }
    }
    let outcome = kmeans(
        points.view(),
        k,
        &KmeansConfig {
            seed,
            ..KmeansConfig::default()
        },
    )?;
    let mut assignment = ClusterAssignment::new(outcome.labels, k, "spectral-distance")?;
    assignment.wcss = outcome.wcss;
    Ok(assignment)
}

/// Output of the full estimate-then-cluster pipeline.
#[derive(Debug, Clone)]
pub struct NcgeOutput {
    pub assignment: ClusterAssignment,
    /// The pairwise distance matrix the labels were derived from.
    pub distances: DistanceMatrix,
}

/// Runs estimation, distance aggregation, and spectral clustering.
///
/// Estimation runs in parallel across graphs; everything downstream is
/// deterministic in (`graphs`, `estimator`, `k`, `seed`).
pub fn ncge_pipeline(
    graphs: &[Graph],
    estimator: Estimator,
    k: usize,
    seed: u64,
) -> Result<NcgeOutput> {
    let t = graphs.len();
    if t < 2 {
        return Err(Error::TooFewGraphs { needed: 2, got: t });
    }
    let n0 = graphs[0].n();
    for g in graphs {
        if g.n() != n0 {
            return Err(Error::NodeCorrespondence(n0, g.n()));
        }
    }
    if k > t {
        return Err(Error::TooManyClusters { k, t });
    }
    let estimates: Vec<LinkProbMatrix> = graphs
        .par_iter()
        .map(|g| estimator.estimate(g))
        .collect::<Result<_>>()?;
    let distances = frobenius_distance_matrix(&estimates)?;
    let mut assignment = spectral_cluster_distance(&distances, k, seed)?;
    assignment.method = format!("ncge-{}", estimator.name());
    Ok(NcgeOutput {
        assignment,
        distances,
    })
}

// ---------------------------------------------------------------------------
// Perturbation diagnostics
// ---------------------------------------------------------------------------

/// Upper bound on the squared Frobenius error of the distance matrix in
/// terms of the per-graph estimation errors:
/// `|D_hat - D|_F^2 <= 4 T sum_i |P_hat_i - P_i|_F^2`.
pub fn distance_perturbation_bound(t: usize, est_sq_error_sum: f64) -> f64 {
    4.0 * t as f64 * est_sq_error_sum
}

/// Result of comparing the leading eigenspaces of a population and an
/// estimated distance matrix.
#[derive(Debug, Clone, Copy)]
pub struct SubspaceCheck {
    /// Squared Frobenius distance between the aligned eigenbases,
    /// `|V_hat O - V|_F^2` with `O` the optimal orthogonal alignment.
    pub lhs: f64,
    /// The perturbation bound `16 |D_hat - D|_F^2 / gamma^2`.
    pub rhs: f64,
    /// Spectral-gap proxy: magnitude of the `k`-th largest (in magnitude)
    /// eigenvalue of the population matrix.
    pub gamma: f64,
}

/// Compares the `k`-dimensional leading eigenspaces of the population
/// matrix `d` and the estimate `d_hat`.
///
/// The alignment `O` is the orthogonal Procrustes solution: the polar
/// factor of `M = V_hat^T V`, computed as `M (M^T M)^{-1/2}` from an
/// eigendecomposition of the small `k x k` Gram matrix. Since the optimal
/// alignment can only shrink the left side, the reported inequality is
/// conservative. Fails with [`Error::RankDeficient`] when the population
/// spectrum has no usable `k`-th eigenvalue, since the bound then divides
/// by (numerically) zero.
pub fn davis_kahan_check(
    d: &DistanceMatrix,
    d_hat: &DistanceMatrix,
    k: usize,
) -> Result<SubspaceCheck> {
    let t = d.t();
    if d_hat.t() != t {
        return Err(Error::DimensionMismatch(format!(
            "distance matrices index {} vs {} graphs",
            d.t(),
            d_hat.t()
        )));
    }
    if k == 0 || k > t {
        return Err(Error::InvalidParam(format!(
            "subspace dimension k = {k} must lie in 1..={t}"
        )));
    }

    let pop = sym_eig(d.as_sym(), k, EigMode::LargestMagnitude)?;
    let gamma = pop.values[k - 1].abs();
    let threshold = 1e-8 * d.as_sym().frob_norm();
    if gamma <= threshold {
        return Err(Error::RankDeficient {
            k,
            magnitude: gamma,
            threshold,
        });
    }
    let est = sym_eig(d_hat.as_sym(), k, EigMode::LargestMagnitude)?;

    // Gram matrix of the two bases and its inverse square root.
    let m = est.vectors.t().dot(&pop.vectors);
    let gram = SymMatrix::from_fn(k, |i, j| m.column(i).dot(&m.column(j)));
    let gram_eig = sym_eig_full(&gram)?;
    let s_max = gram_eig.values.iter().cloned().fold(0.0f64, f64::max);
    let mut inv_sqrt = Array2::<f64>::zeros((k, k));
    for (idx, &s) in gram_eig.values.iter().enumerate() {
        if s <= 1e-12 * s_max.max(1e-300) {
            return Err(Error::Degenerate(
                "eigenbasis alignment is singular; the compared subspaces are near-orthogonal"
                    .into(),
            ));
        }
        let w = gram_eig.vectors.column(idx);
        let scale = 1.0 / s.sqrt();
        for a in 0..k {
            for b in 0..k {
                inv_sqrt[[a, b]] += scale * w[a] * w[b];
            }
        }
    }
    let align = m.dot(&inv_sqrt);

    let aligned = est.vectors.dot(&align);
    let lhs = aligned
        .iter()
        .zip(pop.vectors.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>();

    let diff = d_hat.frob_dist(d)?;
    let rhs = 16.0 * diff * diff / (gamma * gamma);
    Ok(SubspaceCheck { lhs, rhs, gamma })
}

/// Chains the eigenspace bound through the distance perturbation bound:
/// `|V_hat O - V|_F^2 <= 64 T sum_i |P_hat_i - P_i|_F^2 / gamma^2`.
pub fn chained_subspace_bound(t: usize, est_sq_error_sum: f64, gamma: f64) -> f64 {
    16.0 * distance_perturbation_bound(t, est_sq_error_sum) / (gamma * gamma)
}

/// Upper bound on how many graphs spectral clustering can misassign:
/// `8 * m_T * |V_hat O - V|_F^2`, with `m_T` the largest cluster count.
///
/// `counts` are the per-cluster sizes from the ground truth.
pub fn misclustering_bound(
    d: &DistanceMatrix,
    d_hat: &DistanceMatrix,
    k: usize,
    counts: &[usize],
) -> Result<f64> {
    if counts.is_empty() {
        return Err(Error::InvalidParam(
            "misclustering bound needs at least one cluster count".into(),
        ));
    }
    let check = davis_kahan_check(d, d_hat, k)?;
    let m_t = *counts.iter().max().expect("nonempty");
    Ok(8.0 * m_t as f64 * check.lhs)
}

/// Squared per-pair separation between two planted-partition models with
/// `m` equally likely blocks: `d^2 = (p - p2)^2 / m + (1 - 1/m)(q - q2)^2`.
///
/// Multiplying by `n^2` approximates the squared Frobenius distance between
/// their n-node probability matrices, so this quantifies how far apart two
/// model variants sit in the geometry the pipeline clusters in.
pub fn blockmodel_separation_d2(p: f64, q: f64, p2: f64, q2: f64, m: usize) -> Result<f64> {
    if m == 0 {
        return Err(Error::InvalidParam("block count must be >= 1".into()));
    }
    for v in [p, q, p2, q2] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidParam(format!(
                "blockmodel probability {v} outside [0,1]"
            )));
        }
    }
    let inv = 1.0 / m as f64;
    Ok(inv * (p - p2) * (p - p2) + (1.0 - inv) * (q - q2) * (q - q2))
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

/// Writes a distance matrix as CSV: a header row of graph ids, then the
/// full square matrix.
pub fn save_distance_csv(
    d: &DistanceMatrix,
    ids: &[String],
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    if ids.len() != d.t() {
        return Err(Error::DimensionMismatch(format!(
            "{} ids for {} graphs",
            ids.len(),
            d.t()
        )));
    }
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = std::fs::File::create(path).map_err(io_err)?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "{}", ids.join(",")).map_err(io_err)?;
    for i in 0..d.t() {
        let row: Vec<String> = (0..d.t()).map(|j| format!("{}", d.get(i, j))).collect();
        writeln!(w, "{}", row.join(",")).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// Reads a distance matrix written by [`save_distance_csv`].
pub fn load_distance_csv(path: impl AsRef<Path>) -> Result<(DistanceMatrix, Vec<String>)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let bad = |line: usize, msg: String| {
        Error::InvalidParam(format!("{}:{line}: {msg}", path.display()))
    };
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| bad(1, "empty file".into()))?;
    let ids: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    let t = ids.len();
    let mut m = SymMatrix::zeros(t);
    let mut row_count = 0usize;
    for (i, line) in lines.enumerate() {
        if i >= t {
            return Err(bad(i + 2, format!("more than {t} rows")));
        }
        let vals: Vec<&str> = line.split(',').collect();
        if vals.len() != t {
            return Err(bad(i + 2, format!("expected {t} columns, got {}", vals.len())));
        }
        for (j, tok) in vals.iter().enumerate() {
            let v: f64 = tok
                .trim()
                .parse()
                .map_err(|e| bad(i + 2, format!("column {}: {e}", j + 1)))?;
            if j >= i {
                m.set(i, j, v);
            } else if (m.get(i, j) - v).abs() > 1e-12 {
                return Err(bad(i + 2, format!("asymmetry at ({i},{j})")));
            }
        }
        row_count += 1;
    }
    if row_count != t {
        return Err(bad(row_count + 1, format!("expected {t} rows, got {row_count}")));
    }
    Ok((DistanceMatrix::new(m)?, ids))
}

/// Writes cluster labels as CSV: `graph_id,label`.
pub fn save_assignment_csv(
    a: &ClusterAssignment,
    ids: &[String],
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    if ids.len() != a.t() {
        return Err(Error::DimensionMismatch(format!(
            "{} ids for {} labels",
            ids.len(),
            a.t()
        )));
    }
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = std::fs::File::create(path).map_err(io_err)?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "graph_id,label").map_err(io_err)?;
    for (id, &label) in ids.iter().zip(&a.labels) {
        writeln!(w, "{id},{label}").map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}
