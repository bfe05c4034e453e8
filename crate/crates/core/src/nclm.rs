//! Clustering a graph collection by log trace-moments.
//!
//! This route needs no node correspondence: each graph is summarized by the
//! scale-free statistics `m_k(A) = trace((A/n)^k)` for `k = 2..=J`, mapped
//! through a (floored) logarithm into the feature vector
//! `g_J = (log m_2, ..., log m_J)`. Pairwise Euclidean feature distances are
//! turned into a similarity kernel `exp(-t * D)`, the bandwidth `t` (and
//! optionally the order `J`) is tuned by maximizing the relative eigengap at
//! the target cluster count, and the kernel's leading eigenvectors are
//! clustered with k-means.
//!
//! Moments are computed exactly. Powers of the adjacency matrix stay in
//! integer-valued arithmetic (`trace(A^k)` counts closed k-walks), so the
//! features are bit-for-bit invariant under node relabeling — a property the
//! tests assert with `==`, not a tolerance.

use std::io::Write as _;
use std::path::Path;

use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graphs::{triangle_counts, Graph, Graphon};
use crate::linalg::{kmeans, sym_eig, sym_eig_values, EigMode, KmeansConfig, SymMatrix};
use crate::ncge::{ClusterAssignment, DistanceMatrix};

/// Default floor applied to moments before taking logarithms. Odd moments
/// vanish on bipartite graphs; flooring keeps the pipeline total instead of
/// failing on `log 0`.
pub const LOG_MOMENT_FLOOR: f64 = 1e-15;

/// Number of points in the data-driven default bandwidth grid.
pub const DEFAULT_T_GRID_LEN: usize = 20;

// ---------------------------------------------------------------------------
// Moments
// ---------------------------------------------------------------------------

/// Trace moments `m_2..m_J` of one graph, together with the underlying
/// closed-walk counts.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentVector {
    n: usize,
    /// `walks[k-2] = trace(A^k)`, an exact integer count in f64.
    walks: Vec<f64>,
    /// `moments[k-2] = trace((A/n)^k)`.
    moments: Vec<f64>,
}

impl MomentVector {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Largest computed order `J`.
    pub fn j_max(&self) -> usize {
        self.moments.len() + 1
    }

    /// `m_k` for `2 <= k <= j_max`.
    pub fn moment(&self, k: usize) -> f64 {
        assert!(
            (2..=self.j_max()).contains(&k),
            "moment order {k} outside 2..={}",
            self.j_max()
        );
        self.moments[k - 2]
    }

    /// All moments in order `m_2..m_J`.
    pub fn moments(&self) -> &[f64] {
        &self.moments
    }

    /// Number of closed k-walks, `trace(A^k)`.
    pub fn closed_walks(&self, k: usize) -> f64 {
        assert!(
            (2..=self.j_max()).contains(&k),
            "moment order {k} outside 2..={}",
            self.j_max()
        );
        self.walks[k - 2]
    }

    /// The concentration-scale statistic `psi_k = n / (k sqrt(2)) * m_k`.
    pub fn scaled(&self, k: usize) -> f64 {
        self.n as f64 / (k as f64 * std::f64::consts::SQRT_2) * self.moment(k)
    }
}

/// Dense `A^2` accumulated from neighbor lists; entry (i,j) counts paths of
/// length two.
fn dense_square(g: &Graph) -> Array2<f64> {
    let n = g.n();
    let mut out = Array2::<f64>::zeros((n, n));
    let data = out.as_slice_mut().expect("freshly allocated, standard layout");
    for i in 0..n {
        let base = i * n;
        for &k in g.neighbors(i) {
            for &j in g.neighbors(k as usize) {
                data[base + j as usize] += 1.0;
            }
        }
    }
    out
}

/// Sparse-adjacency times dense matrix: `out = A * m` by row accumulation.
fn adj_times(g: &Graph, m: &Array2<f64>) -> Array2<f64> {
    let n = g.n();
    let src = m.as_slice().expect("standard layout");
    let mut out = Array2::<f64>::zeros((n, n));
    let dst = out.as_slice_mut().expect("freshly allocated, standard layout");
    for i in 0..n {
        let row = &mut dst[i * n..(i + 1) * n];
        for &k in g.neighbors(i) {
            let s = &src[k as usize * n..k as usize * n + n];
            for (a, b) in row.iter_mut().zip(s) {
                *a += *b;
            }
        }
    }
    out
}

fn frob_inner(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Exact trace moments `m_k = trace((A/n)^k)` for `k = 2..=j_max`.
///
/// Uses the half-power identity `trace(A^k) = <A^ceil(k/2), A^floor(k/2)>_F`
/// so only powers up to `A^ceil(J/2)` are formed. The small orders come
/// straight from sparse structure (`trace A^2 = 2|E|`, `trace A^3 = 6 *
/// triangles`); from order four on, powers are accumulated densely by
/// sparse-row addition. Every intermediate quantity is an integer walk
/// count, so results are exact as long as counts stay below 2^53 — far
/// beyond the graph sizes and orders used here.
pub fn graph_moments(g: &Graph, j_max: usize) -> Result<MomentVector> {
    if j_max < 2 {
        return Err(Error::InvalidParam(format!(
            "moment order J must be >= 2, got {j_max}"
        )));
    }
    let n = g.n();
    if n == 0 {
        return Err(Error::GraphTooSmall { needed: 1, got: 0 });
    }

    let mut walks = vec![0.0f64; j_max + 1];
    walks[2] = (2 * g.edge_count()) as f64;
    if j_max >= 3 {
        walks[3] = 6.0 * triangle_counts(g).0 as f64;
    }
    if j_max >= 4 {
        let mut prev = dense_square(g);
        walks[4] = frob_inner(&prev, &prev);
        let top_power = j_max.div_ceil(2);
        for a in 3..=top_power {
            let cur = adj_times(g, &prev);
            if 2 * a - 1 <= j_max {
                walks[2 * a - 1] = frob_inner(&prev, &cur);
            }
            if 2 * a <= j_max {
                walks[2 * a] = frob_inner(&cur, &cur);
            }
            prev = cur;
        }
    }

    let nf = n as f64;
    let mut moments = Vec::with_capacity(j_max - 1);
    let mut kept_walks = Vec::with_capacity(j_max - 1);
    for k in 2..=j_max {
        kept_walks.push(walks[k]);
        moments.push(walks[k] / nf.powi(k as i32));
    }
    Ok(MomentVector {
        n,
        walks: kept_walks,
        moments,
    })
}

// ---------------------------------------------------------------------------
// Features
// ---------------------------------------------------------------------------

/// Which summary produced a feature vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureMethod {
    /// Log trace-moments `g_J`.
    Nclm,
    /// Top eigenvalues of `A/n`.
    TopEig,
    /// The six-statistic summary.
    GraphStats,
}

impl FeatureMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            FeatureMethod::Nclm => "nclm",
            FeatureMethod::TopEig => "topeig",
            FeatureMethod::GraphStats => "graphstats",
        }
    }
}

impl std::fmt::Display for FeatureMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for FeatureMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nclm" => Ok(FeatureMethod::Nclm),
            "topeig" => Ok(FeatureMethod::TopEig),
            "graphstats" => Ok(FeatureMethod::GraphStats),
            other => Err(Error::InvalidParam(format!(
                "unknown feature method '{other}'"
            ))),
        }
    }
}

/// Per-graph summary used for distance-based clustering.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub method: FeatureMethod,
    pub values: Vec<f64>,
    /// Order parameter, for the methods that have one.
    pub j: Option<usize>,
    /// Degenerate-input notes collected while computing the entries.
    pub warnings: Vec<String>,
}

impl FeatureVector {
    pub fn new(method: FeatureMethod, values: Vec<f64>) -> Self {
        FeatureVector {
            method,
            values,
            j: None,
            warnings: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `g_J` from precomputed moments: `(log max(m_2, floor), ..., log
/// max(m_J, floor))`. Lets J-tuning reuse one moment computation per graph.
pub fn log_features_from_moments(
    mv: &MomentVector,
    j: usize,
    floor: f64,
) -> Result<FeatureVector> {
    if !(floor > 0.0) || !floor.is_finite() {
        return Err(Error::InvalidParam(format!(
            "log floor must be a positive real, got {floor}"
        )));
    }
    if j < 2 || j > mv.j_max() {
        return Err(Error::InvalidParam(format!(
            "feature order J = {j} outside computed range 2..={}",
            mv.j_max()
        )));
    }
    let values = (2..=j).map(|k| mv.moment(k).max(floor).ln()).collect();
    Ok(FeatureVector {
        method: FeatureMethod::Nclm,
        values,
        j: Some(j),
        warnings: Vec::new(),
    })
}

/// The log trace-moment summary `g_J` of one graph.
pub fn log_moment_features(g: &Graph, j: usize, floor: f64) -> Result<FeatureVector> {
    let mv = graph_moments(g, j)?;
    log_features_from_moments(&mv, j, floor)
}

/// Pairwise Euclidean distances between feature vectors of one method.
pub fn feature_distance_matrix(features: &[FeatureVector]) -> Result<DistanceMatrix> {
    let t = features.len();
    if t < 2 {
        return Err(Error::TooFewGraphs { needed: 2, got: t });
    }
    let method = features[0].method;
    let len = features[0].values.len();
    for (i, f) in features.iter().enumerate() {
        if f.method != method {
            return Err(Error::InvalidParam(format!(
                "feature {i} is {} among {} features",
                f.method, method
            )));
        }
        if f.values.len() != len {
            return Err(Error::DimensionMismatch(format!(
                "feature {i} has {} entries, expected {len}",
                f.values.len()
            )));
        }
        if let Some(bad) = f.values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "feature {i} contains {bad}"
            )));
        }
    }
    let mut d = SymMatrix::zeros(t);
    for i in 0..t {
        for j in i + 1..t {
            let sq: f64 = features[i]
                .values
                .iter()
                .zip(&features[j].values)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            d.set(i, j, sq.sqrt());
        }
    }
    DistanceMatrix::new(d)
}

// ---------------------------------------------------------------------------
// Kernel and tuning
// ---------------------------------------------------------------------------

/// Similarity kernel `exp(-t * D)` with unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    inner: SymMatrix,
    bandwidth: f64,
}

impl KernelMatrix {
    pub fn t(&self) -> usize {
        self.inner.n()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.inner.get(i, j)
    }

    pub fn as_sym(&self) -> &SymMatrix {
        &self.inner
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }
}

/// Elementwise `exp(-t * D_ij)`; the diagonal is exactly 1.
pub fn kernel_from_distance(d: &DistanceMatrix, t: f64) -> Result<KernelMatrix> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidParam(format!(
            "kernel bandwidth t must be > 0, got {t}"
        )));
    }
    let inner = SymMatrix::from_fn(d.t(), |i, j| {
        if i == j {
            1.0
        } else {
            (-t * d.get(i, j)).exp()
        }
    });
    Ok(KernelMatrix {
        inner,
        bandwidth: t,
    })
}

/// Outcome of bandwidth tuning: the winner plus the whole gap curve.
#[derive(Debug, Clone, PartialEq)]
pub struct TuneTReport {
    pub t_star: f64,
    pub gap: f64,
    /// `(t, relative eigengap)` for every grid point, ascending in `t`.
    pub gaps: Vec<(f64, f64)>,
}

/// Picks the bandwidth maximizing the relative eigengap
/// `(lambda_K - lambda_{K+1}) / max(lambda_{K+1}, 1e-12 * lambda_1)` of the
/// kernel, with eigenvalues in descending algebraic order. Ties go to the
/// smaller `t`.
pub fn tune_t(d: &DistanceMatrix, k: usize, grid: &[f64]) -> Result<TuneTReport> {
    let t_count = d.t();
    if k == 0 {
        return Err(Error::InvalidParam("cluster count k must be >= 1".into()));
    }
    if k + 1 > t_count {
        return Err(Error::InvalidParam(format!(
            "K+1 <= T required: the eigengap at K = {k} needs at least {} graphs, got {t_count}",
            k + 1
        )));
    }
    if grid.is_empty() {
        return Err(Error::InvalidParam("bandwidth grid is empty".into()));
    }
    for &t in grid {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::InvalidParam(format!(
                "bandwidth grid entry {t} must be > 0"
            )));
        }
    }
    let mut ts = grid.to_vec();
    ts.sort_by(f64::total_cmp);
    ts.dedup();

    let mut gaps = Vec::with_capacity(ts.len());
    let mut best: Option<(f64, f64)> = None;
    for &t in &ts {
        let kern = kernel_from_distance(d, t)?;
        let mut vals = sym_eig_values(kern.as_sym())?;
        vals.reverse(); // descending algebraic
        let lam1 = vals[0];
        let gap = (vals[k - 1] - vals[k]) / vals[k].max(1e-12 * lam1);
        gaps.push((t, gap));
        // Ascending grid + strict improvement = smallest t wins ties.
        if best.map_or(true, |(_, bg)| gap > bg) {
            best = Some((t, gap));
        }
    }
    let (t_star, gap) = best.expect("grid nonempty");
    Ok(TuneTReport { t_star, gap, gaps })
}

/// Data-driven bandwidth grid: `DEFAULT_T_GRID_LEN` log-spaced points
/// spanning `[1e-3 / med, 1e3 / med]`, where `med` is the median
/// off-diagonal distance. Falls back to `[1e-3, 1e3]` when the median is 0
/// (identical features).
pub fn default_t_grid(d: &DistanceMatrix) -> Vec<f64> {
    let mut off = d.off_diagonal();
    off.sort_by(f64::total_cmp);
    let med = if off.is_empty() {
        0.0
    } else if off.len() % 2 == 1 {
        off[off.len() / 2]
    } else {
        0.5 * (off[off.len() / 2 - 1] + off[off.len() / 2])
    };
    let (lo, hi) = if med > 0.0 && med.is_finite() {
        (1e-3 / med, 1e3 / med)
    } else {
        (1e-3, 1e3)
    };
    let count = DEFAULT_T_GRID_LEN;
    let step = (hi / lo).ln() / (count - 1) as f64;
    (0..count).map(|i| lo * (step * i as f64).exp()).collect()
}

/// Per-order diagnostic from J-tuning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JDiagnostic {
    pub j: usize,
    pub t_star: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneJReport {
    pub j_star: usize,
    pub t_star: f64,
    pub gap: f64,
    pub per_j: Vec<JDiagnostic>,
}

/// Picks the moment order in `j_range` (inclusive) whose tuned kernel has
/// the largest relative eigengap. Moments are computed once per graph at
/// the top of the range and prefix-reused for every smaller order. Ties go
/// to the smaller `J`.
///
/// When `t_grid` is `None`, each order uses its own [`default_t_grid`].
pub fn tune_j(
    graphs: &[Graph],
    k: usize,
    j_range: (usize, usize),
    t_grid: Option<&[f64]>,
) -> Result<TuneJReport> {
    tune_j_with_floor(graphs, k, j_range, t_grid, LOG_MOMENT_FLOOR)
}

pub fn tune_j_with_floor(
    graphs: &[Graph],
    k: usize,
    j_range: (usize, usize),
    t_grid: Option<&[f64]>,
    floor: f64,
) -> Result<TuneJReport> {
    let (j_lo, j_hi) = j_range;
    if j_lo < 2 || j_hi < j_lo {
        return Err(Error::InvalidParam(format!(
            "J range ({j_lo},{j_hi}) must satisfy 2 <= lo <= hi"
        )));
    }
    let moments: Vec<MomentVector> = graphs
        .par_iter()
        .map(|g| graph_moments(g, j_hi))
        .collect::<Result<_>>()?;

    let mut per_j = Vec::with_capacity(j_hi - j_lo + 1);
    let mut best: Option<JDiagnostic> = None;
    for j in j_lo..=j_hi {
        let features: Vec<FeatureVector> = moments
            .iter()
            .map(|m| log_features_from_moments(m, j, floor))
            .collect::<Result<_>>()?;
        let d = feature_distance_matrix(&features)?;
        let report = match t_grid {
            Some(g) => tune_t(&d, k, g)?,
            None => tune_t(&d, k, &default_t_grid(&d))?,
        };
        let diag = JDiagnostic {
            j,
            t_star: report.t_star,
            gap: report.gap,
        };
        per_j.push(diag);
        if best.map_or(true, |b| diag.gap > b.gap) {
            best = Some(diag);
        }
    }
    let win = best.expect("nonempty J range");
    Ok(TuneJReport {
        j_star: win.j,
        t_star: win.t_star,
        gap: win.gap,
        per_j,
    })
}

// ---------------------------------------------------------------------------
// Clustering
// ---------------------------------------------------------------------------

/// k-means on the rows of the kernel's leading eigenvectors, taken in
/// descending algebraic order (the same convention the eigengap tuning
/// uses). `embed_dim` defaults to `k`.
pub fn spectral_cluster_kernel(
    kernel: &KernelMatrix,
    k: usize,
    embed_dim: Option<usize>,
    seed: u64,
) -> Result<ClusterAssignment> {
    let t = kernel.t();
    if k > t {
        return Err(Error::TooManyClusters { k, t });
    }
    let dim = embed_dim.unwrap_or(k);
    let eig = sym_eig(kernel.as_sym(), dim, EigMode::LargestAlgebraic)?;
    let outcome = kmeans(
        eig.vectors.view(),
        k,
        &KmeansConfig {
            seed,
            ..KmeansConfig::default()
        },
    )?;
    let mut assignment = ClusterAssignment::new(outcome.labels, k, "spectral-kernel")?;
    assignment.wcss = outcome.wcss;
    Ok(assignment)
}

/// Feature-based clustering shared by every featurizer: distances, tuned
/// kernel, spectral embedding, k-means.
#[derive(Debug, Clone)]
pub struct FeatureClusterOutput {
    pub assignment: ClusterAssignment,
    pub distances: DistanceMatrix,
    pub tuning: TuneTReport,
}

pub fn cluster_features(
    features: &[FeatureVector],
    k: usize,
    t_grid: Option<&[f64]>,
    seed: u64,
) -> Result<FeatureClusterOutput> {
    let distances = feature_distance_matrix(features)?;
    let tuning = match t_grid {
        Some(g) => tune_t(&distances, k, g)?,
        None => tune_t(&distances, k, &default_t_grid(&distances))?,
    };
    let kern = kernel_from_distance(&distances, tuning.t_star)?;
    let mut assignment = spectral_cluster_kernel(&kern, k, None, seed)?;
    assignment.method = features[0].method.as_str().to_string();
    Ok(FeatureClusterOutput {
        assignment,
        distances,
        tuning,
    })
}

/// Output of the full moment pipeline.
#[derive(Debug, Clone)]
pub struct NclmOutput {
    pub assignment: ClusterAssignment,
    pub features: Vec<FeatureVector>,
    pub distances: DistanceMatrix,
    pub tuning: TuneTReport,
}

/// Runs the moment pipeline: `g_J` features in parallel, then the shared
/// distance/kernel/tune/cluster chain. Graphs may have different sizes.
pub fn nclm_pipeline(
    graphs: &[Graph],
    j: usize,
    k: usize,
    t_grid: Option<&[f64]>,
    seed: u64,
) -> Result<NclmOutput> {
    let features: Vec<FeatureVector> = graphs
        .par_iter()
        .map(|g| log_moment_features(g, j, LOG_MOMENT_FLOOR))
        .collect::<Result<_>>()?;
    let out = cluster_features(&features, k, t_grid, seed)?;
    Ok(NclmOutput {
        assignment: out.assignment,
        features,
        distances: out.distances,
        tuning: out.tuning,
    })
}

// ---------------------------------------------------------------------------
// Concentration probe
// ---------------------------------------------------------------------------

/// Empirical spread of the moment statistics under repeated sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationReport {
    pub order: usize,
    pub reps: usize,
    /// Mean and sample standard deviation of `psi_k`.
    pub mean_scaled: f64,
    pub std_scaled: f64,
    /// Mean of `m_k` itself (for order-of-magnitude checks).
    pub mean_moment: f64,
    /// Per-coordinate mean and sample std of `g_k = (log m_2..log m_k)`.
    pub mean_log: Vec<f64>,
    pub std_log: Vec<f64>,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    // A constant sequence has spread exactly zero; computing it through the
    // mean would leave summation dust.
    if xs.len() < 2 || xs.windows(2).all(|w| w[0] == w[1]) {
        return (xs.first().copied().unwrap_or(f64::NAN), 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Samples `reps` graphs from `model` and reports how concentrated
/// `psi_k = n/(k sqrt 2) m_k` and the log-moment coordinates are.
///
/// `reps >= 30` keeps the standard-deviation estimates meaningful.
pub fn concentration_probe(
    model: &Graphon,
    n: usize,
    k: usize,
    reps: usize,
    seed: u64,
) -> Result<ConcentrationReport> {
    if reps < 30 {
        return Err(Error::InvalidParam(format!(
            "concentration probe needs reps >= 30, got {reps}"
        )));
    }
    if k < 2 {
        return Err(Error::InvalidParam(format!(
            "moment order must be >= 2, got {k}"
        )));
    }
    let mvs: Vec<MomentVector> = (0..reps as u64)
        .into_par_iter()
        .map(|idx| graph_moments(&crate::graphs::sample_indexed(model, n, seed, idx), k))
        .collect::<Result<_>>()?;

    let scaled: Vec<f64> = mvs.iter().map(|m| m.scaled(k)).collect();
    let raw: Vec<f64> = mvs.iter().map(|m| m.moment(k)).collect();
    let (mean_scaled, std_scaled) = mean_std(&scaled);
    let mean_moment = raw.iter().sum::<f64>() / reps as f64;

    let mut mean_log = Vec::with_capacity(k - 1);
    let mut std_log = Vec::with_capacity(k - 1);
    for order in 2..=k {
        let logs: Vec<f64> = mvs
            .iter()
            .map(|m| m.moment(order).max(LOG_MOMENT_FLOOR).ln())
            .collect();
        let (mu, sd) = mean_std(&logs);
        mean_log.push(mu);
        std_log.push(sd);
    }
    Ok(ConcentrationReport {
        order: k,
        reps,
        mean_scaled,
        std_scaled,
        mean_moment,
        mean_log,
        std_log,
    })
}

// ---------------------------------------------------------------------------
// Feature cache
// ---------------------------------------------------------------------------

/// Writes features as CSV: `graph_id,method,J,v1..vL`. All vectors must
/// share one method and length.
pub fn save_features_csv(
    features: &[FeatureVector],
    ids: &[String],
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    if ids.len() != features.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} ids for {} feature vectors",
            ids.len(),
            features.len()
        )));
    }
    if features.is_empty() {
        return Err(Error::InvalidParam("no features to write".into()));
    }
    let len = features[0].values.len();
    let method = features[0].method;
    for f in features {
        if f.values.len() != len || f.method != method {
            return Err(Error::InvalidParam(
                "feature cache requires uniform method and length".into(),
            ));
        }
    }
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = std::fs::File::create(path).map_err(io_err)?;
    let mut w = std::io::BufWriter::new(file);
    let header: Vec<String> = (1..=len).map(|i| format!("v{i}")).collect();
    writeln!(w, "graph_id,method,J,{}", header.join(",")).map_err(io_err)?;
    for (id, f) in ids.iter().zip(features) {
        let j = f.j.map(|j| j.to_string()).unwrap_or_default();
        let vals: Vec<String> = f.values.iter().map(|v| format!("{v}")).collect();
        writeln!(w, "{id},{},{j},{}", f.method, vals.join(",")).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// Reads a feature cache written by [`save_features_csv`].
pub fn load_features_csv(path: impl AsRef<Path>) -> Result<(Vec<FeatureVector>, Vec<String>)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let bad =
        |line: usize, msg: String| Error::InvalidParam(format!("{}:{line}: {msg}", path.display()));
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| bad(1, "empty file".into()))?;
    if !header.starts_with("graph_id,method,J") {
        return Err(bad(1, format!("unexpected header '{header}'")));
    }
    let mut features = Vec::new();
    let mut ids = Vec::new();
    for (i, line) in lines {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() < 4 {
            return Err(bad(i + 1, "expected graph_id,method,J,values...".into()));
        }
        let method: FeatureMethod = cols[1]
            .parse()
            .map_err(|e: Error| bad(i + 1, e.to_string()))?;
        let j = if cols[2].is_empty() {
            None
        } else {
            Some(
                cols[2]
                    .parse::<usize>()
                    .map_err(|e| bad(i + 1, format!("J column: {e}")))?,
            )
        };
        let mut values = Vec::with_capacity(cols.len() - 3);
        for tok in &cols[3..] {
            values.push(
                tok.parse::<f64>()
                    .map_err(|e| bad(i + 1, format!("value column: {e}")))?,
            );
        }
        ids.push(cols[0].to_string());
        features.push(FeatureVector {
            method,
            values,
            j,
            warnings: Vec::new(),
        });
    }
    if features.is_empty() {
        return Err(bad(1, "no feature rows".into()));
    }
    Ok((features, ids))
}
