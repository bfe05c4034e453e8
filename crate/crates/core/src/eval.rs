//! Experiment harness: the permutation-minimal clustering-error metric,
//! declarative scenario configs, a seeded runner that times every stage, and
//! comparison tables over the resulting reports.
//!
//! A scenario is: a generative model, a list of methods, a cluster count,
//! and seeds. For each seed the runner samples one graph collection, runs
//! every method on it, and records per-cell outcomes — error against the
//! generating truth, per-stage wall-clock, tuning diagnostics, and the
//! failure message when a method's preconditions rule it out (a mixed-size
//! collection fed to a correspondence-based method, say). One method
//! failing must never abort the others.
//!
//! Reports serialize to JSON; identical configs and seeds reproduce
//! identical reports except for the `seconds` timing fields.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{graph_stats_features, topeig_features};
use crate::error::{Error, Result};
use crate::graphs::{Graph, Graphon, MixtureModel, SmoothExpr};
use crate::graphon_est::Estimator;
use crate::ncge::{frobenius_distance_matrix, spectral_cluster_distance, ClusterAssignment};
use crate::nclm::{
    default_t_grid, feature_distance_matrix, kernel_from_distance, log_moment_features,
    spectral_cluster_kernel, tune_j, tune_t, FeatureVector, TuneTReport, LOG_MOMENT_FLOOR,
};

/// Version stamp written into configs and reports.
pub const SCHEMA_VERSION: u32 = 1;

// ---------------------------------------------------------------------------
// Clustering error
// ---------------------------------------------------------------------------

/// Largest label count for which the exact assignment search stays cheap
/// (the subset DP is O(2^K Â· K)).
const MAX_ERROR_CLUSTERS: usize = 20;

/// Minimum over all label permutations of the normalized Hamming distance
/// between `pred` and `truth`, both labeled in `1..=k`.
///
/// Computed as a maximum-agreement assignment on the K x K confusion
/// matrix, which equals the K!-permutation minimum without enumerating
/// permutations.
pub fn clustering_error(pred: &[usize], truth: &[usize], k: usize) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predicted labels vs {} true labels",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::InvalidParam("no labels to compare".into()));
    }
    if k == 0 || k > MAX_ERROR_CLUSTERS {
        return Err(Error::InvalidParam(format!(
            "cluster count {k} outside 1..={MAX_ERROR_CLUSTERS}"
        )));
    }
    let mut confusion = vec![vec![0u64; k]; k];
    for (&p, &t) in pred.iter().zip(truth) {
        if !(1..=k).contains(&p) || !(1..=k).contains(&t) {
            return Err(Error::InvalidParam(format!(
                "label pair ({p}, {t}) outside 1..={k}"
            )));
        }
        confusion[p - 1][t - 1] += 1;
    }
    // dp[mask]: best agreement after matching the first popcount(mask)
    // predicted labels to the true labels in `mask`.
    let mut dp = vec![0u64; 1usize << k];
    for mask in 1usize..(1 << k) {
        let i = mask.count_ones() as usize - 1;
        let mut best = 0;
        for t in 0..k {
            if mask & (1 << t) != 0 {
                best = best.max(dp[mask ^ (1 << t)] + confusion[i][t]);
            }
        }
        dp[mask] = best;
    }
    let agree = dp[(1 << k) - 1];
    Ok((pred.len() as u64 - agree) as f64 / pred.len() as f64)
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// A serializable graph-model description; `build` applies the validating
/// constructors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum GraphonSpec {
    PlantedPartition {
        p: f64,
        q: f64,
        blocks: usize,
        rho: f64,
    },
    Blockmodel {
        b: Vec<Vec<f64>>,
        pi: Vec<f64>,
        rho: f64,
    },
    ErdosRenyi {
        p: f64,
        rho: f64,
    },
    Smooth {
        expr: SmoothExpr,
        rho: f64,
    },
}

impl GraphonSpec {
    pub fn build(&self) -> Result<Graphon> {
        match self {
            GraphonSpec::PlantedPartition { p, q, blocks, rho } => {
                Graphon::planted_partition(*p, *q, *blocks, *rho)
            }
            GraphonSpec::Blockmodel { b, pi, rho } => {
                Graphon::blockmodel(b.clone(), pi.clone(), *rho)
            }
            GraphonSpec::ErdosRenyi { p, rho } => Graphon::erdos_renyi(*p, *rho),
            GraphonSpec::Smooth { expr, rho } => Graphon::smooth(expr.clone(), *rho),
        }
    }
}

/// One group of a synthetic corpus: a model plus the sizes of the graphs
/// drawn from it (sizes may differ, so only size-free methods apply).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusGroup {
    pub model: GraphonSpec,
    pub sizes: Vec<usize>,
}

fn default_theta_cell() -> usize {
    20
}

fn default_theta_sizes() -> Vec<usize> {
    vec![500, 1000]
}

/// The generative side of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelConfig {
    /// A two-component mixture of planted-partition graphons where the
    /// second component's probabilities are scaled by `1 + eps`. Density
    /// comes from `rho` directly, or from `target_avg_degree` (the first
    /// component's expected average degree) when `rho` is omitted.
    BlockmodelPair {
        p: f64,
        q: f64,
        blocks: usize,
        eps: f64,
        n: usize,
        counts: Vec<usize>,
        #[serde(default)]
        rho: Option<f64>,
        #[serde(default)]
        target_avg_degree: Option<f64>,
    },
    /// The four fixed planted-partition settings, sampled at each size in
    /// `sizes` with `graphs_per_cell` graphs per (setting, size) cell.
    /// Truth is the setting index: sizes do not define classes.
    ThetaSuite {
        #[serde(default = "default_theta_cell")]
        graphs_per_cell: usize,
        #[serde(default = "default_theta_sizes")]
        sizes: Vec<usize>,
    },
    /// Arbitrary labeled groups of graphs with per-graph sizes.
    Corpus { groups: Vec<CorpusGroup> },
}

/// The four (p, q, blocks, rho) settings of the simulation suite.
pub const THETA_SETTINGS: [(f64, f64, usize, f64); 4] = [
    (0.1, 0.05, 2, 0.6),
    (0.1, 0.05, 2, 1.0),
    (0.1, 0.05, 8, 0.6),
    (0.2, 0.1, 8, 0.6),
];

/// Declarative description of one experiment scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub scenario: String,
    pub model: ModelConfig,
    /// Method names; see [`MethodName`]. Empty = generation-only run.
    #[serde(default)]
    pub methods: Vec<String>,
    pub k: usize,
    #[serde(default)]
    pub j: Option<usize>,
    #[serde(default)]
    pub j_range: Option<(usize, usize)>,
    #[serde(default)]
    pub t_grid: Option<Vec<f64>>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

/// The methods the harness can dispatch. `cl-*` spellings are accepted as
/// aliases for the correspondence-based variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodName {
    NcgeUsvt,
    NcgeNbs,
    NcgeNaive,
    Nclm,
    TopEig,
    GraphStats,
}

impl MethodName {
    pub fn as_str(&self) -> &'static str {
        match self {
            MethodName::NcgeUsvt => "ncge-usvt",
            MethodName::NcgeNbs => "ncge-nbs",
            MethodName::NcgeNaive => "ncge-naive",
            MethodName::Nclm => "nclm",
            MethodName::TopEig => "topeig",
            MethodName::GraphStats => "graphstats",
        }
    }

    pub fn all() -> [MethodName; 6] {
        [
            MethodName::NcgeUsvt,
            MethodName::NcgeNbs,
            MethodName::NcgeNaive,
            MethodName::Nclm,
            MethodName::TopEig,
            MethodName::GraphStats,
        ]
    }
}

impl std::str::FromStr for MethodName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ncge-usvt" | "cl-usvt" => Ok(MethodName::NcgeUsvt),
            "ncge-nbs" | "cl-nbs" => Ok(MethodName::NcgeNbs),
            "ncge-naive" | "cl-naive" => Ok(MethodName::NcgeNaive),
            "nclm" => Ok(MethodName::Nclm),
            "topeig" => Ok(MethodName::TopEig),
            "graphstats" => Ok(MethodName::GraphStats),
            other => Err(Error::Config(format!(
                "unknown method '{other}' (expected ncge-usvt, ncge-nbs, ncge-naive, nclm, topeig, or graphstats)"
            ))),
        }
    }
}

impl std::fmt::Display for MethodName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl ExperimentConfig {
    /// Parses the method list, failing on the first unknown name.
    pub fn method_names(&self) -> Result<Vec<MethodName>> {
        self.methods.iter().map(|m| m.parse()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "config schema_version {} but this build reads {SCHEMA_VERSION}",
                self.schema_version
            )));
        }
        if self.scenario.is_empty() {
            return Err(Error::Config("scenario id must be nonempty".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if self.k == 0 {
            return Err(Error::Config("k must be >= 1".into()));
        }
        let methods = self.method_names()?;
        let needs_j = methods
            .iter()
            .any(|m| matches!(m, MethodName::Nclm | MethodName::TopEig));
        if needs_j && self.j.is_none() && self.j_range.is_none() {
            return Err(Error::Config(
                "nclm/topeig methods need `j` (or `j_range` for nclm)".into(),
            ));
        }
        if methods.contains(&MethodName::TopEig) && self.j.is_none() {
            return Err(Error::Config("topeig needs a fixed `j`".into()));
        }
        if let Some((lo, hi)) = self.j_range {
            if lo < 2 || hi < lo {
                return Err(Error::Config(format!(
                    "j_range ({lo},{hi}) must satisfy 2 <= lo <= hi"
                )));
            }
        }
        if let Some(grid) = &self.t_grid {
            if grid.is_empty() || grid.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
                return Err(Error::Config(
                    "t_grid entries must be positive reals".into(),
                ));
            }
        }
        let groups = self.model.group_count();
        if groups > self.k {
            return Err(Error::Config(format!(
                "model generates {groups} groups but k = {} clusters",
                self.k
            )));
        }
        self.model.validate()
    }
}

impl ModelConfig {
    /// Number of distinct truth labels the model emits.
    pub fn group_count(&self) -> usize {
        match self {
            ModelConfig::BlockmodelPair { counts, .. } => counts.len(),
            ModelConfig::ThetaSuite { .. } => THETA_SETTINGS.len(),
            ModelConfig::Corpus { groups } => groups.len(),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            ModelConfig::BlockmodelPair {
                eps,
                n,
                counts,
                rho,
                target_avg_degree,
                ..
            } => {
                if counts.len() != 2 || counts.iter().sum::<usize>() < 2 {
                    return Err(Error::Config(
                        "blockmodel-pair needs two counts summing to >= 2".into(),
                    ));
                }
                if !(*eps >= 0.0) || !eps.is_finite() {
                    return Err(Error::Config(format!("eps must be >= 0, got {eps}")));
                }
                if *n < 2 {
                    return Err(Error::Config("graph size n must be >= 2".into()));
                }
                if rho.is_some() && target_avg_degree.is_some() {
                    return Err(Error::Config(
                        "give rho or target_avg_degree, not both".into(),
                    ));
                }
                // Building the components applies the probability checks.
                self.components(0)?;
                Ok(())
            }
            ModelConfig::ThetaSuite {
                graphs_per_cell,
                sizes,
            } => {
                if *graphs_per_cell == 0 || sizes.is_empty() {
                    return Err(Error::Config(
                        "theta-suite needs graphs_per_cell >= 1 and nonempty sizes".into(),
                    ));
                }
                if sizes.iter().any(|&n| n < 2) {
                    return Err(Error::Config("theta-suite sizes must be >= 2".into()));
                }
                Ok(())
            }
            ModelConfig::Corpus { groups } => {
                if groups.is_empty() || groups.iter().any(|g| g.sizes.is_empty()) {
                    return Err(Error::Config(
                        "corpus needs >= 1 group, each with >= 1 size".into(),
                    ));
                }
                if groups.iter().flat_map(|g| &g.sizes).any(|&n| n < 2) {
                    return Err(Error::Config("corpus sizes must be >= 2".into()));
                }
                for g in groups {
                    g.model.build()?;
                }
                Ok(())
            }
        }
    }

    /// The mixture components of a blockmodel pair (other kinds have their
    /// own sampling paths).
    fn components(&self, _seed: u64) -> Result<(Graphon, Graphon)> {
        let ModelConfig::BlockmodelPair {
            p,
            q,
            blocks,
            eps,
            n,
            rho,
            target_avg_degree,
            ..
        } = self
        else {
            return Err(Error::Config("not a blockmodel-pair model".into()));
        };
        let rho = match (rho, target_avg_degree) {
            (Some(r), _) => *r,
            (None, Some(target)) => {
                // Expected average degree of the base component at density
                // multiplier rho is (n - 1) * rho * mean(f).
                let base = Graphon::planted_partition(*p, *q, *blocks, 1.0)?;
                let mean = base.mean_value();
                if !(*target > 0.0) || mean <= 0.0 {
                    return Err(Error::Config(
                        "target_avg_degree needs a positive target and model mean".into(),
                    ));
                }
                let r = target / ((*n as f64 - 1.0) * mean);
                if r > 1.0 {
                    return Err(Error::Config(format!(
                        "target_avg_degree {target} needs rho = {r:.3} > 1"
                    )));
                }
                r
            }
            (None, None) => 1.0,
        };
        let first = Graphon::planted_partition(*p, *q, *blocks, rho)?;
        let second = Graphon::planted_partition(*p * (1.0 + eps), *q * (1.0 + eps), *blocks, rho)?;
        Ok((first, second))
    }

    /// Samples the collection for one seed. Returns the graphs and their
    /// 1-based truth labels (constant across seeds by construction).
    pub fn generate(&self, seed: u64) -> Result<(Vec<Graph>, Vec<usize>)> {
        match self {
            ModelConfig::BlockmodelPair { n, counts, .. } => {
                let (first, second) = self.components(seed)?;
                let mixture = MixtureModel::uniform(vec![first, second])?;
                let drawn = crate::graphs::sample_mixture_counts(&mixture, counts, *n, seed)?;
                Ok(drawn.into_iter().unzip())
            }
            ModelConfig::ThetaSuite {
                graphs_per_cell,
                sizes,
            } => {
                let mut graphs = Vec::new();
                let mut truth = Vec::new();
                for (idx, &(p, q, blocks, rho)) in THETA_SETTINGS.iter().enumerate() {
                    let model = Graphon::planted_partition(p, q, blocks, rho)?;
                    for (size_idx, &n) in sizes.iter().enumerate() {
                        for rep in 0..*graphs_per_cell {
                            let graph_seed = crate::rng::mix(&[
                                0x7E7A,
                                seed,
                                idx as u64,
                                size_idx as u64,
                                rep as u64,
                            ]);
                            graphs.push(crate::graphs::sample_graphon(&model, n, graph_seed));
                            truth.push(idx + 1);
                        }
                    }
                }
                Ok((graphs, truth))
            }
            ModelConfig::Corpus { groups } => {
                let mut graphs = Vec::new();
                let mut truth = Vec::new();
                for (idx, group) in groups.iter().enumerate() {
                    let model = group.model.build()?;
                    for (gi, &n) in group.sizes.iter().enumerate() {
                        let graph_seed =
                            crate::rng::mix(&[0xC0 + idx as u64, seed, gi as u64]);
                        graphs.push(crate::graphs::sample_graphon(&model, n, graph_seed));
                        truth.push(idx + 1);
                    }
                }
                Ok((graphs, truth))
            }
        }
    }
}

/// Reads a config from TOML (`.toml`) or JSON (anything else).
pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let cfg: ExperimentConfig = if path.extension().is_some_and(|e| e == "toml") {
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
    } else {
        serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
    };
    cfg.validate()?;
    Ok(cfg)
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

/// Wall-clock spent in each pipeline stage, in seconds. Excluded from
/// reproducibility comparisons (every field name contains "seconds").
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageSeconds {
    pub featurize_seconds: f64,
    pub distance_seconds: f64,
    pub tune_seconds: f64,
    pub cluster_seconds: f64,
}

impl StageSeconds {
    pub fn total(&self) -> f64 {
        self.featurize_seconds + self.distance_seconds + self.tune_seconds + self.cluster_seconds
    }
}

/// One tuning curve: the swept parameter, the chosen value, and the
/// (parameter, gap) samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningRecord {
    pub parameter: String,
    pub chosen: f64,
    pub gap: f64,
    pub curve: Vec<(f64, f64)>,
}

/// Outcome of one (method, seed) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodCell {
    pub method: String,
    pub seed: u64,
    /// Clustering error vs truth; `None` when the method failed.
    pub error: Option<f64>,
    /// The failure message when the method could not run.
    pub failure: Option<String>,
    /// Predicted labels (empty on failure).
    pub labels: Vec<usize>,
    pub seconds: StageSeconds,
    pub tuning: Vec<TuningRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub seeds_ok: usize,
    pub seeds_failed: usize,
    pub mean_error: Option<f64>,
    pub std_error: Option<f64>,
    pub mean_seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub t: usize,
    pub sizes: Vec<usize>,
    pub mean_edges: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub schema_version: u32,
    pub scenario: String,
    pub k: usize,
    pub seeds: Vec<u64>,
    pub truth: Vec<usize>,
    pub generation: GenerationStats,
    pub cells: Vec<MethodCell>,
    pub summary: Vec<MethodSummary>,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

// ---------------------------------------------------------------------------
// Runner
// ---------------------------------------------------------------------------

struct CellOutcome {
    assignment: ClusterAssignment,
    seconds: StageSeconds,
    tuning: Vec<TuningRecord>,
}

/// Shared tail of every feature-based method: distances, bandwidth tuning,
/// kernel, spectral k-means — each stage timed.
fn cluster_feature_cells(
    features: &[FeatureVector],
    k: usize,
    t_grid: Option<&[f64]>,
    seed: u64,
    seconds: &mut StageSeconds,
    tuning: &mut Vec<TuningRecord>,
) -> Result<ClusterAssignment> {
    let start = Instant::now();
    let distances = feature_distance_matrix(features)?;
    seconds.distance_seconds = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let report: TuneTReport = match t_grid {
        Some(grid) => tune_t(&distances, k, grid)?,
        None => tune_t(&distances, k, &default_t_grid(&distances))?,
    };
    seconds.tune_seconds = start.elapsed().as_secs_f64();
    tuning.push(TuningRecord {
        parameter: "t".into(),
        chosen: report.t_star,
        gap: report.gap,
        curve: report.gaps.clone(),
    });

    let start = Instant::now();
    let kernel = kernel_from_distance(&distances, report.t_star)?;
    let assignment = spectral_cluster_kernel(&kernel, k, None, seed)?;
    seconds.cluster_seconds = start.elapsed().as_secs_f64();
    Ok(assignment)
}

fn run_method(
    method: MethodName,
    graphs: &[Graph],
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<CellOutcome> {
    let mut seconds = StageSeconds::default();
    let mut tuning = Vec::new();
    let assignment = match method {
        MethodName::NcgeUsvt | MethodName::NcgeNbs | MethodName::NcgeNaive => {
            let estimator = match method {
                MethodName::NcgeUsvt => Estimator::usvt(),
                MethodName::NcgeNbs => Estimator::nbs(),
                _ => Estimator::Naive,
            };
            let start = Instant::now();
            let estimates = graphs
                .par_iter()
                .map(|g| estimator.estimate(g))
                .collect::<Result<Vec<_>>>()?;
            seconds.featurize_seconds = start.elapsed().as_secs_f64();

            let start = Instant::now();
            let distances = frobenius_distance_matrix(&estimates)?;
            seconds.distance_seconds = start.elapsed().as_secs_f64();

            let start = Instant::now();
            let mut assignment = spectral_cluster_distance(&distances, cfg.k, seed)?;
            seconds.cluster_seconds = start.elapsed().as_secs_f64();
            assignment.method = method.as_str().to_string();
            assignment
        }
        MethodName::Nclm => {
            let j = match (cfg.j, cfg.j_range) {
                (Some(j), _) => j,
                (None, Some(range)) => {
                    let start = Instant::now();
                    let report = tune_j(graphs, cfg.k, range, cfg.t_grid.as_deref())?;
                    seconds.tune_seconds = start.elapsed().as_secs_f64();
                    tuning.push(TuningRecord {
                        parameter: "J".into(),
                        chosen: report.j_star as f64,
                        gap: report.gap,
                        curve: report
                            .per_j
                            .iter()
                            .map(|d| (d.j as f64, d.gap))
                            .collect(),
                    });
                    report.j_star
                }
                (None, None) => {
                    return Err(Error::Config("nclm needs `j` or `j_range`".into()))
                }
            };
            let start = Instant::now();
            let features = graphs
                .par_iter()
                .map(|g| log_moment_features(g, j, LOG_MOMENT_FLOOR))
                .collect::<Result<Vec<_>>>()?;
            seconds.featurize_seconds = start.elapsed().as_secs_f64();
            let tune_so_far = seconds.tune_seconds;
            let mut assignment = cluster_feature_cells(
                &features,
                cfg.k,
                cfg.t_grid.as_deref(),
                seed,
                &mut seconds,
                &mut tuning,
            )?;
            seconds.tune_seconds += tune_so_far;
            assignment.method = method.as_str().to_string();
            assignment
        }
        MethodName::TopEig => {
            let j = cfg
                .j
                .ok_or_else(|| Error::Config("topeig needs a fixed `j`".into()))?;
            let start = Instant::now();
            let features = graphs
                .par_iter()
                .map(|g| topeig_features(g, j))
                .collect::<Result<Vec<_>>>()?;
            seconds.featurize_seconds = start.elapsed().as_secs_f64();
            let mut assignment = cluster_feature_cells(
                &features,
                cfg.k,
                cfg.t_grid.as_deref(),
                seed,
                &mut seconds,
                &mut tuning,
            )?;
            assignment.method = method.as_str().to_string();
            assignment
        }
        MethodName::GraphStats => {
            let start = Instant::now();
            let features: Vec<FeatureVector> =
                graphs.par_iter().map(graph_stats_features).collect();
            seconds.featurize_seconds = start.elapsed().as_secs_f64();
            let mut assignment = cluster_feature_cells(
                &features,
                cfg.k,
                cfg.t_grid.as_deref(),
                seed,
                &mut seconds,
                &mut tuning,
            )?;
            assignment.method = method.as_str().to_string();
            assignment
        }
    };
    Ok(CellOutcome {
        assignment,
        seconds,
        tuning,
    })
}

/// Runs every (seed, method) cell of a scenario.
///
/// A method failure is recorded in its cell and the run continues; only
/// config and generation errors abort. When `cfg.out_dir` is set the
/// report files are written there (see [`write_scenario_outputs`]).
pub fn run_scenario(cfg: &ExperimentConfig) -> Result<ScenarioReport> {
    cfg.validate()?;
    let methods = cfg.method_names()?;
    let mut cells = Vec::new();
    let mut truth: Vec<usize> = Vec::new();
    let mut sizes: Vec<usize> = Vec::new();
    let mut edge_total = 0u64;
    let mut graph_total = 0usize;

    for &seed in &cfg.seeds {
        let (graphs, labels) = cfg.model.generate(seed)?;
        if truth.is_empty() {
            truth = labels.clone();
            sizes = graphs.iter().map(|g| g.n()).collect();
        }
        edge_total += graphs.iter().map(|g| g.edge_count() as u64).sum::<u64>();
        graph_total += graphs.len();

        for &method in &methods {
            let cell = match run_method(method, &graphs, cfg, seed) {
                Ok(outcome) => {
                    let error = clustering_error(&outcome.assignment.labels, &labels, cfg.k)?;
                    MethodCell {
                        method: method.as_str().to_string(),
                        seed,
                        error: Some(error),
                        failure: None,
                        labels: outcome.assignment.labels,
                        seconds: outcome.seconds,
                        tuning: outcome.tuning,
                    }
                }
                Err(e) => MethodCell {
                    method: method.as_str().to_string(),
                    seed,
                    error: None,
                    failure: Some(e.to_string()),
                    labels: Vec::new(),
                    seconds: StageSeconds::default(),
                    tuning: Vec::new(),
                },
            };
            cells.push(cell);
        }
    }

    let summary = methods
        .iter()
        .map(|m| summarize_method(m.as_str(), &cells))
        .collect();
    let report = ScenarioReport {
        schema_version: SCHEMA_VERSION,
        scenario: cfg.scenario.clone(),
        k: cfg.k,
        seeds: cfg.seeds.clone(),
        truth,
        generation: GenerationStats {
            t: sizes.len(),
            sizes,
            mean_edges: if graph_total == 0 {
                0.0
            } else {
                edge_total as f64 / graph_total as f64
            },
        },
        cells,
        summary,
    };
    if let Some(dir) = &cfg.out_dir {
        write_scenario_outputs(&report, dir)?;
    }
    Ok(report)
}

fn summarize_method(method: &str, cells: &[MethodCell]) -> MethodSummary {
    let mine: Vec<&MethodCell> = cells.iter().filter(|c| c.method == method).collect();
    let errors: Vec<f64> = mine.iter().filter_map(|c| c.error).collect();
    let times: Vec<f64> = mine
        .iter()
        .filter(|c| c.failure.is_none())
        .map(|c| c.seconds.total())
        .collect();
    let (mean_error, std_error) = if errors.is_empty() {
        (None, None)
    } else {
        let (m, s) = mean_std(&errors);
        (Some(m), Some(s))
    };
    MethodSummary {
        method: method.to_string(),
        seeds_ok: errors.len(),
        seeds_failed: mine.len() - errors.len(),
        mean_error,
        std_error,
        mean_seconds: if times.is_empty() {
            None
        } else {
            Some(times.iter().sum::<f64>() / times.len() as f64)
        },
    }
}

// ---------------------------------------------------------------------------
// Output files
// ---------------------------------------------------------------------------

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `report.json`, `errors.csv` (one row per cell), and `gaps.csv`
/// (one row per tuning-curve sample) into `dir`.
pub fn write_scenario_outputs(report: &ScenarioReport, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;

    let json_path = dir.join("report.json");
    let mut text = serde_json::to_string_pretty(report)
        .map_err(|e| Error::Config(format!("report serialization: {e}")))?;
    text.push('\n');
    std::fs::write(&json_path, text).map_err(io_err(&json_path))?;

    let err_path = dir.join("errors.csv");
    let mut w = csv::Writer::from_path(&err_path).map_err(|e| Error::Config(e.to_string()))?;
    w.write_record(["scenario", "method", "seed", "error", "failure"])
        .map_err(|e| Error::Config(e.to_string()))?;
    for cell in &report.cells {
        w.write_record([
            report.scenario.as_str(),
            cell.method.as_str(),
            &cell.seed.to_string(),
            &cell.error.map(|e| e.to_string()).unwrap_or_default(),
            cell.failure.as_deref().unwrap_or(""),
        ])
        .map_err(|e| Error::Config(e.to_string()))?;
    }
    w.flush().map_err(io_err(&err_path))?;

    let gaps_path = dir.join("gaps.csv");
    let mut w = csv::Writer::from_path(&gaps_path).map_err(|e| Error::Config(e.to_string()))?;
    w.write_record(["scenario", "method", "seed", "parameter", "value", "gap"])
        .map_err(|e| Error::Config(e.to_string()))?;
    for cell in &report.cells {
        for record in &cell.tuning {
            for &(value, gap) in &record.curve {
                w.write_record([
                    report.scenario.as_str(),
                    cell.method.as_str(),
                    &cell.seed.to_string(),
                    record.parameter.as_str(),
                    &value.to_string(),
                    &gap.to_string(),
                ])
                .map_err(|e| Error::Config(e.to_string()))?;
            }
        }
    }
    w.flush().map_err(io_err(&gaps_path))?;
    Ok(())
}

/// Reads a `report.json` written by [`write_scenario_outputs`].
pub fn load_report(path: impl AsRef<Path>) -> Result<ScenarioReport> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

// ---------------------------------------------------------------------------
// Comparison tables
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub method: String,
    pub cells: usize,
    pub mean_error: Option<f64>,
    pub std_error: Option<f64>,
    pub mean_seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub scenario: String,
    pub rows: Vec<CompareRow>,
}

/// Merges reports of one scenario into a method × (error, time) table,
/// sorted by error then time; methods that never succeeded sort last.
pub fn compare_report(reports: &[ScenarioReport]) -> Result<ComparisonTable> {
    let Some(first) = reports.first() else {
        return Err(Error::InvalidParam("no reports to compare".into()));
    };
    for r in reports {
        if r.scenario != first.scenario {
            return Err(Error::Config(format!(
                "cannot compare scenarios '{}' and '{}'",
                first.scenario, r.scenario
            )));
        }
    }
    let mut by_method: BTreeMap<String, (Vec<f64>, Vec<f64>, usize)> = BTreeMap::new();
    for cell in reports.iter().flat_map(|r| &r.cells) {
        let entry = by_method.entry(cell.method.clone()).or_default();
        entry.2 += 1;
        if let Some(e) = cell.error {
            entry.0.push(e);
            entry.1.push(cell.seconds.total());
        }
    }
    let mut rows: Vec<CompareRow> = by_method
        .into_iter()
        .map(|(method, (errors, times, cells))| {
            let (mean_error, std_error) = if errors.is_empty() {
                (None, None)
            } else {
                let (m, s) = mean_std(&errors);
                (Some(m), Some(s))
            };
            CompareRow {
                method,
                cells,
                mean_error,
                std_error,
                mean_seconds: if times.is_empty() {
                    None
                } else {
                    Some(times.iter().sum::<f64>() / times.len() as f64)
                },
            }
        })
        .collect();
    rows.sort_by(|a, b| {
        let key = |r: &CompareRow| {
            (
                r.mean_error.unwrap_or(f64::INFINITY),
                r.mean_seconds.unwrap_or(f64::INFINITY),
            )
        };
        let (ae, at) = key(a);
        let (be, bt) = key(b);
        ae.total_cmp(&be)
            .then(at.total_cmp(&bt))
            .then(a.method.cmp(&b.method))
    });
    Ok(ComparisonTable {
        scenario: first.scenario.clone(),
        rows,
    })
}

fn fmt_cell(v: Option<f64>, digits: usize) -> String {
    match v {
        Some(x) => format!("{x:.digits$}"),
        None => "—".to_string(),
    }
}

impl ComparisonTable {
    /// Aligned text rendering; missing cells show as "—".
    pub fn to_text(&self) -> String {
        let mut rows: Vec<[String; 4]> = vec![[
            "method".into(),
            "error".into(),
            "std".into(),
            "time (s)".into(),
        ]];
        for r in &self.rows {
            rows.push([
                r.method.clone(),
                fmt_cell(r.mean_error, 4),
                fmt_cell(r.std_error, 4),
                fmt_cell(r.mean_seconds, 3),
            ]);
        }
        let width = |c: usize| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0);
        let widths = [width(0), width(1), width(2), width(3)];
        let mut out = format!("scenario: {}\n", self.scenario);
        for row in &rows {
            let mut line = String::new();
            for (c, cell) in row.iter().enumerate() {
                if c > 0 {
                    line.push_str("  ");
                }
                let pad = widths[c] - cell.chars().count();
                line.push_str(cell);
                line.push_str(&" ".repeat(pad));
            }
            out.push_str(line.trim_end());
            out.push('\n');
        }
        out
    }

    /// CSV rendering with the same "—" convention.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("scenario,method,cells,mean_error,std_error,mean_seconds\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                self.scenario,
                r.method,
                r.cells,
                fmt_cell(r.mean_error, 4),
                fmt_cell(r.std_error, 4),
                fmt_cell(r.mean_seconds, 3),
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_examples() {
        assert_eq!(
            clustering_error(&[1, 1, 2, 2], &[2, 2, 1, 1], 2).unwrap(),
            0.0
        );
        assert_eq!(
            clustering_error(&[1, 1, 2, 2], &[1, 1, 1, 2], 2).unwrap(),
            0.25
        );
        assert_eq!(
            clustering_error(&[1, 2, 3, 4], &[1, 2, 3, 4], 4).unwrap(),
            0.0
        );
        assert!(clustering_error(&[1, 2], &[1], 2).is_err());
        assert!(clustering_error(&[], &[], 2).is_err());
        assert!(clustering_error(&[1, 3], &[1, 2], 2).is_err());
        assert!(clustering_error(&[1], &[1], 0).is_err());
    }

    fn brute_force_error(pred: &[usize], truth: &[usize], k: usize) -> f64 {
        fn permutations(k: usize) -> Vec<Vec<usize>> {
            if k == 1 {
                return vec![vec![0]];
            }
            let mut out = Vec::new();
            for p in permutations(k - 1) {
                for slot in 0..=p.len() {
                    let mut q = p.clone();
                    q.insert(slot, k - 1);
                    out.push(q);
                }
            }
            out
        }
        let mut best = usize::MAX;
        for perm in permutations(k) {
            let mismatches = pred
                .iter()
                .zip(truth)
                .filter(|&(&p, &t)| perm[p - 1] + 1 != t)
                .count();
            best = best.min(mismatches);
        }
        best as f64 / pred.len() as f64
    }

    #[test]
    fn error_matches_brute_force_permutations() {
        for case in 0..200u64 {
            let k = 2 + (case % 4) as usize; // 2..=5
            let len = 4 + (case % 9) as usize;
            let pred: Vec<usize> = (0..len)
                .map(|i| 1 + (crate::rng::mix(&[case, i as u64, 1]) as usize % k))
                .collect();
            let truth: Vec<usize> = (0..len)
                .map(|i| 1 + (crate::rng::mix(&[case, i as u64, 2]) as usize % k))
                .collect();
            let fast = clustering_error(&pred, &truth, k).unwrap();
            let slow = brute_force_error(&pred, &truth, k);
            assert_eq!(fast, slow, "case {case}");
            // Symmetry under swapping arguments.
            assert_eq!(
                fast,
                clustering_error(&truth, &pred, k).unwrap(),
                "case {case}"
            );
        }
    }

    #[test]
    fn error_zero_iff_label_permutation() {
        let pred = vec![3, 3, 1, 2, 1];
        let relabeled: Vec<usize> = pred.iter().map(|&l| [2, 3, 1][l - 1]).collect();
        assert_eq!(clustering_error(&pred, &relabeled, 3).unwrap(), 0.0);
        let mut off = relabeled;
        off[0] = off[0] % 3 + 1;
        assert!(clustering_error(&pred, &off, 3).unwrap() > 0.0);
    }

    fn tiny_config(methods: Vec<String>, seeds: Vec<u64>) -> ExperimentConfig {
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            scenario: "tiny".into(),
            model: ModelConfig::BlockmodelPair {
                p: 0.6,
                q: 0.1,
                blocks: 2,
                eps: 0.5,
                n: 40,
                counts: vec![4, 4],
                rho: Some(0.5),
                target_avg_degree: None,
            },
            methods,
            k: 2,
            j: Some(3),
            j_range: None,
            t_grid: None,
            seeds,
            out_dir: None,
        }
    }

    #[test]
    fn config_validation_catches_mistakes() {
        let mut cfg = tiny_config(vec!["nclm".into()], vec![1]);
        assert!(cfg.validate().is_ok());
        cfg.schema_version = 99;
        assert!(cfg.validate().is_err());
        cfg.schema_version = SCHEMA_VERSION;
        cfg.methods = vec!["quantum".into()];
        assert!(cfg.validate().is_err());
        cfg.methods = vec!["nclm".into()];
        cfg.j = None;
        assert!(cfg.validate().is_err());
        cfg.j_range = Some((2, 5));
        assert!(cfg.validate().is_ok());
        cfg.seeds = vec![];
        assert!(cfg.validate().is_err());
        cfg.seeds = vec![1];
        cfg.k = 1; // two groups need k >= 2
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn config_round_trips_through_toml_and_json() {
        let cfg = tiny_config(vec!["nclm".into(), "cl-usvt".into()], vec![1, 2]);
        let toml_text = toml::to_string(&cfg).unwrap();
        let back: ExperimentConfig = toml::from_str(&toml_text).unwrap();
        assert_eq!(back, cfg);
        let json_text = serde_json::to_string(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&json_text).unwrap();
        assert_eq!(back, cfg);

        let dir = tempfile::tempdir().unwrap();
        let toml_path = dir.path().join("cfg.toml");
        std::fs::write(&toml_path, &toml_text).unwrap();
        assert_eq!(load_config(&toml_path).unwrap(), cfg);
        let json_path = dir.path().join("cfg.json");
        std::fs::write(&json_path, &json_text).unwrap();
        assert_eq!(load_config(&json_path).unwrap(), cfg);
    }

    #[test]
    fn method_aliases_resolve() {
        assert_eq!("cl-usvt".parse::<MethodName>().unwrap(), MethodName::NcgeUsvt);
        assert_eq!("ncge-nbs".parse::<MethodName>().unwrap(), MethodName::NcgeNbs);
        assert_eq!("cl-naive".parse::<MethodName>().unwrap(), MethodName::NcgeNaive);
        assert!("cl-nclm".parse::<MethodName>().is_err());
    }

    #[test]
    fn blockmodel_pair_generation_is_deterministic() {
        let cfg = tiny_config(vec![], vec![7]);
        let (g1, t1) = cfg.model.generate(7).unwrap();
        let (g2, t2) = cfg.model.generate(7).unwrap();
        assert_eq!(t1, vec![1, 1, 1, 1, 2, 2, 2, 2]);
        assert_eq!(t1, t2);
        for (a, b) in g1.iter().zip(&g2) {
            assert_eq!(a.edges(), b.edges());
        }
        let (g3, _) = cfg.model.generate(8).unwrap();
        assert!(g1.iter().zip(&g3).any(|(a, b)| a.edges() != b.edges()));
    }

    #[test]
    fn density_calibration_hits_target_degree() {
        let model = ModelConfig::BlockmodelPair {
            p: 0.3,
            q: 0.05,
            blocks: 2,
            eps: 0.0,
            n: 150,
            counts: vec![10, 10],
            rho: None,
            target_avg_degree: Some(22.0),
        };
        let (graphs, _) = model.generate(3).unwrap();
        let mean_degree: f64 = graphs
            .iter()
            .map(|g| 2.0 * g.edge_count() as f64 / g.n() as f64)
            .sum::<f64>()
            / graphs.len() as f64;
        assert!(
            (mean_degree - 22.0).abs() < 2.0,
            "mean degree {mean_degree}"
        );
    }

    #[test]
    fn theta_suite_shape() {
        let model = ModelConfig::ThetaSuite {
            graphs_per_cell: 2,
            sizes: vec![30, 50],
        };
        let (graphs, truth) = model.generate(1).unwrap();
        assert_eq!(graphs.len(), 16); // 4 settings x 2 sizes x 2
        assert_eq!(truth[..4], [1, 1, 1, 1]);
        assert_eq!(truth[12..], [4, 4, 4, 4]);
        let sizes: Vec<usize> = graphs.iter().map(|g| g.n()).collect();
        assert_eq!(&sizes[..4], &[30, 30, 50, 50]);
    }

    #[test]
    fn scenario_records_failures_without_aborting() {
        // Mixed sizes: correspondence methods must fail per-cell while the
        // moment method still produces labels.
        let cfg = ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            scenario: "mixed".into(),
            model: ModelConfig::Corpus {
                groups: vec![
                    CorpusGroup {
                        model: GraphonSpec::ErdosRenyi { p: 0.6, rho: 1.0 },
                        sizes: vec![30, 40, 35],
                    },
                    CorpusGroup {
                        model: GraphonSpec::ErdosRenyi { p: 0.08, rho: 1.0 },
                        sizes: vec![45, 30, 38],
                    },
                ],
            },
            methods: vec!["ncge-usvt".into(), "nclm".into()],
            k: 2,
            j: Some(2),
            j_range: None,
            t_grid: None,
            seeds: vec![5],
            out_dir: None,
        };
        let report = run_scenario(&cfg).unwrap();
        assert_eq!(report.cells.len(), 2);
        let usvt = &report.cells[0];
        assert!(usvt.failure.as_deref().unwrap().contains("node correspondence required"));
        assert!(usvt.error.is_none());
        let nclm = &report.cells[1];
        assert_eq!(nclm.error, Some(0.0));
        assert_eq!(nclm.labels.len(), 6);
        // Summary reflects one failed and one clean method.
        assert_eq!(report.summary[0].seeds_failed, 1);
        assert_eq!(report.summary[1].seeds_ok, 1);
    }

    #[test]
    fn empty_method_list_reports_generation_only() {
        let cfg = tiny_config(vec![], vec![1, 2]);
        let report = run_scenario(&cfg).unwrap();
        assert!(report.cells.is_empty());
        assert!(report.summary.is_empty());
        assert_eq!(report.generation.t, 8);
        assert_eq!(report.generation.sizes, vec![40; 8]);
        assert!(report.generation.mean_edges > 0.0);
    }

    fn strip_seconds(v: &mut serde_json::Value) {
        match v {
            serde_json::Value::Object(map) => {
                let keys: Vec<String> = map
                    .keys()
                    .filter(|k| k.contains("seconds"))
                    .cloned()
                    .collect();
                for k in keys {
                    map.remove(&k);
                }
                for v in map.values_mut() {
                    strip_seconds(v);
                }
            }
            serde_json::Value::Array(items) => {
                for v in items {
                    strip_seconds(v);
                }
            }
            _ => {}
        }
    }

    #[test]
    fn scenario_reports_reproduce_excluding_timings() {
        let cfg = tiny_config(vec!["nclm".into(), "ncge-naive".into()], vec![1, 2]);
        let a = run_scenario(&cfg).unwrap();
        let b = run_scenario(&cfg).unwrap();
        let mut va = serde_json::to_value(&a).unwrap();
        let mut vb = serde_json::to_value(&b).unwrap();
        strip_seconds(&mut va);
        strip_seconds(&mut vb);
        assert_eq!(va, vb);
    }

    #[test]
    fn scenario_outputs_land_on_disk() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_config(vec!["nclm".into()], vec![1]);
        cfg.out_dir = Some(dir.path().join("run"));
        let report = run_scenario(&cfg).unwrap();
        let loaded = load_report(dir.path().join("run/report.json")).unwrap();
        assert_eq!(loaded, report);
        let errors = std::fs::read_to_string(dir.path().join("run/errors.csv")).unwrap();
        assert!(errors.starts_with("scenario,method,seed,error,failure"));
        assert!(errors.contains("tiny,nclm,1,"));
        let gaps = std::fs::read_to_string(dir.path().join("run/gaps.csv")).unwrap();
        assert!(gaps.starts_with("scenario,method,seed,parameter,value,gap"));
        assert!(gaps.lines().count() > 2); // header + a tuning curve
    }

    #[test]
    fn comparison_merges_sorts_and_renders() {
        let cfg = tiny_config(
            vec!["nclm".into(), "ncge-naive".into(), "ncge-usvt".into()],
            vec![1, 2, 3],
        );
        let report = run_scenario(&cfg).unwrap();
        let table = compare_report(std::slice::from_ref(&report)).unwrap();
        assert_eq!(table.rows.len(), 3);
        for pair in table.rows.windows(2) {
            let a = pair[0].mean_error.unwrap_or(f64::INFINITY);
            let b = pair[1].mean_error.unwrap_or(f64::INFINITY);
            assert!(a <= b);
        }
        let text = table.to_text();
        assert!(text.starts_with("scenario: tiny"));
        assert!(text.contains("method"));
        let csv = table.to_csv();
        assert_eq!(csv.lines().count(), 4);

        // A failing-only method renders as dashes.
        let mut failing = report.clone();
        for cell in &mut failing.cells {
            if cell.method == "nclm" {
                cell.error = None;
                cell.failure = Some("synthetic failure".into());
            }
        }
        failing.summary = Vec::new();
        let table = compare_report(&[failing]).unwrap();
        let row = table.rows.iter().find(|r| r.method == "nclm").unwrap();
        assert!(row.mean_error.is_none());
        assert!(table.to_text().contains("—"));
        assert_eq!(table.rows.last().unwrap().method, "nclm");

        // Mismatched scenario ids refuse to merge.
        let mut other = report.clone();
        other.scenario = "different".into();
        assert!(compare_report(&[report, other]).is_err());
    }

    #[test]
    fn corpus_validation() {
        let empty = ModelConfig::Corpus { groups: vec![] };
        assert!(empty.validate().is_err());
        let bad_model = ModelConfig::Corpus {
            groups: vec![CorpusGroup {
                model: GraphonSpec::ErdosRenyi { p: 1.4, rho: 1.0 },
                sizes: vec![10],
            }],
        };
        assert!(bad_model.validate().is_err());
    }
}
