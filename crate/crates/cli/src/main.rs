//! `netclust` — cluster collections of networks from the command line.
//!
//! A thin shell over the library: every subcommand is a direct composition
//! of library calls, so CLI output matches what the corresponding library
//! functions return. Exit codes: 0 ok, 2 config/input problem, 3 violated
//! precondition (e.g. node correspondence), 4 numeric failure.

#![forbid(unsafe_code)]

use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use netclust_core::baselines::{graph_stats_features, topeig_features};
use netclust_core::eval::{
    clustering_error, compare_report, load_config, load_report, run_scenario, MethodName,
};
use netclust_core::graphon_est::{load_lpm, save_lpm_binary, Estimator, LinkProbMatrix};
use netclust_core::graphs::{
    load_edge_list, load_manifest, save_edge_list, save_manifest, Graph, ManifestEntry,
};
use netclust_core::ncge::{
    frobenius_distance_matrix, save_assignment_csv, save_distance_csv,
    spectral_cluster_distance_with, ClusterAssignment,
};
use netclust_core::nclm::{
    default_t_grid, feature_distance_matrix, kernel_from_distance, load_features_csv,
    log_moment_features, save_features_csv, spectral_cluster_kernel, tune_j, tune_t,
    FeatureVector, KernelMatrix, LOG_MOMENT_FLOOR,
};
use netclust_core::{Error, ErrorClass, Result};

#[derive(Parser)]
#[command(
    name = "netclust",
    version,
    about = "Cluster collections of networks: graphon-estimate distances or log moment features"
)]
struct Cli {
    /// Worker threads for per-graph stages (default: all cores). Output is
    /// identical for any thread count.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic collection: edge lists, manifest, truth labels.
    Simulate {
        /// Scenario config (TOML or JSON).
        #[arg(long)]
        config: PathBuf,
        /// Output directory; one `seed-<s>/` subdirectory per config seed.
        #[arg(long)]
        out: PathBuf,
    },
    /// Cluster the graphs listed in a manifest.
    Cluster {
        /// CSV manifest (`path,label`); paths resolve relative to it.
        #[arg(long)]
        manifest: PathBuf,
        /// ncge-usvt | ncge-nbs | ncge-naive | nclm | topeig | graphstats
        /// (cl-usvt/cl-nbs/cl-naive are accepted aliases).
        #[arg(long)]
        method: String,
        /// Number of clusters.
        #[arg(short, long)]
        k: usize,
        /// Moment order (nclm) or eigenvalue count (topeig).
        #[arg(long = "J", alias = "j")]
        j: Option<usize>,
        /// Kernel bandwidth grid, comma-separated; default is data-driven.
        #[arg(long = "t-grid", value_delimiter = ',')]
        t_grid: Option<Vec<f64>>,
        /// Seed for the k-means stage; fully determines output bytes.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Row-normalize the spectral embedding (correspondence methods).
        #[arg(long)]
        normalize_rows: bool,
        /// Embedding dimension for kernel clustering (default: k).
        #[arg(long)]
        embed_dim: Option<usize>,
        /// Output directory (default: current directory).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Cache directory for per-graph features/estimates
        /// (default: $NETCLUST_CACHE_DIR, else ~/.cache/netclust).
        #[arg(long, conflicts_with = "no_cache")]
        cache: Option<PathBuf>,
        /// Recompute everything; do not read or write the cache.
        #[arg(long)]
        no_cache: bool,
    },
    /// Pick the moment order and kernel bandwidth by the relative eigengap.
    Tune {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(short, long)]
        k: usize,
        /// Largest moment order to try.
        #[arg(long = "J-max", default_value_t = 8)]
        j_max: usize,
        /// Smallest moment order to try.
        #[arg(long = "J-min", default_value_t = 2)]
        j_min: usize,
        #[arg(long = "t-grid", value_delimiter = ',')]
        t_grid: Option<Vec<f64>>,
        /// Output directory for gaps.csv (default: current directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Merge scenario run directories into one comparison table.
    Report {
        /// Directories containing a `report.json`.
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        /// Where to write the CSV rendering (default: comparison.csv).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a scenario config end to end and write its report.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Report directory; overrides the config's `out_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        // Ignore failure: the global pool can only be set once (tests).
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global();
    }
    match dispatch(cli.command) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e.class() {
                ErrorClass::Input => 2,
                ErrorClass::Precondition => 3,
                ErrorClass::Numeric => 4,
            };
            std::process::exit(code);
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Simulate { config, out } => cmd_simulate(&config, &out),
        Command::Cluster {
            manifest,
            method,
            k,
            j,
            t_grid,
            seed,
            normalize_rows,
            embed_dim,
            out,
            cache,
            no_cache,
        } => cmd_cluster(ClusterArgs {
            manifest,
            method,
            k,
            j,
            t_grid,
            seed,
            normalize_rows,
            embed_dim,
            out: out.unwrap_or_else(|| PathBuf::from(".")),
            cache: Cache::resolve(cache, no_cache),
        }),
        Command::Tune {
            manifest,
            k,
            j_max,
            j_min,
            t_grid,
            out,
        } => cmd_tune(
            &manifest,
            k,
            (j_min, j_max),
            t_grid.as_deref(),
            &out.unwrap_or_else(|| PathBuf::from(".")),
        ),
        Command::Report { dirs, out } => cmd_report(
            &dirs,
            &out.unwrap_or_else(|| PathBuf::from("comparison.csv")),
        ),
        Command::Run { config, out } => cmd_run(&config, out),
    }
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

fn cmd_simulate(config: &Path, out: &Path) -> Result<()> {
    let cfg = load_config(config)?;
    for &seed in &cfg.seeds {
        let (graphs, truth) = cfg.model.generate(seed)?;
        let dir = out.join(format!("seed-{seed}"));
        let gdir = dir.join("graphs");
        std::fs::create_dir_all(&gdir).map_err(|source| Error::Io {
            path: gdir.clone(),
            source,
        })?;
        let mut entries = Vec::with_capacity(graphs.len());
        for (i, (g, &label)) in graphs.iter().zip(&truth).enumerate() {
            let rel = PathBuf::from(format!("graphs/g{i:04}.edges"));
            save_edge_list(g, dir.join(&rel))?;
            entries.push(ManifestEntry {
                path: rel,
                label: Some(label),
            });
        }
        save_manifest(&entries, dir.join("manifest.csv"))?;
        println!(
            "seed {seed}: {} graphs -> {}",
            graphs.len(),
            dir.display()
        );
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// cluster
// ---------------------------------------------------------------------------

struct ClusterArgs {
    manifest: PathBuf,
    method: String,
    k: usize,
    j: Option<usize>,
    t_grid: Option<Vec<f64>>,
    seed: u64,
    normalize_rows: bool,
    embed_dim: Option<usize>,
    out: PathBuf,
    cache: Cache,
}

/// A loaded manifest: parsed graphs, the raw file bytes (for cache keys),
/// display ids, and truth labels when every row has one.
struct Collection {
    graphs: Vec<Graph>,
    raw: Vec<Vec<u8>>,
    ids: Vec<String>,
    truth: Option<Vec<usize>>,
}

fn load_collection(manifest: &Path) -> Result<Collection> {
    let entries = load_manifest(manifest)?;
    let base = manifest.parent().unwrap_or_else(|| Path::new("."));
    let mut graphs = Vec::with_capacity(entries.len());
    let mut raw = Vec::with_capacity(entries.len());
    for e in &entries {
        let path = if e.path.is_absolute() {
            e.path.clone()
        } else {
            base.join(&e.path)
        };
        raw.push(std::fs::read(&path).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        })?);
        graphs.push(load_edge_list(&path)?.graph);
    }
    Ok(Collection {
        graphs,
        raw,
        ids: entries
            .iter()
            .map(|e| e.path.to_string_lossy().into_owned())
            .collect(),
        truth: entries.iter().map(|e| e.label).collect(),
    })
}

fn cmd_cluster(args: ClusterArgs) -> Result<()> {
    let col = load_collection(&args.manifest)?;
    let method: MethodName = args.method.parse()?;
    std::fs::create_dir_all(&args.out).map_err(|source| Error::Io {
        path: args.out.clone(),
        source,
    })?;

    let mut written = vec!["labels.csv", "distances.csv"];
    let assignment = match method {
        MethodName::NcgeUsvt | MethodName::NcgeNbs | MethodName::NcgeNaive => {
            let estimator = match method {
                MethodName::NcgeUsvt => Estimator::usvt(),
                MethodName::NcgeNbs => Estimator::nbs(),
                _ => Estimator::Naive,
            };
            let estimates = estimate_all(&col, estimator, &args.cache)?;
            let d = frobenius_distance_matrix(&estimates)?;
            save_distance_csv(&d, &col.ids, args.out.join("distances.csv"))?;
            let mut a =
                spectral_cluster_distance_with(&d, args.k, args.seed, args.normalize_rows)?;
            a.method = method.as_str().to_string();
            a
        }
        MethodName::Nclm | MethodName::TopEig | MethodName::GraphStats => {
            let features = featurize_all(&col, method, args.j, &args.cache)?;
            save_features_csv(&features, &col.ids, args.out.join("features.csv"))?;
            let d = feature_distance_matrix(&features)?;
            save_distance_csv(&d, &col.ids, args.out.join("distances.csv"))?;
            let grid = match &args.t_grid {
                Some(g) => g.clone(),
                None => default_t_grid(&d),
            };
            let report = tune_t(&d, args.k, &grid)?;
            write_gap_curve(&report.gaps, args.out.join("gaps.csv"))?;
            let kernel = kernel_from_distance(&d, report.t_star)?;
            write_kernel_csv(&kernel, &col.ids, args.out.join("kernel.csv"))?;
            let mut a = spectral_cluster_kernel(&kernel, args.k, args.embed_dim, args.seed)?;
            a.method = method.as_str().to_string();
            written.extend(["features.csv", "gaps.csv", "kernel.csv"]);
            println!(
                "bandwidth t* = {} (relative eigengap {:.6})",
                report.t_star, report.gap
            );
            a
        }
    };

    save_assignment_csv(&assignment, &col.ids, args.out.join("labels.csv"))?;
    println!("{} -> {}", written.join(", "), args.out.display());
    print_truth_error(&assignment, col.truth.as_deref());
    Ok(())
}

/// Prints the clustering error against manifest labels when they exist and
/// are usable as 1..=k classes; degrades to a warning otherwise.
fn print_truth_error(assignment: &ClusterAssignment, truth: Option<&[usize]>) {
    if let Some(truth) = truth {
        match clustering_error(&assignment.labels, truth, assignment.k) {
            Ok(err) => println!("clustering error vs manifest labels: {err}"),
            Err(e) => eprintln!("warning: cannot score against manifest labels: {e}"),
        }
    }
}

fn estimate_all(
    col: &Collection,
    estimator: Estimator,
    cache: &Cache,
) -> Result<Vec<LinkProbMatrix>> {
    let tag = match estimator {
        Estimator::Usvt { eta } => format!("lpm:usvt:eta={eta}"),
        Estimator::Nbs { c0 } => format!("lpm:nbs:c0={c0}"),
        Estimator::Naive => "lpm:naive".to_string(),
    };
    col.graphs
        .par_iter()
        .zip(&col.raw)
        .enumerate()
        .map(|(i, (g, raw))| {
            let slot = cache.slot(raw, &tag, "lpm");
            if let Some(path) = &slot {
                if let Ok(p) = load_lpm(path) {
                    return Ok(p);
                }
            }
            let p = estimator.estimate(g)?;
            if let Some(path) = &slot {
                cache.store(path, i, |tmp| save_lpm_binary(&p, tmp));
            }
            Ok(p)
        })
        .collect()
}

fn featurize_all(
    col: &Collection,
    method: MethodName,
    j: Option<usize>,
    cache: &Cache,
) -> Result<Vec<FeatureVector>> {
    let need_j = || {
        j.ok_or_else(|| {
            Error::Config(format!(
                "method {method} needs --J (moment order / eigenvalue count)"
            ))
        })
    };
    let tag = match method {
        MethodName::Nclm => format!("feat:nclm:j={}:floor={:e}", need_j()?, LOG_MOMENT_FLOOR),
        MethodName::TopEig => format!("feat:topeig:j={}", need_j()?),
        MethodName::GraphStats => "feat:graphstats".to_string(),
        _ => unreachable!("correspondence methods use estimate_all"),
    };
    col.graphs
        .par_iter()
        .zip(&col.raw)
        .enumerate()
        .map(|(i, (g, raw))| {
            let slot = cache.slot(raw, &tag, "features.csv");
            if let Some(path) = &slot {
                if let Ok((mut v, _)) = load_features_csv(path) {
                    if v.len() == 1 && v[0].method == method_feature_kind(method) {
                        return Ok(v.remove(0));
                    }
                }
            }
            let fv = match method {
                MethodName::Nclm => log_moment_features(g, j.expect("checked"), LOG_MOMENT_FLOOR)?,
                MethodName::TopEig => topeig_features(g, j.expect("checked"))?,
                MethodName::GraphStats => {
                    let fv = graph_stats_features(g);
                    for w in &fv.warnings {
                        eprintln!("warning: graph {}: {w}", col.ids[i]);
                    }
                    fv
                }
                _ => unreachable!(),
            };
            if let Some(path) = &slot {
                cache.store(path, i, |tmp| {
                    save_features_csv(
                        std::slice::from_ref(&fv),
                        &[col.ids[i].clone()],
                        tmp,
                    )
                });
            }
            Ok(fv)
        })
        .collect()
}

fn method_feature_kind(method: MethodName) -> netclust_core::nclm::FeatureMethod {
    match method {
        MethodName::Nclm => netclust_core::nclm::FeatureMethod::Nclm,
        MethodName::TopEig => netclust_core::nclm::FeatureMethod::TopEig,
        MethodName::GraphStats => netclust_core::nclm::FeatureMethod::GraphStats,
        _ => unreachable!(),
    }
}

fn write_gap_curve(gaps: &[(f64, f64)], path: PathBuf) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.clone(),
        source,
    };
    let mut w = std::io::BufWriter::new(std::fs::File::create(&path).map_err(io_err)?);
    writeln!(w, "t,gap").map_err(io_err)?;
    for &(t, gap) in gaps {
        writeln!(w, "{t},{gap}").map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

fn write_kernel_csv(kernel: &KernelMatrix, ids: &[String], path: PathBuf) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.clone(),
        source,
    };
    let mut w = std::io::BufWriter::new(std::fs::File::create(&path).map_err(io_err)?);
    writeln!(w, "{}", ids.join(",")).map_err(io_err)?;
    let t = kernel.t();
    for i in 0..t {
        let row: Vec<String> = (0..t).map(|j| format!("{}", kernel.get(i, j))).collect();
        writeln!(w, "{}", row.join(",")).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

// ---------------------------------------------------------------------------
// tune
// ---------------------------------------------------------------------------

fn cmd_tune(
    manifest: &Path,
    k: usize,
    j_range: (usize, usize),
    t_grid: Option<&[f64]>,
    out: &Path,
) -> Result<()> {
    let col = load_collection(manifest)?;
    // Mirror the bandwidth tuner's requirement up front so an undersized
    // collection reads as an input problem, not a mid-pipeline failure.
    if col.graphs.len() < k + 1 {
        return Err(Error::InvalidParam(format!(
            "K+1 <= T required: eigengap tuning needs at least {} graphs for K = {k}, got {}",
            k + 1,
            col.graphs.len()
        )));
    }
    let report = tune_j(&col.graphs, k, j_range, t_grid)?;
    println!("{:>4}  {:>12}  {:>12}", "J", "t*", "gap");
    for d in &report.per_j {
        println!("{:>4}  {:>12.6}  {:>12.6}", d.j, d.t_star, d.gap);
    }
    println!(
        "chosen J* = {}, t* = {}, gap = {:.6}",
        report.j_star, report.t_star, report.gap
    );

    std::fs::create_dir_all(out).map_err(|source| Error::Io {
        path: out.to_path_buf(),
        source,
    })?;
    let path = out.join("gaps.csv");
    let io_err = |source| Error::Io {
        path: path.clone(),
        source,
    };
    let mut w = std::io::BufWriter::new(std::fs::File::create(&path).map_err(io_err)?);
    writeln!(w, "J,t_star,gap").map_err(io_err)?;
    for d in &report.per_j {
        writeln!(w, "{},{},{}", d.j, d.t_star, d.gap).map_err(io_err)?;
    }
    w.flush().map_err(io_err)?;
    println!("gaps.csv -> {}", out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// report / run
// ---------------------------------------------------------------------------

fn cmd_report(dirs: &[PathBuf], out: &Path) -> Result<()> {
    let reports = dirs
        .iter()
        .map(|d| load_report(d.join("report.json")))
        .collect::<Result<Vec<_>>>()?;
    let table = compare_report(&reports)?;
    print!("{}", table.to_text());
    std::fs::write(out, table.to_csv()).map_err(|source| Error::Io {
        path: out.to_path_buf(),
        source,
    })?;
    println!("comparison -> {}", out.display());
    Ok(())
}

fn cmd_run(config: &Path, out: Option<PathBuf>) -> Result<()> {
    let mut cfg = load_config(config)?;
    if out.is_some() {
        cfg.out_dir = out;
    }
    let report = run_scenario(&cfg)?;
    let table = compare_report(std::slice::from_ref(&report))?;
    print!("{}", table.to_text());
    match &cfg.out_dir {
        Some(dir) => println!("report -> {}", dir.display()),
        None => println!("(no out_dir configured; report not written)"),
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// cache
// ---------------------------------------------------------------------------

/// Content-addressed cache of per-graph artifacts. The key hashes the raw
/// graph file bytes together with the method+parameter tag, so any change
/// to either recomputes. Disabled when no directory can be resolved.
struct Cache {
    dir: Option<PathBuf>,
}

impl Cache {
    fn resolve(flag: Option<PathBuf>, disabled: bool) -> Cache {
        if disabled {
            return Cache { dir: None };
        }
        let dir = flag
            .or_else(|| std::env::var_os("NETCLUST_CACHE_DIR").map(PathBuf::from))
            .or_else(|| {
                std::env::var_os("XDG_CACHE_HOME").map(|h| PathBuf::from(h).join("netclust"))
            })
            .or_else(|| {
                std::env::var_os("HOME").map(|h| PathBuf::from(h).join(".cache/netclust"))
            });
        Cache { dir }
    }

    /// Cache path for this artifact, creating the directory lazily.
    fn slot(&self, raw: &[u8], tag: &str, ext: &str) -> Option<PathBuf> {
        let dir = self.dir.as_ref()?;
        if std::fs::create_dir_all(dir).is_err() {
            return None;
        }
        let mut h = Sha256::new();
        h.update(raw);
        h.update([0]);
        h.update(tag.as_bytes());
        Some(dir.join(format!("{:x}.{ext}", h.finalize())))
    }

    /// Best-effort write-then-rename; cache misses must never fail a run.
    fn store(&self, path: &Path, uniq: usize, write: impl FnOnce(&Path) -> Result<()>) {
        let tmp = path.with_extension(format!("tmp{uniq}"));
        if write(&tmp).is_ok() {
            let _ = std::fs::rename(&tmp, path);
        } else {
            let _ = std::fs::remove_file(&tmp);
        }
    }
}
