//! End-to-end tests of the `netclust` binary.
//!
//! The CLI is contractually a thin shell, so most tests run a command and
//! the equivalent library calls, then require identical labels, distances,
//! and printed error values.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use netclust_core::eval::clustering_error;
use netclust_core::graphon_est::Estimator;
use netclust_core::graphs::{
    load_manifest, sample_graphon, save_edge_list, save_manifest, Graph, Graphon, ManifestEntry,
};
use netclust_core::ncge::ncge_pipeline;
use netclust_core::nclm::nclm_pipeline;

fn netclust(dir: &Path) -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_netclust"));
    cmd.current_dir(dir);
    // Hermetic default cache: never touch the user's real cache location.
    cmd.env("NETCLUST_CACHE_DIR", dir.join("cache-env"));
    cmd
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("spawn netclust");
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

/// Writes a two-group collection of `per_group` Erdos-Renyi graphs per
/// density, all on `n` nodes, plus a labeled manifest. Returns the manifest
/// path and the graphs in manifest order.
fn write_collection(
    dir: &Path,
    n: usize,
    per_group: usize,
    densities: (f64, f64),
    seed: u64,
) -> (PathBuf, Vec<Graph>) {
    let gdir = dir.join("graphs");
    std::fs::create_dir_all(&gdir).unwrap();
    let mut entries = Vec::new();
    let mut graphs = Vec::new();
    for (group, &p) in [densities.0, densities.1].iter().enumerate() {
        let model = Graphon::erdos_renyi(p, 1.0).unwrap();
        for i in 0..per_group {
            let g = sample_graphon(&model, n, seed + (group * per_group + i) as u64);
            let rel = PathBuf::from(format!("graphs/g{group}{i:02}.edges"));
            save_edge_list(&g, dir.join(&rel)).unwrap();
            entries.push(ManifestEntry {
                path: rel,
                label: Some(group + 1),
            });
            graphs.push(g);
        }
    }
    let manifest = dir.join("manifest.csv");
    save_manifest(&entries, &manifest).unwrap();
    (manifest, graphs)
}

fn read_labels(path: &Path) -> Vec<usize> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("graph_id,label"));
    lines
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect()
}

const SCENARIO_TOML: &str = r#"
schema_version = 1
scenario = "cli-test"
k = 2
seeds = [1, 2]
methods = ["nclm", "ncge-naive"]
j = 3

[model]
kind = "blockmodel-pair"
p = 0.6
q = 0.1
blocks = 2
eps = 0.5
n = 30
counts = [3, 3]
rho = 0.5
"#;

#[test]
fn simulate_writes_per_seed_collections_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("cfg.toml"), SCENARIO_TOML).unwrap();
    run_ok(netclust(dir.path()).args(["simulate", "--config", "cfg.toml", "--out", "sim"]));

    for seed in [1, 2] {
        let seed_dir = dir.path().join(format!("sim/seed-{seed}"));
        let entries = load_manifest(seed_dir.join("manifest.csv")).unwrap();
        assert_eq!(entries.len(), 6);
        let labels: Vec<usize> = entries.iter().map(|e| e.label.unwrap()).collect();
        assert_eq!(labels, [1, 1, 1, 2, 2, 2]);
        for e in &entries {
            assert!(seed_dir.join(&e.path).is_file());
        }
    }

    // Same config, second run elsewhere: identical bytes per graph file.
    run_ok(netclust(dir.path()).args(["simulate", "--config", "cfg.toml", "--out", "sim2"]));
    let a = std::fs::read(dir.path().join("sim/seed-1/graphs/g0000.edges")).unwrap();
    let b = std::fs::read(dir.path().join("sim2/seed-1/graphs/g0000.edges")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn cluster_nclm_matches_library_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, graphs) = write_collection(dir.path(), 40, 4, (0.55, 0.15), 900);

    let out = run_ok(netclust(dir.path()).args([
        "cluster",
        "--manifest",
        manifest.to_str().unwrap(),
        "--method",
        "nclm",
        "-k",
        "2",
        "--J",
        "3",
        "--seed",
        "7",
        "--out",
        "run",
        "--no-cache",
    ]));

    let lib = nclm_pipeline(&graphs, 3, 2, None, 7).unwrap();
    let cli_labels = read_labels(&dir.path().join("run/labels.csv"));
    assert_eq!(cli_labels, lib.assignment.labels);

    // Printed error equals the library metric against manifest labels.
    let truth = vec![1, 1, 1, 1, 2, 2, 2, 2];
    let expected = clustering_error(&lib.assignment.labels, &truth, 2).unwrap();
    let stdout = stdout_of(&out);
    assert!(
        stdout.contains(&format!("clustering error vs manifest labels: {expected}")),
        "stdout: {stdout}"
    );
    // Printed bandwidth is the tuned one.
    assert!(stdout.contains(&format!("bandwidth t* = {}", lib.tuning.t_star)));

    // Distance matrix round-trips through the CSV identically.
    let (d, _) = netclust_core::ncge::load_distance_csv(dir.path().join("run/distances.csv"))
        .unwrap();
    for i in 0..graphs.len() {
        for j in 0..graphs.len() {
            assert_eq!(d.get(i, j), lib.distances.get(i, j));
        }
    }
}

#[test]
fn cluster_ncge_matches_library_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, graphs) = write_collection(dir.path(), 30, 3, (0.6, 0.2), 1200);

    run_ok(netclust(dir.path()).args([
        "cluster",
        "--manifest",
        manifest.to_str().unwrap(),
        "--method",
        "ncge-usvt",
        "-k",
        "2",
        "--seed",
        "3",
        "--out",
        "run",
        "--no-cache",
    ]));

    let lib = ncge_pipeline(&graphs, Estimator::usvt(), 2, 3).unwrap();
    let cli_labels = read_labels(&dir.path().join("run/labels.csv"));
    assert_eq!(cli_labels, lib.assignment.labels);
}

#[test]
fn cluster_without_correspondence_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let gdir = dir.path().join("graphs");
    std::fs::create_dir_all(&gdir).unwrap();
    let mut entries = Vec::new();
    for (i, n) in [20usize, 25].into_iter().enumerate() {
        let g = sample_graphon(&Graphon::erdos_renyi(0.4, 1.0).unwrap(), n, i as u64);
        let rel = PathBuf::from(format!("graphs/m{i}.edges"));
        save_edge_list(&g, dir.path().join(&rel)).unwrap();
        entries.push(ManifestEntry {
            path: rel,
            label: None,
        });
    }
    let manifest = dir.path().join("mixed.csv");
    save_manifest(&entries, &manifest).unwrap();

    let out = netclust(dir.path())
        .args([
            "cluster",
            "--manifest",
            manifest.to_str().unwrap(),
            "--method",
            "ncge-nbs",
            "-k",
            "2",
            "--no-cache",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("node correspondence required"),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn topeig_writes_j_feature_columns() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, _) = write_collection(dir.path(), 25, 3, (0.5, 0.2), 40);
    run_ok(netclust(dir.path()).args([
        "cluster",
        "--manifest",
        manifest.to_str().unwrap(),
        "--method",
        "topeig",
        "-k",
        "2",
        "--J",
        "5",
        "--out",
        "run",
        "--no-cache",
    ]));
    let features = std::fs::read_to_string(dir.path().join("run/features.csv")).unwrap();
    let header = features.lines().next().unwrap();
    assert_eq!(header, "graph_id,method,J,v1,v2,v3,v4,v5");
    assert_eq!(features.lines().count(), 7); // header + 6 graphs
}

#[test]
fn missing_j_for_moment_methods_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, _) = write_collection(dir.path(), 20, 2, (0.5, 0.2), 77);
    let out = netclust(dir.path())
        .args([
            "cluster",
            "--manifest",
            manifest.to_str().unwrap(),
            "--method",
            "nclm",
            "-k",
            "2",
            "--no-cache",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--J"));
}

#[test]
fn tune_prints_gap_table_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, graphs) = write_collection(dir.path(), 35, 4, (0.5, 0.12), 500);

    let out = run_ok(netclust(dir.path()).args([
        "tune",
        "--manifest",
        manifest.to_str().unwrap(),
        "-k",
        "2",
        "--J-max",
        "5",
        "--out",
        "tuned",
    ]));
    let lib = netclust_core::nclm::tune_j(&graphs, 2, (2, 5), None).unwrap();
    let stdout = stdout_of(&out);
    assert!(
        stdout.contains(&format!("chosen J* = {}, t* = {}", lib.j_star, lib.t_star)),
        "stdout: {stdout}"
    );

    let gaps = std::fs::read_to_string(dir.path().join("tuned/gaps.csv")).unwrap();
    let mut lines = gaps.lines();
    assert_eq!(lines.next(), Some("J,t_star,gap"));
    assert_eq!(lines.count(), 4); // J = 2..=5
}

#[test]
fn tune_with_too_few_graphs_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let g = sample_graphon(&Graphon::erdos_renyi(0.3, 1.0).unwrap(), 20, 0);
    save_edge_list(&g, dir.path().join("one.edges")).unwrap();
    save_manifest(
        &[ManifestEntry {
            path: PathBuf::from("one.edges"),
            label: None,
        }],
        dir.path().join("m.csv"),
    )
    .unwrap();

    let out = netclust(dir.path())
        .args(["tune", "--manifest", "m.csv", "-k", "2"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("K+1 <= T required"));
}

#[test]
fn run_and_report_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("cfg.toml"), SCENARIO_TOML).unwrap();
    let out = run_ok(netclust(dir.path()).args([
        "run",
        "--config",
        "cfg.toml",
        "--out",
        "run-dir",
    ]));
    let stdout = stdout_of(&out);
    assert!(stdout.contains("scenario: cli-test"));
    assert!(stdout.contains("nclm"));
    assert!(dir.path().join("run-dir/report.json").is_file());
    assert!(dir.path().join("run-dir/errors.csv").is_file());
    assert!(dir.path().join("run-dir/gaps.csv").is_file());

    let out = run_ok(netclust(dir.path()).args(["report", "run-dir", "--out", "cmp.csv"]));
    let stdout = stdout_of(&out);
    assert!(stdout.contains("scenario: cli-test"));
    assert!(stdout.contains("ncge-naive"));
    let cmp = std::fs::read_to_string(dir.path().join("cmp.csv")).unwrap();
    assert!(cmp.starts_with("scenario,method,cells,mean_error,std_error,mean_seconds"));
    assert_eq!(cmp.lines().count(), 3);

    // Corrupt report: input error.
    std::fs::write(dir.path().join("run-dir/report.json"), "{ not json").unwrap();
    let out = netclust(dir.path())
        .args(["report", "run-dir"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn cache_reuses_artifacts_and_preserves_output() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, _) = write_collection(dir.path(), 30, 3, (0.5, 0.15), 321);
    let args = |out: &str| {
        [
            "cluster".to_string(),
            "--manifest".into(),
            manifest.to_str().unwrap().into(),
            "--method".into(),
            "nclm".into(),
            "-k".into(),
            "2".into(),
            "--J".into(),
            "4".into(),
            "--seed".into(),
            "5".into(),
            "--out".into(),
            out.into(),
            "--cache".into(),
            "cache".into(),
        ]
    };

    run_ok(netclust(dir.path()).args(args("run1")));
    let cached: Vec<_> = std::fs::read_dir(dir.path().join("cache"))
        .unwrap()
        .collect();
    assert_eq!(cached.len(), 6, "one cached feature file per graph");

    run_ok(netclust(dir.path()).args(args("run2")));
    for file in ["labels.csv", "distances.csv", "features.csv", "kernel.csv"] {
        let a = std::fs::read(dir.path().join("run1").join(file)).unwrap();
        let b = std::fs::read(dir.path().join("run2").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between cold and warm runs");
    }
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, _) = write_collection(dir.path(), 30, 3, (0.55, 0.2), 808);
    for (jobs, out) in [("1", "run1"), ("4", "run4")] {
        run_ok(netclust(dir.path()).args([
            "--jobs",
            jobs,
            "cluster",
            "--manifest",
            manifest.to_str().unwrap(),
            "--method",
            "nclm",
            "-k",
            "2",
            "--J",
            "3",
            "--seed",
            "11",
            "--out",
            out,
            "--no-cache",
        ]));
    }
    let a = std::fs::read(dir.path().join("run1/labels.csv")).unwrap();
    let b = std::fs::read(dir.path().join("run4/labels.csv")).unwrap();
    assert_eq!(a, b);
    let a = std::fs::read(dir.path().join("run1/distances.csv")).unwrap();
    let b = std::fs::read(dir.path().join("run4/distances.csv")).unwrap();
    assert_eq!(a, b);
}
