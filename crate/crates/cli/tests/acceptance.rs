//! Release acceptance checks.
//!
//! Each test is one gate: it measures the quantity it is about, prints a
//! single `criterion N: PASS` line with the measured values (visible under
//! `--nocapture`), and fails loudly otherwise. Tolerances are pinned as
//! constants next to the test that uses them. Run with
//! `cargo test --test acceptance -- --nocapture --test-threads=1` to see
//! the measurements in order.

use std::path::PathBuf;
use std::process::Command;
use std::time::Instant;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use netclust_core::baselines::{graph_stats_features, topeig_features};
use netclust_core::eval::{clustering_error, run_scenario, ExperimentConfig, ModelConfig};
use netclust_core::graphon_est::{estimate_naive, estimate_usvt, LinkProbMatrix};
use netclust_core::graphs::{
    sample_graphon, sample_graphon_with_p, save_edge_list, save_manifest, Graph, Graphon,
    ManifestEntry,
};
use netclust_core::linalg::SymMatrix;
use netclust_core::ncge::{
    davis_kahan_check, distance_perturbation_bound, frobenius_distance_matrix,
    spectral_cluster_distance, DistanceMatrix,
};
use netclust_core::nclm::{graph_moments, log_moment_features, LOG_MOMENT_FLOOR};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_std(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0);
    var.sqrt()
}

fn suite_config(scenario: &str, methods: &[&str], seeds: Vec<u64>) -> ExperimentConfig {
    ExperimentConfig {
        schema_version: 1,
        scenario: scenario.into(),
        model: ModelConfig::ThetaSuite {
            graphs_per_cell: 20,
            sizes: vec![500, 1000],
        },
        methods: methods.iter().map(|m| m.to_string()).collect(),
        k: 4,
        j: Some(5),
        j_range: None,
        t_grid: None,
        seeds,
        out_dir: None,
    }
}

/// Criterion 1: the four planted-partition settings, 20 graphs per (setting, size)
/// cell at n = 500 and n = 1000: log-moment clustering with J = 5 recovers
/// the settings with error <= 0.05, inside a five-minute budget, and the
/// moment-stage time is reported.
#[test]
fn criterion_01_simulation_suite_log_moments() {
    const MAX_ERROR: f64 = 0.05;
    const MAX_SECONDS: f64 = 300.0;

    let cfg = suite_config("suite-nclm", &["nclm"], vec![101]);
    let start = Instant::now();
    let report = run_scenario(&cfg).expect("suite scenario runs");
    let elapsed = start.elapsed().as_secs_f64();

    let cell = &report.cells[0];
    assert!(cell.failure.is_none(), "nclm failed: {:?}", cell.failure);
    let error = cell.error.expect("error recorded");
    let moment_seconds = cell.seconds.featurize_seconds;

    assert!(
        error <= MAX_ERROR,
        "suite error {error} exceeds {MAX_ERROR}"
    );
    assert!(
        elapsed <= MAX_SECONDS,
        "suite took {elapsed:.1}s, budget {MAX_SECONDS}s"
    );
    println!(
        "criterion 1: PASS — 160-graph suite, nclm J=5 error {error:.4} \
         (moment stage {moment_seconds:.1}s, total {elapsed:.1}s)"
    );
}

/// Criterion 2: on the same suite, the log-moment method is at least as accurate as
/// both baselines (top eigenvalues with J = 5, and the six-statistic
/// summary) on at least 4 of 5 seeds.
#[test]
fn criterion_02_baseline_ordering() {
    const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];
    const MIN_SEEDS_ORDERED: usize = 4;

    let cfg = suite_config(
        "suite-baselines",
        &["nclm", "topeig", "graphstats"],
        SEEDS.to_vec(),
    );
    let report = run_scenario(&cfg).expect("baseline scenario runs");
    let err_of = |method: &str, seed: u64| -> f64 {
        report
            .cells
            .iter()
            .find(|c| c.method == method && c.seed == seed)
            .and_then(|c| c.error)
            .unwrap_or_else(|| panic!("{method} seed {seed} has no error"))
    };

    let mut ordered = 0;
    for &seed in &SEEDS {
        let nclm = err_of("nclm", seed);
        let topeig = err_of("topeig", seed);
        let stats = err_of("graphstats", seed);
        let ok = nclm <= topeig && nclm <= stats;
        ordered += usize::from(ok);
        println!(
            "  seed {seed}: nclm {nclm:.4}  topeig {topeig:.4}  graphstats {stats:.4}  {}",
            if ok { "ordered" } else { "NOT ordered" }
        );
    }
    assert!(
        ordered >= MIN_SEEDS_ORDERED,
        "log-moment method beat both baselines on only {ordered}/5 seeds"
    );
    println!("criterion 2: PASS — nclm <= both baselines on {ordered}/5 seeds");
}

/// Criterion 3: correspondence methods on the two-component blockmodel mixture
/// (T = 20 split 13 + 7, n = 150): at the largest separation eps = 0.15
/// the smoothing-based estimators beat the raw-adjacency baseline on mean
/// error over 5 seeds, and the neighborhood-smoothing error is
/// non-increasing in eps.
#[test]
fn criterion_03_estimation_beats_raw_adjacency() {
    const EPS: [f64; 3] = [0.05, 0.10, 0.15];
    const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

    let mut means: Vec<(f64, f64, f64)> = Vec::new(); // (nbs, usvt, naive) per eps
    for &eps in &EPS {
        let cfg = ExperimentConfig {
            schema_version: 1,
            scenario: format!("pair-eps-{eps}"),
            model: ModelConfig::BlockmodelPair {
                p: 0.3,
                q: 0.05,
                blocks: 2,
                eps,
                n: 150,
                counts: vec![13, 7],
                rho: None,
                target_avg_degree: Some(22.0),
            },
            methods: vec!["ncge-nbs".into(), "ncge-usvt".into(), "ncge-naive".into()],
            k: 2,
            j: None,
            j_range: None,
            t_grid: None,
            seeds: SEEDS.to_vec(),
            out_dir: None,
        };
        let report = run_scenario(&cfg).expect("pair scenario runs");
        let mean_of = |method: &str| -> f64 {
            report
                .summary
                .iter()
                .find(|s| s.method == method)
                .and_then(|s| s.mean_error)
                .unwrap_or_else(|| panic!("{method} has no mean error"))
        };
        let row = (mean_of("ncge-nbs"), mean_of("ncge-usvt"), mean_of("ncge-naive"));
        println!(
            "  eps {eps:.2}: nbs {:.4}  usvt {:.4}  naive {:.4}",
            row.0, row.1, row.2
        );
        means.push(row);
    }

    let (nbs_hi, usvt_hi, naive_hi) = means[2];
    assert!(
        nbs_hi <= naive_hi,
        "at eps 0.15 nbs ({nbs_hi}) worse than naive ({naive_hi})"
    );
    assert!(
        usvt_hi <= naive_hi,
        "at eps 0.15 usvt ({usvt_hi}) worse than naive ({naive_hi})"
    );
    assert!(
        means[0].0 >= means[1].0 && means[1].0 >= means[2].0,
        "nbs means not non-increasing in eps: {:?}",
        means.iter().map(|m| m.0).collect::<Vec<_>>()
    );
    println!(
        "criterion 3: PASS — at eps 0.15: nbs {nbs_hi:.4} / usvt {usvt_hi:.4} <= naive \
         {naive_hi:.4}; nbs non-increasing across eps"
    );
}

/// Criterion 4: with exact population link matrices (estimation error zero), the
/// correspondence pipeline recovers the model assignment perfectly in all
/// 50 seeded cases, for 2 and 3 model groups.
#[test]
fn criterion_04_exact_population_recovery() {
    const CASES: usize = 50;
    const COPIES: usize = 4;
    const N: usize = 60;

    let models = [
        Graphon::planted_partition(0.6, 0.1, 2, 1.0).unwrap(),
        Graphon::erdos_renyi(0.35, 1.0).unwrap(),
        Graphon::planted_partition(0.8, 0.4, 3, 1.0).unwrap(),
    ];
    let mut perfect = 0;
    for case in 0..CASES {
        let k = 2 + case % 2;
        let mut estimates = Vec::new();
        let mut truth = Vec::new();
        for (group, model) in models.iter().take(k).enumerate() {
            let (_, p) = sample_graphon_with_p(model, N, 4_000 + 17 * case as u64 + group as u64);
            let lpm = LinkProbMatrix::new(p).expect("population matrix is valid");
            for _ in 0..COPIES {
                estimates.push(lpm.clone());
                truth.push(group + 1);
            }
        }
        let d = frobenius_distance_matrix(&estimates).unwrap();
        let assignment = spectral_cluster_distance(&d, k, case as u64).unwrap();
        let error = clustering_error(&assignment.labels, &truth, k).unwrap();
        assert_eq!(
            error, 0.0,
            "case {case} (k = {k}) misclustered with exact populations"
        );
        perfect += 1;
    }
    println!("criterion 4: PASS — exact recovery in {perfect}/{CASES} cases (k in {{2,3}})");
}

/// Criterion 5: the distance-matrix perturbation bound
/// |D_hat - D|_F^2 <= 4 T sum_i |P_hat_i - P_i|_F^2 holds on 100 random
/// collections with T <= 10 and n <= 50.
#[test]
fn criterion_05_distance_perturbation_bound() {
    const SLACK: f64 = 1e-9;
    let mut r = rng(55);

    for case in 0..100u32 {
        let t = 2 + (case as usize) % 9;
        let n = 5 + r.gen_range(0..46);
        let mut pop = Vec::new();
        let mut est = Vec::new();
        let mut sq_err_sum = 0.0;
        for _ in 0..t {
            let mut p = SymMatrix::zeros(n);
            let mut p_hat = SymMatrix::zeros(n);
            for i in 0..n {
                for j in i + 1..n {
                    let v: f64 = r.gen();
                    let noise: f64 = r.gen_range(-0.3..0.3);
                    p.set(i, j, v);
                    p_hat.set(i, j, (v + noise).clamp(0.0, 1.0));
                }
            }
            let p = LinkProbMatrix::new(p).unwrap();
            let p_hat = LinkProbMatrix::new(p_hat).unwrap();
            let diff = p.frob_dist(&p_hat).unwrap();
            sq_err_sum += diff * diff;
            pop.push(p);
            est.push(p_hat);
        }
        let d = frobenius_distance_matrix(&pop).unwrap();
        let d_hat = frobenius_distance_matrix(&est).unwrap();
        let diff = d.frob_dist(&d_hat).unwrap();
        let lhs = diff * diff;
        let rhs = distance_perturbation_bound(t, sq_err_sum);
        assert!(
            lhs <= rhs + SLACK,
            "case {case}: |D_hat - D|_F^2 = {lhs} exceeds bound {rhs} (T = {t}, n = {n})"
        );
    }
    println!("criterion 5: PASS — perturbation bound held on 100/100 random collections");
}

/// Criterion 6: the eigenspace perturbation inequality lhs <= 16 |D_hat - D|_F^2 /
/// gamma^2 holds on 100 constructed rank-K distance matrices with random
/// perturbations, and on the two-group equal mixture the spectral scale is
/// exactly gamma = T n d / 2 (d the size-normalized Frobenius separation).
#[test]
fn criterion_06_eigenspace_perturbation_bound() {
    const SLACK: f64 = 1e-9;
    let mut r = rng(66);

    let mut checked = 0;
    let mut attempts = 0;
    while checked < 100 {
        attempts += 1;
        assert!(attempts < 1000, "could not construct 100 usable cases");
        let k = 2 + (attempts as usize) % 3;
        let t = k + 2 + r.gen_range(0..6);
        // Group representatives in R^k; block-constant distances make D
        // rank <= k with zero diagonal blocks.
        let reps: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..k).map(|_| r.gen::<f64>() * 4.0).collect())
            .collect();
        let group: Vec<usize> = (0..t).map(|i| if i < k { i } else { r.gen_range(0..k) }).collect();
        let dist = |a: &[f64], b: &[f64]| -> f64 {
            a.iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt()
        };
        let d = DistanceMatrix::new(SymMatrix::from_fn(t, |i, j| {
            if group[i] == group[j] {
                0.0
            } else {
                dist(&reps[group[i]], &reps[group[j]])
            }
        }))
        .unwrap();

        // Scale the perturbation by the spectral gap so the inequality's
        // small-perturbation regime applies.
        let gamma = match davis_kahan_check(&d, &d, k) {
            Ok(c) => c.gamma,
            Err(_) => continue, // degenerate representatives; resample
        };
        let amp = 0.05 * gamma / t as f64;
        let mut noisy = d.as_sym().clone();
        for i in 0..t {
            for j in i + 1..t {
                noisy.set(i, j, noisy.get(i, j) + r.gen::<f64>() * amp);
            }
        }
        let d_hat = DistanceMatrix::new(noisy).unwrap();
        let check = davis_kahan_check(&d, &d_hat, k).expect("perturbed check succeeds");
        assert!(
            check.lhs <= check.rhs + SLACK,
            "case {checked}: aligned eigenspace distance {} exceeds bound {} (k = {k}, T = {t})",
            check.lhs,
            check.rhs
        );
        checked += 1;
    }

    // Equal two-group mixture: T/2 copies of each population matrix.
    let n = 40;
    let t = 12;
    let (_, p1) = sample_graphon_with_p(&Graphon::planted_partition(0.5, 0.1, 2, 1.0).unwrap(), n, 7);
    let (_, p2) = sample_graphon_with_p(&Graphon::erdos_renyi(0.3, 1.0).unwrap(), n, 8);
    let p1 = LinkProbMatrix::new(p1).unwrap();
    let p2 = LinkProbMatrix::new(p2).unwrap();
    let d_sep = p1.frob_dist(&p2).unwrap() / n as f64;
    let mut estimates = Vec::new();
    for _ in 0..t / 2 {
        estimates.push(p1.clone());
    }
    for _ in 0..t / 2 {
        estimates.push(p2.clone());
    }
    let d = frobenius_distance_matrix(&estimates).unwrap();
    let gamma = davis_kahan_check(&d, &d, 2).unwrap().gamma;
    let closed_form = t as f64 * n as f64 * d_sep / 2.0;
    assert!(
        (gamma - closed_form).abs() <= SLACK * closed_form.max(1.0),
        "gamma {gamma} != T n d / 2 = {closed_form}"
    );
    println!(
        "criterion 6: PASS — bound held on 100/100 rank-K cases; equal-mixture gamma \
         {gamma:.6} matches T n d / 2"
    );
}

/// Closed k-walks counted by brute-force enumeration of every walk.
fn count_closed_walks(g: &Graph, k: usize) -> u64 {
    fn rec(g: &Graph, start: usize, cur: usize, left: usize) -> u64 {
        if left == 1 {
            return u64::from(g.has_edge(cur, start));
        }
        (0..g.n())
            .filter(|&w| g.has_edge(cur, w))
            .map(|w| rec(g, start, w, left - 1))
            .sum()
    }
    (0..g.n()).map(|s| rec(g, s, s, k)).sum()
}

/// Criterion 7: trace moments agree with exhaustive walk enumeration on all orders
/// k <= 6 for 200 random graphs with n <= 6 (relative error <= 1e-12), and
/// the half-power evaluation agrees with repeated dense multiplication to
/// 1e-9 for n <= 300 and k <= 10.
#[test]
fn criterion_07_moment_oracles() {
    const REL_EXHAUSTIVE: f64 = 1e-12;
    const REL_DENSE: f64 = 1e-9;
    let mut r = rng(77);

    for case in 0..200 {
        let n = 2 + case % 5;
        let p = [0.0, 0.2, 0.5, 0.8, 1.0][(case / 5) % 5];
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if r.gen::<f64>() < p {
                    edges.push((i, j));
                }
            }
        }
        let g = Graph::from_edges(n, edges).unwrap();
        let mv = graph_moments(&g, 6).unwrap();
        for k in 2..=6 {
            let oracle = count_closed_walks(&g, k) as f64 / (n as f64).powi(k as i32);
            let got = mv.moment(k);
            let scale = oracle.abs().max(1e-300);
            assert!(
                (got - oracle).abs() <= REL_EXHAUSTIVE * scale.max(1.0),
                "case {case}: m_{k} = {got} but walk enumeration gives {oracle} (n = {n})"
            );
        }
    }

    for &n in &[60usize, 150, 300] {
        let g = sample_graphon(
            &Graphon::planted_partition(0.3, 0.1, 2, 1.0).unwrap(),
            n,
            n as u64,
        );
        let mv = graph_moments(&g, 10).unwrap();
        // Repeated multiplication of B = A/n, tracing each power.
        let nf = n as f64;
        let b = ndarray::Array2::from_shape_fn((n, n), |(i, j)| {
            if g.has_edge(i, j) {
                1.0 / nf
            } else {
                0.0
            }
        });
        let mut power = b.clone();
        for k in 2..=10 {
            power = power.dot(&b);
            let oracle = power.diag().sum();
            let got = mv.moment(k);
            assert!(
                (got - oracle).abs() <= REL_DENSE * oracle.abs().max(1e-30),
                "n = {n}: m_{k} = {got} vs repeated multiplication {oracle}"
            );
        }
    }
    println!(
        "criterion 7: PASS — 200 graphs vs walk enumeration (k <= 6), half-power vs repeated \
         multiplication at n in {{60,150,300}} (k <= 10)"
    );
}

/// Criterion 8: concentration trend: for the two-block model (p = 0.2, q = 0.1) the
/// spread of log m_k over 100 replicates shrinks (or holds) from n = 100
/// to n = 200 for every k in 2..=5, averaged over 5 seeds; and a single
/// edge flip moves the scale statistic psi_k by at most sqrt(2) k n^(k-1).
#[test]
fn criterion_08_moment_concentration() {
    let model = Graphon::planted_partition(0.2, 0.1, 2, 1.0).unwrap();

    let mut avg_std = [[0.0f64; 4]; 2]; // [size index][k - 2]
    for seed in 1..=5u64 {
        for (si, &n) in [100usize, 200].iter().enumerate() {
            let mut logs = vec![Vec::new(); 4];
            for rep in 0..100u64 {
                let g = sample_graphon(&model, n, seed * 1_000_000 + n as u64 * 1_000 + rep);
                let mv = graph_moments(&g, 5).unwrap();
                for k in 2..=5 {
                    logs[k - 2].push(mv.moment(k).ln());
                }
            }
            for k in 0..4 {
                avg_std[si][k] += sample_std(&logs[k]) / 5.0;
            }
        }
    }
    for k in 0..4 {
        assert!(
            avg_std[1][k] <= avg_std[0][k],
            "std(log m_{}) grew from n=100 ({}) to n=200 ({})",
            k + 2,
            avg_std[0][k],
            avg_std[1][k]
        );
    }

    // Lipschitz bound under single edge flips.
    let mut r = rng(88);
    let n = 30;
    let mut max_ratio = 0.0f64;
    for flip in 0..100 {
        let g = sample_graphon(
            &Graphon::planted_partition(0.4, 0.2, 2, 1.0).unwrap(),
            n,
            flip / 10,
        );
        let i = r.gen_range(0..n);
        let j = (i + 1 + r.gen_range(0..n - 1)) % n;
        let (a, b) = (i.min(j), i.max(j));
        let mut edges: Vec<(usize, usize)> = g
            .edges()
            .iter()
            .map(|&(u, v)| (u as usize, v as usize))
            .filter(|&(u, v)| (u, v) != (a, b))
            .collect();
        if !g.has_edge(a, b) {
            edges.push((a, b));
        }
        let flipped = Graph::from_edges(n, edges).unwrap();
        let before = graph_moments(&g, 5).unwrap();
        let after = graph_moments(&flipped, 5).unwrap();
        for k in 2..=5 {
            let delta = (after.scaled(k) - before.scaled(k)).abs();
            let bound = std::f64::consts::SQRT_2 * k as f64 * (n as f64).powi(k as i32 - 1);
            assert!(
                delta <= bound + 1e-9,
                "flip {flip}: |psi_{k} change| = {delta} exceeds {bound}"
            );
            max_ratio = max_ratio.max(delta / bound);
        }
    }
    println!(
        "criterion 8: PASS — std(log m_k) non-increasing n=100 -> n=200 for k=2..5; edge-flip \
         psi bound held on 100 flips (max fill {max_ratio:.2e})"
    );
}

fn brute_force_error(pred: &[usize], truth: &[usize], k: usize) -> f64 {
    fn permutations(k: usize) -> Vec<Vec<usize>> {
        if k == 1 {
            return vec![vec![1]];
        }
        let mut out = Vec::new();
        for rest in permutations(k - 1) {
            for pos in 0..=rest.len() {
                let mut p = rest.clone();
                p.insert(pos, k);
                out.push(p);
            }
        }
        out
    }
    let best = permutations(k)
        .into_iter()
        .map(|p| {
            pred.iter()
                .zip(truth)
                .filter(|&(&a, &t)| p[a - 1] != t)
                .count()
        })
        .min()
        .unwrap();
    best as f64 / pred.len() as f64
}

/// Criterion 9: invariance suite: node relabeling leaves log-moment features, top
/// eigenvalues, and the six-statistic summary bit-identical; permuting all
/// graphs by one common relabeling moves correspondence distances by at
/// most 1e-9; and the assignment-based clustering error equals brute-force
/// minimization over label permutations on 200 cases with k <= 5.
#[test]
fn criterion_09_invariance_suite() {
    const DIST_TOL: f64 = 1e-9;
    let mut r = rng(99);

    // (a) Per-graph features are exactly relabeling-invariant.
    let models = [
        Graphon::planted_partition(0.5, 0.1, 2, 1.0).unwrap(),
        Graphon::erdos_renyi(0.15, 1.0).unwrap(),
        Graphon::planted_partition(0.9, 0.6, 3, 0.7).unwrap(),
    ];
    for case in 0..25 {
        let n = 10 + case % 40;
        let g = sample_graphon(&models[case % 3], n, 900 + case as u64);
        let mut perm: Vec<u32> = (0..n as u32).collect();
        perm.shuffle(&mut r);
        let h = g.reordered(&perm).unwrap();

        let ga = log_moment_features(&g, 6, LOG_MOMENT_FLOOR).unwrap();
        let gb = log_moment_features(&h, 6, LOG_MOMENT_FLOOR).unwrap();
        assert_eq!(ga.values, gb.values, "log moments moved under relabeling");

        let ta = topeig_features(&g, 5).unwrap();
        let tb = topeig_features(&h, 5).unwrap();
        assert_eq!(ta.values, tb.values, "top eigenvalues moved under relabeling");

        let sa = graph_stats_features(&g);
        let sb = graph_stats_features(&h);
        assert_eq!(sa.values, sb.values, "graph statistics moved under relabeling");
    }

    // (b) A common relabeling of every graph preserves correspondence
    // distances to floating-point accuracy.
    let n = 40;
    let graphs: Vec<Graph> = (0..6)
        .map(|i| sample_graphon(&models[i % 2], n, 500 + i as u64))
        .collect();
    let mut perm: Vec<u32> = (0..n as u32).collect();
    perm.shuffle(&mut r);
    let permuted: Vec<Graph> = graphs.iter().map(|g| g.reordered(&perm).unwrap()).collect();
    type EstFn = fn(&Graph) -> netclust_core::Result<LinkProbMatrix>;
    let estimators: [EstFn; 2] = [|g| Ok(estimate_naive(g)), |g| estimate_usvt(g, 0.01)];
    for estimate in estimators {
        let d1 = frobenius_distance_matrix(
            &graphs.iter().map(estimate).collect::<Result<Vec<_>, _>>().unwrap(),
        )
        .unwrap();
        let d2 = frobenius_distance_matrix(
            &permuted.iter().map(estimate).collect::<Result<Vec<_>, _>>().unwrap(),
        )
        .unwrap();
        for i in 0..6 {
            for j in i + 1..6 {
                assert!(
                    (d1.get(i, j) - d2.get(i, j)).abs() <= DIST_TOL,
                    "distance ({i},{j}) moved under common relabeling: {} vs {}",
                    d1.get(i, j),
                    d2.get(i, j)
                );
            }
        }
    }

    // (c) Assignment-based error equals brute-force permutation search.
    for case in 0..200 {
        let k = 1 + case % 5;
        let len = 3 + (case * 7) % 28;
        let pred: Vec<usize> = (0..len).map(|_| r.gen_range(1..=k)).collect();
        let truth: Vec<usize> = (0..len).map(|_| r.gen_range(1..=k)).collect();
        let fast = clustering_error(&pred, &truth, k).unwrap();
        let brute = brute_force_error(&pred, &truth, k);
        assert_eq!(fast, brute, "case {case}: {fast} vs brute {brute} (k = {k})");
    }

    println!(
        "criterion 9: PASS — exact feature invariance (25 graphs), common-permutation distance \
         drift <= {DIST_TOL:.0e}, error metric matches brute force on 200 cases"
    );
}

/// Criterion 10: end-to-end on heterogeneous sparse graphs: the CLI ingests a
/// four-group corpus with sizes spanning 350..=4000 and the log-moment
/// method with J = 8 separates the groups with error <= 0.1 in under a
/// minute.
#[test]
fn criterion_10_sparse_corpus_via_cli() {
    const MAX_ERROR: f64 = 0.1;
    const MAX_SECONDS: f64 = 60.0;

    let dir = tempfile::tempdir().unwrap();
    let groups: [(Graphon, [usize; 6]); 4] = [
        (
            Graphon::planted_partition(0.04, 0.01, 2, 1.0).unwrap(),
            [350, 420, 500, 560, 640, 700],
        ),
        (
            Graphon::erdos_renyi(0.012, 1.0).unwrap(),
            [750, 850, 950, 1050, 1200, 1350],
        ),
        (
            Graphon::planted_partition(0.012, 0.002, 4, 1.0).unwrap(),
            [1400, 1600, 1800, 2100, 2400, 2700],
        ),
        (
            Graphon::planted_partition(0.005, 0.0008, 2, 1.0).unwrap(),
            [2800, 3100, 3400, 3700, 3900, 4000],
        ),
    ];

    std::fs::create_dir_all(dir.path().join("graphs")).unwrap();
    let mut entries = Vec::new();
    for (gi, (model, sizes)) in groups.iter().enumerate() {
        for (si, &n) in sizes.iter().enumerate() {
            let g = sample_graphon(model, n, (1000 * gi + si) as u64);
            let rel = PathBuf::from(format!("graphs/g{gi}{si}.edges"));
            save_edge_list(&g, dir.path().join(&rel)).unwrap();
            entries.push(ManifestEntry {
                path: rel,
                label: Some(gi + 1),
            });
        }
    }
    save_manifest(&entries, dir.path().join("manifest.csv")).unwrap();

    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_netclust"))
        .current_dir(dir.path())
        .args([
            "cluster",
            "--manifest",
            "manifest.csv",
            "--method",
            "nclm",
            "-k",
            "4",
            "--J",
            "8",
            "--seed",
            "1",
            "--out",
            "run",
            "--no-cache",
        ])
        .output()
        .unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    assert!(
        out.status.success(),
        "cluster run failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    let error: f64 = stdout
        .lines()
        .find_map(|l| l.strip_prefix("clustering error vs manifest labels: "))
        .expect("CLI reports error vs manifest labels")
        .trim()
        .parse()
        .unwrap();

    assert!(
        error <= MAX_ERROR,
        "corpus error {error} exceeds {MAX_ERROR}\nstdout: {stdout}"
    );
    assert!(
        elapsed <= MAX_SECONDS,
        "corpus run took {elapsed:.1}s, budget {MAX_SECONDS}s"
    );
    println!(
        "criterion 10: PASS — 24 sparse graphs (n 350..4000), nclm J=8 error {error:.4} \
         in {elapsed:.1}s via the CLI"
    );
}
