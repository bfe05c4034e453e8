//! Link-probability matrix estimation for a single graph.
//!
//! Given one adjacency matrix sampled from an exchangeable model, these
//! estimators recover the matrix of edge probabilities `P` (up to noise):
//!
//! * [`estimate_usvt`] — universal singular value thresholding: keep the
//!   eigenpairs of `A` whose magnitude clears `(2 + eta) * sqrt(n * rho)`,
//!   where `rho` is the observed edge density, then clip to [0,1].
//! * [`estimate_nbs`] — neighborhood smoothing: average the adjacency rows
//!   of nodes whose codegree profiles are closest, with an adaptive
//!   `sqrt(log n / n)`-quantile neighborhood radius.
//! * [`estimate_naive`] — `A` itself, the zero-smoothing reference point.
//!
//! All three return a [`LinkProbMatrix`]: symmetric, entries in [0,1], zero
//! diagonal.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::graphs::Graph;
use crate::linalg::{sym_eig_full, SymMatrix};

/// Default `eta` margin for the USVT threshold.
pub const DEFAULT_USVT_ETA: f64 = 0.01;
/// Default `C0` multiplier for the neighborhood-smoothing radius.
pub const DEFAULT_NBS_C0: f64 = 1.0;

const LPM_MAGIC: &[u8; 4] = b"LPM1";

/// Symmetric matrix of link probabilities: entries in [0,1], zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkProbMatrix {
    inner: SymMatrix,
}

impl LinkProbMatrix {
    /// Validates and wraps a symmetric matrix of probabilities.
    pub fn new(m: SymMatrix) -> Result<Self> {
        let n = m.n();
        for i in 0..n {
            if m.get(i, i) != 0.0 {
                return Err(Error::InvalidParam(format!(
                    "link-probability diagonal must be zero, got {} at ({i},{i})",
                    m.get(i, i)
                )));
            }
            for j in i + 1..n {
                let v = m.get(i, j);
                if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                    return Err(Error::InvalidParam(format!(
                        "link probability ({i},{j}) = {v} outside [0,1]"
                    )));
                }
            }
        }
        Ok(LinkProbMatrix { inner: m })
    }

    pub fn zeros(n: usize) -> Self {
        LinkProbMatrix {
            inner: SymMatrix::zeros(n),
        }
    }

    pub fn n(&self) -> usize {
        self.inner.n()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.inner.get(i, j)
    }

    pub fn as_sym(&self) -> &SymMatrix {
        &self.inner
    }

    pub fn frob_dist(&self, other: &LinkProbMatrix) -> Result<f64> {
        self.inner.frob_dist(&other.inner)
    }
}

/// The adjacency matrix itself as the estimate.
pub fn estimate_naive(g: &Graph) -> LinkProbMatrix {
    LinkProbMatrix {
        inner: g.adjacency(),
    }
}

/// Universal singular value thresholding. `eta >= 0` widens the classical
/// `2 sqrt(n rho)` cutoff; the observed density stands in for the unknown
/// sparsity level.
pub fn estimate_usvt(g: &Graph, eta: f64) -> Result<LinkProbMatrix> {
    if !eta.is_finite() || eta < 0.0 {
        return Err(Error::InvalidParam(format!("usvt eta must be >= 0, got {eta}")));
    }
    let n = g.n();
    if n < 2 {
        return Ok(LinkProbMatrix::zeros(n));
    }
    let rho_hat = g.density();
    let thresh = (2.0 + eta) * (n as f64 * rho_hat).sqrt();

    let a = g.adjacency();
    let eig = sym_eig_full(&a)?;
    let kept: Vec<usize> = (0..n)
        .filter(|&i| eig.values[i].abs() >= thresh)
        .collect();

    let mut raw = Array2::<f64>::zeros((n, n));
    if !kept.is_empty() {
        let mut scaled = Array2::<f64>::zeros((n, kept.len()));
        let mut basis = Array2::<f64>::zeros((n, kept.len()));
        for (c, &i) in kept.iter().enumerate() {
            let col = eig.vectors.column(i);
            basis.column_mut(c).assign(&col);
            scaled.column_mut(c).assign(&col);
            scaled.column_mut(c).mapv_inplace(|v| v * eig.values[i]);
        }
        raw = scaled.dot(&basis.t());
    }

    let clipped = SymMatrix::from_fn(n, |i, j| {
        if i == j {
            0.0
        } else {
            raw[[i, j]].clamp(0.0, 1.0)
        }
    });
    Ok(LinkProbMatrix { inner: clipped })
}

/// Neighborhood smoothing. For each node the estimator averages adjacency
/// rows over the nodes whose codegree profile is within the
/// `h = C0 sqrt(log n / n)` quantile of dissimilarity (inclusive), then
/// symmetrizes. Needs `n >= 3` so the profile comparison has a witness node.
pub fn estimate_nbs(g: &Graph, c0: f64) -> Result<LinkProbMatrix> {
    if !c0.is_finite() || c0 <= 0.0 {
        return Err(Error::InvalidParam(format!("nbs C0 must be > 0, got {c0}")));
    }
    let n = g.n();
    if n < 3 {
        return Err(Error::GraphTooSmall { needed: 3, got: n });
    }
    let a = g.adjacency();
    let a_arr = a.as_array();
    // Codegree profile D2 = A*A / n; entry (i,k) counts common neighbors.
    let d2 = a_arr.dot(a_arr) / n as f64;

    // Pairwise profile dissimilarity: the largest codegree gap over
    // reference nodes k distinct from both endpoints.
    let mut dhat = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in i + 1..n {
            let ri = d2.row(i);
            let rj = d2.row(j);
            let mut best = 0.0f64;
            for k in 0..n {
                if k == i || k == j {
                    continue;
                }
                let diff = (ri[k] - rj[k]).abs();
                if diff > best {
                    best = diff;
                }
            }
            dhat[[i, j]] = best;
            dhat[[j, i]] = best;
        }
    }

    let h = c0 * ((n as f64).ln() / n as f64).sqrt();
    let mut p_tilde = Array2::<f64>::zeros((n, n));
    let mut dvals = Vec::with_capacity(n - 1);
    for i in 0..n {
        dvals.clear();
        for k in 0..n {
            if k != i {
                dvals.push(dhat[[i, k]]);
            }
        }
        dvals.sort_by(f64::total_cmp);
        // Nearest-rank quantile, clamped into the valid index range.
        let rank = ((h * dvals.len() as f64).ceil() as usize).clamp(1, dvals.len());
        let q = dvals[rank - 1];

        let mut count = 0usize;
        let mut acc = vec![0.0f64; n];
        for j in 0..n {
            if j != i && dhat[[i, j]] <= q {
                count += 1;
                let row = a_arr.row(j);
                for (dst, &v) in acc.iter_mut().zip(row.iter()) {
                    *dst += v;
                }
            }
        }
        let inv = 1.0 / count.max(1) as f64;
        for (j, &s) in acc.iter().enumerate() {
            p_tilde[[i, j]] = s * inv;
        }
    }

    let sym = SymMatrix::from_fn(n, |i, j| {
        if i == j {
            0.0
        } else {
            (0.5 * (p_tilde[[i, j]] + p_tilde[[j, i]])).clamp(0.0, 1.0)
        }
    });
    Ok(LinkProbMatrix { inner: sym })
}

/// Which single-graph estimator a pipeline should use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Estimator {
    Usvt { eta: f64 },
    Nbs { c0: f64 },
    Naive,
}

impl Estimator {
    pub fn usvt() -> Self {
        Estimator::Usvt {
            eta: DEFAULT_USVT_ETA,
        }
    }

    pub fn nbs() -> Self {
        Estimator::Nbs { c0: DEFAULT_NBS_C0 }
    }

    pub fn estimate(&self, g: &Graph) -> Result<LinkProbMatrix> {
        match *self {
            Estimator::Usvt { eta } => estimate_usvt(g, eta),
            Estimator::Nbs { c0 } => estimate_nbs(g, c0),
            Estimator::Naive => Ok(estimate_naive(g)),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Estimator::Usvt { .. } => "usvt",
            Estimator::Nbs { .. } => "nbs",
            Estimator::Naive => "naive",
        }
    }
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

/// Writes a dense CSV (n rows of n comma-separated values, shortest
/// round-trip float formatting).
pub fn save_lpm_csv(p: &LinkProbMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut w = std::io::BufWriter::new(file);
    let n = p.n();
    for i in 0..n {
        let row: Vec<String> = (0..n).map(|j| format!("{}", p.get(i, j))).collect();
        writeln!(w, "{}", row.join(",")).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes the compact binary form: magic `LPM1`, node count as a little-
/// endian u64, then the upper triangle (diagonal included) row-major as
/// little-endian f64.
pub fn save_lpm_binary(p: &LinkProbMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = std::fs::File::create(path).map_err(io_err)?;
    let mut w = std::io::BufWriter::new(file);
    w.write_all(LPM_MAGIC).map_err(io_err)?;
    let n = p.n();
    w.write_all(&(n as u64).to_le_bytes()).map_err(io_err)?;
    for i in 0..n {
        for j in i..n {
            w.write_all(&p.get(i, j).to_le_bytes()).map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)
}

/// Reads either persisted form, sniffing the binary magic.
pub fn load_lpm(path: impl AsRef<Path>) -> Result<LinkProbMatrix> {
    let path = path.as_ref();
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let bytes = std::fs::read(path).map_err(io_err)?;
    if bytes.starts_with(LPM_MAGIC) {
        load_lpm_binary_bytes(&bytes, path)
    } else {
        load_lpm_csv_str(std::str::from_utf8(&bytes).map_err(|e| Error::InvalidParam(format!(
            "{}: not valid UTF-8 CSV: {e}",
            path.display()
        )))?, path)
    }
}

fn load_lpm_binary_bytes(bytes: &[u8], path: &Path) -> Result<LinkProbMatrix> {
    let bad = |msg: String| Error::InvalidParam(format!("{}: {msg}", path.display()));
    let mut cursor = &bytes[LPM_MAGIC.len()..];
    let mut n_buf = [0u8; 8];
    cursor
        .read_exact(&mut n_buf)
        .map_err(|_| bad("truncated header".into()))?;
    let n = u64::from_le_bytes(n_buf) as usize;
    let want = n * (n + 1) / 2;
    if cursor.len() != want * 8 {
        return Err(bad(format!(
            "expected {} triangle values for n = {n}, found {} bytes",
            want,
            cursor.len()
        )));
    }
    let mut m = SymMatrix::zeros(n);
    let mut buf = [0u8; 8];
    for i in 0..n {
        for j in i..n {
            cursor.read_exact(&mut buf).expect("length checked");
            m.set(i, j, f64::from_le_bytes(buf));
        }
    }
    LinkProbMatrix::new(m)
}

fn load_lpm_csv_str(text: &str, path: &Path) -> Result<LinkProbMatrix> {
    let bad = |line: usize, msg: String| Error::InvalidParam(format!("{}:{line}: {msg}", path.display()));
    let rows: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    let n = rows.len();
    let mut m = SymMatrix::zeros(n);
    for (i, row) in rows.iter().enumerate() {
        let vals: Vec<&str> = row.split(',').collect();
        if vals.len() != n {
            return Err(bad(i + 1, format!("expected {n} columns, got {}", vals.len())));
        }
        for (j, tok) in vals.iter().enumerate() {
            let v: f64 = tok
                .trim()
                .parse()
                .map_err(|e| bad(i + 1, format!("column {}: {e}", j + 1)))?;
            if j >= i {
                m.set(i, j, v);
            } else if (m.get(i, j) - v).abs() > 1e-12 {
                return Err(bad(i + 1, format!("asymmetry at ({i},{j})")));
            }
        }
    }
    LinkProbMatrix::new(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::{sample_graphon, sample_graphon_with_p, Graph, Graphon, SmoothExpr};

    fn complete_graph(n: usize) -> Graph {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                edges.push((i, j));
            }
        }
        Graph::from_edges(n, edges).unwrap()
    }

    fn mse(p_hat: &LinkProbMatrix, p: &SymMatrix) -> f64 {
        let n = p.n() as f64;
        let d = p_hat.as_sym().frob_dist(&SymMatrix::from_fn(p.n(), |i, j| {
            if i == j { 0.0 } else { p.get(i, j) }
        })).unwrap();
        d * d / (n * n)
    }

    #[test]
    fn naive_returns_adjacency() {
        let g = Graph::from_edges(3, [(0, 1), (1, 2), (0, 2)]).unwrap();
        let p = estimate_naive(&g);
        assert_eq!(p.get(0, 1), 1.0);
        assert_eq!(p.get(0, 0), 0.0);
    }

    #[test]
    fn usvt_on_complete_graph_keeps_the_top_eigenpair() {
        let g = complete_graph(50);
        let p = estimate_usvt(&g, DEFAULT_USVT_ETA).unwrap();
        for i in 0..50 {
            assert_eq!(p.get(i, i), 0.0);
            for j in i + 1..50 {
                assert!(p.get(i, j) >= 0.9, "entry ({i},{j}) = {}", p.get(i, j));
            }
        }
    }

    #[test]
    fn usvt_on_empty_graph_is_zero() {
        let g = Graph::new(20);
        let p = estimate_usvt(&g, DEFAULT_USVT_ETA).unwrap();
        for i in 0..20 {
            for j in 0..20 {
                assert_eq!(p.get(i, j), 0.0);
            }
        }
    }

    #[test]
    fn usvt_recovers_dense_er_probabilities() {
        let model = Graphon::erdos_renyi(0.5, 1.0).unwrap();
        let (g, p) = sample_graphon_with_p(&model, 400, 42);
        let p_hat = estimate_usvt(&g, DEFAULT_USVT_ETA).unwrap();
        let err = mse(&p_hat, &p);
        assert!(err <= 0.01, "usvt mse {err}");
    }

    #[test]
    fn usvt_rejects_bad_eta() {
        let g = complete_graph(5);
        assert!(estimate_usvt(&g, -0.1).is_err());
        assert!(estimate_usvt(&g, f64::NAN).is_err());
    }

    #[test]
    fn nbs_on_complete_graph_approaches_one() {
        let n = 50;
        let g = complete_graph(n);
        let p = estimate_nbs(&g, DEFAULT_NBS_C0).unwrap();
        let want = (n as f64 - 1.0) / n as f64;
        for i in 0..n {
            assert_eq!(p.get(i, i), 0.0);
            for j in i + 1..n {
                assert!(
                    (p.get(i, j) - want).abs() <= 1e-3,
                    "entry ({i},{j}) = {} vs {want}",
                    p.get(i, j)
                );
            }
        }
    }

    #[test]
    fn nbs_requires_three_nodes() {
        let g = Graph::from_edges(2, [(0, 1)]).unwrap();
        assert!(matches!(
            estimate_nbs(&g, DEFAULT_NBS_C0),
            Err(Error::GraphTooSmall { needed: 3, .. })
        ));
        assert!(estimate_nbs(&complete_graph(4), 0.0).is_err());
    }

    #[test]
    fn nbs_beats_naive_risk_on_blockmodel() {
        let model = Graphon::planted_partition(0.2, 0.05, 2, 1.0).unwrap();
        for seed in 0..5 {
            let (g, p) = sample_graphon_with_p(&model, 300, 7000 + seed);
            let p_hat = estimate_nbs(&g, DEFAULT_NBS_C0).unwrap();
            let n2 = (300 * 300) as f64;
            let mut naive_risk = 0.0;
            for i in 0..300 {
                for j in 0..300 {
                    if i != j {
                        let pij = p.get(i, j);
                        naive_risk += pij * (1.0 - pij);
                    }
                }
            }
            naive_risk /= n2;
            let err = mse(&p_hat, &p);
            assert!(
                err < naive_risk,
                "seed {seed}: nbs mse {err} vs naive risk {naive_risk}"
            );
        }
    }

    #[test]
    fn estimation_error_shrinks_with_n() {
        // Fixed Lipschitz graphon; average MSE over seeds must decrease
        // with size for both smoothing estimators.
        let model = Graphon::smooth(SmoothExpr::Average, 0.5).unwrap();
        for estimator in [Estimator::usvt(), Estimator::nbs()] {
            let mut prev = f64::INFINITY;
            for &n in &[100usize, 200, 400] {
                let mut total = 0.0;
                for seed in 0..10 {
                    let (g, p) = sample_graphon_with_p(&model, n, 500 + seed);
                    let p_hat = estimator.estimate(&g).unwrap();
                    total += mse(&p_hat, &p);
                }
                let avg = total / 10.0;
                assert!(
                    avg < prev,
                    "{}: mse at n={n} is {avg}, previous {prev}",
                    estimator.name()
                );
                prev = avg;
            }
        }
    }

    #[test]
    fn lpm_validation_rejects_bad_matrices() {
        let mut m = SymMatrix::zeros(3);
        m.set(0, 1, 1.5);
        assert!(LinkProbMatrix::new(m).is_err());
        let mut m = SymMatrix::zeros(3);
        m.set(1, 1, 0.2);
        assert!(LinkProbMatrix::new(m).is_err());
    }

    #[test]
    fn lpm_round_trips_through_both_formats() {
        let model = Graphon::planted_partition(0.6, 0.1, 2, 0.9).unwrap();
        let g = sample_graphon(&model, 20, 9);
        let p = estimate_usvt(&g, DEFAULT_USVT_ETA).unwrap();
        let dir = tempfile::tempdir().unwrap();

        let bin = dir.path().join("p.lpm");
        save_lpm_binary(&p, &bin).unwrap();
        assert_eq!(load_lpm(&bin).unwrap(), p);

        let csv = dir.path().join("p.csv");
        save_lpm_csv(&p, &csv).unwrap();
        assert_eq!(load_lpm(&csv).unwrap(), p);
    }

    #[test]
    fn lpm_binary_rejects_truncation() {
        let p = LinkProbMatrix::zeros(4);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.lpm");
        save_lpm_binary(&p, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(load_lpm(&path).is_err());
    }
}
