//! Dense symmetric eigendecomposition and k-means.
//!
//! Every spectral step in the crate funnels through this module's solver:
//! Householder reduction to tridiagonal form followed by implicitly shifted
//! QL iteration. Collections stay at desk scale (matrices up to a couple of
//! thousand rows), so a dense O(n^3) solver is fast enough and easy to audit.
//!
//! Two reduction kernels share the QL core: the classic in-place reduction
//! that accumulates the orthogonal transform (needed when eigenvectors are
//! requested), and a row-oriented rank-2-update reduction used on the
//! values-only path, which is what batch feature extraction hits hardest.
//! The two kernels cross-check each other in the test suite.
//!
//! Determinism matters more than usual here: clustering output feeds golden
//! tests and cache keys, so eigenvector signs, eigenvalue ordering, and
//! k-means seeding all follow fixed written-down rules instead of whatever
//! the iteration happens to produce.

use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::rng;

/// Machine tolerance used by the QL sweep to declare off-diagonals negligible.
const QL_EPS: f64 = 2.220_446_049_250_313e-16;
/// Maximum QL iterations per eigenvalue before giving up.
const QL_MAX_ITER: usize = 80;

// ---------------------------------------------------------------------------
// SymMatrix
// ---------------------------------------------------------------------------

/// Dense symmetric matrix. Symmetry is maintained by construction: all
/// writes go through [`SymMatrix::set`], which mirrors across the diagonal,
/// and constructors only evaluate the upper triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Array2<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        SymMatrix {
            n,
            data: Array2::zeros((n, n)),
        }
    }

    /// Builds from a function evaluated on the upper triangle (i <= j) and
    /// mirrored below, so symmetry is exact even for noisy generators.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Array2::zeros((n, n));
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                data[[i, j]] = v;
                data[[j, i]] = v;
            }
        }
        SymMatrix { n, data }
    }

    /// Wraps a square array that is already exactly symmetric.
    pub fn from_array(data: Array2<f64>) -> Result<Self> {
        let (r, c) = data.dim();
        if r != c {
            return Err(Error::DimensionMismatch(format!(
                "expected square matrix, got {r}x{c}"
            )));
        }
        for i in 0..r {
            for j in i + 1..r {
                if data[[i, j]] != data[[j, i]] {
                    return Err(Error::DimensionMismatch(format!(
                        "matrix not symmetric at ({i},{j}): {} vs {}",
                        data[[i, j]],
                        data[[j, i]]
                    )));
                }
            }
        }
        Ok(SymMatrix { n: r, data })
    }

    /// Symmetrizes a square array as (A + A^T)/2.
    pub fn symmetrized(data: Array2<f64>) -> Result<Self> {
        let (r, c) = data.dim();
        if r != c {
            return Err(Error::DimensionMismatch(format!(
                "expected square matrix, got {r}x{c}"
            )));
        }
        let mut out = data;
        for i in 0..r {
            for j in i + 1..r {
                let v = 0.5 * (out[[i, j]] + out[[j, i]]);
                out[[i, j]] = v;
                out[[j, i]] = v;
            }
        }
        Ok(SymMatrix { n: r, data: out })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[[i, j]]
    }

    /// Sets entry (i, j) and its mirror (j, i).
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[[i, j]] = v;
        self.data[[j, i]] = v;
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }

    pub fn into_array(self) -> Array2<f64> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn frob_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Frobenius distance, accumulated over the upper triangle and mirrored
    /// so the result is identical to the full-matrix sum.
    pub fn frob_dist(&self, other: &SymMatrix) -> Result<f64> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch(format!(
                "matrix sizes differ: {} vs {}",
                self.n, other.n
            )));
        }
        let mut off = 0.0;
        let mut diag = 0.0;
        for i in 0..self.n {
            let d = self.data[[i, i]] - other.data[[i, i]];
            diag += d * d;
            for j in i + 1..self.n {
                let d = self.data[[i, j]] - other.data[[i, j]];
                off += d * d;
            }
        }
        Ok((2.0 * off + diag).sqrt())
    }
}

// ---------------------------------------------------------------------------
// Eigendecomposition
// ---------------------------------------------------------------------------

/// Which end of the spectrum `sym_eig` should return.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigMode {
    /// Largest |lambda| first; on |.| ties the positive value comes first.
    LargestMagnitude,
    /// Algebraically largest first.
    LargestAlgebraic,
    /// Algebraically smallest first.
    SmallestAlgebraic,
}

/// Eigenpairs: `vectors.column(j)` pairs with `values[j]`.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: Array2<f64>,
}

/// Full decomposition, values ascending, deterministic vector signs
/// (largest-magnitude entry of each vector is positive; ties break to the
/// first index).
pub fn sym_eig_full(m: &SymMatrix) -> Result<Eigen> {
    if !m.is_finite() {
        return Err(Error::NonFinite("symmetric eigendecomposition input".into()));
    }
    let n = m.n();
    if n == 0 {
        return Ok(Eigen {
            values: vec![],
            vectors: Array2::zeros((0, 0)),
        });
    }
    let mut v = m.data.clone();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(&mut v, &mut d, &mut e);
    ql_implicit(&mut d, &mut e, Some(&mut v))?;

    let order = order_indices(&d, EigMode::SmallestAlgebraic);
    let mut values = Vec::with_capacity(n);
    let mut vectors = Array2::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        values.push(d[src]);
        let mut col = vectors.column_mut(dst);
        col.assign(&v.column(src));
        canonicalize_sign(col);
    }
    Ok(Eigen { values, vectors })
}

/// The `k` eigenpairs selected by `mode`, in that mode's order.
pub fn sym_eig(m: &SymMatrix, k: usize, mode: EigMode) -> Result<Eigen> {
    let n = m.n();
    if k == 0 || k > n {
        return Err(Error::InvalidParam(format!(
            "requested {k} eigenpairs from a {n}x{n} matrix"
        )));
    }
    let full = sym_eig_full(m)?;
    let order = order_indices(&full.values, mode);
    let mut values = Vec::with_capacity(k);
    let mut vectors = Array2::zeros((n, k));
    for (dst, &src) in order.iter().take(k).enumerate() {
        values.push(full.values[src]);
        vectors.column_mut(dst).assign(&full.vectors.column(src));
    }
    Ok(Eigen { values, vectors })
}

/// All eigenvalues ascending, skipping eigenvector accumulation. Roughly
/// five times cheaper than [`sym_eig_full`]; this is the path batch graph
/// statistics take.
pub fn sym_eig_values(m: &SymMatrix) -> Result<Vec<f64>> {
    if !m.is_finite() {
        return Err(Error::NonFinite("symmetric eigendecomposition input".into()));
    }
    let n = m.n();
    if n == 0 {
        return Ok(vec![]);
    }
    let mut a = m.data.clone();
    let (mut d, mut e) = tridiag_values(&mut a);
    ql_implicit(&mut d, &mut e, None)?;
    d.sort_by(f64::total_cmp);
    Ok(d)
}

/// Index order of `values` under `mode`, stable on exact ties.
pub(crate) fn order_indices(values: &[f64], mode: EigMode) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    match mode {
        EigMode::LargestMagnitude => idx.sort_by(|&a, &b| {
            values[b]
                .abs()
                .total_cmp(&values[a].abs())
                .then(values[b].total_cmp(&values[a]))
                .then(a.cmp(&b))
        }),
        EigMode::LargestAlgebraic => {
            idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)))
        }
        EigMode::SmallestAlgebraic => {
            idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)))
        }
    }
    idx
}

/// Flips a vector so its largest-magnitude entry is positive (first such
/// entry on ties), giving reproducible eigenvector signs.
fn canonicalize_sign(mut col: ndarray::ArrayViewMut1<'_, f64>) {
    let mut best = 0usize;
    let mut best_abs = -1.0;
    for (i, &x) in col.iter().enumerate() {
        let a = x.abs();
        if a > best_abs {
            best_abs = a;
            best = i;
        }
    }
    if col[best] < 0.0 {
        for x in col.iter_mut() {
            *x = -*x;
        }
    }
}

/// Householder reduction to tridiagonal form with accumulation of the
/// orthogonal transform. In-place translation of the classic EISPACK/JAMA
/// `tred2`; on exit `v` holds the transform, `d` the diagonal and `e` the
/// subdiagonal (in `e[1..]`).
fn tred2(v: &mut Array2<f64>, d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    for j in 0..n {
        d[j] = v[[n - 1, j]];
    }

    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for item in d.iter().take(i) {
            scale += item.abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[[i - 1, j]];
                v[[i, j]] = 0.0;
                v[[j, i]] = 0.0;
            }
        } else {
            for item in d.iter_mut().take(i) {
                *item /= scale;
                h += *item * *item;
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for item in e.iter_mut().take(i) {
                *item = 0.0;
            }

            for j in 0..i {
                f = d[j];
                v[[j, i]] = f;
                g = e[j] + v[[j, j]] * f;
                for k in j + 1..i {
                    g += v[[k, j]] * d[k];
                    e[k] += v[[k, j]] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[[k, j]] -= f * e[k] + g * d[k];
                }
                d[j] = v[[i - 1, j]];
                v[[i, j]] = 0.0;
            }
        }
        d[i] = h;
    }

    // Accumulate transformations.
    for i in 0..n.saturating_sub(1) {
        v[[n - 1, i]] = v[[i, i]];
        v[[i, i]] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[[k, i + 1]] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[[k, i + 1]] * v[[k, j]];
                }
                for k in 0..=i {
                    v[[k, j]] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[[k, i + 1]] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[[n - 1, j]];
        v[[n - 1, j]] = 0.0;
    }
    v[[n - 1, n - 1]] = 1.0;
    e[0] = 0.0;
}

/// Values-only Householder reduction using symmetric rank-2 updates over
/// full storage, keeping every inner loop contiguous in memory. Returns
/// `(d, e)` with the subdiagonal in `e[1..]`.
fn tridiag_values(a: &mut Array2<f64>) -> (Vec<f64>, Vec<f64>) {
    let n = a.nrows();
    let mut e = vec![0.0; n];
    let mut u = vec![0.0; n];
    let mut p = vec![0.0; n];

    for i in (1..n).rev() {
        // Householder vector from row i's leading entries.
        let mut scale = 0.0;
        for k in 0..i {
            scale += a[[i, k]].abs();
        }
        if scale == 0.0 || i == 1 {
            e[i] = a[[i, i - 1]];
            continue;
        }
        let mut h = 0.0;
        for k in 0..i {
            u[k] = a[[i, k]] / scale;
            h += u[k] * u[k];
        }
        let f = u[i - 1];
        let g = if f > 0.0 { -h.sqrt() } else { h.sqrt() };
        e[i] = scale * g;
        h -= f * g;
        u[i - 1] = f - g;

        // p = A u / h over the active block, rows are contiguous.
        for (j, pj) in p.iter_mut().enumerate().take(i) {
            let row = a.row(j);
            let mut acc = 0.0;
            for k in 0..i {
                acc += row[k] * u[k];
            }
            *pj = acc / h;
        }
        let mut up = 0.0;
        for k in 0..i {
            up += u[k] * p[k];
        }
        let kappa = up / (2.0 * h);
        for k in 0..i {
            p[k] -= kappa * u[k];
        }

        // A := A - u q^T - q u^T on the active block (q now in p).
        for j in 0..i {
            let uj = u[j];
            let qj = p[j];
            let mut row = a.row_mut(j);
            let row = row.as_slice_mut().expect("row is contiguous");
            for k in 0..i {
                row[k] -= uj * p[k] + qj * u[k];
            }
        }
    }

    let d: Vec<f64> = (0..n).map(|j| a[[j, j]]).collect();
    e[0] = 0.0;
    (d, e)
}

/// Implicitly shifted QL iteration on a tridiagonal matrix, optionally
/// rotating accumulated transforms. EISPACK/JAMA `tql2` with an iteration
/// cap added.
fn ql_implicit(d: &mut [f64], e: &mut [f64], mut vectors: Option<&mut Array2<f64>>) -> Result<()> {
    let n = d.len();
    if n <= 1 {
        return Ok(());
    }
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= QL_EPS * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > QL_MAX_ITER {
                    return Err(Error::NoConvergence(format!(
                        "QL sweep exceeded {QL_MAX_ITER} iterations at index {l}"
                    )));
                }

                // Implicit shift from the leading 2x2.
                let g = d[l];
                let mut pp = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = pp.hypot(1.0);
                if pp < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (pp + r);
                d[l + 1] = e[l] * (pp + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for item in d.iter_mut().take(n).skip(l + 2) {
                    *item -= h;
                }
                f += h;

                // QL transformation, chasing the bulge from m-1 down to l.
                pp = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    h = c * pp;
                    r = pp.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = pp / r;
                    pp = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);

                    if let Some(v) = vectors.as_deref_mut() {
                        for k in 0..v.nrows() {
                            h = v[[k, i + 1]];
                            v[[k, i + 1]] = s * v[[k, i]] + c * h;
                            v[[k, i]] = c * v[[k, i]] - s * h;
                        }
                    }
                }
                pp = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * pp;
                d[l] = c * pp;

                if e[l].abs() <= QL_EPS * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    if d.iter().any(|x| !x.is_finite()) {
        return Err(Error::NoConvergence("QL produced non-finite values".into()));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// k-means
// ---------------------------------------------------------------------------

/// Tuning knobs for [`kmeans`]. Defaults: 20 restarts, 300 iterations,
/// relative WCSS tolerance 1e-8.
#[derive(Debug, Clone)]
pub struct KmeansConfig {
    pub restarts: usize,
    pub max_iter: usize,
    pub rel_tol: f64,
    pub seed: u64,
}

impl Default for KmeansConfig {
    fn default() -> Self {
        KmeansConfig {
            restarts: 20,
            max_iter: 300,
            rel_tol: 1e-8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KmeansOutcome {
    /// Cluster labels in `{1..k}`, one per input row. Degenerate inputs may
    /// leave some labels unused.
    pub labels: Vec<usize>,
    /// Within-cluster sum of squares of the winning restart.
    pub wcss: f64,
    /// Objective value after each Lloyd iteration of the winning restart.
    pub objective_trace: Vec<f64>,
}

/// Lloyd's algorithm with k-means++ seeding and restarts.
///
/// Points are processed in a canonical order (rows sorted lexicographically)
/// so that the outcome — including seeding — is identical under any
/// permutation of the input rows, not merely equal up to label renaming.
/// Labels are then numbered by first appearance in that canonical order.
pub fn kmeans(points: ArrayView2<'_, f64>, k: usize, cfg: &KmeansConfig) -> Result<KmeansOutcome> {
    let t = points.nrows();
    if k == 0 {
        return Err(Error::InvalidParam("k-means needs k >= 1".into()));
    }
    if k > t {
        return Err(Error::TooManyClusters { k, t });
    }
    if points.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("k-means input".into()));
    }

    let mut order: Vec<usize> = (0..t).collect();
    order.sort_by(|&a, &b| lex_cmp(points.row(a), points.row(b)));
    let dim = points.ncols();
    let mut canon = Array2::zeros((t, dim));
    for (dst, &src) in order.iter().enumerate() {
        canon.row_mut(dst).assign(&points.row(src));
    }

    let mut best: Option<(Vec<usize>, f64, Vec<f64>)> = None;
    for restart in 0..cfg.restarts.max(1) {
        let mut r = rng::stream(&[cfg.seed, restart as u64, 0x6b6d_6561_6e73]);
        let centers = seed_plus_plus(canon.view(), k, &mut r);
        let (labels, wcss, trace) = lloyd(canon.view(), centers, cfg);
        if best.as_ref().is_none_or(|(_, w, _)| wcss < *w) {
            best = Some((labels, wcss, trace));
        }
    }
    let (canon_labels, wcss, objective_trace) = best.expect("at least one restart ran");

    // Renumber by first appearance in canonical order, then undo the sort.
    let mut remap = vec![0usize; k];
    let mut next = 0usize;
    let mut labels = vec![0usize; t];
    for (pos, &orig) in order.iter().enumerate() {
        let c = canon_labels[pos];
        if remap[c] == 0 {
            next += 1;
            remap[c] = next;
        }
        labels[orig] = remap[c];
    }
    Ok(KmeansOutcome {
        labels,
        wcss,
        objective_trace,
    })
}

fn lex_cmp(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            other => return other,
        }
    }
    std::cmp::Ordering::Equal
}

fn sq_dist(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum()
}

/// k-means++ seeding over canonically ordered points. When every remaining
/// point coincides with a chosen center (total weight zero), the first
/// unchosen index is taken so seeding still terminates deterministically.
fn seed_plus_plus(
    pts: ArrayView2<'_, f64>,
    k: usize,
    r: &mut rand_chacha::ChaCha12Rng,
) -> Array2<f64> {
    use rand::Rng;
    let t = pts.nrows();
    let mut centers = Array2::zeros((k, pts.ncols()));
    let mut chosen = vec![false; t];

    let first = r.gen_range(0..t);
    centers.row_mut(0).assign(&pts.row(first));
    chosen[first] = true;

    let mut d2: Vec<f64> = (0..t)
        .map(|i| sq_dist(pts.row(i), centers.row(0)))
        .collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let idx = if total > 0.0 && total.is_finite() {
            let u = r.gen::<f64>() * total;
            let mut cum = 0.0;
            let mut pick = t - 1;
            for (i, &w) in d2.iter().enumerate() {
                cum += w;
                if cum > u {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            (0..t).find(|&i| !chosen[i]).unwrap_or(0)
        };
        chosen[idx] = true;
        centers.row_mut(c).assign(&pts.row(idx));
        for i in 0..t {
            let d = sq_dist(pts.row(i), centers.row(c));
            if d < d2[i] {
                d2[i] = d;
            }
        }
    }
    centers
}

fn lloyd(
    pts: ArrayView2<'_, f64>,
    mut centers: Array2<f64>,
    cfg: &KmeansConfig,
) -> (Vec<usize>, f64, Vec<f64>) {
    let t = pts.nrows();
    let k = centers.nrows();
    let dim = pts.ncols();
    let mut labels = vec![0usize; t];
    let mut trace = Vec::new();
    let mut prev = f64::INFINITY;

    for _ in 0..cfg.max_iter.max(1) {
        // Assignment; ties go to the lowest center index.
        let mut wcss = 0.0;
        for i in 0..t {
            let mut best_c = 0;
            let mut best_d = f64::INFINITY;
            for c in 0..k {
                let d = sq_dist(pts.row(i), centers.row(c));
                if d < best_d {
                    best_d = d;
                    best_c = c;
                }
            }
            labels[i] = best_c;
            wcss += best_d;
        }
        trace.push(wcss);
        if prev.is_finite() && prev - wcss <= cfg.rel_tol * prev.max(f64::MIN_POSITIVE) {
            break;
        }
        prev = wcss;

        // Update; an emptied cluster keeps its previous center.
        let mut sums = Array2::<f64>::zeros((k, dim));
        let mut counts = vec![0usize; k];
        for i in 0..t {
            let c = labels[i];
            counts[c] += 1;
            let mut row = sums.row_mut(c);
            row += &pts.row(i);
        }
        for c in 0..k {
            if counts[c] > 0 {
                let inv = 1.0 / counts[c] as f64;
                let mut row = centers.row_mut(c);
                row.assign(&sums.row(c));
                row *= inv;
            }
        }
    }
    let wcss = *trace.last().expect("at least one iteration");
    (labels, wcss, trace)
}
