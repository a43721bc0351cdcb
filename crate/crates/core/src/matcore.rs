//! Dense matrix storage and the small dense kernels everything else builds on.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{PodError, Result};
use crate::par;

/// Column-major dense real matrix with finite entries and nonzero dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    data: DMatrix<f64>,
}

impl DenseMatrix {
    pub fn from_column_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(PodError::shape(format!("matrix must be nonempty, got {rows}x{cols}")));
        }
        if data.len() != rows * cols {
            return Err(PodError::shape(format!(
                "{} values supplied for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Self::from_dmatrix(DMatrix::from_vec(rows, cols, data))
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(PodError::shape(format!(
                "{} values supplied for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Self::from_dmatrix(DMatrix::from_row_slice(rows, cols, &data))
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        Self::from_dmatrix(DMatrix::from_fn(rows, cols, f))
    }

    pub fn from_dmatrix(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(PodError::shape(format!(
                "matrix must be nonempty, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(PodError::NonFinite {
                row: pos % data.nrows(),
                col: pos / data.nrows(),
            });
        }
        Ok(DenseMatrix { data })
    }

    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn cols(&self) -> usize {
        self.data.ncols()
    }

    /// Column-major values.
    pub fn as_slice(&self) -> &[f64] {
        self.data.as_slice()
    }

    pub fn as_mat(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[(row, col)]
    }

    pub fn column(&self, j: usize) -> &[f64] {
        let m = self.rows();
        &self.data.as_slice()[j * m..(j + 1) * m]
    }

    /// Copies the listed columns, in order, into a new matrix.
    pub fn select_columns(&self, indices: &[usize]) -> DMatrix<f64> {
        let m = self.rows();
        let mut out = DMatrix::zeros(m, indices.len());
        for (dst, &src) in indices.iter().enumerate() {
            out.column_mut(dst).copy_from_slice(self.column(src));
        }
        out
    }

    /// Contiguous block of `len` columns starting at `start`.
    pub fn column_block(&self, start: usize, len: usize) -> Result<DenseMatrix> {
        if len == 0 || start + len > self.cols() {
            return Err(PodError::shape(format!(
                "column block {start}..{} outside 0..{}",
                start + len,
                self.cols()
            )));
        }
        let m = self.rows();
        let data = self.data.as_slice()[start * m..(start + len) * m].to_vec();
        Ok(DenseMatrix {
            data: DMatrix::from_vec(m, len, data),
        })
    }

    pub fn transpose(&self) -> DenseMatrix {
        DenseMatrix {
            data: self.data.transpose(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.norm()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.amax()
    }
}

/// Truncated singular factor `(U, Σ, V?)`.
///
/// `sigma` is nonincreasing and nonnegative. Columns of `u` (and `v`) are
/// orthonormal for exact decompositions; sampled factors are only
/// approximately so, see [`TruncatedFactor::orthonormality_error`].
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedFactor {
    u: DMatrix<f64>,
    sigma: DVector<f64>,
    v: Option<DMatrix<f64>>,
}

impl TruncatedFactor {
    pub fn new(u: DMatrix<f64>, sigma: DVector<f64>, v: Option<DMatrix<f64>>) -> Result<Self> {
        let l = sigma.len();
        if u.ncols() != l {
            return Err(PodError::shape(format!(
                "u has {} columns but {} singular values",
                u.ncols(),
                l
            )));
        }
        if let Some(v) = &v {
            if v.ncols() != l {
                return Err(PodError::shape(format!(
                    "v has {} columns but {} singular values",
                    v.ncols(),
                    l
                )));
            }
        }
        if l > u.nrows() {
            return Err(PodError::shape(format!("{l} modes exceed {} rows", u.nrows())));
        }
        for i in 0..l {
            let s = sigma[i];
            if !s.is_finite() || s < 0.0 {
                return Err(PodError::param(format!("singular value {i} is {s}")));
            }
            if i > 0 && s > sigma[i - 1] {
                return Err(PodError::param("singular values must be nonincreasing"));
            }
        }
        Ok(TruncatedFactor { u, sigma, v })
    }

    /// Factor with zero modes over `rows`-dimensional space.
    pub fn empty(rows: usize) -> Self {
        TruncatedFactor {
            u: DMatrix::zeros(rows, 0),
            sigma: DVector::zeros(0),
            v: None,
        }
    }

    /// Number of retained modes.
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }

    pub fn rows(&self) -> usize {
        self.u.nrows()
    }

    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn sigma(&self) -> &DVector<f64> {
        &self.sigma
    }

    pub fn v(&self) -> Option<&DMatrix<f64>> {
        self.v.as_ref()
    }

    pub fn into_parts(self) -> (DMatrix<f64>, DVector<f64>, Option<DMatrix<f64>>) {
        (self.u, self.sigma, self.v)
    }

    /// Keeps the leading `r` modes.
    pub fn truncate(&self, r: usize) -> TruncatedFactor {
        let l = r.min(self.rank());
        TruncatedFactor {
            u: self.u.columns(0, l).into_owned(),
            sigma: self.sigma.rows(0, l).into_owned(),
            v: self.v.as_ref().map(|v| v.columns(0, l).into_owned()),
        }
    }

    pub fn without_v(mut self) -> TruncatedFactor {
        self.v = None;
        self
    }

    /// `‖UᵀU − I‖_max`.
    pub fn orthonormality_error(&self) -> f64 {
        orthonormality_error(&self.u)
    }

    /// Flips each mode so the largest-magnitude entry of its left vector is positive.
    pub fn canonicalize_signs(&mut self) {
        for j in 0..self.rank() {
            if leading_entry_negative(self.u.column(j).as_slice()) {
                self.u.column_mut(j).neg_mut();
                if let Some(v) = &mut self.v {
                    v.column_mut(j).neg_mut();
                }
            }
        }
    }
}

fn leading_entry_negative(col: &[f64]) -> bool {
    let mut best = 0.0f64;
    let mut neg = false;
    for &x in col {
        if x.abs() > best {
            best = x.abs();
            neg = x < 0.0;
        }
    }
    neg
}

/// `‖QᵀQ − I‖_max` for a matrix with (supposedly) orthonormal columns.
pub fn orthonormality_error(q: &DMatrix<f64>) -> f64 {
    let mut g = q.tr_mul(q);
    for i in 0..g.nrows() {
        g[(i, i)] -= 1.0;
    }
    if g.is_empty() {
        0.0
    } else {
        g.amax()
    }
}

/// Subtracts each row's mean from that row.
pub fn mean_center_rows(a: &DenseMatrix) -> DenseMatrix {
    let n = a.cols() as f64;
    let means = a.data.column_sum() / n;
    let mut data = a.data.clone();
    for mut col in data.column_iter_mut() {
        col -= &means;
    }
    DenseMatrix { data }
}

fn eigen_iteration_cap(rows: usize, cols: usize) -> usize {
    10_000 + 100 * (rows + cols)
}

/// Thin SVD of an arbitrary (possibly empty) matrix: `(U, σ, V)` sorted descending.
///
/// Backed by faer. nalgebra's own SVD loses accuracy in the singular vectors
/// of some rank-deficient inputs (repeated columns, which sampling produces
/// routinely), so only storage and products stay on nalgebra.
pub(crate) fn svd_parts(a: &DMatrix<f64>) -> Result<(DMatrix<f64>, DVector<f64>, DMatrix<f64>)> {
    let (m, n) = a.shape();
    let l = m.min(n);
    if l == 0 {
        return Ok((DMatrix::zeros(m, l), DVector::zeros(l), DMatrix::zeros(n, l)));
    }
    let fa = faer::Mat::<f64>::from_fn(m, n, |i, j| a[(i, j)]);
    let svd = fa
        .thin_svd()
        .map_err(|e| PodError::NonConvergence(format!("SVD of {m}x{n} matrix: {e:?}")))?;
    let (fu, fs, fv) = (svd.U(), svd.S().column_vector(), svd.V());
    let u = DMatrix::from_fn(m, l, |i, j| fu[(i, j)]);
    let v = DMatrix::from_fn(n, l, |i, j| fv[(i, j)]);
    let s = DVector::from_fn(l, |i, _| fs[i].max(0.0));
    if s.iter().chain(u.iter()).chain(v.iter()).any(|x| !x.is_finite()) {
        return Err(PodError::NonConvergence(format!("SVD of {m}x{n} matrix produced non-finite output")));
    }
    Ok((u, s, v))
}

/// Full thin SVD with `v` present and the sign convention applied.
pub fn dense_svd(a: &DenseMatrix) -> Result<TruncatedFactor> {
    let (u, s, v) = svd_parts(&a.data)?;
    let mut f = TruncatedFactor::new(u, s, Some(v))?;
    f.canonicalize_signs();
    Ok(f)
}

/// Householder thin QR with `diag(R) ≥ 0`.
pub(crate) fn qr_parts(a: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let (m, n) = a.shape();
    if n == 0 {
        return (DMatrix::zeros(m, 0), DMatrix::zeros(0, 0));
    }
    let qr = a.clone().qr();
    let mut q = qr.q();
    let mut r = qr.r();
    for i in 0..r.nrows() {
        if r[(i, i)] < 0.0 {
            r.row_mut(i).neg_mut();
            q.column_mut(i).neg_mut();
        }
    }
    (q, r)
}

/// Thin QR of a matrix with at least as many rows as columns.
pub fn thin_qr(a: &DenseMatrix) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if a.rows() < a.cols() {
        return Err(PodError::shape(format!(
            "thin QR needs rows >= cols, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    Ok(qr_parts(&a.data))
}

/// Relative eigenvalue floor below which a Gram-route mode is numerically zero.
///
/// Forming `DᵀD` squares the spectrum, so eigenvalues under roughly
/// `dim·ε·λ₁` carry no information about the corresponding direction.
pub(crate) fn gram_rank_tolerance(rows: usize, cols: usize) -> f64 {
    rows.max(cols).max(1) as f64 * f64::EPSILON
}

/// Eigen-pairs of a symmetric PSD matrix, sorted by decreasing eigenvalue.
pub(crate) fn sorted_eigen(g: DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = g.nrows();
    if n == 0 {
        return Ok((DVector::zeros(0), DMatrix::zeros(0, 0)));
    }
    let eig = SymmetricEigen::try_new(g, f64::EPSILON, eigen_iteration_cap(n, n))
        .ok_or_else(|| PodError::NonConvergence(format!("eigen-decomposition of {n}x{n} Gram matrix")))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]).then(i.cmp(&j)));
    let vals = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i].max(0.0)));
    let mut vecs = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vecs.column_mut(dst).copy_from(&eig.eigenvectors.column(src));
    }
    Ok((vals, vecs))
}

/// Left factor of `left` using right vectors taken from a Gram matrix.
///
/// `gram` is `XᵀX` for some `X` sharing its column space with `left`
/// (`X = left` for plain column sampling, the row-sampled `Y` otherwise).
/// Returns at most `max_modes` modes with `uᵢ = left·vᵢ/σᵢ`, dropping
/// modes at or below the numerical-zero floor. `keep_v` retains the
/// right vectors.
pub(crate) fn factor_from_gram(
    left: &DMatrix<f64>,
    gram: DMatrix<f64>,
    max_modes: usize,
    keep_v: bool,
    floor_dims: (usize, usize),
) -> Result<TruncatedFactor> {
    let (vals, vecs) = sorted_eigen(gram)?;
    let top = vals.iter().copied().next().unwrap_or(0.0);
    let tol = gram_rank_tolerance(floor_dims.0, floor_dims.1) * top;
    let l = vals
        .iter()
        .take(max_modes)
        .take_while(|&&lam| top > 0.0 && lam > tol)
        .count();
    if l == 0 {
        return Ok(TruncatedFactor::empty(left.nrows()));
    }
    let sigma = DVector::from_iterator(l, vals.iter().take(l).map(|lam| lam.sqrt()));
    let v = vecs.columns(0, l).into_owned();
    let mut u = par::mul(left, &v);
    for j in 0..l {
        u.column_mut(j).unscale_mut(sigma[j]);
    }
    let mut f = TruncatedFactor::new(u, sigma, keep_v.then_some(v))?;
    f.canonicalize_signs();
    Ok(f)
}

/// Exact reference POD through the eigen-decomposition of `AᵀA`.
///
/// Squares the condition number of `a`; [`dense_svd`] is the accurate path.
/// Modes with zero singular value are dropped, so fewer than `k` may return.
pub fn pod_via_gram(a: &DenseMatrix, k: usize) -> Result<TruncatedFactor> {
    let limit = a.rows().min(a.cols());
    if k == 0 || k > limit {
        return Err(PodError::param(format!("k = {k} must lie in 1..={limit}")));
    }
    let g = par::gram(&a.data);
    factor_from_gram(&a.data, g, k, true, (a.rows(), a.cols()))
}

/// QR of `u` followed by an SVD of its `R`: returns `(Q·U_R, σ(R))`.
pub fn orthonormalize(u: &DMatrix<f64>) -> Result<(DMatrix<f64>, DVector<f64>)> {
    if u.nrows() < u.ncols() {
        return Err(PodError::shape(format!(
            "orthonormalize needs rows >= cols, got {}x{}",
            u.nrows(),
            u.ncols()
        )));
    }
    let (q, r) = qr_parts(u);
    let (ur, s, _) = svd_parts(&r)?;
    Ok((par::mul(&q, &ur), s))
}

#[cfg(test)]
pub(crate) mod oracle {
    //! One-sided Jacobi SVD, written independently of the nalgebra path.
    use nalgebra::{DMatrix, DVector};

    /// Returns `(U, σ, V)` with σ descending; `a` must have rows >= cols.
    pub fn jacobi_svd(a: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
        let (m, n) = a.shape();
        assert!(m >= n);
        let mut w = a.clone();
        let mut v = DMatrix::<f64>::identity(n, n);
        for _sweep in 0..100 {
            let mut rotated = false;
            for p in 0..n {
                for q in p + 1..n {
                    let alpha: f64 = w.column(p).norm_squared();
                    let beta: f64 = w.column(q).norm_squared();
                    let gamma: f64 = w.column(p).dot(&w.column(q));
                    if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                        continue;
                    }
                    rotated = true;
                    let zeta = (beta - alpha) / (2.0 * gamma);
                    let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                    let t = if zeta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = c * t;
                    for i in 0..m {
                        let (x, y) = (w[(i, p)], w[(i, q)]);
                        w[(i, p)] = c * x - s * y;
                        w[(i, q)] = s * x + c * y;
                    }
                    for i in 0..n {
                        let (x, y) = (v[(i, p)], v[(i, q)]);
                        v[(i, p)] = c * x - s * y;
                        v[(i, q)] = s * x + c * y;
                    }
                }
            }
            if !rotated {
                break;
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        let norms: Vec<f64> = (0..n).map(|j| w.column(j).norm()).collect();
        order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap());
        let mut u = DMatrix::zeros(m, n);
        let mut vs = DMatrix::zeros(n, n);
        let mut s = DVector::zeros(n);
        for (dst, &src) in order.iter().enumerate() {
            s[dst] = norms[src];
            if norms[src] > 0.0 {
                u.column_mut(dst).copy_from(&(w.column(src) / norms[src]));
            }
            vs.column_mut(dst).copy_from(&v.column(src));
        }
        (u, s, vs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{gaussian_matrix, matrix_with_spectrum};
    use proptest::prelude::*;

    fn dm(rows: usize, cols: usize, row_major: &[f64]) -> DenseMatrix {
        DenseMatrix::from_row_major(rows, cols, row_major.to_vec()).unwrap()
    }

    #[test]
    fn rejects_nonfinite_and_empty() {
        assert!(matches!(
            DenseMatrix::from_column_major(2, 1, vec![1.0, f64::NAN]),
            Err(PodError::NonFinite { row: 1, col: 0 })
        ));
        assert!(DenseMatrix::from_column_major(0, 3, vec![]).is_err());
        assert!(DenseMatrix::from_column_major(2, 2, vec![1.0; 3]).is_err());
    }

    #[test]
    fn center_constant_rows_gives_zero() {
        let a = DenseMatrix::from_fn(3, 4, |_, _| 5.0).unwrap();
        assert_eq!(mean_center_rows(&a).max_abs(), 0.0);
    }

    #[test]
    fn center_simple_row() {
        let c = mean_center_rows(&dm(1, 3, &[1.0, 2.0, 3.0]));
        assert_eq!(c.as_slice(), &[-1.0, 0.0, 1.0]);
    }

    #[test]
    fn center_leaves_centered_rows_alone() {
        let a = dm(2, 3, &[1.0, -2.0, 1.0, 0.5, 0.0, -0.5]);
        assert_eq!(mean_center_rows(&a), a);
    }

    #[test]
    fn svd_of_identity_and_diagonal() {
        let i3 = DenseMatrix::from_dmatrix(DMatrix::identity(3, 3)).unwrap();
        let f = dense_svd(&i3).unwrap();
        assert_eq!(f.sigma().as_slice(), &[1.0, 1.0, 1.0]);
        let d = dm(3, 3, &[1.0, 0.0, 0.0, 0.0, 3.0, 0.0, 0.0, 0.0, 2.0]);
        let f = dense_svd(&d).unwrap();
        for (s, e) in f.sigma().iter().zip([3.0, 2.0, 1.0]) {
            assert!((s - e).abs() < 1e-14);
        }
        assert!(f.u()[(1, 0)] > 0.0);
    }

    #[test]
    fn svd_matches_jacobi_oracle() {
        let a = gaussian_matrix(8, 5, 11);
        let f = dense_svd(&a).unwrap();
        let (uj, sj, _) = oracle::jacobi_svd(a.as_mat());
        for i in 0..5 {
            assert!((f.sigma()[i] - sj[i]).abs() <= 1e-8 * sj[0]);
            let c = f.u().column(i).dot(&uj.column(i)).abs();
            assert!((c - 1.0).abs() < 1e-8, "mode {i}: |cos| = {c}");
        }
    }

    #[test]
    fn svd_reconstructs_wide_input() {
        let a = gaussian_matrix(6, 11, 3);
        let f = dense_svd(&a).unwrap();
        let v = f.v().unwrap();
        let rec = f.u() * DMatrix::from_diagonal(f.sigma()) * v.transpose();
        assert!((rec - a.as_mat()).norm() <= 1e-8 * a.frobenius_norm());
    }

    #[test]
    fn svd_of_repeated_column_block() {
        let col = [-1.2000999023349022, -0.15777144024165216, 0.9347056435130758];
        let a = DenseMatrix::from_fn(3, 6, |i, _| col[i] / 6f64.sqrt()).unwrap();
        let norm = col.iter().map(|x| x * x).sum::<f64>().sqrt();
        let f = dense_svd(&a).unwrap();
        assert!((f.sigma()[0] - norm).abs() < 1e-13 * norm);
    }

    #[test]
    fn qr_of_orthonormal_input_is_identity_r() {
        let (q0, _) = qr_parts(gaussian_matrix(10, 3, 5).as_mat());
        let (q, r) = thin_qr(&DenseMatrix::from_dmatrix(q0.clone()).unwrap()).unwrap();
        assert!((r - DMatrix::<f64>::identity(3, 3)).amax() < 1e-12);
        assert!((q - q0).amax() < 1e-12);
    }

    #[test]
    fn qr_single_column() {
        let x = dm(3, 1, &[3.0, 0.0, 4.0]);
        let (q, r) = thin_qr(&x).unwrap();
        assert!((r[(0, 0)] - 5.0).abs() < 1e-14);
        assert!((q[(0, 0)] - 0.6).abs() < 1e-14 && (q[(2, 0)] - 0.8).abs() < 1e-14);
    }

    #[test]
    fn qr_duplicate_columns_rank_deficient() {
        let x = dm(3, 2, &[1.0, 1.0, 2.0, 2.0, -1.0, -1.0]);
        let (q, r) = thin_qr(&x).unwrap();
        assert!(r[(1, 1)].abs() < 1e-14);
        assert!(orthonormality_error(&q) < 1e-8);
        assert!((&q * &r - x.as_mat()).norm() < 1e-12);
        assert!(thin_qr(&x.transpose()).is_err());
    }

    #[test]
    fn gram_identity_and_rank_one() {
        let i5 = DenseMatrix::from_dmatrix(DMatrix::identity(5, 5)).unwrap();
        let f = pod_via_gram(&i5, 2).unwrap();
        assert_eq!(f.rank(), 2);
        assert!(f.sigma().iter().all(|s| (s - 1.0).abs() < 1e-14));

        let x = [1.0, -2.0, 0.5, 3.0];
        let y = [2.0, 1.0, -1.0];
        let a = DenseMatrix::from_fn(4, 3, |i, j| x[i] * y[j]).unwrap();
        let f = pod_via_gram(&a, 3).unwrap();
        assert_eq!(f.rank(), 1);
        let expect = x.iter().map(|v| v * v).sum::<f64>().sqrt() * y.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((f.sigma()[0] - expect).abs() < 1e-12 * expect);
        assert!(matches!(pod_via_gram(&a, 4), Err(PodError::Parameter(_))));
    }

    #[test]
    fn gram_matches_dense_svd_modes() {
        let a = gaussian_matrix(200, 40, 21);
        let g = pod_via_gram(&a, 10).unwrap();
        let d = dense_svd(&a).unwrap();
        for i in 0..10 {
            assert!((g.sigma()[i] - d.sigma()[i]).abs() <= 1e-6 * d.sigma()[i]);
            let c = g.u().column(i).dot(&d.u().column(i)).abs().min(1.0);
            assert!(c.acos().to_degrees() < 1e-5, "mode {i}");
        }
    }

    #[test]
    fn orthonormalize_cases() {
        let (q0, _) = qr_parts(gaussian_matrix(12, 3, 8).as_mat());
        let (q, s) = orthonormalize(&q0).unwrap();
        assert!(s.iter().all(|x| (x - 1.0).abs() < 1e-12));
        // same span: projection of q0 onto q is lossless
        assert!((&q * q.tr_mul(&q0) - &q0).amax() < 1e-12);

        let mut z = gaussian_matrix(12, 3, 9).into_inner();
        z.column_mut(1).fill(0.0);
        let (_, s) = orthonormalize(&z).unwrap();
        assert!(s[2].abs() < 1e-12);

        let u = gaussian_matrix(50, 5, 10).into_inner();
        let (q, _) = orthonormalize(&u).unwrap();
        assert!(orthonormality_error(&q) < 1e-10);
    }

    #[test]
    fn sign_convention_is_applied() {
        let a = gaussian_matrix(30, 6, 4);
        let f = dense_svd(&a).unwrap();
        for j in 0..f.rank() {
            assert!(!leading_entry_negative(f.u().column(j).as_slice()));
        }
    }

    #[test]
    fn ill_conditioned_svd_stays_orthonormal() {
        let spectrum: Vec<f64> = (0..20).map(|i| 10f64.powf(-8.0 * i as f64 / 19.0)).collect();
        let a = matrix_with_spectrum(60, 20, &spectrum, 2);
        let f = dense_svd(&a).unwrap();
        assert!(f.orthonormality_error() < 1e-8);
        let rec = f.u() * DMatrix::from_diagonal(f.sigma()) * f.v().unwrap().transpose();
        assert!((rec - a.as_mat()).norm() <= 1e-8 * a.frobenius_norm());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn centering_is_idempotent(seed in any::<u64>(), m in 1usize..12, n in 1usize..12) {
            let a = gaussian_matrix(m, n, seed);
            let once = mean_center_rows(&a);
            let twice = mean_center_rows(&once);
            prop_assert!((once.as_mat() - twice.as_mat()).amax() <= 1e-12 * (1.0 + a.max_abs()));
            for i in 0..m {
                let s: f64 = once.as_mat().row(i).sum();
                prop_assert!(s.abs() <= 1e-10 * n as f64 * a.max_abs().max(1.0));
            }
        }

        #[test]
        fn gram_sigma_tracks_dense_svd(seed in any::<u64>(), m in 20usize..300, n in 5usize..100, k in 1usize..5) {
            let n = n.min(m);
            let a = gaussian_matrix(m, n, seed);
            let g = pod_via_gram(&a, k).unwrap();
            let d = dense_svd(&a).unwrap();
            for i in 0..g.rank() {
                prop_assert!((g.sigma()[i] - d.sigma()[i]).abs() <= 1e-6 * d.sigma()[i]);
            }
        }

        #[test]
        fn svd_reconstruction_under_conditioning(seed in any::<u64>(), m in 2usize..40, n in 2usize..40, logc in 0.0f64..8.0) {
            let l = m.min(n);
            let spectrum: Vec<f64> = (0..l).map(|i| 10f64.powf(-logc * i as f64 / (l.max(2) - 1) as f64)).collect();
            let a = matrix_with_spectrum(m, n, &spectrum, seed);
            let f = dense_svd(&a).unwrap();
            let rec = f.u() * DMatrix::from_diagonal(f.sigma()) * f.v().unwrap().transpose();
            prop_assert!((rec - a.as_mat()).norm() <= 1e-8 * a.frobenius_norm());
            prop_assert!(f.orthonormality_error() <= 1e-8);
            prop_assert!(orthonormality_error(f.v().unwrap()) <= 1e-8);
        }
    }
}
