use nalgebra::linalg::{SymmetricEigen, SVD};
use num_complex::Complex64;

use super::{ensure_finite, matmul, ComplexMatrix, ONE, ZERO};
use crate::error::{dimension, validation, Error, Result};

const HERMITIAN_TOL: f64 = 1e-12;
const NEG_EIGEN_CLAMP: f64 = 1e-10;

/// Full SVD `a = left * diag(singular_values) * rightᴴ` with square unitary
/// factors and singular values sorted descending.
#[derive(Debug, Clone)]
pub struct SvdFactorization {
    /// `rows x rows` unitary.
    pub left: ComplexMatrix,
    /// `min(rows, cols)` values, descending.
    pub singular_values: Vec<f64>,
    /// `cols x cols` unitary.
    pub right: ComplexMatrix,
}

impl SvdFactorization {
    pub fn rows(&self) -> usize {
        self.left.nrows()
    }

    pub fn cols(&self) -> usize {
        self.right.nrows()
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        let p = self.singular_values.len();
        let mut us = self.left.columns(0, p).into_owned();
        for (j, s) in self.singular_values.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        matmul(&us, &self.right.columns(0, p).adjoint())
    }
}

/// Thin QR `a = q * r` of a tall matrix.
#[derive(Debug, Clone)]
pub struct QrFactorization {
    /// `rows x cols`, orthonormal columns.
    pub q: ComplexMatrix,
    /// `cols x cols`, upper triangular.
    pub r: ComplexMatrix,
}

impl QrFactorization {
    /// Smallest `|r_ii| / max_i |r_ii|`; 0 for an empty or zero factor.
    pub fn diagonal_ratio(&self) -> f64 {
        let d: Vec<f64> = (0..self.r.nrows()).map(|i| self.r[(i, i)].norm()).collect();
        let max = d.iter().cloned().fold(0.0, f64::max);
        if max == 0.0 {
            return 0.0;
        }
        d.iter().cloned().fold(f64::INFINITY, f64::min) / max
    }

    /// Solves `r x = rhs` by back substitution.
    pub fn solve_upper(&self, rhs: &[Complex64]) -> Result<Vec<Complex64>> {
        let n = self.r.nrows();
        if rhs.len() != n {
            return Err(dimension(format!("rhs length {} vs R of size {n}", rhs.len())));
        }
        let mut x = rhs.to_vec();
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in i + 1..n {
                acc -= self.r[(i, j)] * x[j];
            }
            let d = self.r[(i, i)];
            if d.norm() == 0.0 {
                return Err(validation("singular triangular factor"));
            }
            x[i] = acc / d;
        }
        Ok(x)
    }
}

/// Threshold policy for [`numerical_rank`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RankTolerance {
    /// `max(rows, cols) * eps * largest singular value`.
    Default { rows: usize, cols: usize },
    /// Count values strictly above this number.
    Absolute(f64),
    /// Count values strictly above `factor * largest`.
    Relative(f64),
}

/// Number of singular values above the threshold set by `tol`.
pub fn numerical_rank(singular_values: &[f64], tol: RankTolerance) -> usize {
    let largest = singular_values.iter().cloned().fold(0.0, f64::max);
    let threshold = match tol {
        RankTolerance::Default { rows, cols } => rows.max(cols) as f64 * f64::EPSILON * largest,
        RankTolerance::Absolute(t) => t,
        RankTolerance::Relative(f) => f * largest,
    };
    singular_values.iter().filter(|&&s| s > threshold).count()
}

/// Principal square root of a Hermitian positive semidefinite matrix.
///
/// Eigenvalues in `[-1e-10, 0)` are clamped to zero. Diagonal inputs take an
/// elementwise shortcut, which keeps identity correlation at large M cheap.
pub fn hermitian_sqrt(c: &ComplexMatrix) -> Result<ComplexMatrix> {
    hermitian_sqrt_with_min_eigenvalue(c).map(|(s, _)| s)
}

/// As [`hermitian_sqrt`], also returning the smallest eigenvalue before
/// clamping.
pub(crate) fn hermitian_sqrt_with_min_eigenvalue(c: &ComplexMatrix) -> Result<(ComplexMatrix, f64)> {
    check_hermitian(c)?;
    let n = c.nrows();
    if is_diagonal(c) {
        let mut s = ComplexMatrix::zeros(n, n);
        let mut min = f64::INFINITY;
        for i in 0..n {
            let d = c[(i, i)].re;
            min = min.min(d);
            if d < -NEG_EIGEN_CLAMP {
                return Err(Error::NotPsd { min_eigenvalue: d });
            }
            s[(i, i)] = Complex64::new(d.max(0.0).sqrt(), 0.0);
        }
        return Ok((s, if n == 0 { 0.0 } else { min }));
    }
    let eig = SymmetricEigen::try_new(c.clone(), f64::EPSILON, 0)
        .ok_or_else(|| validation("Hermitian eigendecomposition did not converge"))?;
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if min < -NEG_EIGEN_CLAMP {
        return Err(Error::NotPsd { min_eigenvalue: min });
    }
    let mut vd = eig.eigenvectors.clone();
    for (j, lambda) in eig.eigenvalues.iter().enumerate() {
        vd.column_mut(j).scale_mut(lambda.max(0.0).sqrt());
    }
    let s = matmul(&vd, &eig.eigenvectors.adjoint());
    // Symmetrize away rounding so the result is exactly Hermitian.
    let s = (&s + s.adjoint()).scale(0.5);
    Ok((s, min))
}

fn check_hermitian(c: &ComplexMatrix) -> Result<()> {
    if c.nrows() != c.ncols() {
        return Err(dimension(format!("expected square matrix, got {}x{}", c.nrows(), c.ncols())));
    }
    ensure_finite(c, "Hermitian input")?;
    let scale = c.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let n = c.nrows();
    for i in 0..n {
        for j in i..n {
            if (c[(i, j)] - c[(j, i)].conj()).norm() > HERMITIAN_TOL * scale {
                return Err(validation(format!("matrix is not Hermitian at ({i}, {j})")));
            }
        }
    }
    Ok(())
}

fn is_diagonal(c: &ComplexMatrix) -> bool {
    let n = c.nrows();
    (0..n).all(|j| (0..n).all(|i| i == j || c[(i, j)] == ZERO))
}

/// Thin SVD: `u` is `rows x p`, `v` is `cols x p`, `p = min(rows, cols)`.
fn svd_thin(a: &ComplexMatrix) -> Result<(ComplexMatrix, Vec<f64>, ComplexMatrix)> {
    ensure_finite(a, "SVD input")?;
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Ok((ComplexMatrix::zeros(m, 0), Vec::new(), ComplexMatrix::zeros(n, 0)));
    }
    let svd = SVD::try_new(a.clone(), true, true, f64::EPSILON, 0)
        .ok_or_else(|| validation("SVD did not converge"))?;
    let u = svd.u.expect("requested U");
    let v = svd.v_t.expect("requested Vt").adjoint();
    Ok((u, svd.singular_values.iter().cloned().collect(), v))
}

/// Full SVD with square unitary factors.
pub fn svd(a: &ComplexMatrix) -> Result<SvdFactorization> {
    let (m, n) = a.shape();
    let (u, s, v) = svd_thin(a)?;
    let left = if u.ncols() < m { hstack(&u, &orthonormal_completion(&u)?) } else { u };
    let right = if v.ncols() < n { hstack(&v, &orthonormal_completion(&v)?) } else { v };
    Ok(SvdFactorization {
        left,
        singular_values: s,
        right,
    })
}

fn hstack(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}

/// Householder reflector `I - beta v vᴴ` acting on rows `start..`.
struct Reflector {
    start: usize,
    v: Vec<Complex64>,
    beta: f64,
}

impl Reflector {
    fn apply(&self, x: &mut ComplexMatrix, from_col: usize) {
        if self.beta == 0.0 {
            return;
        }
        let len = self.v.len();
        let rows = x.nrows();
        let data = x.as_mut_slice();
        for c in from_col..data.len() / rows.max(1) {
            let off = c * rows + self.start;
            let seg = &mut data[off..off + len];
            let s: Complex64 = self.v.iter().zip(seg.iter()).map(|(v, x)| v.conj() * x).sum();
            if s == ZERO {
                continue;
            }
            let f = s * self.beta;
            for (xi, vi) in seg.iter_mut().zip(self.v.iter()) {
                *xi -= f * vi;
            }
        }
    }
}

/// Householder triangularization of the first `min(rows, cols)` columns.
/// On return `a` holds R in its upper triangle and zeros below.
fn householder(a: &mut ComplexMatrix) -> Vec<Reflector> {
    let (m, n) = a.shape();
    let p = m.min(n);
    let mut out = Vec::with_capacity(p);
    for j in 0..p {
        let x: Vec<Complex64> = (j..m).map(|i| a[(i, j)]).collect();
        let norm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            out.push(Reflector { start: j, v: x, beta: 0.0 });
            continue;
        }
        let phase = if x[0].norm() > 0.0 { x[0] / x[0].norm() } else { ONE };
        let alpha = -phase * norm;
        let mut v = x;
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        let r = Reflector {
            start: j,
            v,
            beta: 2.0 / vnorm2,
        };
        r.apply(a, j + 1);
        a[(j, j)] = alpha;
        for i in j + 1..m {
            a[(i, j)] = ZERO;
        }
        out.push(r);
    }
    out
}

/// Thin QR of a matrix with at least as many rows as columns.
pub fn thin_qr(a: &ComplexMatrix) -> Result<QrFactorization> {
    let (m, n) = a.shape();
    if m < n {
        return Err(dimension(format!("thin QR needs rows >= cols, got {m}x{n}")));
    }
    ensure_finite(a, "QR input")?;
    let mut work = a.clone();
    let reflectors = householder(&mut work);
    let r = work.rows(0, n).into_owned();
    let mut q = ComplexMatrix::zeros(m, n);
    for i in 0..n {
        q[(i, i)] = ONE;
    }
    for refl in reflectors.iter().rev() {
        refl.apply(&mut q, 0);
    }
    Ok(QrFactorization { q, r })
}

/// Orthonormal basis of the orthogonal complement of the column space of `y`,
/// which must have orthonormal (or at least full-rank) columns.
pub fn orthonormal_completion(y: &ComplexMatrix) -> Result<ComplexMatrix> {
    let (n, r) = y.shape();
    if r > n {
        return Err(dimension(format!("cannot complete {n}x{r}: more columns than rows")));
    }
    let mut work = y.clone();
    let reflectors = householder(&mut work);
    let mut e = ComplexMatrix::zeros(n, n - r);
    for i in 0..n - r {
        e[(r + i, i)] = ONE;
    }
    for refl in reflectors.iter().rev() {
        refl.apply(&mut e, 0);
    }
    Ok(e)
}

/// Orthonormal basis of the row space of `h` (as columns, `cols x rank`) and
/// the numerical rank.
pub fn row_space_basis(h: &ComplexMatrix) -> Result<(ComplexMatrix, usize)> {
    let (m, n) = h.shape();
    let (_, s, v) = svd_thin(h)?;
    let rank = numerical_rank(&s, RankTolerance::Default { rows: m, cols: n });
    Ok((v.columns(0, rank).into_owned(), rank))
}

/// Orthonormal basis of the right null space of a wide matrix.
///
/// Returns `cols x (cols - rank)`; `h * basis` vanishes to rounding.
pub fn null_space_basis(h: &ComplexMatrix) -> Result<ComplexMatrix> {
    let (m, n) = h.shape();
    if m >= n {
        return Err(dimension(format!("null space basis needs rows < cols, got {m}x{n}")));
    }
    let (row_basis, _) = row_space_basis(h)?;
    orthonormal_completion(&row_basis)
}
