//! Dense complex linear algebra used by the channel, receiver and asymptotic
//! modules.
//!
//! Matrices are `nalgebra` dynamic matrices of [`Complex64`]. Products go
//! through `matrixmultiply`'s packed complex GEMM, which is several times
//! faster than the generic nalgebra path for the sizes used in sweeps
//! (M up to a few thousand antennas).

mod decomp;
mod rng;

pub use decomp::{
    hermitian_sqrt, null_space_basis, numerical_rank, orthonormal_completion, row_space_basis,
    svd, thin_qr, QrFactorization, RankTolerance, SvdFactorization,
};
pub(crate) use decomp::hermitian_sqrt_with_min_eigenvalue;
pub use rng::{sample_complex_gaussian, RngStream};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{validation, Result};

pub type ComplexMatrix = DMatrix<Complex64>;
pub type ComplexVector = DVector<Complex64>;

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub(crate) const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// `a * b` through the packed complex GEMM kernel.
///
/// # Panics
/// If the inner dimensions disagree.
pub fn matmul(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    assert_eq!(
        a.ncols(),
        b.nrows(),
        "matmul: {}x{} times {}x{}",
        a.nrows(),
        a.ncols(),
        b.nrows(),
        b.ncols()
    );
    let (m, k, n) = (a.nrows(), a.ncols(), b.ncols());
    let mut c = ComplexMatrix::zeros(m, n);
    if m == 0 || n == 0 || k == 0 {
        return c;
    }
    // SAFETY: Complex64 is repr(C) {re, im}, layout-identical to [f64; 2].
    // All three buffers are column-major with the strides given, and `c` is a
    // distinct allocation from `a` and `b`.
    unsafe {
        matrixmultiply::zgemm(
            matrixmultiply::CGemmOption::Standard,
            matrixmultiply::CGemmOption::Standard,
            m,
            k,
            n,
            [1.0, 0.0],
            a.as_ptr() as *const [f64; 2],
            1,
            m as isize,
            b.as_ptr() as *const [f64; 2],
            1,
            k as isize,
            [0.0, 0.0],
            c.as_mut_ptr() as *mut [f64; 2],
            1,
            m as isize,
        );
    }
    c
}

/// `aᴴ * b`.
pub fn adjoint_mul(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    matmul(&a.adjoint(), b)
}

/// Frobenius norm.
pub fn fro_norm(a: &ComplexMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Euclidean norm of a column vector.
pub fn vec_norm(v: &ComplexVector) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `xᴴ y`.
pub fn inner(x: &ComplexVector, y: &ComplexVector) -> Complex64 {
    x.iter().zip(y.iter()).map(|(a, b)| a.conj() * b).sum()
}

pub(crate) fn ensure_finite(a: &ComplexMatrix, what: &str) -> Result<()> {
    if a.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(validation(format!("{what} has non-finite entries")))
    }
}

/// Column `j` of `a` as an owned vector.
pub(crate) fn column(a: &ComplexMatrix, j: usize) -> ComplexVector {
    a.column(j).into_owned()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
        let mut c = ComplexMatrix::zeros(a.nrows(), b.ncols());
        for i in 0..a.nrows() {
            for j in 0..b.ncols() {
                for l in 0..a.ncols() {
                    c[(i, j)] += a[(i, l)] * b[(l, j)];
                }
            }
        }
        c
    }

    #[test]
    fn gemm_matches_triple_loop() {
        let mut rng = RngStream::new(3, 0);
        let a = sample_complex_gaussian(7, 5, 1.0, &mut rng).unwrap();
        let b = sample_complex_gaussian(5, 9, 1.0, &mut rng).unwrap();
        let diff = fro_norm(&(matmul(&a, &b) - naive(&a, &b)));
        assert!(diff < 1e-12, "{diff}");
        let ah = adjoint_mul(&a, &a);
        assert!(fro_norm(&(ah - a.adjoint() * &a)) < 1e-12);
    }

    #[test]
    fn gemm_empty_inner_dimension() {
        let a = ComplexMatrix::zeros(3, 0);
        let b = ComplexMatrix::zeros(0, 2);
        assert_eq!(matmul(&a, &b), ComplexMatrix::zeros(3, 2));
    }
}
