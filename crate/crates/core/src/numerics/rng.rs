use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::ComplexMatrix;
use crate::error::{validation, Result};
use num_complex::Complex64;

/// Seeded random substream.
///
/// Two streams with the same `(seed, stream_id)` produce the same sequence no
/// matter which thread or in which order they are consumed. Each concurrent
/// task should own its own stream.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        // 53 random mantissa bits.
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// One circularly-symmetric complex Gaussian with total variance `variance`.
    pub fn complex_gaussian(&mut self, variance: f64) -> Complex64 {
        let s = (variance / 2.0).sqrt();
        let re = self.standard_normal();
        let im = self.standard_normal();
        Complex64::new(s * re, s * im)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// `rows x cols` matrix of i.i.d. CN(0, variance) entries, drawn in row-major
/// order.
pub fn sample_complex_gaussian(
    rows: usize,
    cols: usize,
    variance: f64,
    rng: &mut RngStream,
) -> Result<ComplexMatrix> {
    if !(variance >= 0.0) || !variance.is_finite() {
        return Err(validation(format!(
            "complex Gaussian variance must be finite and >= 0, got {variance}"
        )));
    }
    let mut out = ComplexMatrix::zeros(rows, cols);
    if variance == 0.0 {
        return Ok(out);
    }
    for i in 0..rows {
        for j in 0..cols {
            out[(i, j)] = rng.complex_gaussian(variance);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_variance_gives_zeros() {
        let mut rng = RngStream::new(1, 2);
        let z = sample_complex_gaussian(4, 3, 0.0, &mut rng).unwrap();
        assert!(z.iter().all(|v| *v == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn negative_variance_rejected() {
        let mut rng = RngStream::new(1, 2);
        assert!(sample_complex_gaussian(2, 2, -1.0, &mut rng).is_err());
        assert!(sample_complex_gaussian(2, 2, f64::NAN, &mut rng).is_err());
    }

    #[test]
    fn same_seed_and_stream_is_bit_identical() {
        let a = sample_complex_gaussian(6, 5, 2.0, &mut RngStream::new(9, 17)).unwrap();
        let b = sample_complex_gaussian(6, 5, 2.0, &mut RngStream::new(9, 17)).unwrap();
        assert_eq!(a, b);
        let c = sample_complex_gaussian(6, 5, 2.0, &mut RngStream::new(9, 18)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn unit_variance_empirical() {
        // 10^4 entries; standard error of the mean of |z|^2 is 1/100, so
        // [0.96, 1.04] is a 4-sigma band. Real and imaginary parts each carry
        // half the power.
        let z = sample_complex_gaussian(100, 100, 1.0, &mut RngStream::new(42, 0)).unwrap();
        let n = z.len() as f64;
        let total = z.iter().map(|v| v.norm_sqr()).sum::<f64>() / n;
        let re = z.iter().map(|v| v.re * v.re).sum::<f64>() / n;
        assert!((0.96..=1.04).contains(&total), "{total}");
        assert!((0.46..=0.54).contains(&re), "{re}");
        let mean = z.iter().sum::<Complex64>() / n;
        assert!(mean.norm() < 0.04);
    }

    #[test]
    fn uniform_in_unit_interval() {
        let mut rng = RngStream::new(5, 5);
        for _ in 0..1000 {
            let u = rng.uniform();
            assert!((0.0..1.0).contains(&u));
        }
    }
}
