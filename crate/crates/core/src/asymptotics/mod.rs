//! Large-M SINR limits and overhead-aware rates.
//!
//! All limits assume per-user power `p = E/M`, so that the receive SNR stays
//! bounded as the array grows. `E` and `σ²` are linear (mW).

mod phi_search;

pub use phi_search::{objective as mrc_sum_rate_objective, optimize_phi_mrc, PhiSearchBudget, PhiSearchResult};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{Correlation, ReflectionConfig};
use crate::error::{dimension, validation, Error, Result};
use crate::numerics::{
    self, matmul, numerical_rank, svd, thin_qr, ComplexMatrix, ComplexVector, RankTolerance,
};

const QR_DEGENERATE_RATIO: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    #[serde(rename = "MRC_NO_IRS")]
    MrcNoIrs,
    #[serde(rename = "MRC_IRS")]
    MrcIrs,
    #[serde(rename = "ZF_SUBOPT_IRS")]
    ZfSuboptIrs,
}

/// Limiting SINRs of every user under one regime.
#[derive(Debug, Clone)]
pub struct AsymptoticReport {
    pub gamma_bar: Vec<f64>,
    pub regime: Regime,
    pub phi_used: Option<ReflectionConfig>,
}

/// Per-user rates after training overhead.
#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub rates: Vec<f64>,
    pub tau: usize,
    /// `(T - τ) / T`.
    pub fraction: f64,
}

impl RateReport {
    pub fn new(gammas: &[f64], t_block: usize, tau: usize) -> Result<Self> {
        let fraction = data_fraction(t_block, tau)?;
        let rates = gammas
            .iter()
            .map(|&g| {
                check_gamma(g)?;
                Ok(fraction * (1.0 + g).log2())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { rates, tau, fraction })
    }

    pub fn sum(&self) -> f64 {
        self.rates.iter().sum()
    }
}

/// Slow-fading inputs shared by the IRS-assisted limits.
#[derive(Debug, Clone, Copy)]
pub struct LimitInputs<'a> {
    /// User-IRS channels, `N x K`.
    pub t_all: &'a ComplexMatrix,
    /// IRS transmit correlation `C^I`.
    pub c_i: &'a Correlation,
    /// Direct-link path loss per user.
    pub beta_bu: &'a [f64],
    /// IRS-BS path loss.
    pub beta_bi: f64,
    /// Fixed total transmit energy E.
    pub e: f64,
    pub sigma2: f64,
}

impl LimitInputs<'_> {
    pub fn users(&self) -> usize {
        self.t_all.ncols()
    }

    pub fn elements(&self) -> usize {
        self.t_all.nrows()
    }

    fn check(&self) -> Result<()> {
        check_energy(self.e, self.sigma2)?;
        if self.c_i.dim() != self.elements() {
            return Err(dimension(format!(
                "C^I is {0}x{0} but t has {1} rows",
                self.c_i.dim(),
                self.elements()
            )));
        }
        if self.beta_bu.len() != self.users() {
            return Err(dimension(format!(
                "{} direct path losses for {} users",
                self.beta_bu.len(),
                self.users()
            )));
        }
        if !(self.beta_bi >= 0.0) || self.beta_bu.iter().any(|&b| !(b >= 0.0)) {
            return Err(validation("path losses must be >= 0"));
        }
        numerics::ensure_finite(self.t_all, "user-IRS channels")
    }

    fn check_user(&self, k: usize) -> Result<()> {
        if k < self.users() {
            Ok(())
        } else {
            Err(validation(format!("user index {k} out of range for K={}", self.users())))
        }
    }
}

fn check_energy(e: f64, sigma2: f64) -> Result<()> {
    if e > 0.0 && sigma2 > 0.0 && e.is_finite() && sigma2.is_finite() {
        Ok(())
    } else {
        Err(validation(format!("E and sigma^2 must be positive, got E={e}, sigma^2={sigma2}")))
    }
}

fn check_gamma(g: f64) -> Result<()> {
    if g >= 0.0 && g.is_finite() {
        Ok(())
    } else {
        Err(validation(format!("SINR must be finite and >= 0, got {g}")))
    }
}

/// Limiting MRC SINR without an IRS: `(E/σ²) β_k^BU`.
pub fn mrc_sinr_no_irs(e: f64, sigma2: f64, beta_bu_k: f64) -> Result<f64> {
    check_energy(e, sigma2)?;
    if !(beta_bu_k >= 0.0) || !beta_bu_k.is_finite() {
        return Err(validation(format!("path loss must be >= 0, got {beta_bu_k}")));
    }
    Ok(e / sigma2 * beta_bu_k)
}

/// `(T - τ) / T`.
pub fn data_fraction(t_block: usize, tau: usize) -> Result<f64> {
    if tau >= t_block {
        return Err(validation(format!("training length {tau} leaves no data in a block of {t_block}")));
    }
    Ok((t_block - tau) as f64 / t_block as f64)
}

/// `((T - τ)/T) log₂(1 + γ)`.
pub fn rate_with_overhead(gamma: f64, t_block: usize, tau: usize) -> Result<f64> {
    check_gamma(gamma)?;
    Ok(data_fraction(t_block, tau)? * (1.0 + gamma).log2())
}

/// `η_k(φ) = φ ⊙ t_k`.
pub fn eta(phi: &ReflectionConfig, t_k: &[Complex64]) -> Result<ComplexVector> {
    phi.eta(t_k)
}

/// Gram matrix `Γ_kj = η_kᴴ C^I η_j` over all users.
pub fn irs_gram(phi: &ReflectionConfig, t_all: &ComplexMatrix, c_i: &Correlation) -> Result<ComplexMatrix> {
    let etas = reflected(phi, t_all)?;
    if c_i.dim() != etas.nrows() {
        return Err(dimension("C^I does not match the number of elements"));
    }
    let u = correlate(c_i, &etas);
    Ok(numerics::adjoint_mul(&etas, &u))
}

/// `diag(φ) T`.
pub(crate) fn reflected(phi: &ReflectionConfig, t_all: &ComplexMatrix) -> Result<ComplexMatrix> {
    if phi.len() != t_all.nrows() {
        return Err(dimension(format!("phi has {} entries, t has {} rows", phi.len(), t_all.nrows())));
    }
    let mut e = t_all.clone();
    for (n, p) in phi.as_slice().iter().enumerate() {
        for k in 0..e.ncols() {
            e[(n, k)] *= p;
        }
    }
    Ok(e)
}

/// `C x`.
pub(crate) fn correlate(c: &Correlation, x: &ComplexMatrix) -> ComplexMatrix {
    match c {
        Correlation::Diagonal(d) => {
            let mut out = x.clone();
            for (i, &di) in d.iter().enumerate() {
                out.row_mut(i).scale_mut(di);
            }
            out
        }
        Correlation::Dense { matrix, .. } => matmul(matrix, x),
    }
}

/// MRC limit for user k from a precomputed Gram matrix.
pub(crate) fn mrc_sinr_from_gram(
    gram: &ComplexMatrix,
    beta_bu_k: f64,
    beta_bi: f64,
    e: f64,
    sigma2: f64,
    k: usize,
) -> f64 {
    let gain = beta_bu_k + beta_bi * gram[(k, k)].re;
    if gain <= 0.0 {
        return 0.0;
    }
    let interference: f64 = (0..gram.ncols())
        .filter(|&j| j != k)
        .map(|j| (beta_bi * gram[(k, j)]).norm_sqr())
        .sum();
    gain * gain * e / (interference * e + sigma2 * gain)
}

/// Limiting MRC SINR of user k with IRS coefficients `phi`.
pub fn mrc_irs_asymptotic_sinr(phi: &ReflectionConfig, inputs: &LimitInputs<'_>, k: usize) -> Result<f64> {
    inputs.check()?;
    inputs.check_user(k)?;
    let gram = irs_gram(phi, inputs.t_all, inputs.c_i)?;
    Ok(mrc_sinr_from_gram(&gram, inputs.beta_bu[k], inputs.beta_bi, inputs.e, inputs.sigma2, k))
}

/// Limiting MRC SINRs of every user.
pub fn mrc_irs_asymptotic_sinrs(phi: &ReflectionConfig, inputs: &LimitInputs<'_>) -> Result<AsymptoticReport> {
    inputs.check()?;
    let gram = irs_gram(phi, inputs.t_all, inputs.c_i)?;
    let gamma_bar = (0..inputs.users())
        .map(|k| mrc_sinr_from_gram(&gram, inputs.beta_bu[k], inputs.beta_bi, inputs.e, inputs.sigma2, k))
        .collect();
    Ok(AsymptoticReport {
        gamma_bar,
        regime: Regime::MrcIrs,
        phi_used: Some(phi.clone()),
    })
}

/// IRS contribution `‖Q_kᴴ (C^I)^{1/2} t_k‖²` to the structured ZF limit,
/// before the `(E/σ²) β^BI` factor.
pub fn zf_subopt_irs_gain(inputs: &LimitInputs<'_>, k: usize) -> Result<f64> {
    inputs.check()?;
    inputs.check_user(k)?;
    let (n, k_users) = (inputs.elements(), inputs.users());
    let t = inputs.t_all;
    if t.column(k).iter().all(|z| z.norm() == 0.0) {
        return Ok(0.0);
    }
    if n <= k_users {
        return Err(validation(format!("structured ZF needs N > K, got N={n} K={k_users}")));
    }

    // Rows β^BI t_jᴴ C^I diag(t_k), j ≠ k.
    let ct = correlate(inputs.c_i, t);
    let others: Vec<usize> = (0..k_users).filter(|&j| j != k).collect();
    let mut a_lim = ComplexMatrix::zeros(others.len(), n);
    for (row, &j) in others.iter().enumerate() {
        for col in 0..n {
            a_lim[(row, col)] = inputs.beta_bi * ct[(col, j)].conj() * t[(col, k)];
        }
    }
    let svd = svd(&a_lim)?;
    let lambda = numerical_rank(
        &svd.singular_values,
        RankTolerance::Default {
            rows: others.len(),
            cols: n,
        },
    );
    let mut scaled = svd.right.columns(lambda, n - lambda).into_owned();
    for row in 0..n {
        let tk = t[(row, k)];
        for col in 0..n - lambda {
            scaled[(row, col)] *= tk;
        }
    }
    let d_mat = inputs.c_i.root_mul(&scaled);
    let qr = thin_qr(&d_mat)?;
    if qr.diagonal_ratio() <= QR_DEGENERATE_RATIO {
        return Err(Error::DegenerateTheta { user: k });
    }
    let t_k = t.columns(k, 1).into_owned();
    let proj = qr.q.adjoint() * inputs.c_i.root_mul(&t_k);
    Ok(proj.iter().map(|z| z.norm_sqr()).sum())
}

/// Limiting SINR of the structured ZF beamformer (unit reflection coefficients).
pub fn zf_subopt_asymptotic_sinr(inputs: &LimitInputs<'_>, k: usize) -> Result<f64> {
    let gain = zf_subopt_irs_gain(inputs, k)?;
    Ok(mrc_sinr_no_irs(inputs.e, inputs.sigma2, inputs.beta_bu[k])? + inputs.e / inputs.sigma2 * inputs.beta_bi * gain)
}

pub fn zf_subopt_asymptotic_sinrs(inputs: &LimitInputs<'_>) -> Result<AsymptoticReport> {
    let gamma_bar = (0..inputs.users())
        .map(|k| zf_subopt_asymptotic_sinr(inputs, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(AsymptoticReport {
        gamma_bar,
        regime: Regime::ZfSuboptIrs,
        phi_used: Some(ReflectionConfig::ones(inputs.elements())),
    })
}

pub fn mrc_no_irs_asymptotic_sinrs(e: f64, sigma2: f64, beta_bu: &[f64]) -> Result<AsymptoticReport> {
    Ok(AsymptoticReport {
        gamma_bar: beta_bu
            .iter()
            .map(|&b| mrc_sinr_no_irs(e, sigma2, b))
            .collect::<Result<Vec<_>>>()?,
        regime: Regime::MrcNoIrs,
        phi_used: None,
    })
}
