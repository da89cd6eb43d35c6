//! Receive beamformers and instantaneous SINR.
//!
//! Three strategies are provided:
//!
//! * [`mrc`]: `w_k = ĥ_k`.
//! * [`optimal_zf`]: projection of `ĥ_k` onto the null space of the other
//!   users' effective channels; the SINR-maximizing zero-forcing vector.
//! * [`suboptimal_zf`]: the structured beamformer `w_k = h_k + Σ_n θ_{k,n} g_{k,n}`
//!   with θ chosen through an SVD / QR construction so that the interference
//!   constraints hold exactly while the IRS part of `w_k` stays aligned with
//!   the user's own reflected channel as M grows. The IRS is assumed to use
//!   unit reflection coefficients.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{effective_channels, ChannelRealization, Correlation, ReflectionConfig};
use crate::error::{dimension, validation, Error, Result};
use crate::numerics::{
    self, adjoint_mul, matmul, null_space_basis, numerical_rank, row_space_basis, svd, thin_qr,
    vec_norm, ComplexMatrix, ComplexVector, QrFactorization, RankTolerance, SvdFactorization,
};

/// Optimal ZF outputs below this fraction of `‖ĥ_k‖` are treated as zero.
const DEGENERATE_RATIO: f64 = 1e-8;
/// Smallest admissible `|r_ii| / max |r_ii|` for the QR factor of D_k.
const QR_DEGENERATE_RATIO: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Strategy {
    #[serde(rename = "MRC")]
    Mrc,
    #[serde(rename = "ZF_OPTIMAL")]
    ZfOptimal,
    #[serde(rename = "ZF_SUBOPTIMAL")]
    ZfSuboptimal,
}

/// Intermediates of the structured ZF construction for one user.
#[derive(Debug, Clone)]
pub struct ZfAuxiliary {
    /// `(K-1) x N`; row for user j is `[ĥ_jᴴ g_{k,1}, ..., ĥ_jᴴ g_{k,N}]`.
    pub a_mat: ComplexMatrix,
    /// `-[ĥ_jᴴ h_k]_{j≠k}`.
    pub b_vec: ComplexVector,
    /// Combining weights of the cascaded channels.
    pub theta: ComplexVector,
    /// Component of `Vᴴθ` fixed by the constraints (length λ).
    pub theta_hat_1: ComplexVector,
    /// Free component of `Vᴴθ` (length N - λ).
    pub theta_hat_2: ComplexVector,
    pub lambda_rank: usize,
    /// Full SVD of `A_k / M`.
    pub svd: SvdFactorization,
    /// `(C^I)^{1/2} diag(t_k) V^(2)`.
    pub d_mat: ComplexMatrix,
    pub qr: QrFactorization,
}

impl ZfAuxiliary {
    /// `‖A θ - b‖`.
    pub fn residual(&self) -> f64 {
        vec_norm(&(&self.a_mat * &self.theta - &self.b_vec))
    }

    /// Residual relative to `‖A‖_F ‖θ‖ + ‖b‖`.
    pub fn relative_residual(&self) -> f64 {
        let scale = numerics::fro_norm(&self.a_mat) * vec_norm(&self.theta) + vec_norm(&self.b_vec);
        if scale == 0.0 {
            0.0
        } else {
            self.residual() / scale
        }
    }
}

/// Receive vectors for all users of one realization.
#[derive(Debug, Clone)]
pub struct BeamformerSet {
    /// `M x K`, column k is `w_k`.
    pub w: ComplexMatrix,
    pub strategy: Strategy,
    /// Users whose beamformer collapsed to zero; their SINR is reported as 0.
    pub degenerate: Vec<bool>,
    pub zf_aux: Option<Vec<ZfAuxiliary>>,
}

impl BeamformerSet {
    pub fn users(&self) -> usize {
        self.w.ncols()
    }

    pub fn column(&self, k: usize) -> ComplexVector {
        numerics::column(&self.w, k)
    }

    pub fn any_degenerate(&self) -> bool {
        self.degenerate.iter().any(|&d| d)
    }

    /// SINR of every user against the given effective channels.
    pub fn sinrs(&self, effective: &ComplexMatrix, p: f64, sigma2: f64) -> Result<Vec<f64>> {
        check_noise(sigma2)?;
        if effective.shape() != self.w.shape() {
            return Err(dimension("beamformers and effective channels differ in shape"));
        }
        let cross = adjoint_mul(&self.w, effective);
        let k_users = self.users();
        Ok((0..k_users)
            .map(|k| {
                let wnorm2: f64 = self.w.column(k).iter().map(|z| z.norm_sqr()).sum();
                if wnorm2 == 0.0 {
                    return 0.0;
                }
                let signal = p * cross[(k, k)].norm_sqr();
                let interference: f64 = (0..k_users).filter(|&j| j != k).map(|j| cross[(k, j)].norm_sqr()).sum();
                signal / (p * interference + sigma2 * wnorm2)
            })
            .collect())
    }

    pub fn leakages(&self, effective: &ComplexMatrix) -> Vec<f64> {
        (0..self.users())
            .map(|k| interference_leakage(&self.column(k), effective, k))
            .collect()
    }
}

/// Maximal-ratio combining: `w_k = ĥ_k`.
pub fn mrc(effective: &ComplexMatrix) -> BeamformerSet {
    BeamformerSet {
        w: effective.clone(),
        strategy: Strategy::Mrc,
        degenerate: (0..effective.ncols())
            .map(|k| effective.column(k).iter().all(|z| z.norm() == 0.0))
            .collect(),
        zf_aux: None,
    }
}

/// Result of the optimal ZF construction for one user.
#[derive(Debug, Clone)]
pub struct OptimalZf {
    pub w: ComplexVector,
    /// Orthonormal basis of the null space of the other users' channels,
    /// `M x (M - rank)`.
    pub null_basis: ComplexMatrix,
    pub degenerate: bool,
}

/// Effective channels of every user except `k`, as rows (`(K-1) x M`).
fn others_as_rows(effective: &ComplexMatrix, k: usize) -> ComplexMatrix {
    let (m, k_users) = effective.shape();
    let mut rows = ComplexMatrix::zeros(k_users - 1, m);
    for (r, j) in (0..k_users).filter(|&j| j != k).enumerate() {
        rows.row_mut(r).copy_from(&effective.column(j).adjoint());
    }
    rows
}

fn check_user(effective: &ComplexMatrix, k: usize) -> Result<()> {
    if k >= effective.ncols() {
        return Err(validation(format!("user index {k} out of range for K={}", effective.ncols())));
    }
    if effective.nrows() < effective.ncols() {
        return Err(validation(format!(
            "zero forcing needs M >= K, got M={} K={}",
            effective.nrows(),
            effective.ncols()
        )));
    }
    numerics::ensure_finite(effective, "effective channels")
}

/// `w_k = Ỹ_k Ỹ_kᴴ ĥ_k` with `Ỹ_k` an explicit orthonormal null-space basis.
///
/// Materializes an `M x (M - K + 1)` basis; sweeps use
/// [`optimal_zf_beamformers`], which applies the same projector without it.
pub fn optimal_zf(effective: &ComplexMatrix, k: usize) -> Result<OptimalZf> {
    check_user(effective, k)?;
    let h_k = numerics::column(effective, k);
    let basis = null_space_basis(&others_as_rows(effective, k))?;
    let coeff = basis.adjoint() * &h_k;
    let w = &basis * coeff;
    let (w, degenerate) = flag_degenerate(w, &h_k);
    Ok(OptimalZf {
        w,
        null_basis: basis,
        degenerate,
    })
}

fn flag_degenerate(w: ComplexVector, h_k: &ComplexVector) -> (ComplexVector, bool) {
    if vec_norm(&w) <= DEGENERATE_RATIO * vec_norm(h_k) {
        (ComplexVector::zeros(w.len()), true)
    } else {
        (w, false)
    }
}

/// Optimal ZF for every user, computed as `ĥ_k - V Vᴴ ĥ_k` where V spans the
/// row space of the other users' channels.
pub fn optimal_zf_beamformers(effective: &ComplexMatrix) -> Result<BeamformerSet> {
    let (m, k_users) = effective.shape();
    let mut w = ComplexMatrix::zeros(m, k_users);
    let mut degenerate = vec![false; k_users];
    for k in 0..k_users {
        check_user(effective, k)?;
        let h_k = numerics::column(effective, k);
        let (v, _) = row_space_basis(&others_as_rows(effective, k))?;
        let mut x = h_k.clone();
        // Second pass removes what rounding left in the row space.
        for _ in 0..2 {
            let c = v.adjoint() * &x;
            x -= &v * c;
        }
        let (x, d) = flag_degenerate(x, &h_k);
        w.column_mut(k).copy_from(&x);
        degenerate[k] = d;
    }
    Ok(BeamformerSet {
        w,
        strategy: Strategy::ZfOptimal,
        degenerate,
        zf_aux: None,
    })
}

/// Shared products for the structured ZF construction.
struct StructuredZfContext<'a> {
    real: &'a ChannelRealization,
    c_i: &'a Correlation,
    /// `Ĥᴴ R`, K x N.
    eff_r: ComplexMatrix,
    /// `Ĥᴴ H`, K x K.
    eff_h: ComplexMatrix,
}

impl<'a> StructuredZfContext<'a> {
    fn new(real: &'a ChannelRealization, c_i: &'a Correlation) -> Result<Self> {
        if c_i.dim() != real.n() {
            return Err(dimension(format!("C^I is {0}x{0}, N={1}", c_i.dim(), real.n())));
        }
        let eff = effective_channels(real, &ReflectionConfig::ones(real.n()))?;
        Ok(Self {
            real,
            c_i,
            eff_r: adjoint_mul(&eff, &real.r_mat),
            eff_h: adjoint_mul(&eff, &real.h),
        })
    }

    fn build(&self, k: usize) -> Result<(ComplexVector, ZfAuxiliary)> {
        let real = self.real;
        let (m, n, k_users) = (real.m(), real.n(), real.k());
        if k >= k_users {
            return Err(validation(format!("user index {k} out of range for K={k_users}")));
        }
        let scale = Complex64::new(m as f64, 0.0);
        let others: Vec<usize> = (0..k_users).filter(|&j| j != k).collect();

        let mut a_mat = ComplexMatrix::zeros(others.len(), n);
        let mut b_vec = ComplexVector::zeros(others.len());
        for (row, &j) in others.iter().enumerate() {
            for col in 0..n {
                a_mat[(row, col)] = self.eff_r[(j, col)] * real.t[(col, k)];
            }
            b_vec[row] = -self.eff_h[(j, k)];
        }

        let svd = svd(&(&a_mat / scale))?;
        let lambda = numerical_rank(
            &svd.singular_values,
            RankTolerance::Default {
                rows: others.len(),
                cols: n,
            },
        );
        let b_hat = svd.left.adjoint() * (&b_vec / scale);
        let theta_hat_1 = ComplexVector::from_iterator(
            lambda,
            (0..lambda).map(|i| b_hat[i] / svd.singular_values[i]),
        );

        let mut diag_t_v2 = svd.right.columns(lambda, n - lambda).into_owned();
        for row in 0..n {
            let t = real.t[(row, k)];
            for col in 0..n - lambda {
                diag_t_v2[(row, col)] *= t;
            }
        }
        let d_mat = self.c_i.root_mul(&diag_t_v2);
        let qr = thin_qr(&d_mat)?;
        if qr.diagonal_ratio() <= QR_DEGENERATE_RATIO {
            return Err(Error::DegenerateTheta { user: k });
        }
        let t_k = ComplexMatrix::from_column_slice(n, 1, real.t.column(k).as_slice());
        let ci_t = self.c_i.root_mul(&t_k);
        let qh_ci_t = qr.q.adjoint() * ci_t;
        let theta_hat_2 = ComplexVector::from_vec(qr.solve_upper(qh_ci_t.as_slice())?);

        let mut theta_hat = ComplexVector::zeros(n);
        theta_hat.rows_mut(0, lambda).copy_from(&theta_hat_1);
        theta_hat.rows_mut(lambda, n - lambda).copy_from(&theta_hat_2);
        let theta = &svd.right * theta_hat;

        let weights = ComplexMatrix::from_iterator(n, 1, (0..n).map(|i| real.t[(i, k)] * theta[i]));
        let w = real.direct(k) + matmul(&real.r_mat, &weights).column(0);

        Ok((
            w,
            ZfAuxiliary {
                a_mat,
                b_vec,
                theta,
                theta_hat_1,
                theta_hat_2,
                lambda_rank: lambda,
                svd,
                d_mat,
                qr,
            },
        ))
    }
}

/// Structured suboptimal ZF beamformer of user `k` under unit reflection
/// coefficients. `c_i` is the IRS transmit correlation `C^I`.
pub fn suboptimal_zf(
    real: &ChannelRealization,
    c_i: &Correlation,
    k: usize,
) -> Result<(ComplexVector, ZfAuxiliary)> {
    StructuredZfContext::new(real, c_i)?.build(k)
}

/// Structured suboptimal ZF for every user.
pub fn suboptimal_zf_beamformers(real: &ChannelRealization, c_i: &Correlation) -> Result<BeamformerSet> {
    let ctx = StructuredZfContext::new(real, c_i)?;
    let mut w = ComplexMatrix::zeros(real.m(), real.k());
    let mut aux = Vec::with_capacity(real.k());
    for k in 0..real.k() {
        let (w_k, a) = ctx.build(k)?;
        w.column_mut(k).copy_from(&w_k);
        aux.push(a);
    }
    Ok(BeamformerSet {
        w,
        strategy: Strategy::ZfSuboptimal,
        degenerate: vec![false; real.k()],
        zf_aux: Some(aux),
    })
}

fn check_noise(sigma2: f64) -> Result<()> {
    if sigma2 > 0.0 && sigma2.is_finite() {
        Ok(())
    } else {
        Err(validation(format!("noise power must be positive, got {sigma2}")))
    }
}

/// `p|w_kᴴĥ_k|² / (p Σ_{j≠k}|w_kᴴĥ_j|² + σ²‖w_k‖²)`; zero for a zero beamformer.
pub fn sinr(w_k: &ComplexVector, effective: &ComplexMatrix, k: usize, p: f64, sigma2: f64) -> Result<f64> {
    check_noise(sigma2)?;
    if k >= effective.ncols() || w_k.len() != effective.nrows() {
        return Err(dimension("beamformer does not match effective channels"));
    }
    let wnorm2: f64 = w_k.iter().map(|z| z.norm_sqr()).sum();
    if wnorm2 == 0.0 {
        return Ok(0.0);
    }
    let proj = |j: usize| numerics::inner(w_k, &numerics::column(effective, j)).norm_sqr();
    let interference: f64 = (0..effective.ncols()).filter(|&j| j != k).map(proj).sum();
    Ok(p * proj(k) / (p * interference + sigma2 * wnorm2))
}

/// `max_{j≠k} |w_kᴴĥ_j| / (‖w_k‖‖ĥ_j‖)`; 0 when K = 1.
pub fn interference_leakage(w_k: &ComplexVector, effective: &ComplexMatrix, k: usize) -> f64 {
    let wn = vec_norm(w_k);
    if wn == 0.0 {
        return 0.0;
    }
    (0..effective.ncols())
        .filter(|&j| j != k)
        .map(|j| {
            let h_j = numerics::column(effective, j);
            let hn = vec_norm(&h_j);
            if hn == 0.0 {
                0.0
            } else {
                numerics::inner(w_k, &h_j).norm() / (wn * hn)
            }
        })
        .fold(0.0, f64::max)
}
