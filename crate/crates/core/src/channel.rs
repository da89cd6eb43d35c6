//! Correlated Rayleigh block-fading channels for the direct user-BS links,
//! the IRS-BS matrix and the user-IRS links.
//!
//! One [`ChannelRealization`] holds every link for one fading block:
//!
//! * `h`: M x K, column k is the direct channel of user k,
//! * `r_mat`: M x N, column n is the channel from IRS element n to the BS,
//! * `t`: N x K, column k is the channel from user k to the IRS.
//!
//! The cascaded channel through element n is `t[n, k] * r_n`. With reflection
//! coefficients `phi`, the effective channel of user k is
//! `h_k + R diag(phi) t_k`.
//!
//! The IRS-BS matrix is drawn as `C_B^{1/2} G C_I^{1/2}` with per-entry
//! variance `beta_bi` in `G`. With unit-diagonal correlation this gives
//! `E[Rᴴ R] / M = beta_bi * C_I`, the normalization under which the large-M
//! limits in [`crate::asymptotics`] hold.
//!
//! User indices are zero-based throughout.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{dimension, validation, Result};
use crate::numerics::{
    self, ensure_finite, matmul, sample_complex_gaussian, ComplexMatrix,
    ComplexVector, RngStream,
};

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    db_to_linear(dbm)
}

/// Scalar dimensions and power budget of one scenario. Powers are in mW.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    /// BS antennas.
    pub m: usize,
    /// IRS elements.
    pub n: usize,
    /// Users.
    pub k: usize,
    /// Coherence block length in symbols.
    pub t_block: usize,
    /// Fixed total energy budget E; each user transmits `p = E / M`.
    pub e_fixed: f64,
    /// Noise power over the bandwidth.
    pub sigma2: f64,
    pub bandwidth_hz: f64,
    pub noise_psd_dbm_hz: f64,
}

impl SystemParams {
    /// Builds and validates a parameter set; `sigma2` is derived from the noise
    /// PSD and the bandwidth.
    pub fn new(
        m: usize,
        n: usize,
        k: usize,
        t_block: usize,
        e_fixed_dbm: f64,
        bandwidth_hz: f64,
        noise_psd_dbm_hz: f64,
    ) -> Result<Self> {
        let sigma2 = dbm_to_mw(noise_psd_dbm_hz + 10.0 * bandwidth_hz.log10());
        let params = Self {
            m,
            n,
            k,
            t_block,
            e_fixed: dbm_to_mw(e_fixed_dbm),
            sigma2,
            bandwidth_hz,
            noise_psd_dbm_hz,
        };
        params.validate()?;
        Ok(params)
    }

    /// 13 dBm energy budget, 100 MHz at -169 dBm/Hz, T = 1000.
    pub fn reference(m: usize, n: usize, k: usize) -> Result<Self> {
        Self::new(m, n, k, 1000, 13.0, 1e8, -169.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(validation("need at least one user"));
        }
        if self.n <= self.k {
            return Err(validation(format!("need N > K, got N={} K={}", self.n, self.k)));
        }
        if self.m < self.k {
            return Err(validation(format!("need M >= K, got M={} K={}", self.m, self.k)));
        }
        let tau_max = self.n + 2 * self.k - 1;
        if self.t_block <= tau_max {
            return Err(validation(format!(
                "need T > N + 2K - 1 = {tau_max}, got T={}",
                self.t_block
            )));
        }
        if !(self.e_fixed > 0.0 && self.e_fixed.is_finite()) {
            return Err(validation("energy budget E must be positive"));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(validation("noise power must be positive"));
        }
        Ok(())
    }

    /// Per-user transmit power `E / M`.
    pub fn p(&self) -> f64 {
        self.e_fixed / self.m as f64
    }

    /// `E / sigma^2`.
    pub fn e_over_sigma2(&self) -> f64 {
        self.e_fixed / self.sigma2
    }

    pub fn with_n(&self, n: usize) -> Result<Self> {
        let p = Self { n, ..self.clone() };
        p.validate()?;
        Ok(p)
    }

    pub fn with_m(&self, m: usize) -> Result<Self> {
        let p = Self { m, ..self.clone() };
        p.validate()?;
        Ok(p)
    }
}

/// Linear path-loss gains.
#[derive(Debug, Clone, PartialEq)]
pub struct PathLossSet {
    /// Direct user-BS link, per user.
    pub beta_bu: Vec<f64>,
    /// IRS-BS link.
    pub beta_bi: f64,
    /// User-IRS link, per user.
    pub beta_iu: Vec<f64>,
}

impl PathLossSet {
    /// Zero gains are accepted so that individual links can be switched off.
    pub fn new(beta_bu: Vec<f64>, beta_bi: f64, beta_iu: Vec<f64>) -> Result<Self> {
        let ok = |x: f64| x.is_finite() && x >= 0.0;
        if !beta_bu.iter().chain(beta_iu.iter()).all(|&b| ok(b)) || !ok(beta_bi) {
            return Err(validation("path losses must be finite and nonnegative"));
        }
        if beta_bu.len() != beta_iu.len() {
            return Err(dimension("per-user path loss vectors differ in length"));
        }
        Ok(Self {
            beta_bu,
            beta_bi,
            beta_iu,
        })
    }

    /// Same gains for every user, given in dB.
    pub fn uniform_db(k: usize, bu_db: f64, bi_db: f64, iu_db: f64) -> Result<Self> {
        Self::new(vec![db_to_linear(bu_db); k], db_to_linear(bi_db), vec![db_to_linear(iu_db); k])
    }

    /// -100 dB direct, -80 dB IRS-BS, -60 dB user-IRS. Test defaults only.
    pub fn default_for(k: usize) -> Self {
        Self::uniform_db(k, -100.0, -80.0, -60.0).expect("finite defaults")
    }

    pub fn users(&self) -> usize {
        self.beta_bu.len()
    }
}

/// Exponential correlation matrix: `[i, j] = rho^(j - i)` for `j >= i`,
/// conjugate below the diagonal.
pub fn exp_correlation(dim: usize, rho: Complex64) -> Result<ComplexMatrix> {
    if !(rho.norm() < 1.0) {
        return Err(validation(format!("|rho| must be < 1, got {}", rho.norm())));
    }
    let mut c = ComplexMatrix::zeros(dim, dim);
    let mut pow = vec![Complex64::new(1.0, 0.0); dim.max(1)];
    for d in 1..dim {
        pow[d] = pow[d - 1] * rho;
    }
    for i in 0..dim {
        for j in i..dim {
            c[(i, j)] = pow[j - i];
            c[(j, i)] = pow[j - i].conj();
        }
    }
    Ok(c)
}

/// A correlation matrix together with its principal square root.
#[derive(Debug, Clone)]
pub enum Correlation {
    /// Diagonal correlation; stored as the diagonal only so that identity
    /// correlation at large M costs nothing.
    Diagonal(Vec<f64>),
    Dense {
        matrix: ComplexMatrix,
        root: ComplexMatrix,
    },
}

impl Correlation {
    pub fn identity(dim: usize) -> Self {
        Correlation::Diagonal(vec![1.0; dim])
    }

    pub fn exponential(dim: usize, rho: Complex64) -> Result<Self> {
        if rho == Complex64::new(0.0, 0.0) {
            return Ok(Self::identity(dim));
        }
        Self::from_matrix(exp_correlation(dim, rho)?)
    }

    /// Validates Hermitian, unit diagonal and positive definite.
    pub fn from_matrix(c: ComplexMatrix) -> Result<Self> {
        let n = c.nrows();
        for i in 0..n {
            if (c[(i, i)] - Complex64::new(1.0, 0.0)).norm() > 1e-12 {
                return Err(validation(format!("correlation diagonal entry {i} is not one")));
            }
        }
        let (root, min_eig) = numerics::hermitian_sqrt_with_min_eigenvalue(&c)?;
        if !(min_eig > 0.0) {
            return Err(validation(format!(
                "correlation matrix is not positive definite (min eigenvalue {min_eig:e})"
            )));
        }
        let diagonal = (0..n).all(|j| (0..n).all(|i| i == j || c[(i, j)] == Complex64::new(0.0, 0.0)));
        if diagonal {
            return Ok(Correlation::Diagonal((0..n).map(|i| c[(i, i)].re).collect()));
        }
        Ok(Correlation::Dense { matrix: c, root })
    }

    pub fn dim(&self) -> usize {
        match self {
            Correlation::Diagonal(d) => d.len(),
            Correlation::Dense { matrix, .. } => matrix.nrows(),
        }
    }

    pub fn matrix(&self) -> ComplexMatrix {
        match self {
            Correlation::Diagonal(d) => diag_matrix(d.iter().map(|&x| Complex64::new(x, 0.0))),
            Correlation::Dense { matrix, .. } => matrix.clone(),
        }
    }

    pub fn root(&self) -> ComplexMatrix {
        match self {
            Correlation::Diagonal(d) => diag_matrix(d.iter().map(|&x| Complex64::new(x.sqrt(), 0.0))),
            Correlation::Dense { root, .. } => root.clone(),
        }
    }

    /// `C^{1/2} x`.
    pub fn root_mul(&self, x: &ComplexMatrix) -> ComplexMatrix {
        match self {
            Correlation::Diagonal(d) => {
                let mut out = x.clone();
                for (i, &di) in d.iter().enumerate() {
                    if di != 1.0 {
                        out.row_mut(i).scale_mut(di.sqrt());
                    }
                }
                out
            }
            Correlation::Dense { root, .. } => matmul(root, x),
        }
    }

    /// `x C^{1/2}`.
    pub fn mul_root(&self, x: &ComplexMatrix) -> ComplexMatrix {
        match self {
            Correlation::Diagonal(d) => {
                let mut out = x.clone();
                for (j, &dj) in d.iter().enumerate() {
                    if dj != 1.0 {
                        out.column_mut(j).scale_mut(dj.sqrt());
                    }
                }
                out
            }
            Correlation::Dense { root, .. } => matmul(x, root),
        }
    }
}

fn diag_matrix(d: impl ExactSizeIterator<Item = Complex64>) -> ComplexMatrix {
    let n = d.len();
    let mut m = ComplexMatrix::zeros(n, n);
    for (i, v) in d.enumerate() {
        m[(i, i)] = v;
    }
    m
}

/// Exponential-model coefficients for the four correlation families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationModel {
    /// BS receive correlation of each direct link (`C_k^B`).
    pub rho_b_user: Complex64,
    /// BS receive correlation of the IRS-BS link (`C^B`).
    pub rho_b: Complex64,
    /// IRS transmit correlation of the IRS-BS link (`C^I`).
    pub rho_i: Complex64,
    /// IRS receive correlation of each user-IRS link (`C_k^I`).
    pub rho_i_user: Complex64,
}

impl Default for CorrelationModel {
    fn default() -> Self {
        let r = Complex64::new(0.5, 0.0);
        Self {
            rho_b_user: r,
            rho_b: r,
            rho_i: r,
            rho_i_user: r,
        }
    }
}

impl CorrelationModel {
    pub fn uncorrelated() -> Self {
        let z = Complex64::new(0.0, 0.0);
        Self {
            rho_b_user: z,
            rho_b: z,
            rho_i: z,
            rho_i_user: z,
        }
    }
}

/// All correlation matrices of one scenario. Families with identical
/// dimension and coefficient share one decomposition.
#[derive(Debug, Clone)]
pub struct CorrelationSet {
    pub c_b_user: Vec<Arc<Correlation>>,
    pub c_b: Arc<Correlation>,
    pub c_i: Arc<Correlation>,
    pub c_i_user: Vec<Arc<Correlation>>,
}

impl CorrelationSet {
    pub fn exponential(m: usize, n: usize, k: usize, model: &CorrelationModel) -> Result<Self> {
        let mut cache: Vec<(usize, Complex64, Arc<Correlation>)> = Vec::new();
        let mut get = |dim: usize, rho: Complex64| -> Result<Arc<Correlation>> {
            if let Some((_, _, c)) = cache.iter().find(|(d, r, _)| *d == dim && *r == rho) {
                return Ok(c.clone());
            }
            let c = Arc::new(Correlation::exponential(dim, rho)?);
            cache.push((dim, rho, c.clone()));
            Ok(c)
        };
        let c_b_user = get(m, model.rho_b_user)?;
        let c_b = get(m, model.rho_b)?;
        let c_i = get(n, model.rho_i)?;
        let c_i_user = get(n, model.rho_i_user)?;
        Ok(Self {
            c_b_user: vec![c_b_user; k],
            c_b,
            c_i,
            c_i_user: vec![c_i_user; k],
        })
    }

    pub fn uncorrelated(m: usize, n: usize, k: usize) -> Self {
        Self::exponential(m, n, k, &CorrelationModel::uncorrelated()).expect("identity is valid")
    }

    fn check(&self, params: &SystemParams) -> Result<()> {
        let (m, n, k) = (params.m, params.n, params.k);
        let ok = self.c_b_user.len() == k
            && self.c_i_user.len() == k
            && self.c_b_user.iter().all(|c| c.dim() == m)
            && self.c_i_user.iter().all(|c| c.dim() == n)
            && self.c_b.dim() == m
            && self.c_i.dim() == n;
        if ok {
            Ok(())
        } else {
            Err(dimension(format!("correlation set does not match M={m} N={n} K={k}")))
        }
    }
}

/// All channels of one fading block.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub h: ComplexMatrix,
    pub r_mat: ComplexMatrix,
    pub t: ComplexMatrix,
}

impl ChannelRealization {
    pub fn new(h: ComplexMatrix, r_mat: ComplexMatrix, t: ComplexMatrix) -> Result<Self> {
        let (m, k) = h.shape();
        let n = r_mat.ncols();
        if r_mat.nrows() != m || t.shape() != (n, k) {
            return Err(dimension(format!(
                "h is {}x{}, R is {}x{}, t is {}x{}",
                m,
                k,
                r_mat.nrows(),
                n,
                t.nrows(),
                t.ncols()
            )));
        }
        ensure_finite(&h, "h")?;
        ensure_finite(&r_mat, "R")?;
        ensure_finite(&t, "t")?;
        Ok(Self { h, r_mat, t })
    }

    pub fn m(&self) -> usize {
        self.h.nrows()
    }

    pub fn n(&self) -> usize {
        self.r_mat.ncols()
    }

    pub fn k(&self) -> usize {
        self.h.ncols()
    }

    pub fn direct(&self, k: usize) -> ComplexVector {
        numerics::column(&self.h, k)
    }

    pub fn user_irs(&self, k: usize) -> ComplexVector {
        numerics::column(&self.t, k)
    }

    fn check_user(&self, k: usize) -> Result<()> {
        if k < self.k() {
            Ok(())
        } else {
            Err(validation(format!("user index {k} out of range for K={}", self.k())))
        }
    }
}

/// Reflection coefficients of the IRS, `|phi_n| <= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionConfig {
    phi: Vec<Complex64>,
}

impl ReflectionConfig {
    pub fn new(phi: Vec<Complex64>) -> Result<Self> {
        for (i, p) in phi.iter().enumerate() {
            if !(p.re.is_finite() && p.im.is_finite()) || p.norm() > 1.0 + 1e-12 {
                return Err(validation(format!("reflection coefficient {i} violates |phi| <= 1: {p}")));
            }
        }
        Ok(Self { phi })
    }

    /// Every element reflects with coefficient one.
    pub fn ones(n: usize) -> Self {
        Self {
            phi: vec![Complex64::new(1.0, 0.0); n],
        }
    }

    /// IRS switched off.
    pub fn zeros(n: usize) -> Self {
        Self {
            phi: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.phi
    }

    /// `phi ⊙ t_k`: the user-IRS channel after reflection.
    pub fn eta(&self, t_k: &[Complex64]) -> Result<ComplexVector> {
        if t_k.len() != self.phi.len() {
            return Err(dimension(format!("phi has {} entries, t_k has {}", self.phi.len(), t_k.len())));
        }
        Ok(ComplexVector::from_iterator(
            t_k.len(),
            self.phi.iter().zip(t_k).map(|(p, t)| p * t),
        ))
    }
}

/// Draws the user-IRS channels `t_k = (C_k^I)^{1/2} CN(0, beta_iu_k I)`.
pub fn sample_user_irs(
    params: &SystemParams,
    pl: &PathLossSet,
    corr: &CorrelationSet,
    rng: &mut RngStream,
) -> Result<ComplexMatrix> {
    check_dims(params, pl, corr)?;
    let (n, k) = (params.n, params.k);
    let iid = sample_complex_gaussian(n, k, 1.0, rng)?;
    let mut t = ComplexMatrix::zeros(n, k);
    for user in 0..k {
        let col = iid.columns(user, 1).scale(pl.beta_iu[user].sqrt());
        t.column_mut(user).copy_from(&corr.c_i_user[user].root_mul(&col));
    }
    Ok(t)
}

/// Draws the BS-side links for given user-IRS channels `t`.
pub fn sample_realization_with_t(
    params: &SystemParams,
    pl: &PathLossSet,
    corr: &CorrelationSet,
    t: ComplexMatrix,
    rng: &mut RngStream,
) -> Result<ChannelRealization> {
    check_dims(params, pl, corr)?;
    if t.shape() != (params.n, params.k) {
        return Err(dimension(format!(
            "t must be {}x{}, got {}x{}",
            params.n,
            params.k,
            t.nrows(),
            t.ncols()
        )));
    }
    let (h, r_mat) = sample_bs_links(params, pl, corr, rng)?;
    ChannelRealization::new(h, r_mat, t)
}

/// Draws one fading block: direct channels, IRS-BS matrix, then user-IRS
/// channels, all from `rng` in that order.
pub fn sample_realization(
    params: &SystemParams,
    pl: &PathLossSet,
    corr: &CorrelationSet,
    rng: &mut RngStream,
) -> Result<ChannelRealization> {
    check_dims(params, pl, corr)?;
    let (h, r_mat) = sample_bs_links(params, pl, corr, rng)?;
    let t = sample_user_irs(params, pl, corr, rng)?;
    ChannelRealization::new(h, r_mat, t)
}

/// `h_k = (C_k^B)^{1/2} CN(0, beta_bu_k I)` and `R = (C^B)^{1/2} G (C^I)^{1/2}`.
fn sample_bs_links(
    params: &SystemParams,
    pl: &PathLossSet,
    corr: &CorrelationSet,
    rng: &mut RngStream,
) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let (m, n, k) = (params.m, params.n, params.k);
    let mut h_iid = sample_complex_gaussian(m, k, 1.0, rng)?;
    for user in 0..k {
        h_iid.column_mut(user).scale_mut(pl.beta_bu[user].sqrt());
    }
    let shared = corr.c_b_user.iter().all(|c| Arc::ptr_eq(c, &corr.c_b_user[0]));
    let h = if shared {
        corr.c_b_user[0].root_mul(&h_iid)
    } else {
        let mut h = ComplexMatrix::zeros(m, k);
        for user in 0..k {
            let col = h_iid.columns(user, 1).into_owned();
            h.column_mut(user).copy_from(&corr.c_b_user[user].root_mul(&col));
        }
        h
    };
    let g = sample_complex_gaussian(m, n, pl.beta_bi, rng)?;
    let r_mat = corr.c_i.mul_root(&corr.c_b.root_mul(&g));
    Ok((h, r_mat))
}

fn check_dims(params: &SystemParams, pl: &PathLossSet, corr: &CorrelationSet) -> Result<()> {
    if pl.users() != params.k {
        return Err(dimension(format!("path losses for {} users, K={}", pl.users(), params.k)));
    }
    corr.check(params)
}

/// Cascaded channels of user k through every element: column n is
/// `t[n, k] * r_n`.
pub fn cascaded_channels(real: &ChannelRealization, k: usize) -> Result<ComplexMatrix> {
    real.check_user(k)?;
    let mut g = real.r_mat.clone();
    for n in 0..real.n() {
        let col = real.r_mat.column(n) * real.t[(n, k)];
        g.column_mut(n).copy_from(&col);
    }
    Ok(g)
}

/// `h_k + sum_n phi_n g_{k,n}`.
pub fn effective_channel(real: &ChannelRealization, refl: &ReflectionConfig, k: usize) -> Result<ComplexVector> {
    real.check_user(k)?;
    check_phi(real, refl)?;
    let eta = refl.eta(real.t.column(k).as_slice())?;
    let reflected = matmul(&real.r_mat, &ComplexMatrix::from_column_slice(eta.len(), 1, eta.as_slice()));
    Ok(real.direct(k) + reflected.column(0))
}

/// All effective channels as columns: `H + R diag(phi) T`.
pub fn effective_channels(real: &ChannelRealization, refl: &ReflectionConfig) -> Result<ComplexMatrix> {
    check_phi(real, refl)?;
    let mut scaled_t = real.t.clone();
    for (n, p) in refl.as_slice().iter().enumerate() {
        let row = scaled_t.row(n) * *p;
        scaled_t.row_mut(n).copy_from(&row);
    }
    Ok(&real.h + matmul(&real.r_mat, &scaled_t))
}

fn check_phi(real: &ChannelRealization, refl: &ReflectionConfig) -> Result<()> {
    if refl.len() != real.n() {
        return Err(dimension(format!("phi has {} entries, N={}", refl.len(), real.n())));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{adjoint_mul, fro_norm, vec_norm};

    fn j(x: f64) -> Complex64 {
        Complex64::new(0.0, x)
    }

    fn re(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn exp_correlation_cases() {
        assert_eq!(exp_correlation(3, re(0.0)).unwrap(), ComplexMatrix::identity(3, 3));
        let c = exp_correlation(2, re(0.5)).unwrap();
        assert_eq!(c, ComplexMatrix::from_row_slice(2, 2, &[re(1.0), re(0.5), re(0.5), re(1.0)]));
        assert!(exp_correlation(4, re(1.0)).is_err());
        assert!(exp_correlation(4, Complex64::from_polar(1.2, 0.3)).is_err());
    }

    #[test]
    fn exp_correlation_complex_is_positive_definite() {
        let c = exp_correlation(8, Complex64::from_polar(0.5, 0.3)).unwrap();
        for i in 0..8 {
            assert!((c[(i, i)] - re(1.0)).norm() <= 1e-14);
        }
        let eig = nalgebra::linalg::SymmetricEigen::new(c.clone());
        let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(min > 0.0, "{min}");
        assert!((c[(0, 2)] - Complex64::from_polar(0.25, 0.6)).norm() <= 1e-15);
        assert!((c[(2, 0)] - Complex64::from_polar(0.25, -0.6)).norm() <= 1e-15);
        assert!(matches!(Correlation::from_matrix(c).unwrap(), Correlation::Dense { .. }));
    }

    #[test]
    fn correlation_root_products() {
        let c = Correlation::exponential(5, re(0.7)).unwrap();
        let root = c.root();
        let err = fro_norm(&(matmul(&root, &root) - c.matrix()));
        assert!(err < 1e-12);
        let x = sample_complex_gaussian(5, 3, 1.0, &mut RngStream::new(1, 1)).unwrap();
        assert!(fro_norm(&(c.root_mul(&x) - matmul(&root, &x))) < 1e-12);
        let y = x.transpose();
        assert!(fro_norm(&(c.mul_root(&y) - matmul(&y, &root))) < 1e-12);
        let id = Correlation::identity(4);
        assert_eq!(id.root_mul(&x.rows(0, 4).into_owned()), x.rows(0, 4).into_owned());
    }

    #[test]
    fn correlation_rejects_bad_matrices() {
        let mut c = ComplexMatrix::identity(2, 2);
        c[(0, 0)] = re(2.0);
        assert!(Correlation::from_matrix(c).is_err());
        let mut singular = ComplexMatrix::from_element(2, 2, re(1.0));
        singular[(0, 1)] = re(1.0);
        assert!(Correlation::from_matrix(singular).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(SystemParams::reference(512, 100, 8).is_ok());
        assert!(SystemParams::reference(512, 8, 8).is_err());
        assert!(SystemParams::reference(4, 100, 8).is_err());
        assert!(SystemParams::new(64, 990, 8, 1000, 13.0, 1e8, -169.0).is_err());
        let p = SystemParams::reference(512, 100, 8).unwrap();
        // -169 dBm/Hz over 100 MHz is -89 dBm.
        assert!((p.sigma2 - dbm_to_mw(-89.0)).abs() < 1e-20);
        assert!((p.p() - dbm_to_mw(13.0) / 512.0).abs() < 1e-15);
    }

    #[test]
    fn zero_path_loss_gives_zero_realization() {
        let params = SystemParams::reference(8, 4, 2).unwrap();
        let pl = PathLossSet::new(vec![0.0; 2], 0.0, vec![0.0; 2]).unwrap();
        let corr = CorrelationSet::exponential(8, 4, 2, &CorrelationModel::default()).unwrap();
        let real = sample_realization(&params, &pl, &corr, &mut RngStream::new(1, 0)).unwrap();
        assert!(real.h.iter().chain(real.r_mat.iter()).chain(real.t.iter()).all(|z| z.norm() == 0.0));
    }

    #[test]
    fn realization_is_deterministic_and_composes() {
        let params = SystemParams::reference(16, 6, 3).unwrap();
        let pl = PathLossSet::uniform_db(3, 0.0, -3.0, 0.0).unwrap();
        let corr = CorrelationSet::exponential(16, 6, 3, &CorrelationModel::default()).unwrap();
        let a = sample_realization(&params, &pl, &corr, &mut RngStream::new(7, 3)).unwrap();
        let b = sample_realization(&params, &pl, &corr, &mut RngStream::new(7, 3)).unwrap();
        assert_eq!(a, b);
        let mut rng = RngStream::new(7, 3);
        let with_t = sample_realization_with_t(&params, &pl, &corr, a.t.clone(), &mut rng).unwrap();
        assert_eq!(with_t, a);
    }

    #[test]
    fn direct_channel_covariance_is_identity() {
        // C = I, beta_bu = 1: sample covariance over 10^4 draws within 5%
        // Frobenius of I.
        let (m, draws) = (4, 10_000);
        let params = SystemParams::reference(m, 2, 1).unwrap();
        let pl = PathLossSet::new(vec![1.0], 1.0, vec![1.0]).unwrap();
        let corr = CorrelationSet::uncorrelated(m, 2, 1);
        let mut cov = ComplexMatrix::zeros(m, m);
        for d in 0..draws {
            let real = sample_realization(&params, &pl, &corr, &mut RngStream::new(11, d)).unwrap();
            let h = real.h.columns(0, 1).into_owned();
            cov += matmul(&h, &h.adjoint());
        }
        cov /= Complex64::new(draws as f64, 0.0);
        let id = ComplexMatrix::identity(m, m);
        let rel = fro_norm(&(cov - &id)) / fro_norm(&id);
        assert!(rel <= 0.05, "{rel}");
    }

    #[test]
    fn irs_bs_gram_matches_normalization() {
        // (1/M) E[Rᴴ R] = beta_bi C^I at M = 256 over 10^3 draws.
        let (m, n, draws) = (256, 4, 1000);
        let params = SystemParams::reference(m, n, 1).unwrap();
        let beta_bi = 2.5;
        let pl = PathLossSet::new(vec![1.0], beta_bi, vec![1.0]).unwrap();
        let model = CorrelationModel {
            rho_i: Complex64::from_polar(0.6, 0.4),
            ..CorrelationModel::default()
        };
        let corr = CorrelationSet::exponential(m, n, 1, &model).unwrap();
        let mut acc = ComplexMatrix::zeros(n, n);
        for d in 0..draws {
            let real = sample_realization(&params, &pl, &corr, &mut RngStream::new(5, d)).unwrap();
            acc += adjoint_mul(&real.r_mat, &real.r_mat);
        }
        acc /= Complex64::new(draws as f64 * m as f64, 0.0);
        let expected = corr.c_i.matrix() * Complex64::new(beta_bi, 0.0);
        let rel = fro_norm(&(acc - &expected)) / fro_norm(&expected);
        assert!(rel <= 0.05, "{rel}");
    }

    #[test]
    fn cascaded_channel_cases() {
        let r = ComplexMatrix::from_element(2, 1, re(1.0));
        let h = ComplexMatrix::zeros(2, 1);
        let t = ComplexMatrix::from_element(1, 1, j(2.0));
        let real = ChannelRealization::new(h.clone(), r.clone(), t).unwrap();
        let g = cascaded_channels(&real, 0).unwrap();
        assert_eq!(g, ComplexMatrix::from_element(2, 1, j(2.0)));
        assert!(cascaded_channels(&real, 1).is_err());

        let zero_t = ChannelRealization::new(h, r, ComplexMatrix::zeros(1, 1)).unwrap();
        assert!(cascaded_channels(&zero_t, 0).unwrap().iter().all(|z| z.norm() == 0.0));
    }

    fn random_realization(m: usize, n: usize, k: usize, seed: u64) -> ChannelRealization {
        let params = SystemParams::reference(m, n, k).unwrap();
        let pl = PathLossSet::uniform_db(k, 0.0, 0.0, 0.0).unwrap();
        let corr = CorrelationSet::exponential(m, n, k, &CorrelationModel::default()).unwrap();
        sample_realization(&params, &pl, &corr, &mut RngStream::new(seed, 0)).unwrap()
    }

    #[test]
    fn cascaded_columns_are_definitional() {
        let real = random_realization(12, 5, 2, 9);
        let g = cascaded_channels(&real, 1).unwrap();
        for n in 0..5 {
            let expect = real.r_mat.column(n) * real.t[(n, 1)];
            assert!((g.column(n) - expect).norm() <= 1e-14);
        }
    }

    #[test]
    fn effective_channel_cases() {
        let real = random_realization(10, 6, 3, 4);
        let off = effective_channel(&real, &ReflectionConfig::zeros(6), 2).unwrap();
        assert_eq!(off, real.direct(2));

        let on = effective_channel(&real, &ReflectionConfig::ones(6), 2).unwrap();
        let g = cascaded_channels(&real, 2).unwrap();
        let mut sum = real.direct(2);
        for n in 0..6 {
            sum += g.column(n);
        }
        assert!(vec_norm(&(on - sum)) <= 1e-12);

        let mut rng = RngStream::new(2, 2);
        let phi: Vec<Complex64> = (0..6)
            .map(|_| Complex64::from_polar(rng.uniform(), std::f64::consts::TAU * rng.uniform()))
            .collect();
        let refl = ReflectionConfig::new(phi.clone()).unwrap();
        let eff = effective_channel(&real, &refl, 1).unwrap();
        let g1 = cascaded_channels(&real, 1).unwrap();
        let gphi = g1 * ComplexVector::from_vec(phi);
        assert!(vec_norm(&(eff.clone() - real.direct(1) - gphi)) <= 1e-12);

        let all = effective_channels(&real, &refl).unwrap();
        assert!((all.column(1) - eff).norm() <= 1e-12);
    }

    #[test]
    fn reflection_constraint_enforced() {
        assert!(ReflectionConfig::new(vec![re(1.0 + 1e-13)]).is_ok());
        assert!(ReflectionConfig::new(vec![Complex64::from_polar(1.01, 1.0)]).is_err());
        assert!(ReflectionConfig::new(vec![re(f64::NAN)]).is_err());
        let real = random_realization(4, 3, 2, 1);
        assert!(effective_channel(&real, &ReflectionConfig::ones(2), 0).is_err());
    }
}
