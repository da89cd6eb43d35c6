use std::path::Path;

use num_complex::Complex64;
use serde::Deserialize;

use super::Scheme;
use crate::asymptotics::PhiSearchBudget;
use crate::channel::{db_to_linear, CorrelationModel, PathLossSet, SystemParams};
use crate::error::{validation, Error, Result};

/// Monte Carlo settings of a convergence study.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceSettings {
    /// Independent user-IRS draws, each held fixed across the M sweep.
    pub lines: usize,
    /// BS-side draws averaged per line and M.
    pub draws: usize,
}

impl Default for ConvergenceSettings {
    fn default() -> Self {
        Self { lines: 10, draws: 200 }
    }
}

/// Validated experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Base parameters; `n` and `m` are overridden per sweep point.
    pub params: SystemParams,
    pub path_loss: PathLossSet,
    pub correlation: CorrelationModel,
    pub schemes: Vec<Scheme>,
    pub n_sweep: Vec<usize>,
    /// Defaults to `[params.m]`.
    pub m_sweep: Option<Vec<usize>>,
    pub trials: usize,
    pub seed: u64,
    pub phi_budget: PhiSearchBudget,
    pub convergence: ConvergenceSettings,
}

impl ExperimentConfig {
    /// M = 512, K = 8, T = 1000, E = 13 dBm, 100 MHz at -169 dBm/Hz,
    /// N in 10..=210 step 40, 50 trials, default path losses and correlation.
    pub fn reference() -> Self {
        ConfigFile::default().into_config().expect("defaults are valid")
    }

    pub fn m_values(&self) -> Vec<usize> {
        self.m_sweep.clone().unwrap_or_else(|| vec![self.params.m])
    }

    /// `(n, m)` sweep points, N-major.
    pub fn grid(&self) -> Vec<(usize, usize)> {
        let ms = self.m_values();
        self.n_sweep
            .iter()
            .flat_map(|&n| ms.iter().map(move |&m| (n, m)))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(validation("trials must be >= 1"));
        }
        if self.schemes.is_empty() {
            return Err(validation("no schemes enabled"));
        }
        if self.n_sweep.is_empty() {
            return Err(validation("n_sweep is empty"));
        }
        if self.path_loss.users() != self.params.k {
            return Err(validation(format!(
                "path losses for {} users, K={}",
                self.path_loss.users(),
                self.params.k
            )));
        }
        if self.m_sweep.as_ref().is_some_and(|v| v.is_empty()) {
            return Err(validation("m_sweep is empty"));
        }
        for (n, m) in self.grid() {
            self.params.with_n(n)?.with_m(m)?;
        }
        let c = &self.correlation;
        for rho in [c.rho_b_user, c.rho_b, c.rho_i, c.rho_i_user] {
            if !(rho.norm() < 1.0) {
                return Err(validation(format!("correlation coefficient magnitude must be < 1, got {}", rho.norm())));
            }
        }
        if self.convergence.lines == 0 || self.convergence.draws == 0 {
            return Err(validation("convergence lines and draws must be >= 1"));
        }
        self.phi_budget.validate()
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        file.into_config()
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }
}

/// Flat on-disk form of [`ExperimentConfig`]. Powers in dBm, gains in dB,
/// correlation coefficients as magnitude plus phase in radians.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub m: usize,
    pub k: usize,
    pub t_block: usize,
    pub e_dbm: f64,
    pub bandwidth_hz: f64,
    pub noise_psd_dbm_per_hz: f64,
    pub beta_bu_db: f64,
    pub beta_bi_db: f64,
    pub beta_iu_db: f64,
    pub rho_b_user: f64,
    pub rho_b_user_phase: f64,
    pub rho_b: f64,
    pub rho_b_phase: f64,
    pub rho_i: f64,
    pub rho_i_phase: f64,
    pub rho_i_user: f64,
    pub rho_i_user_phase: f64,
    pub schemes: Vec<String>,
    pub n_sweep: Vec<usize>,
    pub m_sweep: Option<Vec<usize>>,
    pub trials: usize,
    pub seed: u64,
    pub phi_random_starts: usize,
    pub phi_coordinate_passes: usize,
    pub phi_magnitudes: Vec<f64>,
    pub phi_phase_steps: usize,
    pub convergence_lines: usize,
    pub convergence_draws: usize,
}

impl Default for ConfigFile {
    fn default() -> Self {
        let budget = PhiSearchBudget::default();
        let conv = ConvergenceSettings::default();
        Self {
            m: 512,
            k: 8,
            t_block: 1000,
            e_dbm: 13.0,
            bandwidth_hz: 1e8,
            noise_psd_dbm_per_hz: -169.0,
            beta_bu_db: -100.0,
            beta_bi_db: -80.0,
            beta_iu_db: -60.0,
            rho_b_user: 0.5,
            rho_b_user_phase: 0.0,
            rho_b: 0.5,
            rho_b_phase: 0.0,
            rho_i: 0.5,
            rho_i_phase: 0.0,
            rho_i_user: 0.5,
            rho_i_user_phase: 0.0,
            schemes: Scheme::ALL.iter().map(|s| s.name().to_owned()).collect(),
            n_sweep: vec![10, 50, 90, 130, 170, 210],
            m_sweep: None,
            trials: 50,
            seed: 1,
            phi_random_starts: budget.random_starts,
            phi_coordinate_passes: budget.coordinate_passes,
            phi_magnitudes: budget.magnitudes,
            phi_phase_steps: budget.phase_steps,
            convergence_lines: conv.lines,
            convergence_draws: conv.draws,
        }
    }
}

impl ConfigFile {
    pub fn into_config(self) -> Result<ExperimentConfig> {
        let first_n = *self
            .n_sweep
            .first()
            .ok_or_else(|| Error::Config("n_sweep is empty".into()))?;
        let params = SystemParams::new(
            self.m,
            first_n,
            self.k,
            self.t_block,
            self.e_dbm,
            self.bandwidth_hz,
            self.noise_psd_dbm_per_hz,
        )?;
        let path_loss = PathLossSet::new(
            vec![db_to_linear(self.beta_bu_db); self.k],
            db_to_linear(self.beta_bi_db),
            vec![db_to_linear(self.beta_iu_db); self.k],
        )?;
        let polar = |mag: f64, phase: f64| Complex64::from_polar(mag, phase);
        let correlation = CorrelationModel {
            rho_b_user: polar(self.rho_b_user, self.rho_b_user_phase),
            rho_b: polar(self.rho_b, self.rho_b_phase),
            rho_i: polar(self.rho_i, self.rho_i_phase),
            rho_i_user: polar(self.rho_i_user, self.rho_i_user_phase),
        };
        let schemes = self
            .schemes
            .iter()
            .map(|s| s.parse::<Scheme>())
            .collect::<Result<Vec<_>>>()?;
        let config = ExperimentConfig {
            params,
            path_loss,
            correlation,
            schemes,
            n_sweep: self.n_sweep,
            m_sweep: self.m_sweep,
            trials: self.trials,
            seed: self.seed,
            phi_budget: PhiSearchBudget {
                random_starts: self.phi_random_starts,
                coordinate_passes: self.phi_coordinate_passes,
                magnitudes: self.phi_magnitudes,
                phase_steps: self.phi_phase_steps,
            },
            convergence: ConvergenceSettings {
                lines: self.convergence_lines,
                draws: self.convergence_draws,
            },
        };
        config.validate()?;
        Ok(config)
    }
}
