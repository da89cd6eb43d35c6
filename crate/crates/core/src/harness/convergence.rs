//! Finite-M Monte Carlo SINR against the closed-form large-M limits.
//!
//! A line fixes the user-IRS channels `t`; for every M the BS-side links are
//! redrawn `draws` times and the per-user SINR averaged. Power per user is
//! `E/M` throughout.

use serde::Serialize;

use super::{stream_id, ExperimentConfig, StreamPurpose};
use crate::asymptotics::{
    mrc_irs_asymptotic_sinrs, mrc_no_irs_asymptotic_sinrs, zf_subopt_asymptotic_sinrs, LimitInputs, Regime,
};
use crate::beamforming::{mrc, suboptimal_zf_beamformers};
use crate::channel::{effective_channels, sample_realization_with_t, sample_user_irs, CorrelationSet, ReflectionConfig};
use crate::error::{validation, Result};
use crate::exec::Execution;
use crate::numerics::{ComplexMatrix, RngStream};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub regime: Regime,
    pub line: usize,
    pub m: usize,
    pub user: usize,
    pub mc_mean: f64,
    pub limit: f64,
    pub rel_error: f64,
}

/// User-averaged relative error of one line at one M.
#[derive(Debug, Clone, PartialEq)]
pub struct LineError {
    pub regime: Regime,
    pub line: usize,
    pub m: usize,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub n: usize,
    pub m_values: Vec<usize>,
    /// Ordered by `(regime, line, m, user)`.
    pub rows: Vec<ConvergenceRow>,
    pub line_errors: Vec<LineError>,
}

impl ConvergenceTable {
    /// Errors of one line in M order.
    pub fn line_curve(&self, regime: Regime, line: usize) -> Vec<f64> {
        self.line_errors
            .iter()
            .filter(|e| e.regime == regime && e.line == line)
            .map(|e| e.error)
            .collect()
    }

    /// Error at each M averaged over lines.
    pub fn mean_curve(&self, regime: Regime) -> Vec<f64> {
        self.m_values
            .iter()
            .map(|&m| {
                let v: Vec<f64> = self
                    .line_errors
                    .iter()
                    .filter(|e| e.regime == regime && e.m == m)
                    .map(|e| e.error)
                    .collect();
                v.iter().sum::<f64>() / v.len() as f64
            })
            .collect()
    }

    /// Share of lines whose error strictly decreases along the M sweep;
    /// `None` with fewer than two M values.
    pub fn decreasing_fraction(&self, regime: Regime) -> Option<f64> {
        if self.m_values.len() < 2 {
            return None;
        }
        let lines: Vec<usize> = {
            let mut l: Vec<usize> = self.line_errors.iter().filter(|e| e.regime == regime).map(|e| e.line).collect();
            l.dedup();
            l
        };
        if lines.is_empty() {
            return None;
        }
        let good = lines
            .iter()
            .filter(|&&l| self.line_curve(regime, l).windows(2).all(|w| w[1] < w[0]))
            .count();
        Some(good as f64 / lines.len() as f64)
    }
}

fn relative_error(mc: f64, limit: f64) -> f64 {
    if limit == 0.0 {
        mc.abs()
    } else {
        (mc - limit).abs() / limit
    }
}

/// Runs every line of the study for the given regimes over `config.m_values()`
/// at `N = config.n_sweep[0]`.
pub fn convergence_study(config: &ExperimentConfig, regimes: &[Regime], exec: Execution) -> Result<ConvergenceTable> {
    config.validate()?;
    if regimes.is_empty() {
        return Err(validation("no regimes requested"));
    }
    let n = config.n_sweep[0];
    let k = config.params.k;
    let ms = config.m_values();
    let pl = &config.path_loss;
    let settings = &config.convergence;

    let params: Vec<_> = ms
        .iter()
        .map(|&m| config.params.with_n(n)?.with_m(m))
        .collect::<Result<_>>()?;
    let corrs: Vec<CorrelationSet> = ms
        .iter()
        .map(|&m| CorrelationSet::exponential(m, n, k, &config.correlation))
        .collect::<Result<_>>()?;

    let lines: Vec<ComplexMatrix> = (0..settings.lines)
        .map(|l| {
            let id = stream_id(StreamPurpose::ConvergenceLine, n, 0, l)?;
            sample_user_irs(&params[0], pl, &corrs[0], &mut RngStream::new(config.seed, id))
        })
        .collect::<Result<_>>()?;

    let limits: Vec<Vec<Vec<f64>>> = lines
        .iter()
        .map(|t| {
            let inputs = LimitInputs {
                t_all: t,
                c_i: &corrs[0].c_i,
                beta_bu: &pl.beta_bu,
                beta_bi: pl.beta_bi,
                e: config.params.e_fixed,
                sigma2: config.params.sigma2,
            };
            regimes
                .iter()
                .map(|r| {
                    Ok(match r {
                        Regime::MrcNoIrs => mrc_no_irs_asymptotic_sinrs(inputs.e, inputs.sigma2, inputs.beta_bu)?,
                        Regime::MrcIrs => mrc_irs_asymptotic_sinrs(&ReflectionConfig::ones(n), &inputs)?,
                        Regime::ZfSuboptIrs => zf_subopt_asymptotic_sinrs(&inputs)?,
                    }
                    .gamma_bar)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let tasks: Vec<(usize, usize)> = (0..lines.len())
        .flat_map(|l| (0..ms.len()).map(move |mi| (l, mi)))
        .collect();
    let means = exec.map(&tasks, |&(l, mi)| -> Result<Vec<Vec<f64>>> {
        let p = &params[mi];
        let mut acc = vec![vec![0.0; k]; regimes.len()];
        for d in 0..settings.draws {
            let id = stream_id(StreamPurpose::ConvergenceDraw, l, ms[mi], d)?;
            let real = sample_realization_with_t(p, pl, &corrs[mi], lines[l].clone(), &mut RngStream::new(config.seed, id))?;
            for (ri, regime) in regimes.iter().enumerate() {
                let gammas = match regime {
                    Regime::MrcNoIrs => {
                        let eff = effective_channels(&real, &ReflectionConfig::zeros(n))?;
                        mrc(&eff).sinrs(&eff, p.p(), p.sigma2)?
                    }
                    Regime::MrcIrs => {
                        let eff = effective_channels(&real, &ReflectionConfig::ones(n))?;
                        mrc(&eff).sinrs(&eff, p.p(), p.sigma2)?
                    }
                    Regime::ZfSuboptIrs => {
                        let eff = effective_channels(&real, &ReflectionConfig::ones(n))?;
                        suboptimal_zf_beamformers(&real, &corrs[mi].c_i)?.sinrs(&eff, p.p(), p.sigma2)?
                    }
                };
                for (a, g) in acc[ri].iter_mut().zip(gammas) {
                    *a += g;
                }
            }
        }
        for row in acc.iter_mut() {
            for a in row.iter_mut() {
                *a /= settings.draws as f64;
            }
        }
        Ok(acc)
    });
    let means: Vec<Vec<Vec<f64>>> = means.into_iter().collect::<Result<_>>()?;

    let mut rows = Vec::new();
    let mut line_errors = Vec::new();
    for (ri, &regime) in regimes.iter().enumerate() {
        for l in 0..lines.len() {
            for (mi, &m) in ms.iter().enumerate() {
                let mc = &means[l * ms.len() + mi][ri];
                let lim = &limits[l][ri];
                let mut total = 0.0;
                for user in 0..k {
                    let rel_error = relative_error(mc[user], lim[user]);
                    total += rel_error;
                    rows.push(ConvergenceRow {
                        regime,
                        line: l,
                        m,
                        user,
                        mc_mean: mc[user],
                        limit: lim[user],
                        rel_error,
                    });
                }
                line_errors.push(LineError {
                    regime,
                    line: l,
                    m,
                    error: total / k as f64,
                });
            }
        }
    }
    Ok(ConvergenceTable {
        n,
        m_values: ms,
        rows,
        line_errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{CorrelationModel, PathLossSet, SystemParams};

    fn config(ms: Vec<usize>) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::reference();
        cfg.params = SystemParams::reference(ms[0], 8, 2).unwrap();
        cfg.path_loss = PathLossSet::uniform_db(2, -100.0, -70.0, -40.0).unwrap();
        cfg.correlation = CorrelationModel::uncorrelated();
        cfg.n_sweep = vec![8];
        cfg.m_sweep = Some(ms);
        cfg.convergence.lines = 2;
        cfg.convergence.draws = 20;
        cfg
    }

    #[test]
    fn single_m_gives_one_row_per_user_and_no_trend() {
        let cfg = config(vec![32]);
        let table = convergence_study(&cfg, &[Regime::MrcIrs], Execution::Sequential).unwrap();
        assert_eq!(table.rows.len(), 2 * 2);
        assert_eq!(table.line_errors.len(), 2);
        assert_eq!(table.decreasing_fraction(Regime::MrcIrs), None);
    }

    #[test]
    fn deterministic_and_mode_independent() {
        let cfg = config(vec![16, 32]);
        let regimes = [Regime::MrcIrs, Regime::ZfSuboptIrs, Regime::MrcNoIrs];
        let a = convergence_study(&cfg, &regimes, Execution::Sequential).unwrap();
        let b = convergence_study(&cfg, &regimes, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows.len(), 3 * 2 * 2 * 2);
        for r in &a.rows {
            assert!(r.mc_mean > 0.0 && r.limit > 0.0);
        }
    }

    #[test]
    fn irs_free_hardening() {
        let mut cfg = config(vec![64, 256, 1024]);
        cfg.path_loss = PathLossSet::uniform_db(2, -100.0, f64::NEG_INFINITY, -40.0).unwrap();
        cfg.convergence.lines = 1;
        cfg.convergence.draws = 100;
        let table = convergence_study(&cfg, &[Regime::MrcIrs], Execution::Parallel).unwrap();
        let err = *table.mean_curve(Regime::MrcIrs).last().unwrap();
        assert!(err <= 0.05, "{err}");
    }
}
