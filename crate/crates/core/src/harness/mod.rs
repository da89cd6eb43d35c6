//! Seeded Monte Carlo experiments: per-trial records, N/M sweeps,
//! convergence studies and their CSV/JSON output.
//!
//! Every trial draws its channels from its own RNG substream keyed by
//! `(n, m, trial)`, so results do not depend on execution order or on the
//! number of threads.

mod config;
mod convergence;
mod output;

pub use config::{ConfigFile, ConvergenceSettings, ExperimentConfig};
pub use convergence::{convergence_study, ConvergenceRow, ConvergenceTable, LineError};
pub use output::{
    write_aggregates_csv, write_aggregates_json, write_convergence_csv, write_plot_data_csv,
    write_records_csv, write_records_json, AggregateRow, RecordRow,
};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::asymptotics::{optimize_phi_mrc, LimitInputs, RateReport};
use crate::beamforming::{mrc, optimal_zf_beamformers, BeamformerSet};
use crate::channel::{
    effective_channels, sample_realization, ChannelRealization, CorrelationSet, ReflectionConfig,
    SystemParams,
};
use crate::error::{validation, Error, Result};
use crate::exec::Execution;
use crate::numerics::{ComplexMatrix, RngStream};

/// Receive scheme compared in a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scheme {
    /// MRC on the direct channels only, IRS off.
    #[serde(rename = "MRC_NO_IRS")]
    MrcNoIrs,
    /// MRC with searched IRS coefficients; needs full cascaded-channel training.
    #[serde(rename = "MRC_IRS")]
    MrcIrs,
    /// Optimal ZF with unit IRS coefficients.
    #[serde(rename = "ZF_OPT_IRS")]
    ZfOptIrs,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::MrcNoIrs, Scheme::MrcIrs, Scheme::ZfOptIrs];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::MrcNoIrs => "MRC_NO_IRS",
            Scheme::MrcIrs => "MRC_IRS",
            Scheme::ZfOptIrs => "ZF_OPT_IRS",
        }
    }

    /// Training symbols per block.
    pub fn tau(self, n: usize, k: usize) -> usize {
        match self {
            Scheme::MrcNoIrs | Scheme::ZfOptIrs => k,
            Scheme::MrcIrs => n + 2 * k - 1,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|sc| sc.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown scheme {s:?}")))
    }
}

/// One scheme evaluated on one channel draw.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRecord {
    pub scheme: Scheme,
    pub n: usize,
    pub m: usize,
    pub trial: usize,
    pub gamma: Vec<f64>,
    pub rate: Vec<f64>,
    pub sum_rate: f64,
    pub tau: usize,
    /// `(T - τ) / T`.
    pub fraction: f64,
    /// Per-user interference leakage of the beamformer.
    pub leakage: Vec<f64>,
    pub degenerate: bool,
}

/// Purposes of the RNG substreams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamPurpose {
    Trial = 0,
    PhiSearch = 1,
    ConvergenceLine = 2,
    ConvergenceDraw = 3,
}

const FIELD_BITS: u32 = 20;
const FIELD_MAX: u64 = (1 << FIELD_BITS) - 1;

/// Packs `(purpose, a, b, c)` into a 64-bit stream id: 4 bits of purpose then
/// three 20-bit fields.
pub fn stream_id(purpose: StreamPurpose, a: usize, b: usize, c: usize) -> Result<u64> {
    let fields = [a as u64, b as u64, c as u64];
    if let Some(f) = fields.iter().find(|&&f| f > FIELD_MAX) {
        return Err(validation(format!("stream field {f} exceeds {FIELD_MAX}")));
    }
    Ok(((purpose as u64) << 60)
        | (fields[0] << (2 * FIELD_BITS))
        | (fields[1] << FIELD_BITS)
        | fields[2])
}

/// Fixed `(N, M)` point of a sweep with its correlation matrices prepared.
#[derive(Debug, Clone)]
pub struct Scenario<'a> {
    config: &'a ExperimentConfig,
    params: SystemParams,
    corr: CorrelationSet,
}

impl<'a> Scenario<'a> {
    pub fn new(config: &'a ExperimentConfig, n: usize, m: usize) -> Result<Self> {
        config.validate()?;
        let params = config.params.with_n(n)?.with_m(m)?;
        let corr = CorrelationSet::exponential(m, n, params.k, &config.correlation)?;
        Ok(Self { config, params, corr })
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn correlation(&self) -> &CorrelationSet {
        &self.corr
    }

    pub fn draw(&self, trial: usize) -> Result<ChannelRealization> {
        let id = stream_id(StreamPurpose::Trial, self.params.n, self.params.m, trial)?;
        sample_realization(&self.params, &self.config.path_loss, &self.corr, &mut RngStream::new(self.config.seed, id))
    }

    /// All enabled schemes on the channel draw of `trial`, in scheme order.
    pub fn run_trial(&self, trial: usize) -> Result<Vec<ResultRecord>> {
        let real = self.draw(trial)?;
        let mut schemes = self.config.schemes.clone();
        schemes.sort();
        schemes
            .into_iter()
            .map(|scheme| self.evaluate(scheme, &real, trial))
            .collect()
    }

    fn evaluate(&self, scheme: Scheme, real: &ChannelRealization, trial: usize) -> Result<ResultRecord> {
        let (n, m, k) = (self.params.n, self.params.m, self.params.k);
        let (eff, set) = match scheme {
            Scheme::MrcNoIrs => {
                let eff = effective_channels(real, &ReflectionConfig::zeros(n))?;
                let set = mrc(&eff);
                (eff, set)
            }
            Scheme::ZfOptIrs => {
                let eff = effective_channels(real, &ReflectionConfig::ones(n))?;
                let set = optimal_zf_beamformers(&eff)?;
                (eff, set)
            }
            Scheme::MrcIrs => {
                let phi = self.search_phi(real, trial)?;
                let eff = effective_channels(real, &phi)?;
                let set = mrc(&eff);
                (eff, set)
            }
        };
        self.record(scheme, trial, &eff, &set, scheme.tau(n, k), m)
    }

    /// Coefficients maximizing the large-M MRC sum rate for the drawn `t`.
    pub fn search_phi(&self, real: &ChannelRealization, trial: usize) -> Result<ReflectionConfig> {
        let pl = &self.config.path_loss;
        let inputs = LimitInputs {
            t_all: &real.t,
            c_i: &self.corr.c_i,
            beta_bu: &pl.beta_bu,
            beta_bi: pl.beta_bi,
            e: self.params.e_fixed,
            sigma2: self.params.sigma2,
        };
        let id = stream_id(StreamPurpose::PhiSearch, self.params.n, self.params.m, trial)?;
        let mut rng = RngStream::new(self.config.seed, id);
        Ok(optimize_phi_mrc(&inputs, &self.config.phi_budget, &mut rng, Execution::Sequential)?.phi)
    }

    fn record(
        &self,
        scheme: Scheme,
        trial: usize,
        eff: &ComplexMatrix,
        set: &BeamformerSet,
        tau: usize,
        m: usize,
    ) -> Result<ResultRecord> {
        let gamma = set.sinrs(eff, self.params.p(), self.params.sigma2)?;
        let rates = RateReport::new(&gamma, self.params.t_block, tau)?;
        Ok(ResultRecord {
            scheme,
            n: self.params.n,
            m,
            trial,
            sum_rate: rates.sum(),
            rate: rates.rates,
            gamma,
            tau,
            fraction: rates.fraction,
            leakage: set.leakages(eff),
            degenerate: set.any_degenerate(),
        })
    }
}

/// Convenience wrapper building a [`Scenario`] for a single trial.
pub fn run_trial(config: &ExperimentConfig, n: usize, m: usize, trial: usize) -> Result<Vec<ResultRecord>> {
    Scenario::new(config, n, m)?.run_trial(trial)
}

/// Output of [`sweep`].
#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    /// Sorted by `(scheme, n, m, trial)`.
    pub records: Vec<ResultRecord>,
    /// Sorted by `(scheme, n, m)`.
    pub aggregates: Vec<AggregateRow>,
}

impl SweepTable {
    pub fn aggregate(&self, scheme: Scheme, n: usize, m: usize) -> Option<&AggregateRow> {
        self.aggregates
            .iter()
            .find(|a| a.scheme == scheme.name() && a.n == n && a.m == m)
    }
}

/// All trials over the N (and optional M) sweep.
pub fn sweep(config: &ExperimentConfig, exec: Execution) -> Result<SweepTable> {
    config.validate()?;
    let scenarios = config
        .grid()
        .into_iter()
        .map(|(n, m)| Scenario::new(config, n, m))
        .collect::<Result<Vec<_>>>()?;
    let tasks: Vec<(usize, usize)> = (0..scenarios.len())
        .flat_map(|s| (0..config.trials).map(move |t| (s, t)))
        .collect();
    let results = exec.map(&tasks, |&(s, t)| scenarios[s].run_trial(t));

    let mut records = Vec::with_capacity(tasks.len() * config.schemes.len());
    for r in results {
        records.extend(r?);
    }
    records.sort_by_key(|r| (r.scheme, r.n, r.m, r.trial));
    let aggregates = aggregate(&records);
    Ok(SweepTable { records, aggregates })
}

/// Mean and standard error of the sum rate per `(scheme, n, m)`, skipping
/// degenerate trials.
pub fn aggregate(records: &[ResultRecord]) -> Vec<AggregateRow> {
    let mut keys: Vec<(Scheme, usize, usize)> = records.iter().map(|r| (r.scheme, r.n, r.m)).collect();
    keys.sort();
    keys.dedup();
    keys.into_iter()
        .map(|(scheme, n, m)| {
            let vals: Vec<f64> = records
                .iter()
                .filter(|r| r.scheme == scheme && r.n == n && r.m == m && !r.degenerate)
                .map(|r| r.sum_rate)
                .collect();
            let count = vals.len();
            let mean = if count == 0 { f64::NAN } else { vals.iter().sum::<f64>() / count as f64 };
            let stderr = if count < 2 {
                0.0
            } else {
                let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1) as f64;
                (var / count as f64).sqrt()
            };
            AggregateRow {
                scheme: scheme.name().to_owned(),
                n,
                m,
                mean_sum_rate: mean,
                stderr,
                trials_used: count,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::PathLossSet;

    fn small_config() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::reference();
        cfg.params = SystemParams::reference(32, 12, 3).unwrap();
        cfg.path_loss = PathLossSet::default_for(3);
        cfg.n_sweep = vec![12];
        cfg.trials = 3;
        cfg.phi_budget.random_starts = 2;
        cfg
    }

    #[test]
    fn stream_id_packing() {
        let id = stream_id(StreamPurpose::PhiSearch, 3, 5, 7).unwrap();
        assert_eq!(id >> 60, 1);
        assert_eq!((id >> 40) & FIELD_MAX, 3);
        assert_eq!((id >> 20) & FIELD_MAX, 5);
        assert_eq!(id & FIELD_MAX, 7);
        assert!(stream_id(StreamPurpose::Trial, 1 << 20, 0, 0).is_err());
        assert_ne!(
            stream_id(StreamPurpose::Trial, 1, 2, 3).unwrap(),
            stream_id(StreamPurpose::Trial, 1, 3, 2).unwrap()
        );
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in Scheme::ALL {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
        }
        assert!("MMSE".parse::<Scheme>().is_err());
        assert_eq!(Scheme::MrcIrs.tau(210, 8), 225);
        assert_eq!(Scheme::ZfOptIrs.tau(210, 8), 8);
    }

    #[test]
    fn trial_is_deterministic() {
        let cfg = small_config();
        let a = run_trial(&cfg, 12, 32, 1).unwrap();
        let b = run_trial(&cfg, 12, 32, 1).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
        let c = run_trial(&cfg, 12, 32, 2).unwrap();
        assert_ne!(a[0].gamma, c[0].gamma);
    }

    #[test]
    fn records_are_internally_consistent() {
        let cfg = small_config();
        for rec in run_trial(&cfg, 12, 32, 0).unwrap() {
            assert!((rec.sum_rate - rec.rate.iter().sum::<f64>()).abs() <= 1e-12);
            let want = (1000 - rec.scheme.tau(12, 3)) as f64 / 1000.0;
            assert_eq!(rec.fraction, want);
            if rec.scheme == Scheme::ZfOptIrs {
                assert!(rec.leakage.iter().all(|&l| l <= 1e-8));
            }
        }
    }

    #[test]
    fn irs_off_equivalence() {
        let mut cfg = small_config();
        cfg.path_loss = PathLossSet::uniform_db(3, -100.0, f64::NEG_INFINITY, -60.0).unwrap();
        let recs = run_trial(&cfg, 12, 32, 0).unwrap();
        let no_irs = recs.iter().find(|r| r.scheme == Scheme::MrcNoIrs).unwrap();
        let irs = recs.iter().find(|r| r.scheme == Scheme::MrcIrs).unwrap();
        for (a, b) in no_irs.gamma.iter().zip(&irs.gamma) {
            assert!((a - b).abs() <= 1e-12 * a);
        }
        assert!(irs.tau > no_irs.tau);
        assert!(irs.sum_rate < no_irs.sum_rate);
    }

    #[test]
    fn single_trial_aggregate_is_identity() {
        let mut cfg = small_config();
        cfg.trials = 1;
        cfg.schemes = vec![Scheme::ZfOptIrs];
        let table = sweep(&cfg, Execution::Sequential).unwrap();
        assert_eq!(table.records.len(), 1);
        assert_eq!(table.aggregates.len(), 1);
        let agg = &table.aggregates[0];
        assert_eq!(agg.mean_sum_rate, table.records[0].sum_rate);
        assert_eq!(agg.stderr, 0.0);
        assert_eq!(agg.trials_used, 1);
    }

    #[test]
    fn sweep_independent_of_execution_mode() {
        let mut cfg = small_config();
        cfg.n_sweep = vec![8, 12];
        cfg.m_sweep = Some(vec![16, 32]);
        let a = sweep(&cfg, Execution::Sequential).unwrap();
        let b = sweep(&cfg, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.records.len(), 3 * 2 * 2 * 3);
        assert_eq!(a.aggregates.len(), 3 * 2 * 2);
    }

    #[test]
    fn degenerate_trials_are_excluded() {
        let mk = |trial, sum_rate, degenerate| ResultRecord {
            scheme: Scheme::ZfOptIrs,
            n: 4,
            m: 8,
            trial,
            gamma: vec![],
            rate: vec![],
            sum_rate,
            tau: 2,
            fraction: 0.9,
            leakage: vec![],
            degenerate,
        };
        let agg = aggregate(&[mk(0, 1.0, false), mk(1, 100.0, true), mk(2, 3.0, false)]);
        assert_eq!(agg.len(), 1);
        assert_eq!(agg[0].mean_sum_rate, 2.0);
        assert_eq!(agg[0].trials_used, 2);
        assert!((agg[0].stderr - 1.0).abs() < 1e-15);
    }
}
