//! Search over IRS coefficients for the large-M MRC sum rate.
//!
//! Multi-start: the all-zero and all-one vectors plus random unit-modulus
//! starts, each refined by coordinate ascent over a magnitude x phase grid.
//! A coordinate move changes one row of `E = diag(φ) T`, so the Gram matrix
//! `Eᴴ C E` is updated in `O(K²)` per candidate instead of rebuilt.

use std::f64::consts::TAU;

use num_complex::Complex64;

use super::{correlate, irs_gram, mrc_sinr_from_gram, reflected, LimitInputs};
use crate::channel::ReflectionConfig;
use crate::error::{validation, Result};
use crate::exec::Execution;
use crate::numerics::{ComplexMatrix, RngStream};

#[derive(Debug, Clone, PartialEq)]
pub struct PhiSearchBudget {
    /// Random unit-modulus starts on top of the two baselines.
    pub random_starts: usize,
    /// Full sweeps over the elements per start.
    pub coordinate_passes: usize,
    /// Nonzero magnitudes tried per element; zero is always tried.
    pub magnitudes: Vec<f64>,
    /// Phases per magnitude, evenly spaced on the circle.
    pub phase_steps: usize,
}

impl Default for PhiSearchBudget {
    fn default() -> Self {
        Self {
            random_starts: 64,
            coordinate_passes: 2,
            magnitudes: vec![1.0 / 3.0, 2.0 / 3.0, 1.0],
            phase_steps: 16,
        }
    }
}

impl PhiSearchBudget {
    pub fn validate(&self) -> Result<()> {
        if self.phase_steps == 0 {
            return Err(validation("phase_steps must be >= 1"));
        }
        if let Some(m) = self.magnitudes.iter().find(|&&m| !(0.0..=1.0).contains(&m)) {
            return Err(validation(format!("grid magnitude {m} outside [0, 1]")));
        }
        Ok(())
    }

    /// Candidate values for one coefficient: zero first, then magnitude-major.
    pub fn grid(&self) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0)];
        for &m in self.magnitudes.iter().filter(|&&m| m > 0.0) {
            for q in 0..self.phase_steps {
                out.push(Complex64::from_polar(m, TAU * q as f64 / self.phase_steps as f64));
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct PhiSearchResult {
    pub phi: ReflectionConfig,
    /// `Σ_k log₂(1 + γ̄_k(φ))`.
    pub objective: f64,
    /// Index of the winning start: 0 = zeros, 1 = ones, 2.. = random.
    pub start_index: usize,
}

fn sum_rate(gram: &ComplexMatrix, inputs: &LimitInputs<'_>) -> f64 {
    (0..gram.ncols())
        .map(|k| {
            let g = mrc_sinr_from_gram(gram, inputs.beta_bu[k], inputs.beta_bi, inputs.e, inputs.sigma2, k);
            (1.0 + g).log2()
        })
        .sum()
}

struct Refiner<'a> {
    inputs: &'a LimitInputs<'a>,
    c_mat: ComplexMatrix,
    grid: Vec<Complex64>,
    passes: usize,
}

impl Refiner<'_> {
    fn refine(&self, start: Vec<Complex64>) -> Result<(Vec<Complex64>, f64)> {
        let t = self.inputs.t_all;
        let (n, k_users) = t.shape();
        let mut phi = start;
        let mut cfg = ReflectionConfig::new(phi.clone())?;
        let mut gram = irs_gram(&cfg, t, self.inputs.c_i)?;
        let mut best = sum_rate(&gram, self.inputs);

        let mut trial = gram.clone();
        let mut d = vec![Complex64::new(0.0, 0.0); k_users];
        for _ in 0..self.passes {
            // U = C E, refreshed each pass to shed accumulated rounding.
            let mut u = correlate(self.inputs.c_i, &reflected(&cfg, t)?);
            for el in 0..n {
                let c_nn = self.c_mat[(el, el)].re;
                let mut chosen: Option<Complex64> = None;
                for &v in &self.grid {
                    let delta = v - phi[el];
                    if delta == Complex64::new(0.0, 0.0) {
                        continue;
                    }
                    for k in 0..k_users {
                        d[k] = delta * t[(el, k)];
                    }
                    for k in 0..k_users {
                        for j in 0..k_users {
                            trial[(k, j)] = gram[(k, j)]
                                + d[k].conj() * u[(el, j)]
                                + u[(el, k)].conj() * d[j]
                                + d[k].conj() * d[j] * c_nn;
                        }
                    }
                    let obj = sum_rate(&trial, self.inputs);
                    if obj > best {
                        best = obj;
                        chosen = Some(v);
                    }
                }
                if let Some(v) = chosen {
                    let delta = v - phi[el];
                    for k in 0..k_users {
                        d[k] = delta * t[(el, k)];
                    }
                    for k in 0..k_users {
                        for j in 0..k_users {
                            gram[(k, j)] += d[k].conj() * u[(el, j)]
                                + u[(el, k)].conj() * d[j]
                                + d[k].conj() * d[j] * c_nn;
                        }
                    }
                    for row in 0..n {
                        let c = self.c_mat[(row, el)];
                        for k in 0..k_users {
                            u[(row, k)] += c * d[k];
                        }
                    }
                    phi[el] = v;
                }
            }
            cfg = ReflectionConfig::new(phi.clone())?;
            gram = irs_gram(&cfg, t, self.inputs.c_i)?;
            best = sum_rate(&gram, self.inputs);
        }
        Ok((phi, best))
    }
}

/// Best coefficients found for the large-M MRC sum rate.
///
/// Random starts are drawn from `rng` up front, so the result does not depend
/// on `exec`. Ties between starts go to the lower start index.
pub fn optimize_phi_mrc(
    inputs: &LimitInputs<'_>,
    budget: &PhiSearchBudget,
    rng: &mut RngStream,
    exec: Execution,
) -> Result<PhiSearchResult> {
    inputs.check()?;
    budget.validate()?;
    let n = inputs.elements();
    let mut starts = vec![vec![Complex64::new(0.0, 0.0); n], vec![Complex64::new(1.0, 0.0); n]];
    for _ in 0..budget.random_starts {
        starts.push((0..n).map(|_| Complex64::from_polar(1.0, TAU * rng.uniform())).collect());
    }

    let refiner = Refiner {
        inputs,
        c_mat: inputs.c_i.matrix(),
        grid: budget.grid(),
        passes: budget.coordinate_passes,
    };
    let outcomes = exec.map(&starts, |s| refiner.refine(s.clone()));

    let mut best: Option<(usize, Vec<Complex64>, f64)> = None;
    for (idx, outcome) in outcomes.into_iter().enumerate() {
        let (phi, obj) = outcome?;
        if best.as_ref().is_none_or(|(_, _, b)| obj > *b) {
            best = Some((idx, phi, obj));
        }
    }
    let (start_index, phi, objective) = best.expect("at least the two baselines are evaluated");
    debug_assert!(objective.is_finite());
    Ok(PhiSearchResult {
        phi: ReflectionConfig::new(phi)?,
        objective,
        start_index,
    })
}

/// Sum-rate objective of a given coefficient vector.
pub fn objective(phi: &ReflectionConfig, inputs: &LimitInputs<'_>) -> Result<f64> {
    Ok(sum_rate(&irs_gram(phi, inputs.t_all, inputs.c_i)?, inputs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::Correlation;
    use crate::numerics::sample_complex_gaussian;

    fn setup(n: usize, k: usize, seed: u64) -> (ComplexMatrix, Correlation, Vec<f64>) {
        let t = sample_complex_gaussian(n, k, 1.0, &mut RngStream::new(seed, 0)).unwrap();
        let ci = Correlation::exponential(n, Complex64::new(0.5, 0.0)).unwrap();
        (t, ci, vec![0.05; k])
    }

    #[test]
    fn grid_layout() {
        let b = PhiSearchBudget::default();
        let g = b.grid();
        assert_eq!(g.len(), 1 + 3 * 16);
        assert_eq!(g[0], Complex64::new(0.0, 0.0));
        assert!(g.iter().all(|z| z.norm() <= 1.0 + 1e-15));
        assert!(PhiSearchBudget { phase_steps: 0, ..b.clone() }.validate().is_err());
        assert!(PhiSearchBudget { magnitudes: vec![1.5], ..b }.validate().is_err());
    }

    #[test]
    fn incremental_gram_matches_rebuild() {
        let (t, ci, bu) = setup(7, 3, 1);
        let inputs = LimitInputs { t_all: &t, c_i: &ci, beta_bu: &bu, beta_bi: 0.01, e: 1.0, sigma2: 0.1 };
        let refiner = Refiner {
            inputs: &inputs,
            c_mat: ci.matrix(),
            grid: PhiSearchBudget::default().grid(),
            passes: 1,
        };
        let (phi, obj) = refiner.refine(vec![Complex64::new(1.0, 0.0); 7]).unwrap();
        let direct = objective(&ReflectionConfig::new(phi).unwrap(), &inputs).unwrap();
        assert!((obj - direct).abs() <= 1e-10 * direct);
    }

    #[test]
    fn never_below_baselines() {
        for seed in 0..4 {
            let (t, ci, bu) = setup(12, 4, seed);
            let inputs = LimitInputs { t_all: &t, c_i: &ci, beta_bu: &bu, beta_bi: 0.02, e: 1.0, sigma2: 0.05 };
            let budget = PhiSearchBudget { random_starts: 4, ..Default::default() };
            let res = optimize_phi_mrc(&inputs, &budget, &mut RngStream::new(seed, 1), Execution::Sequential).unwrap();
            let ones = objective(&ReflectionConfig::ones(12), &inputs).unwrap();
            let zeros = objective(&ReflectionConfig::zeros(12), &inputs).unwrap();
            assert!(res.objective >= ones && res.objective >= zeros);
            let check = objective(&res.phi, &inputs).unwrap();
            assert!((check - res.objective).abs() <= 1e-12 * check);
        }
    }

    #[test]
    fn single_user_beats_unit_coefficients() {
        let (t, ci, bu) = setup(8, 1, 9);
        let inputs = LimitInputs { t_all: &t, c_i: &ci, beta_bu: &bu, beta_bi: 0.1, e: 1.0, sigma2: 1.0 };
        let res = optimize_phi_mrc(&inputs, &PhiSearchBudget::default(), &mut RngStream::new(1, 1), Execution::Sequential)
            .unwrap();
        assert!(res.objective >= objective(&ReflectionConfig::ones(8), &inputs).unwrap());
    }

    #[test]
    fn matches_exhaustive_grid_for_two_elements() {
        let budget = PhiSearchBudget {
            random_starts: 16,
            coordinate_passes: 3,
            magnitudes: vec![0.5, 1.0],
            phase_steps: 4,
        };
        let grid = budget.grid();
        for seed in 0..5 {
            let (t, ci, _) = setup(2, 2, 100 + seed);
            let bu = [0.02, 0.03];
            let inputs = LimitInputs { t_all: &t, c_i: &ci, beta_bu: &bu, beta_bi: 0.5, e: 1.0, sigma2: 0.01 };
            let mut grid_best = f64::NEG_INFINITY;
            for &a in &grid {
                for &b in &grid {
                    let obj = objective(&ReflectionConfig::new(vec![a, b]).unwrap(), &inputs).unwrap();
                    grid_best = grid_best.max(obj);
                }
            }
            let res = optimize_phi_mrc(&inputs, &budget, &mut RngStream::new(seed, 2), Execution::Sequential).unwrap();
            assert!(res.objective >= grid_best * (1.0 - 1e-12), "seed {seed}: {} < {grid_best}", res.objective);
        }
    }

    #[test]
    fn deterministic_and_mode_independent() {
        let (t, ci, bu) = setup(10, 3, 4);
        let inputs = LimitInputs { t_all: &t, c_i: &ci, beta_bu: &bu, beta_bi: 0.02, e: 1.0, sigma2: 0.05 };
        let budget = PhiSearchBudget { random_starts: 1, coordinate_passes: 1, ..Default::default() };
        let a = optimize_phi_mrc(&inputs, &budget, &mut RngStream::new(3, 3), Execution::Sequential).unwrap();
        let b = optimize_phi_mrc(&inputs, &budget, &mut RngStream::new(3, 3), Execution::Parallel).unwrap();
        assert_eq!(a.phi, b.phi);
        assert_eq!(a.objective.to_bits(), b.objective.to_bits());
        assert_eq!(a.start_index, b.start_index);
    }
}
