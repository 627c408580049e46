use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::qp::{solve_qp, QpOptions, QpStatus, ZERO_WEIGHT_TOL};
use super::sample::{draw_with_sigmas, observations_for};
use crate::error::{Error, Result};
use crate::replica::RegularizedProblem;
use crate::rng;

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub se: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        if values.is_empty() {
            return Self { mean: f64::NAN, se: f64::NAN };
        }
        let mean = values.iter().sum::<f64>() / n;
        if values.len() < 2 {
            return Self { mean, se: f64::NAN };
        }
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Self { mean, se: (var / n).sqrt() }
    }
}

/// Histogram of the nonzero weights; `masses` are fractions of all
/// weights, so `sum(masses) + condensate = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub masses: Vec<f64>,
    pub condensate: f64,
}

impl Histogram {
    /// Freedman-Diaconis binning of `values`.
    pub fn freedman_diaconis(values: &[f64], total: usize) -> Self {
        let total = total.max(1) as f64;
        let condensate = 1.0 - values.len() as f64 / total;
        if values.is_empty() {
            return Self { edges: vec![], masses: vec![], condensate };
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
        let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
        let width = 2.0 * iqr / (sorted.len() as f64).cbrt();
        let bins = if width > 0.0 && hi > lo { (((hi - lo) / width).ceil() as usize).clamp(1, 10_000) } else { 1 };
        let step = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
        let edges: Vec<f64> = (0..=bins).map(|k| lo + step * k as f64).collect();
        let mut masses = vec![0.0; bins];
        for &v in &sorted {
            let k = (((v - lo) / step) as usize).min(bins - 1);
            masses[k] += 1.0 / total;
        }
        Self { edges, masses, condensate }
    }
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] * (1.0 - frac) + sorted[i + 1] * frac
    } else {
        sorted[i]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleOutcome {
    pub seed: u64,
    pub n0: f64,
    pub q0_hat: f64,
    pub f_in_sample: f64,
    pub status: QpStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleMeasurement {
    pub n: usize,
    pub t: usize,
    /// `N / T` after rounding `T`.
    pub realized_r: f64,
    pub n_samples: usize,
    /// Samples whose QP hit the iteration cap; excluded from the statistics.
    pub n_failed: usize,
    pub n0: Stat,
    pub q0_hat: Stat,
    pub f_in_sample: Stat,
    pub histogram: Histogram,
    #[serde(skip)]
    pub samples: Vec<SampleOutcome>,
    /// Nonzero weights of all successful samples, in sample order.
    #[serde(skip)]
    pub pooled_nonzero: Vec<f64>,
}

pub fn measure_ensemble(
    problem: &RegularizedProblem,
    n: usize,
    n_samples: usize,
    base_seed: u64,
) -> Result<EnsembleMeasurement> {
    measure_ensemble_with(problem, n, n_samples, base_seed, &QpOptions::default())
}

/// Solves `n_samples` independent instances with `T = round(N / r)`.
///
/// The estimated variance is measured against the true diagonal covariance
/// and normalized by the true optimum `w*_i ~ 1/sigma_i^2`.
pub fn measure_ensemble_with(
    problem: &RegularizedProblem,
    n: usize,
    n_samples: usize,
    base_seed: u64,
    opts: &QpOptions,
) -> Result<EnsembleMeasurement> {
    if n == 0 || n_samples == 0 {
        return Err(Error::InvalidArgument("ensemble needs N >= 1 and at least one sample".into()));
    }
    let t = observations_for(n, problem.r);
    let sigmas = problem.profile.asset_sigmas(n);
    let inv_sum: f64 = sigmas.iter().map(|s| 1.0 / (s * s)).sum();
    let optimum_variance = (n * n) as f64 / inv_sum;

    let runs: Vec<(SampleOutcome, Vec<f64>)> = (0..n_samples as u64)
        .into_par_iter()
        .map(|k| {
            let seed = rng::sample_seed(base_seed, k);
            let sample = draw_with_sigmas(&sigmas, t, seed)?;
            let sol = solve_qp(&sample, problem.eta1, problem.eta2, opts)?;
            let variance: f64 = sigmas.iter().zip(&sol.weights).map(|(s, w)| s * s * w * w).sum();
            let nonzero: Vec<f64> = sol.weights.iter().cloned().filter(|w| w.abs() > ZERO_WEIGHT_TOL).collect();
            let outcome = SampleOutcome {
                seed,
                n0: sol.zero_fraction(),
                q0_hat: variance / optimum_variance,
                f_in_sample: sol.objective,
                status: sol.status,
            };
            Ok((outcome, nonzero))
        })
        .collect::<Result<_>>()?;

    let ok: Vec<&(SampleOutcome, Vec<f64>)> = runs.iter().filter(|(o, _)| o.status != QpStatus::MaxIter).collect();
    let pick = |f: fn(&SampleOutcome) -> f64| ok.iter().map(|(o, _)| f(o)).collect::<Vec<_>>();
    let pooled_nonzero: Vec<f64> = ok.iter().flat_map(|(_, w)| w.iter().cloned()).collect();
    let histogram = Histogram::freedman_diaconis(&pooled_nonzero, ok.len() * n);
    Ok(EnsembleMeasurement {
        n,
        t,
        realized_r: n as f64 / t as f64,
        n_samples,
        n_failed: runs.len() - ok.len(),
        n0: Stat::of(&pick(|o| o.n0)),
        q0_hat: Stat::of(&pick(|o| o.q0_hat)),
        f_in_sample: Stat::of(&pick(|o| o.f_in_sample)),
        histogram,
        samples: runs.iter().map(|(o, _)| o.clone()).collect(),
        pooled_nonzero,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::replica::VolatilityProfile;

    #[test]
    fn stat_basics() {
        let s = Stat::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert!((s.se - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
        assert!(Stat::of(&[1.0]).se.is_nan());
    }

    #[test]
    fn histogram_masses_sum_with_condensate() {
        let vals: Vec<f64> = (0..1000).map(|k| (k as f64 * 0.37).sin()).collect();
        let h = Histogram::freedman_diaconis(&vals, 1250);
        assert!((h.masses.iter().sum::<f64>() + h.condensate - 1.0).abs() < 1e-12);
        assert!((h.condensate - 0.2).abs() < 1e-12);
        assert_eq!(h.edges.len(), h.masses.len() + 1);
        let single = Histogram::freedman_diaconis(&[2.0, 2.0], 2);
        assert_eq!(single.masses, vec![1.0]);
    }

    #[test]
    fn small_r_proxy_is_nearly_error_free() {
        // r = 0.01, eta = 0: replica value 1 / (1 - r).
        let p = RegularizedProblem::symmetric(0.01, 0.0, VolatilityProfile::uniform(1.0).unwrap()).unwrap();
        let m = measure_ensemble(&p, 50, 20, 3).unwrap();
        assert_eq!(m.t, 5000);
        assert_eq!(m.n_failed, 0);
        assert!((m.q0_hat.mean - 1.0 / 0.99).abs() < 4.0 * m.q0_hat.se + 2e-3);
        assert_eq!(m.n0.mean, 0.0);
        assert!(m.q0_hat.mean >= 1.0 - 3.0 * m.q0_hat.se);
    }

    #[test]
    fn deterministic_under_parallel_schedule() {
        let p = RegularizedProblem::symmetric(0.5, 0.05, VolatilityProfile::two_point(1.0, 2.0, 0.5).unwrap()).unwrap();
        let a = measure_ensemble(&p, 20, 8, 100).unwrap();
        let b = measure_ensemble(&p, 20, 8, 100).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.samples[3].seed, 103);
    }
}
