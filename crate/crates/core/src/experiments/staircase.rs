use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::table::{Cell, Table};
use crate::replica::{solve_saddle, RegularizedProblem, ReplicaSolution, VolatilityProfile};
use crate::rng;
use crate::sim::{draw_sample, solve_qp_warm, QpOptions, QpSolution, QpStatus, Stat, ZERO_WEIGHT_TOL};

/// Zero-weight fractions of one sample along an increasing `eta` path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Staircase {
    pub n: usize,
    pub t: usize,
    pub seed: u64,
    pub etas: Vec<f64>,
    /// NaN where the solve failed.
    pub n0: Vec<f64>,
    /// Distinct asset deviations, ascending.
    pub sigma_classes: Vec<f64>,
    /// `class_n0[c][k]`: zero fraction within class `c` at `etas[k]`.
    pub class_n0: Vec<Vec<f64>>,
    pub failures: usize,
}

impl Staircase {
    pub fn is_nondecreasing(&self) -> bool {
        self.n0.windows(2).all(|w| w[1] >= w[0])
    }

    /// Steps where the zero count went down.
    pub fn decreases(&self) -> usize {
        self.n0.windows(2).filter(|w| w[1] < w[0]).count()
    }
}

fn check_path(etas: &[f64]) -> Result<()> {
    if etas.is_empty() {
        return Err(Error::InvalidArgument("eta path is empty".into()));
    }
    if etas.iter().any(|&e| !(e >= 0.0 && e.is_finite())) || etas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("eta path must be finite, nonnegative and increasing".into()));
    }
    Ok(())
}

/// Warm-started QP solves for one sample along `etas` (symmetric penalty).
pub fn elimination_staircase(
    n: usize,
    t: usize,
    profile: &VolatilityProfile,
    etas: &[f64],
    seed: u64,
    opts: &QpOptions,
) -> Result<Staircase> {
    check_path(etas)?;
    let sample = draw_sample(profile, n, t, seed)?;
    let mut classes = sample.sigmas.clone();
    classes.sort_by(f64::total_cmp);
    classes.dedup();
    let class_of: Vec<usize> =
        sample.sigmas.iter().map(|s| classes.iter().position(|c| c == s).expect("class exists")).collect();
    let class_size: Vec<usize> = (0..classes.len()).map(|c| class_of.iter().filter(|&&k| k == c).count()).collect();

    let mut n0 = Vec::with_capacity(etas.len());
    let mut class_n0 = vec![Vec::with_capacity(etas.len()); classes.len()];
    let mut failures = 0;
    let mut prev: Option<QpSolution> = None;
    for &eta in etas {
        let warm = prev.as_ref().and_then(|p| p.warm_start.as_ref());
        match solve_qp_warm(&sample, eta, eta, opts, warm) {
            Ok(sol) if sol.status != QpStatus::MaxIter => {
                n0.push(sol.zero_fraction());
                let mut zeros = vec![0usize; classes.len()];
                for (w, &c) in sol.weights.iter().zip(&class_of) {
                    if w.abs() <= ZERO_WEIGHT_TOL {
                        zeros[c] += 1;
                    }
                }
                for c in 0..classes.len() {
                    class_n0[c].push(zeros[c] as f64 / class_size[c] as f64);
                }
                prev = Some(sol);
            }
            _ => {
                failures += 1;
                n0.push(f64::NAN);
                class_n0.iter_mut().for_each(|v| v.push(f64::NAN));
            }
        }
    }
    Ok(Staircase { n, t, seed, etas: etas.to_vec(), n0, sigma_classes: classes, class_n0, failures })
}

/// Replica solutions at fixed `r` along `etas`, each warm-started from the
/// previous one.
pub fn analytic_condensate_path(profile: &VolatilityProfile, r: f64, etas: &[f64]) -> Vec<Result<ReplicaSolution>> {
    let mut prev: Option<ReplicaSolution> = None;
    etas.iter()
        .map(|&eta| {
            let p = RegularizedProblem::symmetric(r, eta, profile.clone())?;
            let sol = solve_saddle(&p, prev.as_ref().map(|s| &s.params));
            if let Ok(s) = &sol {
                prev = Some(s.clone());
            }
            sol
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaircaseEnsemble {
    pub etas: Vec<f64>,
    pub realized_r: f64,
    pub mean_n0: Vec<Stat>,
    /// Replica `n0` at `r = N / T`, NaN where unsolved.
    pub analytic_n0: Vec<f64>,
    pub staircases: Vec<Staircase>,
}

impl StaircaseEnsemble {
    pub fn table(&self) -> Table {
        let mut header = vec!["eta".to_string(), "analytic_n0".into(), "mean_n0".into(), "mean_n0_se".into()];
        header.extend(self.staircases.iter().map(|s| format!("n0_seed_{}", s.seed)));
        let mut t = Table::new(header);
        for (k, &eta) in self.etas.iter().enumerate() {
            let mut row: Vec<Cell> =
                vec![eta.into(), self.analytic_n0[k].into(), self.mean_n0[k].mean.into(), self.mean_n0[k].se.into()];
            row.extend(self.staircases.iter().map(|s| Cell::from(s.n0[k])));
            t.push(row);
        }
        t
    }
}

/// `n_samples` staircases with seeds `base_seed + k`, averaged per `eta`.
pub fn staircase_ensemble(
    n: usize,
    t: usize,
    profile: &VolatilityProfile,
    etas: &[f64],
    n_samples: usize,
    base_seed: u64,
    opts: &QpOptions,
) -> Result<StaircaseEnsemble> {
    check_path(etas)?;
    if n_samples == 0 || t == 0 {
        return Err(Error::InvalidArgument("staircase ensemble needs T >= 1 and at least one sample".into()));
    }
    let staircases: Vec<Staircase> = (0..n_samples as u64)
        .into_par_iter()
        .map(|k| elimination_staircase(n, t, profile, etas, rng::sample_seed(base_seed, k), opts))
        .collect::<Result<_>>()?;
    let mean_n0 = (0..etas.len())
        .map(|k| {
            let v: Vec<f64> = staircases.iter().map(|s| s.n0[k]).filter(|x| x.is_finite()).collect();
            Stat::of(&v)
        })
        .collect();
    let realized_r = n as f64 / t as f64;
    let analytic_n0 = analytic_condensate_path(profile, realized_r, etas)
        .into_iter()
        .map(|s| s.map(|s| s.mixture.n0).unwrap_or(f64::NAN))
        .collect();
    Ok(StaircaseEnsemble { etas: etas.to_vec(), realized_r, mean_n0, analytic_n0, staircases })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig1_profile() -> VolatilityProfile {
        VolatilityProfile::two_point(10f64.sqrt(), 1.0, 0.5).unwrap()
    }

    #[test]
    fn starts_at_zero_and_climbs() {
        let etas = [0.0, 0.05, 0.2, 1.0];
        let s = elimination_staircase(30, 90, &fig1_profile(), &etas, 5, &QpOptions::default()).unwrap();
        assert_eq!(s.failures, 0);
        assert_eq!(s.n0[0], 0.0);
        assert!(s.n0[3] > s.n0[1]);
        assert_eq!(s.sigma_classes.len(), 2);
        // High-volatility assets go first.
        assert!(s.class_n0[1][2] >= s.class_n0[0][2]);
    }

    #[test]
    fn rejects_unsorted_path() {
        let e = elimination_staircase(10, 30, &fig1_profile(), &[0.1, 0.05], 1, &QpOptions::default());
        assert!(matches!(e, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn analytic_path_is_monotone() {
        let etas: Vec<f64> = (0..12).map(|k| 0.01 * 2f64.powi(k)).collect();
        let n0: Vec<f64> =
            analytic_condensate_path(&fig1_profile(), 1.0 / 3.0, &etas).into_iter().map(|s| s.unwrap().mixture.n0).collect();
        assert!(n0.windows(2).all(|w| w[1] > w[0]));
        assert!(n0[n0.len() - 1] < 1.0);
    }

    #[test]
    fn ensemble_table_shape() {
        let etas = [0.01, 0.1, 1.0];
        let e = staircase_ensemble(20, 60, &fig1_profile(), &etas, 3, 11, &QpOptions::default()).unwrap();
        let t = e.table();
        assert_eq!(t.len(), 3);
        assert_eq!(t.header.len(), 4 + 3);
        assert!(e.analytic_n0.iter().all(|x| x.is_finite()));
    }
}
