//! Closed-form limits: the true optimum, the uniform no-short solution and
//! the asymptotics at the two ends of the `r` axis.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::observables::atom_moments;
use super::solver::{assemble, kernel_sums};
use super::{OrderParameters, RegularizedProblem, ReplicaSolution, VolatilityProfile};
use crate::error::{Error, Result};
use crate::gauss;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueOptimum {
    /// Optimal per-asset weight for each atom, in profile order.
    pub weights: Vec<f64>,
    pub lambda: f64,
    /// Minimal objective per asset.
    pub free_energy: f64,
}

/// Minimum-variance weights under the true diagonal covariance.
pub fn true_optimum(profile: &VolatilityProfile, r: f64) -> Result<TrueOptimum> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidArgument(format!("aspect ratio must be positive, got {r}")));
    }
    let m2 = profile.m2();
    let weights = profile.atoms().iter().map(|a| 1.0 / (a.sigma * a.sigma * m2)).collect();
    let lambda = 1.0 / (r * m2);
    Ok(TrueOptimum { weights, lambda, free_energy: 0.5 * lambda })
}

/// Uniform-volatility no-short solution, `sigma = 1`.
///
/// With the short side removed the W-condition decouples and fixes
/// `a = W^{-1}(1/(2r))`, after which `s = 1/Psi(a)`; none of it depends on
/// `eta1` except `lambda = eta1 + a^2`.
pub fn solve_no_short(r: f64, eta1: f64) -> Result<ReplicaSolution> {
    let p = RegularizedProblem::no_short(r, eta1, VolatilityProfile::uniform(1.0)?)?;
    if r >= 2.0 {
        return Err(Error::FlatLandscape { r });
    }
    let a = gauss::inverse_w(0.5 / r)?;
    let s = 1.0 / gauss::psi(a);
    let sums = kernel_sums(&p, a, f64::INFINITY);
    let resid = (s * sums.psi - 1.0).abs().max((2.0 * r * sums.w - 1.0).abs());
    Ok(assemble(&p, a, f64::INFINITY, s, resid))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalAsymptotics {
    pub q0: f64,
    pub delta: f64,
    pub lambda: f64,
    pub n0: f64,
    pub f: f64,
}

/// Leading behavior as `r = 2 - epsilon` approaches the critical point.
pub fn critical_asymptotics(epsilon: f64, eta1: f64, profile: &VolatilityProfile) -> CriticalAsymptotics {
    let m1 = profile.m1();
    let lambda = eta1 + PI / 32.0 * epsilon * epsilon / m1;
    CriticalAsymptotics { q0: PI / (m1 * m1), delta: 4.0 / epsilon, lambda, n0: 0.5, f: eta1 }
}

pub(crate) fn critical_guess(p: &RegularizedProblem) -> OrderParameters {
    let c = critical_asymptotics(2.0 - p.r, p.eta1, &p.profile);
    OrderParameters::from_primary(c.lambda, c.q0, c.delta, p.r)
}

/// Leading small-`r` behavior: the estimate approaches the true optimum.
pub fn small_r_guess(p: &RegularizedProblem) -> OrderParameters {
    let m2 = p.profile.m2();
    OrderParameters::from_primary(p.eta1 + 1.0 / (p.r * m2), 1.0 / m2, p.r, p.r)
}

/// Susceptibility implied by the condensate density.
pub fn delta_from_n0(r: f64, n0: f64) -> Result<f64> {
    let x = r * (1.0 - n0);
    if !(x < 1.0) {
        return Err(Error::Domain(format!("r (1 - n0) must be below 1, got {x}")));
    }
    Ok(x / (1.0 - x))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RisklessReport {
    pub q0_tilde: f64,
    /// Mean weight of an asset in the lowest-volatility atom.
    pub dominant_mean: f64,
    pub dominant_sd: f64,
    /// `dominant_mean / N - 1`
    pub mean_deviation: f64,
    /// `dominant_sd / sqrt(N r) - 1`
    pub sd_deviation: f64,
}

/// Compares a solution containing a near-riskless atom with the limit in
/// which that asset takes the whole budget.
pub fn riskless_limit_check(solution: &ReplicaSolution, n: usize) -> Result<RisklessReport> {
    let r = solution.problem.r;
    if r >= 1.0 {
        return Err(Error::ZeroModeRegion { r });
    }
    let (idx, _) = solution
        .mixture
        .atoms
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.sigma.total_cmp(&y.1.sigma))
        .ok_or_else(|| Error::InvalidArgument("empty mixture".into()))?;
    let (mean, second) = atom_moments(&solution.mixture.atoms[idx]);
    let sd = (second - mean * mean).max(0.0).sqrt();
    let n = n as f64;
    Ok(RisklessReport {
        q0_tilde: solution.q0_tilde,
        dominant_mean: mean,
        dominant_sd: sd,
        mean_deviation: mean / n - 1.0,
        sd_deviation: sd / (n * r).sqrt() - 1.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn true_optimum_two_atoms() {
        let p = VolatilityProfile::two_point(10f64.sqrt(), 1.0, 0.5).unwrap();
        let t = true_optimum(&p, 0.5).unwrap();
        assert!((t.weights[0] - 1.0 / 5.5).abs() < 1e-14);
        assert!((t.weights[1] - 1.0 / 0.55).abs() < 1e-13);
        let budget: f64 = p.atoms().iter().zip(&t.weights).map(|(a, w)| a.mass * w).sum();
        assert!((budget - 1.0).abs() < 1e-14);
        assert!((t.lambda - 2.0 / 0.55).abs() < 1e-13);
    }

    #[test]
    fn true_optimum_uniform() {
        let t = true_optimum(&VolatilityProfile::uniform(1.0).unwrap(), 0.25).unwrap();
        assert_eq!(t.weights, vec![1.0]);
        assert!((t.lambda - 4.0).abs() < 1e-15);
        assert!((t.free_energy - 2.0).abs() < 1e-15);
        assert!(true_optimum(&VolatilityProfile::uniform(1.0).unwrap(), 0.0).is_err());
    }

    #[test]
    fn near_riskless_atom_takes_the_budget() {
        let p = VolatilityProfile::two_point(1e-4, 1.0, 0.01).unwrap();
        let t = true_optimum(&p, 0.5).unwrap();
        // 1% of assets times the weight is essentially the whole budget.
        assert!((0.01 * t.weights[0] - 1.0).abs() < 1e-5);
        assert!(t.weights[1] < 1e-6);
    }

    #[test]
    fn no_short_limits() {
        assert!((solve_no_short(1e-4, 0.1).unwrap().params.q0 - 1.0).abs() < 1e-3);
        assert!((solve_no_short(2.0 - 1e-6, 0.1).unwrap().params.q0 - PI).abs() < 1e-3);
        for r in [0.2, 0.9, 1.5] {
            let a = solve_no_short(r, 0.0).unwrap();
            let b = solve_no_short(r, 0.1).unwrap();
            assert_eq!(a.params.q0, b.params.q0);
            assert!(a.residuals < 1e-12);
        }
        assert!(matches!(solve_no_short(2.0, 0.1), Err(Error::FlatLandscape { .. })));
    }

    #[test]
    fn critical_values() {
        let c = critical_asymptotics(0.01, 0.2, &VolatilityProfile::uniform(1.0).unwrap());
        assert!((c.delta - 400.0).abs() < 1e-10);
        assert!((c.lambda - 0.2 - PI * 1e-4 / 32.0).abs() < 1e-15);
        assert_eq!(c.q0, PI);
        let p = VolatilityProfile::two_point(1.0, 2.0, 0.5).unwrap();
        let c = critical_asymptotics(0.01, 0.0, &p);
        let q0_tilde = c.q0 * p.m2();
        assert!((q0_tilde - PI * 0.625 / 0.5625).abs() < 1e-14);
        assert!(q0_tilde >= PI);
    }

    #[test]
    fn delta_n0_relation() {
        assert!((delta_from_n0(0.5, 0.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(delta_from_n0(2.0 - 1e-9, 0.5).unwrap() > 1e8);
        assert!(matches!(delta_from_n0(1.2, 0.1), Err(Error::Domain(_))));
    }
}
