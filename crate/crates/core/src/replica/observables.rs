//! Quantities read off a converged saddle: the weight distribution, the
//! per-atom condensate, resolvability and the free-energy functional.

use super::{AtomWeights, OrderParameters, RegularizedProblem, ReplicaSolution};
use crate::error::{Error, Result};
use crate::gauss;

/// Mean and second moment of the weight of one asset in the given atom.
///
/// The weight is soft-thresholded Gaussian: `w1 + sigma_w z` above zero,
/// `w2 + sigma_w z` below, zero in between.
pub(crate) fn atom_moments(atom: &AtomWeights) -> (f64, f64) {
    let y1 = atom.w1 / atom.sigma_w;
    let mut mean = gauss::psi(y1);
    let mut second = gauss::w(y1);
    if atom.w2.is_finite() {
        let y2 = atom.w2 / atom.sigma_w;
        mean -= gauss::psi(-y2);
        second += gauss::w(-y2);
    }
    (atom.sigma_w * mean, 2.0 * atom.sigma_w * atom.sigma_w * second)
}

fn normal_pdf(w: f64, center: f64, sd: f64) -> f64 {
    gauss::density((w - center) / sd) / sd
}

impl ReplicaSolution {
    /// Continuous part of the weight density; the atom at zero carries
    /// mass `n0` and is not included.
    pub fn weight_density(&self, w: f64) -> f64 {
        self.mixture
            .atoms
            .iter()
            .map(|a| {
                if w >= 0.0 {
                    a.mass * normal_pdf(w, a.w1, a.sigma_w)
                } else if a.w2.is_finite() {
                    a.mass * normal_pdf(w, a.w2, a.sigma_w)
                } else {
                    0.0
                }
            })
            .sum()
    }

    /// Distribution function of the weights, zero atom included.
    pub fn weight_cdf(&self, w: f64) -> f64 {
        self.mixture
            .atoms
            .iter()
            .map(|a| {
                if w >= 0.0 {
                    a.mass * gauss::cdf((w - a.w1) / a.sigma_w)
                } else if a.w2.is_finite() {
                    a.mass * gauss::cdf((w - a.w2) / a.sigma_w)
                } else {
                    0.0
                }
            })
            .sum()
    }

    /// Distribution of the nonzero weights only, renormalized.
    pub fn continuous_cdf(&self, w: f64) -> f64 {
        let n0 = self.mixture.n0;
        let f = self.weight_cdf(w) - if w >= 0.0 { n0 } else { 0.0 };
        f / (1.0 - n0)
    }

    /// Total mass of the two Gaussian branches.
    pub fn continuous_mass(&self) -> f64 {
        self.mixture
            .atoms
            .iter()
            .map(|a| {
                let neg = if a.w2.is_finite() { gauss::cdf(-a.w2 / a.sigma_w) } else { 0.0 };
                a.mass * (gauss::cdf(a.w1 / a.sigma_w) + neg)
            })
            .sum()
    }

    /// `n0 + continuous mass - 1`
    pub fn normalization_error(&self) -> f64 {
        self.mixture.n0 + self.continuous_mass() - 1.0
    }

    /// Average weight per asset; the budget makes this one.
    pub fn mean_weight(&self) -> f64 {
        self.mixture.atoms.iter().map(|a| a.mass * atom_moments(a).0).sum()
    }

    /// Volatility-weighted second moment `E[sigma^2 w^2]`, equal to `q0`.
    pub fn weighted_second_moment(&self) -> f64 {
        self.mixture.atoms.iter().map(|a| a.mass * a.sigma * a.sigma * atom_moments(a).1).sum()
    }

    /// Probability that an asset of atom `i` is eliminated.
    pub fn condensate_contribution(&self, i: usize) -> Result<f64> {
        let atom = self
            .mixture
            .atoms
            .get(i)
            .ok_or_else(|| Error::InvalidArgument(format!("atom index {i} out of range")))?;
        Ok(self.condensate_contribution_at(atom.sigma))
    }

    /// Elimination probability for an asset of deviation `sigma`, holding
    /// the order parameters fixed.
    pub fn condensate_contribution_at(&self, sigma: f64) -> f64 {
        let (a, b) = (self.scaled.a, self.scaled.b);
        let upper = if b.is_finite() { gauss::cdf(b / sigma) } else { 1.0 };
        (upper - gauss::cdf(a / sigma)).max(0.0)
    }

    /// Whether assets of deviations `sigma_i > sigma_j` produce separated
    /// weight peaks: their centers differ by more than twice the branch width.
    pub fn resolvable(&self, sigma_i: f64, sigma_j: f64) -> Result<bool> {
        if sigma_j > sigma_i {
            return Err(Error::InvalidArgument(format!(
                "resolvable expects sigma_j <= sigma_i, got {sigma_j} > {sigma_i}"
            )));
        }
        Ok(2.0 * self.scaled.a * (1.0 / sigma_j - 1.0 / sigma_i) > 1.0)
    }
}

/// Replica free energy at an arbitrary point of order-parameter space.
///
/// Requires `q0_hat < 0` and `delta_hat > 0`; otherwise returns NaN.
pub fn free_energy_functional(op: &OrderParameters, p: &RegularizedProblem) -> f64 {
    let OrderParameters { lambda, q0, delta, q0_hat, delta_hat } = *op;
    if !(q0_hat < 0.0 && delta_hat > 0.0) {
        return f64::NAN;
    }
    let width = (-2.0 * q0_hat).sqrt();
    let potential: f64 = p
        .profile
        .atoms()
        .iter()
        .map(|atom| {
            let mut v = gauss::w((lambda - p.eta1) / (atom.sigma * width));
            if !p.is_no_short() {
                v += gauss::w(-(lambda + p.eta2) / (atom.sigma * width));
            }
            atom.mass * v
        })
        .sum();
    q0 / (2.0 * p.r * (1.0 + delta)) - q0_hat * delta - delta_hat * q0 + lambda + q0_hat / delta_hat * potential
}
