//! Replica solution of the l1-regularized minimum-variance problem.
//!
//! The five order parameters `(lambda, q0, Delta, q0_hat, Delta_hat)` are
//! fixed by the stationarity conditions; the two conjugates follow
//! algebraically, so only `(lambda, q0, Delta)` are ever solved for. The
//! solver works in the scaled variables
//!
//! ```text
//! s = sqrt(q0 r)
//! a = (lambda - eta1) r (1 + Delta) / s
//! b = (lambda + eta2) r (1 + Delta) / s
//! ```
//!
//! in which every kernel argument for an atom of deviation `sigma` is
//! `a / sigma` or `-b / sigma`.

mod closed_form;
mod observables;
mod profile;
mod solver;

pub use closed_form::{
    critical_asymptotics, delta_from_n0, riskless_limit_check, small_r_guess, solve_no_short, true_optimum,
    CriticalAsymptotics, RisklessReport, TrueOptimum,
};
pub use observables::free_energy_functional;
pub use profile::{Atom, VolatilityProfile};
pub use solver::{solve_path, solve_saddle, ContinuationDirection, SADDLE_TOLERANCE};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slope on short positions that stands for the no-short-selling limit.
pub const NO_SHORT: f64 = f64::INFINITY;

/// Full parameterization of one optimization instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularizedProblem {
    pub r: f64,
    pub eta1: f64,
    /// `f64::INFINITY` ([`NO_SHORT`]) removes every short-side term exactly.
    pub eta2: f64,
    pub profile: VolatilityProfile,
}

impl RegularizedProblem {
    pub fn new(r: f64, eta1: f64, eta2: f64, profile: VolatilityProfile) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::InvalidArgument(format!("aspect ratio must be positive, got {r}")));
        }
        if !(eta1 >= 0.0 && eta1.is_finite()) {
            return Err(Error::InvalidArgument(format!("eta1 must be finite and >= 0, got {eta1}")));
        }
        if !(eta2 >= 0.0) {
            return Err(Error::InvalidArgument(format!("eta2 must be >= 0, got {eta2}")));
        }
        Ok(Self { r, eta1, eta2, profile })
    }

    pub fn symmetric(r: f64, eta: f64, profile: VolatilityProfile) -> Result<Self> {
        Self::new(r, eta, eta, profile)
    }

    pub fn no_short(r: f64, eta1: f64, profile: VolatilityProfile) -> Result<Self> {
        Self::new(r, eta1, NO_SHORT, profile)
    }

    pub fn is_no_short(&self) -> bool {
        self.eta2.is_infinite()
    }

    pub fn with_r(&self, r: f64) -> Self {
        Self { r, ..self.clone() }
    }
}

/// The replica saddle point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderParameters {
    pub lambda: f64,
    pub q0: f64,
    pub delta: f64,
    pub q0_hat: f64,
    pub delta_hat: f64,
}

impl OrderParameters {
    /// Fills the conjugates from the two algebraic stationarity conditions.
    pub fn from_primary(lambda: f64, q0: f64, delta: f64, r: f64) -> Self {
        let one_plus = 1.0 + delta;
        Self {
            lambda,
            q0,
            delta,
            delta_hat: 1.0 / (2.0 * r * one_plus),
            q0_hat: -q0 / (2.0 * r * one_plus * one_plus),
        }
    }
}

/// Scaled unknowns; `b` is infinite in the no-short limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledVariables {
    pub a: f64,
    pub b: f64,
    pub s: f64,
}

/// Mixture components of the weight distribution for one volatility atom.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtomWeights {
    pub sigma: f64,
    pub mass: f64,
    /// Center of the positive branch.
    pub w1: f64,
    /// Center parameter of the negative branch (infinite for no-short).
    pub w2: f64,
    pub sigma_w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightMixture {
    pub atoms: Vec<AtomWeights>,
    /// Mass of the delta peak at zero.
    pub n0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaSolution {
    pub problem: RegularizedProblem,
    pub params: OrderParameters,
    pub scaled: ScaledVariables,
    pub mixture: WeightMixture,
    pub f_in_sample: f64,
    pub q0_tilde: f64,
    pub rel_error: f64,
    /// Max-norm of the stationarity residuals in scaled form.
    pub residuals: f64,
}
