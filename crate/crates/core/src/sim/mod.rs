//! Finite-size simulation: Gaussian samples, the regularized sample QP and
//! ensemble averages of its observables.

mod ensemble;
mod feasibility;
mod hull;
mod qp;
mod sample;

pub use ensemble::{measure_ensemble, measure_ensemble_with, EnsembleMeasurement, Histogram, SampleOutcome, Stat};
pub use feasibility::{feasibility_frequency, vanishing_variance_probability, FeasibilityTally};
pub use hull::{min_norm_point, simplex_zero_variance_feasible, Feasibility, MinNormPoint, ZeroVarianceCheck};
pub use qp::{
    solve_qp, solve_qp_warm, zero_weight_fraction, QpOptions, QpSolution, QpStatus, QpWarmStart, ZERO_WEIGHT_TOL,
};
pub use sample::{draw_sample, draw_with_sigmas, observations_for, ReturnSample};
