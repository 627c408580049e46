use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::hull::{simplex_zero_variance_feasible, Feasibility};
use super::sample::draw_with_sigmas;
use crate::error::{Error, Result};
use crate::rng;

/// Probability that `T` Gaussian observations of `N` assets admit a
/// zero-variance long-only budget portfolio:
/// `2^-(N-1) sum_{k=T}^{N-1} C(N-1, k)`.
pub fn vanishing_variance_probability(n: u64, t: u64) -> BigRational {
    if n == 0 || t >= n {
        return BigRational::zero();
    }
    let m = n - 1;
    let mut binom = BigUint::one();
    let mut total = BigUint::zero();
    for k in 0..=m {
        if k >= t {
            total += &binom;
        }
        binom = binom * BigUint::from(m - k) / BigUint::from(k + 1);
    }
    BigRational::new(BigInt::from(total), BigInt::from(BigUint::one() << m))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityTally {
    pub n: usize,
    pub t: usize,
    pub feasible: usize,
    pub infeasible: usize,
    /// Samples where the hull iteration broke down; not counted.
    pub indeterminate: usize,
    pub frequency: f64,
    /// Binomial standard error at the exact probability.
    pub standard_error: f64,
    pub exact: f64,
}

/// Monte Carlo estimate over `n_seeds` unit-variance samples.
pub fn feasibility_frequency(n: usize, t: usize, n_seeds: usize, base_seed: u64) -> Result<FeasibilityTally> {
    if n == 0 || t == 0 || n_seeds == 0 {
        return Err(Error::InvalidArgument("feasibility run needs N, T and seed count >= 1".into()));
    }
    let sigmas = vec![1.0; n];
    let outcomes: Vec<Feasibility> = (0..n_seeds as u64)
        .into_par_iter()
        .map(|k| {
            let s = draw_with_sigmas(&sigmas, t, rng::sample_seed(base_seed, k))?;
            Ok(simplex_zero_variance_feasible(&s).status)
        })
        .collect::<Result<_>>()?;
    let count = |f: Feasibility| outcomes.iter().filter(|&&o| o == f).count();
    let (feasible, infeasible, indeterminate) =
        (count(Feasibility::Feasible), count(Feasibility::Infeasible), count(Feasibility::Indeterminate));
    let decided = (feasible + infeasible).max(1) as f64;
    let exact = vanishing_variance_probability(n as u64, t as u64).to_f64().unwrap_or(f64::NAN);
    Ok(FeasibilityTally {
        n,
        t,
        feasible,
        infeasible,
        indeterminate,
        frequency: feasible as f64 / decided,
        standard_error: (exact * (1.0 - exact) / decided).sqrt(),
        exact,
    })
}
