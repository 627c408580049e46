use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::replica::VolatilityProfile;
use crate::rng;

/// `N x T` matrix of independent Gaussian returns.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSample {
    pub seed: u64,
    /// True standard deviation of each row.
    pub sigmas: Vec<f64>,
    pub data: DMatrix<f64>,
}

impl ReturnSample {
    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn t(&self) -> usize {
        self.data.ncols()
    }

    /// Realized aspect ratio `N / T`.
    pub fn ratio(&self) -> f64 {
        self.n() as f64 / self.t() as f64
    }

    /// Wraps an explicit matrix, for tests and external data.
    pub fn from_matrix(data: DMatrix<f64>, sigmas: Vec<f64>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 || sigmas.len() != data.nrows() {
            return Err(Error::InvalidArgument("sample matrix and sigma list disagree".into()));
        }
        Ok(Self { seed: 0, sigmas, data })
    }

    /// `X X^T / N`, the quadratic form of the per-asset objective.
    pub fn hessian(&self) -> DMatrix<f64> {
        let x = &self.data;
        (x * x.transpose()) / self.n() as f64
    }
}

/// Draws `x_it = sigma_i z_it`, filling row by row from one ChaCha8 stream.
pub fn draw_sample(profile: &VolatilityProfile, n: usize, t: usize, seed: u64) -> Result<ReturnSample> {
    if n == 0 || t == 0 {
        return Err(Error::InvalidArgument(format!("sample needs N, T >= 1, got {n} x {t}")));
    }
    let sigmas = profile.asset_sigmas(n);
    draw_with_sigmas(&sigmas, t, seed)
}

pub fn draw_with_sigmas(sigmas: &[f64], t: usize, seed: u64) -> Result<ReturnSample> {
    let n = sigmas.len();
    if n == 0 || t == 0 {
        return Err(Error::InvalidArgument(format!("sample needs N, T >= 1, got {n} x {t}")));
    }
    let mut rng = rng::stream(seed);
    let mut data = DMatrix::zeros(n, t);
    for (i, &s) in sigmas.iter().enumerate() {
        for j in 0..t {
            let z: f64 = rng.sample(StandardNormal);
            data[(i, j)] = s * z;
        }
    }
    Ok(ReturnSample { seed, sigmas: sigmas.to_vec(), data })
}

/// `T = round(N / r)`, never below one.
pub fn observations_for(n: usize, r: f64) -> usize {
    ((n as f64 / r).round() as usize).max(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_seed() {
        let p = VolatilityProfile::two_point(1.0, 2.0, 0.5).unwrap();
        let a = draw_sample(&p, 6, 9, 42).unwrap();
        let b = draw_sample(&p, 6, 9, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.data, draw_sample(&p, 6, 9, 43).unwrap().data);
    }

    #[test]
    fn row_variances() {
        let s = draw_with_sigmas(&[1.0, 3.0], 1_000_000, 5).unwrap();
        for (i, target) in [1.0, 9.0].into_iter().enumerate() {
            let row = s.data.row(i);
            let var = row.iter().map(|x| x * x).sum::<f64>() / s.t() as f64;
            assert!((var / target - 1.0).abs() < 0.01, "row {i}: {var}");
        }
    }

    #[test]
    fn covariance_tends_to_identity() {
        let s = draw_sample(&VolatilityProfile::uniform(1.0).unwrap(), 4, 200_000, 1).unwrap();
        let c = (&s.data * s.data.transpose()) / s.t() as f64;
        for i in 0..4 {
            for j in 0..4 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((c[(i, j)] - target).abs() < 0.02);
            }
        }
    }

    #[test]
    fn ratio_rounding() {
        assert_eq!(observations_for(50, 0.75), 67);
        assert_eq!(observations_for(100, 1.0 / 3.0), 300);
        assert_eq!(observations_for(1, 10.0), 1);
    }
}
