//! The sample problem
//!
//! ```text
//! min  1/2 w^T H w + eta1 sum w+ + eta2 sum w-     s.t.  sum w = N
//! ```
//!
//! with `H = X X^T / N`, solved by ADMM on the split `w = z`: the `w` step
//! is an equality-constrained ridge solve, the `z` step an asymmetric
//! soft-threshold that produces exact zeros. Every few iterations the sign
//! pattern of `z` is handed to an exact KKT solve on its support; when the
//! result passes the optimality test it is returned as is.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use super::hull::{simplex_zero_variance_feasible, Feasibility};
use super::ReturnSample;
use crate::error::{Error, Result};

/// Weights with magnitude at or below this are counted as eliminated.
pub const ZERO_WEIGHT_TOL: f64 = 1e-9;
const REPAIR_ROUNDS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QpOptions {
    pub max_iter: usize,
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Attempt an exact support solve every this many iterations.
    pub polish_every: usize,
}

impl Default for QpOptions {
    fn default() -> Self {
        Self { max_iter: 50_000, abs_tol: 1e-10, rel_tol: 1e-9, polish_every: 25 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QpStatus {
    Converged,
    /// A zero-variance long-only portfolio exists; the objective sits at its
    /// lower bound `eta1` and the minimizer is not unique.
    FlatLandscape,
    MaxIter,
}

/// ADMM state carried between neighbouring problems.
#[derive(Debug, Clone, PartialEq)]
pub struct QpWarmStart {
    pub z: Vec<f64>,
    pub u: Vec<f64>,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QpSolution {
    pub weights: Vec<f64>,
    /// Objective divided by `N`.
    pub objective: f64,
    /// `1/2 w^T H w`, not divided by `N`.
    pub variance: f64,
    pub n_zero: usize,
    pub iterations: usize,
    pub status: QpStatus,
    /// Largest violation of the optimality conditions (stationarity on the
    /// support, subgradient bounds off it, relative budget error).
    pub kkt_residual: f64,
    /// Budget multiplier.
    pub lambda: f64,
    #[serde(skip)]
    pub warm_start: Option<QpWarmStart>,
}

impl QpSolution {
    pub fn zero_fraction(&self) -> f64 {
        zero_weight_fraction(self)
    }
}

/// Fraction of weights that are zero up to [`ZERO_WEIGHT_TOL`].
pub fn zero_weight_fraction(sol: &QpSolution) -> f64 {
    sol.weights.iter().filter(|w| w.abs() <= ZERO_WEIGHT_TOL).count() as f64 / sol.weights.len() as f64
}

pub fn solve_qp(sample: &ReturnSample, eta1: f64, eta2: f64, opts: &QpOptions) -> Result<QpSolution> {
    solve_qp_warm(sample, eta1, eta2, opts, None)
}

pub fn solve_qp_warm(
    sample: &ReturnSample,
    eta1: f64,
    eta2: f64,
    opts: &QpOptions,
    warm: Option<&QpWarmStart>,
) -> Result<QpSolution> {
    if !(eta1 >= 0.0 && eta1.is_finite() && eta2 >= 0.0) {
        return Err(Error::InvalidArgument(format!("penalties must be nonnegative, got {eta1}, {eta2}")));
    }
    let n = sample.n();
    let h = sample.hessian();
    let pen = Penalty { eta1, eta2 };
    if eta1 == 0.0 && eta2 == 0.0 {
        if sample.t() < n {
            return Err(Error::InvalidArgument(format!(
                "unregularized problem needs T >= N, got T = {} < N = {n}",
                sample.t()
            )));
        }
        return unregularized(&h);
    }
    if sample.t() < n {
        let check = simplex_zero_variance_feasible(sample);
        if check.status == Feasibility::Feasible {
            let sol = finish(&h, pen, check.weights, f64::NAN, 0, QpStatus::FlatLandscape, None);
            if sol.objective - eta1 <= 1e-7 && sol.variance <= 1e-9 * n as f64 {
                return Ok(sol);
            }
        }
    }
    Ok(Admm::new(&h, pen, opts, warm)?.run())
}

#[derive(Debug, Clone, Copy)]
struct Penalty {
    eta1: f64,
    eta2: f64,
}

impl Penalty {
    fn cost(&self, w: &[f64]) -> f64 {
        w.iter()
            .map(|&x| {
                if x > 0.0 {
                    self.eta1 * x
                } else if x < 0.0 {
                    -self.eta2 * x
                } else {
                    0.0
                }
            })
            .sum()
    }

    /// Proximal map of `penalty / rho`.
    fn shrink(&self, v: f64, rho: f64) -> f64 {
        let up = self.eta1 / rho;
        let down = self.eta2 / rho;
        if v > up {
            v - up
        } else if v < -down {
            v + down
        } else {
            0.0
        }
    }

    /// Linear cost coefficient on a branch of given sign.
    fn slope(&self, sign: i8) -> f64 {
        if sign > 0 {
            self.eta1
        } else {
            -self.eta2
        }
    }
}

fn unregularized(h: &DMatrix<f64>) -> Result<QpSolution> {
    let n = h.nrows();
    let chol = Cholesky::new(h.clone()).ok_or_else(|| Error::Qp("sample covariance is singular".into()))?;
    let ones = DVector::from_element(n, 1.0);
    let x = chol.solve(&ones);
    let total = x.sum();
    let w: Vec<f64> = x.iter().map(|v| v * n as f64 / total).collect();
    let lambda = n as f64 / total;
    Ok(finish(h, Penalty { eta1: 0.0, eta2: 0.0 }, w, lambda, 0, QpStatus::Converged, None))
}

fn finish(
    h: &DMatrix<f64>,
    pen: Penalty,
    weights: Vec<f64>,
    lambda: f64,
    iterations: usize,
    status: QpStatus,
    warm_start: Option<QpWarmStart>,
) -> QpSolution {
    let n = weights.len() as f64;
    let w = DVector::from_column_slice(&weights);
    let hw = h * &w;
    let variance = 0.5 * w.dot(&hw);
    let objective = (variance + pen.cost(&weights)) / n;
    let (kkt, lambda_est) = kkt_residual(hw.as_slice(), &weights, pen);
    let n_zero = weights.iter().filter(|x| x.abs() <= ZERO_WEIGHT_TOL).count();
    QpSolution {
        weights,
        objective,
        variance,
        n_zero,
        iterations,
        status,
        kkt_residual: kkt,
        lambda: if lambda.is_finite() { lambda } else { lambda_est },
        warm_start,
    }
}

/// Optimality violation and the multiplier fitted on the support.
fn kkt_residual(hw: &[f64], w: &[f64], pen: Penalty) -> (f64, f64) {
    let n = w.len() as f64;
    let support: Vec<usize> = (0..w.len()).filter(|&i| w[i] != 0.0).collect();
    let grad = |i: usize| hw[i] + pen.slope(if w[i] > 0.0 { 1 } else { -1 });
    let lambda = support.iter().map(|&i| grad(i)).sum::<f64>() / support.len().max(1) as f64;
    let mut worst = (w.iter().sum::<f64>() - n).abs() / n;
    for i in 0..w.len() {
        let v = if w[i] != 0.0 {
            (grad(i) - lambda).abs()
        } else {
            let mu = lambda - hw[i];
            (mu - pen.eta1).max(-pen.eta2 - mu).max(0.0)
        };
        worst = worst.max(v);
    }
    (worst, lambda)
}

/// Exact solve on a sign pattern, repaired by primal-dual active-set moves
/// until the optimality test passes.
fn polish(h: &DMatrix<f64>, pen: Penalty, mut signs: Vec<i8>) -> Option<(Vec<f64>, f64)> {
    let n = h.nrows();
    let budget = n as f64;
    for round in 0..REPAIR_ROUNDS {
        let support: Vec<usize> = (0..n).filter(|&i| signs[i] != 0).collect();
        let k = support.len();
        if k == 0 {
            return None;
        }
        let mut m = DMatrix::zeros(k + 1, k + 1);
        let mut rhs = DVector::zeros(k + 1);
        for (a, &i) in support.iter().enumerate() {
            for (b, &j) in support.iter().enumerate() {
                m[(a, b)] = h[(i, j)];
            }
            m[(a, k)] = -1.0;
            m[(k, a)] = 1.0;
            rhs[a] = -pen.slope(signs[i]);
        }
        rhs[k] = budget;
        let sol = m.lu().solve(&rhs)?;
        if sol.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let lambda = sol[k];
        let mut w = vec![0.0; n];
        for (a, &i) in support.iter().enumerate() {
            w[i] = sol[a];
        }
        let hw = h * DVector::from_column_slice(&w);
        let tol = 1e-9 * (1.0 + lambda.abs());

        // (index, violation, new sign)
        let mut moves: Vec<(usize, f64, i8)> = Vec::new();
        for &i in &support {
            if f64::from(signs[i]) * w[i] <= 0.0 {
                moves.push((i, (w[i]).abs() + f64::MIN_POSITIVE, 0));
            }
        }
        for i in (0..n).filter(|&i| signs[i] == 0) {
            let mu = lambda - hw[i];
            if mu > pen.eta1 + tol {
                moves.push((i, mu - pen.eta1, 1));
            } else if mu < -pen.eta2 - tol {
                moves.push((i, -pen.eta2 - mu, -1));
            }
        }
        if moves.is_empty() {
            return Some((w, lambda));
        }
        if round < REPAIR_ROUNDS / 4 {
            for (i, _, s) in moves {
                signs[i] = s;
            }
        } else {
            // Single most violated move; avoids cycling of the full swap.
            let (i, _, s) = moves.into_iter().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
            signs[i] = s;
        }
    }
    None
}

fn sign_pattern(z: &[f64]) -> Vec<i8> {
    z.iter().map(|&v| if v > 0.0 { 1 } else if v < 0.0 { -1 } else { 0 }).collect()
}

struct Admm<'a> {
    h: &'a DMatrix<f64>,
    pen: Penalty,
    opts: &'a QpOptions,
    rho: f64,
    chol: Cholesky<f64, Dyn>,
    /// `(H + rho I)^{-1} 1` and its sum.
    a1: DVector<f64>,
    s1: f64,
    z: Vec<f64>,
    u: Vec<f64>,
}

impl<'a> Admm<'a> {
    fn new(h: &'a DMatrix<f64>, pen: Penalty, opts: &'a QpOptions, warm: Option<&QpWarmStart>) -> Result<Self> {
        let n = h.nrows();
        let rho = match warm {
            Some(ws) => ws.rho,
            None => (h.trace() / n as f64).max(1e-8),
        };
        let (z, u) = match warm {
            Some(ws) if ws.z.len() == n => (ws.z.clone(), ws.u.clone()),
            _ => (vec![1.0; n], vec![0.0; n]),
        };
        let (chol, a1, s1) = factor(h, rho)?;
        Ok(Self { h, pen, opts, rho, chol, a1, s1, z, u })
    }

    fn set_rho(&mut self, rho: f64) {
        if let Ok((chol, a1, s1)) = factor(self.h, rho) {
            let ratio = self.rho / rho;
            self.u.iter_mut().for_each(|x| *x *= ratio);
            self.rho = rho;
            self.chol = chol;
            self.a1 = a1;
            self.s1 = s1;
        }
    }

    fn warm(&self) -> Option<QpWarmStart> {
        Some(QpWarmStart { z: self.z.clone(), u: self.u.clone(), rho: self.rho })
    }

    fn try_polish(&self, iter: usize) -> Option<QpSolution> {
        let (w, lambda) = polish(self.h, self.pen, sign_pattern(&self.z))?;
        Some(finish(self.h, self.pen, w, lambda, iter, QpStatus::Converged, self.warm()))
    }

    fn run(mut self) -> QpSolution {
        let n = self.h.nrows();
        let budget = n as f64;
        let sqrt_n = (n as f64).sqrt();
        if let Some(sol) = self.try_polish(0) {
            return sol;
        }
        let mut w = vec![0.0; n];
        for iter in 1..=self.opts.max_iter {
            let rhs = DVector::from_iterator(n, self.z.iter().zip(&self.u).map(|(z, u)| self.rho * (z - u)));
            let y = self.chol.solve(&rhs);
            let mu = (y.sum() - budget) / self.s1;
            for i in 0..n {
                w[i] = y[i] - mu * self.a1[i];
            }
            let z_old = std::mem::take(&mut self.z);
            self.z = w.iter().zip(&self.u).map(|(wi, ui)| self.pen.shrink(wi + ui, self.rho)).collect();
            for i in 0..n {
                self.u[i] += w[i] - self.z[i];
            }

            let r_norm = norm(w.iter().zip(&self.z).map(|(a, b)| a - b));
            let s_norm = self.rho * norm(self.z.iter().zip(&z_old).map(|(a, b)| a - b));
            let eps_pri = sqrt_n * self.opts.abs_tol + self.opts.rel_tol * norm(w.iter().cloned()).max(norm(self.z.iter().cloned()));
            let eps_dual = sqrt_n * self.opts.abs_tol + self.opts.rel_tol * self.rho * norm(self.u.iter().cloned());

            if r_norm <= eps_pri && s_norm <= eps_dual {
                if let Some(sol) = self.try_polish(iter) {
                    return sol;
                }
                let z = self.z.clone();
                return finish(self.h, self.pen, z, f64::NAN, iter, QpStatus::Converged, self.warm());
            }
            if iter % self.opts.polish_every == 0 {
                if let Some(sol) = self.try_polish(iter) {
                    return sol;
                }
            }
            if iter % 10 == 0 {
                if r_norm > 10.0 * s_norm {
                    self.set_rho(self.rho * 2.0);
                } else if s_norm > 10.0 * r_norm {
                    self.set_rho(self.rho / 2.0);
                }
            }
        }
        let z = self.z.clone();
        finish(self.h, self.pen, z, f64::NAN, self.opts.max_iter, QpStatus::MaxIter, self.warm())
    }
}

fn factor(h: &DMatrix<f64>, rho: f64) -> Result<(Cholesky<f64, Dyn>, DVector<f64>, f64)> {
    let n = h.nrows();
    let m = h + DMatrix::<f64>::identity(n, n) * rho;
    let chol = Cholesky::new(m).ok_or_else(|| Error::Qp("ridge system not positive definite".into()))?;
    let a1 = chol.solve(&DVector::from_element(n, 1.0));
    let s1 = a1.sum();
    Ok((chol, a1, s1))
}

fn norm(it: impl Iterator<Item = f64>) -> f64 {
    it.map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::replica::VolatilityProfile;
    use crate::sim::{draw_sample, draw_with_sigmas};

    fn lagrange(sample: &ReturnSample) -> Vec<f64> {
        // Direct dense solve of C w = lambda 1, 1^T w = N.
        let n = sample.n();
        let c = (&sample.data * sample.data.transpose()) / sample.t() as f64;
        let x = c.lu().solve(&DVector::from_element(n, 1.0)).unwrap();
        let total = x.sum();
        x.iter().map(|v| v * n as f64 / total).collect()
    }

    #[test]
    fn unregularized_matches_lagrange() {
        let p = VolatilityProfile::two_point(1.0, 2.0, 0.5).unwrap();
        for seed in 0..10 {
            let s = draw_sample(&p, 12, 40, seed).unwrap();
            let sol = solve_qp(&s, 0.0, 0.0, &QpOptions::default()).unwrap();
            for (a, b) in sol.weights.iter().zip(lagrange(&s)) {
                assert!((a - b).abs() < 1e-9);
            }
            assert_eq!(sol.n_zero, 0);
            assert!(sol.kkt_residual < 1e-9);
        }
        let wide = draw_sample(&p, 12, 6, 0).unwrap();
        assert!(solve_qp(&wide, 0.0, 0.0, &QpOptions::default()).is_err());
    }

    #[test]
    fn regularized_is_optimal_and_sparse() {
        let p = VolatilityProfile::two_point(10f64.sqrt(), 1.0, 0.5).unwrap();
        let s = draw_sample(&p, 60, 90, 11).unwrap();
        for eta in [0.01, 0.1, 0.5, 2.0] {
            let sol = solve_qp(&s, eta, eta, &QpOptions::default()).unwrap();
            assert_eq!(sol.status, QpStatus::Converged);
            assert!(sol.kkt_residual < 1e-8, "eta={eta}: {}", sol.kkt_residual);
            assert!((sol.weights.iter().sum::<f64>() - 60.0).abs() < 1e-8 * 60.0);
            assert!(sol.objective >= eta);
        }
        let heavy = solve_qp(&s, 2.0, 2.0, &QpOptions::default()).unwrap();
        assert!(heavy.n_zero > 0);
    }

    #[test]
    fn objective_not_improved_by_perturbation() {
        let s = draw_sample(&VolatilityProfile::uniform(1.0).unwrap(), 20, 25, 3).unwrap();
        let h = s.hessian();
        let pen = Penalty { eta1: 0.2, eta2: 0.1 };
        let sol = solve_qp(&s, 0.2, 0.1, &QpOptions::default()).unwrap();
        let obj = |w: &[f64]| {
            let v = DVector::from_column_slice(w);
            0.5 * v.dot(&(&h * &v)) + pen.cost(w)
        };
        let base = obj(&sol.weights);
        for i in 0..20 {
            for j in 0..20 {
                if i == j {
                    continue;
                }
                for d in [1e-4, -1e-4] {
                    let mut w = sol.weights.clone();
                    w[i] += d;
                    w[j] -= d;
                    assert!(obj(&w) >= base - 1e-12);
                }
            }
        }
    }

    #[test]
    fn no_short_has_no_negative_weights() {
        let s = draw_sample(&VolatilityProfile::uniform(1.0).unwrap(), 30, 40, 5).unwrap();
        let sol = solve_qp(&s, 0.01, f64::INFINITY, &QpOptions::default()).unwrap();
        assert!(sol.weights.iter().all(|&w| w >= 0.0));
        assert!(sol.kkt_residual < 1e-8);
        assert!(sol.objective.is_finite());
    }

    #[test]
    fn flat_landscape_detected() {
        let s = draw_sample(&VolatilityProfile::uniform(1.0).unwrap(), 80, 20, 9).unwrap();
        let sol = solve_qp(&s, 0.05, 0.05, &QpOptions::default()).unwrap();
        assert_eq!(sol.status, QpStatus::FlatLandscape);
        assert!(sol.objective - 0.05 <= 1e-7);
        assert!(sol.variance <= 1e-9 * 80.0);
        assert!((sol.weights.iter().sum::<f64>() - 80.0).abs() < 1e-8 * 80.0);
        assert!(sol.weights.iter().all(|&w| w >= 0.0));
    }

    #[test]
    fn label_equivariance() {
        let sigmas: Vec<f64> = (0..10).map(|i| 1.0 + 0.1 * i as f64).collect();
        let s = draw_with_sigmas(&sigmas, 15, 2).unwrap();
        let perm: Vec<usize> = (0..10).rev().collect();
        let mut data = s.data.clone();
        for (k, &i) in perm.iter().enumerate() {
            data.set_row(k, &s.data.row(i));
        }
        let sp = ReturnSample::from_matrix(data, perm.iter().map(|&i| sigmas[i]).collect()).unwrap();
        let a = solve_qp(&s, 0.05, 0.05, &QpOptions::default()).unwrap();
        let b = solve_qp(&sp, 0.05, 0.05, &QpOptions::default()).unwrap();
        for (k, &i) in perm.iter().enumerate() {
            assert!((b.weights[k] - a.weights[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn scaling_equivariance_unregularized() {
        let s = draw_sample(&VolatilityProfile::uniform(1.0).unwrap(), 8, 20, 4).unwrap();
        let scaled = ReturnSample::from_matrix(&s.data * 3.0, s.sigmas.clone()).unwrap();
        let a = solve_qp(&s, 0.0, 0.0, &QpOptions::default()).unwrap();
        let b = solve_qp(&scaled, 0.0, 0.0, &QpOptions::default()).unwrap();
        assert!((b.variance / a.variance - 9.0).abs() < 1e-9);
        for (x, y) in a.weights.iter().zip(&b.weights) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn warm_start_same_answer() {
        let s = draw_sample(&VolatilityProfile::two_point(10f64.sqrt(), 1.0, 0.5).unwrap(), 40, 120, 8).unwrap();
        let opts = QpOptions::default();
        let first = solve_qp(&s, 0.1, 0.1, &opts).unwrap();
        let warm = solve_qp_warm(&s, 0.12, 0.12, &opts, first.warm_start.as_ref()).unwrap();
        let cold = solve_qp(&s, 0.12, 0.12, &opts).unwrap();
        for (a, b) in warm.weights.iter().zip(&cold.weights) {
            assert!((a - b).abs() < 1e-8);
        }
    }
}
