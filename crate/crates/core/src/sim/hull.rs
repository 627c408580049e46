//! Minimum-norm point of the convex hull of the asset return vectors.
//!
//! The origin lies in the hull exactly when some budget-feasible long-only
//! portfolio has zero in-sample variance. Wolfe's corral algorithm finds the
//! nearest hull point in finitely many steps and lands on the origin up to
//! round-off when it is inside.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::ReturnSample;

/// Hull points closer than this (squared norm) count as touching the origin.
pub const ZERO_VARIANCE_TOL: f64 = 1e-12;
const MAX_MAJOR: usize = 10_000;
const WEIGHT_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feasibility {
    Feasible,
    Infeasible,
    /// The corral iteration broke down; excluded from tallies.
    Indeterminate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinNormPoint {
    /// Convex combination over the points (rows of the input).
    pub weights: Vec<f64>,
    pub distance_sq: f64,
    pub iterations: usize,
    pub status: Feasibility,
}

/// Wolfe's algorithm over the rows of `points`.
pub fn min_norm_point(points: &DMatrix<f64>) -> MinNormPoint {
    let n = points.nrows();
    let dot = |i: usize, v: &DVector<f64>| points.row(i).iter().zip(v.iter()).map(|(a, b)| a * b).sum::<f64>();
    let row = |i: usize| DVector::from_iterator(points.ncols(), points.row(i).iter().cloned());
    let norms: Vec<f64> = (0..n).map(|i| points.row(i).norm_squared()).collect();
    let scale = norms.iter().cloned().fold(0.0, f64::max).max(f64::MIN_POSITIVE);

    let start = (0..n).min_by(|&i, &j| norms[i].total_cmp(&norms[j])).unwrap_or(0);
    let mut corral = vec![start];
    let mut lam = vec![1.0];
    let mut x = row(start);
    let done = |corral: &[usize], lam: &[f64], x: &DVector<f64>, it: usize, status| {
        let mut weights = vec![0.0; n];
        for (&i, &l) in corral.iter().zip(lam) {
            weights[i] = l;
        }
        MinNormPoint { weights, distance_sq: x.norm_squared(), iterations: it, status }
    };

    for it in 0..MAX_MAJOR {
        let xx = x.norm_squared();
        if xx <= ZERO_VARIANCE_TOL {
            return done(&corral, &lam, &x, it, Feasibility::Feasible);
        }
        let (j, xp) = (0..n).map(|j| (j, dot(j, &x))).min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
        if xx - xp <= 1e-12 * scale || corral.contains(&j) {
            return done(&corral, &lam, &x, it, Feasibility::Infeasible);
        }
        corral.push(j);
        lam.push(0.0);

        // Minor cycle: move toward the affine minimizer of the corral,
        // dropping points whose weight hits zero.
        loop {
            let Some(alpha) = affine_minimizer(points, &corral) else {
                return done(&corral, &lam, &x, it, Feasibility::Indeterminate);
            };
            if alpha.iter().all(|&a| a > WEIGHT_FLOOR) {
                lam = alpha;
                break;
            }
            let theta = lam
                .iter()
                .zip(&alpha)
                .filter(|(_, &a)| a <= WEIGHT_FLOOR)
                .map(|(&l, &a)| l / (l - a))
                .fold(1.0_f64, f64::min);
            for (l, a) in lam.iter_mut().zip(&alpha) {
                *l = theta * a + (1.0 - theta) * *l;
            }
            let mut k = 0;
            while k < corral.len() {
                if lam[k] <= WEIGHT_FLOOR {
                    corral.swap_remove(k);
                    lam.swap_remove(k);
                } else {
                    k += 1;
                }
            }
            let total: f64 = lam.iter().sum();
            lam.iter_mut().for_each(|l| *l /= total);
            if corral.len() == 1 {
                lam = vec![1.0];
                break;
            }
        }
        x = DVector::zeros(points.ncols());
        for (&i, &l) in corral.iter().zip(&lam) {
            x += row(i) * l;
        }
    }
    done(&corral, &lam, &x, MAX_MAJOR, Feasibility::Indeterminate)
}

/// Point of minimal norm in the affine hull of the corral, as barycentric
/// coordinates.
fn affine_minimizer(points: &DMatrix<f64>, corral: &[usize]) -> Option<Vec<f64>> {
    let k = corral.len();
    let mut m = DMatrix::zeros(k + 1, k + 1);
    for (a, &i) in corral.iter().enumerate() {
        for (b, &j) in corral.iter().enumerate().skip(a) {
            let g = points.row(i).dot(&points.row(j));
            m[(a, b)] = g;
            m[(b, a)] = g;
        }
        m[(a, k)] = 1.0;
        m[(k, a)] = 1.0;
    }
    let mut rhs = DVector::zeros(k + 1);
    rhs[k] = 1.0;
    let sol = m.lu().solve(&rhs)?;
    let alpha: Vec<f64> = sol.iter().take(k).cloned().collect();
    alpha.iter().all(|a| a.is_finite()).then_some(alpha)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZeroVarianceCheck {
    pub status: Feasibility,
    /// Minimal `sum_t (sum_i w_i x_it)^2` over the scaled simplex `sum w = N`.
    pub min_variance: f64,
    /// Minimizing weights on the scaled simplex.
    pub weights: Vec<f64>,
}

/// Whether some `w >= 0` with `sum w = N` annihilates every observation.
pub fn simplex_zero_variance_feasible(sample: &ReturnSample) -> ZeroVarianceCheck {
    let mnp = min_norm_point(&sample.data);
    let n = sample.n() as f64;
    ZeroVarianceCheck {
        status: mnp.status,
        min_variance: n * n * mnp.distance_sq,
        weights: mnp.weights.iter().map(|p| p * n).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::replica::VolatilityProfile;
    use crate::sim::draw_sample;

    #[test]
    fn origin_inside_triangle() {
        let p = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, -1.0, 1.0, -1.0, -1.0]);
        let m = min_norm_point(&p);
        assert_eq!(m.status, Feasibility::Feasible);
        assert!(m.distance_sq < 1e-24);
        assert!((m.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((m.weights[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn origin_outside_segment() {
        // Segment from (1, 2) to (1, -2): nearest point is (1, 0).
        let p = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 1.0, -2.0]);
        let m = min_norm_point(&p);
        assert_eq!(m.status, Feasibility::Infeasible);
        assert!((m.distance_sq - 1.0).abs() < 1e-12);
        assert!((m.weights[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn nearest_point_agrees_with_projected_gradient() {
        let s = draw_sample(&VolatilityProfile::uniform(1.0).unwrap(), 6, 8, 3).unwrap();
        let m = min_norm_point(&s.data);
        assert_eq!(m.status, Feasibility::Infeasible);
        // Optimality: no vertex direction decreases the norm.
        let x = s.data.transpose() * DVector::from_vec(m.weights.clone());
        let xx = x.norm_squared();
        for i in 0..6 {
            let xp: f64 = s.data.row(i).iter().zip(x.iter()).map(|(a, b)| a * b).sum();
            assert!(xp >= xx - 1e-9);
        }
    }

    #[test]
    fn more_assets_than_dimensions_often_feasible() {
        let p = VolatilityProfile::uniform(1.0).unwrap();
        let hits = (0..50)
            .filter(|&seed| {
                let s = draw_sample(&p, 40, 10, seed).unwrap();
                simplex_zero_variance_feasible(&s).status == Feasibility::Feasible
            })
            .count();
        assert!(hits >= 49);
        for seed in 0..20 {
            let s = draw_sample(&p, 5, 8, seed).unwrap();
            assert_eq!(simplex_zero_variance_feasible(&s).status, Feasibility::Infeasible);
        }
    }
}
