//! Reference computations that share no code with the library paths they
//! check: Gauss-Legendre quadrature for the Gaussian kernels and a direct
//! linear solve for the unregularized portfolio.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::sim::ReturnSample;

const NODES: usize = 16;
const PANEL: f64 = 0.25;
/// Lower integration limit below `min(x, 0)`; the neglected tail is < 1e-40.
const TAIL: f64 = 14.0;

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Composite Gauss-Legendre integral of `f` over `[a, b]`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let (x, w) = gauss_legendre(NODES);
    let panels = (((b - a) / PANEL).ceil() as usize).max(1);
    let h = (b - a) / panels as f64;
    // Accumulate from the far tail up so small terms are not swamped.
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + h * p as f64;
        let mid = lo + 0.5 * h;
        total += 0.5 * h * x.iter().zip(&w).map(|(xi, wi)| wi * f(mid + 0.5 * h * xi)).sum::<f64>();
    }
    total
}

fn normal_density(t: f64) -> f64 {
    (-0.5 * t * t).exp() / (2.0 * PI).sqrt()
}

/// `(Phi, Psi, W)` at `x` as integrals of the normal density against
/// `1`, `x - t` and `(x - t)^2 / 2`.
pub fn kernels(x: f64) -> (f64, f64, f64) {
    let a = x.min(0.0) - TAIL;
    let phi = integrate(normal_density, a, x);
    let psi = integrate(|t| (x - t) * normal_density(t), a, x);
    let w = integrate(|t| 0.5 * (x - t) * (x - t) * normal_density(t), a, x);
    (phi, psi, w)
}

/// Root of `W(x) = y` on `x >= 0` by bisection on the quadrature `W`.
pub fn inverse_w(y: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, (2.0 * y).sqrt() + 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if kernels(mid).2 < y {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Budget-constrained minimum-variance weights `N C^-1 1 / (1' C^-1 1)`.
pub fn lagrange_weights(sample: &ReturnSample) -> Option<Vec<f64>> {
    let c: DMatrix<f64> = &sample.data * sample.data.transpose();
    let n = sample.n();
    let y = c.lu().solve(&DVector::from_element(n, 1.0))?;
    let total = y.sum();
    Some(y.iter().map(|v| n as f64 * v / total).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_rule_is_exact_on_polynomials() {
        let (x, w) = gauss_legendre(NODES);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        let m30: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(30)).sum();
        assert!((m30 - 2.0 / 31.0).abs() < 1e-14);
    }

    #[test]
    fn kernel_values() {
        let (phi, psi, w) = kernels(0.0);
        assert!((phi - 0.5).abs() < 1e-15);
        assert!((psi - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-15);
        assert!((w - 0.25).abs() < 1e-15);
        let (_, _, w1) = kernels(1.3);
        let (_, _, w2) = kernels(-1.3);
        assert!((w1 + w2 - 0.5 * (1.0 + 1.69)).abs() < 1e-14);
        assert!((kernels(inverse_w(1.0)).2 - 1.0).abs() < 1e-13);
    }
}
