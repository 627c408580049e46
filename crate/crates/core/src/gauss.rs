//! Gaussian density, its CDF and the two iterated integrals
//!
//! ```text
//! Phi(x) = int_{-inf}^x phi(t) dt
//! Psi(x) = int_{-inf}^x Phi(t) dt = x Phi(x) + phi(x)
//! W(x)   = int_{-inf}^x Psi(t) dt = (x Psi(x) + Phi(x)) / 2
//! ```
//!
//! For moderate arguments the closed forms above are used directly. On the
//! far left tail both `Psi` and `W` are tiny differences of larger terms, so
//! they are evaluated as repeated integrals of `erfc` instead:
//! `Psi(-x) = ierfc(x/sqrt2)/sqrt2` and `W(-x) = i2erfc(x/sqrt2)`, with the
//! ratios `i^n erfc / i^(n-1) erfc` obtained from a backward continued fraction.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};

/// Beyond this magnitude the kernels are replaced by their asymptotes.
pub const TAIL_CUTOFF: f64 = 40.0;

/// Below this argument `Psi` and `W` switch to the continued-fraction branch.
const LEFT_TAIL_SWITCH: f64 = -2.0;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// All four kernels evaluated at one argument.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussKernelValue {
    pub x: f64,
    pub density: f64,
    pub cdf: f64,
    pub psi: f64,
    pub w: f64,
}

/// Evaluates phi, Phi, Psi and W at `x`.
pub fn eval_kernels(x: f64) -> Result<GaussKernelValue> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("kernel argument must be finite, got {x}")));
    }
    Ok(kernels(x))
}

#[inline]
pub(crate) fn kernels(x: f64) -> GaussKernelValue {
    if x > TAIL_CUTOFF {
        return GaussKernelValue { x, density: 0.0, cdf: 1.0, psi: x, w: 0.5 * (x * x + 1.0) };
    }
    if x < -TAIL_CUTOFF {
        return GaussKernelValue { x, density: 0.0, cdf: 0.0, psi: 0.0, w: 0.0 };
    }
    let density = density(x);
    if x >= LEFT_TAIL_SWITCH {
        let cdf = 0.5 * libm::erfc(-x * FRAC_1_SQRT_2);
        let psi = x * cdf + density;
        let w = 0.5 * (x * psi + cdf);
        GaussKernelValue { x, density, cdf, psi, w }
    } else {
        let z = -x * FRAC_1_SQRT_2;
        let erfc = libm::erfc(z);
        let (rho1, rho2) = erfc_integral_ratios(z);
        let ierfc = rho1 * erfc;
        GaussKernelValue { x, density, cdf: 0.5 * erfc, psi: ierfc * FRAC_1_SQRT_2, w: rho2 * ierfc }
    }
}

/// Standard normal density.
#[inline]
pub fn density(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal CDF.
#[inline]
pub fn cdf(x: f64) -> f64 {
    if x > TAIL_CUTOFF {
        1.0
    } else if x < -TAIL_CUTOFF {
        0.0
    } else {
        0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
    }
}

#[inline]
pub fn psi(x: f64) -> f64 {
    kernels(x).psi
}

#[inline]
pub fn w(x: f64) -> f64 {
    kernels(x).w
}

/// Ratios `(ierfc/erfc, i2erfc/ierfc)` at `z > 0` from the recurrence
/// `1/rho_n = 2z + 2(n+1) rho_{n+1}`, run backward from a depth that
/// gives full double precision for `z >= sqrt(2)`.
fn erfc_integral_ratios(z: f64) -> (f64, f64) {
    let depth = 32 + (256.0 / (z * z)) as usize;
    let mut rho = 0.0;
    let mut rho2 = 0.0;
    for n in (1..=depth).rev() {
        rho = 1.0 / (2.0 * z + 2.0 * (n as f64 + 1.0) * rho);
        if n == 2 {
            rho2 = rho;
        }
    }
    (rho, rho2)
}

/// Inverse of `W` on the branch `x >= 0`.
///
/// Requires `y >= 1/4 = W(0)`; smaller values correspond to aspect ratios
/// above the critical value and are rejected.
pub fn inverse_w(y: f64) -> Result<f64> {
    if !y.is_finite() || y < 0.25 {
        return Err(Error::Domain(format!("inverse_W needs y >= 1/4, got {y}")));
    }
    if y == 0.25 {
        return Ok(0.0);
    }
    // W is convex and increasing on x >= 0, W(x) >= (x^2 + 1)/2 - tail.
    let mut lo = 0.0_f64;
    let mut hi = (2.0 * y).sqrt() + 1.0;
    while w(hi) < y {
        hi *= 2.0;
    }
    let mut x = (2.0 * y - 1.0).max(0.0).sqrt().clamp(lo, hi);
    let tol = 1e-15 * y.max(1.0);
    for _ in 0..200 {
        let k = kernels(x);
        let resid = k.w - y;
        if resid.abs() <= tol {
            return Ok(x);
        }
        if resid > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let mut next = x - resid / k.psi;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 4.0 * f64::EPSILON * x.abs().max(1e-300) {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}

/// `W(x) ~ 1/4 + x/sqrt(2 pi)` for `x -> 0`.
pub fn w_small_argument(x: f64) -> f64 {
    0.25 + x / (2.0 * PI).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values from 50-digit arithmetic.
    const REFERENCE: &[(f64, f64, f64, f64)] = &[
        (-30.0, 4.90671392714818706e-198, 1.63195673409140119e-199, 5.42186243699174574e-201),
        (-20.0, 2.7536241186062337e-89, 1.37001249472957994e-90, 6.79956457353690439e-92),
        (-12.5, 3.73256429887771338e-36, 2.9489984378004278e-37, 2.31581258135893114e-38),
        (-8.0, 6.22096057427178412e-16, 7.55026241194649891e-17, 9.03753223572924963e-18),
        (-6.0, 9.86587645037698141e-10, 1.56356979597096643e-10, 2.4222883727559142e-11),
        (-4.0, 3.16712418331199213e-5, 7.14525843240566676e-6, 1.54510405174862711e-6),
        (-3.0, 1.34989803163009453e-3, 3.82154317047723596e-4, 1.0171754024346187e-4),
        (-2.5, 6.20966532577613517e-3, 2.00413717912819944e-3, 5.99661188977818278e-4),
        (-2.0000001, 2.27501265490831046e-2, 8.49070034181671641e-3, 2.88436250818981951e-3),
        (-2.0, 2.27501319481792072e-2, 8.49070261682963755e-3, 2.88436335725996605e-3),
        (-1.9999999, 2.27501373472764016e-2, 8.49070489184310365e-3, 2.88436420633034198e-3),
        (-1.5, 6.6807201268858066e-2, 2.93067937626046286e-2, 1.14235053124755615e-2),
        (-1.0, 1.58655253931457051e-1, 8.33154705876862984e-2, 3.76698916718853765e-2),
        (-0.5, 3.08537538725986896e-1, 1.9779655740130603e-1, 1.04819630012666941e-1),
        (-0.1, 4.60172162722971016e-1, 3.50935331204714661e-1, 2.12539314801249774e-1),
        (0.0, 0.5, 3.98942280401432678e-1, 0.25),
        (0.1, 5.39827837277028984e-1, 4.50935331204714667e-1, 2.92460685198750226e-1),
        (0.5, 6.91462461274013104e-1, 6.9779655740130603e-1, 5.20180369987333059e-1),
        (1.0, 8.41344746068542949e-1, 1.0833154705876863, 9.62330108328114623e-1),
        (1.5, 9.33192798731141934e-1, 1.52930679376260463, 1.61357649468752444),
        (2.0, 9.77249868051820793e-1, 2.00849070261682964, 2.49711563664274003),
        (3.0, 9.98650101968369905e-1, 3.00038215431704772, 4.99989828245975654),
        (5.0, 9.99999713348428121e-1, 5.00000005346165534, 1.29999999903283524e+1),
        (8.0, 9.99999999999999378e-1, 8.00000000000000008, 3.25e+1),
        (12.5, 1.0, 12.5, 78.625),
        (20.0, 1.0, 20.0, 200.5),
        (39.0, 1.0, 39.0, 761.0),
    ];

    fn rel(a: f64, b: f64) -> f64 {
        if b == 0.0 { a.abs() } else { ((a - b) / b).abs() }
    }

    #[test]
    fn matches_high_precision_reference() {
        for &(x, phi_ref, psi_ref, w_ref) in REFERENCE {
            let k = eval_kernels(x).unwrap();
            assert!(rel(k.cdf, phi_ref) <= 1e-13, "Phi({x}) = {} vs {phi_ref}", k.cdf);
            assert!(rel(k.psi, psi_ref) <= 1e-13, "Psi({x}) = {} vs {psi_ref}", k.psi);
            assert!(rel(k.w, w_ref) <= 1e-13, "W({x}) = {} vs {w_ref}", k.w);
        }
    }

    #[test]
    fn values_at_origin() {
        let k = eval_kernels(0.0).unwrap();
        assert_eq!(k.cdf, 0.5);
        assert!((k.w - 0.25).abs() < 1e-16);
        assert!((k.psi - 0.398_942_280_401_432_7).abs() < 1e-16);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(eval_kernels(f64::NAN).is_err());
        assert!(eval_kernels(f64::INFINITY).is_err());
    }

    #[test]
    fn symmetric_sum_of_w() {
        for i in 0..=160 {
            let x = -8.0 + 0.1 * i as f64;
            let lhs = w(x) + w(-x);
            let rhs = 0.5 * (1.0 + x * x);
            assert!((lhs - rhs).abs() <= 1e-13 * rhs, "x={x}");
        }
    }

    #[test]
    fn tail_asymptotes() {
        let k = kernels(45.0);
        assert_eq!((k.cdf, k.psi, k.w), (1.0, 45.0, 0.5 * (45.0 * 45.0 + 1.0)));
        let k = kernels(-45.0);
        assert_eq!((k.cdf, k.psi, k.w), (0.0, 0.0, 0.0));
    }

    #[test]
    fn derivative_chain_by_central_differences() {
        let h = 1e-5;
        for i in 0..=64 {
            let x = -8.0 + 0.25 * i as f64;
            let k = kernels(x);
            let dw = (w(x + h) - w(x - h)) / (2.0 * h);
            let dpsi = (psi(x + h) - psi(x - h)) / (2.0 * h);
            let dcdf = (cdf(x + h) - cdf(x - h)) / (2.0 * h);
            assert!((dw - k.psi).abs() <= 1e-8 * k.psi.max(1.0), "W' at {x}");
            assert!((dpsi - k.cdf).abs() <= 1e-8, "Psi' at {x}");
            assert!((dcdf - k.density).abs() <= 1e-8, "Phi' at {x}");
        }
    }

    #[test]
    fn inverse_w_edge_cases() {
        assert_eq!(inverse_w(0.25).unwrap(), 0.0);
        assert!(inverse_w(0.2499).is_err());
        assert!(inverse_w(f64::NAN).is_err());
        let x = inverse_w(1.0).unwrap();
        // eta = 0 closed form at r = 1/2: W(a) + W(-a) = (1 + a^2)/2 = 1 has a = 1,
        // and W(1) alone is slightly below 1.
        assert!((w(x) - 1.0).abs() <= 1e-12);
        assert!(x > 1.0 && x < 1.1);
        let big = inverse_w(1e6).unwrap();
        assert!(((big - (2e6_f64).sqrt()) / (2e6_f64).sqrt()).abs() <= 1e-3);
    }

    #[test]
    fn inverse_w_round_trip() {
        for i in 0..=200 {
            let x = 0.05 * i as f64;
            let back = inverse_w(w(x)).unwrap();
            assert!((back - x).abs() <= 1e-10, "x={x} back={back}");
        }
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn kernels_nonnegative_and_identities(x in -40.0f64..40.0) {
                let k = kernels(x);
                prop_assert!((0.0..=1.0).contains(&k.cdf));
                prop_assert!(k.psi >= 0.0 && k.w >= 0.0);
                let scale = k.psi.max(1e-300);
                prop_assert!((k.psi - (x * k.cdf + k.density)).abs() <= 1e-13 * (1.0 + x.abs()).max(scale));
            }

            #[test]
            fn cdf_monotone(x in -39.0f64..39.0, dx in 0.0f64..1.0) {
                prop_assert!(cdf(x + dx) >= cdf(x));
            }

            #[test]
            fn inverse_w_monotone(y in 0.25f64..1e4, dy in 0.0f64..10.0) {
                prop_assert!(inverse_w(y + dy).unwrap() >= inverse_w(y).unwrap());
            }
        }
    }
}
