//! Stationarity system and its solvers.
//!
//! Cold starts use a bracketed reduction: for a fixed gap `c = b - a` the
//! W-condition is monotone in `a`, and the remaining closure
//! `c s (1 - r G) / r = eta1 + eta2` is bisected in `ln c`. Warm starts and
//! the final polish use damped Newton on the reduced unknowns
//! `(t, ln c, s)` with `a = t^2`, which keeps `lambda >= eta1`.

use nalgebra::{DMatrix, DVector};

use super::closed_form::{critical_guess, small_r_guess};
use super::{
    AtomWeights, OrderParameters, RegularizedProblem, ReplicaSolution, ScaledVariables, WeightMixture,
};
use crate::error::{Error, Result};
use crate::gauss::{self, kernels};

/// Newton stops once the residual max-norm drops below this.
pub const SADDLE_TOLERANCE: f64 = 1e-12;
/// Largest residual accepted when Newton stalls at round-off level.
const ACCEPT_TOLERANCE: f64 = 1e-11;
const MAX_NEWTON_ITER: usize = 200;
const FD_STEP: f64 = 1e-7;
const MAX_SUBDIVISIONS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    /// `eta1 = eta2 = 0`: the two branches coincide, `b = a`.
    Tied,
    /// `eta2 = inf`: all short-side terms vanish.
    NoShort,
    General,
}

impl Mode {
    fn of(p: &RegularizedProblem) -> Self {
        if p.is_no_short() {
            Mode::NoShort
        } else if p.eta1 + p.eta2 == 0.0 {
            Mode::Tied
        } else {
            Mode::General
        }
    }

    fn dim(self) -> usize {
        match self {
            Mode::General => 3,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct KernelSums {
    /// `sum m [W(a/s) + W(-b/s)]`
    pub w: f64,
    /// `sum m/sigma [Psi(a/s) - Psi(-b/s)]`
    pub psi: f64,
    /// `sum m [Phi(a/s) + Phi(-b/s)]`
    pub cdf: f64,
}

pub(crate) fn kernel_sums(p: &RegularizedProblem, a: f64, b: f64) -> KernelSums {
    let mut out = KernelSums { w: 0.0, psi: 0.0, cdf: 0.0 };
    for atom in p.profile.atoms() {
        let ka = kernels(a / atom.sigma);
        let (mut w, mut psi, mut cdf) = (ka.w, ka.psi, ka.cdf);
        if b.is_finite() {
            let kb = kernels(-b / atom.sigma);
            w += kb.w;
            psi -= kb.psi;
            cdf += kb.cdf;
        }
        out.w += atom.mass * w;
        out.psi += atom.mass / atom.sigma * psi;
        out.cdf += atom.mass * cdf;
    }
    out
}

fn unpack(mode: Mode, x: &[f64]) -> (f64, f64, f64) {
    let a = x[0] * x[0];
    match mode {
        Mode::Tied => (a, a, x[1]),
        Mode::NoShort => (a, f64::INFINITY, x[1]),
        Mode::General => (a, a + x[1].exp(), x[2]),
    }
}

fn pack(mode: Mode, a: f64, b: f64, s: f64) -> Vec<f64> {
    let t = a.max(0.0).sqrt();
    match mode {
        Mode::General => vec![t, (b - a).max(f64::MIN_POSITIVE).ln(), s],
        _ => vec![t, s],
    }
}

/// Scaled residuals of the Psi-, W- and (general case) closure conditions.
/// `None` outside the physical domain `s > 0`, `r G < 1`.
fn residual(p: &RegularizedProblem, mode: Mode, x: &[f64]) -> Option<Vec<f64>> {
    let (a, b, s) = unpack(mode, x);
    if !(s > 0.0) || !a.is_finite() {
        return None;
    }
    let sums = kernel_sums(p, a, b);
    let one_minus = 1.0 - p.r * sums.cdf;
    if !(one_minus > 0.0) {
        return None;
    }
    let mut out = vec![s * sums.psi - 1.0, 2.0 * p.r * sums.w - 1.0];
    if mode == Mode::General {
        let kappa = p.eta1 + p.eta2;
        out.push(x[1] + (s * one_minus / (p.r * kappa)).ln());
    }
    out.iter().all(|v| v.is_finite()).then_some(out)
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Damped Newton with a central-difference Jacobian.
fn newton(p: &RegularizedProblem, mode: Mode, x0: Vec<f64>) -> std::result::Result<(Vec<f64>, f64), Vec<f64>> {
    let n = mode.dim();
    let mut x = x0;
    let mut f = match residual(p, mode, &x) {
        Some(f) => f,
        None => return Err(vec![f64::NAN; n]),
    };
    let mut norm = max_norm(&f);
    for _ in 0..MAX_NEWTON_ITER {
        if norm <= SADDLE_TOLERANCE {
            return Ok((x, norm));
        }
        let mut jac = DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            let h = FD_STEP * x[j].abs().max(1e-2);
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            let (fp, fm, width) = match (residual(p, mode, &xp), residual(p, mode, &xm)) {
                (Some(fp), Some(fm)) => (fp, fm, 2.0 * h),
                (Some(fp), None) => (fp, f.clone(), h),
                (None, Some(fm)) => (f.clone(), fm, h),
                (None, None) => return Err(f),
            };
            for i in 0..n {
                jac[(i, j)] = (fp[i] - fm[i]) / width;
            }
        }
        let rhs = DVector::from_iterator(n, f.iter().map(|v| -v));
        let Some(step) = jac.lu().solve(&rhs) else {
            return Err(f);
        };
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(xi, di)| xi + alpha * di).collect();
            if let Some(ft) = residual(p, mode, &trial) {
                let nt = max_norm(&ft);
                if nt < (1.0 - 1e-4 * alpha) * norm {
                    accepted = Some((trial, ft, nt));
                    break;
                }
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((xt, ft, nt)) => {
                x = xt;
                f = ft;
                norm = nt;
            }
            None if norm <= ACCEPT_TOLERANCE => return Ok((x, norm)),
            None => return Err(f),
        }
    }
    if norm <= ACCEPT_TOLERANCE {
        Ok((x, norm))
    } else {
        Err(f)
    }
}

/// Root in `a` of the W-condition for a fixed gap `c = b - a`
/// (`c = inf` for no-short). The left end of the monotone branch is
/// `a = -c/2`; `None` when the condition is already violated there.
fn solve_for_a(p: &RegularizedProblem, c: f64) -> Option<(f64, KernelSums)> {
    let eval = |a: f64| {
        let sums = kernel_sums(p, a, a + c);
        (2.0 * p.r * sums.w - 1.0, sums)
    };
    let mut lo = if c.is_infinite() { -gauss::TAIL_CUTOFF * p.profile.max_sigma() } else { -0.5 * c };
    let (f_lo, _) = eval(lo);
    if f_lo >= 0.0 {
        return None;
    }
    let mut hi = 1.0_f64;
    while eval(hi).0 <= 0.0 {
        hi *= 2.0;
        if hi > 1e300 {
            return None;
        }
    }
    let mut a = if lo < 0.0 && hi > 0.0 { 0.0_f64.max(lo + 0.5 * (hi - lo) * 1e-3) } else { 0.5 * (lo + hi) };
    for _ in 0..400 {
        let (fa, sums) = eval(a);
        if fa == 0.0 {
            return Some((a, sums));
        }
        if fa > 0.0 {
            hi = a;
        } else {
            lo = a;
        }
        let slope = 2.0 * p.r * sums.psi;
        let mut next = a - fa / slope;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - a).abs() <= 2.0 * f64::EPSILON * a.abs().max(f64::MIN_POSITIVE) || hi - lo <= f64::EPSILON * hi.abs()
        {
            let (_, sums) = eval(next);
            return Some((next, sums));
        }
        a = next;
    }
    let (_, sums) = eval(a);
    Some((a, sums))
}

/// Closure function in `u = ln c`; negative when `c` is too small.
fn closure(p: &RegularizedProblem, u: f64) -> f64 {
    let c = u.exp();
    match solve_for_a(p, c) {
        None => f64::NEG_INFINITY,
        Some((_, sums)) => c * (1.0 - p.r * sums.cdf) / (p.r * sums.psi) - (p.eta1 + p.eta2),
    }
}

fn bracketed(p: &RegularizedProblem, mode: Mode) -> Result<(f64, f64, f64)> {
    let fail = |msg: &str| Error::NonConvergence { message: msg.to_string(), residuals: vec![] };
    let c = match mode {
        Mode::Tied => 0.0,
        Mode::NoShort => f64::INFINITY,
        Mode::General => {
            let kappa = p.eta1 + p.eta2;
            let u0 = (2.0 * p.r * kappa).ln();
            let mut lo = u0 - 1.0;
            while closure(p, lo) >= 0.0 {
                lo -= 4.0;
                if lo < -700.0 {
                    return Err(fail("closure bracket failed below"));
                }
            }
            let mut hi = u0 + 1.0;
            while closure(p, hi) <= 0.0 {
                hi += 4.0;
                if hi > 700.0 {
                    return Err(fail("closure bracket failed above"));
                }
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if closure(p, mid) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= 1e-14 * hi.abs().max(1.0) {
                    break;
                }
            }
            (0.5 * (lo + hi)).exp()
        }
    };
    let Some((a, sums)) = solve_for_a(p, c) else {
        return Err(match mode {
            Mode::Tied => Error::Domain(format!("unregularized optimum diverges for r >= 1 (r = {})", p.r)),
            _ => fail("W-condition has no root"),
        });
    };
    Ok((a, a + c, 1.0 / sums.psi))
}

fn params_to_x(p: &RegularizedProblem, mode: Mode, init: &OrderParameters) -> Option<Vec<f64>> {
    let s = (init.q0 * p.r).sqrt();
    let scale = p.r * (1.0 + init.delta) / s;
    let a = (init.lambda - p.eta1).max(0.0) * scale;
    let b = match mode {
        Mode::Tied => a,
        Mode::NoShort => f64::INFINITY,
        Mode::General => a + (p.eta1 + p.eta2) * scale,
    };
    let x = pack(mode, a, b, s);
    x.iter().all(|v| v.is_finite()).then_some(x)
}

fn check_solvable(p: &RegularizedProblem) -> Result<()> {
    if p.r >= 2.0 {
        return Err(Error::FlatLandscape { r: p.r });
    }
    Ok(())
}

/// Newton only, from an explicit starting point.
pub(crate) fn newton_from(p: &RegularizedProblem, init: &OrderParameters) -> Result<ReplicaSolution> {
    check_solvable(p)?;
    let mode = Mode::of(p);
    let x0 = params_to_x(p, mode, init)
        .ok_or_else(|| Error::NonConvergence { message: "invalid starting point".into(), residuals: vec![] })?;
    match newton(p, mode, x0) {
        Ok((x, norm)) => {
            let (a, b, s) = unpack(mode, &x);
            Ok(assemble(p, a, b, s, norm))
        }
        Err(resid) => Err(Error::NonConvergence { message: "Newton from warm start".into(), residuals: resid }),
    }
}

/// Solves the stationarity conditions for `0 < r < 2`.
///
/// A supplied `init` is tried first with Newton; otherwise, or if that fails,
/// the bracketed reduction is used and then polished.
pub fn solve_saddle(p: &RegularizedProblem, init: Option<&OrderParameters>) -> Result<ReplicaSolution> {
    check_solvable(p)?;
    if let Some(init) = init {
        if let Ok(sol) = newton_from(p, init) {
            return Ok(sol);
        }
    }
    let mode = Mode::of(p);
    let (a, b, s) = bracketed(p, mode)?;
    let x0 = pack(mode, a, b, s);
    let base = residual(p, mode, &x0).map(|f| max_norm(&f));
    match newton(p, mode, x0) {
        Ok((x, norm)) => {
            let (a, b, s) = unpack(mode, &x);
            Ok(assemble(p, a, b, s, norm))
        }
        Err(resid) => match base {
            Some(norm) if norm <= ACCEPT_TOLERANCE => Ok(assemble(p, a, b, s, norm)),
            _ => Err(Error::NonConvergence { message: "polish after bracketing".into(), residuals: resid }),
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContinuationDirection {
    /// From `r = 1e-3` upward, seeded by the small-`r` limit.
    Upward,
    /// From `r = 2 - 1e-3` downward, seeded by the critical asymptotics.
    Downward,
}

const CONTINUATION_EDGE: f64 = 1e-3;

/// Solves along an `r` grid by warm-started continuation.
///
/// Results are returned in the order of `rs`. Each step is first attempted
/// as one Newton jump from the previous solution and bisected on failure;
/// a point that still fails falls back to a cold bracketed solve.
pub fn solve_path(
    template: &RegularizedProblem,
    rs: &[f64],
    direction: ContinuationDirection,
) -> Vec<Result<ReplicaSolution>> {
    let mut order: Vec<usize> = (0..rs.len()).collect();
    order.sort_by(|&i, &j| rs[i].partial_cmp(&rs[j]).unwrap_or(std::cmp::Ordering::Equal));
    if direction == ContinuationDirection::Downward {
        order.reverse();
    }
    let mut out: Vec<Option<Result<ReplicaSolution>>> = (0..rs.len()).map(|_| None).collect();

    let tied = Mode::of(template) == Mode::Tied;
    let mut current: Option<(f64, OrderParameters)> = None;
    if !tied {
        let start = match direction {
            ContinuationDirection::Upward => CONTINUATION_EDGE.min(rs.iter().cloned().fold(f64::INFINITY, f64::min)),
            ContinuationDirection::Downward => {
                (2.0 - CONTINUATION_EDGE).max(rs.iter().cloned().filter(|&r| r < 2.0).fold(0.0, f64::max))
            }
        };
        if start > 0.0 && start < 2.0 {
            let p = template.with_r(start);
            let guess = match direction {
                ContinuationDirection::Upward => small_r_guess(&p),
                ContinuationDirection::Downward => critical_guess(&p),
            };
            if let Ok(sol) = solve_saddle(&p, Some(&guess)) {
                current = Some((start, sol.params));
            }
        }
    }

    for idx in order {
        let r = rs[idx];
        let p = template.with_r(r);
        let result = if r >= 2.0 {
            Err(Error::FlatLandscape { r })
        } else {
            match current {
                Some((r_prev, prev)) => {
                    march(template, r_prev, prev, r, 0).or_else(|_| solve_saddle(&p, None))
                }
                None => solve_saddle(&p, None),
            }
        };
        if let Ok(sol) = &result {
            current = Some((r, sol.params));
        }
        out[idx] = Some(result);
    }
    out.into_iter().map(|r| r.expect("every grid point visited")).collect()
}

fn march(
    template: &RegularizedProblem,
    r_from: f64,
    from: OrderParameters,
    r_to: f64,
    depth: usize,
) -> Result<ReplicaSolution> {
    let p = template.with_r(r_to);
    match newton_from(&p, &from) {
        Ok(sol) => Ok(sol),
        Err(e) if depth >= MAX_SUBDIVISIONS => Err(e),
        Err(_) => {
            let r_mid = 0.5 * (r_from + r_to);
            let mid = march(template, r_from, from, r_mid, depth + 1)?;
            march(template, r_mid, mid.params, r_to, depth + 1)
        }
    }
}

pub(crate) fn assemble(p: &RegularizedProblem, a: f64, b: f64, s: f64, residual: f64) -> ReplicaSolution {
    let sums = kernel_sums(p, a, b);
    let r = p.r;
    let one_minus = 1.0 - r * sums.cdf;
    let delta = r * sums.cdf / one_minus;
    let q0 = s * s / r;
    let lambda = p.eta1 + a * s * one_minus / r;
    let f_in_sample = lambda - s * s * one_minus * one_minus / (2.0 * r * r);
    let params = OrderParameters::from_primary(lambda, q0, delta, r);

    let mut n0 = 0.0;
    let atoms = p
        .profile
        .atoms()
        .iter()
        .map(|atom| {
            let (ya, yb) = (a / atom.sigma, b / atom.sigma);
            n0 += atom.mass * if b.is_finite() { gauss::cdf(-ya) - gauss::cdf(-yb) } else { gauss::cdf(-ya) };
            let s2 = atom.sigma * atom.sigma;
            AtomWeights { sigma: atom.sigma, mass: atom.mass, w1: a * s / s2, w2: b * s / s2, sigma_w: s / atom.sigma }
        })
        .collect();
    let q0_tilde = q0 * p.profile.m2();
    ReplicaSolution {
        problem: p.clone(),
        params,
        scaled: ScaledVariables { a, b, s },
        mixture: WeightMixture { atoms, n0 },
        f_in_sample,
        q0_tilde,
        rel_error: q0_tilde.sqrt() - 1.0,
        residuals: residual,
    }
}
