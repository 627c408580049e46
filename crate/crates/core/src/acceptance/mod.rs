//! The acceptance suite: thirteen end-to-end checks of the analytic and
//! simulated results, each reported as one pass/fail line.

pub mod oracle;

use std::f64::consts::PI;
use std::fmt;
use std::time::{Duration, Instant};

use num_rational::BigRational;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::experiments::{analytic_condensate_path, cdf_sup_distance, staircase_ensemble, Grid, Spacing};
use crate::io::table::{Cell, Table};
use crate::replica::{
    riskless_limit_check, solve_saddle, Atom, RegularizedProblem, VolatilityProfile,
};
use crate::sim::{
    draw_sample, feasibility_frequency, measure_ensemble, observations_for, simplex_zero_variance_feasible,
    solve_qp, vanishing_variance_probability, Feasibility, QpOptions, QpStatus,
};
use crate::{gauss, rng};

/// Base seed of every Monte Carlo criterion.
pub const SUITE_SEED: u64 = 20_170_419;

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionReport {
    pub id: u8,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
    pub budget: Duration,
}

impl fmt::Display for CriterionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let over = if self.elapsed > self.budget { ", over budget" } else { "" };
        write!(
            f,
            "{} criterion {:>2} {}: {} [{:.2} s of {} s{over}]",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.detail,
            self.elapsed.as_secs_f64(),
            self.budget.as_secs()
        )
    }
}

/// Collects named checks and turns them into a report.
struct Checks {
    failed: Vec<String>,
    notes: Vec<String>,
}

impl Checks {
    fn new() -> Self {
        Self { failed: Vec::new(), notes: Vec::new() }
    }

    fn check(&mut self, ok: bool, what: impl Into<String>) {
        let what = what.into();
        if !ok {
            self.failed.push(what.clone());
        }
        self.notes.push(what);
    }

    fn finish(self, id: u8, title: &'static str, start: Instant, budget_s: u64) -> CriterionReport {
        let passed = self.failed.is_empty();
        let detail = if passed { self.notes.join("; ") } else { format!("failed: {}", self.failed.join("; ")) };
        CriterionReport { id, title, passed, detail, elapsed: start.elapsed(), budget: Duration::from_secs(budget_s) }
    }
}

fn errored(id: u8, title: &'static str, start: Instant, budget_s: u64, e: Error) -> CriterionReport {
    CriterionReport {
        id,
        title,
        passed: false,
        detail: format!("error: {e}"),
        elapsed: start.elapsed(),
        budget: Duration::from_secs(budget_s),
    }
}

fn run(id: u8, title: &'static str, budget_s: u64, body: impl FnOnce(&mut Checks) -> Result<()>) -> CriterionReport {
    let start = Instant::now();
    let mut c = Checks::new();
    match body(&mut c) {
        Ok(()) => c.finish(id, title, start, budget_s),
        Err(e) => errored(id, title, start, budget_s, e),
    }
}

fn unit() -> VolatilityProfile {
    VolatilityProfile::uniform(1.0).expect("unit profile")
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

pub fn criterion_1() -> CriterionReport {
    run(1, "kernel identities", 1, |c| {
        let mut id_psi: f64 = 0.0;
        let mut id_w: f64 = 0.0;
        let mut quad: f64 = 0.0;
        for k in 0..1000 {
            let x = -8.0 + 16.0 * k as f64 / 999.0;
            let v = gauss::eval_kernels(x)?;
            id_psi = id_psi.max((v.psi - x * v.cdf - v.density).abs());
            id_w = id_w.max((v.w - 0.5 * x * v.psi - 0.5 * v.cdf).abs());
            let (phi, psi, w) = oracle::kernels(x);
            quad = quad.max(rel(v.cdf, phi)).max(rel(v.psi, psi)).max(rel(v.w, w));
        }
        c.check(id_psi <= 1e-13, format!("max |Psi - x Phi - phi| = {id_psi:.1e}"));
        c.check(id_w <= 1e-13, format!("max |W - x Psi/2 - Phi/2| = {id_w:.1e}"));
        c.check(quad <= 1e-10, format!("max relative deviation from quadrature = {quad:.1e}"));
        Ok(())
    })
}

pub fn criterion_2() -> CriterionReport {
    run(2, "unregularized closed form", 1, |c| {
        let mut worst: f64 = 0.0;
        for k in 1..=9 {
            let r = 0.1 * k as f64;
            let s = solve_saddle(&RegularizedProblem::symmetric(r, 0.0, unit())?, None)?;
            let expect = [1.0 / (1.0 - r), r / (1.0 - r), (1.0 - r) / r, (1.0 - r) / (2.0 * r)];
            let got = [s.params.q0, s.params.delta, s.params.lambda, s.f_in_sample];
            for (g, e) in got.iter().zip(expect) {
                worst = worst.max((g - e).abs());
            }
        }
        c.check(worst <= 1e-8, format!("max deviation of (q0, delta, lambda, f) over r = 0.1..0.9: {worst:.1e}"));
        Ok(())
    })
}

pub fn criterion_3() -> CriterionReport {
    run(3, "no-short closed form", 2, |c| {
        let mut worst: f64 = 0.0;
        let eta1 = 0.05;
        for k in 1..=50 {
            let r = 2.0 * k as f64 / 51.0;
            let s = solve_saddle(&RegularizedProblem::no_short(r, eta1, unit())?, None)?;
            let x = oracle::inverse_w(0.5 / r);
            let psi = oracle::kernels(x).1;
            let (lambda, q0) = (eta1 + x * x, 1.0 / (r * psi * psi));
            worst = worst.max(rel(s.params.lambda, lambda)).max(rel(s.params.q0, q0));
        }
        c.check(worst <= 1e-6, format!("max relative deviation of (lambda, q0) on 50 points: {worst:.1e}"));
        let edge = solve_saddle(&RegularizedProblem::no_short(2.0 - 1e-4, eta1, unit())?, None)?;
        c.check((edge.params.q0 - PI).abs() <= 1e-3, format!("q0(2 - 1e-4) - pi = {:.1e}", edge.params.q0 - PI));
        let mut spread: f64 = 0.0;
        for r in [0.3, 0.9, 1.5, 1.9] {
            let q: Vec<f64> = [0.0, 0.05, 0.2]
                .iter()
                .map(|&e| Ok(solve_saddle(&RegularizedProblem::no_short(r, e, unit())?, None)?.params.q0))
                .collect::<Result<_>>()?;
            spread = spread.max((q[0] - q[1]).abs()).max((q[0] - q[2]).abs());
        }
        c.check(spread <= 1e-9, format!("q0 spread over eta1 in {{0, 0.05, 0.2}}: {spread:.1e}"));
        Ok(())
    })
}

pub fn criterion_4() -> CriterionReport {
    run(4, "critical asymptotics", 2, |c| {
        let eps = 1e-3;
        let eta = 0.05;
        let s = solve_saddle(&RegularizedProblem::symmetric(2.0 - eps, eta, unit())?, None)?;
        let p = &s.params;
        let d = p.delta * eps;
        let l = 32.0 * (p.lambda - eta) / (PI * eps * eps);
        c.check((3.92..=4.08).contains(&d), format!("delta eps = {d:.4}"));
        c.check((0.95..=1.05).contains(&l), format!("32 (lambda - eta1) / (pi eps^2) = {l:.4}"));
        c.check((s.mixture.n0 - 0.5).abs() <= 1e-3, format!("n0 - 1/2 = {:.1e}", s.mixture.n0 - 0.5));
        c.check((s.f_in_sample - eta).abs() <= 1e-4, format!("f - eta1 = {:.1e}", s.f_in_sample - eta));
        c.check(rel(p.q0, PI) <= 0.01, format!("q0 / pi - 1 = {:.1e}", p.q0 / PI - 1.0));
        let t = solve_saddle(&RegularizedProblem::new(2.0 - eps, eta, 2.0 * eta, unit())?, None)?;
        let shift = [
            rel(t.params.q0, p.q0),
            rel(t.params.delta, p.delta),
            (t.params.lambda - p.lambda).abs(),
            (t.mixture.n0 - s.mixture.n0).abs(),
            (t.f_in_sample - s.f_in_sample).abs(),
        ]
        .into_iter()
        .fold(0.0, f64::max);
        c.check(shift <= 1e-6, format!("largest change when eta2 doubles: {shift:.1e}"));
        Ok(())
    })
}

pub fn criterion_5() -> CriterionReport {
    run(5, "small-r limit", 1, |c| {
        let r = 1e-4;
        let s = solve_saddle(&RegularizedProblem::symmetric(r, 0.01, unit())?, None)?;
        c.check((s.params.q0 - 1.0).abs() <= 1e-3, format!("q0 - 1 = {:.1e}", s.params.q0 - 1.0));
        c.check((s.params.delta / r - 1.0).abs() <= 1e-2, format!("delta / r - 1 = {:.1e}", s.params.delta / r - 1.0));
        c.check((2.0 * r * s.f_in_sample - 1.0).abs() <= 1e-3, format!("2 r f - 1 = {:.1e}", 2.0 * r * s.f_in_sample - 1.0));
        c.check(s.mixture.n0 <= 1e-6, format!("n0 = {:.1e}", s.mixture.n0));
        Ok(())
    })
}

pub fn criterion_6() -> CriterionReport {
    run(6, "riskless asset", 1, |c| {
        let n = 100;
        let profile = VolatilityProfile::new(vec![Atom { sigma: 1e-3, mass: 0.01 }, Atom { sigma: 1.0, mass: 0.99 }])?;
        let s = solve_saddle(&RegularizedProblem::symmetric(0.5, 0.01, profile)?, None)?;
        let rep = riskless_limit_check(&s, n)?;
        c.check((rep.q0_tilde - 1.0).abs() <= 1e-2, format!("q0_tilde = {:.4}", rep.q0_tilde));
        c.check(rep.mean_deviation.abs() <= 0.01, format!("dominant mean / N - 1 = {:.2e}", rep.mean_deviation));
        c.check(rep.sd_deviation.abs() <= 0.05, format!("dominant sd / sqrt(N r) - 1 = {:.2e}", rep.sd_deviation));
        Ok(())
    })
}

pub fn criterion_7() -> CriterionReport {
    run(7, "QP against the Lagrange solution", 5, |c| {
        let mut worst: f64 = 0.0;
        for k in 0..50 {
            let sample = draw_sample(&unit(), 20, 60, rng::sample_seed(SUITE_SEED, k))?;
            let qp = solve_qp(&sample, 0.0, 0.0, &QpOptions::default())?;
            let exact = oracle::lagrange_weights(&sample).ok_or_else(|| Error::Qp("singular covariance".into()))?;
            for (a, b) in qp.weights.iter().zip(&exact) {
                worst = worst.max((a - b).abs());
            }
        }
        c.check(worst <= 1e-8, format!("max coordinate deviation over 50 seeds: {worst:.1e}"));
        Ok(())
    })
}

/// Ensemble `q0_hat` against the replica `q0` at the realized aspect ratio,
/// N = 50, eta = 0.01, 200 samples per point.
pub fn simulation_table(base_seed: u64) -> Result<Table> {
    let (n, samples, eta) = (50, 200, 0.01);
    let mut t = Table::new(["r", "t", "realized_r", "q0", "q0_hat", "q0_hat_se", "n_failed"]);
    for (k, r) in [0.25, 0.5, 0.75, 1.0, 1.25, 1.5].into_iter().enumerate() {
        let realized = n as f64 / observations_for(n, r) as f64;
        let p = RegularizedProblem::symmetric(realized, eta, unit())?;
        let analytic = solve_saddle(&p, None)?;
        let m = measure_ensemble(&p, n, samples, rng::sample_seed(base_seed, 1000 * k as u64))?;
        t.push(vec![
            r.into(),
            m.t.into(),
            m.realized_r.into(),
            analytic.params.q0.into(),
            m.q0_hat.mean.into(),
            m.q0_hat.se.into(),
            Cell::from(m.n_failed),
        ]);
    }
    Ok(t)
}

pub fn criterion_8() -> CriterionReport {
    run(8, "replica q0 against simulation", 300, |c| {
        let t = simulation_table(SUITE_SEED)?;
        let col = |name: &str| t.column(name).expect("column present");
        let (rs, q0, mean, se, failed) = (col("r"), col("q0"), col("q0_hat"), col("q0_hat_se"), col("n_failed"));
        for k in 0..rs.len() {
            let dev = (mean[k] - q0[k]).abs();
            let allowed = (0.05 * q0[k]).max(3.0 * se[k]);
            c.check(
                dev <= allowed && failed[k] == 0.0,
                format!("r = {}: q0 {:.4}, q0_hat {:.4} +- {:.4}", rs[k], q0[k], mean[k], se[k]),
            );
        }
        Ok(())
    })
}

pub fn criterion_9() -> CriterionReport {
    run(9, "condensate staircases", 120, |c| {
        let profile = VolatilityProfile::two_point(10f64.sqrt(), 1.0, 0.5)?;
        let etas = Grid::Range { start: 0.01, stop: 10.0, count: 30, spacing: Spacing::Log }.values()?;
        let e = staircase_ensemble(100, 300, &profile, &etas, 10, SUITE_SEED, &QpOptions::default())?;
        let worst = e
            .mean_n0
            .iter()
            .zip(&e.analytic_n0)
            .map(|(m, a)| (m.mean - a).abs())
            .fold(0.0, |acc: f64, d| if d.is_nan() { f64::INFINITY } else { acc.max(d) });
        c.check(worst <= 0.05, format!("max |mean n0 - analytic| = {worst:.4}"));
        let failures: usize = e.staircases.iter().map(|s| s.failures).sum();
        c.check(failures == 0, format!("{failures} failed solves"));
        let bad: Vec<u64> = e.staircases.iter().filter(|s| !s.is_nondecreasing()).map(|s| s.seed).collect();
        c.check(bad.is_empty(), format!("{} of 10 staircases decrease somewhere", bad.len()));
        let r = e.realized_r;
        let mut ordered = true;
        for sol in analytic_condensate_path(&profile, r, &etas) {
            let sol = sol?;
            ordered &= sol.condensate_contribution_at(10f64.sqrt()) > sol.condensate_contribution_at(1.0);
        }
        c.check(ordered, "high-volatility elimination probability exceeds low-volatility at every eta");
        Ok(())
    })
}

pub fn criterion_10() -> CriterionReport {
    run(10, "weight distribution", 120, |c| {
        let p = RegularizedProblem::symmetric(0.1, 0.01, unit())?;
        let analytic = solve_saddle(&p, None)?;
        let m = measure_ensemble(&p, 100, 100, SUITE_SEED)?;
        let d = cdf_sup_distance(&m.pooled_nonzero, |w| analytic.continuous_cdf(w));
        c.check(d <= 0.02, format!("sup distance {d:.4} over {} nonzero weights", m.pooled_nonzero.len()));
        let norm = analytic.normalization_error().abs();
        c.check(norm <= 1e-10, format!("normalization error {norm:.1e}"));
        c.check(m.n_failed == 0, format!("{} failed samples", m.n_failed));
        Ok(())
    })
}

pub fn criterion_11() -> CriterionReport {
    run(11, "vanishing-variance transition", 180, |c| {
        let mut exact_ok = true;
        let half = BigRational::new(1.into(), 2.into());
        for t in 2..=8u64 {
            exact_ok &= (1..=t).all(|n| vanishing_variance_probability(n, t).is_zero());
            exact_ok &= vanishing_variance_probability(2 * t, t) == half;
        }
        c.check(exact_ok, "exact p = 0 for N <= T and p = 1/2 at N = 2T, T = 2..8");
        let a = feasibility_frequency(8, 4, 4000, SUITE_SEED)?;
        let se = (0.25 / (a.feasible + a.infeasible) as f64).sqrt();
        c.check(
            (a.frequency - 0.5).abs() <= 3.0 * se,
            format!("(8, 4): {:.4} +- {se:.4}, {} indeterminate", a.frequency, a.indeterminate),
        );
        let b = feasibility_frequency(40, 10, 4000, SUITE_SEED)?;
        c.check(b.frequency >= 0.99, format!("(40, 10): {:.4}", b.frequency));
        Ok(())
    })
}

pub fn criterion_12() -> CriterionReport {
    run(12, "flat landscape", 30, |c| {
        let (n, t, eta) = (80, 20, 0.05);
        let sample = draw_sample(&unit(), n, t, SUITE_SEED)?;
        let sol = solve_qp(&sample, eta, eta, &QpOptions::default())?;
        let gap = sol.objective - eta;
        c.check(sol.status == QpStatus::FlatLandscape, format!("status {:?}", sol.status));
        c.check(gap <= 1e-7, format!("objective/N - eta1 = {gap:.1e}"));
        c.check(sol.variance <= 1e-9 * n as f64, format!("variance {:.1e}", sol.variance));
        let hull = simplex_zero_variance_feasible(&sample);
        c.check(hull.status == Feasibility::Feasible, "a zero-variance simplex point exists");
        let point = solve_saddle(&RegularizedProblem::symmetric(2.5, eta, unit())?, None);
        c.check(matches!(point, Err(Error::FlatLandscape { .. })), "saddle solve at r = 2.5 reports a flat landscape");
        Ok(())
    })
}

pub fn criterion_13() -> CriterionReport {
    run(13, "determinism", 600, |c| {
        // Different worker counts change the schedule but must not change output.
        let once = |threads: usize| -> Result<String> {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| Error::InvalidArgument(e.to_string()))?;
            pool.install(|| simulation_table(SUITE_SEED))?.to_csv()
        };
        let a = once(1)?;
        let b = once(4)?;
        c.check(a == b, format!("simulation CSV ({} bytes) identical across reruns", a.len()));
        Ok(())
    })
}

pub fn run_all() -> Vec<CriterionReport> {
    vec![
        criterion_1(),
        criterion_2(),
        criterion_3(),
        criterion_4(),
        criterion_5(),
        criterion_6(),
        criterion_7(),
        criterion_8(),
        criterion_9(),
        criterion_10(),
        criterion_11(),
        criterion_12(),
        criterion_13(),
    ]
}
