use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::CRITICAL_BAND;
use crate::error::{Error, Result};
use crate::io::table::{Cell, Table};
use crate::replica::{
    critical_asymptotics, solve_path, ContinuationDirection, RegularizedProblem, ReplicaSolution, VolatilityProfile,
};
use crate::sim::{measure_ensemble, EnsembleMeasurement};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    Q0,
    Q0Tilde,
    N0,
    Lambda,
    Delta,
    F,
}

impl Observable {
    pub const ALL: [Observable; 6] =
        [Observable::Q0, Observable::Q0Tilde, Observable::N0, Observable::Lambda, Observable::Delta, Observable::F];

    pub fn name(self) -> &'static str {
        match self {
            Observable::Q0 => "q0",
            Observable::Q0Tilde => "q0_tilde",
            Observable::N0 => "n0",
            Observable::Lambda => "lambda",
            Observable::Delta => "delta",
            Observable::F => "f",
        }
    }
}

/// Slopes on long and short positions; a missing `eta2` means symmetric,
/// `eta2 = inf` forbids short positions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PenaltyPair {
    pub eta1: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta2: Option<f64>,
}

impl PenaltyPair {
    pub fn symmetric(eta: f64) -> Self {
        Self { eta1: eta, eta2: None }
    }

    pub fn no_short(eta1: f64) -> Self {
        Self { eta1, eta2: Some(f64::INFINITY) }
    }

    pub fn eta2(&self) -> f64 {
        self.eta2.unwrap_or(self.eta1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationBlock {
    pub n: usize,
    pub samples: usize,
    pub base_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub rs: Vec<f64>,
    pub penalties: Vec<PenaltyPair>,
    pub profile: VolatilityProfile,
    pub observables: Vec<Observable>,
    pub simulation: Option<SimulationBlock>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticValues {
    pub q0: f64,
    pub q0_tilde: f64,
    pub n0: f64,
    pub lambda: f64,
    pub delta: f64,
    pub f: f64,
}

impl AnalyticValues {
    pub fn get(&self, o: Observable) -> f64 {
        match o {
            Observable::Q0 => self.q0,
            Observable::Q0Tilde => self.q0_tilde,
            Observable::N0 => self.n0,
            Observable::Lambda => self.lambda,
            Observable::Delta => self.delta,
            Observable::F => self.f,
        }
    }

    fn from_solution(s: &ReplicaSolution) -> Self {
        Self {
            q0: s.params.q0,
            q0_tilde: s.q0_tilde,
            n0: s.mixture.n0,
            lambda: s.params.lambda,
            delta: s.params.delta,
            f: s.f_in_sample,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointStatus {
    Solved,
    /// Inside the critical band; values from the `r -> 2` asymptotics.
    Asymptotic,
    /// `r >= 2`: no saddle point.
    Flat,
    Failed(String),
}

impl PointStatus {
    pub fn label(&self) -> &str {
        match self {
            PointStatus::Solved => "solved",
            PointStatus::Asymptotic => "asymptotic",
            PointStatus::Flat => "flat",
            PointStatus::Failed(_) => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticPoint {
    pub r: f64,
    pub status: PointStatus,
    pub values: Option<AnalyticValues>,
    pub solution: Option<ReplicaSolution>,
}

/// Replica values along `rs` for one regularizer.
///
/// Points below `r = 1` come from upward continuation and the rest from
/// downward continuation off the critical point, which keeps each solve
/// close to a well-conditioned neighbour on its side of the resonance.
pub fn analytic_curve(template: &RegularizedProblem, rs: &[f64]) -> Vec<AnalyticPoint> {
    let mut out: Vec<Option<AnalyticPoint>> = vec![None; rs.len()];
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    for (i, &r) in rs.iter().enumerate() {
        if r >= 2.0 {
            out[i] = Some(AnalyticPoint { r, status: PointStatus::Flat, values: None, solution: None });
        } else if 2.0 - r < CRITICAL_BAND && template.eta1 + template.eta2 > 0.0 {
            let c = critical_asymptotics(2.0 - r, template.eta1, &template.profile);
            let values = AnalyticValues {
                q0: c.q0,
                q0_tilde: c.q0 * template.profile.m2(),
                n0: c.n0,
                lambda: c.lambda,
                delta: c.delta,
                f: c.f,
            };
            out[i] = Some(AnalyticPoint { r, status: PointStatus::Asymptotic, values: Some(values), solution: None });
        } else if r < 1.0 {
            lower.push(i);
        } else {
            upper.push(i);
        }
    }
    for (idx, dir) in [(lower, ContinuationDirection::Upward), (upper, ContinuationDirection::Downward)] {
        let sub: Vec<f64> = idx.iter().map(|&i| rs[i]).collect();
        for (&i, res) in idx.iter().zip(solve_path(template, &sub, dir)) {
            out[i] = Some(match res {
                Ok(sol) => AnalyticPoint {
                    r: rs[i],
                    status: PointStatus::Solved,
                    values: Some(AnalyticValues::from_solution(&sol)),
                    solution: Some(sol),
                },
                Err(Error::FlatLandscape { .. }) => {
                    AnalyticPoint { r: rs[i], status: PointStatus::Flat, values: None, solution: None }
                }
                Err(e) => AnalyticPoint { r: rs[i], status: PointStatus::Failed(e.to_string()), values: None, solution: None },
            });
        }
    }
    out.into_iter().map(|p| p.expect("every r visited")).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub r: f64,
    pub penalty: PenaltyPair,
    pub analytic: AnalyticPoint,
    pub simulation: Option<EnsembleMeasurement>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub cells: Vec<SweepCell>,
    pub table: Table,
}

/// Analytic observables on the `(r, penalty)` grid, optionally paired with
/// ensemble means. Rows are ordered by penalty, then by ascending `r`.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    if spec.rs.is_empty() || spec.penalties.is_empty() {
        return Err(Error::InvalidArgument("sweep grids must be nonempty".into()));
    }
    let mut rs = spec.rs.clone();
    rs.sort_by(f64::total_cmp);
    let templates: Vec<RegularizedProblem> = spec
        .penalties
        .iter()
        .map(|p| RegularizedProblem::new(1.0, p.eta1, p.eta2(), spec.profile.clone()))
        .collect::<Result<_>>()?;
    let curves: Vec<Vec<AnalyticPoint>> = templates.par_iter().map(|t| analytic_curve(t, &rs)).collect();

    let mut cells = Vec::new();
    for ((penalty, template), curve) in spec.penalties.iter().zip(&templates).zip(curves) {
        for point in curve {
            let simulation = match spec.simulation {
                Some(b) => Some(measure_ensemble(&template.with_r(point.r), b.n, b.samples, b.base_seed)?),
                None => None,
            };
            cells.push(SweepCell { r: point.r, penalty: *penalty, analytic: point, simulation });
        }
    }
    let table = sweep_table(&cells, &spec.observables, spec.simulation.is_some());
    Ok(SweepResult { cells, table })
}

fn sweep_table(cells: &[SweepCell], observables: &[Observable], with_sim: bool) -> Table {
    let mut header: Vec<String> = ["r", "eta1", "eta2", "status"].iter().map(|s| s.to_string()).collect();
    header.extend(observables.iter().map(|o| o.name().to_string()));
    if with_sim {
        header.extend(["t", "realized_r", "n_failed", "sim_n0", "sim_q0_hat", "sim_f", "sim_n0_se", "sim_q0_hat_se", "sim_f_se"].map(String::from));
    }
    let mut table = Table::new(header);
    for c in cells {
        let mut row: Vec<Cell> =
            vec![c.r.into(), c.penalty.eta1.into(), c.penalty.eta2().into(), c.analytic.status.label().into()];
        for &o in observables {
            row.push(c.analytic.values.map(|v| v.get(o)).unwrap_or(f64::NAN).into());
        }
        if with_sim {
            let m = c.simulation.as_ref().expect("simulation requested");
            row.extend([
                Cell::from(m.t),
                m.realized_r.into(),
                m.n_failed.into(),
                m.n0.mean.into(),
                m.q0_hat.mean.into(),
                m.f_in_sample.mean.into(),
                m.n0.se.into(),
                m.q0_hat.se.into(),
                m.f_in_sample.se.into(),
            ]);
        }
        table.push(row);
    }
    table
}
