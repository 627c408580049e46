use rayon::prelude::*;

use super::sweep::{PenaltyPair, PointStatus, SimulationBlock};
use crate::error::{Error, Result};
use crate::io::table::{Cell, Table};
use crate::replica::{solve_saddle, RegularizedProblem, ReplicaSolution, VolatilityProfile};
use crate::sim::{measure_ensemble, EnsembleMeasurement};

const DENSITY_POINTS: usize = 201;

#[derive(Debug, Clone, PartialEq)]
pub struct WdistSimulation {
    pub measurement: EnsembleMeasurement,
    /// Kolmogorov distance between the pooled nonzero weights and the
    /// analytic distribution of nonzero weights.
    pub sup_distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WdistCell {
    pub r: f64,
    pub penalty: PenaltyPair,
    pub status: PointStatus,
    pub solution: Option<ReplicaSolution>,
    /// Continuous part of the analytic density on an even grid.
    pub density: Vec<(f64, f64)>,
    pub simulation: Option<WdistSimulation>,
}

/// Analytic weight densities over the `(r, penalty)` grid, with pooled
/// histograms and a sup-distance check when `sim` is given. Cells are
/// ordered by `r`, then by penalty.
pub fn weight_distribution_grid(
    rs: &[f64],
    penalties: &[PenaltyPair],
    profile: &VolatilityProfile,
    sim: Option<SimulationBlock>,
) -> Result<Vec<WdistCell>> {
    if rs.is_empty() || penalties.is_empty() {
        return Err(Error::InvalidArgument("weight distribution grids must be nonempty".into()));
    }
    let jobs: Vec<(f64, PenaltyPair)> = rs.iter().flat_map(|&r| penalties.iter().map(move |&p| (r, p))).collect();
    jobs.par_iter()
        .map(|&(r, penalty)| {
            let problem = RegularizedProblem::new(r, penalty.eta1, penalty.eta2(), profile.clone())?;
            let (status, solution) = match solve_saddle(&problem, None) {
                Ok(s) => (PointStatus::Solved, Some(s)),
                Err(Error::FlatLandscape { .. }) => (PointStatus::Flat, None),
                Err(e) => (PointStatus::Failed(e.to_string()), None),
            };
            let density = solution.as_ref().map(density_curve).unwrap_or_default();
            let simulation = match (sim, &solution) {
                (Some(b), Some(sol)) => {
                    let measurement = measure_ensemble(&problem, b.n, b.samples, b.base_seed)?;
                    let sup_distance = cdf_sup_distance(&measurement.pooled_nonzero, |w| sol.continuous_cdf(w));
                    Some(WdistSimulation { measurement, sup_distance })
                }
                _ => None,
            };
            Ok(WdistCell { r, penalty, status, solution, density, simulation })
        })
        .collect()
}

fn density_curve(sol: &ReplicaSolution) -> Vec<(f64, f64)> {
    let atoms = &sol.mixture.atoms;
    let hi = atoms.iter().map(|a| a.w1 + 5.0 * a.sigma_w).fold(0.0, f64::max);
    let lo = atoms.iter().filter(|a| a.w2.is_finite()).map(|a| a.w2 - 5.0 * a.sigma_w).fold(0.0, f64::min);
    (0..DENSITY_POINTS)
        .map(|k| {
            let w = lo + (hi - lo) * k as f64 / (DENSITY_POINTS - 1) as f64;
            (w, sol.weight_density(w))
        })
        .collect()
}

/// `sup_w |F_n(w) - F(w)|` for the empirical distribution of `values`.
pub fn cdf_sup_distance(values: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    let mut k = 0;
    while k < v.len() {
        // Ties jump together.
        let mut end = k;
        while end + 1 < v.len() && v[end + 1] == v[k] {
            end += 1;
        }
        let f = cdf(v[k]);
        d = d.max((f - k as f64 / n).abs()).max(((end + 1) as f64 / n - f).abs());
        k = end + 1;
    }
    d
}

pub fn summary_table(cells: &[WdistCell]) -> Table {
    let mut t = Table::new(
        ["r", "eta1", "eta2", "status", "n0", "normalization_error", "sim_n0", "sim_n0_se", "sup_distance"]
            .map(String::from)
            .to_vec(),
    );
    for c in cells {
        let (n0, norm) = c.solution.as_ref().map(|s| (s.mixture.n0, s.normalization_error())).unwrap_or((f64::NAN, f64::NAN));
        let (sn0, sse, sup) = c
            .simulation
            .as_ref()
            .map(|s| (s.measurement.n0.mean, s.measurement.n0.se, s.sup_distance))
            .unwrap_or((f64::NAN, f64::NAN, f64::NAN));
        t.push(vec![
            c.r.into(),
            c.penalty.eta1.into(),
            c.penalty.eta2().into(),
            c.status.label().into(),
            n0.into(),
            norm.into(),
            sn0.into(),
            sse.into(),
            sup.into(),
        ]);
    }
    t
}

pub fn density_table(cells: &[WdistCell]) -> Table {
    let mut t = Table::new(["r", "eta1", "eta2", "w", "density"].map(String::from).to_vec());
    for c in cells {
        for &(w, p) in &c.density {
            t.push(vec![c.r.into(), c.penalty.eta1.into(), c.penalty.eta2().into(), w.into(), p.into()]);
        }
    }
    t
}

/// Pooled histograms as densities (mass over bin width).
pub fn histogram_table(cells: &[WdistCell]) -> Table {
    let mut t = Table::new(["r", "eta1", "eta2", "bin_lo", "bin_hi", "density"].map(String::from).to_vec());
    for c in cells {
        let Some(s) = &c.simulation else { continue };
        let h = &s.measurement.histogram;
        for (k, &m) in h.masses.iter().enumerate() {
            let (lo, hi) = (h.edges[k], h.edges[k + 1]);
            t.push(vec![
                c.r.into(),
                c.penalty.eta1.into(),
                c.penalty.eta2().into(),
                lo.into(),
                hi.into(),
                Cell::from(m / (hi - lo)),
            ]);
        }
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sup_distance_of_exact_quantiles() {
        let v: Vec<f64> = (0..100).map(|k| (k as f64 + 0.5) / 100.0).collect();
        let d = cdf_sup_distance(&v, |x| x.clamp(0.0, 1.0));
        assert!((d - 0.005).abs() < 1e-12);
        assert!((cdf_sup_distance(&[0.5, 0.5], |x| x) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn broadening_and_negative_suppression() {
        let p = VolatilityProfile::uniform(1.0).unwrap();
        let pens = [PenaltyPair::symmetric(0.01), PenaltyPair::symmetric(0.5)];
        let cells = weight_distribution_grid(&[0.2, 0.6], &pens, &p, None).unwrap();
        let width = |c: &WdistCell| c.solution.as_ref().unwrap().mixture.atoms[0].sigma_w;
        assert!(width(&cells[2]) > width(&cells[0]));
        let neg = |c: &WdistCell| c.solution.as_ref().unwrap().weight_cdf(-1e-12);
        assert!(neg(&cells[1]) < neg(&cells[0]));
        for c in &cells {
            assert!(c.solution.as_ref().unwrap().normalization_error().abs() < 1e-10);
        }
    }

    #[test]
    fn two_volatility_peaks() {
        let p = VolatilityProfile::two_point(1.0, 2.0, 0.5).unwrap();
        let cells = weight_distribution_grid(&[0.05, 0.8], &[PenaltyPair::symmetric(0.01)], &p, None).unwrap();
        let sol = |k: usize| cells[k].solution.as_ref().unwrap();
        assert!(sol(0).resolvable(2.0, 1.0).unwrap());
        assert!(!sol(1).resolvable(2.0, 1.0).unwrap());
    }

    #[test]
    fn simulation_overlay() {
        let p = VolatilityProfile::uniform(1.0).unwrap();
        let sim = SimulationBlock { n: 40, samples: 10, base_seed: 3 };
        let cells = weight_distribution_grid(&[0.2], &[PenaltyPair::symmetric(0.02)], &p, Some(sim)).unwrap();
        let s = cells[0].simulation.as_ref().unwrap();
        assert!(s.sup_distance < 0.1, "{}", s.sup_distance);
        assert!(!histogram_table(&cells).is_empty());
        assert_eq!(density_table(&cells).len(), DENSITY_POINTS);
    }
}
