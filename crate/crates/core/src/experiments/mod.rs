//! Parameter sweeps and figure reproductions built on the replica solver and
//! the simulator.

mod contour;
mod grid;
mod phase;
mod staircase;
mod sweep;
mod wdist;

pub use contour::{bilinear, contour_map, marching_squares, ContourGrid, IsoLine, Segment};
pub use grid::{default_eta_grid, default_r_grid, Grid, Spacing};
pub use phase::{phase_table, phase_transition_scan, wilson_interval, PhaseRow};
pub use staircase::{analytic_condensate_path, elimination_staircase, staircase_ensemble, Staircase, StaircaseEnsemble};
pub use sweep::{
    analytic_curve, run_sweep, AnalyticPoint, AnalyticValues, Observable, PenaltyPair, PointStatus, SimulationBlock,
    SweepCell, SweepResult, SweepSpec,
};
pub use wdist::{
    cdf_sup_distance, density_table, histogram_table, summary_table, weight_distribution_grid, WdistCell,
    WdistSimulation,
};

/// Cells this close to `r = 2` take the critical asymptotics instead of a solve.
pub const CRITICAL_BAND: f64 = 1e-3;
