use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::table::Table;
use crate::sim::{feasibility_frequency, FeasibilityTally};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRow {
    pub tally: FeasibilityTally,
    /// 95% Wilson score interval for the frequency.
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Wilson score interval for `k` successes in `n` trials at normal quantile `z`.
pub fn wilson_interval(k: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / (1.0 + z2 / n);
    // The bounds are exactly 0 and 1 at the extremes; avoid round-off there.
    let lo = if k == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if k as f64 == n { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

/// Exact and Monte Carlo vanishing-variance probabilities for
/// `N = round(m T)` over every `T` and multiplier `m`.
pub fn phase_transition_scan(ts: &[usize], multipliers: &[f64], seeds: usize, base_seed: u64) -> Result<Vec<PhaseRow>> {
    if ts.is_empty() || multipliers.is_empty() {
        return Err(Error::InvalidArgument("phase scan grids must be nonempty".into()));
    }
    if multipliers.iter().any(|&m| !(m > 0.0 && m.is_finite())) {
        return Err(Error::InvalidArgument("N multipliers must be positive".into()));
    }
    let mut rows = Vec::new();
    for &t in ts {
        let mut ns: Vec<usize> = multipliers.iter().map(|&m| ((m * t as f64).round() as usize).max(1)).collect();
        ns.sort_unstable();
        ns.dedup();
        for n in ns {
            let tally = feasibility_frequency(n, t, seeds, base_seed)?;
            let (ci_low, ci_high) = wilson_interval(tally.feasible, tally.feasible + tally.infeasible, 1.959963984540054);
            rows.push(PhaseRow { tally, ci_low, ci_high });
        }
    }
    Ok(rows)
}

pub fn phase_table(rows: &[PhaseRow]) -> Table {
    let mut t = Table::new(
        ["t", "n", "exact", "frequency", "ci_low", "ci_high", "feasible", "infeasible", "indeterminate", "standard_error"]
            .map(String::from)
            .to_vec(),
    );
    for r in rows {
        let s = &r.tally;
        t.push(vec![
            s.t.into(),
            s.n.into(),
            s.exact.into(),
            s.frequency.into(),
            r.ci_low.into(),
            r.ci_high.into(),
            s.feasible.into(),
            s.infeasible.into(),
            s.indeterminate.into(),
            s.standard_error.into(),
        ]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_known_value() {
        let (lo, hi) = wilson_interval(50, 100, 1.959963984540054);
        assert!((lo - 0.4038).abs() < 1e-4 && (hi - 0.5962).abs() < 1e-4);
        assert_eq!(wilson_interval(0, 10, 1.96).0, 0.0);
    }

    #[test]
    fn step_through_half() {
        let mults: Vec<f64> = (4..=16).map(|n| n as f64 / 4.0).collect();
        let rows = phase_transition_scan(&[4], &mults, 300, 9).unwrap();
        assert_eq!(rows.len(), 13);
        let exact: Vec<f64> = rows.iter().map(|r| r.tally.exact).collect();
        assert_eq!(exact[0], 0.0);
        assert!(exact.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(exact[4], 0.5);
        for r in &rows {
            assert!(r.ci_low <= r.tally.frequency && r.tally.frequency <= r.ci_high);
            if r.tally.n <= 4 {
                assert_eq!(r.tally.feasible, 0);
            }
        }
        assert_eq!(phase_table(&rows).len(), 13);
    }
}
