use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    #[default]
    Linear,
    Log,
}

/// A 1-D grid, either listed explicitly or as an evenly spaced range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    List(Vec<f64>),
    Range {
        start: f64,
        stop: f64,
        count: usize,
        #[serde(default)]
        spacing: Spacing,
    },
}

impl Grid {
    pub fn values(&self) -> Result<Vec<f64>> {
        let v = match self {
            Grid::List(v) => v.clone(),
            Grid::Range { start, stop, count, spacing } => {
                if *count == 0 {
                    return Err(Error::Config("grid count must be positive".into()));
                }
                if *spacing == Spacing::Log && !(*start > 0.0 && *stop > 0.0) {
                    return Err(Error::Config("log grid needs positive bounds".into()));
                }
                (0..*count)
                    .map(|k| {
                        let t = if *count == 1 { 0.0 } else { k as f64 / (*count - 1) as f64 };
                        match spacing {
                            Spacing::Linear => start + (stop - start) * t,
                            Spacing::Log => (start.ln() + (stop.ln() - start.ln()) * t).exp(),
                        }
                    })
                    .collect()
            }
        };
        if v.is_empty() {
            return Err(Error::Config("grid is empty".into()));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Config("grid values must be finite".into()));
        }
        Ok(v)
    }
}

/// 80 points on `(0, 2)`, denser around the `r = 1` resonance and the
/// `r = 2` edge.
pub fn default_r_grid() -> Vec<f64> {
    let mut v: Vec<f64> = (0..40).map(|k| 0.025 + 0.05 * k as f64).collect();
    v.extend((0..20).map(|k| 0.85 + 0.3 * (k as f64 + 0.5) / 20.0));
    v.extend((0..20).map(|k| 2.0 - 10f64.powf(-1.0 - 1.9 * k as f64 / 19.0)));
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    v
}

/// 60 log-spaced values from 1e-3 to 10.
pub fn default_eta_grid() -> Vec<f64> {
    Grid::Range { start: 1e-3, stop: 10.0, count: 60, spacing: Spacing::Log }.values().unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        let g = Grid::Range { start: 0.0, stop: 1.0, count: 5, spacing: Spacing::Linear };
        assert_eq!(g.values().unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let g = Grid::Range { start: 0.01, stop: 10.0, count: 4, spacing: Spacing::Log };
        let v = g.values().unwrap();
        assert!((v[1] - 0.1).abs() < 1e-15 && (v[3] - 10.0).abs() < 1e-12);
        assert!(Grid::List(vec![]).values().is_err());
        assert!(Grid::Range { start: 0.0, stop: 1.0, count: 3, spacing: Spacing::Log }.values().is_err());
    }

    #[test]
    fn defaults() {
        let r = default_r_grid();
        assert_eq!(r.len(), 80);
        assert!(r.iter().all(|&x| x > 0.0 && x < 2.0));
        assert!(r.windows(2).all(|w| w[1] > w[0]));
        assert!(r.iter().filter(|&&x| (x - 1.0).abs() < 0.15).count() >= 20);
        assert_eq!(default_eta_grid().len(), 60);
    }

    #[test]
    fn toml_forms() {
        #[derive(Deserialize)]
        struct W {
            g: Grid,
        }
        let w: W = toml::from_str("g = [0.1, 0.2]").unwrap();
        assert_eq!(w.g, Grid::List(vec![0.1, 0.2]));
        let w: W = toml::from_str("g = { start = 0.1, stop = 1.0, count = 3, spacing = \"log\" }").unwrap();
        assert_eq!(w.g.values().unwrap().len(), 3);
    }
}
