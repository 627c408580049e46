//! Declarative run configuration, read from TOML.
//!
//! Every command reads its own block and falls back to defaults for missing
//! keys; unknown keys are rejected. Command-line flags are applied on top.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::{default_eta_grid, default_r_grid, Grid, Observable, PenaltyPair, Spacing};
use crate::replica::VolatilityProfile;

fn yes() -> bool {
    true
}

fn unit_profile() -> VolatilityProfile {
    VolatilityProfile::uniform(1.0).expect("unit profile")
}

fn fig1_profile() -> VolatilityProfile {
    VolatilityProfile::two_point(10f64.sqrt(), 1.0, 0.5).expect("two-point profile")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Emit {
    #[serde(default = "yes")]
    pub csv: bool,
    #[serde(default)]
    pub svg: bool,
    #[serde(default = "yes")]
    pub json: bool,
}

impl Default for Emit {
    fn default() -> Self {
        Self { csv: true, svg: false, json: true }
    }
}

/// Sample size and ensemble count; the seed comes from the top level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSettings {
    pub n: usize,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveBlock {
    pub r: f64,
    pub eta1: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta2: Option<f64>,
    pub profile: VolatilityProfile,
}

impl Default for SolveBlock {
    fn default() -> Self {
        Self { r: 0.5, eta1: 0.0, eta2: None, profile: unit_profile() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepBlock {
    pub r: Grid,
    pub penalties: Vec<PenaltyPair>,
    pub profile: VolatilityProfile,
    pub observables: Vec<Observable>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimSettings>,
}

impl Default for SweepBlock {
    fn default() -> Self {
        Self {
            r: Grid::List(default_r_grid()),
            penalties: vec![
                PenaltyPair::symmetric(0.001),
                PenaltyPair::symmetric(0.01),
                PenaltyPair::symmetric(0.1),
                PenaltyPair::no_short(0.01),
            ],
            profile: unit_profile(),
            observables: Observable::ALL.to_vec(),
            simulation: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContourBlock {
    pub r: Grid,
    pub eta: Grid,
    pub levels: Vec<f64>,
}

impl Default for ContourBlock {
    fn default() -> Self {
        Self {
            r: Grid::Range { start: 0.02, stop: 1.98, count: 99, spacing: Spacing::Linear },
            eta: Grid::List(default_eta_grid()),
            levels: vec![1.1025, 1.21, 1.44, 1.5129, 1.69, 2.0, 2.5, std::f64::consts::PI, 4.0, 6.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WdistBlock {
    pub r: Grid,
    pub penalties: Vec<PenaltyPair>,
    pub profile: VolatilityProfile,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimSettings>,
}

impl Default for WdistBlock {
    fn default() -> Self {
        Self {
            r: Grid::List(vec![0.1, 0.5, 0.9]),
            penalties: vec![PenaltyPair::symmetric(0.01), PenaltyPair::symmetric(0.1), PenaltyPair::symmetric(1.0)],
            profile: unit_profile(),
            simulation: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateBlock {
    pub r: Grid,
    pub eta1: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta2: Option<f64>,
    pub profile: VolatilityProfile,
    pub n: usize,
    pub samples: usize,
}

impl Default for SimulateBlock {
    fn default() -> Self {
        Self {
            r: Grid::List(vec![0.25, 0.5, 0.75, 1.0, 1.25, 1.5]),
            eta1: 0.01,
            eta2: None,
            profile: unit_profile(),
            n: 50,
            samples: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StaircaseBlock {
    pub n: usize,
    pub t: usize,
    pub profile: VolatilityProfile,
    pub eta: Grid,
    pub samples: usize,
}

impl Default for StaircaseBlock {
    fn default() -> Self {
        Self {
            n: 100,
            t: 300,
            profile: fig1_profile(),
            eta: Grid::Range { start: 0.01, stop: 10.0, count: 30, spacing: Spacing::Log },
            samples: 10,
        }
    }
}

/// A single `(N, T)` point, or a scan over `T` values and `N / T` multipliers
/// when `scan_t` is nonempty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeasibilityBlock {
    pub n: usize,
    pub t: usize,
    pub samples: usize,
    pub scan_t: Vec<usize>,
    pub multipliers: Vec<f64>,
}

impl Default for FeasibilityBlock {
    fn default() -> Self {
        Self {
            n: 8,
            t: 4,
            samples: 4000,
            scan_t: Vec::new(),
            multipliers: (4..=16).map(|k| k as f64 / 4.0).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub seed: u64,
    pub emit: Emit,
    pub solve: SolveBlock,
    pub sweep: SweepBlock,
    pub contour: ContourBlock,
    pub wdist: WdistBlock,
    pub simulate: SimulateBlock,
    pub staircase: StaircaseBlock,
    pub feasibility: FeasibilityBlock,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Canonical serialized form; its hash identifies the run.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trip() {
        let c = RunConfig::default();
        let text = c.to_toml().unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), c);
    }

    #[test]
    fn custom_round_trip() {
        let text = r#"
            output_dir = "out"
            seed = 7
            [emit]
            svg = true
            [sweep]
            r = { start = 0.1, stop = 1.9, count = 10 }
            penalties = [{ eta1 = 0.01 }, { eta1 = 0.05, eta2 = inf }]
            observables = ["q0", "n0"]
            profile = [{ sigma = 1.0, mass = 0.5 }, { sigma = 2.0, mass = 0.5 }]
            simulation = { n = 50, samples = 20 }
        "#;
        let c = RunConfig::from_toml(text).unwrap();
        assert_eq!(c.seed, 7);
        assert!(c.emit.svg && c.emit.csv);
        assert!(c.sweep.penalties[1].eta2().is_infinite());
        assert_eq!(c.sweep.r.values().unwrap().len(), 10);
        let again = RunConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(again, c);
        assert_eq!(again.to_toml().unwrap(), c.to_toml().unwrap());
    }

    #[test]
    fn unknown_keys_rejected() {
        for bad in ["sede = 3", "[solve]\nrr = 0.5", "[emit]\npng = true", "[sweep]\nsimulation = { n = 5, samples = 2, x = 1 }"] {
            assert!(matches!(RunConfig::from_toml(bad), Err(Error::Config(_))), "{bad}");
        }
    }
}
