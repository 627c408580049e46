use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One group of assets sharing a true standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Atom {
    pub sigma: f64,
    pub mass: f64,
}

/// Discrete distribution of true per-asset standard deviations.
///
/// This is the empirical measure `(1/N) sum_i delta(sigma - sigma_i)` stored
/// as a list of atoms whose masses sum to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Atom>", into = "Vec<Atom>")]
pub struct VolatilityProfile {
    atoms: Vec<Atom>,
}

impl VolatilityProfile {
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidArgument("volatility profile needs at least one atom".into()));
        }
        for a in &atoms {
            if !(a.sigma > 0.0 && a.sigma.is_finite()) {
                return Err(Error::InvalidArgument(format!("sigma must be positive and finite, got {}", a.sigma)));
            }
            if !(a.mass > 0.0 && a.mass <= 1.0) {
                return Err(Error::InvalidArgument(format!("atom mass must lie in (0, 1], got {}", a.mass)));
            }
        }
        let total: f64 = atoms.iter().map(|a| a.mass).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("atom masses must sum to 1, got {total}")));
        }
        Ok(Self { atoms })
    }

    pub fn uniform(sigma: f64) -> Result<Self> {
        Self::new(vec![Atom { sigma, mass: 1.0 }])
    }

    /// Two groups: a fraction `mass_a` of assets with `sigma_a`, the rest with `sigma_b`.
    pub fn two_point(sigma_a: f64, sigma_b: f64, mass_a: f64) -> Result<Self> {
        Self::new(vec![Atom { sigma: sigma_a, mass: mass_a }, Atom { sigma: sigma_b, mass: 1.0 - mass_a }])
    }

    /// Empirical measure of an explicit list of per-asset deviations.
    pub fn from_sigmas(sigmas: &[f64]) -> Result<Self> {
        let n = sigmas.len() as f64;
        let atoms: Vec<Atom> = sigmas.iter().map(|&sigma| Atom { sigma, mass: 1.0 / n }).collect();
        // 1/n summed n times drifts by a few ulps.
        let total: f64 = atoms.iter().map(|a| a.mass).sum();
        Self::new(atoms.into_iter().map(|a| Atom { mass: a.mass / total, ..a }).collect())
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// `m1 = sum mass / sigma`
    pub fn m1(&self) -> f64 {
        self.atoms.iter().map(|a| a.mass / a.sigma).sum()
    }

    /// `m2 = sum mass / sigma^2`
    pub fn m2(&self) -> f64 {
        self.atoms.iter().map(|a| a.mass / (a.sigma * a.sigma)).sum()
    }

    pub fn max_sigma(&self) -> f64 {
        self.atoms.iter().map(|a| a.sigma).fold(0.0, f64::max)
    }

    pub fn min_sigma(&self) -> f64 {
        self.atoms.iter().map(|a| a.sigma).fold(f64::INFINITY, f64::min)
    }

    pub fn is_uniform(&self) -> bool {
        let s0 = self.atoms[0].sigma;
        self.atoms.iter().all(|a| a.sigma == s0)
    }

    /// Per-asset deviations for a finite portfolio of `n` assets.
    ///
    /// Counts per atom use largest-remainder rounding of `mass * n`; assets
    /// are laid out atom by atom in profile order.
    pub fn asset_sigmas(&self, n: usize) -> Vec<f64> {
        let exact: Vec<f64> = self.atoms.iter().map(|a| a.mass * n as f64).collect();
        let mut counts: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
        let mut missing = n - counts.iter().sum::<usize>().min(n);
        let mut order: Vec<usize> = (0..exact.len()).collect();
        order.sort_by(|&i, &j| {
            let fi = exact[i] - exact[i].floor();
            let fj = exact[j] - exact[j].floor();
            fj.partial_cmp(&fi).unwrap().then(i.cmp(&j))
        });
        for &i in order.iter().cycle() {
            if missing == 0 {
                break;
            }
            counts[i] += 1;
            missing -= 1;
        }
        self.atoms
            .iter()
            .zip(&counts)
            .flat_map(|(a, &c)| std::iter::repeat_n(a.sigma, c))
            .collect()
    }
}

impl TryFrom<Vec<Atom>> for VolatilityProfile {
    type Error = Error;

    fn try_from(atoms: Vec<Atom>) -> Result<Self> {
        Self::new(atoms)
    }
}

impl From<VolatilityProfile> for Vec<Atom> {
    fn from(p: VolatilityProfile) -> Self {
        p.atoms
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_atoms() {
        assert!(VolatilityProfile::new(vec![]).is_err());
        assert!(VolatilityProfile::uniform(0.0).is_err());
        assert!(VolatilityProfile::uniform(-1.0).is_err());
        assert!(VolatilityProfile::two_point(1.0, 2.0, 0.0).is_err());
        assert!(VolatilityProfile::new(vec![Atom { sigma: 1.0, mass: 0.6 }, Atom { sigma: 2.0, mass: 0.6 }]).is_err());
    }

    #[test]
    fn harmonic_moments() {
        let p = VolatilityProfile::two_point(10f64.sqrt(), 1.0, 0.5).unwrap();
        assert!((p.m2() - 0.55).abs() < 1e-15);
        let p = VolatilityProfile::two_point(1.0, 2.0, 0.5).unwrap();
        assert!((p.m1() - 0.75).abs() < 1e-15);
        assert!((p.m2() - 0.625).abs() < 1e-15);
    }

    #[test]
    fn asset_layout_counts() {
        let p = VolatilityProfile::two_point(10f64.sqrt(), 1.0, 0.5).unwrap();
        let s = p.asset_sigmas(100);
        assert_eq!(s.len(), 100);
        assert_eq!(s.iter().filter(|&&x| x == 1.0).count(), 50);
        let p = VolatilityProfile::new(vec![
            Atom { sigma: 1.0, mass: 1.0 / 3.0 },
            Atom { sigma: 2.0, mass: 1.0 / 3.0 },
            Atom { sigma: 3.0, mass: 1.0 / 3.0 },
        ])
        .unwrap();
        assert_eq!(p.asset_sigmas(10).len(), 10);
    }

    #[test]
    fn from_sigmas_normalizes() {
        let sig: Vec<f64> = (0..7).map(|i| 1.0 + i as f64).collect();
        let p = VolatilityProfile::from_sigmas(&sig).unwrap();
        let total: f64 = p.atoms().iter().map(|a| a.mass).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn serde_round_trip_validates() {
        let p = VolatilityProfile::two_point(1.0, 2.0, 0.25).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        let back: VolatilityProfile = serde_json::from_str(&s).unwrap();
        assert_eq!(p, back);
        assert!(serde_json::from_str::<VolatilityProfile>(r#"[{"sigma":1.0,"mass":0.5}]"#).is_err());
    }
}
