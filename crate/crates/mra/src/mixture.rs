//! Mixtures of (periodically wrapped) Gaussians on [-1/2, 1/2).

use std::f64::consts::PI;

use orbit_core::grid::space_grid;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MraError, Result};
use crate::signal::{MraDensity, MraSignal};

/// Number of periodic images summed on each side when wrapping.
pub const WRAPS: i32 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Component {
    pub weight: f64,
    pub mean: f64,
    pub stddev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureSpec1D {
    pub components: Vec<Component>,
    #[serde(default = "default_wrap")]
    pub wrap: bool,
}

fn default_wrap() -> bool {
    true
}

impl MixtureSpec1D {
    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(MraError::Invalid("mixture has no components".into()));
        }
        for c in &self.components {
            if !(c.stddev > 0.0 && c.stddev.is_finite()) {
                return Err(MraError::Invalid(format!("stddev must be positive, got {}", c.stddev)));
            }
            if !(c.weight >= 0.0 && c.weight.is_finite() && c.mean.is_finite()) {
                return Err(MraError::Invalid("weights must be non-negative and means finite".into()));
            }
        }
        let s: f64 = self.components.iter().map(|c| c.weight).sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(MraError::Invalid(format!("weights sum to {s}, not 1")));
        }
        Ok(())
    }

    /// Mixture density at `x`.
    pub fn eval(&self, x: f64) -> f64 {
        let wraps = if self.wrap { WRAPS } else { 0 };
        self.components
            .iter()
            .map(|c| {
                let norm = 1.0 / (c.stddev * (2.0 * PI).sqrt());
                let s: f64 = (-wraps..=wraps)
                    .map(|m| {
                        let d = x - c.mean + m as f64;
                        (-0.5 * d * d / (c.stddev * c.stddev)).exp()
                    })
                    .sum();
                c.weight * norm * s
            })
            .sum()
    }

    pub fn signal(&self, n: usize) -> Result<MraSignal> {
        self.validate()?;
        MraSignal::from_real(space_grid(n).into_iter().map(|x| self.eval(x)).collect())
    }

    /// Grid values normalized to unit mass.
    pub fn density(&self, n: usize) -> Result<MraDensity> {
        self.validate()?;
        let raw: Vec<f64> = space_grid(n).into_iter().map(|x| self.eval(x)).collect();
        let s: f64 = raw.iter().sum();
        if !(s > 0.0) {
            return Err(MraError::Numerical("mixture has no mass on the grid".into()));
        }
        MraDensity::new(raw.into_iter().map(|v| v / s).collect())
    }
}

/// Random mixtures: means uniform on the interval, stddevs uniform in a
/// range, weights from a flat Dirichlet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureFamily {
    pub components: usize,
    pub stddev_min: f64,
    pub stddev_max: f64,
}

impl MixtureFamily {
    pub fn new(components: usize) -> Self {
        Self { components, stddev_min: 0.05, stddev_max: 0.2 }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Result<MixtureSpec1D> {
        if self.components == 0 || !(self.stddev_min > 0.0 && self.stddev_min <= self.stddev_max) {
            return Err(MraError::Invalid("mixture family needs >= 1 component and 0 < stddev_min <= stddev_max".into()));
        }
        let raw: Vec<f64> = (0..self.components).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
        let total: f64 = raw.iter().sum();
        let components = raw
            .iter()
            .map(|w| Component {
                weight: w / total,
                mean: rng.random_range(-0.5..0.5),
                stddev: rng.random_range(self.stddev_min..=self.stddev_max),
            })
            .collect();
        Ok(MixtureSpec1D { components, wrap: true })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(mean: f64, stddev: f64) -> MixtureSpec1D {
        MixtureSpec1D { components: vec![Component { weight: 1.0, mean, stddev }], wrap: true }
    }

    #[test]
    fn broad_component_is_flat() {
        let d = one(0.1, 1.0).density(21).unwrap();
        assert!(d.mass.iter().all(|m| (m - 1.0 / 21.0).abs() < 1e-6));
    }

    #[test]
    fn density_has_unit_mass() {
        let d = one(-0.3, 0.07).density(41).unwrap();
        assert!((d.mass.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn matches_pointwise_formula() {
        let spec = MixtureSpec1D {
            components: vec![
                Component { weight: 0.3, mean: 0.45, stddev: 0.08 },
                Component { weight: 0.7, mean: -0.1, stddev: 0.15 },
            ],
            wrap: true,
        };
        let v = spec.signal(41).unwrap();
        for (i, &got) in v.values.iter().enumerate() {
            let x = (i as f64 - 20.0) / 41.0;
            let mut want = 0.0;
            for (w, m, s) in [(0.3, 0.45, 0.08), (0.7, -0.1, 0.15)] {
                for k in -5..=5 {
                    let d: f64 = x - m + k as f64;
                    want += w * (-d * d / (2.0 * s * s)).exp() / (s * (2.0 * PI).sqrt());
                }
            }
            assert!((got - want).abs() < 1e-12 * want.max(1.0));
        }
    }

    #[test]
    fn non_positive_stddev_rejected() {
        assert!(one(0.0, 0.0).signal(5).is_err());
        assert!(one(0.0, -1.0).density(5).is_err());
    }
}
