//! Physical parameters and the uniform box prior over them.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};

/// A point in physical-parameter space.
///
/// Not every task uses every field: Push-T treats only mass and inertia as
/// uncertain, the tray task all five scalars.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysParams {
    /// kg
    pub mass: f64,
    /// kg·m² about the center of mass
    pub inertia: f64,
    /// Center-of-mass offset in the body frame, m.
    pub com_offset: [f64; 2],
    /// Coulomb coefficient, dimensionless.
    pub friction: f64,
}

impl PhysParams {
    /// Projects onto the physically valid set: positive mass and inertia,
    /// nonnegative friction.
    pub fn physical(mut self, floor: &ParamFloor) -> Self {
        self.mass = self.mass.max(floor.mass);
        self.inertia = self.inertia.max(floor.inertia);
        self.friction = self.friction.max(0.0);
        self
    }

    pub fn is_finite(&self) -> bool {
        self.mass.is_finite()
            && self.inertia.is_finite()
            && self.com_offset.iter().all(|c| c.is_finite())
            && self.friction.is_finite()
    }
}

/// Lower limits applied before parameters reach the integrator.
///
/// Some prior boxes reach zero or below (Push-T mass and inertia); the
/// dynamics need strictly positive values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamFloor {
    pub mass: f64,
    pub inertia: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamAxis {
    Mass,
    Inertia,
    ComX,
    ComY,
    Friction,
}

impl ParamAxis {
    pub fn get(self, p: &PhysParams) -> f64 {
        match self {
            ParamAxis::Mass => p.mass,
            ParamAxis::Inertia => p.inertia,
            ParamAxis::ComX => p.com_offset[0],
            ParamAxis::ComY => p.com_offset[1],
            ParamAxis::Friction => p.friction,
        }
    }

    pub fn set(self, p: &mut PhysParams, value: f64) {
        match self {
            ParamAxis::Mass => p.mass = value,
            ParamAxis::Inertia => p.inertia = value,
            ParamAxis::ComX => p.com_offset[0] = value,
            ParamAxis::ComY => p.com_offset[1] = value,
            ParamAxis::Friction => p.friction = value,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ParamAxis::Mass => "mass",
            ParamAxis::Inertia => "inertia",
            ParamAxis::ComX => "com_x",
            ParamAxis::ComY => "com_y",
            ParamAxis::Friction => "friction",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorDim {
    pub axis: ParamAxis,
    pub lower: f64,
    pub upper: f64,
}

impl PriorDim {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    /// Normalization scale; a degenerate interval normalizes with unit scale.
    pub fn scale(&self) -> f64 {
        let w = self.width();
        if w > 0.0 {
            w
        } else {
            1.0
        }
    }
}

/// Bounded uniform prior over the uncertain axes.
///
/// Parameter vectors θ handled by the inference code list the uncertain axes
/// in `dims` order; the remaining fields come from a nominal `PhysParams`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamPrior {
    pub dims: Vec<PriorDim>,
}

impl ParamPrior {
    pub fn new(dims: Vec<PriorDim>) -> Result<Self> {
        let prior = Self { dims };
        prior.validate()?;
        Ok(prior)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.is_empty() {
            return Err(config_err("prior has no dimensions"));
        }
        for (i, d) in self.dims.iter().enumerate() {
            if !(d.lower.is_finite() && d.upper.is_finite()) || d.lower > d.upper {
                return Err(config_err(format!(
                    "prior dimension {i} ({}) has invalid bounds [{}, {}]",
                    d.axis.name(),
                    d.lower,
                    d.upper
                )));
            }
            if self.dims[..i].iter().any(|o| o.axis == d.axis) {
                return Err(config_err(format!(
                    "prior axis {} listed twice",
                    d.axis.name()
                )));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn scales(&self) -> Vec<f64> {
        self.dims.iter().map(PriorDim::scale).collect()
    }

    pub fn mean(&self) -> Vec<f64> {
        self.dims.iter().map(|d| 0.5 * (d.lower + d.upper)).collect()
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.dim()
            && self
                .dims
                .iter()
                .zip(theta)
                .all(|(d, &v)| v >= d.lower && v <= d.upper)
    }

    pub fn clamp(&self, theta: &mut [f64]) {
        for (d, v) in self.dims.iter().zip(theta.iter_mut()) {
            *v = v.clamp(d.lower, d.upper);
        }
    }

    pub fn normalize(&self, theta: &[f64]) -> Vec<f64> {
        self.dims
            .iter()
            .zip(theta)
            .map(|(d, &v)| (v - d.lower) / d.scale())
            .collect()
    }

    pub fn denormalize(&self, z: &[f64]) -> Vec<f64> {
        self.dims
            .iter()
            .zip(z)
            .map(|(d, &v)| d.lower + v * d.scale())
            .collect()
    }

    /// Uniform draw from the box.
    pub fn sample_vec<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.dims
            .iter()
            .map(|d| {
                if d.upper > d.lower {
                    rng.random_range(d.lower..d.upper)
                } else {
                    d.lower
                }
            })
            .collect()
    }

    /// Gradient of the log density. The uniform box is flat in its interior.
    pub fn log_density_grad(&self, _theta: &[f64]) -> Vec<f64> {
        vec![0.0; self.dim()]
    }

    /// Writes the uncertain axes of `theta` over `nominal`.
    pub fn apply(&self, nominal: &PhysParams, theta: &[f64]) -> PhysParams {
        let mut p = *nominal;
        for (d, &v) in self.dims.iter().zip(theta) {
            d.axis.set(&mut p, v);
        }
        p
    }

    pub fn extract(&self, params: &PhysParams) -> Vec<f64> {
        self.dims.iter().map(|d| d.axis.get(params)).collect()
    }

    /// Returns a copy with every interval shifted by `offset` (same width).
    pub fn shifted(&self, offset: &[f64]) -> Self {
        Self {
            dims: self
                .dims
                .iter()
                .zip(offset)
                .map(|(d, &o)| PriorDim {
                    axis: d.axis,
                    lower: d.lower + o,
                    upper: d.upper + o,
                })
                .collect(),
        }
    }
}

/// Draws a full parameter point: uncertain axes uniform in the box, the rest
/// from `nominal`. Center-of-mass axes are body-frame bounds and the draw is
/// kept inside them.
pub fn sample_prior<R: Rng + ?Sized>(
    prior: &ParamPrior,
    nominal: &PhysParams,
    rng: &mut R,
) -> PhysParams {
    let mut theta = prior.sample_vec(rng);
    prior.clamp(&mut theta);
    prior.apply(nominal, &theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn nominal() -> PhysParams {
        PhysParams {
            mass: 0.5,
            inertia: 0.01,
            com_offset: [0.0, 0.0],
            friction: 0.3,
        }
    }

    #[test]
    fn degenerate_box_returns_the_point() {
        let prior = ParamPrior::new(vec![PriorDim {
            axis: ParamAxis::Mass,
            lower: 0.3,
            upper: 0.3,
        }])
        .unwrap();
        let mut rng = stream(1, &[]);
        for _ in 0..10 {
            assert_eq!(sample_prior(&prior, &nominal(), &mut rng).mass, 0.3);
        }
    }

    #[test]
    fn normalize_roundtrip_and_flat_score() {
        let prior = ParamPrior::new(vec![
            PriorDim {
                axis: ParamAxis::Mass,
                lower: 0.05,
                upper: 1.0,
            },
            PriorDim {
                axis: ParamAxis::Friction,
                lower: 0.1,
                upper: 0.9,
            },
        ])
        .unwrap();
        let theta = [0.4, 0.2];
        let back = prior.denormalize(&prior.normalize(&theta));
        assert!((back[0] - 0.4).abs() < 1e-15 && (back[1] - 0.2).abs() < 1e-15);
        assert_eq!(prior.log_density_grad(&theta), vec![0.0, 0.0]);
        let p = prior.apply(&nominal(), &theta);
        assert_eq!(prior.extract(&p), theta.to_vec());
    }

    #[test]
    fn invalid_priors_rejected() {
        assert!(ParamPrior::new(vec![]).is_err());
        assert!(ParamPrior::new(vec![PriorDim {
            axis: ParamAxis::Mass,
            lower: 1.0,
            upper: 0.0
        }])
        .is_err());
    }

    #[test]
    fn floor_keeps_mass_positive() {
        let floor = ParamFloor {
            mass: 0.05,
            inertia: 1e-4,
        };
        let p = PhysParams {
            mass: -1e-4,
            inertia: -1e-4,
            com_offset: [0.0; 2],
            friction: -0.1,
        }
        .physical(&floor);
        assert_eq!((p.mass, p.inertia, p.friction), (0.05, 1e-4, 0.0));
    }
}
