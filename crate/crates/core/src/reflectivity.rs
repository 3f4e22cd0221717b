//! Continuous reflectivity profiles over the opening strip `1/3 < q < 2/3`.
//!
//! Every profile depends on position only. Outside the open strip the
//! reflectivity is exactly one; inside it the chosen shape interpolates
//! between the floor `R` and one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower edge of the opening strip.
pub const OPENING_LOW: f64 = 1.0 / 3.0;
/// Upper edge of the opening strip.
pub const OPENING_HIGH: f64 = 2.0 / 3.0;

/// Default Fermi-Dirac steepness of the step profile.
pub const DEFAULT_STEEPNESS: f64 = 120.0;
/// Default Fermi-Dirac offset of the step profile.
pub const DEFAULT_OFFSET: f64 = 0.63;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    /// Fermi-Dirac step, flat bottom at `R` in the middle of the opening.
    Step,
    /// Cosine profile equal to one at the opening edges and `R` at `q = 1/2`.
    Sinusoidal,
    /// Constant reflectivity `R` across the opening.
    Constant,
    /// Fully absorbing opening, `F = 0` inside the strip.
    Complete,
}

impl Shape {
    pub fn name(self) -> &'static str {
        match self {
            Shape::Step => "step",
            Shape::Sinusoidal => "sinusoidal",
            Shape::Constant => "constant",
            Shape::Complete => "complete",
        }
    }
}

impl std::str::FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "step" => Ok(Shape::Step),
            "sinusoidal" => Ok(Shape::Sinusoidal),
            "constant" => Ok(Shape::Constant),
            "complete" => Ok(Shape::Complete),
            other => Err(Error::InvalidParameter(format!("unknown profile shape `{other}`"))),
        }
    }
}

/// A reflectivity function `F_R(q)` with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReflectivityProfile {
    pub shape: Shape,
    /// Reflectivity floor.
    #[serde(rename = "R")]
    pub r: f64,
    /// Steepness (step shape only).
    #[serde(rename = "A", default = "default_steepness")]
    pub steepness: f64,
    /// Offset (step shape only).
    #[serde(rename = "B", default = "default_offset")]
    pub offset: f64,
}

fn default_steepness() -> f64 {
    DEFAULT_STEEPNESS
}

fn default_offset() -> f64 {
    DEFAULT_OFFSET
}

impl ReflectivityProfile {
    pub fn new(shape: Shape, r: f64) -> Result<Self> {
        let profile = ReflectivityProfile {
            shape,
            r,
            steepness: DEFAULT_STEEPNESS,
            offset: DEFAULT_OFFSET,
        };
        profile.validate()?;
        Ok(profile)
    }

    pub fn step(r: f64) -> Result<Self> {
        Self::new(Shape::Step, r)
    }

    pub fn sinusoidal(r: f64) -> Result<Self> {
        Self::new(Shape::Sinusoidal, r)
    }

    pub fn constant(r: f64) -> Result<Self> {
        Self::new(Shape::Constant, r)
    }

    /// The fully open reference case.
    pub fn complete() -> Self {
        ReflectivityProfile {
            shape: Shape::Complete,
            r: 0.0,
            steepness: DEFAULT_STEEPNESS,
            offset: DEFAULT_OFFSET,
        }
    }

    /// Step profile with explicit Fermi-Dirac parameters.
    pub fn step_with(r: f64, steepness: f64, offset: f64) -> Result<Self> {
        let profile = ReflectivityProfile {
            shape: Shape::Step,
            r,
            steepness,
            offset,
        };
        profile.validate()?;
        Ok(profile)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.r) {
            return Err(Error::InvalidParameter(format!("R = {} outside [0, 1]", self.r)));
        }
        if self.shape == Shape::Step {
            if !self.steepness.is_finite() || self.steepness <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "step steepness A = {} must be positive",
                    self.steepness
                )));
            }
            if !(self.offset > 0.5 && self.offset < 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "step offset B = {} outside (1/2, 1)",
                    self.offset
                )));
            }
        }
        Ok(())
    }

    /// Evaluates the reflectivity at position `q ∈ [0, 1)`.
    pub fn evaluate(&self, q: f64) -> Result<f64> {
        self.validate()?;
        if !(0.0..1.0).contains(&q) {
            return Err(Error::InvalidParameter(format!("q = {q} outside [0, 1)")));
        }
        Ok(self.value(q))
    }

    /// Unchecked evaluation for hot loops; `q` must already lie in `[0, 1)`.
    #[inline]
    pub fn value(&self, q: f64) -> f64 {
        if !in_opening(q) {
            return 1.0;
        }
        let r = self.r;
        match self.shape {
            Shape::Complete => 0.0,
            Shape::Constant => r,
            Shape::Sinusoidal => {
                ((1.0 - r) * (6.0 * std::f64::consts::PI * q).cos() + (1.0 + r)) / 2.0
            }
            Shape::Step => {
                // branch switch at q = 1/2; the q < 1/2 branch is the mirror image
                let x = if q > 0.5 { q } else { 1.0 - q };
                (1.0 - r) / (1.0 + (-self.steepness * (x - self.offset)).exp()) + r
            }
        }
    }

    /// Amplitude attenuation `√F(q)` applied by the quantum opening.
    #[inline]
    pub fn amplitude(&self, q: f64) -> f64 {
        self.value(q).sqrt()
    }
}

/// True when `q` lies strictly inside the opening strip.
#[inline]
pub fn in_opening(q: f64) -> bool {
    q > OPENING_LOW && q < OPENING_HIGH
}
