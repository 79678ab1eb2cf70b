//! Design problems: shape space, property evaluation and feasibility.
//!
//! A design is a point in a `d`-dimensional shape space whose `p` properties
//! are produced by a (possibly expensive) simulator. The built-in
//! [`SyntheticProblem`] is a closed-form stand-in with four shape parameters
//! and two properties whose induced property distribution is strongly skewed.

mod dataset;
mod sampling;
mod standardize;

use std::f64::consts::PI;
use std::fmt;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use dataset::{Dataset, DatasetMeta, DesignRecord, Provenance};
pub use sampling::{feasible_design, grid_design, grid_sample, lhs_sample, InitSampler};
pub use standardize::Standardizer;

macro_rules! real_vector {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(Vec<f64>);

        impl $name {
            pub fn new(values: Vec<f64>) -> Self {
                Self(values)
            }

            pub fn as_slice(&self) -> &[f64] {
                &self.0
            }

            pub fn into_inner(self) -> Vec<f64> {
                self.0
            }

            pub fn is_finite(&self) -> bool {
                self.0.iter().all(|v| v.is_finite())
            }
        }

        impl Deref for $name {
            type Target = [f64];

            fn deref(&self) -> &[f64] {
                &self.0
            }
        }

        impl From<Vec<f64>> for $name {
            fn from(values: Vec<f64>) -> Self {
                Self(values)
            }
        }

        impl From<&[f64]> for $name {
            fn from(values: &[f64]) -> Self {
                Self(values.to_vec())
            }
        }
    };
}

real_vector!(
    /// Geometric design parameters, one value per shape axis.
    ShapeVector
);
real_vector!(
    /// Simulated design responses, one value per property axis.
    PropertyVector
);

/// Closed interval bounding one shape axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisBounds {
    pub lo: f64,
    pub hi: f64,
}

impl AxisBounds {
    pub const UNIT: AxisBounds = AxisBounds { lo: 0.0, hi: 1.0 };

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// Maps a unit-interval coordinate onto this axis.
    pub fn from_unit(&self, u: f64) -> f64 {
        self.lo + u * self.width()
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lo, self.hi)
    }
}

/// A design problem: the simulator and manufacturability check the
/// generation pipeline drives.
///
/// Implementations must be deterministic; the pipeline relies on it for
/// reproducible runs.
pub trait DesignProblem: Send + Sync {
    fn name(&self) -> &str;

    fn shape_dim(&self) -> usize;

    fn property_dim(&self) -> usize;

    fn shape_bounds(&self) -> &[AxisBounds];

    /// Simulates the raw (unstandardized) properties of a shape.
    fn evaluate(&self, shape: &ShapeVector) -> Result<PropertyVector>;

    fn is_feasible(&self, shape: &ShapeVector) -> bool;

    fn in_bounds(&self, shape: &[f64]) -> bool {
        shape.len() == self.shape_dim() && shape.iter().zip(self.shape_bounds()).all(|(&v, b)| b.contains(v))
    }
}

impl fmt::Debug for dyn DesignProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DesignProblem")
            .field("name", &self.name())
            .field("d", &self.shape_dim())
            .field("p", &self.property_dim())
            .finish()
    }
}

/// Analytic four-parameter, two-property surrogate problem.
///
/// ```text
/// p1 = exp(1.5 x1 x2) - x3^2
/// p2 = 2 x1^2 + x3 x4 + 0.3 sin(2 pi x2)
/// ```
///
/// A shape is feasible iff it lies in the unit hypercube and `x2 + x3 <= 1.6`.
#[derive(Debug, Clone)]
pub struct SyntheticProblem {
    bounds: [AxisBounds; 4],
}

impl SyntheticProblem {
    pub const NAME: &'static str = "synthetic";
    pub const WALL_LIMIT: f64 = 1.6;

    pub fn new() -> Self {
        Self {
            bounds: [AxisBounds::UNIT; 4],
        }
    }
}

impl Default for SyntheticProblem {
    fn default() -> Self {
        Self::new()
    }
}

impl DesignProblem for SyntheticProblem {
    fn name(&self) -> &str {
        Self::NAME
    }

    fn shape_dim(&self) -> usize {
        4
    }

    fn property_dim(&self) -> usize {
        2
    }

    fn shape_bounds(&self) -> &[AxisBounds] {
        &self.bounds
    }

    fn evaluate(&self, shape: &ShapeVector) -> Result<PropertyVector> {
        if !shape.is_finite() || !self.in_bounds(shape) {
            return Err(Error::Domain(format!(
                "shape {:?} is outside the unit hypercube",
                shape.as_slice()
            )));
        }
        let [x1, x2, x3, x4] = [shape[0], shape[1], shape[2], shape[3]];
        let p1 = (1.5 * x1 * x2).exp() - x3 * x3;
        let p2 = 2.0 * x1 * x1 + x3 * x4 + 0.3 * (2.0 * PI * x2).sin();
        Ok(PropertyVector::new(vec![p1, p2]))
    }

    fn is_feasible(&self, shape: &ShapeVector) -> bool {
        shape.is_finite() && self.in_bounds(shape) && shape[1] + shape[2] <= Self::WALL_LIMIT
    }
}

/// Looks up a built-in problem by name.
pub fn problem_by_name(name: &str) -> Result<Box<dyn DesignProblem>> {
    match name {
        SyntheticProblem::NAME => Ok(Box::new(SyntheticProblem::new())),
        other => Err(Error::InvalidConfig(format!("unknown problem '{other}'"))),
    }
}
