//! Shared strategy building blocks: deterministic schedules such as γ(t) or
//! α(t), and affine feedback maps `π = offset + slope·x`.

use std::fmt;
use std::sync::Arc;

use crate::{Mat, Vector};

/// A deterministic scalar function of time.
#[derive(Clone)]
pub enum TimeFn {
    Constant(f64),
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl TimeFn {
    pub fn constant(v: f64) -> Self {
        TimeFn::Constant(v)
    }

    pub fn from_fn(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        TimeFn::Custom(Arc::new(f))
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            TimeFn::Constant(v) => *v,
            TimeFn::Custom(f) => f(t),
        }
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self {
            TimeFn::Constant(v) => Some(*v),
            TimeFn::Custom(_) => None,
        }
    }
}

impl fmt::Debug for TimeFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimeFn::Constant(v) => write!(f, "Constant({v})"),
            TimeFn::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl From<f64> for TimeFn {
    fn from(v: f64) -> Self {
        TimeFn::Constant(v)
    }
}

/// `x ↦ offset + slope·x`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinePolicy {
    pub offset: Vector,
    pub slope: Mat,
}

impl AffinePolicy {
    pub fn apply(&self, x: &Vector) -> Vector {
        let mut out = self.offset.clone();
        out.gemv(1.0, &self.slope, x, 1.0);
        out
    }

    /// Writes `offset + slope·x` into `out` without allocating.
    pub fn apply_into(&self, x: &Vector, out: &mut Vector) {
        out.copy_from(&self.offset);
        out.gemv(1.0, &self.slope, x, 1.0);
    }
}
