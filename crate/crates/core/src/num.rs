use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar that utilities and scores are computed in.
pub trait Real: Float + FromPrimitive + ToPrimitive + Debug + Display + Send + Sync + 'static {
    /// Converts an authored constant (bounds, weights, attribute values).
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("every f64 converts to a float type")
    }

    fn clamp01(self) -> Self {
        self.max(Self::zero()).min(Self::one())
    }
}

impl Real for f32 {}
impl Real for f64 {}
