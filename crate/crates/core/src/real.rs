//! Scalar abstraction shared by the numerical modules.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive};

/// Floating point scalar the simulator can run on: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Amplitudes with magnitude below this are dropped from sparse states.
    const PRUNE_EPSILON: f64;
    /// Norms at or below this are treated as exactly zero.
    const ZERO_FLOOR: f64;

    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable as scalar")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar representable as f64")
    }
}

impl Real for f64 {
    const PRUNE_EPSILON: f64 = 1e-14;
    const ZERO_FLOOR: f64 = 1e-14;
}

impl Real for f32 {
    const PRUNE_EPSILON: f64 = 1e-7;
    const ZERO_FLOOR: f64 = 1e-6;
}

pub(crate) fn deg_to_rad<T: Real>(deg: f64) -> T {
    T::lit(deg.to_radians())
}
