use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Feature value type: a finite IEEE float.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Midpoint of `lo < hi` that still separates them under `value <= threshold`.
    fn split_point(lo: Self, hi: Self) -> Self {
        let mid = lo + (hi - lo) / (Self::one() + Self::one());
        if mid < hi {
            mid
        } else {
            lo
        }
    }

    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).unwrap_or_else(Self::nan)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
