use std::fmt::{Debug, Display};
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point type the binning and statistics code is written against.
///
/// Implemented for `f32` and `f64`. Values are parsed and printed through
/// `FromStr`/`Display`, which round-trip exactly for both types.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + FromStr + Debug + Display + Default + Send + Sync + 'static
{
    fn of(value: f64) -> Self {
        Self::from_f64(value).expect("finite f64 converts to scalar")
    }

    fn of_count(count: u64) -> Self {
        Self::from_u64(count).expect("count converts to scalar")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
