use std::fmt::{Debug, Display};
use std::ops::Add;

use num_traits::{Float, FromPrimitive, Zero};

/// Floating-point type the embedding engine and metrics run on.
///
/// Sender and receiver must agree on the scalar: `f32` and `f64` produce
/// different pruning boundaries and therefore different codebooks.
pub trait Scalar:
    Float + FromPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal into this scalar.
    fn lit(value: f64) -> Self {
        Self::from_f64(value).expect("literal representable in scalar type")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Anything a Huffman tree can be weighed by: floats, integer counts or
/// exact rationals.
pub trait Weight: Clone + PartialOrd + Zero + Add<Output = Self> + Debug {}

impl<T> Weight for T where T: Clone + PartialOrd + Zero + Add<Output = T> + Debug {}
