//! Deterministic inputs shared by the kernel benchmarks.

use radgest_core::Tensor;

/// A smooth, non-constant tensor of the given shape.
pub fn fixture(shape: &[usize]) -> Tensor {
    Tensor::from_fn(shape.to_vec(), |i| ((i as f64) * 0.618).sin())
}
