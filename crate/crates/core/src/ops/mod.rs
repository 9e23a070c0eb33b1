//! Forward and backward kernels behind the autodiff tape.
//!
//! Every kernel works on plain [`Tensor`](crate::tensor::Tensor) values or
//! raw slices. Shape validation happens in the tape before a kernel runs,
//! so kernels assume well-formed inputs.

pub mod activation;
pub mod conv;
pub mod loss;
pub mod norm;
pub mod spatial;
