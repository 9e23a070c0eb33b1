pub mod autodiff;
pub mod classifier;
pub mod error;
pub mod fft;
pub mod io;
pub mod lowres;
pub mod ops;
pub mod params;
pub mod radar;
pub mod safmn;
pub mod tensor;
pub mod train;

pub use autodiff::{Gradients, Tape, Var};
pub use error::{Error, Result};
pub use tensor::{ComplexTensor, Tensor};
