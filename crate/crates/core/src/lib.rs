//! Quaternion-valued neural networks for speech features.

pub mod autodiff;
pub mod ctc;
pub mod error;
pub mod features;
pub mod layers;
pub mod linalg;
pub mod qtensor;
pub mod quaternion;
pub mod selftest;
pub mod tensor;
pub mod train;

pub use error::{Error, ErrorKind, Result};
pub use linalg::Algebra;
pub use qtensor::QuaternionTensor;
pub use quaternion::{Quaternion, QuaternionMatrix4};
pub use tensor::Tensor;
