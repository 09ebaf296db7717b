use crate::autodiff::Tape;
use crate::error::{Error, Result};
use crate::linalg::Algebra;
use crate::qtensor::QuaternionTensor;

/// Frequency-axis max pooling of `[batch, maps, f, t]` quaternions. Each
/// window keeps the whole quaternion with the largest norm (first on ties);
/// a trailing partial window is pooled as is.
pub fn maxpool_freq(input: &QuaternionTensor, window: usize) -> Result<QuaternionTensor> {
    if input.shape().len() != 4 {
        return Err(Error::ShapeMismatch(format!(
            "maxpool input must be [batch, maps, f, t], got {:?}",
            input.shape()
        )));
    }
    let mut tape = Tape::new();
    let x = tape.leaf(input.to_real_along(1));
    let y = tape.maxpool_freq(x, window, Algebra::Quaternion)?;
    QuaternionTensor::from_real_along(tape.value(y), 1)
}
