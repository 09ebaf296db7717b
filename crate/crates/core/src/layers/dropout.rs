use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::Algebra;
use crate::qtensor::QuaternionTensor;
use crate::tensor::Tensor;

/// Inverted-dropout mask for a tensor of `shape` whose `axis` holds units.
/// Under the quaternion algebra that axis is component-blocked, and all four
/// components of a unit share one draw. Kept entries are `1 / (1 - rate)`.
pub fn dropout_mask<R: Rng>(
    shape: &[usize],
    axis: usize,
    algebra: Algebra,
    rate: f64,
    rng: &mut R,
) -> Result<Tensor> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::InvalidRate(rate));
    }
    let width = algebra.width();
    if axis >= shape.len() || !shape[axis].is_multiple_of(width) {
        return Err(Error::ShapeMismatch(format!(
            "axis {axis} of {shape:?} does not hold whole units"
        )));
    }
    let keep = 1.0 / (1.0 - rate);
    let outer: usize = shape[..axis].iter().product();
    let units = shape[axis] / width;
    let inner: usize = shape[axis + 1..].iter().product();
    let mut mask = vec![0.0; shape.iter().product()];
    for o in 0..outer {
        for u in 0..units {
            for i in 0..inner {
                let v = if rate > 0.0 && rng.gen::<f64>() < rate { 0.0 } else { keep };
                for k in 0..width {
                    mask[(o * shape[axis] + k * units + u) * inner + i] = v;
                }
            }
        }
    }
    Tensor::new(shape.to_vec(), mask)
}

/// Drops whole quaternions with probability `rate` in training mode.
pub fn dropout(input: &QuaternionTensor, rate: f64, training: bool, seed: u64) -> Result<QuaternionTensor> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::InvalidRate(rate));
    }
    if !training || rate == 0.0 {
        return Ok(input.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = input.len();
    let mask = dropout_mask(&[n], 0, Algebra::Real, rate, &mut rng)?;
    let [r, x, y, z] = input.components().clone();
    let apply = |t: Tensor| {
        let data = t.data().iter().zip(mask.data()).map(|(a, m)| a * m).collect();
        Tensor::new(t.shape().to_vec(), data)
    };
    QuaternionTensor::pack(apply(r)?, apply(x)?, apply(y)?, apply(z)?)
}

/// Element-level dropout for real tensors.
pub fn dropout_real(input: &Tensor, rate: f64, training: bool, seed: u64) -> Result<Tensor> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::InvalidRate(rate));
    }
    if !training || rate == 0.0 {
        return Ok(input.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mask = dropout_mask(&[input.len()], 0, Algebra::Real, rate, &mut rng)?;
    let data = input.data().iter().zip(mask.data()).map(|(a, m)| a * m).collect();
    Tensor::new(input.shape().to_vec(), data)
}
