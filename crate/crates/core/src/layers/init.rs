use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, UnitSphere};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Algebra;
use crate::qtensor::QuaternionTensor;
use crate::quaternion::Quaternion;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    /// `|w| · (cos θ + u sin θ)` with Rayleigh `|w|` of scale
    /// `1 / sqrt(2 (fan_in + fan_out))`, `θ ~ U[-π, π]` and `u` a uniform
    /// pure-imaginary unit axis.
    QuaternionPolar,
    /// `U[-a, a]` with `a = sqrt(6 / (fan_in + fan_out))`.
    GlorotUniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InitSpec {
    pub scheme: InitScheme,
    pub fan_in: usize,
    pub fan_out: usize,
    pub seed: u64,
}

impl InitSpec {
    pub fn polar(fan_in: usize, fan_out: usize, seed: u64) -> Self {
        InitSpec {
            scheme: InitScheme::QuaternionPolar,
            fan_in,
            fan_out,
            seed,
        }
    }

    /// Rayleigh scale of the polar scheme.
    pub fn sigma(&self) -> f64 {
        1.0 / (2.0 * (self.fan_in + self.fan_out) as f64).sqrt()
    }

    fn check(&self) -> Result<()> {
        if self.fan_in == 0 || self.fan_out == 0 {
            return Err(Error::InvalidFan {
                fan_in: self.fan_in,
                fan_out: self.fan_out,
            });
        }
        Ok(())
    }
}

/// Samples a quaternion tensor with the polar scheme; deterministic in
/// `spec.seed`.
pub fn quaternion_init(spec: &InitSpec, shape: &[usize]) -> Result<QuaternionTensor> {
    spec.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n: usize = shape.iter().product();
    let values = sample_polar(&mut rng, spec.sigma(), n);
    QuaternionTensor::from_quaternions(shape, &values)
}

/// Samples a weight in the stored layout of `algebra` (`[4, ..shape]` for
/// quaternions) according to `spec.scheme`.
pub fn initialize(spec: &InitSpec, algebra: Algebra, shape: &[usize]) -> Result<Tensor> {
    spec.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    sample_weight(&mut rng, spec.scheme, spec.fan_in, spec.fan_out, algebra, shape)
}

pub(crate) fn sample_weight<R: Rng>(
    rng: &mut R,
    scheme: InitScheme,
    fan_in: usize,
    fan_out: usize,
    algebra: Algebra,
    unit_shape: &[usize],
) -> Result<Tensor> {
    if fan_in == 0 || fan_out == 0 {
        return Err(Error::InvalidFan { fan_in, fan_out });
    }
    let n: usize = unit_shape.iter().product();
    match (scheme, algebra) {
        (InitScheme::QuaternionPolar, Algebra::Quaternion) => {
            let sigma = 1.0 / (2.0 * (fan_in + fan_out) as f64).sqrt();
            let values = sample_polar(rng, sigma, n);
            Ok(QuaternionTensor::from_quaternions(unit_shape, &values)?.to_stacked())
        }
        (InitScheme::QuaternionPolar, Algebra::Real) => Err(Error::InvalidConfig(
            "polar initialisation needs quaternion weights".into(),
        )),
        (InitScheme::GlorotUniform, _) => {
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let mut shape = Vec::new();
            if algebra == Algebra::Quaternion {
                shape.push(4);
            }
            shape.extend_from_slice(unit_shape);
            Ok(Tensor::from_fn(&shape, |_| rng.gen_range(-a..a)))
        }
    }
}

fn sample_polar<R: Rng>(rng: &mut R, sigma: f64, n: usize) -> Vec<Quaternion> {
    (0..n)
        .map(|_| {
            let u: f64 = rng.gen();
            let modulus = sigma * (-2.0 * (1.0 - u).ln()).sqrt();
            let theta = rng.gen_range(-PI..PI);
            let [ux, uy, uz]: [f64; 3] = UnitSphere.sample(rng);
            let (s, c) = theta.sin_cos();
            Quaternion::new(c, ux * s, uy * s, uz * s).scale(modulus)
        })
        .collect()
}
