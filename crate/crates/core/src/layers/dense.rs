use rand::Rng;

use super::init::sample_weight;
use super::{bias_shape, eval_once, weight_shape, InitScheme, Param, ParamCursor};
use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::linalg::Algebra;
use crate::qtensor::QuaternionTensor;
use crate::tensor::Tensor;

/// Fully connected layer. In the quaternion algebra every weight multiplies
/// its input quaternion with the Hamilton product.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    algebra: Algebra,
    in_units: usize,
    out_units: usize,
    weight: Param,
    bias: Option<Param>,
}

impl Dense {
    /// Freshly initialised layer; sizes are in algebra units (quaternions
    /// for [`Algebra::Quaternion`]).
    pub fn new<R: Rng>(
        name: &str,
        algebra: Algebra,
        in_units: usize,
        out_units: usize,
        bias: bool,
        rng: &mut R,
    ) -> Result<Self> {
        let scheme = match algebra {
            Algebra::Real => InitScheme::GlorotUniform,
            Algebra::Quaternion => InitScheme::QuaternionPolar,
        };
        let w = sample_weight(rng, scheme, in_units, out_units, algebra, &[out_units, in_units])?;
        Ok(Dense {
            algebra,
            in_units,
            out_units,
            weight: Param::new(format!("{name}.weight"), w, true),
            bias: bias.then(|| {
                Param::new(
                    format!("{name}.bias"),
                    Tensor::zeros(&bias_shape(algebra, out_units)),
                    false,
                )
            }),
        })
    }

    /// Layer from explicit stored tensors.
    pub fn from_tensors(algebra: Algebra, weight: Tensor, bias: Option<Tensor>) -> Result<Self> {
        let (out_units, in_units) = match (algebra, weight.shape()) {
            (Algebra::Real, [o, i]) => (*o, *i),
            (Algebra::Quaternion, [4, o, i]) => (*o, *i),
            (_, s) => {
                return Err(Error::ShapeMismatch(format!(
                    "{algebra:?} dense weight cannot have shape {s:?}"
                )))
            }
        };
        if let Some(b) = &bias {
            if b.shape() != bias_shape(algebra, out_units).as_slice() {
                return Err(Error::ShapeMismatch(format!(
                    "dense bias shape {:?} for {out_units} units",
                    b.shape()
                )));
            }
        }
        Ok(Dense {
            algebra,
            in_units,
            out_units,
            weight: Param::new("dense.weight", weight, true),
            bias: bias.map(|b| Param::new("dense.bias", b, false)),
        })
    }

    /// Quaternion layer from a `[out_q, in_q]` weight and `[out_q]` bias.
    pub fn quaternion(weights: &QuaternionTensor, bias: Option<&QuaternionTensor>) -> Result<Self> {
        Dense::from_tensors(
            Algebra::Quaternion,
            weights.to_stacked(),
            bias.map(QuaternionTensor::to_stacked),
        )
    }

    pub fn algebra(&self) -> Algebra {
        self.algebra
    }

    pub fn in_units(&self) -> usize {
        self.in_units
    }

    pub fn out_units(&self) -> usize {
        self.out_units
    }

    pub fn in_real(&self) -> usize {
        self.in_units * self.algebra.width()
    }

    pub fn out_real(&self) -> usize {
        self.out_units * self.algebra.width()
    }

    pub fn weight(&self) -> &Tensor {
        &self.weight.value
    }

    pub fn set_decay(&mut self, decay: bool) {
        self.weight.decay = decay;
    }

    pub fn params(&self) -> Vec<&Param> {
        std::iter::once(&self.weight).chain(self.bias.iter()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        std::iter::once(&mut self.weight).chain(self.bias.iter_mut()).collect()
    }

    /// `x: [rows, in_real]` → `[rows, out_real]`.
    pub fn forward(&self, tape: &mut Tape, cursor: &mut ParamCursor, x: Var) -> Result<Var> {
        let w = cursor.next_var()?;
        let b = match self.bias {
            Some(_) => Some(cursor.next_var()?),
            None => None,
        };
        tape.linear(x, w, b, self.algebra)
    }

    /// Applies the layer to a real `[rows, in_real]` tensor.
    pub fn forward_real(&self, x: &Tensor) -> Result<Tensor> {
        eval_once(&self.params(), x.clone(), |tape, cursor, x| self.forward(tape, cursor, x))
    }

    /// Applies a quaternion layer to `[batch, in_q]` (or `[in_q]`) input.
    pub fn forward_quaternion(&self, x: &QuaternionTensor) -> Result<QuaternionTensor> {
        if self.algebra != Algebra::Quaternion {
            return Err(Error::ShapeMismatch("real layer given quaternion input".into()));
        }
        let flat = match x.shape() {
            [n] => x.to_real().reshape(&[1, 4 * n])?,
            [_, _] => x.to_real(),
            s => {
                return Err(Error::ShapeMismatch(format!(
                    "dense input must be [batch, in_q], got {s:?}"
                )))
            }
        };
        let y = self.forward_real(&flat)?;
        let y = if x.shape().len() == 1 {
            y.reshape(&[4 * self.out_units])?
        } else {
            y
        };
        QuaternionTensor::from_real(&y)
    }

    pub fn weight_shape(algebra: Algebra, in_units: usize, out_units: usize) -> Vec<usize> {
        weight_shape(algebra, out_units, in_units, &[])
    }
}

/// Quaternion dense forward pass on `[batch, in_q]` quaternions.
pub fn qdense_forward(layer: &Dense, input: &QuaternionTensor) -> Result<QuaternionTensor> {
    layer.forward_quaternion(input)
}
