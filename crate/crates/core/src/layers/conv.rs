use rand::Rng;
use serde::{Deserialize, Serialize};

use super::init::sample_weight;
use super::{bias_shape, eval_once, weight_shape, InitScheme, Param, ParamCursor};
use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::linalg::Algebra;
use crate::qtensor::QuaternionTensor;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    /// `(k - 1) / 2` zeros per side; keeps extents for odd kernels.
    Same,
    Valid,
}

impl Padding {
    pub fn extents(self, kernel: (usize, usize)) -> (usize, usize) {
        match self {
            Padding::Same => ((kernel.0 - 1) / 2, (kernel.1 - 1) / 2),
            Padding::Valid => (0, 0),
        }
    }
}

/// Stride-1 2-D convolution (cross-correlation) over `[batch, maps, h, w]`.
/// Quaternion maps are component-blocked along the channel axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    algebra: Algebra,
    in_maps: usize,
    out_maps: usize,
    kernel: (usize, usize),
    padding: Padding,
    weight: Param,
    bias: Param,
}

impl Conv2d {
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng>(
        name: &str,
        algebra: Algebra,
        in_maps: usize,
        out_maps: usize,
        kernel: (usize, usize),
        padding: Padding,
        rng: &mut R,
    ) -> Result<Self> {
        if kernel.0 == 0 || kernel.1 == 0 {
            return Err(Error::InvalidConfig(format!("kernel {kernel:?} is empty")));
        }
        let scheme = match algebra {
            Algebra::Real => InitScheme::GlorotUniform,
            Algebra::Quaternion => InitScheme::QuaternionPolar,
        };
        let area = kernel.0 * kernel.1;
        let w = sample_weight(
            rng,
            scheme,
            in_maps * area,
            out_maps * area,
            algebra,
            &[out_maps, in_maps, kernel.0, kernel.1],
        )?;
        Ok(Conv2d {
            algebra,
            in_maps,
            out_maps,
            kernel,
            padding,
            weight: Param::new(format!("{name}.weight"), w, true),
            bias: Param::new(
                format!("{name}.bias"),
                Tensor::zeros(&bias_shape(algebra, out_maps)),
                false,
            ),
        })
    }

    /// Layer from explicit stored tensors (`[4, out, in, kh, kw]` and
    /// `[4, out]` for quaternions).
    pub fn from_tensors(algebra: Algebra, weight: Tensor, bias: Tensor, padding: Padding) -> Result<Self> {
        let (out_maps, in_maps, kh, kw) = match (algebra, weight.shape()) {
            (Algebra::Real, [o, i, kh, kw]) => (*o, *i, *kh, *kw),
            (Algebra::Quaternion, [4, o, i, kh, kw]) => (*o, *i, *kh, *kw),
            (_, s) => {
                return Err(Error::ShapeMismatch(format!(
                    "{algebra:?} conv weight cannot have shape {s:?}"
                )))
            }
        };
        if bias.shape() != bias_shape(algebra, out_maps).as_slice() {
            return Err(Error::ShapeMismatch(format!(
                "conv bias shape {:?} for {out_maps} maps",
                bias.shape()
            )));
        }
        Ok(Conv2d {
            algebra,
            in_maps,
            out_maps,
            kernel: (kh, kw),
            padding,
            weight: Param::new("conv.weight", weight, true),
            bias: Param::new("conv.bias", bias, false),
        })
    }

    pub fn quaternion(weights: &QuaternionTensor, bias: &QuaternionTensor, padding: Padding) -> Result<Self> {
        Conv2d::from_tensors(Algebra::Quaternion, weights.to_stacked(), bias.to_stacked(), padding)
    }

    pub fn algebra(&self) -> Algebra {
        self.algebra
    }

    pub fn in_maps(&self) -> usize {
        self.in_maps
    }

    pub fn out_maps(&self) -> usize {
        self.out_maps
    }

    pub fn kernel(&self) -> (usize, usize) {
        self.kernel
    }

    pub fn set_decay(&mut self, decay: bool) {
        self.weight.decay = decay;
    }

    pub fn params(&self) -> Vec<&Param> {
        vec![&self.weight, &self.bias]
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }

    /// Real `[batch, in_maps · width, h, w]` → `[batch, out_maps · width, h', w']`.
    pub fn forward(&self, tape: &mut Tape, cursor: &mut ParamCursor, x: Var) -> Result<Var> {
        let w = cursor.next_var()?;
        let b = cursor.next_var()?;
        tape.conv2d(x, w, Some(b), self.algebra, self.padding.extents(self.kernel))
    }

    pub fn forward_real(&self, x: &Tensor) -> Result<Tensor> {
        eval_once(&self.params(), x.clone(), |tape, cursor, x| self.forward(tape, cursor, x))
    }

    /// Pre-activation output for quaternion `[batch, in_maps, h, w]` input.
    pub fn forward_quaternion(&self, x: &QuaternionTensor) -> Result<QuaternionTensor> {
        if x.shape().len() != 4 {
            return Err(Error::ShapeMismatch(format!(
                "conv input must be [batch, maps, h, w], got {:?}",
                x.shape()
            )));
        }
        let y = self.forward_real(&x.to_real_along(1))?;
        QuaternionTensor::from_real_along(&y, 1)
    }

    pub fn weight_shape(&self) -> Vec<usize> {
        weight_shape(self.algebra, self.out_maps, self.in_maps, &[self.kernel.0, self.kernel.1])
    }
}

/// Quaternion convolution pre-activation; apply [`super::split_activation`]
/// afterwards.
pub fn qconv2d_forward(layer: &Conv2d, input: &QuaternionTensor) -> Result<QuaternionTensor> {
    layer.forward_quaternion(input)
}
