use serde::{Deserialize, Serialize};

use super::{Param, ParamCursor};
use crate::autodiff::{Elementwise, Tape, Var};
use crate::error::Result;
use crate::qtensor::QuaternionTensor;
use crate::tensor::Tensor;

/// Initial slope of a freshly built PReLU.
pub const PRELU_INIT: f64 = 0.25;

/// Scalar activation applied independently to every component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Tanh,
    Sigmoid,
    Relu,
    /// One learned slope per layer, shared by all four components.
    Prelu,
}

/// Applies `f` to every component of every quaternion.
pub fn split_activation(q: &QuaternionTensor, f: impl Fn(f64) -> f64) -> QuaternionTensor {
    let [r, x, y, z] = q.components().clone();
    QuaternionTensor::pack(r.map(&f), x.map(&f), y.map(&f), z.map(&f))
        .expect("component shapes are preserved")
}

/// An activation as a layer; owns the slope parameter when it is a PReLU.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationLayer {
    kind: Activation,
    slope: Option<Param>,
}

impl ActivationLayer {
    pub fn new(kind: Activation, name: &str) -> Self {
        let slope = (kind == Activation::Prelu)
            .then(|| Param::new(format!("{name}.slope"), Tensor::scalar(PRELU_INIT), false));
        ActivationLayer { kind, slope }
    }

    pub fn kind(&self) -> Activation {
        self.kind
    }

    pub fn params(&self) -> Vec<&Param> {
        self.slope.iter().collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        self.slope.iter_mut().collect()
    }

    pub fn forward(&self, tape: &mut Tape, cursor: &mut ParamCursor, x: Var) -> Result<Var> {
        Ok(match self.kind {
            Activation::Identity => x,
            Activation::Tanh => tape.map(x, Elementwise::Tanh),
            Activation::Sigmoid => tape.map(x, Elementwise::Sigmoid),
            Activation::Relu => tape.map(x, Elementwise::Relu),
            Activation::Prelu => {
                let slope = cursor.next_var()?;
                tape.prelu(x, slope)?
            }
        })
    }
}
