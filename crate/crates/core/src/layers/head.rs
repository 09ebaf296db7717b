use rand::Rng;

use super::{Dense, Param, ParamCursor};
use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::linalg::Algebra;
use crate::qtensor::QuaternionTensor;
use crate::tensor::Tensor;

/// Real dense layer followed by a softmax. Quaternion inputs are flattened
/// to their real component-blocked layout first.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxHead {
    dense: Dense,
}

impl SoftmaxHead {
    pub fn new<R: Rng>(name: &str, in_real: usize, classes: usize, rng: &mut R) -> Result<Self> {
        if classes < 2 {
            return Err(Error::InvalidConfig(format!(
                "softmax head needs at least 2 classes, got {classes}"
            )));
        }
        Ok(SoftmaxHead {
            dense: Dense::new(name, Algebra::Real, in_real, classes, true, rng)?,
        })
    }

    pub fn from_dense(dense: Dense) -> Result<Self> {
        if dense.algebra() != Algebra::Real || dense.out_units() < 2 {
            return Err(Error::InvalidConfig("softmax head needs a real layer with >= 2 outputs".into()));
        }
        Ok(SoftmaxHead { dense })
    }

    pub fn classes(&self) -> usize {
        self.dense.out_units()
    }

    pub fn in_real(&self) -> usize {
        self.dense.in_units()
    }

    pub fn set_decay(&mut self, decay: bool) {
        self.dense.set_decay(decay);
    }

    pub fn params(&self) -> Vec<&Param> {
        self.dense.params()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        self.dense.params_mut()
    }

    /// Pre-softmax scores `[rows, classes]`.
    pub fn logits(&self, tape: &mut Tape, cursor: &mut ParamCursor, x: Var) -> Result<Var> {
        self.dense.forward(tape, cursor, x)
    }

    /// Row-wise class probabilities for `[rows, in_real]` input.
    pub fn probabilities(&self, x: &Tensor) -> Result<Tensor> {
        super::eval_once(&self.params(), x.clone(), |tape, cursor, x| {
            let logits = self.logits(tape, cursor, x)?;
            tape.softmax(logits)
        })
    }

    /// Probabilities for `[rows, n]` quaternions (`4n = in_real`).
    pub fn probabilities_quaternion(&self, x: &QuaternionTensor) -> Result<Tensor> {
        self.probabilities(&x.to_real())
    }
}

/// Row-wise softmax of `[rows, classes]` scores.
pub fn softmax_rows(logits: &Tensor) -> Result<Tensor> {
    let mut tape = Tape::new();
    let x = tape.leaf(logits.clone());
    let y = tape.softmax(x)?;
    Ok(tape.value(y).clone())
}
