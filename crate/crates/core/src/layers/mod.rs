//! Quaternion layers and their real-valued counterparts.
//!
//! Every layer is parameterised by an [`Algebra`]. Quaternion layers store
//! weights stacked as `[4, out, in, ..]` and biases as `[4, out]`; real
//! layers use the usual `[out, in, ..]` / `[out]`. On the tape both consume
//! and produce real tensors whose unit axis is component-blocked for the
//! quaternion case (see [`crate::qtensor`]).

mod activation;
mod conv;
mod dense;
mod dropout;
mod head;
mod init;
mod pool;
mod recurrent;

pub use activation::{split_activation, Activation, ActivationLayer};
pub use conv::{qconv2d_forward, Conv2d, Padding};
pub use dense::{qdense_forward, Dense};
pub use dropout::{dropout, dropout_mask, dropout_real};
pub use head::{softmax_rows, SoftmaxHead};
pub use init::{initialize, quaternion_init, InitScheme, InitSpec};
pub use pool::maxpool_freq;
pub use recurrent::{qrnn_output, qrnn_step, OutputProjection, RecurrentCell};

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::linalg::Algebra;
use crate::tensor::Tensor;

/// A trainable tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
    /// Whether L2 weight decay applies.
    pub decay: bool,
}

impl Param {
    pub fn new(name: impl Into<String>, value: Tensor, decay: bool) -> Self {
        Param {
            name: name.into(),
            value,
            decay,
        }
    }
}

/// Hands out the tape variables of bound parameters in declaration order.
#[derive(Debug)]
pub struct ParamCursor<'a> {
    vars: &'a [Var],
    pos: usize,
}

impl<'a> ParamCursor<'a> {
    pub fn new(vars: &'a [Var]) -> Self {
        ParamCursor { vars, pos: 0 }
    }

    pub fn next_var(&mut self) -> Result<Var> {
        let v = self
            .vars
            .get(self.pos)
            .copied()
            .ok_or_else(|| Error::ShapeMismatch("ran out of bound parameters".into()))?;
        self.pos += 1;
        Ok(v)
    }

    pub fn consumed(&self) -> usize {
        self.pos
    }
}

/// Records every parameter as a tape leaf, in order.
pub fn bind_params(tape: &mut Tape, params: &[&Param]) -> Vec<Var> {
    params.iter().map(|p| tape.leaf(p.value.clone())).collect()
}

/// Runs a layer once on a private tape and returns its output value.
pub(crate) fn eval_once<F>(params: &[&Param], input: Tensor, f: F) -> Result<Tensor>
where
    F: FnOnce(&mut Tape, &mut ParamCursor, Var) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars = bind_params(&mut tape, params);
    let x = tape.leaf(input);
    let mut cursor = ParamCursor::new(&vars);
    let y = f(&mut tape, &mut cursor, x)?;
    Ok(tape.value(y).clone())
}

/// Stored shape of a weight connecting `in_units` to `out_units` (in
/// algebra units) with optional trailing kernel extents.
pub(crate) fn weight_shape(algebra: Algebra, out_units: usize, in_units: usize, tail: &[usize]) -> Vec<usize> {
    let mut s = match algebra {
        Algebra::Real => vec![out_units, in_units],
        Algebra::Quaternion => vec![4, out_units, in_units],
    };
    s.extend_from_slice(tail);
    s
}

pub(crate) fn bias_shape(algebra: Algebra, units: usize) -> Vec<usize> {
    match algebra {
        Algebra::Real => vec![units],
        Algebra::Quaternion => vec![4, units],
    }
}
