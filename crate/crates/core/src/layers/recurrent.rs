use rand::Rng;

use super::init::sample_weight;
use super::{bias_shape, bind_params, InitScheme, Param, ParamCursor};
use crate::autodiff::{Elementwise, Tape, Var};
use crate::error::{Error, Result};
use crate::linalg::Algebra;
use crate::qtensor::QuaternionTensor;
use crate::tensor::Tensor;

/// Hidden-to-output projection `γ = β(W_out h + b_out)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputProjection {
    out_units: usize,
    weight: Param,
    bias: Param,
    activation: Elementwise,
}

/// Vanilla recurrent layer
/// `h_t = α(W_hh h_{t-1} + W_in x_t + b)`, with Hamilton products in the
/// quaternion algebra, and an optional output projection.
#[derive(Debug, Clone, PartialEq)]
pub struct RecurrentCell {
    algebra: Algebra,
    input_units: usize,
    hidden_units: usize,
    activation: Elementwise,
    w_in: Param,
    w_hh: Param,
    bias: Param,
    output: Option<OutputProjection>,
}

struct CellVars {
    w_in: Var,
    w_hh: Var,
    bias: Var,
    output: Option<(Var, Var)>,
}

fn scheme_for(algebra: Algebra) -> InitScheme {
    match algebra {
        Algebra::Real => InitScheme::GlorotUniform,
        Algebra::Quaternion => InitScheme::QuaternionPolar,
    }
}

impl RecurrentCell {
    pub fn new<R: Rng>(
        name: &str,
        algebra: Algebra,
        input_units: usize,
        hidden_units: usize,
        activation: Elementwise,
        rng: &mut R,
    ) -> Result<Self> {
        let scheme = scheme_for(algebra);
        let w_in = sample_weight(rng, scheme, input_units, hidden_units, algebra, &[hidden_units, input_units])?;
        let w_hh = sample_weight(rng, scheme, hidden_units, hidden_units, algebra, &[hidden_units, hidden_units])?;
        Ok(RecurrentCell {
            algebra,
            input_units,
            hidden_units,
            activation,
            w_in: Param::new(format!("{name}.w_in"), w_in, true),
            w_hh: Param::new(format!("{name}.w_hh"), w_hh, true),
            bias: Param::new(
                format!("{name}.bias"),
                Tensor::zeros(&bias_shape(algebra, hidden_units)),
                false,
            ),
            output: None,
        })
    }

    /// Adds a freshly initialised output projection to `out_units`.
    pub fn with_output<R: Rng>(
        mut self,
        name: &str,
        out_units: usize,
        activation: Elementwise,
        rng: &mut R,
    ) -> Result<Self> {
        let w = sample_weight(
            rng,
            scheme_for(self.algebra),
            self.hidden_units,
            out_units,
            self.algebra,
            &[out_units, self.hidden_units],
        )?;
        self.output = Some(OutputProjection {
            out_units,
            weight: Param::new(format!("{name}.w_out"), w, true),
            bias: Param::new(
                format!("{name}.b_out"),
                Tensor::zeros(&bias_shape(self.algebra, out_units)),
                false,
            ),
            activation,
        });
        Ok(self)
    }

    /// Quaternion cell from explicit weights: `w_hh [H, H]`, `w_in [H, in]`,
    /// `bias [H]`.
    pub fn quaternion(
        w_hh: &QuaternionTensor,
        w_in: &QuaternionTensor,
        bias: &QuaternionTensor,
        activation: Elementwise,
    ) -> Result<Self> {
        let (h, i) = match (w_hh.shape(), w_in.shape()) {
            ([h1, h2], [h3, i]) if h1 == h2 && h1 == h3 => (*h1, *i),
            (a, b) => {
                return Err(Error::ShapeMismatch(format!(
                    "recurrent weights {a:?} / {b:?} are inconsistent"
                )))
            }
        };
        if bias.shape() != [h] {
            return Err(Error::ShapeMismatch(format!("bias {:?} for {h} units", bias.shape())));
        }
        Ok(RecurrentCell {
            algebra: Algebra::Quaternion,
            input_units: i,
            hidden_units: h,
            activation,
            w_in: Param::new("w_in", w_in.to_stacked(), true),
            w_hh: Param::new("w_hh", w_hh.to_stacked(), true),
            bias: Param::new("bias", bias.to_stacked(), false),
            output: None,
        })
    }

    /// Attaches explicit quaternion output weights `[out, H]` and bias `[out]`.
    pub fn with_quaternion_output(
        mut self,
        weight: &QuaternionTensor,
        bias: &QuaternionTensor,
        activation: Elementwise,
    ) -> Result<Self> {
        match weight.shape() {
            [o, h] if *h == self.hidden_units && bias.shape() == [*o] => {
                self.output = Some(OutputProjection {
                    out_units: *o,
                    weight: Param::new("w_out", weight.to_stacked(), true),
                    bias: Param::new("b_out", bias.to_stacked(), false),
                    activation,
                });
                Ok(self)
            }
            s => Err(Error::ShapeMismatch(format!(
                "output weight {s:?} does not fit {} hidden units",
                self.hidden_units
            ))),
        }
    }

    pub fn algebra(&self) -> Algebra {
        self.algebra
    }

    pub fn hidden_units(&self) -> usize {
        self.hidden_units
    }

    pub fn input_units(&self) -> usize {
        self.input_units
    }

    pub fn output_units(&self) -> usize {
        self.output.as_ref().map_or(self.hidden_units, |o| o.out_units)
    }

    pub fn set_decay(&mut self, decay: bool) {
        self.w_in.decay = decay;
        self.w_hh.decay = decay;
        if let Some(o) = &mut self.output {
            o.weight.decay = decay;
        }
    }

    pub fn params(&self) -> Vec<&Param> {
        let mut p = vec![&self.w_in, &self.w_hh, &self.bias];
        if let Some(o) = &self.output {
            p.push(&o.weight);
            p.push(&o.bias);
        }
        p
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = vec![&mut self.w_in, &mut self.w_hh, &mut self.bias];
        if let Some(o) = &mut self.output {
            p.push(&mut o.weight);
            p.push(&mut o.bias);
        }
        p
    }

    fn take_vars(&self, cursor: &mut ParamCursor) -> Result<CellVars> {
        let w_in = cursor.next_var()?;
        let w_hh = cursor.next_var()?;
        let bias = cursor.next_var()?;
        let output = match self.output {
            Some(_) => Some((cursor.next_var()?, cursor.next_var()?)),
            None => None,
        };
        Ok(CellVars {
            w_in,
            w_hh,
            bias,
            output,
        })
    }

    fn step_vars(&self, tape: &mut Tape, v: &CellVars, h_prev: Var, x_t: Var) -> Result<Var> {
        let from_input = tape.linear(x_t, v.w_in, Some(v.bias), self.algebra)?;
        let from_hidden = tape.linear(h_prev, v.w_hh, None, self.algebra)?;
        let pre = tape.add(from_input, from_hidden)?;
        Ok(tape.map(pre, self.activation))
    }

    fn output_vars(&self, tape: &mut Tape, v: &CellVars, h: Var) -> Result<Var> {
        match (&self.output, v.output) {
            (Some(o), Some((w, b))) => {
                let pre = tape.linear(h, w, Some(b), self.algebra)?;
                Ok(tape.map(pre, o.activation))
            }
            _ => Ok(h),
        }
    }

    /// Unrolls the cell over `x: [steps · batch, in_real]` (time-major rows)
    /// from a zero state and returns the per-step outputs, `[steps · batch,
    /// out_real]`. Without an output projection the outputs are the hidden
    /// states.
    pub fn forward_sequence(
        &self,
        tape: &mut Tape,
        cursor: &mut ParamCursor,
        x: Var,
        steps: usize,
        batch: usize,
    ) -> Result<Var> {
        let v = self.take_vars(cursor)?;
        let rows = tape.value(x).shape().first().copied().unwrap_or(0);
        if rows != steps * batch || steps == 0 {
            return Err(Error::ShapeMismatch(format!(
                "sequence has {rows} rows, expected {steps} x {batch}"
            )));
        }
        // input projections for all steps at once
        let projected = tape.linear(x, v.w_in, Some(v.bias), self.algebra)?;
        let width = self.hidden_units * self.algebra.width();
        let mut h = tape.leaf(Tensor::zeros(&[batch, width]));
        let mut states = Vec::with_capacity(steps);
        for t in 0..steps {
            let from_input = tape.slice_rows(projected, t * batch, batch)?;
            let from_hidden = tape.linear(h, v.w_hh, None, self.algebra)?;
            let pre = tape.add(from_input, from_hidden)?;
            h = tape.map(pre, self.activation);
            states.push(h);
        }
        let hs = tape.concat_rows(&states)?;
        self.output_vars(tape, &v, hs)
    }

    /// One recurrence step on quaternion `[H]` / `[in_q]` (or batched
    /// `[B, H]` / `[B, in_q]`) tensors.
    pub fn step(&self, h_prev: &QuaternionTensor, x_t: &QuaternionTensor) -> Result<QuaternionTensor> {
        self.eval_quaternion(&[h_prev, x_t], self.hidden_units, |cell, tape, v, ins| {
            cell.step_vars(tape, v, ins[0], ins[1])
        })
    }

    /// Output projection of a quaternion hidden state.
    pub fn output(&self, h: &QuaternionTensor) -> Result<QuaternionTensor> {
        self.eval_quaternion(&[h], self.output_units(), |cell, tape, v, ins| {
            cell.output_vars(tape, v, ins[0])
        })
    }

    fn eval_quaternion<F>(&self, inputs: &[&QuaternionTensor], out_units: usize, f: F) -> Result<QuaternionTensor>
    where
        F: FnOnce(&Self, &mut Tape, &CellVars, &[Var]) -> Result<Var>,
    {
        if self.algebra != Algebra::Quaternion {
            return Err(Error::ShapeMismatch("real cell given quaternion input".into()));
        }
        let unbatched = inputs[0].shape().len() == 1;
        let mut tape = Tape::new();
        let vars = bind_params(&mut tape, &self.params());
        let mut cursor = ParamCursor::new(&vars);
        let v = self.take_vars(&mut cursor)?;
        let mut ins = Vec::new();
        for q in inputs {
            let real = q.to_real();
            let real = match q.shape() {
                [n] => real.reshape(&[1, 4 * n])?,
                [_, _] => real,
                s => return Err(Error::ShapeMismatch(format!("expected [B, n] quaternions, got {s:?}"))),
            };
            ins.push(tape.leaf(real));
        }
        let y = f(self, &mut tape, &v, &ins)?;
        let mut y = tape.value(y).clone();
        if unbatched {
            y = y.reshape(&[4 * out_units])?;
        }
        QuaternionTensor::from_real(&y)
    }
}

pub fn qrnn_step(cell: &RecurrentCell, h_prev: &QuaternionTensor, x_t: &QuaternionTensor) -> Result<QuaternionTensor> {
    cell.step(h_prev, x_t)
}

pub fn qrnn_output(cell: &RecurrentCell, h_t: &QuaternionTensor) -> Result<QuaternionTensor> {
    cell.output(h_t)
}
