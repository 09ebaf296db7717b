use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::{HeadKind, ModelConfig};
use super::data::Batch;
use crate::autodiff::{CtcItem, Elementwise, Tape, Var};
use crate::error::{Error, Result};
use crate::layers::{
    bind_params, dropout_mask, Activation, ActivationLayer, Conv2d, Dense, Padding, Param, ParamCursor,
    RecurrentCell, SoftmaxHead,
};
use crate::tensor::Tensor;

/// How a batch is laid out for the network input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputLayout {
    /// `[batch, 4, bands, frames]`: one quaternion map (four real maps).
    Maps,
    /// `[frames · batch, 4 · bands]`, time-major rows, component-blocked.
    Frames,
}

#[derive(Debug, Clone, PartialEq)]
struct ConvStage {
    conv: Conv2d,
    act: ActivationLayer,
    pool: Option<usize>,
    dropout: bool,
}

#[derive(Debug, Clone, PartialEq)]
struct DenseStage {
    dense: Dense,
    act: ActivationLayer,
}

#[derive(Debug, Clone, PartialEq)]
enum Body {
    Conv {
        convs: Vec<ConvStage>,
        denses: Vec<DenseStage>,
    },
    Recurrent(Vec<RecurrentCell>),
}

/// A CNN, QCNN, RNN or QRNN with a real softmax output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    config: ModelConfig,
    body: Body,
    head: SoftmaxHead,
}

fn elementwise(a: Activation) -> Result<Elementwise> {
    Ok(match a {
        Activation::Identity => Elementwise::Identity,
        Activation::Tanh => Elementwise::Tanh,
        Activation::Sigmoid => Elementwise::Sigmoid,
        Activation::Relu => Elementwise::Relu,
        Activation::Prelu => {
            return Err(Error::InvalidConfig("recurrent layers cannot use prelu".into()));
        }
    })
}

/// Number of frequency rows left after pooling `bands` with `window`.
pub fn pooled_bands(bands: usize, window: usize) -> usize {
    bands.div_ceil(window)
}

/// Builds and initialises a model from a validated configuration.
pub fn build_model(config: &ModelConfig) -> Result<Model> {
    Model::build(config)
}

impl Model {
    pub fn build(config: &ModelConfig) -> Result<Model> {
        config.validate()?;
        let algebra = config.algebra();
        let w = algebra.width();
        let mut rng = ChaCha8Rng::seed_from_u64(config.init_seed);
        let (body, head_in) = if let Some(cc) = &config.conv {
            let kernel = (cc.kernel[0], cc.kernel[1]);
            let mut convs = Vec::new();
            // the input is one quaternion map, i.e. four real maps
            let mut in_maps = 4 / w;
            let widths = std::iter::once(cc.first_maps).chain(cc.maps.iter().copied());
            for (i, maps) in widths.enumerate() {
                let name = format!("conv{i}");
                let mut conv = Conv2d::new(&name, algebra, in_maps, maps / w, kernel, Padding::Same, &mut rng)?;
                if i == 0 {
                    conv.set_decay(false);
                }
                convs.push(ConvStage {
                    conv,
                    act: ActivationLayer::new(config.activation, &format!("{name}.act")),
                    pool: (i == 0).then_some(cc.pool),
                    dropout: i > 0,
                });
                in_maps = maps / w;
            }
            let mut width = in_maps * w * pooled_bands(config.input_bands, cc.pool);
            let mut denses = Vec::new();
            for (i, &units) in cc.dense.iter().enumerate() {
                let name = format!("dense{i}");
                denses.push(DenseStage {
                    dense: Dense::new(&name, algebra, width / w, units / w, true, &mut rng)?,
                    act: ActivationLayer::new(config.activation, &format!("{name}.act")),
                });
                width = units;
            }
            (Body::Conv { convs, denses }, width)
        } else {
            let rc = config.recurrent.as_ref().expect("validated");
            let act = elementwise(config.activation)?;
            let mut cells = Vec::new();
            let mut in_units = config.input_bands * 4 / w;
            for i in 0..rc.layers {
                let name = format!("rnn{i}");
                let mut cell = RecurrentCell::new(&name, algebra, in_units, rc.hidden / w, act, &mut rng)?;
                if rc.output_projection {
                    cell = cell.with_output(&name, rc.hidden / w, act, &mut rng)?;
                }
                in_units = cell.output_units();
                cells.push(cell);
            }
            (Body::Recurrent(cells), in_units * w)
        };
        let mut head = SoftmaxHead::new("head", head_in, config.output_classes(), &mut rng)?;
        head.set_decay(false);
        Ok(Model {
            config: config.clone(),
            body,
            head,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn layout(&self) -> InputLayout {
        match self.body {
            Body::Conv { .. } => InputLayout::Maps,
            Body::Recurrent(_) => InputLayout::Frames,
        }
    }

    /// Parameters in declaration order.
    pub fn params(&self) -> Vec<&Param> {
        let mut out = Vec::new();
        match &self.body {
            Body::Conv { convs, denses } => {
                for s in convs {
                    out.extend(s.conv.params());
                    out.extend(s.act.params());
                }
                for s in denses {
                    out.extend(s.dense.params());
                    out.extend(s.act.params());
                }
            }
            Body::Recurrent(cells) => {
                for c in cells {
                    out.extend(c.params());
                }
            }
        }
        out.extend(self.head.params());
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut out = Vec::new();
        match &mut self.body {
            Body::Conv { convs, denses } => {
                for s in convs {
                    out.extend(s.conv.params_mut());
                    out.extend(s.act.params_mut());
                }
                for s in denses {
                    out.extend(s.dense.params_mut());
                    out.extend(s.act.params_mut());
                }
            }
            Body::Recurrent(cells) => {
                for c in cells {
                    out.extend(c.params_mut());
                }
            }
        }
        out.extend(self.head.params_mut());
        out
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.value.len()).sum()
    }

    /// Per-layer counts of the instantiated parameters.
    pub fn param_table(&self) -> ParamTable {
        let mut table = ParamTable::default();
        for p in self.params() {
            let layer = p.name.split('.').next().unwrap_or(&p.name).to_string();
            let is_weight = p.name.ends_with("weight") || p.name.contains(".w_");
            table.add(&layer, p.value.len(), is_weight);
        }
        table
    }

    /// Output scores `[frames · batch, classes]` for a batch. `dropout_rng`
    /// enables training-mode dropout.
    pub fn logits(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        batch: &Batch,
        mut dropout_rng: Option<&mut ChaCha8Rng>,
    ) -> Result<Var> {
        if batch.layout != self.layout() {
            return Err(Error::ShapeMismatch("batch layout does not fit the model".into()));
        }
        let rate = self.config.dropout;
        let algebra = self.config.algebra();
        let mut cursor = ParamCursor::new(vars);
        let mut drop = |tape: &mut Tape, x: Var| -> Result<Var> {
            match dropout_rng.as_deref_mut() {
                Some(rng) if rate > 0.0 => {
                    let mask = dropout_mask(tape.value(x).shape(), 1, algebra, rate, rng)?;
                    tape.mul_const(x, mask)
                }
                _ => Ok(x),
            }
        };
        let x = tape.leaf(batch.input.clone());
        let hidden = match &self.body {
            Body::Conv { convs, denses } => {
                let mut h = x;
                for stage in convs {
                    h = stage.conv.forward(tape, &mut cursor, h)?;
                    h = stage.act.forward(tape, &mut cursor, h)?;
                    // keep padded frames at zero so they never leak into real ones
                    let mask = time_mask(tape.value(h).shape(), &batch.lengths);
                    h = tape.mul_const(h, mask)?;
                    if let Some(window) = stage.pool {
                        h = tape.maxpool_freq(h, window, algebra)?;
                    }
                    if stage.dropout {
                        h = drop(tape, h)?;
                    }
                }
                h = tape.maps_to_frames(h)?;
                for stage in denses {
                    h = stage.dense.forward(tape, &mut cursor, h)?;
                    h = stage.act.forward(tape, &mut cursor, h)?;
                    h = drop(tape, h)?;
                }
                h
            }
            Body::Recurrent(cells) => {
                let mut h = x;
                for cell in cells {
                    h = cell.forward_sequence(tape, &mut cursor, h, batch.max_frames, batch.len())?;
                    h = drop(tape, h)?;
                }
                h
            }
        };
        let logits = self.head.logits(tape, &mut cursor, hidden)?;
        if cursor.consumed() != vars.len() {
            return Err(Error::ShapeMismatch(format!(
                "forward used {} of {} parameters",
                cursor.consumed(),
                vars.len()
            )));
        }
        Ok(logits)
    }

    /// Mean loss of the head over the batch.
    pub fn loss(&self, tape: &mut Tape, logits: Var, batch: &Batch) -> Result<Var> {
        match self.config.head {
            HeadKind::Ctc => {
                let items: Vec<CtcItem> = batch
                    .lengths
                    .iter()
                    .zip(&batch.labels)
                    .map(|(&frames, target)| CtcItem {
                        frames,
                        target: target.clone(),
                    })
                    .collect();
                tape.ctc_loss(logits, &items)
            }
            HeadKind::Framewise => {
                let b = batch.len();
                let mut targets = vec![None; batch.max_frames * b];
                for (i, labels) in batch.labels.iter().enumerate() {
                    for (t, &l) in labels.iter().enumerate() {
                        targets[t * b + i] = Some(l);
                    }
                }
                tape.softmax_cross_entropy(logits, &targets)
            }
        }
    }

    /// Tape with parameters bound as leaves, in declaration order.
    pub fn bind(&self, tape: &mut Tape) -> Vec<Var> {
        bind_params(tape, &self.params())
    }
}

/// 0/1 mask over `[batch, ch, f, t]` that zeroes frames past each length.
fn time_mask(shape: &[usize], lengths: &[usize]) -> Tensor {
    let (b_n, c_n, f_n, t_n) = (shape[0], shape[1], shape[2], shape[3]);
    Tensor::from_fn(shape, |i| {
        let t = i % t_n;
        let b = i / (c_n * f_n * t_n);
        debug_assert!(b < b_n);
        if t < lengths[b] {
            1.0
        } else {
            0.0
        }
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParamRow {
    pub layer: String,
    /// Weight-matrix and kernel entries.
    pub weights: usize,
    /// Everything, including biases and activation slopes.
    pub total: usize,
}

/// Per-layer real parameter counts.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct ParamTable {
    pub rows: Vec<ParamRow>,
}

impl ParamTable {
    fn add(&mut self, layer: &str, count: usize, is_weight: bool) {
        if self.rows.last().is_none_or(|r| r.layer != layer) {
            self.rows.push(ParamRow {
                layer: layer.to_string(),
                weights: 0,
                total: 0,
            });
        }
        let row = self.rows.last_mut().expect("just pushed");
        row.total += count;
        if is_weight {
            row.weights += count;
        }
    }

    pub fn total(&self) -> usize {
        self.rows.iter().map(|r| r.total).sum()
    }

    pub fn weights(&self) -> usize {
        self.rows.iter().map(|r| r.weights).sum()
    }

    pub fn render(&self) -> String {
        let mut out = format!("{:<10} {:>14} {:>14}\n", "layer", "weights", "total");
        for r in &self.rows {
            out.push_str(&format!("{:<10} {:>14} {:>14}\n", r.layer, r.weights, r.total));
        }
        out.push_str(&format!("{:<10} {:>14} {:>14}\n", "total", self.weights(), self.total()));
        out
    }
}

/// Analytic per-layer counts for a configuration, without allocating it.
pub fn param_count(config: &ModelConfig) -> Result<ParamTable> {
    config.validate()?;
    let w = config.algebra().width();
    // stored entries of an `out x in` weight in units of the algebra
    let matrix = |out_real: usize, in_real: usize| (out_real / w) * (in_real / w) * w;
    let slope = usize::from(config.activation == Activation::Prelu);
    let mut table = ParamTable::default();
    let head_in = if let Some(cc) = &config.conv {
        let area = cc.kernel[0] * cc.kernel[1];
        let mut in_maps = 4;
        let widths = std::iter::once(cc.first_maps).chain(cc.maps.iter().copied());
        for (i, maps) in widths.enumerate() {
            let layer = format!("conv{i}");
            table.add(&layer, matrix(maps, in_maps) * area, true);
            table.add(&layer, maps, false);
            table.add(&layer, slope, false);
            in_maps = maps;
        }
        let mut width = in_maps * pooled_bands(config.input_bands, cc.pool);
        for (i, &units) in cc.dense.iter().enumerate() {
            let layer = format!("dense{i}");
            table.add(&layer, matrix(units, width), true);
            table.add(&layer, units, false);
            table.add(&layer, slope, false);
            width = units;
        }
        width
    } else {
        let rc = config.recurrent.as_ref().expect("validated");
        let mut width = config.input_bands * 4;
        for i in 0..rc.layers {
            let layer = format!("rnn{i}");
            table.add(&layer, matrix(rc.hidden, width), true);
            table.add(&layer, matrix(rc.hidden, rc.hidden), true);
            table.add(&layer, rc.hidden, false);
            if rc.output_projection {
                table.add(&layer, matrix(rc.hidden, rc.hidden), true);
                table.add(&layer, rc.hidden, false);
            }
            width = rc.hidden;
        }
        width
    };
    let k = config.output_classes();
    table.add("head", head_in * k, true);
    table.add("head", k, false);
    table.rows.retain(|r| r.total > 0);
    Ok(table)
}
