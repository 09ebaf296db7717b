use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::Activation;
use crate::linalg::Algebra;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    Cnn,
    Qcnn,
    Rnn,
    Qrnn,
}

impl Architecture {
    pub fn algebra(self) -> Algebra {
        match self {
            Architecture::Cnn | Architecture::Rnn => Algebra::Real,
            Architecture::Qcnn | Architecture::Qrnn => Algebra::Quaternion,
        }
    }

    pub fn is_convolutional(self) -> bool {
        matches!(self, Architecture::Cnn | Architecture::Qcnn)
    }

    /// The architecture of the other algebra with the same topology.
    pub fn counterpart(self) -> Architecture {
        match self {
            Architecture::Cnn => Architecture::Qcnn,
            Architecture::Qcnn => Architecture::Cnn,
            Architecture::Rnn => Architecture::Qrnn,
            Architecture::Qrnn => Architecture::Rnn,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadKind {
    /// Sequence labels trained with CTC; the blank is an extra last class.
    Ctc,
    /// One label per frame trained with cross-entropy.
    Framewise,
}

/// Convolutional topology. Map counts and dense sizes are real-equivalent:
/// a quaternion layer with 64 here has 16 quaternion maps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvConfig {
    pub first_maps: usize,
    pub maps: Vec<usize>,
    /// `[frequency, time]` extents.
    pub kernel: [usize; 2],
    /// Frequency max-pool window after the first layer.
    pub pool: usize,
    pub dense: Vec<usize>,
}

/// Recurrent topology; `hidden` is real-equivalent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecurrentConfig {
    pub layers: usize,
    pub hidden: usize,
    #[serde(default)]
    pub output_projection: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub arch: Architecture,
    /// Filter-bank bands per frame; the network sees four values per band.
    pub input_bands: usize,
    /// Label classes, excluding the CTC blank.
    pub classes: usize,
    pub head: HeadKind,
    pub activation: Activation,
    #[serde(default)]
    pub dropout: f64,
    #[serde(default)]
    pub init_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conv: Option<ConvConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recurrent: Option<RecurrentConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleMetric {
    DevPer,
    DevLoss,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub halving: f64,
    pub patience: usize,
    pub rho: f64,
    pub eps: f64,
    pub l2: f64,
    pub batch_size: usize,
    /// Per-utterance, per-band standardisation of the log energies.
    pub standardize: bool,
    pub schedule_metric: ScheduleMetric,
    /// Seed for batch order and dropout masks.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 25,
            lr: 8e-4,
            halving: 0.5,
            patience: 1,
            rho: 0.99,
            eps: 1e-8,
            l2: 0.0,
            batch_size: 8,
            standardize: false,
            schedule_metric: ScheduleMetric::DevPer,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainConfig,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidConfig(msg.into())
}

fn check_width(what: &str, width: usize, algebra: Algebra) -> Result<()> {
    if width == 0 {
        return Err(invalid(format!("{what} must be positive")));
    }
    if algebra == Algebra::Quaternion && !width.is_multiple_of(4) {
        return Err(invalid(format!(
            "{what} = {width} is not divisible by 4, as quaternion layers require"
        )));
    }
    Ok(())
}

impl ModelConfig {
    pub fn algebra(&self) -> Algebra {
        self.arch.algebra()
    }

    /// Columns of the output layer.
    pub fn output_classes(&self) -> usize {
        match self.head {
            HeadKind::Ctc => self.classes + 1,
            HeadKind::Framewise => self.classes,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let algebra = self.algebra();
        if self.input_bands == 0 {
            return Err(invalid("input_bands must be positive"));
        }
        if self.output_classes() < 2 {
            return Err(invalid(format!("{} classes leave fewer than 2 outputs", self.classes)));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(invalid(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if self.arch.is_convolutional() {
            let conv = self
                .conv
                .as_ref()
                .ok_or_else(|| invalid(format!("{:?} needs a [model.conv] section", self.arch)))?;
            if self.recurrent.is_some() {
                return Err(invalid("convolutional model with a [model.recurrent] section"));
            }
            check_width("conv.first_maps", conv.first_maps, algebra)?;
            for (i, &m) in conv.maps.iter().enumerate() {
                check_width(&format!("conv.maps[{i}]"), m, algebra)?;
            }
            for (i, &d) in conv.dense.iter().enumerate() {
                check_width(&format!("conv.dense[{i}]"), d, algebra)?;
            }
            if conv.kernel.iter().any(|&k| k == 0 || k % 2 == 0) {
                return Err(invalid(format!("kernel {:?} must have odd positive extents", conv.kernel)));
            }
            if conv.pool == 0 {
                return Err(invalid("pool window must be positive"));
            }
        } else {
            let rec = self
                .recurrent
                .as_ref()
                .ok_or_else(|| invalid(format!("{:?} needs a [model.recurrent] section", self.arch)))?;
            if self.conv.is_some() {
                return Err(invalid("recurrent model with a [model.conv] section"));
            }
            if rec.layers == 0 {
                return Err(invalid("recurrent.layers must be positive"));
            }
            check_width("recurrent.hidden", rec.hidden, algebra)?;
            if self.activation == Activation::Prelu {
                return Err(invalid("recurrent layers take tanh, sigmoid, relu or identity"));
            }
        }
        Ok(())
    }

    /// The same topology in the other algebra.
    pub fn counterpart(&self) -> ModelConfig {
        ModelConfig {
            arch: self.arch.counterpart(),
            ..self.clone()
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(invalid(format!("lr {} must be positive", self.lr)));
        }
        if !(self.halving > 0.0 && self.halving <= 1.0) {
            return Err(invalid(format!("halving factor {} outside (0, 1]", self.halving)));
        }
        if self.patience == 0 {
            return Err(invalid("patience must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(invalid(format!("rho {} outside [0, 1)", self.rho)));
        }
        if !(self.eps > 0.0) {
            return Err(invalid("eps must be positive"));
        }
        if !(self.l2 >= 0.0) {
            return Err(invalid("l2 must be non-negative"));
        }
        if self.batch_size == 0 {
            return Err(invalid("batch_size must be positive"));
        }
        Ok(())
    }
}

impl Config {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()
    }

    pub fn from_toml(text: &str) -> Result<Config> {
        let config: Config = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Canonical text form; `from_toml(to_toml(c)) == c`.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| invalid(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Config> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
        Config::from_toml(&text)
    }
}

/// Reference configurations.
pub mod presets {
    use super::*;

    fn paper_conv(arch: Architecture) -> Config {
        Config {
            model: ModelConfig {
                arch,
                input_bands: 40,
                classes: 61,
                head: HeadKind::Ctc,
                activation: Activation::Prelu,
                dropout: 0.2,
                init_seed: 0,
                conv: Some(ConvConfig {
                    first_maps: 32,
                    maps: vec![32, 32, 64, 64, 128, 128, 256, 256, 256, 256],
                    kernel: [3, 5],
                    pool: 2,
                    dense: vec![1024, 1024, 256],
                }),
                recurrent: None,
            },
            train: TrainConfig {
                epochs: 100,
                l2: 1e-5,
                ..TrainConfig::default()
            },
        }
    }

    fn paper_recurrent(arch: Architecture, hidden: usize) -> Config {
        Config {
            model: ModelConfig {
                arch,
                input_bands: 40,
                classes: 1944,
                head: HeadKind::Framewise,
                activation: Activation::Tanh,
                dropout: 0.2,
                init_seed: 0,
                conv: None,
                recurrent: Some(RecurrentConfig {
                    layers: 4,
                    hidden,
                    output_projection: false,
                }),
            },
            train: TrainConfig {
                epochs: 25,
                ..TrainConfig::default()
            },
        }
    }

    pub fn cnn_paper() -> Config {
        paper_conv(Architecture::Cnn)
    }

    pub fn qcnn_paper() -> Config {
        paper_conv(Architecture::Qcnn)
    }

    pub fn rnn_paper(hidden: usize) -> Config {
        paper_recurrent(Architecture::Rnn, hidden)
    }

    pub fn qrnn_paper(hidden: usize) -> Config {
        paper_recurrent(Architecture::Qrnn, hidden)
    }

    /// Small convolutional CTC model for the synthetic sequence task.
    pub fn conv_toy(arch: Architecture) -> Config {
        Config {
            model: ModelConfig {
                arch,
                input_bands: 8,
                classes: 3,
                head: HeadKind::Ctc,
                activation: Activation::Prelu,
                dropout: 0.2,
                init_seed: 1,
                conv: Some(ConvConfig {
                    first_maps: 16,
                    maps: vec![16, 32],
                    kernel: [3, 5],
                    pool: 2,
                    dense: vec![64],
                }),
                recurrent: None,
            },
            train: TrainConfig {
                epochs: 50,
                patience: 2,
                batch_size: 8,
                schedule_metric: ScheduleMetric::DevLoss,
                seed: 1,
                ..TrainConfig::default()
            },
        }
    }

    /// Small recurrent framewise model for the synthetic frame task.
    pub fn recurrent_toy(arch: Architecture) -> Config {
        Config {
            model: ModelConfig {
                arch,
                input_bands: 8,
                classes: 4,
                head: HeadKind::Framewise,
                activation: Activation::Tanh,
                dropout: 0.2,
                init_seed: 1,
                conv: None,
                recurrent: Some(RecurrentConfig {
                    layers: 2,
                    hidden: 32,
                    output_projection: false,
                }),
            },
            train: TrainConfig {
                epochs: 25,
                patience: 2,
                batch_size: 8,
                schedule_metric: ScheduleMetric::DevLoss,
                seed: 1,
                ..TrainConfig::default()
            },
        }
    }
}
