use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::Config;
use super::model::Model;
use super::optim::LrSchedule;
use super::trainer::EpochRecord;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"QNNCKPT1";
pub const FORMAT_VERSION: u32 = 1;

/// Optimiser and schedule state needed to continue a run exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    /// Completed epochs.
    pub epoch: usize,
    pub steps: u64,
    pub schedule: LrSchedule,
    pub best_epoch: Option<usize>,
    pub records: Vec<EpochRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct BlockInfo {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    seed: u64,
    config: Config,
    params: Vec<BlockInfo>,
    accumulators: Vec<BlockInfo>,
    state: Option<TrainState>,
}

/// Model parameters, optionally with the state of the run that produced
/// them. Layout: magic, `u32` LE manifest length, JSON manifest, then every
/// block as LE `f64` in manifest order (parameters, then accumulators).
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: Config,
    pub params: Vec<(String, Tensor)>,
    pub accumulators: Vec<Tensor>,
    pub state: Option<TrainState>,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::BadCheckpoint(msg.into())
}

impl Checkpoint {
    pub fn from_model(config: &Config, model: &Model) -> Checkpoint {
        Checkpoint {
            config: config.clone(),
            params: model
                .params()
                .into_iter()
                .map(|p| (p.name.clone(), p.value.clone()))
                .collect(),
            accumulators: Vec::new(),
            state: None,
        }
    }

    /// Rebuilds the model and loads the stored parameters into it.
    pub fn model(&self) -> Result<Model> {
        let mut model = Model::build(&self.config.model)?;
        let mut slots = model.params_mut();
        if slots.len() != self.params.len() {
            return Err(bad(format!(
                "{} stored parameters, configuration declares {}",
                self.params.len(),
                slots.len()
            )));
        }
        for (slot, (name, value)) in slots.iter_mut().zip(&self.params) {
            if &slot.name != name || slot.value.shape() != value.shape() {
                return Err(bad(format!(
                    "stored {name} {:?} does not match {} {:?}",
                    value.shape(),
                    slot.name,
                    slot.value.shape()
                )));
            }
            slot.value = value.clone();
        }
        Ok(model)
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        let info = |name: &str, t: &Tensor| BlockInfo {
            name: name.to_string(),
            shape: t.shape().to_vec(),
        };
        let manifest = Manifest {
            format_version: FORMAT_VERSION,
            seed: self.config.model.init_seed,
            config: self.config.clone(),
            params: self.params.iter().map(|(n, t)| info(n, t)).collect(),
            accumulators: self
                .accumulators
                .iter()
                .zip(&self.params)
                .map(|(t, (n, _))| info(n, t))
                .collect(),
            state: self.state.clone(),
        };
        let json = serde_json::to_vec(&manifest).map_err(|e| bad(e.to_string()))?;
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        for t in self.params.iter().map(|(_, t)| t).chain(&self.accumulators) {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Checkpoint> {
        if bytes.len() < 8 || &bytes[..8] != CHECKPOINT_MAGIC {
            return Err(Error::BadMagic { expected: "QNNCKPT1" });
        }
        if bytes.len() < 12 {
            return Err(bad("truncated header"));
        }
        let len = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
        let json = bytes.get(12..12 + len).ok_or_else(|| bad("truncated manifest"))?;
        let manifest: Manifest = serde_json::from_slice(json).map_err(|e| bad(e.to_string()))?;
        if manifest.format_version != FORMAT_VERSION {
            return Err(bad(format!("unsupported format version {}", manifest.format_version)));
        }
        manifest.config.validate().map_err(|e| bad(e.to_string()))?;
        let mut body = &bytes[12 + len..];
        let mut read = |info: &BlockInfo| -> Result<Tensor> {
            let n: usize = info.shape.iter().product();
            if body.len() < 8 * n {
                return Err(bad(format!("block {} is truncated", info.name)));
            }
            let (head, rest) = body.split_at(8 * n);
            body = rest;
            let data = head
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            Tensor::new(info.shape.clone(), data)
        };
        let mut params = Vec::with_capacity(manifest.params.len());
        for info in &manifest.params {
            params.push((info.name.clone(), read(info)?));
        }
        let mut accumulators = Vec::with_capacity(manifest.accumulators.len());
        for info in &manifest.accumulators {
            accumulators.push(read(info)?);
        }
        if !body.is_empty() {
            return Err(bad(format!("{} trailing bytes", body.len())));
        }
        Ok(Checkpoint {
            config: manifest.config,
            params,
            accumulators,
            state: manifest.state,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.encode()?;
        // write then rename so an interrupted save never leaves a torn file
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, bytes)?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let bytes = fs::read(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
        Checkpoint::decode(&bytes)
    }
}
