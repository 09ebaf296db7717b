use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use super::config::HeadKind;
use super::model::InputLayout;
use crate::error::{Error, Result};
use crate::features::{build_acoustic_quaternions, load_features, save_features, EnergyMatrix};
use crate::qtensor::QuaternionTensor;
use crate::tensor::Tensor;

/// One labelled utterance: log energies plus either a label sequence (CTC)
/// or one label per frame (framewise).
#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub id: String,
    pub energies: EnergyMatrix,
    pub labels: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub utterances: Vec<Utterance>,
}

fn parse_labels(text: &str, path: &Path) -> Result<Vec<usize>> {
    text.split_whitespace()
        .map(|tok| {
            tok.parse::<usize>().map_err(|_| {
                Error::DimensionMismatch(format!("{}: label {tok:?} is not a class index", path.display()))
            })
        })
        .collect()
}

impl Dataset {
    pub fn new(utterances: Vec<Utterance>) -> Self {
        Dataset { utterances }
    }

    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    /// Reads every `<id>.qacf` (or `<id>.csv`) in `dir` together with its
    /// `<id>.lab` label file, ordered by id.
    pub fn load_dir(dir: &Path) -> Result<Dataset> {
        let mut feature_files = Vec::new();
        for entry in fs::read_dir(dir)? {
            let path = entry?.path();
            let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
            if ext == "qacf" || ext == "csv" {
                feature_files.push(path);
            }
        }
        feature_files.sort();
        let mut utterances = Vec::with_capacity(feature_files.len());
        for path in feature_files {
            let id = path
                .file_stem()
                .and_then(|s| s.to_str())
                .ok_or_else(|| Error::DimensionMismatch(format!("bad file name {}", path.display())))?
                .to_string();
            let lab = path.with_extension("lab");
            let text = fs::read_to_string(&lab).map_err(|e| {
                Error::DimensionMismatch(format!("missing labels {}: {e}", lab.display()))
            })?;
            utterances.push(Utterance {
                energies: load_features(&path)?,
                labels: parse_labels(&text, &lab)?,
                id,
            });
        }
        Ok(Dataset { utterances })
    }

    pub fn save_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        for u in &self.utterances {
            save_features(&u.energies, &dir.join(format!("{}.qacf", u.id)))?;
            let labels: Vec<String> = u.labels.iter().map(|l| l.to_string()).collect();
            fs::write(dir.join(format!("{}.lab", u.id)), labels.join(" ") + "\n")?;
        }
        Ok(())
    }

    /// Checks band count, label range and (for framewise heads) label length.
    pub fn check(&self, bands: usize, classes: usize, head: HeadKind) -> Result<()> {
        if self.is_empty() {
            return Err(Error::EmptyDataset("no utterances".into()));
        }
        for u in &self.utterances {
            if u.energies.bands() != bands {
                return Err(Error::DimensionMismatch(format!(
                    "{}: {} bands, model expects {bands}",
                    u.id,
                    u.energies.bands()
                )));
            }
            if let Some(&bad) = u.labels.iter().find(|&&l| l >= classes) {
                return Err(Error::DimensionMismatch(format!(
                    "{}: label {bad} outside {classes} classes",
                    u.id
                )));
            }
            match head {
                HeadKind::Framewise if u.labels.len() != u.energies.frames() => {
                    return Err(Error::DimensionMismatch(format!(
                        "{}: {} labels for {} frames",
                        u.id,
                        u.labels.len(),
                        u.energies.frames()
                    )));
                }
                HeadKind::Ctc if u.labels.is_empty() => {
                    return Err(Error::DimensionMismatch(format!("{}: empty target", u.id)));
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// Network-ready utterance: acoustic quaternions `[frames, bands]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub id: String,
    pub quaternions: QuaternionTensor,
    pub labels: Vec<usize>,
}

impl Prepared {
    pub fn frames(&self) -> usize {
        self.quaternions.shape()[0]
    }

    pub fn bands(&self) -> usize {
        self.quaternions.shape()[1]
    }
}

pub fn prepare(dataset: &Dataset, standardize: bool) -> Vec<Prepared> {
    dataset
        .utterances
        .iter()
        .map(|u| {
            let energies = if standardize {
                u.energies.standardized()
            } else {
                u.energies.clone()
            };
            Prepared {
                id: u.id.clone(),
                quaternions: build_acoustic_quaternions(&energies),
                labels: u.labels.clone(),
            }
        })
        .collect()
}

/// Groups utterance indices into batches of similar length.
pub fn length_buckets(prepared: &[Prepared], batch_size: usize) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..prepared.len()).collect();
    order.sort_by_key(|&i| (prepared[i].frames(), i));
    order.chunks(batch_size.max(1)).map(<[usize]>::to_vec).collect()
}

/// Batches in a shuffled order.
pub fn shuffled_batches<R: Rng>(prepared: &[Prepared], batch_size: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let mut batches = length_buckets(prepared, batch_size);
    batches.shuffle(rng);
    batches
}

/// Zero-padded network input for a group of utterances.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub ids: Vec<String>,
    pub lengths: Vec<usize>,
    pub max_frames: usize,
    pub labels: Vec<Vec<usize>>,
    pub layout: InputLayout,
    pub input: Tensor,
}

impl Batch {
    pub fn assemble(items: &[&Prepared], layout: InputLayout) -> Result<Batch> {
        let Some(first) = items.first() else {
            return Err(Error::EmptyDataset("empty batch".into()));
        };
        let bands = first.bands();
        if let Some(p) = items.iter().find(|p| p.bands() != bands) {
            return Err(Error::DimensionMismatch(format!(
                "{} has {} bands, batch has {bands}",
                p.id,
                p.bands()
            )));
        }
        let b_n = items.len();
        let t_max = items.iter().map(|p| p.frames()).max().unwrap_or(0);
        let input = match layout {
            InputLayout::Maps => {
                let mut data = vec![0.0; b_n * 4 * bands * t_max];
                for (b, p) in items.iter().enumerate() {
                    for k in 0..4 {
                        let comp = p.quaternions.component(k).data();
                        for t in 0..p.frames() {
                            for f in 0..bands {
                                data[((b * 4 + k) * bands + f) * t_max + t] = comp[t * bands + f];
                            }
                        }
                    }
                }
                Tensor::new(vec![b_n, 4, bands, t_max], data)?
            }
            InputLayout::Frames => {
                let width = 4 * bands;
                let mut data = vec![0.0; t_max * b_n * width];
                for (b, p) in items.iter().enumerate() {
                    for k in 0..4 {
                        let comp = p.quaternions.component(k).data();
                        for t in 0..p.frames() {
                            let row = (t * b_n + b) * width + k * bands;
                            data[row..row + bands].copy_from_slice(&comp[t * bands..(t + 1) * bands]);
                        }
                    }
                }
                Tensor::new(vec![t_max * b_n, width], data)?
            }
        };
        Ok(Batch {
            ids: items.iter().map(|p| p.id.clone()).collect(),
            lengths: items.iter().map(|p| p.frames()).collect(),
            max_frames: t_max,
            labels: items.iter().map(|p| p.labels.clone()).collect(),
            layout,
            input,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}
