use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::checkpoint::{Checkpoint, TrainState};
use super::config::{Config, HeadKind, ScheduleMetric};
use super::data::{prepare, shuffled_batches, Batch, Dataset, Prepared};
use super::metrics::{edit_distance, error_rate, EditCounts};
use super::model::Model;
use super::optim::{LrSchedule, RmsProp};
use crate::autodiff::Tape;
use crate::ctc::{argmax, decode_rows};
use crate::error::{Error, Result};

/// One line of the metrics log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_loss: f64,
    pub dev_per: f64,
    /// Learning rate used during the epoch.
    pub lr: f64,
}

/// Decoding of one utterance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceResult {
    pub id: String,
    pub reference: Vec<usize>,
    pub hypothesis: Vec<usize>,
    pub loss: f64,
    pub edits: EditCounts,
    /// Frames whose argmax equals the label (framewise head only).
    pub correct_frames: Option<usize>,
}

/// Corpus-level scores of a set of decodings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub loss: f64,
    pub per: f64,
    pub edits: EditCounts,
    pub reference_tokens: usize,
    pub frame_accuracy: Option<f64>,
}

impl Scores {
    pub fn from_results(results: &[UtteranceResult]) -> Scores {
        let mut edits = EditCounts::default();
        let mut tokens = 0;
        let mut loss = 0.0;
        let mut correct = 0;
        let mut framewise = true;
        for r in results {
            edits.add(r.edits);
            tokens += r.reference.len();
            loss += r.loss;
            match r.correct_frames {
                Some(c) => correct += c,
                None => framewise = false,
            }
        }
        let n = results.len().max(1) as f64;
        Scores {
            loss: loss / n,
            per: error_rate(edits, tokens),
            edits,
            reference_tokens: tokens,
            frame_accuracy: (framewise && tokens > 0).then(|| correct as f64 / tokens as f64),
        }
    }
}

fn decode_one(model: &Model, p: &Prepared) -> Result<UtteranceResult> {
    let batch = Batch::assemble(&[p], model.layout())?;
    let mut tape = Tape::new();
    let vars = model.bind(&mut tape);
    let logits = model.logits(&mut tape, &vars, &batch, None)?;
    let loss = model.loss(&mut tape, logits, &batch)?;
    let scores = tape.value(logits);
    let k = scores.last_dim();
    let (hypothesis, correct_frames) = match model.config().head {
        HeadKind::Ctc => (decode_rows(scores.data(), k), None),
        HeadKind::Framewise => {
            let hyp: Vec<usize> = scores.data().chunks(k).map(argmax).collect();
            let correct = hyp.iter().zip(&p.labels).filter(|(h, r)| h == r).count();
            (hyp, Some(correct))
        }
    };
    Ok(UtteranceResult {
        id: p.id.clone(),
        edits: edit_distance(&p.labels, &hypothesis),
        reference: p.labels.clone(),
        hypothesis,
        loss: tape.value(loss).data()[0],
        correct_frames,
    })
}

/// Decodes every utterance on a pool of `threads` workers. The output
/// order, and every value in it, is independent of the thread count.
pub fn decode_all(model: &Model, prepared: &[Prepared], threads: usize) -> Result<Vec<UtteranceResult>> {
    if threads <= 1 {
        return prepared.iter().map(|p| decode_one(model, p)).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    pool.install(|| prepared.par_iter().map(|p| decode_one(model, p)).collect())
}

/// Where a training run writes its artefacts.
#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    /// Receives `metrics.jsonl`, `last.qnn` and `best.qnn`.
    pub out_dir: Option<PathBuf>,
    pub threads: usize,
    /// Overrides the configured epoch count.
    pub epochs: Option<usize>,
}

/// Epoch-level state machine around a model, its optimiser and schedule.
#[derive(Debug, Clone)]
pub struct Trainer {
    config: Config,
    model: Model,
    optimizer: RmsProp,
    schedule: LrSchedule,
    epoch: usize,
    best_epoch: Option<usize>,
    records: Vec<EpochRecord>,
}

impl Trainer {
    pub fn new(config: Config) -> Result<Trainer> {
        config.validate()?;
        let model = Model::build(&config.model)?;
        let t = &config.train;
        Ok(Trainer {
            optimizer: RmsProp::new(t.lr, t.rho, t.eps, t.l2),
            schedule: LrSchedule::new(t.lr, t.halving, t.patience),
            model,
            epoch: 0,
            best_epoch: None,
            records: Vec::new(),
            config,
        })
    }

    /// Continues a run from a checkpoint that carries training state.
    pub fn resume(checkpoint: &Checkpoint) -> Result<Trainer> {
        let state = checkpoint
            .state
            .as_ref()
            .ok_or_else(|| Error::BadCheckpoint("checkpoint has no training state".into()))?;
        let mut trainer = Trainer::new(checkpoint.config.clone())?;
        trainer.model = checkpoint.model()?;
        let shapes_match = checkpoint.accumulators.len() == checkpoint.params.len()
            && checkpoint
                .accumulators
                .iter()
                .zip(&checkpoint.params)
                .all(|(a, (_, p))| a.shape() == p.shape());
        if !checkpoint.accumulators.is_empty() && !shapes_match {
            return Err(Error::BadCheckpoint("optimizer state does not match parameters".into()));
        }
        trainer.optimizer.set_accumulators(checkpoint.accumulators.clone());
        trainer.optimizer.steps = state.steps;
        trainer.schedule = state.schedule.clone();
        trainer.epoch = state.epoch;
        trainer.best_epoch = state.best_epoch;
        trainer.records = state.records.clone();
        Ok(trainer)
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn records(&self) -> &[EpochRecord] {
        &self.records
    }

    pub fn lr(&self) -> f64 {
        self.schedule.lr
    }

    /// Whether the most recent epoch set a new best dev metric.
    pub fn improved(&self) -> bool {
        self.best_epoch.is_some() && self.best_epoch == Some(self.epoch)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::from_model(&self.config, &self.model);
        ck.accumulators = self.optimizer.accumulators().to_vec();
        ck.state = Some(TrainState {
            epoch: self.epoch,
            steps: self.optimizer.steps,
            schedule: self.schedule.clone(),
            best_epoch: self.best_epoch,
            records: self.records.clone(),
        });
        ck
    }

    fn epoch_rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.train.seed);
        rng.set_stream(self.epoch as u64);
        rng
    }

    /// One pass over `train` followed by scoring on `dev`.
    pub fn run_epoch(&mut self, train: &[Prepared], dev: &[Prepared], threads: usize) -> Result<EpochRecord> {
        if train.is_empty() {
            return Err(Error::EmptyDataset("training set".into()));
        }
        if dev.is_empty() {
            return Err(Error::EmptyDataset("dev set".into()));
        }
        let mut rng = self.epoch_rng();
        let lr = self.schedule.lr;
        self.optimizer.lr = lr;
        let layout = self.model.layout();
        let mut total = 0.0;
        for (index, group) in shuffled_batches(train, self.config.train.batch_size, &mut rng)
            .into_iter()
            .enumerate()
        {
            let items: Vec<&Prepared> = group.iter().map(|&i| &train[i]).collect();
            let batch = Batch::assemble(&items, layout)?;
            let mut tape = Tape::new();
            let vars = self.model.bind(&mut tape);
            let logits = self.model.logits(&mut tape, &vars, &batch, Some(&mut rng))?;
            let loss = self.model.loss(&mut tape, logits, &batch)?;
            let value = tape.value(loss).data()[0];
            if !value.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch: self.epoch + 1,
                    batch: index,
                });
            }
            let grads = tape.backward(loss)?;
            let grads: Vec<_> = vars.iter().map(|&v| grads.wrt(v)).collect();
            self.optimizer.step(&mut self.model.params_mut(), &grads)?;
            total += value * batch.len() as f64;
        }
        let dev_scores = Scores::from_results(&decode_all(&self.model, dev, threads)?);
        if !dev_scores.loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                epoch: self.epoch + 1,
                batch: 0,
            });
        }
        self.epoch += 1;
        let metric = match self.config.train.schedule_metric {
            ScheduleMetric::DevPer => dev_scores.per,
            ScheduleMetric::DevLoss => dev_scores.loss,
        };
        let before = self.schedule.best;
        self.schedule.observe(metric);
        if before.is_none_or(|b| metric < b) {
            self.best_epoch = Some(self.epoch);
        }
        let record = EpochRecord {
            epoch: self.epoch,
            train_loss: total / train.len() as f64,
            dev_loss: dev_scores.loss,
            dev_per: dev_scores.per,
            lr,
        };
        self.records.push(record.clone());
        Ok(record)
    }

    /// Runs the remaining epochs, writing artefacts after each one.
    pub fn fit(
        &mut self,
        train: &[Prepared],
        dev: &[Prepared],
        options: &TrainOptions,
        mut on_epoch: impl FnMut(&EpochRecord),
    ) -> Result<()> {
        let epochs = options.epochs.unwrap_or(self.config.train.epochs);
        if let Some(dir) = &options.out_dir {
            fs::create_dir_all(dir)?;
        }
        while self.epoch < epochs {
            let record = self.run_epoch(train, dev, options.threads)?;
            if let Some(dir) = &options.out_dir {
                let mut log = OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(dir.join("metrics.jsonl"))?;
                let line = serde_json::to_string(&record).expect("records serialise");
                writeln!(log, "{line}")?;
                let ck = self.checkpoint();
                if self.improved() {
                    ck.save(&dir.join("best.qnn"))?;
                }
                ck.save(&dir.join("last.qnn"))?;
            }
            on_epoch(&record);
        }
        Ok(())
    }
}

/// Mean loss of `model` over a set, utterance by utterance.
pub fn mean_loss(model: &Model, prepared: &[Prepared], threads: usize) -> Result<f64> {
    Ok(Scores::from_results(&decode_all(model, prepared, threads)?).loss)
}

/// Trains from scratch on `train`, scoring on `dev` after every epoch.
pub fn train(config: &Config, train_set: &Dataset, dev_set: &Dataset, options: &TrainOptions) -> Result<Trainer> {
    config.validate()?;
    let m = &config.model;
    train_set.check(m.input_bands, m.classes, m.head)?;
    dev_set.check(m.input_bands, m.classes, m.head)?;
    let train = prepare(train_set, config.train.standardize);
    let dev = prepare(dev_set, config.train.standardize);
    let mut trainer = Trainer::new(config.clone())?;
    trainer.fit(&train, &dev, options, |_| {})?;
    Ok(trainer)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_loss: f64,
}

/// Evaluation summary of a checkpoint on a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per: f64,
    pub substitutions: usize,
    pub insertions: usize,
    pub deletions: usize,
    pub reference_tokens: usize,
    pub loss: f64,
    pub frame_accuracy: Option<f64>,
    pub param_count: usize,
    pub epoch_losses: Vec<EpochLoss>,
    pub utterances: Vec<UtteranceResult>,
}

pub fn evaluate(checkpoint: &Checkpoint, dataset: &Dataset, threads: usize) -> Result<EvalReport> {
    let model = checkpoint.model()?;
    let m = &checkpoint.config.model;
    dataset.check(m.input_bands, m.classes, m.head)?;
    let prepared = prepare(dataset, checkpoint.config.train.standardize);
    let results = decode_all(&model, &prepared, threads)?;
    let scores = Scores::from_results(&results);
    Ok(EvalReport {
        per: scores.per,
        substitutions: scores.edits.substitutions,
        insertions: scores.edits.insertions,
        deletions: scores.edits.deletions,
        reference_tokens: scores.reference_tokens,
        loss: scores.loss,
        frame_accuracy: scores.frame_accuracy,
        param_count: model.param_count(),
        epoch_losses: checkpoint
            .state
            .iter()
            .flat_map(|s| &s.records)
            .map(|r| EpochLoss {
                epoch: r.epoch,
                train_loss: r.train_loss,
                dev_loss: r.dev_loss,
            })
            .collect(),
        utterances: results,
    })
}
