use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::Param;
use crate::tensor::Tensor;

/// RMSprop with optional L2 decay added to the gradient:
/// `g' = g + λw`, `acc ← ρ acc + (1 - ρ) g'²`, `w ← w - lr g' / (√acc + ε)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RmsProp {
    pub lr: f64,
    pub rho: f64,
    pub eps: f64,
    pub l2: f64,
    pub steps: u64,
    accumulators: Vec<Tensor>,
}

impl RmsProp {
    pub fn new(lr: f64, rho: f64, eps: f64, l2: f64) -> Self {
        RmsProp {
            lr,
            rho,
            eps,
            l2,
            steps: 0,
            accumulators: Vec::new(),
        }
    }

    pub fn accumulators(&self) -> &[Tensor] {
        &self.accumulators
    }

    pub fn set_accumulators(&mut self, acc: Vec<Tensor>) {
        self.accumulators = acc;
    }

    /// One update of `params` with matching `grads`.
    pub fn step(&mut self, params: &mut [&mut Param], grads: &[Tensor]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} parameters, {} gradients",
                params.len(),
                grads.len()
            )));
        }
        if self.accumulators.is_empty() {
            self.accumulators = params.iter().map(|p| Tensor::zeros(p.value.shape())).collect();
        }
        if self.accumulators.len() != params.len() {
            return Err(Error::ShapeMismatch("optimizer state does not match parameters".into()));
        }
        for ((p, g), acc) in params.iter_mut().zip(grads).zip(&mut self.accumulators) {
            if p.value.shape() != g.shape() || acc.shape() != g.shape() {
                return Err(Error::ShapeMismatch(format!(
                    "{}: parameter {:?}, gradient {:?}",
                    p.name,
                    p.value.shape(),
                    g.shape()
                )));
            }
            let decay = if p.decay { self.l2 } else { 0.0 };
            let w = p.value.data_mut();
            for ((w, &g), a) in w.iter_mut().zip(g.data()).zip(acc.data_mut()) {
                let g = g + decay * *w;
                *a = self.rho * *a + (1.0 - self.rho) * g * g;
                *w -= self.lr * g / (a.sqrt() + self.eps);
            }
        }
        self.steps += 1;
        Ok(())
    }
}

/// Multiplies the learning rate by `factor` whenever the monitored dev
/// metric has not strictly improved on its best for `patience` epochs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub initial: f64,
    pub factor: f64,
    pub patience: usize,
    pub lr: f64,
    pub best: Option<f64>,
    pub stale: usize,
    pub halvings: usize,
}

impl LrSchedule {
    pub fn new(initial: f64, factor: f64, patience: usize) -> Self {
        LrSchedule {
            initial,
            factor,
            patience,
            lr: initial,
            best: None,
            stale: 0,
            halvings: 0,
        }
    }

    /// Records one epoch's metric (lower is better) and returns the new rate.
    pub fn observe(&mut self, metric: f64) -> f64 {
        match self.best {
            Some(best) if !(metric < best) => {
                self.stale += 1;
                if self.stale >= self.patience {
                    self.halvings += 1;
                    self.lr *= self.factor;
                    self.stale = 0;
                }
            }
            _ => {
                self.best = Some(metric);
                self.stale = 0;
            }
        }
        self.lr
    }
}

/// Learning rate after replaying a metric history from a fresh schedule.
pub fn lr_schedule_update(initial: f64, factor: f64, patience: usize, history: &[f64]) -> f64 {
    let mut s = LrSchedule::new(initial, factor, patience);
    for &m in history {
        s.observe(m);
    }
    s.lr
}
