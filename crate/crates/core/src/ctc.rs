//! Connectionist temporal classification.
//!
//! Frame posteriors are `[frames, symbols + 1]` matrices whose last column is
//! the blank. The loss is the negative log of the total probability of every
//! frame-level path that collapses onto the target, computed with the
//! log-space forward-backward recursion over the blank-augmented target.

use crate::autodiff::log_sum_exp;
use crate::error::{Error, Result};

/// Largest path count [`ctc_loss_bruteforce`] is willing to enumerate.
pub const BRUTEFORCE_LIMIT: u128 = 10_000_000;

/// Merges adjacent repeats, then drops blanks.
pub fn collapse(path: &[usize], blank: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut prev = None;
    for &s in path {
        if Some(s) != prev && s != blank {
            out.push(s);
        }
        prev = Some(s);
    }
    out
}

/// Minimum number of frames that can emit `target`: one per symbol plus a
/// separating blank between equal neighbours.
pub fn required_frames(target: &[usize]) -> usize {
    target.len() + target.windows(2).filter(|w| w[0] == w[1]).count()
}

/// Per-frame probabilities over `symbols` labels plus the blank.
#[derive(Debug, Clone, PartialEq)]
pub struct FramePosterior {
    frames: usize,
    columns: usize,
    probs: Vec<f64>,
}

impl FramePosterior {
    /// Validates that each row is a distribution with entries in `(0, 1]`.
    pub fn new(frames: usize, symbols: usize, probs: Vec<f64>) -> Result<Self> {
        let columns = symbols + 1;
        if probs.len() != frames * columns {
            return Err(Error::ShapeMismatch(format!(
                "{frames} frames x {columns} columns needs {} values, got {}",
                frames * columns,
                probs.len()
            )));
        }
        for (t, row) in probs.chunks(columns).enumerate() {
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-9 || row.iter().any(|&p| !(p > 0.0 && p <= 1.0)) {
                return Err(Error::DimensionMismatch(format!(
                    "frame {t} is not a distribution with entries in (0, 1] (sum {s})"
                )));
            }
        }
        Ok(FramePosterior {
            frames,
            columns,
            probs,
        })
    }

    /// Row-wise softmax of `[frames, symbols + 1]` logits.
    pub fn from_logits(frames: usize, symbols: usize, logits: &[f64]) -> Result<Self> {
        let columns = symbols + 1;
        if logits.len() != frames * columns {
            return Err(Error::ShapeMismatch(format!(
                "{frames} x {columns} logits expected, got {}",
                logits.len()
            )));
        }
        let mut probs = logits.to_vec();
        for row in probs.chunks_mut(columns) {
            crate::autodiff::softmax_in_place(row);
        }
        Ok(FramePosterior {
            frames,
            columns,
            probs,
        })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn symbols(&self) -> usize {
        self.columns - 1
    }

    pub fn blank(&self) -> usize {
        self.columns - 1
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.probs[t * self.columns..(t + 1) * self.columns]
    }
}

/// Loss and its gradient with respect to the pre-softmax logits.
#[derive(Debug, Clone, PartialEq)]
pub struct CtcLoss {
    pub loss: f64,
    pub grad_logits: Vec<f64>,
}

pub fn ctc_loss(posteriors: &FramePosterior, target: &[usize]) -> Result<CtcLoss> {
    let log_probs: Vec<f64> = posteriors.probs.iter().map(|p| p.ln()).collect();
    let (loss, occupancy) =
        forward_backward(&log_probs, posteriors.frames, posteriors.columns, target)?;
    let grad_logits = posteriors
        .probs
        .iter()
        .zip(&occupancy)
        .map(|(p, o)| p - o)
        .collect();
    Ok(CtcLoss { loss, grad_logits })
}

/// Loss and logit gradient for `[frames, columns]` logits, blank last.
pub fn ctc_loss_from_logits(
    logits: &[f64],
    frames: usize,
    columns: usize,
    target: &[usize],
) -> Result<(f64, Vec<f64>)> {
    let mut log_probs = logits.to_vec();
    for row in log_probs.chunks_mut(columns) {
        let lse = log_sum_exp(row);
        for v in row.iter_mut() {
            *v -= lse;
        }
    }
    let (loss, occupancy) = forward_backward(&log_probs, frames, columns, target)?;
    let grad = log_probs
        .iter()
        .zip(&occupancy)
        .map(|(lp, o)| lp.exp() - o)
        .collect();
    Ok((loss, grad))
}

/// Returns `-log p(target)` and the posterior occupancy of every
/// `(frame, column)` cell.
fn forward_backward(
    log_probs: &[f64],
    frames: usize,
    columns: usize,
    target: &[usize],
) -> Result<(f64, Vec<f64>)> {
    let blank = columns - 1;
    if let Some(&bad) = target.iter().find(|&&s| s >= blank) {
        return Err(Error::ShapeMismatch(format!(
            "label {bad} is not a symbol id (blank is {blank})"
        )));
    }
    let required = required_frames(target);
    if frames < required || frames == 0 {
        return Err(Error::ImpossibleTarget {
            target: target.len(),
            required: required.max(1),
            frames,
        });
    }

    // blank-augmented target: -, l1, -, l2, ..., lL, -
    let ext: Vec<usize> = std::iter::once(blank)
        .chain(target.iter().flat_map(|&s| [s, blank]))
        .collect();
    let s_n = ext.len();
    let lp = |t: usize, c: usize| log_probs[t * columns + c];
    let skip_ok = |s: usize| s >= 2 && ext[s] != blank && ext[s] != ext[s - 2];
    let neg = f64::NEG_INFINITY;

    let mut alpha = vec![neg; frames * s_n];
    alpha[0] = lp(0, ext[0]);
    if s_n > 1 {
        alpha[1] = lp(0, ext[1]);
    }
    for t in 1..frames {
        for s in 0..s_n {
            let prev = &alpha[(t - 1) * s_n..t * s_n];
            let mut terms = [prev[s], neg, neg];
            if s >= 1 {
                terms[1] = prev[s - 1];
            }
            if skip_ok(s) {
                terms[2] = prev[s - 2];
            }
            alpha[t * s_n + s] = log_sum_exp(&terms) + lp(t, ext[s]);
        }
    }

    let mut beta = vec![neg; frames * s_n];
    let last = (frames - 1) * s_n;
    beta[last + s_n - 1] = lp(frames - 1, ext[s_n - 1]);
    if s_n > 1 {
        beta[last + s_n - 2] = lp(frames - 1, ext[s_n - 2]);
    }
    for t in (0..frames - 1).rev() {
        for s in 0..s_n {
            let next = &beta[(t + 1) * s_n..(t + 2) * s_n];
            let mut terms = [next[s], neg, neg];
            if s + 1 < s_n {
                terms[1] = next[s + 1];
            }
            if s + 2 < s_n && skip_ok(s + 2) {
                terms[2] = next[s + 2];
            }
            beta[t * s_n + s] = log_sum_exp(&terms) + lp(t, ext[s]);
        }
    }

    let tail = &alpha[last..last + s_n];
    let log_likelihood = if s_n > 1 {
        log_sum_exp(&[tail[s_n - 1], tail[s_n - 2]])
    } else {
        tail[0]
    };
    if !log_likelihood.is_finite() {
        return Err(Error::ImpossibleTarget {
            target: target.len(),
            required,
            frames,
        });
    }

    let mut occupancy = vec![0.0; frames * columns];
    for t in 0..frames {
        for s in 0..s_n {
            let a = alpha[t * s_n + s] + beta[t * s_n + s];
            if a == neg {
                continue;
            }
            occupancy[t * columns + ext[s]] += (a - lp(t, ext[s]) - log_likelihood).exp();
        }
    }
    Ok((-log_likelihood, occupancy))
}

/// Exact loss by enumerating every path; test oracle for [`ctc_loss`].
pub fn ctc_loss_bruteforce(posteriors: &FramePosterior, target: &[usize]) -> Result<f64> {
    let (t_n, k) = (posteriors.frames, posteriors.columns);
    let total = (k as u128).checked_pow(t_n as u32).unwrap_or(u128::MAX);
    if total > BRUTEFORCE_LIMIT {
        return Err(Error::TooLarge(total));
    }
    let mut path = vec![0usize; t_n];
    let mut sum = 0.0;
    for mut code in 0..total {
        let mut p = 1.0;
        for (t, slot) in path.iter_mut().enumerate() {
            *slot = (code % k as u128) as usize;
            code /= k as u128;
            p *= posteriors.row(t)[*slot];
        }
        if collapse(&path, k - 1) == target {
            sum += p;
        }
    }
    if sum == 0.0 {
        return Err(Error::ImpossibleTarget {
            target: target.len(),
            required: target.len(),
            frames: t_n,
        });
    }
    Ok(-sum.ln())
}

/// Per-frame argmax (lowest id wins ties) followed by [`collapse`].
pub fn best_path_decode(posteriors: &FramePosterior) -> Vec<usize> {
    decode_rows(&posteriors.probs, posteriors.columns)
}

/// [`best_path_decode`] over raw `[frames, columns]` scores (probabilities or
/// logits), blank last.
pub fn decode_rows(rows: &[f64], columns: usize) -> Vec<usize> {
    let path: Vec<usize> = rows.chunks(columns).map(argmax).collect();
    collapse(&path, columns - 1)
}

pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = j;
        }
    }
    best
}
