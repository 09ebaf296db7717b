//! Small synthetic corpora for desk-scale training runs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::data::{Dataset, Utterance};
use crate::features::EnergyMatrix;

pub const TOY_BANDS: usize = 8;
pub const CTC_TOY_SYMBOLS: usize = 3;
pub const FRAME_TOY_CLASSES: usize = 4;

const SILENCE: f64 = -1.0;
const CTC_NOISE: f64 = 0.5;
const FRAME_NOISE: f64 = 0.8;

/// Log-energy profile of a class: a bump centred on one band.
fn prototype(class: usize, classes: usize) -> Vec<f64> {
    let centre = 0.5 + (TOY_BANDS - 1) as f64 * (class as f64 + 0.5) / classes as f64;
    (0..TOY_BANDS)
        .map(|f| SILENCE + 3.0 * (-((f as f64 - centre).powi(2)) / 2.0).exp())
        .collect()
}

fn emit(frames: &mut Vec<Vec<f64>>, profile: &[f64], count: usize, sigma: f64, rng: &mut ChaCha8Rng) {
    let noise = Normal::new(0.0, sigma).expect("valid sigma");
    for _ in 0..count {
        frames.push(profile.iter().map(|v| v + noise.sample(rng)).collect());
    }
}

fn silence() -> Vec<f64> {
    vec![SILENCE; TOY_BANDS]
}

/// Sequences of 1 to 3 symbols, each a few frames of its prototype with
/// silence around and between them.
pub fn ctc_toy(utterances: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let protos: Vec<Vec<f64>> = (0..CTC_TOY_SYMBOLS).map(|s| prototype(s, CTC_TOY_SYMBOLS)).collect();
    let mut out = Vec::with_capacity(utterances);
    for n in 0..utterances {
        let len = rng.gen_range(1..=3);
        let labels: Vec<usize> = (0..len).map(|_| rng.gen_range(0..CTC_TOY_SYMBOLS)).collect();
        let mut frames = Vec::new();
        let lead = rng.gen_range(2..=4);
        emit(&mut frames, &silence(), lead, CTC_NOISE, &mut rng);
        for (i, &s) in labels.iter().enumerate() {
            if i > 0 {
                let gap = rng.gen_range(1..=3);
                emit(&mut frames, &silence(), gap, CTC_NOISE, &mut rng);
            }
            let dur = rng.gen_range(3..=6);
            emit(&mut frames, &protos[s], dur, CTC_NOISE, &mut rng);
        }
        let tail = rng.gen_range(2..=4);
        emit(&mut frames, &silence(), tail, CTC_NOISE, &mut rng);
        out.push(Utterance {
            id: format!("ctc{n:04}"),
            energies: EnergyMatrix::from_frames(&frames).expect("finite toy frames"),
            labels,
        });
    }
    Dataset::new(out)
}

/// Per-frame classes from a sticky Markov chain over class prototypes.
pub fn framewise_toy(utterances: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let protos: Vec<Vec<f64>> = (0..FRAME_TOY_CLASSES)
        .map(|c| prototype(c, FRAME_TOY_CLASSES))
        .collect();
    let mut out = Vec::with_capacity(utterances);
    for n in 0..utterances {
        let frames_n = rng.gen_range(20..=40);
        let mut state = rng.gen_range(0..FRAME_TOY_CLASSES);
        let mut labels = Vec::with_capacity(frames_n);
        let mut frames = Vec::with_capacity(frames_n);
        for _ in 0..frames_n {
            if rng.gen::<f64>() < 0.15 {
                state = (state + rng.gen_range(1..FRAME_TOY_CLASSES)) % FRAME_TOY_CLASSES;
            }
            labels.push(state);
            emit(&mut frames, &protos[state], 1, FRAME_NOISE, &mut rng);
        }
        out.push(Utterance {
            id: format!("frm{n:04}"),
            energies: EnergyMatrix::from_frames(&frames).expect("finite toy frames"),
            labels,
        });
    }
    Dataset::new(out)
}
