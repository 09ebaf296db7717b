//! Acoustic quaternion inputs: log filter-bank energies plus their first,
//! second and third temporal derivatives, one quaternion per band and frame.

mod deltas;
mod io;
mod logmel;

pub use deltas::{compute_deltas, delta_filter, DELTA_WINDOW};
pub use io::{load_csv, load_features, load_qacf, save_csv, save_features, save_qacf, QACF_MAGIC};
pub use logmel::{
    frame_count, hz_to_mel, load_wav, logmel_extract, mel_centers, mel_to_hz, LogMelConfig, LOG_FLOOR,
};

use crate::error::{Error, Result};
use crate::qtensor::QuaternionTensor;
use crate::tensor::Tensor;

/// Log filter-bank energies, stored band-major: `values[f * frames + t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyMatrix {
    bands: usize,
    frames: usize,
    values: Vec<f64>,
    /// Frame shift in seconds, when known.
    pub frame_shift: Option<f64>,
}

impl EnergyMatrix {
    pub fn new(bands: usize, frames: usize, values: Vec<f64>) -> Result<Self> {
        if bands == 0 || frames == 0 {
            return Err(Error::DimensionMismatch(format!(
                "energy matrix must be non-empty, got {bands} x {frames}"
            )));
        }
        if values.len() != bands * frames {
            return Err(Error::DimensionMismatch(format!(
                "{} values for {bands} bands x {frames} frames",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "energy matrix at band {}, frame {}",
                i / frames,
                i % frames
            )));
        }
        Ok(EnergyMatrix {
            bands,
            frames,
            values,
            frame_shift: None,
        })
    }

    pub fn from_fn(bands: usize, frames: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(bands * frames);
        for b in 0..bands {
            for t in 0..frames {
                values.push(f(b, t));
            }
        }
        EnergyMatrix::new(bands, frames, values)
    }

    /// Builds from frame-major rows (`rows[t][f]`).
    pub fn from_frames(rows: &[Vec<f64>]) -> Result<Self> {
        let frames = rows.len();
        let bands = rows.first().map_or(0, Vec::len);
        if let Some((t, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != bands) {
            return Err(Error::DimensionMismatch(format!(
                "frame {t} has {} bands, expected {bands}",
                r.len()
            )));
        }
        EnergyMatrix::from_fn(bands, frames, |b, t| rows[t][b])
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, band: usize, frame: usize) -> f64 {
        self.values[band * self.frames + frame]
    }

    pub fn band(&self, band: usize) -> &[f64] {
        &self.values[band * self.frames..(band + 1) * self.frames]
    }

    /// `[bands, frames]` tensor view.
    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(vec![self.bands, self.frames], self.values.clone()).expect("consistent shape")
    }

    /// Per-band zero mean, unit variance across frames. Constant bands are
    /// only centred.
    pub fn standardized(&self) -> EnergyMatrix {
        let mut out = self.clone();
        for b in 0..self.bands {
            let row = &mut out.values[b * self.frames..(b + 1) * self.frames];
            let n = row.len() as f64;
            let mean = row.iter().sum::<f64>() / n;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let scale = if var > 1e-12 { 1.0 / var.sqrt() } else { 1.0 };
            for v in row.iter_mut() {
                *v = (*v - mean) * scale;
            }
        }
        out
    }
}

/// Packs `(e, Δ, ΔΔ, ΔΔΔ)` into quaternions of shape `[frames, bands]`.
pub fn build_acoustic_quaternions(m: &EnergyMatrix) -> QuaternionTensor {
    let d1 = compute_deltas(m, 1);
    let d2 = compute_deltas(&d1, 1);
    let d3 = compute_deltas(&d2, 1);
    let (f, t) = (m.bands, m.frames);
    let frame_major = |src: &EnergyMatrix| {
        Tensor::from_fn(&[t, f], |i| src.values[(i % f) * t + i / f])
    };
    QuaternionTensor::pack(frame_major(m), frame_major(&d1), frame_major(&d2), frame_major(&d3))
        .expect("blocks share a shape")
}
