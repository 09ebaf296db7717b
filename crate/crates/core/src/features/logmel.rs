use std::path::Path;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::EnergyMatrix;
use crate::error::{Error, Result};

/// Floor applied before the logarithm.
pub const LOG_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogMelConfig {
    pub window_secs: f64,
    pub shift_secs: f64,
    pub floor: f64,
}

impl Default for LogMelConfig {
    fn default() -> Self {
        LogMelConfig {
            window_secs: 0.025,
            shift_secs: 0.010,
            floor: LOG_FLOOR,
        }
    }
}

impl LogMelConfig {
    fn samples(&self, rate: f64) -> (usize, usize) {
        (
            (self.window_secs * rate).round() as usize,
            (self.shift_secs * rate).round() as usize,
        )
    }
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Filter edges in Hz: `bands + 2` points equally spaced on the mel scale.
fn mel_edges(rate: f64, bands: usize) -> Vec<f64> {
    let top = hz_to_mel(rate / 2.0);
    (0..bands + 2)
        .map(|i| mel_to_hz(top * i as f64 / (bands + 1) as f64))
        .collect()
}

/// Centre frequency (Hz) of each triangular filter.
pub fn mel_centers(rate: f64, bands: usize) -> Vec<f64> {
    mel_edges(rate, bands)[1..=bands].to_vec()
}

/// Number of complete frames in `samples` samples.
pub fn frame_count(samples: usize, window: usize, shift: usize) -> usize {
    if samples < window || shift == 0 {
        0
    } else {
        (samples - window) / shift + 1
    }
}

fn filterbank(rate: f64, bands: usize, n_fft: usize) -> Vec<Vec<f64>> {
    let edges = mel_edges(rate, bands);
    let bins = n_fft / 2 + 1;
    (0..bands)
        .map(|b| {
            let (lo, c, hi) = (edges[b], edges[b + 1], edges[b + 2]);
            (0..bins)
                .map(|k| {
                    let f = k as f64 * rate / n_fft as f64;
                    if f > lo && f <= c {
                        (f - lo) / (c - lo)
                    } else if f > c && f < hi {
                        (hi - f) / (hi - c)
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

/// Log mel filter-bank energies of a mono signal: Hamming-windowed frames,
/// power spectrum, triangular mel filters over `[0, rate / 2]`, natural log
/// with a floor.
pub fn logmel_extract(audio: &[f64], rate: f64, bands: usize, config: &LogMelConfig) -> Result<EnergyMatrix> {
    if !(rate > 0.0) || bands == 0 {
        return Err(Error::InvalidConfig(format!("rate {rate} Hz with {bands} bands")));
    }
    let (window, shift) = config.samples(rate);
    if window == 0 || shift == 0 {
        return Err(Error::InvalidConfig(format!("window of {window} samples, shift {shift}")));
    }
    let frames = frame_count(audio.len(), window, shift);
    if frames == 0 {
        return Err(Error::AudioTooShort {
            samples: audio.len(),
            needed: window,
        });
    }
    let n_fft = window.next_power_of_two();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n_fft);
    let hamming: Vec<f64> = (0..window)
        .map(|n| {
            if window == 1 {
                1.0
            } else {
                0.54 - 0.46 * (2.0 * std::f64::consts::PI * n as f64 / (window - 1) as f64).cos()
            }
        })
        .collect();
    let bank = filterbank(rate, bands, n_fft);
    let mut values = vec![0.0; bands * frames];
    let mut buf = vec![Complex::new(0.0, 0.0); n_fft];
    for t in 0..frames {
        let start = t * shift;
        for (i, slot) in buf.iter_mut().enumerate() {
            let v = if i < window { audio[start + i] * hamming[i] } else { 0.0 };
            *slot = Complex::new(v, 0.0);
        }
        fft.process(&mut buf);
        let power: Vec<f64> = buf[..n_fft / 2 + 1].iter().map(|c| c.norm_sqr()).collect();
        for (b, filter) in bank.iter().enumerate() {
            let e: f64 = filter.iter().zip(&power).map(|(w, p)| w * p).sum();
            values[b * frames + t] = e.max(config.floor).ln();
        }
    }
    let mut m = EnergyMatrix::new(bands, frames, values)?;
    m.frame_shift = Some(shift as f64 / rate);
    Ok(m)
}

/// Reads a 16-bit mono PCM wave file as samples in `[-1, 1)` plus its rate.
pub fn load_wav(path: &Path) -> Result<(Vec<f64>, u32)> {
    let mut reader = hound::WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(io) => Error::Io(io),
        other => Error::UnsupportedAudio(other.to_string()),
    })?;
    let spec = reader.spec();
    if spec.channels != 1 || spec.bits_per_sample != 16 || spec.sample_format != hound::SampleFormat::Int {
        return Err(Error::UnsupportedAudio(format!(
            "{} channel(s), {} bit {:?}; expected 16-bit mono PCM",
            spec.channels, spec.bits_per_sample, spec.sample_format
        )));
    }
    let samples = reader
        .samples::<i16>()
        .map(|s| s.map(|v| v as f64 / 32768.0))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::UnsupportedAudio(e.to_string()))?;
    Ok((samples, spec.sample_rate))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn silence_hits_the_floor() {
        let m = logmel_extract(&[0.0; 800], 16000.0, 5, &LogMelConfig::default()).unwrap();
        assert!(m.values().iter().all(|&v| v == LOG_FLOOR.ln()));
    }

    #[test]
    fn too_short() {
        assert!(matches!(
            logmel_extract(&[0.0; 399], 16000.0, 5, &LogMelConfig::default()),
            Err(Error::AudioTooShort { samples: 399, needed: 400 })
        ));
    }

    #[test]
    fn mel_scale_round_trip() {
        for hz in [0.0, 100.0, 1000.0, 7999.0] {
            assert!((mel_to_hz(hz_to_mel(hz)) - hz).abs() < 1e-9);
        }
    }
}
