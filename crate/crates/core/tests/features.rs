mod common;

use common::delta_by_convolution;
use proptest::prelude::*;
use quatnet_core::features::{
    build_acoustic_quaternions, compute_deltas, delta_filter, frame_count, load_features, load_qacf,
    load_wav, logmel_extract, save_csv, save_features, save_qacf, EnergyMatrix, LogMelConfig, DELTA_WINDOW,
};
use quatnet_core::ErrorKind;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_matrix(bands: usize, frames: usize, seed: u64) -> EnergyMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    EnergyMatrix::from_fn(bands, frames, |_, _| rng.gen_range(-5.0..5.0)).unwrap()
}

#[test]
fn delta_matches_direct_convolution() {
    let m = random_matrix(5, 20, 1);
    let d = compute_deltas(&m, 1);
    let mut worst: f64 = 0.0;
    for b in 0..5 {
        for (got, want) in d.band(b).iter().zip(delta_by_convolution(m.band(b), DELTA_WINDOW)) {
            worst = worst.max((got - want).abs());
        }
    }
    assert!(worst < 1e-12, "{worst}");
}

#[test]
fn higher_orders_chain_the_filter() {
    let m = random_matrix(3, 15, 2);
    let mut expected: Vec<Vec<f64>> = (0..3).map(|b| m.band(b).to_vec()).collect();
    for order in 1..=3 {
        expected = expected.iter().map(|x| delta_by_convolution(x, 2)).collect();
        let d = compute_deltas(&m, order);
        for (b, e) in expected.iter().enumerate() {
            for (got, want) in d.band(b).iter().zip(e) {
                assert!((got - want).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn constant_signal_has_zero_deltas() {
    let m = EnergyMatrix::from_fn(4, 12, |b, _| b as f64 - 7.5).unwrap();
    for order in 1..=3 {
        assert!(compute_deltas(&m, order).values().iter().all(|&v| v == 0.0));
    }
}

#[test]
fn ramp_has_constant_slope_inside() {
    let ramp: Vec<f64> = (0..20).map(|t| 0.75 * t as f64).collect();
    let d1 = delta_filter(&ramp, 2);
    let d2 = delta_filter(&d1, 2);
    for t in 2..18 {
        assert!((d1[t] - 0.75).abs() < 1e-12);
    }
    for t in 4..16 {
        assert!(d2[t].abs() < 1e-12);
    }
}

#[test]
fn forty_bands_give_160_reals() {
    let m = random_matrix(40, 7, 3);
    let q = build_acoustic_quaternions(&m);
    assert_eq!(q.shape(), &[7, 40]);
    assert_eq!(q.to_real().shape(), &[7, 160]);
}

#[test]
fn packing_unpacks_to_the_delta_orders() {
    let m = random_matrix(6, 11, 4);
    let q = build_acoustic_quaternions(&m);
    let orders = [m.clone(), compute_deltas(&m, 1), compute_deltas(&m, 2), compute_deltas(&m, 3)];
    for t in 0..11 {
        for b in 0..6 {
            let c = q.get(t * 6 + b).to_array();
            for k in 0..4 {
                assert_eq!(c[k].to_bits(), orders[k].get(b, t).to_bits());
            }
        }
    }
}

#[test]
fn one_second_gives_98_frames() {
    assert_eq!(frame_count(16_000, 400, 160), 98);
    let audio = vec![0.01; 16_000];
    let m = logmel_extract(&audio, 16_000.0, 40, &LogMelConfig::default()).unwrap();
    assert_eq!((m.bands(), m.frames()), (40, 98));
}

#[test]
fn short_audio_is_rejected() {
    let err = logmel_extract(&[0.0; 100], 16_000.0, 40, &LogMelConfig::default()).unwrap_err();
    assert_eq!(err.kind(), ErrorKind::Data);
}

/// Centres of `bands` triangles equally spaced on the HTK mel scale over
/// `[0, rate / 2]`.
fn mel_centres(rate: f64, bands: usize) -> Vec<f64> {
    let mel = |f: f64| 2595.0 * (1.0 + f / 700.0).log10();
    let hz = |m: f64| 700.0 * (10f64.powf(m / 2595.0) - 1.0);
    let top = mel(rate / 2.0);
    (1..=bands).map(|i| hz(top * i as f64 / (bands + 1) as f64)).collect()
}

#[test]
fn tone_peaks_in_nearest_band() {
    let rate = 16_000.0;
    let audio: Vec<f64> = (0..16_000)
        .map(|n| 0.5 * (2.0 * std::f64::consts::PI * 1000.0 * n as f64 / rate).sin())
        .collect();
    let m = logmel_extract(&audio, rate, 40, &LogMelConfig::default()).unwrap();
    let centres = mel_centres(rate, 40);
    let nearest = (0..40)
        .min_by(|&a, &b| (centres[a] - 1000.0).abs().total_cmp(&(centres[b] - 1000.0).abs()))
        .unwrap();
    let mean = |b: usize| m.band(b).iter().sum::<f64>() / m.frames() as f64;
    let loudest = (0..40).max_by(|&a, &b| mean(a).total_cmp(&mean(b))).unwrap();
    assert_eq!(loudest, nearest);
}

#[test]
fn wav_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tone.wav");
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: 16_000,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::create(&path, spec).unwrap();
    for n in 0..3200 {
        w.write_sample(((n % 50) as i16 - 25) * 100).unwrap();
    }
    w.finalize().unwrap();
    let (samples, rate) = load_wav(&path).unwrap();
    assert_eq!((samples.len(), rate), (3200, 16_000));
    assert_eq!(samples[0], -2500.0 / 32768.0);
}

#[test]
fn qacf_round_trips_bit_exactly() {
    let m = random_matrix(9, 13, 5);
    let back = load_qacf(&save_qacf(&m)).unwrap();
    assert!(m.values().iter().zip(back.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
    assert_eq!((back.bands(), back.frames()), (9, 13));

    let dir = tempfile::tempdir().unwrap();
    for name in ["m.qacf", "m.csv"] {
        let path = dir.path().join(name);
        save_features(&m, &path).unwrap();
        let back = load_features(&path).unwrap();
        assert!(m.values().iter().zip(back.values()).all(|(a, b)| a.to_bits() == b.to_bits()), "{name}");
    }
    assert!(save_csv(&m).lines().count() == 13);
}

#[test]
fn damaged_qacf_is_rejected() {
    let bytes = save_qacf(&random_matrix(2, 3, 6));
    let mut bad = bytes.clone();
    bad[0] ^= 0xff;
    assert!(load_qacf(&bad).is_err());
    assert!(load_qacf(&bytes[..bytes.len() - 1]).is_err());
    let mut long = bytes;
    long.push(0);
    assert!(load_qacf(&long).is_err());
}

proptest! {
    #[test]
    fn deltas_are_linear(seed in any::<u64>(), a in -3.0..3.0f64, b in -3.0..3.0f64) {
        let m1 = random_matrix(3, 16, seed);
        let m2 = random_matrix(3, 16, seed ^ 0x5555);
        let mix = EnergyMatrix::from_fn(3, 16, |f, t| a * m1.get(f, t) + b * m2.get(f, t)).unwrap();
        for order in 1..=3 {
            let (d, d1, d2) = (compute_deltas(&mix, order), compute_deltas(&m1, order), compute_deltas(&m2, order));
            for f in 0..3 {
                for t in 2 * order..16 - 2 * order {
                    prop_assert!((d.get(f, t) - (a * d1.get(f, t) + b * d2.get(f, t))).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn reversal_negates_first_delta(x in proptest::collection::vec(-10.0..10.0f64, 5..30)) {
        let forward = delta_filter(&x, 2);
        let rev: Vec<f64> = x.iter().rev().cloned().collect();
        let backward = delta_filter(&rev, 2);
        let n = x.len();
        for t in 2..n - 2 {
            prop_assert!((backward[n - 1 - t] + forward[t]).abs() < 1e-12);
        }
    }

    #[test]
    fn csv_text_round_trips(seed in any::<u64>()) {
        let m = random_matrix(4, 5, seed);
        let back = quatnet_core::features::load_csv(&save_csv(&m)).unwrap();
        prop_assert_eq!(back, m);
    }
}
