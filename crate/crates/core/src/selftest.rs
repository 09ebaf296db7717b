//! Quick numerical health checks, run by the `selftest` subcommand.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{grad_check, CtcItem, Elementwise};
use crate::ctc::{ctc_loss, ctc_loss_bruteforce, FramePosterior};
use crate::error::Result;
use crate::linalg::Algebra;
use crate::quaternion::Quaternion;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed error.
    pub worst: f64,
    pub tolerance: f64,
}

fn random_quaternion(rng: &mut ChaCha8Rng) -> Quaternion {
    Quaternion::new(
        rng.gen_range(-2.0..2.0),
        rng.gen_range(-2.0..2.0),
        rng.gen_range(-2.0..2.0),
        rng.gen_range(-2.0..2.0),
    )
}

fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    Tensor::from_fn(shape, |_| rng.gen_range(-1.0..1.0))
}

fn check(name: &'static str, worst: f64, tolerance: f64) -> CheckResult {
    CheckResult {
        name,
        passed: worst.is_finite() && worst < tolerance,
        worst,
        tolerance,
    }
}

/// Hamilton product against its matrix form.
pub fn algebra_check(pairs: usize, seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..pairs {
        let (p, q) = (random_quaternion(&mut rng), random_quaternion(&mut rng));
        let direct = (p * q).to_array();
        let via = p.to_matrix().mul_vec(q.to_array());
        for k in 0..4 {
            worst = worst.max((direct[k] - via[k]).abs());
        }
    }
    check("hamilton product vs matrix form", worst, 1e-12)
}

/// Finite-difference checks of a quaternion dense layer, a quaternion
/// convolution and an unrolled recurrence.
pub fn gradient_check(seed: u64) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let q = Algebra::Quaternion;
    let x = random_tensor(&mut rng, &[2, 8]);
    let w = random_tensor(&mut rng, &[4, 3, 2]);
    worst = worst.max(grad_check(
        |t, v| {
            let y = t.linear(v[0], v[1], None, q)?;
            let y = t.map(y, Elementwise::Tanh);
            Ok(t.sum(y))
        },
        &[x, w],
        1e-5,
    )?);
    let x = random_tensor(&mut rng, &[1, 4, 4, 6]);
    let w = random_tensor(&mut rng, &[4, 1, 1, 3, 5]);
    let b = random_tensor(&mut rng, &[4, 1]);
    worst = worst.max(grad_check(
        |t, v| {
            let y = t.conv2d(v[0], v[1], Some(v[2]), q, (1, 2))?;
            let y = t.map(y, Elementwise::Sigmoid);
            Ok(t.sum(y))
        },
        &[x, w, b],
        1e-5,
    )?);
    let xs = random_tensor(&mut rng, &[3, 4]);
    let w_in = random_tensor(&mut rng, &[4, 2, 1]);
    let w_hh = random_tensor(&mut rng, &[4, 2, 2]);
    let logits_w = random_tensor(&mut rng, &[3, 8]);
    worst = worst.max(grad_check(
        |t, v| {
            let mut h = t.leaf(Tensor::zeros(&[1, 8]));
            let mut outs = Vec::new();
            for step in 0..3 {
                let x = t.slice_rows(v[0], step, 1)?;
                let a = t.linear(x, v[1], None, q)?;
                let b = t.linear(h, v[2], None, q)?;
                let s = t.add(a, b)?;
                h = t.map(s, Elementwise::Tanh);
                outs.push(h);
            }
            let hs = t.concat_rows(&outs)?;
            let logits = t.linear(hs, v[3], None, Algebra::Real)?;
            t.ctc_loss(
                logits,
                &[CtcItem {
                    frames: 3,
                    target: vec![1],
                }],
            )
        },
        &[xs, w_in, w_hh, logits_w],
        1e-5,
    )?);
    Ok(check("layer gradients vs finite differences", worst, 1e-4))
}

/// Forward-backward CTC against exhaustive path enumeration.
pub fn ctc_check(instances: usize, seed: u64) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < instances {
        let frames = rng.gen_range(1..=6);
        let symbols = rng.gen_range(1..=3);
        let len = rng.gen_range(0..=3usize.min(frames));
        let target: Vec<usize> = (0..len).map(|_| rng.gen_range(0..symbols)).collect();
        let logits: Vec<f64> = (0..frames * (symbols + 1)).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let post = FramePosterior::from_logits(frames, symbols, &logits)?;
        let (Ok(fast), Ok(slow)) = (ctc_loss(&post, &target), ctc_loss_bruteforce(&post, &target)) else {
            continue;
        };
        worst = worst.max((fast.loss - slow).abs());
        done += 1;
    }
    Ok(check("ctc loss vs path enumeration", worst, 1e-10))
}

pub fn run_all(seed: u64) -> Result<Vec<CheckResult>> {
    Ok(vec![
        algebra_check(1000, seed),
        gradient_check(seed)?,
        ctc_check(200, seed)?,
    ])
}

#[cfg(test)]
mod tests {
    #[test]
    fn healthy_build_passes() {
        for r in super::run_all(3).unwrap() {
            assert!(r.passed, "{r:?}");
        }
    }
}
