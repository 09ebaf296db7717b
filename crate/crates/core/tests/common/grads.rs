//! Finite-difference checks of every layer kind, each over `POINTS` random
//! points. Every function returns the worst relative error.

use quatnet_core::autodiff::{grad_check, CtcItem, Elementwise, Tape, Var};
use quatnet_core::layers::{Activation, ActivationLayer, Conv2d, Dense, Padding, ParamCursor, RecurrentCell, SoftmaxHead};
use quatnet_core::{Algebra, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::random_vec;

pub const POINTS: usize = 10;
pub const EPS: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;

fn tensor(rng: &mut ChaCha8Rng, shape: &[usize], scale: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), random_vec(rng, n, scale)).unwrap()
}

/// Scalar probe `Σ c ⊙ y` with fixed irregular `c`, so every output element
/// matters with a different weight.
fn probe(tape: &mut Tape, y: Var) -> Var {
    let shape = tape.value(y).shape().to_vec();
    let c = Tensor::from_fn(&shape, |i| (1.7 * i as f64 + 0.3).sin() + 0.1);
    let weighted = tape.mul_const(y, c).unwrap();
    tape.sum(weighted)
}

fn check_points<M, F>(seed: u64, mut make: M, f: F) -> f64
where
    M: FnMut(&mut ChaCha8Rng) -> Vec<Tensor>,
    F: Fn(&mut Tape, &[Var]) -> quatnet_core::Result<Var>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..POINTS)
        .map(|_| grad_check(&f, &make(&mut rng), EPS).unwrap())
        .fold(0.0, f64::max)
}

pub fn dense() -> f64 {
    let mut init = ChaCha8Rng::seed_from_u64(20);
    let layer = Dense::new("d", Algebra::Quaternion, 3, 2, true, &mut init).unwrap();
    check_points(
        21,
        |rng| vec![tensor(rng, &[2, 12], 1.0), tensor(rng, &[4, 2, 3], 0.5), tensor(rng, &[4, 2], 0.5)],
        |t, v| {
            let mut cursor = ParamCursor::new(&v[1..3]);
            let y = layer.forward(t, &mut cursor, v[0])?;
            let y = t.map(y, Elementwise::Tanh);
            Ok(probe(t, y))
        },
    )
}

/// 3x5 kernel with same padding.
pub fn conv() -> f64 {
    let mut init = ChaCha8Rng::seed_from_u64(22);
    let layer = Conv2d::new("c", Algebra::Quaternion, 1, 2, (3, 5), Padding::Same, &mut init).unwrap();
    check_points(
        23,
        |rng| {
            vec![
                tensor(rng, &[1, 4, 4, 6], 1.0),
                tensor(rng, &[4, 2, 1, 3, 5], 0.3),
                tensor(rng, &[4, 2], 0.3),
            ]
        },
        |t, v| {
            let mut cursor = ParamCursor::new(&v[1..3]);
            let y = layer.forward(t, &mut cursor, v[0])?;
            let y = t.map(y, Elementwise::Sigmoid);
            Ok(probe(t, y))
        },
    )
}

/// Three unrolled steps, batch of two, with an output projection.
pub fn recurrent() -> f64 {
    let mut init = ChaCha8Rng::seed_from_u64(24);
    let cell = RecurrentCell::new("r", Algebra::Quaternion, 2, 2, Elementwise::Tanh, &mut init)
        .unwrap()
        .with_output("r", 1, Elementwise::Identity, &mut init)
        .unwrap();
    let (steps, batch) = (3, 2);
    check_points(
        25,
        |rng| {
            vec![
                tensor(rng, &[steps * batch, 8], 1.0),
                tensor(rng, &[4, 2, 2], 0.5),
                tensor(rng, &[4, 2, 2], 0.5),
                tensor(rng, &[4, 2], 0.5),
                tensor(rng, &[4, 1, 2], 0.5),
                tensor(rng, &[4, 1], 0.5),
            ]
        },
        |t, v| {
            let mut cursor = ParamCursor::new(&v[1..6]);
            let y = cell.forward_sequence(t, &mut cursor, v[0], steps, batch)?;
            Ok(probe(t, y))
        },
    )
}

pub fn activation(kind: Activation) -> f64 {
    let layer = ActivationLayer::new(kind, "a");
    check_points(
        26,
        |rng| {
            // keep clear of the kink at zero
            let x = Tensor::from_fn(&[3, 8], |_| {
                let m: f64 = rng.gen_range(0.05..1.5);
                if rng.gen::<bool>() {
                    m
                } else {
                    -m
                }
            });
            vec![x, Tensor::scalar(rng.gen_range(0.05..0.5))]
        },
        |t, v| {
            let slots = if kind == Activation::Prelu { &v[1..2] } else { &v[1..1] };
            let mut cursor = ParamCursor::new(slots);
            let y = layer.forward(t, &mut cursor, v[0])?;
            Ok(probe(t, y))
        },
    )
}

pub fn activations() -> f64 {
    [Activation::Tanh, Activation::Sigmoid, Activation::Relu, Activation::Prelu]
        .into_iter()
        .map(activation)
        .fold(0.0, f64::max)
}

/// Projection, softmax and masked cross-entropy.
pub fn softmax_head() -> f64 {
    let mut init = ChaCha8Rng::seed_from_u64(27);
    let head = SoftmaxHead::new("h", 8, 5, &mut init).unwrap();
    let targets = [Some(1), None, Some(4), Some(0)];
    let with_loss = check_points(
        28,
        |rng| vec![tensor(rng, &[4, 8], 1.0), tensor(rng, &[5, 8], 0.5), tensor(rng, &[5], 0.5)],
        |t, v| {
            let mut cursor = ParamCursor::new(&v[1..3]);
            let logits = head.logits(t, &mut cursor, v[0])?;
            t.softmax_cross_entropy(logits, &targets)
        },
    );
    let probabilities = check_points(
        29,
        |rng| vec![tensor(rng, &[3, 5], 2.0)],
        |t, v| {
            let p = t.softmax(v[0])?;
            Ok(probe(t, p))
        },
    );
    with_loss.max(probabilities)
}

pub fn ctc() -> f64 {
    let items = [
        CtcItem {
            frames: 5,
            target: vec![0, 2, 2],
        },
        CtcItem {
            frames: 3,
            target: vec![1],
        },
    ];
    check_points(30, |rng| vec![tensor(rng, &[5 * 2, 4], 2.0)], |t, v| t.ctc_loss(v[0], &items))
}

pub fn pooling() -> f64 {
    check_points(
        31,
        |rng| vec![tensor(rng, &[1, 8, 5, 3], 1.0)],
        |t, v| {
            let y = t.maxpool_freq(v[0], 2, Algebra::Quaternion)?;
            Ok(probe(t, y))
        },
    )
}
