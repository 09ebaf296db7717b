use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use quatnet_core::autodiff::Tape;
use quatnet_core::ctc::{ctc_loss_from_logits, FramePosterior};
use quatnet_core::layers::{qconv2d_forward, qdense_forward, Conv2d, Dense, Padding};
use quatnet_core::train::synth::ctc_toy;
use quatnet_core::train::{build_model, prepare, presets, Architecture, Batch};
use quatnet_core::{Algebra, Quaternion, QuaternionTensor, Tensor};

fn lcg(seed: &mut u64) -> f64 {
    *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    ((*seed >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
}

fn quaternions(shape: &[usize], seed: u64) -> QuaternionTensor {
    let mut s = seed;
    QuaternionTensor::from_fn(shape, |_| Quaternion::new(lcg(&mut s), lcg(&mut s), lcg(&mut s), lcg(&mut s)))
}

fn hamilton(c: &mut Criterion) {
    let p = Quaternion::new(0.3, -1.1, 0.7, 2.0);
    let q = Quaternion::new(-0.5, 0.2, 1.3, -0.4);
    c.bench_function("hamilton product", |b| b.iter(|| black_box(p) * black_box(q)));
    c.bench_function("hamilton via matrix", |b| {
        b.iter(|| black_box(p).to_matrix().mul_vec(black_box(q).to_array()))
    });
}

fn dense(c: &mut Criterion) {
    let mut group = c.benchmark_group("dense forward, 32 rows");
    for units in [64usize, 256] {
        let quat = Dense::quaternion(&quaternions(&[units, units], 1), None).unwrap();
        let x = quaternions(&[32, units], 2);
        group.bench_with_input(BenchmarkId::new("quaternion", 4 * units), &units, |b, _| {
            b.iter(|| qdense_forward(&quat, black_box(&x)).unwrap())
        });
        let mut s = 3;
        let w = Tensor::from_fn(&[4 * units, 4 * units], |_| lcg(&mut s));
        let real = Dense::from_tensors(Algebra::Real, w, None).unwrap();
        let xr = x.to_real();
        group.bench_with_input(BenchmarkId::new("real", 4 * units), &units, |b, _| {
            b.iter(|| real.forward_real(black_box(&xr)).unwrap())
        });
    }
    group.finish();
}

fn conv(c: &mut Criterion) {
    let layer = Conv2d::quaternion(&quaternions(&[8, 8, 3, 5], 4), &quaternions(&[8], 5), Padding::Same).unwrap();
    let x = quaternions(&[4, 8, 20, 50], 6);
    c.bench_function("quaternion conv 3x5, 8->8 maps, 20x50", |b| {
        b.iter(|| qconv2d_forward(&layer, black_box(&x)).unwrap())
    });
}

fn ctc(c: &mut Criterion) {
    let (frames, columns) = (200, 62);
    let mut s = 7;
    let logits: Vec<f64> = (0..frames * columns).map(|_| 3.0 * lcg(&mut s)).collect();
    let target: Vec<usize> = (0..60).map(|i| (i * 7) % 61).collect();
    c.bench_function("ctc loss, 200 frames, 61 symbols, 60 labels", |b| {
        b.iter(|| ctc_loss_from_logits(black_box(&logits), frames, columns, &target).unwrap())
    });
    let post = FramePosterior::from_logits(frames, columns - 1, &logits).unwrap();
    c.bench_function("best path decode, 200 frames", |b| {
        b.iter(|| quatnet_core::ctc::best_path_decode(black_box(&post)))
    });
}

fn training_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("toy forward+backward, batch 8");
    for arch in [Architecture::Qcnn, Architecture::Cnn] {
        let config = presets::conv_toy(arch);
        let model = build_model(&config.model).unwrap();
        let data = prepare(&ctc_toy(8, 1), false);
        let items: Vec<_> = data.iter().collect();
        let batch = Batch::assemble(&items, model.layout()).unwrap();
        group.bench_function(format!("{arch:?}"), |b| {
            b.iter(|| {
                let mut tape = Tape::new();
                let vars = model.bind(&mut tape);
                let logits = model.logits(&mut tape, &vars, &batch, None).unwrap();
                let loss = model.loss(&mut tape, logits, &batch).unwrap();
                tape.backward(loss).unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, hamilton, dense, conv, ctc, training_step);
criterion_main!(benches);
