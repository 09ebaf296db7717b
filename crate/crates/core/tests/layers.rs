mod common;

use common::grads::{self, TOLERANCE};
use common::{add4, hamilton, max_diff4, random_q};
use quatnet_core::autodiff::Elementwise;
use quatnet_core::layers::{
    dropout, maxpool_freq, qconv2d_forward, qdense_forward, quaternion_init, qrnn_output, qrnn_step,
    split_activation, Activation, Conv2d, Dense, InitSpec, Padding, RecurrentCell,
};
use quatnet_core::{Algebra, Quaternion, QuaternionTensor, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn qt(rng: &mut ChaCha8Rng, shape: &[usize]) -> QuaternionTensor {
    QuaternionTensor::from_fn(shape, |_| Quaternion::from_array(random_q(rng, 1.0)))
}

// ---- forward oracles --------------------------------------------------------

#[test]
fn dense_matches_hamilton_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (batch, inq, outq) = (3, 5, 4);
    let w = qt(&mut rng, &[outq, inq]);
    let b = qt(&mut rng, &[outq]);
    let x = qt(&mut rng, &[batch, inq]);
    let layer = Dense::quaternion(&w, Some(&b)).unwrap();
    let y = qdense_forward(&layer, &x).unwrap();
    assert_eq!(y.shape(), &[batch, outq]);
    for bi in 0..batch {
        for n in 0..outq {
            let mut acc = b.get(n).to_array();
            for m in 0..inq {
                acc = add4(acc, hamilton(w.get(n * inq + m).to_array(), x.get(bi * inq + m).to_array()));
            }
            assert!(max_diff4(acc, y.get(bi * outq + n).to_array()) < 1e-12);
        }
    }
}

#[test]
fn dense_equals_real_layer_with_block_matrix() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (inq, outq) = (3, 2);
    let w = qt(&mut rng, &[outq, inq]);
    let x = qt(&mut rng, &[2, inq]);
    // real weight in the r|x|y|z blocked layout on both sides
    let mut big = Tensor::zeros(&[4 * outq, 4 * inq]);
    for n in 0..outq {
        for m in 0..inq {
            let blk = common::block(w.get(n * inq + m).to_array());
            for (k, row) in blk.iter().enumerate() {
                for (l, v) in row.iter().enumerate() {
                    big.data_mut()[(k * outq + n) * 4 * inq + l * inq + m] = *v;
                }
            }
        }
    }
    let real = Dense::from_tensors(Algebra::Real, big, None).unwrap();
    let quat = Dense::quaternion(&w, None).unwrap();
    let via_real = real.forward_real(&x.to_real()).unwrap();
    let via_quat = qdense_forward(&quat, &x).unwrap().to_real();
    assert!(via_real.max_abs_diff(&via_quat) < 1e-12);
    // same function, a quarter of the stored reals
    assert_eq!(quat.weight().len() * 4, real.weight().len());
}

#[test]
fn identity_weight_passes_input_through() {
    let w = QuaternionTensor::from_quaternions(&[1, 1], &[Quaternion::ONE]).unwrap();
    let q = Quaternion::new(0.3, -1.2, 2.5, 0.7);
    let x = QuaternionTensor::from_quaternions(&[1, 1], &[q]).unwrap();
    let y = qdense_forward(&Dense::quaternion(&w, None).unwrap(), &x).unwrap();
    assert_eq!(y.get(0), q);
}

#[test]
fn dense_rejects_wrong_width() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let layer = Dense::quaternion(&qt(&mut rng, &[2, 3]), None).unwrap();
    assert!(qdense_forward(&layer, &qt(&mut rng, &[1, 4])).is_err());
}

fn conv_oracle(w: &QuaternionTensor, b: &QuaternionTensor, x: &QuaternionTensor, pad: (usize, usize)) -> Vec<[f64; 4]> {
    let [om, im, kh, kw] = [w.shape()[0], w.shape()[1], w.shape()[2], w.shape()[3]];
    let [batch, _, h, wd] = [x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]];
    let oh = h + 2 * pad.0 + 1 - kh;
    let ow = wd + 2 * pad.1 + 1 - kw;
    let mut out = Vec::new();
    for bi in 0..batch {
        for o in 0..om {
            for i in 0..oh {
                for j in 0..ow {
                    let mut acc = b.get(o).to_array();
                    for c in 0..im {
                        for u in 0..kh {
                            for v in 0..kw {
                                let (si, sj) = ((i + u) as isize - pad.0 as isize, (j + v) as isize - pad.1 as isize);
                                if si < 0 || sj < 0 || si >= h as isize || sj >= wd as isize {
                                    continue;
                                }
                                let xi = ((bi * im + c) * h + si as usize) * wd + sj as usize;
                                let wi = ((o * im + c) * kh + u) * kw + v;
                                acc = add4(acc, hamilton(w.get(wi).to_array(), x.get(xi).to_array()));
                            }
                        }
                    }
                    out.push(acc);
                }
            }
        }
    }
    out
}

#[test]
fn conv_matches_direct_hamilton_correlation() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for (padding, pad) in [(Padding::Same, (1, 2)), (Padding::Valid, (0, 0))] {
        let w = qt(&mut rng, &[3, 2, 3, 5]);
        let b = qt(&mut rng, &[3]);
        let x = qt(&mut rng, &[2, 2, 5, 7]);
        let layer = Conv2d::quaternion(&w, &b, padding).unwrap();
        let y = qconv2d_forward(&layer, &x).unwrap();
        let expected = conv_oracle(&w, &b, &x, pad);
        assert_eq!(y.len(), expected.len());
        for (i, e) in expected.iter().enumerate() {
            assert!(max_diff4(y.get(i).to_array(), *e) < 1e-12);
        }
    }
}

#[test]
fn same_padding_keeps_extent() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let layer = Conv2d::quaternion(&qt(&mut rng, &[2, 1, 3, 5]), &qt(&mut rng, &[2]), Padding::Same).unwrap();
    let y = qconv2d_forward(&layer, &qt(&mut rng, &[1, 1, 6, 9])).unwrap();
    assert_eq!(y.shape(), &[1, 2, 6, 9]);
}

#[test]
fn pointwise_conv_is_dense_per_pixel() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (inm, outm, h, wd) = (3, 2, 2, 3);
    let w = qt(&mut rng, &[outm, inm, 1, 1]);
    let b = qt(&mut rng, &[outm]);
    let x = qt(&mut rng, &[1, inm, h, wd]);
    let conv = Conv2d::quaternion(&w, &b, Padding::Valid).unwrap();
    let y = qconv2d_forward(&conv, &x).unwrap();
    let dw = QuaternionTensor::from_quaternions(&[outm, inm], &w.to_vec()).unwrap();
    let dense = Dense::quaternion(&dw, Some(&b)).unwrap();
    for p in 0..h * wd {
        let pixel: Vec<Quaternion> = (0..inm).map(|c| x.get(c * h * wd + p)).collect();
        let px = QuaternionTensor::from_quaternions(&[1, inm], &pixel).unwrap();
        let d = qdense_forward(&dense, &px).unwrap();
        for o in 0..outm {
            assert!(max_diff4(d.get(o).to_array(), y.get(o * h * wd + p).to_array()) < 1e-12);
        }
    }
}

#[test]
fn kernel_larger_than_input_is_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let layer = Conv2d::quaternion(&qt(&mut rng, &[1, 1, 3, 5]), &qt(&mut rng, &[1]), Padding::Valid).unwrap();
    assert!(qconv2d_forward(&layer, &qt(&mut rng, &[1, 1, 2, 2])).is_err());
}

#[test]
fn recurrent_step_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (hidden, inq, outq) = (3, 2, 2);
    let w_hh = qt(&mut rng, &[hidden, hidden]);
    let w_in = qt(&mut rng, &[hidden, inq]);
    let bias = qt(&mut rng, &[hidden]);
    let w_out = qt(&mut rng, &[outq, hidden]);
    let b_out = qt(&mut rng, &[outq]);
    let cell = RecurrentCell::quaternion(&w_hh, &w_in, &bias, Elementwise::Tanh)
        .unwrap()
        .with_quaternion_output(&w_out, &b_out, Elementwise::Identity)
        .unwrap();
    let mut h = QuaternionTensor::zeros(&[hidden]);
    let mut h_ref = vec![[0.0; 4]; hidden];
    for _ in 0..3 {
        let x = qt(&mut rng, &[inq]);
        h = qrnn_step(&cell, &h, &x).unwrap();
        let next: Vec<[f64; 4]> = (0..hidden)
            .map(|n| {
                let mut acc = bias.get(n).to_array();
                for m in 0..hidden {
                    acc = add4(acc, hamilton(w_hh.get(n * hidden + m).to_array(), h_ref[m]));
                }
                for m in 0..inq {
                    acc = add4(acc, hamilton(w_in.get(n * inq + m).to_array(), x.get(m).to_array()));
                }
                acc.map(f64::tanh)
            })
            .collect();
        h_ref = next;
        assert_eq!(h.shape(), &[hidden]);
        for n in 0..hidden {
            assert!(max_diff4(h.get(n).to_array(), h_ref[n]) < 1e-12);
        }
    }
    let y = qrnn_output(&cell, &h).unwrap();
    for o in 0..outq {
        let mut acc = b_out.get(o).to_array();
        for m in 0..hidden {
            acc = add4(acc, hamilton(w_out.get(o * hidden + m).to_array(), h_ref[m]));
        }
        assert!(max_diff4(y.get(o).to_array(), acc) < 1e-12);
    }
}

#[test]
fn split_activation_is_componentwise() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let q = qt(&mut rng, &[5]);
    let y = split_activation(&q, f64::tanh);
    for i in 0..5 {
        assert_eq!(y.get(i).to_array(), q.get(i).to_array().map(f64::tanh));
    }
}

#[test]
fn freq_pool_keeps_whole_quaternions() {
    let small = Quaternion::new(1.0, 1.0, 0.0, 0.0);
    let big = Quaternion::new(0.0, 0.0, 0.0, -3.0);
    // [batch 1, maps 1, f 4, t 1]
    let x = QuaternionTensor::from_quaternions(&[1, 1, 4, 1], &[small, big, big * 0.1, small]).unwrap();
    let y = maxpool_freq(&x, 2).unwrap();
    assert_eq!(y.shape(), &[1, 1, 2, 1]);
    assert_eq!(y.get(0), big);
    assert_eq!(y.get(1), small);
}

#[test]
fn dropout_removes_whole_quaternions() {
    let x = QuaternionTensor::from_fn(&[20_000], |_| Quaternion::new(1.0, 2.0, 3.0, 4.0));
    let y = dropout(&x, 0.2, true, 11).unwrap();
    let mut kept = 0usize;
    for q in y.to_vec() {
        let c = q.to_array();
        if c == [0.0; 4] {
            continue;
        }
        kept += 1;
        assert!(max_diff4(c, [1.25, 2.5, 3.75, 5.0]) < 1e-12);
    }
    let n = 20_000.0;
    let sd = (n * 0.8 * 0.2f64).sqrt();
    assert!((kept as f64 - 0.8 * n).abs() < 3.0 * sd, "kept {kept}");
    assert_eq!(dropout(&x, 0.2, false, 11).unwrap(), x);
}

#[test]
fn polar_init_statistics() {
    let (fan_in, fan_out) = (30, 50);
    let spec = InitSpec::polar(fan_in, fan_out, 17);
    let w = quaternion_init(&spec, &[400, 250]).unwrap();
    assert!(w.is_finite());
    let n = w.len() as f64;
    let mean_sq: f64 = w.to_vec().iter().map(|q| q.norm_squared()).sum::<f64>() / n;
    // Rayleigh scale sigma gives E|w|² = 2 sigma²
    let sigma = 1.0 / (2.0 * (fan_in + fan_out) as f64).sqrt();
    let expected = 2.0 * sigma * sigma;
    assert!((mean_sq / expected - 1.0).abs() < 0.05, "{mean_sq} vs {expected}");
    assert_eq!(w, quaternion_init(&spec, &[400, 250]).unwrap());
}

// ---- gradients --------------------------------------------------------------

#[test]
fn dense_gradients() {
    let worst = grads::dense();
    assert!(worst < TOLERANCE, "{worst}");
}

#[test]
fn conv_gradients() {
    let worst = grads::conv();
    assert!(worst < TOLERANCE, "{worst}");
}

#[test]
fn recurrent_gradients_through_three_steps() {
    let worst = grads::recurrent();
    assert!(worst < TOLERANCE, "{worst}");
}

#[test]
fn activation_gradients() {
    for kind in [Activation::Tanh, Activation::Sigmoid, Activation::Relu, Activation::Prelu] {
        let worst = grads::activation(kind);
        assert!(worst < TOLERANCE, "{kind:?}: {worst}");
    }
}

#[test]
fn softmax_head_gradients() {
    let worst = grads::softmax_head();
    assert!(worst < TOLERANCE, "{worst}");
}

#[test]
fn ctc_gradients() {
    let worst = grads::ctc();
    assert!(worst < TOLERANCE, "{worst}");
}

#[test]
fn pooling_gradients() {
    let worst = grads::pooling();
    assert!(worst < TOLERANCE, "{worst}");
}
