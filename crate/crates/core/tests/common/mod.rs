//! Test oracles written from the definitions, independent of the library
//! code they check, plus the shared per-layer gradient checks.
#![allow(dead_code)]

pub mod grads;

use rand::Rng;

/// Hamilton product written out component by component.
pub fn hamilton(a: [f64; 4], b: [f64; 4]) -> [f64; 4] {
    let [r1, x1, y1, z1] = a;
    let [r2, x2, y2, z2] = b;
    [
        r1 * r2 - x1 * x2 - y1 * y2 - z1 * z2,
        r1 * x2 + x1 * r2 + y1 * z2 - z1 * y2,
        r1 * y2 - x1 * z2 + y1 * r2 + z1 * x2,
        r1 * z2 + x1 * y2 - y1 * x2 + z1 * r2,
    ]
}

/// Real 4x4 left-multiplication matrix of a quaternion weight.
pub fn block(w: [f64; 4]) -> [[f64; 4]; 4] {
    let [r, x, y, z] = w;
    [[r, -x, -y, -z], [x, r, -z, y], [y, z, r, -x], [z, -y, x, r]]
}

pub fn block_apply(w: [f64; 4], v: [f64; 4]) -> [f64; 4] {
    let m = block(w);
    let mut out = [0.0; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i] += m[i][j] * v[j];
        }
    }
    out
}

pub fn add4(a: [f64; 4], b: [f64; 4]) -> [f64; 4] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]]
}

pub fn max_diff4(a: [f64; 4], b: [f64; 4]) -> f64 {
    (0..4).map(|k| (a[k] - b[k]).abs()).fold(0.0, f64::max)
}

pub fn random_q<R: Rng>(rng: &mut R, scale: f64) -> [f64; 4] {
    [
        rng.gen_range(-scale..scale),
        rng.gen_range(-scale..scale),
        rng.gen_range(-scale..scale),
        rng.gen_range(-scale..scale),
    ]
}

pub fn random_vec<R: Rng>(rng: &mut R, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-scale..scale)).collect()
}

/// Merge repeats, then drop blanks.
pub fn collapse(path: &[usize], blank: usize) -> Vec<usize> {
    let mut merged: Vec<usize> = Vec::new();
    for &s in path {
        if merged.last() != Some(&s) {
            merged.push(s);
        }
    }
    merged.into_iter().filter(|&s| s != blank).collect()
}

/// `-ln Σ Π p` over every path of `probs` (rows of `columns` entries, blank
/// last) that collapses to `target`. `None` when no path does.
pub fn ctc_enumerate(probs: &[Vec<f64>], target: &[usize]) -> Option<f64> {
    let columns = probs[0].len();
    let blank = columns - 1;
    let frames = probs.len();
    let mut total = 0.0;
    let mut path = vec![0usize; frames];
    loop {
        if collapse(&path, blank) == target {
            total += path.iter().enumerate().map(|(t, &s)| probs[t][s]).product::<f64>();
        }
        let mut t = 0;
        loop {
            if t == frames {
                return (total > 0.0).then(|| -total.ln());
            }
            path[t] += 1;
            if path[t] < columns {
                break;
            }
            path[t] = 0;
            t += 1;
        }
    }
}

pub fn softmax(row: &[f64]) -> Vec<f64> {
    let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = row.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Regression delta as a direct convolution with the kernel
/// `[-N..N] / (2 Σ n²)` over an edge-replicated copy of `x`.
pub fn delta_by_convolution(x: &[f64], window: usize) -> Vec<f64> {
    let n = window as isize;
    let len = x.len() as isize;
    let padded: Vec<f64> = (-n..len + n).map(|i| x[i.clamp(0, len - 1) as usize]).collect();
    let norm: f64 = 2.0 * (1..=n).map(|k| (k * k) as f64).sum::<f64>();
    let kernel: Vec<f64> = (-n..=n).map(|k| k as f64 / norm).collect();
    (0..x.len())
        .map(|t| kernel.iter().enumerate().map(|(j, k)| k * padded[t + j]).sum())
        .collect()
}

/// Fewest edits over every alignment, found by unmemoised recursion.
/// Returns (errors, substitutions) minimal in that order.
pub fn edits_exhaustive(reference: &[usize], hypothesis: &[usize]) -> (usize, usize) {
    match (reference.split_first(), hypothesis.split_first()) {
        (None, None) => (0, 0),
        (Some(_), None) => (reference.len(), 0),
        (None, Some(_)) => (hypothesis.len(), 0),
        (Some((r, rest_r)), Some((h, rest_h))) => {
            let (e, s) = edits_exhaustive(rest_r, rest_h);
            let diag = if r == h { (e, s) } else { (e + 1, s + 1) };
            let (e, s) = edits_exhaustive(rest_r, hypothesis);
            let del = (e + 1, s);
            let (e, s) = edits_exhaustive(reference, rest_h);
            let ins = (e + 1, s);
            diag.min(del).min(ins)
        }
    }
}
