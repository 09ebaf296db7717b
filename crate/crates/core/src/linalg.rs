//! Real kernels shared by the layers.
//!
//! Quaternion weights are stored stacked (`[4, out, in, ..]`). Before a
//! product they are expanded into the real block matrix obtained by
//! replacing every weight `w` with `w.to_matrix()`, so block `(a, b)` of the
//! expanded weight is `BLOCK_SIGN[a][b] * w[BLOCK_INDEX[a][b]]`. Gradients of
//! the expanded matrix are folded back through the same table.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

const BLOCK_INDEX: [[usize; 4]; 4] = [[0, 1, 2, 3], [1, 0, 3, 2], [2, 3, 0, 1], [3, 2, 1, 0]];
const BLOCK_SIGN: [[f64; 4]; 4] = [
    [1.0, -1.0, -1.0, -1.0],
    [1.0, 1.0, -1.0, 1.0],
    [1.0, 1.0, 1.0, -1.0],
    [1.0, -1.0, 1.0, 1.0],
];

/// Number system of a layer's weights and activations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algebra {
    Real,
    Quaternion,
}

impl Algebra {
    /// Real values per unit.
    pub fn width(self) -> usize {
        match self {
            Algebra::Real => 1,
            Algebra::Quaternion => 4,
        }
    }

    /// Shape of the expanded real weight for a stored weight shape.
    pub fn expanded_shape(self, stored: &[usize]) -> Result<Vec<usize>> {
        match self {
            Algebra::Real => {
                if stored.len() < 2 {
                    return Err(Error::ShapeMismatch(format!(
                        "real weight needs rank >= 2, got {stored:?}"
                    )));
                }
                Ok(stored.to_vec())
            }
            Algebra::Quaternion => {
                if stored.len() < 3 || stored[0] != 4 {
                    return Err(Error::ShapeMismatch(format!(
                        "quaternion weight must be [4, out, in, ..], got {stored:?}"
                    )));
                }
                let mut s = vec![4 * stored[1], 4 * stored[2]];
                s.extend_from_slice(&stored[3..]);
                Ok(s)
            }
        }
    }

    pub fn expand(self, w: &Tensor) -> Result<Tensor> {
        let shape = self.expanded_shape(w.shape())?;
        if self == Algebra::Real {
            return Ok(w.clone());
        }
        let (o_n, i_n) = (w.shape()[1], w.shape()[2]);
        let tail: usize = w.shape()[3..].iter().product();
        let comp = o_n * i_n * tail;
        let src = w.data();
        let mut out = vec![0.0; 16 * comp];
        let row_len = 4 * i_n * tail;
        for a in 0..4 {
            for o in 0..o_n {
                let dst_row = (a * o_n + o) * row_len;
                for b in 0..4 {
                    let sign = BLOCK_SIGN[a][b];
                    let src_start = BLOCK_INDEX[a][b] * comp + o * i_n * tail;
                    let dst = dst_row + b * i_n * tail;
                    for (d, s) in out[dst..dst + i_n * tail]
                        .iter_mut()
                        .zip(&src[src_start..src_start + i_n * tail])
                    {
                        *d = sign * s;
                    }
                }
            }
        }
        Tensor::new(shape, out)
    }

    /// Accumulates the gradient of an expanded weight into the stored layout.
    pub fn fold_grad(self, g_expanded: &Tensor, stored_shape: &[usize], acc: &mut [f64]) {
        if self == Algebra::Real {
            for (a, g) in acc.iter_mut().zip(g_expanded.data()) {
                *a += g;
            }
            return;
        }
        let (o_n, i_n) = (stored_shape[1], stored_shape[2]);
        let tail: usize = stored_shape[3..].iter().product();
        let comp = o_n * i_n * tail;
        let g = g_expanded.data();
        let row_len = 4 * i_n * tail;
        for a in 0..4 {
            for o in 0..o_n {
                let src_row = (a * o_n + o) * row_len;
                for b in 0..4 {
                    let sign = BLOCK_SIGN[a][b];
                    let dst_start = BLOCK_INDEX[a][b] * comp + o * i_n * tail;
                    let src = src_row + b * i_n * tail;
                    for (d, s) in acc[dst_start..dst_start + i_n * tail]
                        .iter_mut()
                        .zip(&g[src..src + i_n * tail])
                    {
                        *d += sign * s;
                    }
                }
            }
        }
    }
}

/// `y[r, o] = Σ_i x[r, i] · w[o, i]`.
pub fn matmul_nt(x: &[f64], rows: usize, inner: usize, w: &[f64], out: usize) -> Vec<f64> {
    let mut y = vec![0.0; rows * out];
    for r in 0..rows {
        let xr = &x[r * inner..(r + 1) * inner];
        let yr = &mut y[r * out..(r + 1) * out];
        for (o, yv) in yr.iter_mut().enumerate() {
            let wo = &w[o * inner..(o + 1) * inner];
            *yv = dot(xr, wo);
        }
    }
    y
}

/// `dx[r, i] += Σ_o dy[r, o] · w[o, i]`.
pub fn matmul_nn_acc(dy: &[f64], rows: usize, out: usize, w: &[f64], inner: usize, dx: &mut [f64]) {
    for r in 0..rows {
        let dxr = &mut dx[r * inner..(r + 1) * inner];
        for o in 0..out {
            let g = dy[r * out + o];
            if g != 0.0 {
                axpy(g, &w[o * inner..(o + 1) * inner], dxr);
            }
        }
    }
}

/// `dw[o, i] += Σ_r dy[r, o] · x[r, i]`.
pub fn matmul_tn_acc(dy: &[f64], rows: usize, out: usize, x: &[f64], inner: usize, dw: &mut [f64]) {
    for r in 0..rows {
        let xr = &x[r * inner..(r + 1) * inner];
        for o in 0..out {
            let g = dy[r * out + o];
            if g != 0.0 {
                axpy(g, xr, &mut dw[o * inner..(o + 1) * inner]);
            }
        }
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yv, xv) in y.iter_mut().zip(x) {
        *yv += alpha * xv;
    }
}

/// Geometry of a stride-1 2-D cross-correlation over `[batch, ch, h, w]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeometry {
    pub batch: usize,
    pub in_ch: usize,
    pub out_ch: usize,
    pub h: usize,
    pub w: usize,
    pub kh: usize,
    pub kw: usize,
    pub ph: usize,
    pub pw: usize,
}

impl ConvGeometry {
    pub fn out_h(&self) -> usize {
        self.h + 2 * self.ph + 1 - self.kh
    }

    pub fn out_w(&self) -> usize {
        self.w + 2 * self.pw + 1 - self.kw
    }

    /// Output columns `ow` for which `ow + kj - pw` lands inside the input.
    fn col_range(&self, kj: usize) -> (usize, usize) {
        let lo = self.pw.saturating_sub(kj);
        let hi = (self.w + self.pw).saturating_sub(kj).min(self.out_w());
        (lo, hi.max(lo))
    }

    fn input_row(&self, oh: usize, ki: usize) -> Option<usize> {
        let ih = oh + ki;
        (ih >= self.ph && ih - self.ph < self.h).then(|| ih - self.ph)
    }
}

/// `y[b, o, oh, ow] = bias[o] + Σ_{i, ki, kj} w[o, i, ki, kj] · x[b, i, oh + ki - ph, ow + kj - pw]`
/// with zero padding.
pub fn conv2d_forward(x: &[f64], w: &[f64], bias: Option<&[f64]>, g: &ConvGeometry) -> Vec<f64> {
    let (oh_n, ow_n) = (g.out_h(), g.out_w());
    let plane = oh_n * ow_n;
    let mut y = vec![0.0; g.batch * g.out_ch * plane];
    for b in 0..g.batch {
        for o in 0..g.out_ch {
            let yp = &mut y[(b * g.out_ch + o) * plane..(b * g.out_ch + o + 1) * plane];
            if let Some(bias) = bias {
                yp.fill(bias[o]);
            }
            for i in 0..g.in_ch {
                let xp = &x[(b * g.in_ch + i) * g.h * g.w..(b * g.in_ch + i + 1) * g.h * g.w];
                for ki in 0..g.kh {
                    for kj in 0..g.kw {
                        let wv = w[((o * g.in_ch + i) * g.kh + ki) * g.kw + kj];
                        let (lo, hi) = g.col_range(kj);
                        for oh in 0..oh_n {
                            let Some(ih) = g.input_row(oh, ki) else { continue };
                            let xrow = &xp[ih * g.w..(ih + 1) * g.w];
                            let yrow = &mut yp[oh * ow_n..(oh + 1) * ow_n];
                            for ow in lo..hi {
                                yrow[ow] += wv * xrow[ow + kj - g.pw];
                            }
                        }
                    }
                }
            }
        }
    }
    y
}

/// Accumulates input, weight and bias gradients of [`conv2d_forward`].
pub fn conv2d_backward(
    dy: &[f64],
    x: &[f64],
    w: &[f64],
    g: &ConvGeometry,
    dx: Option<&mut [f64]>,
    dw: Option<&mut [f64]>,
    db: Option<&mut [f64]>,
) {
    let (oh_n, ow_n) = (g.out_h(), g.out_w());
    let plane = oh_n * ow_n;
    if let Some(db) = db {
        for b in 0..g.batch {
            for (o, d) in db.iter_mut().enumerate() {
                let start = (b * g.out_ch + o) * plane;
                *d += dy[start..start + plane].iter().sum::<f64>();
            }
        }
    }
    let mut dx = dx;
    let mut dw = dw;
    for b in 0..g.batch {
        for o in 0..g.out_ch {
            let dyp = &dy[(b * g.out_ch + o) * plane..(b * g.out_ch + o + 1) * plane];
            for i in 0..g.in_ch {
                let base = (b * g.in_ch + i) * g.h * g.w;
                for ki in 0..g.kh {
                    for kj in 0..g.kw {
                        let widx = ((o * g.in_ch + i) * g.kh + ki) * g.kw + kj;
                        let wv = w[widx];
                        let (lo, hi) = g.col_range(kj);
                        let mut acc = 0.0;
                        for oh in 0..oh_n {
                            let Some(ih) = g.input_row(oh, ki) else { continue };
                            let dyrow = &dyp[oh * ow_n..(oh + 1) * ow_n];
                            let row = base + ih * g.w;
                            if let Some(dx) = dx.as_deref_mut() {
                                for ow in lo..hi {
                                    dx[row + ow + kj - g.pw] += wv * dyrow[ow];
                                }
                            }
                            for ow in lo..hi {
                                acc += dyrow[ow] * x[row + ow + kj - g.pw];
                            }
                        }
                        if let Some(dw) = dw.as_deref_mut() {
                            dw[widx] += acc;
                        }
                    }
                }
            }
        }
    }
}
