use crate::ctc;
use crate::error::{Error, Result};
use crate::linalg::{self, Algebra, ConvGeometry};
use crate::tensor::Tensor;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Parameter-free elementwise functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Elementwise {
    Identity,
    Tanh,
    Sigmoid,
    Relu,
}

impl Elementwise {
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Elementwise::Identity => v,
            Elementwise::Tanh => v.tanh(),
            Elementwise::Sigmoid => 1.0 / (1.0 + (-v).exp()),
            Elementwise::Relu => v.max(0.0),
        }
    }
}

/// One utterance in a CTC batch: valid frame count and label sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct CtcItem {
    pub frames: usize,
    pub target: Vec<usize>,
}

#[derive(Debug)]
enum Op {
    Leaf,
    Add(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Sum(Var),
    MulConst(Var, Tensor),
    Linear {
        x: Var,
        w: Var,
        b: Option<Var>,
        algebra: Algebra,
        w_big: Tensor,
    },
    Conv2d {
        x: Var,
        w: Var,
        b: Option<Var>,
        algebra: Algebra,
        w_big: Tensor,
        geom: ConvGeometry,
    },
    Map(Var, Elementwise),
    Prelu { x: Var, slope: Var },
    MaxPool { x: Var, argmax: Vec<usize> },
    MapsToFrames { x: Var, dims: [usize; 4] },
    SliceRows { x: Var, start: usize },
    ConcatRows(Vec<Var>),
    Softmax(Var),
    /// Scalar loss whose gradient with respect to `input` was computed
    /// during the forward pass.
    Fused { input: Var, grad: Tensor },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Dynamic reverse-mode tape. Nodes are appended in evaluation order, so
/// reverse insertion order is a reverse topological order.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn same_shape(&self, a: Var, b: Var, what: &str) -> Result<()> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(Error::ShapeMismatch(format!("{what}: {sa:?} vs {sb:?}")));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "add")?;
        let mut v = self.value(a).clone();
        v.add_assign(self.value(b));
        Ok(self.push(v, Op::Add(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "mul")?;
        let (va, vb) = (self.value(a), self.value(b));
        let data = va.data().iter().zip(vb.data()).map(|(x, y)| x * y).collect();
        let v = Tensor::new(va.shape().to_vec(), data)?;
        Ok(self.push(v, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let v = self.value(a).map(|x| x * s);
        self.push(v, Op::Scale(a, s))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let v = Tensor::scalar(self.value(a).sum());
        self.push(v, Op::Sum(a))
    }

    /// Elementwise product with a constant (masks, dropout, readout weights).
    pub fn mul_const(&mut self, a: Var, c: Tensor) -> Result<Var> {
        let va = self.value(a);
        if va.shape() != c.shape() {
            return Err(Error::ShapeMismatch(format!(
                "mul_const: {:?} vs {:?}",
                va.shape(),
                c.shape()
            )));
        }
        let data = va.data().iter().zip(c.data()).map(|(x, y)| x * y).collect();
        let v = Tensor::new(va.shape().to_vec(), data)?;
        Ok(self.push(v, Op::MulConst(a, c)))
    }

    /// Row-wise affine map `y = x · W_bigᵀ + b` on `x: [rows, in]`, where
    /// `W_big` is the real expansion of `w` under `algebra`.
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>, algebra: Algebra) -> Result<Var> {
        let w_big = algebra.expand(self.value(w))?;
        let (out, inner) = (w_big.shape()[0], w_big.shape()[1]);
        if w_big.rank() != 2 {
            return Err(Error::ShapeMismatch(format!(
                "linear weight must expand to a matrix, got {:?}",
                w_big.shape()
            )));
        }
        let xv = self.value(x);
        if xv.rank() != 2 || xv.shape()[1] != inner {
            return Err(Error::ShapeMismatch(format!(
                "linear input {:?} does not match weight {:?} (in = {inner})",
                xv.shape(),
                self.value(w).shape()
            )));
        }
        let rows = xv.shape()[0];
        let mut y = linalg::matmul_nt(xv.data(), rows, inner, w_big.data(), out);
        if let Some(b) = b {
            let bv = self.value(b);
            if bv.len() != out {
                return Err(Error::ShapeMismatch(format!(
                    "linear bias has {} values, expected {out}",
                    bv.len()
                )));
            }
            for row in y.chunks_mut(out) {
                for (yv, bv) in row.iter_mut().zip(bv.data()) {
                    *yv += bv;
                }
            }
        }
        let v = Tensor::new(vec![rows, out], y)?;
        Ok(self.push(
            v,
            Op::Linear {
                x,
                w,
                b,
                algebra,
                w_big,
            },
        ))
    }

    /// Stride-1 cross-correlation on `x: [batch, in_ch, h, w]` with zero
    /// padding `(ph, pw)`. Weights expand to `[out_ch, in_ch, kh, kw]`.
    pub fn conv2d(
        &mut self,
        x: Var,
        w: Var,
        b: Option<Var>,
        algebra: Algebra,
        padding: (usize, usize),
    ) -> Result<Var> {
        let w_big = algebra.expand(self.value(w))?;
        if w_big.rank() != 4 {
            return Err(Error::ShapeMismatch(format!(
                "conv weight must expand to rank 4, got {:?}",
                w_big.shape()
            )));
        }
        let xv = self.value(x);
        let ws = w_big.shape();
        if xv.rank() != 4 || xv.shape()[1] != ws[1] {
            return Err(Error::ShapeMismatch(format!(
                "conv input {:?} does not match expanded weight {ws:?}",
                xv.shape()
            )));
        }
        let geom = ConvGeometry {
            batch: xv.shape()[0],
            in_ch: ws[1],
            out_ch: ws[0],
            h: xv.shape()[2],
            w: xv.shape()[3],
            kh: ws[2],
            kw: ws[3],
            ph: padding.0,
            pw: padding.1,
        };
        if geom.h + 2 * geom.ph < geom.kh || geom.w + 2 * geom.pw < geom.kw {
            return Err(Error::KernelLargerThanInput {
                kernel: (geom.kh, geom.kw),
                input: (geom.h + 2 * geom.ph, geom.w + 2 * geom.pw),
            });
        }
        let bias = match b {
            Some(b) => {
                let bv = self.value(b);
                if bv.len() != geom.out_ch {
                    return Err(Error::ShapeMismatch(format!(
                        "conv bias has {} values, expected {}",
                        bv.len(),
                        geom.out_ch
                    )));
                }
                Some(bv.data())
            }
            None => None,
        };
        let y = linalg::conv2d_forward(xv.data(), w_big.data(), bias, &geom);
        let v = Tensor::new(vec![geom.batch, geom.out_ch, geom.out_h(), geom.out_w()], y)?;
        Ok(self.push(
            v,
            Op::Conv2d {
                x,
                w,
                b,
                algebra,
                w_big,
                geom,
            },
        ))
    }

    pub fn map(&mut self, x: Var, f: Elementwise) -> Var {
        let v = self.value(x).map(|v| f.apply(v));
        self.push(v, Op::Map(x, f))
    }

    /// `y = x` for `x > 0`, `slope · x` otherwise; `slope` is a single scalar.
    pub fn prelu(&mut self, x: Var, slope: Var) -> Result<Var> {
        if self.value(slope).len() != 1 {
            return Err(Error::ShapeMismatch(format!(
                "prelu slope must be a scalar, got {:?}",
                self.value(slope).shape()
            )));
        }
        let a = self.value(slope).data()[0];
        let v = self.value(x).map(|v| if v > 0.0 { v } else { a * v });
        Ok(self.push(v, Op::Prelu { x, slope }))
    }

    /// Max pooling along axis 2 of `[batch, ch, f, t]` with non-overlapping
    /// windows; a trailing partial window is pooled as is. Under the
    /// quaternion algebra the channel axis holds four component blocks and
    /// whole quaternions are selected by norm.
    pub fn maxpool_freq(&mut self, x: Var, window: usize, algebra: Algebra) -> Result<Var> {
        let xv = self.value(x);
        if xv.rank() != 4 || window == 0 {
            return Err(Error::ShapeMismatch(format!(
                "maxpool expects [batch, ch, f, t] and window > 0, got {:?} / {window}",
                xv.shape()
            )));
        }
        let [b_n, c_n, f_n, t_n] = [xv.shape()[0], xv.shape()[1], xv.shape()[2], xv.shape()[3]];
        let width = algebra.width();
        if c_n % width != 0 {
            return Err(Error::ShapeMismatch(format!(
                "{c_n} channels cannot hold quaternion blocks"
            )));
        }
        let units = c_n / width;
        let fo_n = f_n.div_ceil(window);
        let data = xv.data();
        let idx = |b: usize, c: usize, f: usize, t: usize| ((b * c_n + c) * f_n + f) * t_n + t;
        let out_idx = |b: usize, c: usize, f: usize, t: usize| ((b * c_n + c) * fo_n + f) * t_n + t;
        let mut out = vec![0.0; b_n * c_n * fo_n * t_n];
        let mut argmax = vec![0usize; out.len()];
        for b in 0..b_n {
            for u in 0..units {
                for fo in 0..fo_n {
                    let f_lo = fo * window;
                    let f_hi = (f_lo + window).min(f_n);
                    for t in 0..t_n {
                        let score = |f: usize| -> f64 {
                            (0..width)
                                .map(|k| {
                                    let v = data[idx(b, k * units + u, f, t)];
                                    if width == 1 {
                                        v
                                    } else {
                                        v * v
                                    }
                                })
                                .sum()
                        };
                        let mut best = f_lo;
                        let mut best_score = score(f_lo);
                        for f in f_lo + 1..f_hi {
                            let s = score(f);
                            if s > best_score {
                                best = f;
                                best_score = s;
                            }
                        }
                        for k in 0..width {
                            let c = k * units + u;
                            let src = idx(b, c, best, t);
                            let dst = out_idx(b, c, fo, t);
                            out[dst] = data[src];
                            argmax[dst] = src;
                        }
                    }
                }
            }
        }
        let v = Tensor::new(vec![b_n, c_n, fo_n, t_n], out)?;
        Ok(self.push(v, Op::MaxPool { x, argmax }))
    }

    /// `[batch, ch, f, t]` → `[t · batch, ch · f]`, rows in time-major order.
    /// When the channel axis holds quaternion component blocks the result is
    /// component-blocked along its last axis.
    pub fn maps_to_frames(&mut self, x: Var) -> Result<Var> {
        let xv = self.value(x);
        if xv.rank() != 4 {
            return Err(Error::ShapeMismatch(format!(
                "maps_to_frames expects rank 4, got {:?}",
                xv.shape()
            )));
        }
        let dims = [xv.shape()[0], xv.shape()[1], xv.shape()[2], xv.shape()[3]];
        let [b_n, c_n, f_n, t_n] = dims;
        let mut out = vec![0.0; xv.len()];
        let data = xv.data();
        for b in 0..b_n {
            for c in 0..c_n {
                for f in 0..f_n {
                    for t in 0..t_n {
                        out[(t * b_n + b) * c_n * f_n + c * f_n + f] =
                            data[((b * c_n + c) * f_n + f) * t_n + t];
                    }
                }
            }
        }
        let v = Tensor::new(vec![t_n * b_n, c_n * f_n], out)?;
        Ok(self.push(v, Op::MapsToFrames { x, dims }))
    }

    /// Rows `start..start + len` of a rank-2 value.
    pub fn slice_rows(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let xv = self.value(x);
        if xv.rank() != 2 || start + len > xv.shape()[0] {
            return Err(Error::ShapeMismatch(format!(
                "cannot slice rows {start}..{} of {:?}",
                start + len,
                xv.shape()
            )));
        }
        let cols = xv.shape()[1];
        let v = Tensor::new(
            vec![len, cols],
            xv.data()[start * cols..(start + len) * cols].to_vec(),
        )?;
        Ok(self.push(v, Op::SliceRows { x, start }))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return Err(Error::ShapeMismatch("concat_rows of nothing".into()));
        };
        let cols = self.value(first).last_dim();
        let mut rows = 0;
        let mut data = Vec::new();
        for &p in parts {
            let pv = self.value(p);
            if pv.rank() != 2 || pv.shape()[1] != cols {
                return Err(Error::ShapeMismatch(format!(
                    "concat_rows: {:?} vs {cols} columns",
                    pv.shape()
                )));
            }
            rows += pv.shape()[0];
            data.extend_from_slice(pv.data());
        }
        let v = Tensor::new(vec![rows, cols], data)?;
        Ok(self.push(v, Op::ConcatRows(parts.to_vec())))
    }

    /// Row-wise softmax of a rank-2 value.
    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        let xv = self.value(x);
        if xv.rank() != 2 {
            return Err(Error::ShapeMismatch(format!(
                "softmax expects rank 2, got {:?}",
                xv.shape()
            )));
        }
        let k = xv.shape()[1];
        let mut out = xv.data().to_vec();
        for row in out.chunks_mut(k) {
            softmax_in_place(row);
        }
        let v = Tensor::new(xv.shape().to_vec(), out)?;
        Ok(self.push(v, Op::Softmax(x)))
    }

    /// Mean negative log-likelihood of per-row targets under a softmax over
    /// `logits: [rows, classes]`; rows with `None` are ignored.
    pub fn softmax_cross_entropy(&mut self, logits: Var, targets: &[Option<usize>]) -> Result<Var> {
        let lv = self.value(logits);
        if lv.rank() != 2 || lv.shape()[0] != targets.len() {
            return Err(Error::ShapeMismatch(format!(
                "cross entropy: logits {:?} for {} targets",
                lv.shape(),
                targets.len()
            )));
        }
        let k = lv.shape()[1];
        let count = targets.iter().filter(|t| t.is_some()).count();
        let mut grad = vec![0.0; lv.len()];
        let mut loss = 0.0;
        if count > 0 {
            let norm = 1.0 / count as f64;
            for (r, target) in targets.iter().enumerate() {
                let Some(target) = *target else { continue };
                if target >= k {
                    return Err(Error::ShapeMismatch(format!(
                        "target class {target} out of range for {k} classes"
                    )));
                }
                let row = &lv.data()[r * k..(r + 1) * k];
                let lse = log_sum_exp(row);
                loss -= (row[target] - lse) * norm;
                for (j, g) in grad[r * k..(r + 1) * k].iter_mut().enumerate() {
                    let p = (row[j] - lse).exp();
                    *g = norm * (p - if j == target { 1.0 } else { 0.0 });
                }
            }
        }
        let grad = Tensor::new(lv.shape().to_vec(), grad)?;
        Ok(self.push(Tensor::scalar(loss), Op::Fused { input: logits, grad }))
    }

    /// Mean CTC loss over a batch. `logits` is `[frames · batch, classes + 1]`
    /// in time-major row order with the blank in the last column.
    pub fn ctc_loss(&mut self, logits: Var, items: &[CtcItem]) -> Result<Var> {
        let lv = self.value(logits);
        let batch = items.len();
        if lv.rank() != 2 || batch == 0 || !lv.shape()[0].is_multiple_of(batch) {
            return Err(Error::ShapeMismatch(format!(
                "ctc: logits {:?} for batch of {batch}",
                lv.shape()
            )));
        }
        let k = lv.shape()[1];
        let t_max = lv.shape()[0] / batch;
        let norm = 1.0 / batch as f64;
        let mut grad = vec![0.0; lv.len()];
        let mut loss = 0.0;
        let mut rows = Vec::new();
        for (b, item) in items.iter().enumerate() {
            if item.frames > t_max {
                return Err(Error::ShapeMismatch(format!(
                    "utterance {b} claims {} frames, batch holds {t_max}",
                    item.frames
                )));
            }
            rows.clear();
            for t in 0..item.frames {
                let r = t * batch + b;
                rows.extend_from_slice(&lv.data()[r * k..(r + 1) * k]);
            }
            let (l, g) = ctc::ctc_loss_from_logits(&rows, item.frames, k, &item.target)?;
            loss += l * norm;
            for t in 0..item.frames {
                let r = t * batch + b;
                for (dst, src) in grad[r * k..(r + 1) * k].iter_mut().zip(&g[t * k..(t + 1) * k]) {
                    *dst = src * norm;
                }
            }
        }
        let grad = Tensor::new(lv.shape().to_vec(), grad)?;
        Ok(self.push(Tensor::scalar(loss), Op::Fused { input: logits, grad }))
    }

    /// Gradients of the scalar `loss` with respect to every recorded value.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let root = &self.nodes[loss.0].value;
        if root.len() != 1 {
            return Err(Error::NonScalarLoss(root.shape().to_vec()));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::full(root.shape(), 1.0));
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            self.backward_node(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        let shapes = self.nodes.iter().map(|n| n.value.shape().to_vec()).collect();
        Ok(Gradients { grads, shapes })
    }

    fn backward_node(&self, i: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let node = &self.nodes[i];
        let gd = g.data();
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                add_into(self.acc(grads, *a), gd);
                add_into(self.acc(grads, *b), gd);
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(*a).data().to_vec(), self.value(*b).data().to_vec());
                for ((d, g), v) in self.acc(grads, *a).iter_mut().zip(gd).zip(&vb) {
                    *d += g * v;
                }
                for ((d, g), v) in self.acc(grads, *b).iter_mut().zip(gd).zip(&va) {
                    *d += g * v;
                }
            }
            Op::Scale(a, s) => {
                for (d, g) in self.acc(grads, *a).iter_mut().zip(gd) {
                    *d += g * s;
                }
            }
            Op::Sum(a) => {
                let g0 = gd[0];
                for d in self.acc(grads, *a).iter_mut() {
                    *d += g0;
                }
            }
            Op::MulConst(a, c) => {
                for ((d, g), c) in self.acc(grads, *a).iter_mut().zip(gd).zip(c.data()) {
                    *d += g * c;
                }
            }
            Op::Linear {
                x,
                w,
                b,
                algebra,
                w_big,
            } => {
                let (out, inner) = (w_big.shape()[0], w_big.shape()[1]);
                let xv = self.value(*x);
                let rows = xv.shape()[0];
                linalg::matmul_nn_acc(gd, rows, out, w_big.data(), inner, self.acc(grads, *x));
                let mut g_big = vec![0.0; out * inner];
                linalg::matmul_tn_acc(gd, rows, out, xv.data(), inner, &mut g_big);
                let g_big = Tensor::new(w_big.shape().to_vec(), g_big).expect("weight shape");
                let w_shape = self.value(*w).shape().to_vec();
                algebra.fold_grad(&g_big, &w_shape, self.acc(grads, *w));
                if let Some(b) = b {
                    let db = self.acc(grads, *b);
                    for row in gd.chunks(out) {
                        add_into(db, row);
                    }
                }
            }
            Op::Conv2d {
                x,
                w,
                b,
                algebra,
                w_big,
                geom,
            } => {
                let xv = self.value(*x).data();
                let mut g_big = vec![0.0; w_big.len()];
                let mut db = b.map(|_| vec![0.0; geom.out_ch]);
                linalg::conv2d_backward(
                    gd,
                    xv,
                    w_big.data(),
                    geom,
                    Some(self.acc(grads, *x)),
                    Some(&mut g_big),
                    db.as_deref_mut(),
                );
                let g_big = Tensor::new(w_big.shape().to_vec(), g_big).expect("weight shape");
                let w_shape = self.value(*w).shape().to_vec();
                algebra.fold_grad(&g_big, &w_shape, self.acc(grads, *w));
                if let (Some(b), Some(db)) = (b, db) {
                    add_into(self.acc(grads, *b), &db);
                }
            }
            Op::Map(x, f) => {
                let xv = self.value(*x).data();
                let yv = node.value.data();
                let d = self.acc(grads, *x);
                for j in 0..d.len() {
                    let deriv = match f {
                        Elementwise::Identity => 1.0,
                        Elementwise::Tanh => 1.0 - yv[j] * yv[j],
                        Elementwise::Sigmoid => yv[j] * (1.0 - yv[j]),
                        Elementwise::Relu => {
                            if xv[j] > 0.0 {
                                1.0
                            } else {
                                0.0
                            }
                        }
                    };
                    d[j] += gd[j] * deriv;
                }
            }
            Op::Prelu { x, slope } => {
                let a = self.value(*slope).data()[0];
                let xv = self.value(*x).data();
                let mut da = 0.0;
                let d = self.acc(grads, *x);
                for j in 0..d.len() {
                    if xv[j] > 0.0 {
                        d[j] += gd[j];
                    } else {
                        d[j] += gd[j] * a;
                        da += gd[j] * xv[j];
                    }
                }
                self.acc(grads, *slope)[0] += da;
            }
            Op::MaxPool { x, argmax } => {
                let d = self.acc(grads, *x);
                for (g, &src) in gd.iter().zip(argmax) {
                    d[src] += g;
                }
            }
            Op::MapsToFrames { x, dims } => {
                let [b_n, c_n, f_n, t_n] = *dims;
                let d = self.acc(grads, *x);
                for b in 0..b_n {
                    for c in 0..c_n {
                        for f in 0..f_n {
                            for t in 0..t_n {
                                d[((b * c_n + c) * f_n + f) * t_n + t] +=
                                    gd[(t * b_n + b) * c_n * f_n + c * f_n + f];
                            }
                        }
                    }
                }
            }
            Op::SliceRows { x, start } => {
                let cols = g.last_dim();
                let d = self.acc(grads, *x);
                add_into(&mut d[start * cols..start * cols + gd.len()], gd);
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for p in parts {
                    let n = self.value(*p).len();
                    add_into(self.acc(grads, *p), &gd[offset..offset + n]);
                    offset += n;
                }
            }
            Op::Softmax(x) => {
                let y = node.value.data();
                let k = node.value.last_dim();
                let d = self.acc(grads, *x);
                for r in 0..y.len() / k {
                    let (yr, gr) = (&y[r * k..(r + 1) * k], &gd[r * k..(r + 1) * k]);
                    let s = linalg::dot(yr, gr);
                    for j in 0..k {
                        d[r * k + j] += yr[j] * (gr[j] - s);
                    }
                }
            }
            Op::Fused { input, grad } => {
                let g0 = gd[0];
                for (d, v) in self.acc(grads, *input).iter_mut().zip(grad.data()) {
                    *d += g0 * v;
                }
            }
        }
    }

    /// Zero-initialised accumulator for `v`.
    #[allow(clippy::mut_from_ref)]
    fn acc<'g>(&self, grads: &'g mut [Option<Tensor>], v: Var) -> &'g mut [f64] {
        grads[v.0]
            .get_or_insert_with(|| Tensor::zeros(self.nodes[v.0].value.shape()))
            .data_mut()
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

pub(crate) fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for v in row.iter_mut() {
        *v = (*v - m).exp();
        s += *v;
    }
    for v in row.iter_mut() {
        *v /= s;
    }
}

/// Result of [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient for `v`; zeros when the loss does not depend on it.
    pub fn wrt(&self, v: Var) -> Tensor {
        match &self.grads[v.0] {
            Some(t) => t.clone(),
            None => Tensor::zeros(&self.shapes[v.0]),
        }
    }

    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads[v.0].as_ref()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_gradient_is_twice_w() {
        let mut tape = Tape::new();
        let w = tape.leaf(Tensor::from_vec(vec![1.0, -2.0, 0.5]));
        let sq = tape.mul(w, w).unwrap();
        let loss = tape.sum(sq);
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.wrt(w).data(), &[2.0, -4.0, 1.0]);
    }

    #[test]
    fn unreachable_parameter_gets_zero() {
        let mut tape = Tape::new();
        let w = tape.leaf(Tensor::from_vec(vec![1.0, 2.0]));
        let other = tape.leaf(Tensor::from_vec(vec![3.0]));
        let loss = tape.sum(other);
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.wrt(w).data(), &[0.0, 0.0]);
        assert!(g.get(w).is_none());
    }

    #[test]
    fn non_scalar_root_is_rejected() {
        let mut tape = Tape::new();
        let w = tape.leaf(Tensor::from_vec(vec![1.0, 2.0]));
        assert!(matches!(tape.backward(w), Err(Error::NonScalarLoss(_))));
    }

    #[test]
    fn fan_out_sums_both_paths() {
        // loss = sum(w) + sum(w) → gradient 2 everywhere
        let mut tape = Tape::new();
        let w = tape.leaf(Tensor::from_vec(vec![0.3, 0.7]));
        let s1 = tape.sum(w);
        let s2 = tape.sum(w);
        let loss = tape.add(s1, s2).unwrap();
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.wrt(w).data(), &[2.0, 2.0]);
    }

    #[test]
    fn conv_rejects_oversized_kernel() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::zeros(&[1, 1, 2, 2]));
        let w = tape.leaf(Tensor::zeros(&[1, 1, 3, 5]));
        assert!(matches!(
            tape.conv2d(x, w, None, Algebra::Real, (0, 0)),
            Err(Error::KernelLargerThanInput { .. })
        ));
    }

    #[test]
    fn maxpool_keeps_partial_window() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::new(vec![1, 1, 3, 1], vec![1.0, 5.0, -2.0]).unwrap());
        let y = tape.maxpool_freq(x, 2, Algebra::Real).unwrap();
        assert_eq!(tape.value(y).data(), &[5.0, -2.0]);
    }
}
