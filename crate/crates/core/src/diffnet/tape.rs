use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::loss::{evidential_cell, softmax_ce_cell};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::evidential::SubjectiveLogicConfig;
use crate::real::Real;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Largest evidence the head emits.
pub const EVIDENCE_CAP: f64 = 1e6;

#[derive(Debug, Clone)]
enum Op<T> {
    Leaf,
    Conv2d { x: Var, w: Var, b: Option<Var>, stride: usize, pad: usize },
    ConvTranspose2d { x: Var, w: Var, b: Option<Var>, stride: usize, pad: usize },
    LeakyRelu { x: Var, slope: T },
    /// Element-wise product with a constant (dropout masks, loss weights).
    Scale { x: Var, factor: Tensor<T> },
    Concat { a: Var, b: Var },
    /// Sum over all elements.
    Sum { x: Var },
    /// Scalar loss whose gradient with respect to `x` was computed in the
    /// forward pass.
    Loss { x: Var, grad: Tensor<T> },
    /// Element-wise op with a stored local derivative.
    Pointwise { x: Var, deriv: Tensor<T> },
}

#[derive(Debug, Clone)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
}

/// Records a forward computation for one reverse sweep.
#[derive(Debug, Clone, Default)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

/// Output indices `j < iter_len` with `0 <= j*s + k - p < target_len`.
fn valid(k: usize, p: usize, s: usize, target_len: usize, iter_len: usize) -> (usize, usize) {
    let (k, p, s, t) = (k as isize, p as isize, s as isize, target_len as isize);
    let lo = if p > k { (p - k + s - 1) / s } else { 0 };
    let hi = if t - 1 + p - k < 0 { 0 } else { (t - 1 + p - k) / s + 1 };
    let lo = lo.clamp(0, iter_len as isize) as usize;
    let hi = hi.clamp(0, iter_len as isize) as usize;
    (lo, hi.max(lo))
}

fn conv_out(len: usize, k: usize, s: usize, p: usize) -> Option<usize> {
    (len + 2 * p).checked_sub(k).map(|v| v / s + 1)
}

fn conv_t_out(len: usize, k: usize, s: usize, p: usize) -> Option<usize> {
    ((len - 1) * s + k).checked_sub(2 * p).filter(|&v| v > 0)
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, t: Tensor<T>) -> Var {
        self.push(t, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    fn check_bias(&self, b: Option<Var>, channels: usize) -> Result<()> {
        match b {
            Some(b) if self.value(b).len() != channels => {
                Err(Error::Shape(format!("bias has {} values for {channels} channels", self.value(b).len())))
            }
            _ => Ok(()),
        }
    }

    /// 2-D convolution; weight layout `[out, in, kh, kw]`.
    pub fn conv2d(&mut self, x: Var, w: Var, b: Option<Var>, stride: usize, pad: usize) -> Result<Var> {
        let [n, ci, h, wd] = self.value(x).shape();
        let [co, wi, kh, kw] = self.value(w).shape();
        if wi != ci || stride == 0 {
            return Err(Error::Shape(format!("conv weight expects {wi} input channels, got {ci}")));
        }
        self.check_bias(b, co)?;
        let (Some(oh), Some(ow)) = (conv_out(h, kh, stride, pad), conv_out(wd, kw, stride, pad)) else {
            return Err(Error::Shape(format!("kernel {kh}x{kw} larger than padded input {h}x{wd}")));
        };
        let xv = self.value(x).data();
        let wv = self.value(w).data();
        let mut out = Tensor::zeros([n, co, oh, ow]);
        let od = out.data_mut();
        for bn in 0..n {
            for o in 0..co {
                let op = &mut od[(bn * co + o) * oh * ow..][..oh * ow];
                if let Some(b) = b {
                    let bv = self.nodes[b.0].value.data()[o];
                    op.iter_mut().for_each(|v| *v = bv);
                }
                for i in 0..ci {
                    let xp = &xv[(bn * ci + i) * h * wd..][..h * wd];
                    for ky in 0..kh {
                        let (y0, y1) = valid(ky, pad, stride, h, oh);
                        for kx in 0..kw {
                            let (x0, x1) = valid(kx, pad, stride, wd, ow);
                            let k = wv[((o * ci + i) * kh + ky) * kw + kx];
                            for oy in y0..y1 {
                                let iy = oy * stride + ky - pad;
                                let orow = &mut op[oy * ow..][..ow];
                                let xrow = &xp[iy * wd..][..wd];
                                for ox in x0..x1 {
                                    orow[ox] += k * xrow[ox * stride + kx - pad];
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(self.push(out, Op::Conv2d { x, w, b, stride, pad }))
    }

    /// Transposed convolution; weight layout `[in, out, kh, kw]`.
    pub fn conv_transpose2d(&mut self, x: Var, w: Var, b: Option<Var>, stride: usize, pad: usize) -> Result<Var> {
        let [n, ci, h, wd] = self.value(x).shape();
        let [wi, co, kh, kw] = self.value(w).shape();
        if wi != ci || stride == 0 || h == 0 || wd == 0 {
            return Err(Error::Shape(format!("transposed conv weight expects {wi} input channels, got {ci}")));
        }
        self.check_bias(b, co)?;
        let (Some(oh), Some(ow)) = (conv_t_out(h, kh, stride, pad), conv_t_out(wd, kw, stride, pad)) else {
            return Err(Error::Shape("transposed conv output would be empty".into()));
        };
        let xv = self.value(x).data();
        let wv = self.value(w).data();
        let mut out = Tensor::zeros([n, co, oh, ow]);
        let od = out.data_mut();
        for bn in 0..n {
            for o in 0..co {
                let op = &mut od[(bn * co + o) * oh * ow..][..oh * ow];
                if let Some(b) = b {
                    let bv = self.nodes[b.0].value.data()[o];
                    op.iter_mut().for_each(|v| *v = bv);
                }
                for i in 0..ci {
                    let xp = &xv[(bn * ci + i) * h * wd..][..h * wd];
                    for ky in 0..kh {
                        let (y0, y1) = valid(ky, pad, stride, oh, h);
                        for kx in 0..kw {
                            let (x0, x1) = valid(kx, pad, stride, ow, wd);
                            let k = wv[((i * co + o) * kh + ky) * kw + kx];
                            for iy in y0..y1 {
                                let oy = iy * stride + ky - pad;
                                let orow = &mut op[oy * ow..][..ow];
                                let xrow = &xp[iy * wd..][..wd];
                                for ix in x0..x1 {
                                    orow[ix * stride + kx - pad] += k * xrow[ix];
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(self.push(out, Op::ConvTranspose2d { x, w, b, stride, pad }))
    }

    pub fn leaky_relu(&mut self, x: Var, slope: T) -> Var {
        let t = self.value(x);
        let out = Tensor::from_fn(t.shape(), |i| {
            let v = t.data()[i];
            if v > T::zero() {
                v
            } else {
                v * slope
            }
        });
        self.push(out, Op::LeakyRelu { x, slope })
    }

    /// Multiplies element-wise by a constant tensor of the same shape.
    pub fn scale(&mut self, x: Var, factor: Tensor<T>) -> Result<Var> {
        let t = self.value(x);
        if t.shape() != factor.shape() {
            return Err(Error::Shape(format!("scale factor {:?} vs input {:?}", factor.shape(), t.shape())));
        }
        let out = Tensor::from_fn(t.shape(), |i| t.data()[i] * factor.data()[i]);
        Ok(self.push(out, Op::Scale { x, factor }))
    }

    /// Inverted dropout: zeroes each element with probability `rate` and
    /// rescales survivors by `1 / (1 - rate)`.
    pub fn dropout(&mut self, x: Var, rate: f64, rng: &mut ChaCha8Rng) -> Result<Var> {
        if rate <= 0.0 {
            return Ok(x);
        }
        if rate >= 1.0 {
            return Err(Error::Config("dropout rate must be below 1".into()));
        }
        let keep = T::of(1.0 / (1.0 - rate));
        let mask = Tensor::from_fn(self.value(x).shape(), |_| if rng.random::<f64>() < rate { T::zero() } else { keep });
        self.scale(x, mask)
    }

    /// Concatenates along channels.
    pub fn concat(&mut self, a: Var, b: Var) -> Result<Var> {
        let [n, ca, h, w] = self.value(a).shape();
        let [nb, cb, hb, wb] = self.value(b).shape();
        if (n, h, w) != (nb, hb, wb) {
            return Err(Error::Shape(format!("cannot concat {:?} and {:?}", [n, ca, h, w], [nb, cb, hb, wb])));
        }
        let hw = h * w;
        let mut data = Vec::with_capacity(n * (ca + cb) * hw);
        for bn in 0..n {
            data.extend_from_slice(&self.value(a).data()[bn * ca * hw..][..ca * hw]);
            data.extend_from_slice(&self.value(b).data()[bn * cb * hw..][..cb * hw]);
        }
        let out = Tensor::new([n, ca + cb, h, w], data)?;
        Ok(self.push(out, Op::Concat { a, b }))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().copied().sum();
        self.push(Tensor::scalar(s), Op::Sum { x })
    }

    /// Quadratic evidence activation `min(y², cap)`.
    pub fn evidence(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let cap = T::of(EVIDENCE_CAP);
        let mut out = Tensor::zeros(t.shape());
        let mut deriv = Tensor::zeros(t.shape());
        for (i, &y) in t.data().iter().enumerate() {
            let e = y * y;
            if e < cap {
                out.data_mut()[i] = e;
                deriv.data_mut()[i] = y + y;
            } else {
                out.data_mut()[i] = cap;
            }
        }
        self.push(out, Op::Pointwise { x, deriv })
    }

    fn targets_match(&self, x: Var, channels: usize, targets: &[[f64; 3]]) -> Result<[usize; 4]> {
        let s = self.value(x).shape();
        if s[1] != channels || s[0] * s[2] * s[3] != targets.len() {
            return Err(Error::Shape(format!("{} targets for output {s:?}", targets.len())));
        }
        Ok(s)
    }

    /// Mean over cells of `-Σ t_k ln p_k` with `p = softmax(logits)` over
    /// three channels.
    pub fn softmax_ce(&mut self, logits: Var, targets: &[[f64; 3]]) -> Result<Var> {
        let [n, _, h, w] = self.targets_match(logits, 3, targets)?;
        let hw = h * w;
        let cells = (n * hw) as f64;
        let z = self.value(logits);
        let mut grad = Tensor::zeros(z.shape());
        let mut total = 0.0;
        for bn in 0..n {
            for j in 0..hw {
                let idx = |c: usize| (bn * 3 + c) * hw + j;
                let zz = [z.data()[idx(0)].f64(), z.data()[idx(1)].f64(), z.data()[idx(2)].f64()];
                let (l, g) = softmax_ce_cell(zz, targets[bn * hw + j]);
                total += l;
                for c in 0..3 {
                    grad.data_mut()[idx(c)] = T::of(g[c] / cells);
                }
            }
        }
        Ok(self.push(Tensor::scalar(T::of(total / cells)), Op::Loss { x: logits, grad }))
    }

    /// Mean over cells of the evidential risk of two-class evidence.
    pub fn evidential_loss(&mut self, evidence: Var, targets: &[[f64; 3]], cfg: &SubjectiveLogicConfig) -> Result<Var> {
        if cfg.classes() != 2 {
            return Err(Error::Config("evidential loss needs a two-class configuration".into()));
        }
        let a = [cfg.base_rate()[0], cfg.base_rate()[1]];
        let [n, _, h, w] = self.targets_match(evidence, 2, targets)?;
        let hw = h * w;
        let cells = (n * hw) as f64;
        let e = self.value(evidence);
        let mut grad = Tensor::zeros(e.shape());
        let mut total = 0.0;
        for bn in 0..n {
            for j in 0..hw {
                let i0 = (bn * 2) * hw + j;
                let i1 = (bn * 2 + 1) * hw + j;
                let (l, g) = evidential_cell([e.data()[i0].f64(), e.data()[i1].f64()], targets[bn * hw + j], a);
                total += l;
                grad.data_mut()[i0] = T::of(g[0] / cells);
                grad.data_mut()[i1] = T::of(g[1] / cells);
            }
        }
        Ok(self.push(Tensor::scalar(T::of(total / cells)), Op::Loss { x: evidence, grad }))
    }

    /// Gradients of the scalar `out` with respect to every recorded value.
    pub fn backward(&self, out: Var) -> Gradients<T> {
        let mut g: Vec<Option<Tensor<T>>> = vec![None; self.nodes.len()];
        g[out.0] = Some(Tensor::full(self.value(out).shape(), T::one()));
        for i in (0..=out.0).rev() {
            let Some(dy) = g[i].take() else { continue };
            match &self.nodes[i].op {
                Op::Leaf => {}
                &Op::Conv2d { x, w, b, stride, pad } => {
                    let (dx, dw) = self.conv2d_backward(x, w, &dy, stride, pad);
                    acc(&mut g, x, dx);
                    acc(&mut g, w, dw);
                    if let Some(b) = b {
                        acc(&mut g, b, bias_grad(&dy, self.value(b).shape()));
                    }
                }
                &Op::ConvTranspose2d { x, w, b, stride, pad } => {
                    let (dx, dw) = self.conv_t_backward(x, w, &dy, stride, pad);
                    acc(&mut g, x, dx);
                    acc(&mut g, w, dw);
                    if let Some(b) = b {
                        acc(&mut g, b, bias_grad(&dy, self.value(b).shape()));
                    }
                }
                &Op::LeakyRelu { x, slope } => {
                    let xv = self.value(x);
                    let dx = Tensor::from_fn(xv.shape(), |k| {
                        if xv.data()[k] > T::zero() {
                            dy.data()[k]
                        } else {
                            dy.data()[k] * slope
                        }
                    });
                    acc(&mut g, x, dx);
                }
                Op::Scale { x, factor } => {
                    let dx = Tensor::from_fn(factor.shape(), |k| dy.data()[k] * factor.data()[k]);
                    acc(&mut g, *x, dx);
                }
                Op::Pointwise { x, deriv } => {
                    let dx = Tensor::from_fn(deriv.shape(), |k| dy.data()[k] * deriv.data()[k]);
                    acc(&mut g, *x, dx);
                }
                &Op::Concat { a, b } => {
                    let [n, ca, h, w] = self.value(a).shape();
                    let cb = self.value(b).shape()[1];
                    let hw = h * w;
                    let mut da = Vec::with_capacity(n * ca * hw);
                    let mut db = Vec::with_capacity(n * cb * hw);
                    for bn in 0..n {
                        let base = bn * (ca + cb) * hw;
                        da.extend_from_slice(&dy.data()[base..][..ca * hw]);
                        db.extend_from_slice(&dy.data()[base + ca * hw..][..cb * hw]);
                    }
                    acc(&mut g, a, Tensor::new([n, ca, h, w], da).expect("shape"));
                    acc(&mut g, b, Tensor::new([n, cb, h, w], db).expect("shape"));
                }
                &Op::Sum { x } => {
                    acc(&mut g, x, Tensor::full(self.value(x).shape(), dy.item()));
                }
                Op::Loss { x, grad } => {
                    acc(&mut g, *x, grad.scaled(dy.item()));
                }
            }
            g[i] = Some(dy);
        }
        Gradients { grads: g }
    }

    fn conv2d_backward(&self, x: Var, w: Var, dy: &Tensor<T>, stride: usize, pad: usize) -> (Tensor<T>, Tensor<T>) {
        let xt = self.value(x);
        let wt = self.value(w);
        let [n, ci, h, wd] = xt.shape();
        let [co, _, kh, kw] = wt.shape();
        let [_, _, oh, ow] = dy.shape();
        let mut dx = Tensor::zeros(xt.shape());
        let mut dw = Tensor::zeros(wt.shape());
        for bn in 0..n {
            for o in 0..co {
                let gp = &dy.data()[(bn * co + o) * oh * ow..][..oh * ow];
                for i in 0..ci {
                    let xo = (bn * ci + i) * h * wd;
                    for ky in 0..kh {
                        let (y0, y1) = valid(ky, pad, stride, h, oh);
                        for kx in 0..kw {
                            let (x0, x1) = valid(kx, pad, stride, wd, ow);
                            let wi = ((o * ci + i) * kh + ky) * kw + kx;
                            let k = wt.data()[wi];
                            let mut gw = T::zero();
                            for oy in y0..y1 {
                                let iy = oy * stride + ky - pad;
                                let grow = &gp[oy * ow..][..ow];
                                let xrow = &xt.data()[xo + iy * wd..][..wd];
                                let dxrow = &mut dx.data_mut()[xo + iy * wd..][..wd];
                                for ox in x0..x1 {
                                    let ix = ox * stride + kx - pad;
                                    gw += grow[ox] * xrow[ix];
                                    dxrow[ix] += grow[ox] * k;
                                }
                            }
                            dw.data_mut()[wi] += gw;
                        }
                    }
                }
            }
        }
        (dx, dw)
    }

    fn conv_t_backward(&self, x: Var, w: Var, dy: &Tensor<T>, stride: usize, pad: usize) -> (Tensor<T>, Tensor<T>) {
        let xt = self.value(x);
        let wt = self.value(w);
        let [n, ci, h, wd] = xt.shape();
        let [_, co, kh, kw] = wt.shape();
        let [_, _, oh, ow] = dy.shape();
        let mut dx = Tensor::zeros(xt.shape());
        let mut dw = Tensor::zeros(wt.shape());
        for bn in 0..n {
            for o in 0..co {
                let gp = &dy.data()[(bn * co + o) * oh * ow..][..oh * ow];
                for i in 0..ci {
                    let xo = (bn * ci + i) * h * wd;
                    for ky in 0..kh {
                        let (y0, y1) = valid(ky, pad, stride, oh, h);
                        for kx in 0..kw {
                            let (x0, x1) = valid(kx, pad, stride, ow, wd);
                            let wi = ((i * co + o) * kh + ky) * kw + kx;
                            let k = wt.data()[wi];
                            let mut gw = T::zero();
                            for iy in y0..y1 {
                                let oy = iy * stride + ky - pad;
                                let grow = &gp[oy * ow..][..ow];
                                let xrow = &xt.data()[xo + iy * wd..][..wd];
                                let dxrow = &mut dx.data_mut()[xo + iy * wd..][..wd];
                                for ix in x0..x1 {
                                    let g = grow[ix * stride + kx - pad];
                                    gw += g * xrow[ix];
                                    dxrow[ix] += g * k;
                                }
                            }
                            dw.data_mut()[wi] += gw;
                        }
                    }
                }
            }
        }
        (dx, dw)
    }
}

fn acc<T: Real>(g: &mut [Option<Tensor<T>>], v: Var, d: Tensor<T>) {
    match &mut g[v.0] {
        Some(t) => t.add_assign(&d),
        slot => *slot = Some(d),
    }
}

fn bias_grad<T: Real>(dy: &Tensor<T>, shape: [usize; 4]) -> Tensor<T> {
    let [n, c, h, w] = dy.shape();
    let mut out = Tensor::zeros(shape);
    for bn in 0..n {
        for o in 0..c {
            out.data_mut()[o] += dy.data()[(bn * c + o) * h * w..][..h * w].iter().copied().sum();
        }
    }
    out
}

/// Result of [`Tape::backward`].
#[derive(Debug, Clone)]
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Real> Gradients<T> {
    /// Gradient of `v`, or `None` if the output does not depend on it.
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    /// Gradient of `v`, zeros if the output does not depend on it.
    pub fn get_or_zeros(&self, v: Var, shape: [usize; 4]) -> Tensor<T> {
        self.get(v).cloned().unwrap_or_else(|| Tensor::zeros(shape))
    }
}
