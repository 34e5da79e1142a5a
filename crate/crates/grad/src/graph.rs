//! Tape-based reverse-mode differentiation.
//!
//! A [`Graph`] records every operation applied to its [`Var`] handles together
//! with the forward value. [`Graph::backward`] walks the tape in reverse and
//! returns gradients for every leaf created with `requires_grad = true`.

use crate::conv::{channels_first, channels_last, col2im, im2col, ConvGeom};
use crate::scalar::{gemm, MatRef, Scalar};
use crate::tensor::{numel, Tensor};

/// Handle to a node of a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

enum Op<T> {
    Leaf,
    Conv2d { x: Var, w: Var, b: Option<Var>, geom: ConvGeom },
    ConvTranspose2d { x: Var, w: Var, b: Option<Var>, geom: ConvGeom },
    Linear { x: Var, w: Var, b: Option<Var> },
    InstanceNorm { x: Var, gamma: Var, beta: Var, xhat: Vec<T>, inv_std: Vec<T> },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    Offset(Var),
    LeakyRelu(Var, T),
    Tanh(Var),
    Sigmoid(Var),
    Log(Var),
    Clamp(Var, T, T),
    Square(Var),
    Sum(Var),
    Mean(Var),
    SumPerSample(Var),
    Concat(Vec<Var>),
    Broadcast(Var),
    Reshape(Var),
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// A recorded computation.
pub struct Graph<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, inputs: &[Var]) -> Var {
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node { value, op, requires_grad });
        Var(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Tensor<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, op: Op::Leaf, requires_grad });
        Var(self.nodes.len() - 1)
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.leaf(value, false)
    }

    /// Leaf whose gradient is reported by [`Graph::backward`].
    pub fn variable(&mut self, value: Tensor<T>) -> Var {
        self.leaf(value, true)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Copy of the value of `v` as a new constant leaf (stops gradient flow).
    pub fn detach(&mut self, v: Var) -> Var {
        let value = self.value(v).clone();
        self.constant(value)
    }

    // ----- layers --------------------------------------------------------

    /// NCHW convolution with weight `[c_out, c_in, k, k]` and optional bias `[c_out]`.
    pub fn conv2d(&mut self, x: Var, w: Var, b: Option<Var>, stride: usize, pad: usize) -> Var {
        let xs = self.shape(x).to_vec();
        let ws = self.shape(w).to_vec();
        assert!(xs.len() == 4 && ws.len() == 4, "conv2d expects 4-d input and weight, got {xs:?} / {ws:?}");
        assert_eq!(xs[1], ws[1], "conv2d channel mismatch: input {xs:?}, weight {ws:?}");
        assert_eq!(ws[2], ws[3], "conv2d expects square kernels");
        let (n, c_out) = (xs[0], ws[0]);
        let geom = ConvGeom::conv(xs[1], xs[2], xs[3], ws[2], stride, pad)
            .unwrap_or_else(|| panic!("conv2d kernel {} does not fit input {xs:?}", ws[2]));
        let p = geom.out_positions();
        let cols = im2col(self.value(x).data(), n, &geom);
        let mut tmp = vec![T::zero(); n * p * c_out];
        gemm(
            MatRef::new(&cols, n * p, geom.patch_len()),
            MatRef::new(self.value(w).data(), c_out, geom.patch_len()).t(),
            T::zero(),
            &mut tmp,
        );
        let mut out = channels_first(&tmp, n, c_out, p);
        if let Some(b) = b {
            add_channel_bias(&mut out, self.value(b).data(), n, c_out, p);
        }
        let value = Tensor::from_vec(&[n, c_out, geom.out_h, geom.out_w], out);
        let mut inputs = vec![x, w];
        inputs.extend(b);
        self.push(value, Op::Conv2d { x, w, b, geom }, &inputs)
    }

    /// NCHW transposed convolution with weight `[c_in, c_out, k, k]`.
    pub fn conv_transpose2d(&mut self, x: Var, w: Var, b: Option<Var>, stride: usize, pad: usize) -> Var {
        let xs = self.shape(x).to_vec();
        let ws = self.shape(w).to_vec();
        assert!(xs.len() == 4 && ws.len() == 4, "conv_transpose2d expects 4-d input and weight");
        assert_eq!(xs[1], ws[0], "conv_transpose2d channel mismatch: input {xs:?}, weight {ws:?}");
        assert_eq!(ws[2], ws[3], "conv_transpose2d expects square kernels");
        let (n, c_in, c_out) = (xs[0], xs[1], ws[1]);
        let geom = ConvGeom::transposed(c_out, xs[2], xs[3], ws[2], stride, pad)
            .unwrap_or_else(|| panic!("conv_transpose2d geometry invalid for input {xs:?}"));
        let hw = xs[2] * xs[3];
        let rows = channels_last(self.value(x).data(), n, c_in, hw);
        let mut cols = vec![T::zero(); n * hw * geom.patch_len()];
        gemm(
            MatRef::new(&rows, n * hw, c_in),
            MatRef::new(self.value(w).data(), c_in, geom.patch_len()),
            T::zero(),
            &mut cols,
        );
        let mut out = col2im(&cols, n, &geom);
        if let Some(b) = b {
            add_channel_bias(&mut out, self.value(b).data(), n, c_out, geom.height * geom.width);
        }
        let value = Tensor::from_vec(&[n, c_out, geom.height, geom.width], out);
        let mut inputs = vec![x, w];
        inputs.extend(b);
        self.push(value, Op::ConvTranspose2d { x, w, b, geom }, &inputs)
    }

    /// `x·wᵀ + b` with `x: [n, in]`, `w: [out, in]`, `b: [out]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Var {
        let xs = self.shape(x).to_vec();
        let ws = self.shape(w).to_vec();
        assert!(xs.len() == 2 && ws.len() == 2 && xs[1] == ws[1], "linear shape mismatch: {xs:?} · {ws:?}ᵀ");
        let (n, d_in, d_out) = (xs[0], xs[1], ws[0]);
        let mut out = vec![T::zero(); n * d_out];
        gemm(
            MatRef::new(self.value(x).data(), n, d_in),
            MatRef::new(self.value(w).data(), d_out, d_in).t(),
            T::zero(),
            &mut out,
        );
        if let Some(b) = b {
            let bias = self.value(b).data();
            for row in out.chunks_mut(d_out) {
                for (o, &bv) in row.iter_mut().zip(bias) {
                    *o = *o + bv;
                }
            }
        }
        let mut inputs = vec![x, w];
        inputs.extend(b);
        self.push(Tensor::from_vec(&[n, d_out], out), Op::Linear { x, w, b }, &inputs)
    }

    /// Per-sample, per-channel normalization over spatial positions with affine `gamma`, `beta`.
    pub fn instance_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Var {
        let xs = self.shape(x).to_vec();
        assert!(xs.len() >= 2, "instance_norm expects [n, c, ...]");
        let (n, c) = (xs[0], xs[1]);
        let p = numel(&xs[2..]);
        assert_eq!(self.shape(gamma), [c]);
        assert_eq!(self.shape(beta), [c]);
        let eps = T::from_f64_lossy(eps);
        let pf = T::from_usize(p).unwrap();
        let xv = self.value(x).data();
        let g = self.value(gamma).data();
        let bt = self.value(beta).data();
        let mut xhat = vec![T::zero(); xv.len()];
        let mut inv_std = vec![T::zero(); n * c];
        let mut out = vec![T::zero(); xv.len()];
        for i in 0..n * c {
            let ch = i % c;
            let src = &xv[i * p..(i + 1) * p];
            let mean = src.iter().copied().sum::<T>() / pf;
            let var = src.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / pf;
            let is = T::one() / (var + eps).sqrt();
            inv_std[i] = is;
            for j in 0..p {
                let h = (src[j] - mean) * is;
                xhat[i * p + j] = h;
                out[i * p + j] = g[ch] * h + bt[ch];
            }
        }
        let value = Tensor::from_vec(&xs, out);
        self.push(value, Op::InstanceNorm { x, gamma, beta, xhat, inv_std }, &[x, gamma, beta])
    }

    // ----- elementwise ---------------------------------------------------

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).zip_map(self.value(b), |x, y| x + y);
        self.push(v, Op::Add(a, b), &[a, b])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).zip_map(self.value(b), |x, y| x - y);
        self.push(v, Op::Sub(a, b), &[a, b])
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).zip_map(self.value(b), |x, y| x * y);
        self.push(v, Op::Mul(a, b), &[a, b])
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let f = T::from_f64_lossy(factor);
        let v = self.value(a).map(|x| x * f);
        self.push(v, Op::Scale(a, f), &[a])
    }

    pub fn offset(&mut self, a: Var, delta: f64) -> Var {
        let d = T::from_f64_lossy(delta);
        let v = self.value(a).map(|x| x + d);
        self.push(v, Op::Offset(a), &[a])
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        let s = T::from_f64_lossy(slope);
        let v = self.value(a).map(|x| if x > T::zero() { x } else { x * s });
        self.push(v, Op::LeakyRelu(a, s), &[a])
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.leaky_relu(a, 0.0)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| x.tanh());
        self.push(v, Op::Tanh(a), &[a])
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).map(stable_sigmoid);
        self.push(v, Op::Sigmoid(a), &[a])
    }

    pub fn log(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| x.ln());
        self.push(v, Op::Log(a), &[a])
    }

    /// Clamp into `[lo, hi]`; the gradient is zero outside the interval.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        let (lo, hi) = (T::from_f64_lossy(lo), T::from_f64_lossy(hi));
        let v = self.value(a).map(|x| x.max(lo).min(hi));
        self.push(v, Op::Clamp(a, lo, hi), &[a])
    }

    pub fn square(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| x * x);
        self.push(v, Op::Square(a), &[a])
    }

    // ----- reductions and shape ops --------------------------------------

    pub fn sum(&mut self, a: Var) -> Var {
        let v = Tensor::scalar(self.value(a).sum());
        self.push(v, Op::Sum(a), &[a])
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let n = T::from_usize(t.len().max(1)).unwrap();
        let v = Tensor::scalar(t.sum() / n);
        self.push(v, Op::Mean(a), &[a])
    }

    /// Sum over every axis but the first: `[n, ...] -> [n]`.
    pub fn sum_per_sample(&mut self, a: Var) -> Var {
        let t = self.value(a);
        assert!(!t.shape().is_empty(), "sum_per_sample of a scalar");
        let n = t.shape()[0];
        let inner = numel(&t.shape()[1..]);
        let out: Vec<T> = (0..n).map(|i| t.data()[i * inner..(i + 1) * inner].iter().copied().sum()).collect();
        self.push(Tensor::from_vec(&[n], out), Op::SumPerSample(a), &[a])
    }

    /// Concatenate along axis 1; all other axes must agree.
    pub fn concat(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "concat of nothing");
        let first = self.shape(parts[0]).to_vec();
        assert!(first.len() >= 2, "concat expects at least 2-d tensors");
        let n = first[0];
        let rest = numel(&first[2..]);
        let mut total_c = 0;
        for &p in parts {
            let s = self.shape(p);
            assert!(s.len() == first.len() && s[0] == n && s[2..] == first[2..], "concat shape mismatch: {s:?} vs {first:?}");
            total_c += s[1];
        }
        let mut out = Vec::with_capacity(n * total_c * rest);
        for b in 0..n {
            for &p in parts {
                let t = self.value(p);
                let chunk = t.shape()[1] * rest;
                out.extend_from_slice(&t.data()[b * chunk..(b + 1) * chunk]);
            }
        }
        let mut shape = first;
        shape[1] = total_c;
        self.push(Tensor::from_vec(&shape, out), Op::Concat(parts.to_vec()), parts)
    }

    /// `[n, c] -> [n, c, h, w]` by repeating each value over the spatial grid.
    pub fn broadcast_spatial(&mut self, a: Var, h: usize, w: usize) -> Var {
        let t = self.value(a);
        assert_eq!(t.shape().len(), 2, "broadcast_spatial expects [n, c]");
        let (n, c) = (t.shape()[0], t.shape()[1]);
        let mut out = Vec::with_capacity(n * c * h * w);
        for &v in t.data() {
            out.extend(std::iter::repeat_n(v, h * w));
        }
        self.push(Tensor::from_vec(&[n, c, h, w], out), Op::Broadcast(a), &[a])
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Var {
        let v = self.value(a).clone().reshape(shape);
        self.push(v, Op::Reshape(a), &[a])
    }

    /// `[n, ...] -> [n, prod(...)]`
    pub fn flatten(&mut self, a: Var) -> Var {
        let s = self.shape(a).to_vec();
        let inner = numel(&s[1..]);
        self.reshape(a, &[s[0], inner])
    }

    // ----- backward ------------------------------------------------------

    /// Gradients of the scalar `loss` with respect to every leaf that requires them.
    pub fn backward(&self, loss: Var) -> Gradients<T> {
        assert_eq!(self.value(loss).len(), 1, "backward needs a scalar loss, got {:?}", self.shape(loss));
        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        if !self.nodes[loss.0].requires_grad {
            return Gradients { grads };
        }
        grads[loss.0] = Some(Tensor::full(self.shape(loss), T::one()));
        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(gout) = grads[i].take() else { continue };
            self.propagate(node, &gout, &mut grads);
        }
        Gradients { grads }
    }

    fn accumulate(&self, grads: &mut [Option<Tensor<T>>], v: Var, g: Tensor<T>) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        debug_assert_eq!(g.shape(), self.shape(v));
        match &mut grads[v.0] {
            Some(acc) => acc.add_assign(&g),
            slot => *slot = Some(g),
        }
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn propagate(&self, node: &Node<T>, gout: &Tensor<T>, grads: &mut [Option<Tensor<T>>]) {
        let go = gout.data();
        match &node.op {
            Op::Leaf => {}
            Op::Conv2d { x, w, b, geom } => {
                let n = self.shape(*x)[0];
                let c_out = self.shape(*w)[0];
                let p = geom.out_positions();
                let dtmp = channels_last(go, n, c_out, p);
                if self.needs(*w) {
                    let cols = im2col(self.value(*x).data(), n, geom);
                    let mut dw = vec![T::zero(); c_out * geom.patch_len()];
                    gemm(
                        MatRef::new(&dtmp, n * p, c_out).t(),
                        MatRef::new(&cols, n * p, geom.patch_len()),
                        T::zero(),
                        &mut dw,
                    );
                    self.accumulate(grads, *w, Tensor::from_vec(self.shape(*w), dw));
                }
                if self.needs(*x) {
                    let mut dcols = vec![T::zero(); n * p * geom.patch_len()];
                    gemm(
                        MatRef::new(&dtmp, n * p, c_out),
                        MatRef::new(self.value(*w).data(), c_out, geom.patch_len()),
                        T::zero(),
                        &mut dcols,
                    );
                    let dx = col2im(&dcols, n, geom);
                    self.accumulate(grads, *x, Tensor::from_vec(self.shape(*x), dx));
                }
                if let Some(b) = b {
                    if self.needs(*b) {
                        let db = channel_sums(go, n, c_out, p);
                        self.accumulate(grads, *b, Tensor::from_vec(&[c_out], db));
                    }
                }
            }
            Op::ConvTranspose2d { x, w, b, geom } => {
                let xs = self.shape(*x);
                let (n, c_in, hw) = (xs[0], xs[1], xs[2] * xs[3]);
                let c_out = geom.channels;
                let dcols = im2col(go, n, geom);
                if self.needs(*x) {
                    let mut drows = vec![T::zero(); n * hw * c_in];
                    gemm(
                        MatRef::new(&dcols, n * hw, geom.patch_len()),
                        MatRef::new(self.value(*w).data(), c_in, geom.patch_len()).t(),
                        T::zero(),
                        &mut drows,
                    );
                    let dx = channels_first(&drows, n, c_in, hw);
                    self.accumulate(grads, *x, Tensor::from_vec(xs, dx));
                }
                if self.needs(*w) {
                    let rows = channels_last(self.value(*x).data(), n, c_in, hw);
                    let mut dw = vec![T::zero(); c_in * geom.patch_len()];
                    gemm(
                        MatRef::new(&rows, n * hw, c_in).t(),
                        MatRef::new(&dcols, n * hw, geom.patch_len()),
                        T::zero(),
                        &mut dw,
                    );
                    self.accumulate(grads, *w, Tensor::from_vec(self.shape(*w), dw));
                }
                if let Some(b) = b {
                    if self.needs(*b) {
                        let db = channel_sums(go, n, c_out, geom.height * geom.width);
                        self.accumulate(grads, *b, Tensor::from_vec(&[c_out], db));
                    }
                }
            }
            Op::Linear { x, w, b } => {
                let (n, d_in) = (self.shape(*x)[0], self.shape(*x)[1]);
                let d_out = self.shape(*w)[0];
                if self.needs(*x) {
                    let mut dx = vec![T::zero(); n * d_in];
                    gemm(
                        MatRef::new(go, n, d_out),
                        MatRef::new(self.value(*w).data(), d_out, d_in),
                        T::zero(),
                        &mut dx,
                    );
                    self.accumulate(grads, *x, Tensor::from_vec(&[n, d_in], dx));
                }
                if self.needs(*w) {
                    let mut dw = vec![T::zero(); d_out * d_in];
                    gemm(
                        MatRef::new(go, n, d_out).t(),
                        MatRef::new(self.value(*x).data(), n, d_in),
                        T::zero(),
                        &mut dw,
                    );
                    self.accumulate(grads, *w, Tensor::from_vec(&[d_out, d_in], dw));
                }
                if let Some(b) = b {
                    if self.needs(*b) {
                        let mut db = vec![T::zero(); d_out];
                        for row in go.chunks(d_out) {
                            for (d, &g) in db.iter_mut().zip(row) {
                                *d = *d + g;
                            }
                        }
                        self.accumulate(grads, *b, Tensor::from_vec(&[d_out], db));
                    }
                }
            }
            Op::InstanceNorm { x, gamma, beta, xhat, inv_std } => {
                let xs = self.shape(*x);
                let (n, c) = (xs[0], xs[1]);
                let p = numel(&xs[2..]);
                let pf = T::from_usize(p).unwrap();
                let g = self.value(*gamma).data();
                let mut dgamma = vec![T::zero(); c];
                let mut dbeta = vec![T::zero(); c];
                let mut dx = vec![T::zero(); go.len()];
                for i in 0..n * c {
                    let ch = i % c;
                    let gs = &go[i * p..(i + 1) * p];
                    let hs = &xhat[i * p..(i + 1) * p];
                    let mut sum_d = T::zero();
                    let mut sum_dh = T::zero();
                    for j in 0..p {
                        dgamma[ch] = dgamma[ch] + gs[j] * hs[j];
                        dbeta[ch] = dbeta[ch] + gs[j];
                        let d = gs[j] * g[ch];
                        sum_d = sum_d + d;
                        sum_dh = sum_dh + d * hs[j];
                    }
                    let k = inv_std[i] / pf;
                    for j in 0..p {
                        let d = gs[j] * g[ch];
                        dx[i * p + j] = k * (pf * d - sum_d - hs[j] * sum_dh);
                    }
                }
                self.accumulate(grads, *x, Tensor::from_vec(xs, dx));
                self.accumulate(grads, *gamma, Tensor::from_vec(&[c], dgamma));
                self.accumulate(grads, *beta, Tensor::from_vec(&[c], dbeta));
            }
            Op::Add(a, b) => {
                self.accumulate(grads, *a, gout.clone());
                self.accumulate(grads, *b, gout.clone());
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, *a, gout.clone());
                if self.needs(*b) {
                    self.accumulate(grads, *b, gout.map(|g| -g));
                }
            }
            Op::Mul(a, b) => {
                if self.needs(*a) {
                    self.accumulate(grads, *a, gout.zip_map(self.value(*b), |g, y| g * y));
                }
                if self.needs(*b) {
                    self.accumulate(grads, *b, gout.zip_map(self.value(*a), |g, x| g * x));
                }
            }
            Op::Scale(a, f) => {
                let f = *f;
                self.accumulate(grads, *a, gout.map(|g| g * f));
            }
            Op::Offset(a) | Op::Reshape(a) => {
                let g = gout.clone().reshape(self.shape(*a));
                self.accumulate(grads, *a, g);
            }
            Op::LeakyRelu(a, s) => {
                let s = *s;
                let g = gout.zip_map(self.value(*a), |g, x| if x > T::zero() { g } else { g * s });
                self.accumulate(grads, *a, g);
            }
            Op::Tanh(a) => {
                let g = gout.zip_map(&node.value, |g, y| g * (T::one() - y * y));
                self.accumulate(grads, *a, g);
            }
            Op::Sigmoid(a) => {
                let g = gout.zip_map(&node.value, |g, y| g * y * (T::one() - y));
                self.accumulate(grads, *a, g);
            }
            Op::Log(a) => {
                let g = gout.zip_map(self.value(*a), |g, x| g / x);
                self.accumulate(grads, *a, g);
            }
            Op::Clamp(a, lo, hi) => {
                let (lo, hi) = (*lo, *hi);
                let g = gout.zip_map(self.value(*a), |g, x| if x >= lo && x <= hi { g } else { T::zero() });
                self.accumulate(grads, *a, g);
            }
            Op::Square(a) => {
                let two = T::one() + T::one();
                let g = gout.zip_map(self.value(*a), |g, x| g * two * x);
                self.accumulate(grads, *a, g);
            }
            Op::Sum(a) => {
                let g = Tensor::full(self.shape(*a), go[0]);
                self.accumulate(grads, *a, g);
            }
            Op::Mean(a) => {
                let n = T::from_usize(self.value(*a).len().max(1)).unwrap();
                let g = Tensor::full(self.shape(*a), go[0] / n);
                self.accumulate(grads, *a, g);
            }
            Op::SumPerSample(a) => {
                let s = self.shape(*a);
                let inner = numel(&s[1..]);
                let mut g = Vec::with_capacity(numel(s));
                for &v in go {
                    g.extend(std::iter::repeat_n(v, inner));
                }
                self.accumulate(grads, *a, Tensor::from_vec(s, g));
            }
            Op::Concat(parts) => {
                let s = node.value.shape();
                let (n, total_c) = (s[0], s[1]);
                let rest = numel(&s[2..]);
                let mut offset = 0;
                for &p in parts {
                    let c = self.shape(p)[1];
                    if self.needs(p) {
                        let mut g = Vec::with_capacity(n * c * rest);
                        for b in 0..n {
                            let start = (b * total_c + offset) * rest;
                            g.extend_from_slice(&go[start..start + c * rest]);
                        }
                        self.accumulate(grads, p, Tensor::from_vec(self.shape(p), g));
                    }
                    offset += c;
                }
            }
            Op::Broadcast(a) => {
                let s = node.value.shape();
                let hw = s[2] * s[3];
                let g: Vec<T> = go.chunks(hw).map(|c| c.iter().copied().sum()).collect();
                self.accumulate(grads, *a, Tensor::from_vec(self.shape(*a), g));
            }
        }
    }
}

fn stable_sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

fn add_channel_bias<T: Scalar>(out: &mut [T], bias: &[T], n: usize, c: usize, p: usize) {
    for b in 0..n {
        for ch in 0..c {
            let bv = bias[ch];
            for v in &mut out[(b * c + ch) * p..(b * c + ch + 1) * p] {
                *v = *v + bv;
            }
        }
    }
}

fn channel_sums<T: Scalar>(g: &[T], n: usize, c: usize, p: usize) -> Vec<T> {
    let mut out = vec![T::zero(); c];
    for b in 0..n {
        for (ch, o) in out.iter_mut().enumerate() {
            *o = *o + g[(b * c + ch) * p..(b * c + ch + 1) * p].iter().copied().sum::<T>();
        }
    }
    out
}

/// Result of [`Graph::backward`].
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    /// Gradient of a leaf; `None` when the leaf does not require gradients
    /// or the loss does not depend on it.
    pub fn wrt(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    /// Like [`Gradients::wrt`] but yields zeros of `shape` for absent gradients.
    pub fn wrt_or_zeros(&self, v: Var, shape: &[usize]) -> Tensor<T> {
        self.wrt(v).cloned().unwrap_or_else(|| Tensor::zeros(shape))
    }
}
