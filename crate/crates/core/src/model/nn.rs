//! Layer primitives on f64 ndarrays, each with an explicit backward pass.
//! Convolutions use im2col plus matrix multiplication; transposed
//! convolutions reuse the same gather/scatter pair with the roles swapped.

use ndarray::{Array2, Array3, Array4, ArrayView2, ArrayView3, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::params::{ParamAlloc, ParamId, ParamStore, StateId, StateStore};

fn view2(store: &ParamStore, id: ParamId, rows: usize, cols: usize) -> ArrayView2<'_, f64> {
    ArrayView2::from_shape((rows, cols), store.get(id)).expect("param shape")
}

/// Gather k×k patches of `x` (C,H,W) into a (C·k², out_h·out_w) matrix.
/// Patch (oy, ox) starts at (oy·stride − pad, ox·stride − pad); out-of-range
/// taps stay zero.
pub fn im2col(
    x: ArrayView3<f64>,
    k: usize,
    stride: usize,
    pad: isize,
    out_h: usize,
    out_w: usize,
) -> Array2<f64> {
    let (c, h, w) = x.dim();
    let xs = x.as_slice().expect("standard layout");
    let mut col = Array2::<f64>::zeros((c * k * k, out_h * out_w));
    let cs = col.as_slice_mut().unwrap();
    for ci in 0..c {
        let plane = &xs[ci * h * w..(ci + 1) * h * w];
        for ky in 0..k {
            for kx in 0..k {
                let row = (ci * k + ky) * k + kx;
                let out_row = &mut cs[row * out_h * out_w..(row + 1) * out_h * out_w];
                for oy in 0..out_h {
                    let iy = (oy * stride) as isize + ky as isize - pad;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let x_row = &plane[iy as usize * w..(iy as usize + 1) * w];
                    let base = oy * out_w;
                    for ox in 0..out_w {
                        let ix = (ox * stride) as isize + kx as isize - pad;
                        if ix >= 0 && ix < w as isize {
                            out_row[base + ox] = x_row[ix as usize];
                        }
                    }
                }
            }
        }
    }
    col
}

/// Adjoint of `im2col`: scatter-add columns back onto a (C,H,W) raster.
pub fn col2im(
    cols: ArrayView2<f64>,
    c: usize,
    h: usize,
    w: usize,
    k: usize,
    stride: usize,
    pad: isize,
    n_h: usize,
    n_w: usize,
) -> Array3<f64> {
    let mut out = Array3::<f64>::zeros((c, h, w));
    let os = out.as_slice_mut().unwrap();
    let cs = cols.as_slice().expect("standard layout");
    for ci in 0..c {
        for ky in 0..k {
            for kx in 0..k {
                let row = (ci * k + ky) * k + kx;
                let col_row = &cs[row * n_h * n_w..(row + 1) * n_h * n_w];
                for py in 0..n_h {
                    let ty = (py * stride) as isize + ky as isize - pad;
                    if ty < 0 || ty >= h as isize {
                        continue;
                    }
                    let out_base = ci * h * w + ty as usize * w;
                    let base = py * n_w;
                    for px in 0..n_w {
                        let tx = (px * stride) as isize + kx as isize - pad;
                        if tx >= 0 && tx < w as isize {
                            os[out_base + tx as usize] += col_row[base + px];
                        }
                    }
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct Conv2d {
    pub w: ParamId,
    pub b: Option<ParamId>,
    pub in_c: usize,
    pub out_c: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
}

impl Conv2d {
    pub fn new(
        alloc: &mut ParamAlloc,
        in_c: usize,
        out_c: usize,
        k: usize,
        stride: usize,
        pad: usize,
        bias: bool,
    ) -> Self {
        Conv2d {
            w: alloc.params(out_c * in_c * k * k),
            b: bias.then(|| alloc.params(out_c)),
            in_c,
            out_c,
            k,
            stride,
            pad,
        }
    }

    pub fn init(&self, store: &mut ParamStore, rng: &mut ChaCha8Rng) {
        store.init_he(self.w, self.in_c * self.k * self.k, rng);
        if let Some(b) = self.b {
            store.init_const(b, 0.0);
        }
    }

    pub fn out_size(&self, edge: usize) -> usize {
        (edge + 2 * self.pad - self.k) / self.stride + 1
    }

    pub fn forward(&self, store: &ParamStore, x: &Array4<f64>) -> Array4<f64> {
        let (n, _, h, w) = x.dim();
        let (oh, ow) = (self.out_size(h), self.out_size(w));
        let wmat = view2(store, self.w, self.out_c, self.in_c * self.k * self.k);
        let mut y = Array4::<f64>::zeros((n, self.out_c, oh, ow));
        for i in 0..n {
            let col = im2col(
                x.index_axis(Axis(0), i),
                self.k,
                self.stride,
                self.pad as isize,
                oh,
                ow,
            );
            let ymat = wmat.dot(&col);
            y.index_axis_mut(Axis(0), i)
                .assign(&ymat.into_shape_with_order((self.out_c, oh, ow)).unwrap());
        }
        if let Some(bid) = self.b {
            let bias = store.get(bid).to_vec();
            for i in 0..n {
                for (c, bv) in bias.iter().enumerate() {
                    y.index_axis_mut(Axis(0), i)
                        .index_axis_mut(Axis(0), c)
                        .mapv_inplace(|v| v + bv);
                }
            }
        }
        y
    }

    /// Accumulates weight gradients and returns the input gradient.
    pub fn backward(
        &self,
        store: &mut ParamStore,
        x: &Array4<f64>,
        dy: &Array4<f64>,
    ) -> Array4<f64> {
        let (n, _, h, w) = x.dim();
        let (_, _, oh, ow) = dy.dim();
        let kk = self.in_c * self.k * self.k;
        let mut dw = Array2::<f64>::zeros((self.out_c, kk));
        let mut dx = Array4::<f64>::zeros(x.dim());
        {
            let wmat = view2(store, self.w, self.out_c, kk);
            for i in 0..n {
                let dy_mat = dy
                    .index_axis(Axis(0), i)
                    .into_shape_with_order((self.out_c, oh * ow))
                    .unwrap();
                let col = im2col(
                    x.index_axis(Axis(0), i),
                    self.k,
                    self.stride,
                    self.pad as isize,
                    oh,
                    ow,
                );
                dw += &dy_mat.dot(&col.t());
                let dcol = wmat.t().dot(&dy_mat);
                dx.index_axis_mut(Axis(0), i).assign(&col2im(
                    dcol.view(),
                    self.in_c,
                    h,
                    w,
                    self.k,
                    self.stride,
                    self.pad as isize,
                    oh,
                    ow,
                ));
            }
        }
        for (g, v) in store.grad_mut(self.w).iter_mut().zip(dw.iter()) {
            *g += v;
        }
        if let Some(bid) = self.b {
            let db: Vec<f64> = (0..self.out_c)
                .map(|c| dy.index_axis(Axis(1), c).sum())
                .collect();
            for (g, v) in store.grad_mut(bid).iter_mut().zip(db) {
                *g += v;
            }
        }
        dx
    }
}

#[derive(Debug, Clone)]
pub struct ConvTranspose2d {
    pub w: ParamId,
    pub b: Option<ParamId>,
    pub in_c: usize,
    pub out_c: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
    pub out_pad: usize,
}

impl ConvTranspose2d {
    pub fn new(
        alloc: &mut ParamAlloc,
        in_c: usize,
        out_c: usize,
        k: usize,
        stride: usize,
        pad: usize,
        out_pad: usize,
        bias: bool,
    ) -> Self {
        ConvTranspose2d {
            w: alloc.params(in_c * out_c * k * k),
            b: bias.then(|| alloc.params(out_c)),
            in_c,
            out_c,
            k,
            stride,
            pad,
            out_pad,
        }
    }

    pub fn init(&self, store: &mut ParamStore, rng: &mut ChaCha8Rng) {
        store.init_he(self.w, self.in_c * self.k * self.k, rng);
        if let Some(b) = self.b {
            store.init_const(b, 0.0);
        }
    }

    pub fn out_size(&self, edge: usize) -> usize {
        (edge - 1) * self.stride + self.k + self.out_pad - 2 * self.pad
    }

    pub fn forward(&self, store: &ParamStore, x: &Array4<f64>) -> Array4<f64> {
        let (n, _, ih, iw) = x.dim();
        let (oh, ow) = (self.out_size(ih), self.out_size(iw));
        let wmat = view2(store, self.w, self.in_c, self.out_c * self.k * self.k);
        let mut y = Array4::<f64>::zeros((n, self.out_c, oh, ow));
        for i in 0..n {
            let x_mat = x
                .index_axis(Axis(0), i)
                .into_shape_with_order((self.in_c, ih * iw))
                .unwrap();
            let cols = wmat.t().dot(&x_mat);
            y.index_axis_mut(Axis(0), i).assign(&col2im(
                cols.view(),
                self.out_c,
                oh,
                ow,
                self.k,
                self.stride,
                self.pad as isize,
                ih,
                iw,
            ));
        }
        if let Some(bid) = self.b {
            let bias = store.get(bid).to_vec();
            for i in 0..n {
                for (c, bv) in bias.iter().enumerate() {
                    y.index_axis_mut(Axis(0), i)
                        .index_axis_mut(Axis(0), c)
                        .mapv_inplace(|v| v + bv);
                }
            }
        }
        y
    }

    pub fn backward(
        &self,
        store: &mut ParamStore,
        x: &Array4<f64>,
        dy: &Array4<f64>,
    ) -> Array4<f64> {
        let (n, _, ih, iw) = x.dim();
        let kk = self.out_c * self.k * self.k;
        let mut dw = Array2::<f64>::zeros((self.in_c, kk));
        let mut dx = Array4::<f64>::zeros(x.dim());
        {
            let wmat = view2(store, self.w, self.in_c, kk);
            for i in 0..n {
                let dcols = im2col(
                    dy.index_axis(Axis(0), i),
                    self.k,
                    self.stride,
                    self.pad as isize,
                    ih,
                    iw,
                );
                let x_mat = x
                    .index_axis(Axis(0), i)
                    .into_shape_with_order((self.in_c, ih * iw))
                    .unwrap();
                dw += &x_mat.dot(&dcols.t());
                let dx_mat = wmat.dot(&dcols);
                dx.index_axis_mut(Axis(0), i)
                    .assign(&dx_mat.into_shape_with_order((self.in_c, ih, iw)).unwrap());
            }
        }
        for (g, v) in store.grad_mut(self.w).iter_mut().zip(dw.iter()) {
            *g += v;
        }
        if let Some(bid) = self.b {
            let db: Vec<f64> = (0..self.out_c)
                .map(|c| dy.index_axis(Axis(1), c).sum())
                .collect();
            for (g, v) in store.grad_mut(bid).iter_mut().zip(db) {
                *g += v;
            }
        }
        dx
    }
}

#[derive(Debug, Clone)]
pub struct BatchNorm2d {
    pub gamma: ParamId,
    pub beta: ParamId,
    /// Running mean then running variance, 2·C values.
    pub running: StateId,
    pub c: usize,
    pub eps: f64,
    pub momentum: f64,
}

pub struct BnCache {
    pub xhat: Array4<f64>,
    pub inv_std: Vec<f64>,
}

impl BatchNorm2d {
    pub fn new(alloc: &mut ParamAlloc, c: usize) -> Self {
        BatchNorm2d {
            gamma: alloc.params(c),
            beta: alloc.params(c),
            running: alloc.states(2 * c),
            c,
            eps: 1e-5,
            momentum: 0.1,
        }
    }

    pub fn init(&self, store: &mut ParamStore, states: &mut StateStore) {
        store.init_const(self.gamma, 1.0);
        store.init_const(self.beta, 0.0);
        let r = states.get_mut(self.running);
        r[..self.c].fill(0.0);
        r[self.c..].fill(1.0);
    }

    pub fn forward_train(
        &self,
        store: &ParamStore,
        states: &mut StateStore,
        x: &Array4<f64>,
    ) -> (Array4<f64>, BnCache) {
        let (n, c, h, w) = x.dim();
        debug_assert_eq!(c, self.c);
        let m = (n * h * w) as f64;
        let gamma = store.get(self.gamma);
        let beta = store.get(self.beta);
        let mut xhat = Array4::<f64>::zeros(x.dim());
        let mut y = Array4::<f64>::zeros(x.dim());
        let mut inv_std = vec![0.0; c];
        for ci in 0..c {
            let xc = x.index_axis(Axis(1), ci);
            let mean = xc.sum() / m;
            let var = xc.mapv(|v| (v - mean) * (v - mean)).sum() / m;
            let is = 1.0 / (var + self.eps).sqrt();
            inv_std[ci] = is;
            let mut xh = xhat.index_axis_mut(Axis(1), ci);
            xh.assign(&xc.mapv(|v| (v - mean) * is));
            y.index_axis_mut(Axis(1), ci)
                .assign(&xh.mapv(|v| gamma[ci] * v + beta[ci]));
            let r = states.get_mut(self.running);
            r[ci] = (1.0 - self.momentum) * r[ci] + self.momentum * mean;
            r[self.c + ci] = (1.0 - self.momentum) * r[self.c + ci] + self.momentum * var;
        }
        (y, BnCache { xhat, inv_std })
    }

    pub fn forward_eval(
        &self,
        store: &ParamStore,
        states: &StateStore,
        x: &Array4<f64>,
    ) -> Array4<f64> {
        let gamma = store.get(self.gamma);
        let beta = store.get(self.beta);
        let r = states.get(self.running);
        let mut y = Array4::<f64>::zeros(x.dim());
        for ci in 0..self.c {
            let mean = r[ci];
            let is = 1.0 / (r[self.c + ci] + self.eps).sqrt();
            y.index_axis_mut(Axis(1), ci)
                .assign(&x.index_axis(Axis(1), ci).mapv(|v| gamma[ci] * (v - mean) * is + beta[ci]));
        }
        y
    }

    pub fn backward(
        &self,
        store: &mut ParamStore,
        cache: &BnCache,
        dy: &Array4<f64>,
    ) -> Array4<f64> {
        let (n, c, h, w) = dy.dim();
        let m = (n * h * w) as f64;
        let gamma = store.get(self.gamma).to_vec();
        let mut dx = Array4::<f64>::zeros(dy.dim());
        let mut dgamma = vec![0.0; c];
        let mut dbeta = vec![0.0; c];
        for ci in 0..c {
            let dyc = dy.index_axis(Axis(1), ci);
            let xh = cache.xhat.index_axis(Axis(1), ci);
            let sum_dy = dyc.sum();
            let sum_dy_xh = (&dyc * &xh).sum();
            dgamma[ci] = sum_dy_xh;
            dbeta[ci] = sum_dy;
            let scale = gamma[ci] * cache.inv_std[ci] / m;
            let mut dxc = dx.index_axis_mut(Axis(1), ci);
            ndarray::Zip::from(&mut dxc)
                .and(&dyc)
                .and(&xh)
                .for_each(|d, &g, &x| *d = scale * (m * g - sum_dy - x * sum_dy_xh));
        }
        for (g, v) in store.grad_mut(self.gamma).iter_mut().zip(dgamma) {
            *g += v;
        }
        for (g, v) in store.grad_mut(self.beta).iter_mut().zip(dbeta) {
            *g += v;
        }
        dx
    }
}

#[derive(Debug, Clone)]
pub struct Dense {
    pub w: ParamId,
    pub b: ParamId,
    pub in_f: usize,
    pub out_f: usize,
}

impl Dense {
    pub fn new(alloc: &mut ParamAlloc, in_f: usize, out_f: usize) -> Self {
        Dense {
            w: alloc.params(out_f * in_f),
            b: alloc.params(out_f),
            in_f,
            out_f,
        }
    }

    pub fn init(&self, store: &mut ParamStore, rng: &mut ChaCha8Rng) {
        store.init_he(self.w, self.in_f, rng);
        store.init_const(self.b, 0.0);
    }

    pub fn forward(&self, store: &ParamStore, x: &Array2<f64>) -> Array2<f64> {
        let wmat = view2(store, self.w, self.out_f, self.in_f);
        let mut y = x.dot(&wmat.t());
        let b = store.get(self.b);
        for mut row in y.rows_mut() {
            for (v, bv) in row.iter_mut().zip(b) {
                *v += bv;
            }
        }
        y
    }

    pub fn backward(
        &self,
        store: &mut ParamStore,
        x: &Array2<f64>,
        dy: &Array2<f64>,
    ) -> Array2<f64> {
        let dw = dy.t().dot(x);
        let db = dy.sum_axis(Axis(0));
        let dx = {
            let wmat = view2(store, self.w, self.out_f, self.in_f);
            dy.dot(&wmat)
        };
        for (g, v) in store.grad_mut(self.w).iter_mut().zip(dw.iter()) {
            *g += v;
        }
        for (g, v) in store.grad_mut(self.b).iter_mut().zip(db.iter()) {
            *g += v;
        }
        dx
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MaxPool2d {
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
}

impl MaxPool2d {
    pub fn out_size(&self, edge: usize) -> usize {
        (edge + 2 * self.pad - self.k) / self.stride + 1
    }

    /// Returns the pooled map and, per output cell, the flat h·w source index.
    pub fn forward(&self, x: &Array4<f64>) -> (Array4<f64>, Array4<usize>) {
        let (n, c, h, w) = x.dim();
        let (oh, ow) = (self.out_size(h), self.out_size(w));
        let mut y = Array4::<f64>::zeros((n, c, oh, ow));
        let mut arg = Array4::<usize>::zeros((n, c, oh, ow));
        for i in 0..n {
            for ci in 0..c {
                let plane = x.index_axis(Axis(0), i);
                let plane = plane.index_axis(Axis(0), ci);
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut best = f64::NEG_INFINITY;
                        let mut best_idx = 0usize;
                        for ky in 0..self.k {
                            let iy = (oy * self.stride + ky) as isize - self.pad as isize;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            for kx in 0..self.k {
                                let ix = (ox * self.stride + kx) as isize - self.pad as isize;
                                if ix < 0 || ix >= w as isize {
                                    continue;
                                }
                                let v = plane[[iy as usize, ix as usize]];
                                if v > best {
                                    best = v;
                                    best_idx = iy as usize * w + ix as usize;
                                }
                            }
                        }
                        y[[i, ci, oy, ox]] = best;
                        arg[[i, ci, oy, ox]] = best_idx;
                    }
                }
            }
        }
        (y, arg)
    }

    pub fn backward(
        &self,
        in_dim: (usize, usize, usize, usize),
        arg: &Array4<usize>,
        dy: &Array4<f64>,
    ) -> Array4<f64> {
        let w = in_dim.3;
        let mut dx = Array4::<f64>::zeros(in_dim);
        let (n, c, oh, ow) = dy.dim();
        for i in 0..n {
            for ci in 0..c {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let idx = arg[[i, ci, oy, ox]];
                        dx[[i, ci, idx / w, idx % w]] += dy[[i, ci, oy, ox]];
                    }
                }
            }
        }
        dx
    }
}

pub fn relu4(x: &Array4<f64>) -> Array4<f64> {
    x.mapv(|v| v.max(0.0))
}

/// Backward through ReLU given the forward output.
pub fn relu4_backward(y: &Array4<f64>, dy: &Array4<f64>) -> Array4<f64> {
    let mut dx = dy.clone();
    ndarray::Zip::from(&mut dx).and(y).for_each(|d, &v| {
        if v <= 0.0 {
            *d = 0.0;
        }
    });
    dx
}

pub fn relu2(x: &Array2<f64>) -> Array2<f64> {
    x.mapv(|v| v.max(0.0))
}

pub fn relu2_backward(y: &Array2<f64>, dy: &Array2<f64>) -> Array2<f64> {
    let mut dx = dy.clone();
    ndarray::Zip::from(&mut dx).and(y).for_each(|d, &v| {
        if v <= 0.0 {
            *d = 0.0;
        }
    });
    dx
}

/// Per-pixel softmax over the channel axis of (N,C,H,W).
pub fn softmax_channels(logits: &Array4<f64>) -> Array4<f64> {
    let (n, c, h, w) = logits.dim();
    let mut p = logits.clone();
    for i in 0..n {
        for y in 0..h {
            for x in 0..w {
                let mut maxv = f64::NEG_INFINITY;
                for ci in 0..c {
                    maxv = maxv.max(p[[i, ci, y, x]]);
                }
                let mut sum = 0.0;
                for ci in 0..c {
                    let e = (p[[i, ci, y, x]] - maxv).exp();
                    p[[i, ci, y, x]] = e;
                    sum += e;
                }
                for ci in 0..c {
                    p[[i, ci, y, x]] /= sum;
                }
            }
        }
    }
    p
}

/// Vector-Jacobian product of the channel softmax: given probabilities and
/// the loss gradient with respect to them, produce the logit gradient.
pub fn softmax_channels_backward(probs: &Array4<f64>, dprobs: &Array4<f64>) -> Array4<f64> {
    let (n, c, h, w) = probs.dim();
    let mut dz = Array4::<f64>::zeros(probs.dim());
    for i in 0..n {
        for y in 0..h {
            for x in 0..w {
                let mut dot = 0.0;
                for ci in 0..c {
                    dot += dprobs[[i, ci, y, x]] * probs[[i, ci, y, x]];
                }
                for ci in 0..c {
                    dz[[i, ci, y, x]] = probs[[i, ci, y, x]] * (dprobs[[i, ci, y, x]] - dot);
                }
            }
        }
    }
    dz
}

/// Global average pool (N,C,H,W) -> (N,C).
pub fn gap(x: &Array4<f64>) -> Array2<f64> {
    let (n, c, h, w) = x.dim();
    let m = (h * w) as f64;
    let mut y = Array2::<f64>::zeros((n, c));
    for i in 0..n {
        for ci in 0..c {
            y[[i, ci]] = x.index_axis(Axis(0), i).index_axis(Axis(0), ci).sum() / m;
        }
    }
    y
}

pub fn gap_backward(dlatent: &Array2<f64>, h: usize, w: usize) -> Array4<f64> {
    let (n, c) = dlatent.dim();
    let m = (h * w) as f64;
    Array4::from_shape_fn((n, c, h, w), |(i, ci, _, _)| dlatent[[i, ci]] / m)
}

/// Inverted-dropout mask: zeros with probability `rate`, else 1/(1-rate).
pub fn dropout_mask(dim: (usize, usize), rate: f64, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let keep = 1.0 - rate;
    Array2::from_shape_fn(dim, |_| {
        if rng.random::<f64>() < rate {
            0.0
        } else {
            1.0 / keep
        }
    })
}

pub fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}
