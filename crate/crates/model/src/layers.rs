//! Layers with explicit forward and backward passes.
//!
//! Images are `[n][channel][row][col]`; sequences are time-major
//! `[t][batch][feature]`. Backward passes accumulate into a gradient copy
//! of the layer (same struct, zero-initialized).

use rand::Rng;

use crate::scalar::{gemm, Scalar};

pub const KERNEL: usize = 3;
pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct Param<F> {
    pub shape: Vec<usize>,
    pub data: Vec<F>,
}

impl<F: Scalar> Param<F> {
    pub fn zeros(shape: &[usize]) -> Self {
        Param { shape: shape.to_vec(), data: vec![F::zero(); shape.iter().product()] }
    }

    pub fn filled(shape: &[usize], v: F) -> Self {
        Param { shape: shape.to_vec(), data: vec![v; shape.iter().product()] }
    }

    pub fn uniform(shape: &[usize], bound: f64, rng: &mut impl Rng) -> Self {
        let n = shape.iter().product();
        let data = (0..n).map(|_| F::from_f64(rng.random_range(-bound..bound))).collect();
        Param { shape: shape.to_vec(), data }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn zero_(&mut self) {
        self.data.iter_mut().for_each(|v| *v = F::zero());
    }
}

fn fan_in_bound(fan_in: usize) -> f64 {
    1.0 / (fan_in as f64).sqrt()
}

// ---------------------------------------------------------------------------
// convolution

/// Unfold a `[c][h][w]` image into `[c*9][h*w]` patches (zero padding 1).
pub fn im2col<F: Scalar>(x: &[F], c: usize, h: usize, w: usize, cols: &mut [F]) {
    let hw = h * w;
    for ch in 0..c {
        let img = &x[ch * hw..(ch + 1) * hw];
        for ky in 0..KERNEL {
            for kx in 0..KERNEL {
                let row = &mut cols[((ch * KERNEL + ky) * KERNEL + kx) * hw..][..hw];
                let dx = kx as isize - 1;
                let x0 = (-dx).max(0) as usize;
                let x1 = (w as isize - dx).min(w as isize) as usize;
                for y in 0..h {
                    let sy = y as isize + ky as isize - 1;
                    let out = &mut row[y * w..(y + 1) * w];
                    if sy < 0 || sy >= h as isize {
                        out.iter_mut().for_each(|v| *v = F::zero());
                        continue;
                    }
                    let src = &img[sy as usize * w..(sy as usize + 1) * w];
                    out[..x0].iter_mut().for_each(|v| *v = F::zero());
                    out[x1..].iter_mut().for_each(|v| *v = F::zero());
                    let s0 = (x0 as isize + dx) as usize;
                    out[x0..x1].copy_from_slice(&src[s0..s0 + (x1 - x0)]);
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatter-add patch gradients back onto the image.
pub fn col2im_add<F: Scalar>(cols: &[F], c: usize, h: usize, w: usize, dx: &mut [F]) {
    let hw = h * w;
    for ch in 0..c {
        let img = &mut dx[ch * hw..(ch + 1) * hw];
        for ky in 0..KERNEL {
            for kx in 0..KERNEL {
                let row = &cols[((ch * KERNEL + ky) * KERNEL + kx) * hw..][..hw];
                let d = kx as isize - 1;
                let x0 = (-d).max(0) as usize;
                let x1 = (w as isize - d).min(w as isize) as usize;
                for y in 0..h {
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let s0 = (x0 as isize + d) as usize;
                    let dst = &mut img[sy as usize * w + s0..][..x1 - x0];
                    for (o, g) in dst.iter_mut().zip(&row[y * w + x0..y * w + x1]) {
                        *o += *g;
                    }
                }
            }
        }
    }
}

/// 3x3 convolution, stride 1, zero padding 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d<F> {
    pub cin: usize,
    pub cout: usize,
    /// `[cout][cin*9]`
    pub weight: Param<F>,
    pub bias: Option<Param<F>>,
}

impl<F: Scalar> Conv2d<F> {
    pub fn new(cin: usize, cout: usize, bias: bool, rng: &mut impl Rng) -> Self {
        let fan_in = cin * KERNEL * KERNEL;
        let bound = fan_in_bound(fan_in);
        Conv2d { cin, cout, weight: Param::uniform(&[cout, fan_in], bound, rng), bias: bias.then(|| Param::zeros(&[cout])) }
    }

    pub fn zeros_like(&self) -> Self {
        Conv2d {
            cin: self.cin,
            cout: self.cout,
            weight: Param::zeros(&self.weight.shape),
            bias: self.bias.as_ref().map(|b| Param::zeros(&b.shape)),
        }
    }

    /// `x`: `[n][cin][h][w]` -> `y`: `[n][cout][h][w]`
    pub fn forward(&self, x: &[F], n: usize, h: usize, w: usize, y: &mut [F]) {
        let hw = h * w;
        let k = self.cin * KERNEL * KERNEL;
        let mut cols = vec![F::zero(); k * hw];
        for i in 0..n {
            im2col(&x[i * self.cin * hw..(i + 1) * self.cin * hw], self.cin, h, w, &mut cols);
            let out = &mut y[i * self.cout * hw..(i + 1) * self.cout * hw];
            gemm(false, false, self.cout, hw, k, F::one(), &self.weight.data, &cols, F::zero(), out);
            if let Some(b) = &self.bias {
                for (co, row) in out.chunks_mut(hw).enumerate() {
                    row.iter_mut().for_each(|v| *v += b.data[co]);
                }
            }
        }
    }

    pub fn backward(&self, x: &[F], n: usize, h: usize, w: usize, dy: &[F], grad: &mut Conv2d<F>, mut dx: Option<&mut [F]>) {
        let hw = h * w;
        let k = self.cin * KERNEL * KERNEL;
        let mut cols = vec![F::zero(); k * hw];
        let mut dcols = if dx.is_some() { vec![F::zero(); k * hw] } else { Vec::new() };
        for i in 0..n {
            let dyi = &dy[i * self.cout * hw..(i + 1) * self.cout * hw];
            im2col(&x[i * self.cin * hw..(i + 1) * self.cin * hw], self.cin, h, w, &mut cols);
            gemm(false, true, self.cout, k, hw, F::one(), dyi, &cols, F::one(), &mut grad.weight.data);
            if let Some(gb) = &mut grad.bias {
                for (co, row) in dyi.chunks(hw).enumerate() {
                    gb.data[co] += row.iter().copied().sum::<F>();
                }
            }
            if let Some(dx) = dx.as_deref_mut() {
                gemm(true, false, k, hw, self.cout, F::one(), &self.weight.data, dyi, F::zero(), &mut dcols);
                col2im_add(&dcols, self.cin, h, w, &mut dx[i * self.cin * hw..(i + 1) * self.cin * hw]);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// batch norm + relu + max pool stage

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm<F> {
    pub gamma: Param<F>,
    pub beta: Param<F>,
    pub running_mean: Vec<F>,
    pub running_var: Vec<F>,
}

impl<F: Scalar> BatchNorm<F> {
    pub fn new(c: usize) -> Self {
        BatchNorm {
            gamma: Param::filled(&[c], F::one()),
            beta: Param::zeros(&[c]),
            running_mean: vec![F::zero(); c],
            running_var: vec![F::one(); c],
        }
    }

    pub fn zeros_like(&self) -> Self {
        let c = self.gamma.len();
        BatchNorm {
            gamma: Param::zeros(&[c]),
            beta: Param::zeros(&[c]),
            running_mean: vec![F::zero(); c],
            running_var: vec![F::zero(); c],
        }
    }
}

/// conv (no bias) -> batch norm -> ReLU -> 2x2 max pool
#[derive(Debug, Clone, PartialEq)]
pub struct ConvStage<F> {
    pub conv: Conv2d<F>,
    pub bn: BatchNorm<F>,
}

#[derive(Debug, Clone)]
pub struct StageCache<F> {
    pub h: usize,
    pub w: usize,
    xhat: Vec<F>,
    inv_std: Vec<F>,
    argmax: Vec<u8>,
}

fn pool_dims(h: usize, w: usize) -> (usize, usize) {
    (h / 2, w / 2)
}

/// ReLU then 2x2 max pool of one `[h][w]` plane.
fn relu_pool<F: Scalar>(src: &[F], h: usize, w: usize, out: &mut [F], argmax: Option<&mut [u8]>) {
    let (ho, wo) = pool_dims(h, w);
    let mut am = argmax;
    for oy in 0..ho {
        for ox in 0..wo {
            let base = 2 * oy * w + 2 * ox;
            let cand = [src[base], src[base + 1], src[base + w], src[base + w + 1]];
            let mut best = 0;
            for j in 1..4 {
                if cand[j] > cand[best] {
                    best = j;
                }
            }
            out[oy * wo + ox] = cand[best].max(F::zero());
            if let Some(a) = am.as_deref_mut() {
                a[oy * wo + ox] = best as u8;
            }
        }
    }
}

impl<F: Scalar> ConvStage<F> {
    pub fn new(cin: usize, cout: usize, rng: &mut impl Rng) -> Self {
        ConvStage { conv: Conv2d::new(cin, cout, false, rng), bn: BatchNorm::new(cout) }
    }

    pub fn zeros_like(&self) -> Self {
        ConvStage { conv: self.conv.zeros_like(), bn: self.bn.zeros_like() }
    }

    pub fn out_dims(h: usize, w: usize) -> (usize, usize) {
        pool_dims(h, w)
    }

    /// Training forward: batch statistics over all `n` images; running
    /// statistics are updated.
    pub fn forward_train(&mut self, x: &[F], n: usize, h: usize, w: usize) -> (Vec<F>, StageCache<F>) {
        let c = self.conv.cout;
        let hw = h * w;
        let mut z = vec![F::zero(); n * c * hw];
        self.conv.forward(x, n, h, w, &mut z);
        let m = (n * hw) as f64;
        let mut inv_std = vec![F::zero(); c];
        let eps = F::from_f64(BN_EPS);
        let mom = F::from_f64(BN_MOMENTUM);
        for ch in 0..c {
            let mut sum = 0f64;
            for i in 0..n {
                sum += z[(i * c + ch) * hw..][..hw].iter().map(|v| v.f64()).sum::<f64>();
            }
            let mean = sum / m;
            let mut var = 0f64;
            for i in 0..n {
                var += z[(i * c + ch) * hw..][..hw].iter().map(|v| (v.f64() - mean).powi(2)).sum::<f64>();
            }
            var /= m;
            let is = F::one() / (F::from_f64(var) + eps).sqrt();
            inv_std[ch] = is;
            let mean_f = F::from_f64(mean);
            for i in 0..n {
                z[(i * c + ch) * hw..][..hw].iter_mut().for_each(|v| *v = (*v - mean_f) * is);
            }
            let unbiased = if m > 1.0 { var * m / (m - 1.0) } else { var };
            self.bn.running_mean[ch] = (F::one() - mom) * self.bn.running_mean[ch] + mom * mean_f;
            self.bn.running_var[ch] = (F::one() - mom) * self.bn.running_var[ch] + mom * F::from_f64(unbiased);
        }
        let (ho, wo) = pool_dims(h, w);
        let mut out = vec![F::zero(); n * c * ho * wo];
        let mut argmax = vec![0u8; n * c * ho * wo];
        let mut plane = vec![F::zero(); hw];
        for i in 0..n {
            for ch in 0..c {
                let (g, b) = (self.bn.gamma.data[ch], self.bn.beta.data[ch]);
                let xh = &z[(i * c + ch) * hw..][..hw];
                plane.iter_mut().zip(xh).for_each(|(p, &v)| *p = g * v + b);
                let o = (i * c + ch) * ho * wo;
                relu_pool(&plane, h, w, &mut out[o..o + ho * wo], Some(&mut argmax[o..o + ho * wo]));
            }
        }
        (out, StageCache { h, w, xhat: z, inv_std, argmax })
    }

    /// Inference forward with running statistics; images are independent.
    pub fn forward_eval(&self, x: &[F], n: usize, h: usize, w: usize) -> Vec<F> {
        let c = self.conv.cout;
        let hw = h * w;
        let (ho, wo) = pool_dims(h, w);
        let mut z = vec![F::zero(); c * hw];
        let mut out = vec![F::zero(); n * c * ho * wo];
        let eps = F::from_f64(BN_EPS);
        for i in 0..n {
            self.conv.forward(&x[i * self.conv.cin * hw..(i + 1) * self.conv.cin * hw], 1, h, w, &mut z);
            for ch in 0..c {
                let is = F::one() / (self.bn.running_var[ch] + eps).sqrt();
                let scale = self.bn.gamma.data[ch] * is;
                let shift = self.bn.beta.data[ch] - self.bn.running_mean[ch] * scale;
                let plane = &mut z[ch * hw..(ch + 1) * hw];
                plane.iter_mut().for_each(|v| *v = *v * scale + shift);
                let o = (i * c + ch) * ho * wo;
                relu_pool(plane, h, w, &mut out[o..o + ho * wo], None);
            }
        }
        out
    }

    pub fn backward(
        &self,
        x: &[F],
        n: usize,
        cache: &StageCache<F>,
        dout: &[F],
        grad: &mut ConvStage<F>,
        need_dx: bool,
    ) -> Option<Vec<F>> {
        let c = self.conv.cout;
        let (h, w) = (cache.h, cache.w);
        let hw = h * w;
        let (ho, wo) = pool_dims(h, w);
        let m = F::from_f64((n * hw) as f64);
        let mut dz = vec![F::zero(); n * c * hw];
        for ch in 0..c {
            let (g, b) = (self.bn.gamma.data[ch], self.bn.beta.data[ch]);
            let mut sum_dxhat = F::zero();
            let mut sum_dxhat_xhat = F::zero();
            let (mut dgamma, mut dbeta) = (F::zero(), F::zero());
            for i in 0..n {
                let base = (i * c + ch) * hw;
                let xh = &cache.xhat[base..base + hw];
                let ob = (i * c + ch) * ho * wo;
                for oy in 0..ho {
                    for ox in 0..wo {
                        let gout = dout[ob + oy * wo + ox];
                        if gout == F::zero() {
                            continue;
                        }
                        let a = cache.argmax[ob + oy * wo + ox] as usize;
                        let pos = (2 * oy + a / 2) * w + 2 * ox + a % 2;
                        let xv = xh[pos];
                        if g * xv + b > F::zero() {
                            dz[base + pos] = gout;
                            dgamma += gout * xv;
                            dbeta += gout;
                        }
                    }
                }
                // dz now holds dy; turn it into dxhat
                for (d, &xv) in dz[base..base + hw].iter_mut().zip(xh) {
                    *d *= g;
                    sum_dxhat += *d;
                    sum_dxhat_xhat += *d * xv;
                }
            }
            grad.bn.gamma.data[ch] += dgamma;
            grad.bn.beta.data[ch] += dbeta;
            let is = cache.inv_std[ch];
            for i in 0..n {
                let base = (i * c + ch) * hw;
                for (d, &xv) in dz[base..base + hw].iter_mut().zip(&cache.xhat[base..base + hw]) {
                    *d = is / m * (m * *d - sum_dxhat - xv * sum_dxhat_xhat);
                }
            }
        }
        let mut dx = need_dx.then(|| vec![F::zero(); n * self.conv.cin * hw]);
        self.conv.backward(x, n, h, w, &dz, &mut grad.conv, dx.as_deref_mut());
        dx
    }
}

/// A stack of [`ConvStage`]s.
#[derive(Debug, Clone, PartialEq)]
pub struct Backbone<F> {
    pub stages: Vec<ConvStage<F>>,
}

#[derive(Debug, Clone)]
pub struct BackboneCache<F> {
    pub n: usize,
    /// stage outputs; the last one is the backbone output
    pub outputs: Vec<Vec<F>>,
    pub stages: Vec<StageCache<F>>,
    pub out_h: usize,
    pub out_w: usize,
}

impl<F: Scalar> BackboneCache<F> {
    pub fn output(&self) -> &[F] {
        self.outputs.last().expect("backbone has stages")
    }
}

impl<F: Scalar> Backbone<F> {
    pub fn new(cin: usize, channels: &[usize], rng: &mut impl Rng) -> Self {
        let mut stages = Vec::new();
        let mut c = cin;
        for &co in channels {
            stages.push(ConvStage::new(c, co, rng));
            c = co;
        }
        Backbone { stages }
    }

    pub fn zeros_like(&self) -> Self {
        Backbone { stages: self.stages.iter().map(ConvStage::zeros_like).collect() }
    }

    pub fn out_channels(&self) -> usize {
        self.stages.last().map(|s| s.conv.cout).unwrap_or(0)
    }

    pub fn out_dims(&self, h: usize, w: usize) -> (usize, usize) {
        self.stages.iter().fold((h, w), |(h, w), _| ConvStage::<F>::out_dims(h, w))
    }

    pub fn forward_train(&mut self, x: &[F], n: usize, h: usize, w: usize) -> BackboneCache<F> {
        let mut outputs: Vec<Vec<F>> = Vec::with_capacity(self.stages.len());
        let mut caches = Vec::with_capacity(self.stages.len());
        let (mut ch, mut cw) = (h, w);
        for (k, stage) in self.stages.iter_mut().enumerate() {
            let input: &[F] = if k == 0 { x } else { &outputs[k - 1] };
            let (out, cache) = stage.forward_train(input, n, ch, cw);
            (ch, cw) = pool_dims(ch, cw);
            outputs.push(out);
            caches.push(cache);
        }
        BackboneCache { n, outputs, stages: caches, out_h: ch, out_w: cw }
    }

    pub fn forward_eval(&self, x: &[F], n: usize, h: usize, w: usize) -> Vec<F> {
        let mut cur = x.to_vec();
        let (mut ch, mut cw) = (h, w);
        for stage in &self.stages {
            cur = stage.forward_eval(&cur, n, ch, cw);
            (ch, cw) = pool_dims(ch, cw);
        }
        cur
    }

    /// Backpropagate `dout` (gradient w.r.t. the backbone output). The
    /// input gradient is not needed anywhere, so it is not computed.
    pub fn backward(&self, x: &[F], cache: &BackboneCache<F>, dout: Vec<F>, grad: &mut Backbone<F>) {
        let mut d = dout;
        for k in (0..self.stages.len()).rev() {
            let input: &[F] = if k == 0 { x } else { &cache.outputs[k - 1] };
            let dx = self.stages[k].backward(input, cache.n, &cache.stages[k], &d, &mut grad.stages[k], k > 0);
            match dx {
                Some(dx) => d = dx,
                None => break,
            }
        }
    }
}

// ---------------------------------------------------------------------------
// dense layers

#[derive(Debug, Clone, PartialEq)]
pub struct Linear<F> {
    pub inp: usize,
    pub out: usize,
    /// `[out][inp]`
    pub weight: Param<F>,
    pub bias: Param<F>,
}

impl<F: Scalar> Linear<F> {
    pub fn new(inp: usize, out: usize, rng: &mut impl Rng) -> Self {
        Linear { inp, out, weight: Param::uniform(&[out, inp], fan_in_bound(inp), rng), bias: Param::zeros(&[out]) }
    }

    pub fn zeros_like(&self) -> Self {
        Linear { inp: self.inp, out: self.out, weight: Param::zeros(&[self.out, self.inp]), bias: Param::zeros(&[self.out]) }
    }

    /// `x`: `[n][inp]` -> `[n][out]`
    pub fn forward(&self, x: &[F], n: usize) -> Vec<F> {
        let mut y = vec![F::zero(); n * self.out];
        for row in y.chunks_mut(self.out) {
            row.copy_from_slice(&self.bias.data);
        }
        gemm(false, true, n, self.out, self.inp, F::one(), x, &self.weight.data, F::one(), &mut y);
        y
    }

    pub fn backward(&self, x: &[F], n: usize, dy: &[F], grad: &mut Linear<F>, need_dx: bool) -> Option<Vec<F>> {
        gemm(true, false, self.out, self.inp, n, F::one(), dy, x, F::one(), &mut grad.weight.data);
        for row in dy.chunks(self.out) {
            grad.bias.data.iter_mut().zip(row).for_each(|(g, &d)| *g += d);
        }
        need_dx.then(|| {
            let mut dx = vec![F::zero(); n * self.inp];
            gemm(false, false, n, self.inp, self.out, F::one(), dy, &self.weight.data, F::zero(), &mut dx);
            dx
        })
    }
}

pub fn sigmoid<F: Scalar>(x: F) -> F {
    F::one() / (F::one() + (-x).exp())
}

// ---------------------------------------------------------------------------
// LSTM

/// One LSTM layer, gate order (input, forget, cell, output).
#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayer<F> {
    pub input: usize,
    pub hidden: usize,
    /// `[4H][input]`
    pub w_ih: Param<F>,
    /// `[4H][H]`
    pub w_hh: Param<F>,
    /// `[4H]`
    pub bias: Param<F>,
}

#[derive(Debug, Clone)]
pub struct LstmCache<F> {
    steps: usize,
    batch: usize,
    x: Vec<F>,
    /// post-activation gates `[t][b][4H]`
    gates: Vec<F>,
    c: Vec<F>,
    tanh_c: Vec<F>,
    h: Vec<F>,
}

impl<F: Scalar> LstmLayer<F> {
    pub fn new(input: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let bound = fan_in_bound(hidden);
        let mut layer = LstmLayer {
            input,
            hidden,
            w_ih: Param::uniform(&[4 * hidden, input], bound, rng),
            w_hh: Param::uniform(&[4 * hidden, hidden], bound, rng),
            bias: Param::zeros(&[4 * hidden]),
        };
        layer.bias.data[hidden..2 * hidden].iter_mut().for_each(|b| *b = F::one());
        layer
    }

    pub fn zeros_like(&self) -> Self {
        LstmLayer {
            input: self.input,
            hidden: self.hidden,
            w_ih: Param::zeros(&self.w_ih.shape),
            w_hh: Param::zeros(&self.w_hh.shape),
            bias: Param::zeros(&self.bias.shape),
        }
    }

    /// Re-draw the input-to-hidden matrix (used when transferring the
    /// recurrent weights to a layer with a different input width).
    pub fn reinit_input(&mut self, rng: &mut impl Rng) {
        self.w_ih = Param::uniform(&self.w_ih.shape, fan_in_bound(self.hidden), rng);
    }

    /// `x`: `[t][b][input]` -> hidden states `[t][b][H]`, zero initial state.
    pub fn forward(&self, x: &[F], steps: usize, batch: usize) -> (Vec<F>, LstmCache<F>) {
        let hd = self.hidden;
        let g4 = 4 * hd;
        let mut gates = vec![F::zero(); steps * batch * g4];
        for row in gates.chunks_mut(g4) {
            row.copy_from_slice(&self.bias.data);
        }
        gemm(false, true, steps * batch, g4, self.input, F::one(), x, &self.w_ih.data, F::one(), &mut gates);
        let mut c = vec![F::zero(); steps * batch * hd];
        let mut tanh_c = vec![F::zero(); steps * batch * hd];
        let mut h = vec![F::zero(); steps * batch * hd];
        for t in 0..steps {
            let (prev_h, cur) = h.split_at_mut(t * batch * hd);
            let pre = &mut gates[t * batch * g4..(t + 1) * batch * g4];
            if t > 0 {
                let hp = &prev_h[(t - 1) * batch * hd..];
                gemm(false, true, batch, g4, hd, F::one(), hp, &self.w_hh.data, F::one(), pre);
            }
            let cur_h = &mut cur[..batch * hd];
            for b in 0..batch {
                let g = &mut pre[b * g4..(b + 1) * g4];
                for j in 0..hd {
                    let i_g = sigmoid(g[j]);
                    let f_g = sigmoid(g[hd + j]);
                    let c_g = g[2 * hd + j].tanh();
                    let o_g = sigmoid(g[3 * hd + j]);
                    g[j] = i_g;
                    g[hd + j] = f_g;
                    g[2 * hd + j] = c_g;
                    g[3 * hd + j] = o_g;
                    let cp = if t > 0 { c[((t - 1) * batch + b) * hd + j] } else { F::zero() };
                    let cn = f_g * cp + i_g * c_g;
                    let idx = (t * batch + b) * hd + j;
                    c[idx] = cn;
                    tanh_c[idx] = cn.tanh();
                    cur_h[b * hd + j] = o_g * tanh_c[idx];
                }
            }
        }
        let cache = LstmCache { steps, batch, x: x.to_vec(), gates, c, tanh_c, h: h.clone() };
        (h, cache)
    }

    /// `dh`: gradient w.r.t. every emitted hidden state `[t][b][H]`.
    /// Returns the input gradient `[t][b][input]`.
    pub fn backward(&self, cache: &LstmCache<F>, dh: &[F], grad: &mut LstmLayer<F>) -> Vec<F> {
        let (steps, batch, hd) = (cache.steps, cache.batch, self.hidden);
        let g4 = 4 * hd;
        let mut dpre = vec![F::zero(); steps * batch * g4];
        let mut dh_next = vec![F::zero(); batch * hd];
        let mut dc_next = vec![F::zero(); batch * hd];
        let one = F::one();
        for t in (0..steps).rev() {
            for b in 0..batch {
                let g = &cache.gates[(t * batch + b) * g4..][..g4];
                let dp = &mut dpre[(t * batch + b) * g4..][..g4];
                for j in 0..hd {
                    let idx = (t * batch + b) * hd + j;
                    let dht = dh[idx] + dh_next[b * hd + j];
                    let (i_g, f_g, c_g, o_g) = (g[j], g[hd + j], g[2 * hd + j], g[3 * hd + j]);
                    let tc = cache.tanh_c[idx];
                    let dc = dht * o_g * (one - tc * tc) + dc_next[b * hd + j];
                    let cp = if t > 0 { cache.c[idx - batch * hd] } else { F::zero() };
                    dp[j] = dc * c_g * i_g * (one - i_g);
                    dp[hd + j] = dc * cp * f_g * (one - f_g);
                    dp[2 * hd + j] = dc * i_g * (one - c_g * c_g);
                    dp[3 * hd + j] = dht * tc * o_g * (one - o_g);
                    dc_next[b * hd + j] = dc * f_g;
                }
            }
            let dpt = &dpre[t * batch * g4..(t + 1) * batch * g4];
            gemm(false, false, batch, hd, g4, one, dpt, &self.w_hh.data, F::zero(), &mut dh_next);
        }
        // recurrent weights see h_{t-1} for t >= 1
        if steps > 1 {
            gemm(
                true,
                false,
                g4,
                hd,
                (steps - 1) * batch,
                one,
                &dpre[batch * g4..],
                &cache.h[..(steps - 1) * batch * hd],
                one,
                &mut grad.w_hh.data,
            );
        }
        gemm(true, false, g4, self.input, steps * batch, one, &dpre, &cache.x, one, &mut grad.w_ih.data);
        for row in dpre.chunks(g4) {
            grad.bias.data.iter_mut().zip(row).for_each(|(g, &d)| *g += d);
        }
        let mut dx = vec![F::zero(); steps * batch * self.input];
        gemm(false, false, steps * batch, self.input, g4, one, &dpre, &self.w_ih.data, F::zero(), &mut dx);
        dx
    }
}

/// Stacked LSTM layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Lstm<F> {
    pub layers: Vec<LstmLayer<F>>,
}

impl<F: Scalar> Lstm<F> {
    pub fn new(input: usize, hidden: usize, layers: usize, rng: &mut impl Rng) -> Self {
        let layers = (0..layers).map(|l| LstmLayer::new(if l == 0 { input } else { hidden }, hidden, rng)).collect();
        Lstm { layers }
    }

    pub fn zeros_like(&self) -> Self {
        Lstm { layers: self.layers.iter().map(LstmLayer::zeros_like).collect() }
    }

    pub fn hidden(&self) -> usize {
        self.layers[0].hidden
    }

    pub fn forward(&self, x: &[F], steps: usize, batch: usize) -> (Vec<F>, Vec<LstmCache<F>>) {
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut cur = x.to_vec();
        for layer in &self.layers {
            let (h, c) = layer.forward(&cur, steps, batch);
            caches.push(c);
            cur = h;
        }
        (cur, caches)
    }

    pub fn backward(&self, caches: &[LstmCache<F>], dh: Vec<F>, grad: &mut Lstm<F>) -> Vec<F> {
        let mut d = dh;
        for (l, layer) in self.layers.iter().enumerate().rev() {
            d = layer.backward(&caches[l], &d, &mut grad.layers[l]);
        }
        d
    }
}

// ---------------------------------------------------------------------------
// multimodal transfer module

/// Cross-modal channel recalibration on pooled descriptors.
#[derive(Debug, Clone, PartialEq)]
pub struct Mmtm<F> {
    pub squeeze: Linear<F>,
    pub gate_a: Linear<F>,
    pub gate_b: Linear<F>,
}

#[derive(Debug, Clone)]
pub struct MmtmCache<F> {
    n: usize,
    joint: Vec<F>,
    z_pre: Vec<F>,
    z: Vec<F>,
    sig_a: Vec<F>,
    sig_b: Vec<F>,
}

impl<F: Scalar> Mmtm<F> {
    pub fn new(ca: usize, cb: usize, rng: &mut impl Rng) -> Self {
        let bottleneck = ((ca + cb) / 4).max(1);
        Mmtm {
            squeeze: Linear::new(ca + cb, bottleneck, rng),
            gate_a: Linear::new(bottleneck, ca, rng),
            gate_b: Linear::new(bottleneck, cb, rng),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Mmtm { squeeze: self.squeeze.zeros_like(), gate_a: self.gate_a.zeros_like(), gate_b: self.gate_b.zeros_like() }
    }

    pub fn channels(&self) -> (usize, usize) {
        (self.gate_a.out, self.gate_b.out)
    }

    /// Gates `E_A, E_B` in (0, 2) from squeezed descriptors `s_a [n][Ca]`, `s_b [n][Cb]`.
    pub fn gates(&self, s_a: &[F], s_b: &[F], n: usize) -> (Vec<F>, Vec<F>, MmtmCache<F>) {
        let (ca, cb) = self.channels();
        let mut joint = Vec::with_capacity(n * (ca + cb));
        for i in 0..n {
            joint.extend_from_slice(&s_a[i * ca..(i + 1) * ca]);
            joint.extend_from_slice(&s_b[i * cb..(i + 1) * cb]);
        }
        let z_pre = self.squeeze.forward(&joint, n);
        let z: Vec<F> = z_pre.iter().map(|&v| v.max(F::zero())).collect();
        let sig_a: Vec<F> = self.gate_a.forward(&z, n).into_iter().map(sigmoid).collect();
        let sig_b: Vec<F> = self.gate_b.forward(&z, n).into_iter().map(sigmoid).collect();
        let two = F::one() + F::one();
        let e_a = sig_a.iter().map(|&s| two * s).collect();
        let e_b = sig_b.iter().map(|&s| two * s).collect();
        (e_a, e_b, MmtmCache { n, joint, z_pre, z, sig_a, sig_b })
    }

    /// Backward from gate gradients to descriptor gradients.
    pub fn backward(&self, cache: &MmtmCache<F>, de_a: &[F], de_b: &[F], grad: &mut Mmtm<F>) -> (Vec<F>, Vec<F>) {
        let n = cache.n;
        let (ca, cb) = self.channels();
        let two = F::one() + F::one();
        let dpa: Vec<F> = de_a.iter().zip(&cache.sig_a).map(|(&d, &s)| d * two * s * (F::one() - s)).collect();
        let dpb: Vec<F> = de_b.iter().zip(&cache.sig_b).map(|(&d, &s)| d * two * s * (F::one() - s)).collect();
        let dz_a = self.gate_a.backward(&cache.z, n, &dpa, &mut grad.gate_a, true).unwrap();
        let dz_b = self.gate_b.backward(&cache.z, n, &dpb, &mut grad.gate_b, true).unwrap();
        let dz_pre: Vec<F> = dz_a
            .iter()
            .zip(&dz_b)
            .zip(&cache.z_pre)
            .map(|((&a, &b), &p)| if p > F::zero() { a + b } else { F::zero() })
            .collect();
        let dj = self.squeeze.backward(&cache.joint, n, &dz_pre, &mut grad.squeeze, true).unwrap();
        let mut ds_a = Vec::with_capacity(n * ca);
        let mut ds_b = Vec::with_capacity(n * cb);
        for row in dj.chunks(ca + cb) {
            ds_a.extend_from_slice(&row[..ca]);
            ds_b.extend_from_slice(&row[ca..]);
        }
        (ds_a, ds_b)
    }
}

/// Apply channel gates to feature maps: `out = X * E` per channel.
pub fn apply_gates<F: Scalar>(x: &[F], gates: &[F], n: usize, c: usize, hw: usize) -> Vec<F> {
    let mut out = x.to_vec();
    for i in 0..n {
        for ch in 0..c {
            let g = gates[i * c + ch];
            out[(i * c + ch) * hw..][..hw].iter_mut().for_each(|v| *v *= g);
        }
    }
    out
}

/// Global average pool `[n][c][hw]` -> `[n][c]`.
pub fn global_avg_pool<F: Scalar>(x: &[F], n: usize, c: usize, hw: usize) -> Vec<F> {
    let inv = F::one() / F::from_f64(hw as f64);
    x.chunks(hw).take(n * c).map(|p| p.iter().copied().sum::<F>() * inv).collect()
}

// ---------------------------------------------------------------------------
// prediction head

/// FC -> ReLU -> FC producing one logit per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Head<F> {
    pub fc1: Linear<F>,
    pub fc2: Linear<F>,
}

#[derive(Debug, Clone)]
pub struct HeadCache<F> {
    n: usize,
    x: Vec<F>,
    a_pre: Vec<F>,
    a: Vec<F>,
}

impl<F: Scalar> Head<F> {
    pub fn new(inp: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        Head { fc1: Linear::new(inp, hidden, rng), fc2: Linear::new(hidden, 1, rng) }
    }

    pub fn zeros_like(&self) -> Self {
        Head { fc1: self.fc1.zeros_like(), fc2: self.fc2.zeros_like() }
    }

    pub fn forward(&self, x: &[F], n: usize) -> (Vec<F>, HeadCache<F>) {
        let a_pre = self.fc1.forward(x, n);
        let a: Vec<F> = a_pre.iter().map(|&v| v.max(F::zero())).collect();
        let logits = self.fc2.forward(&a, n);
        (logits, HeadCache { n, x: x.to_vec(), a_pre, a })
    }

    pub fn backward(&self, cache: &HeadCache<F>, dlogit: &[F], grad: &mut Head<F>) -> Vec<F> {
        let n = cache.n;
        let da = self.fc2.backward(&cache.a, n, dlogit, &mut grad.fc2, true).unwrap();
        let da_pre: Vec<F> = da.iter().zip(&cache.a_pre).map(|(&d, &p)| if p > F::zero() { d } else { F::zero() }).collect();
        self.fc1.backward(&cache.x, n, &da_pre, &mut grad.fc1, true).unwrap()
    }
}
