//! Flat-parameter FC → stacked LSTM → FC → FC network with hand-written
//! backpropagation through time.
//!
//! Parameter layout, in order:
//! FC1 weight `[fc1 × in]`, FC1 bias; per LSTM layer input weight
//! `[4H × in_l]`, recurrent weight `[4H × H]`, bias `[4H]` (gate order
//! input, forget, cell, output); FC2 weight `[fc2 × W·2H]`, bias; FC3
//! weight `[1 × fc2]`, bias. The FC2 input concatenates, for each time step,
//! the last layer's hidden state followed by its cell state.

use super::RegressorConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct LstmOffsets {
    pub input: usize,
    pub w_ih: usize,
    pub w_hh: usize,
    pub b: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Layout {
    pub window: usize,
    pub input: usize,
    pub fc1: usize,
    pub hidden: usize,
    pub fc2: usize,
    pub fc1_w: usize,
    pub fc1_b: usize,
    pub lstm: Vec<LstmOffsets>,
    pub fc2_w: usize,
    pub fc2_b: usize,
    pub fc3_w: usize,
    pub fc3_b: usize,
    pub total: usize,
}

impl Layout {
    pub fn new(cfg: &RegressorConfig) -> Self {
        let h = cfg.lstm_hidden;
        let mut at = 0;
        let mut take = |n: usize| {
            let o = at;
            at += n;
            o
        };
        let fc1_w = take(cfg.fc1_out * cfg.input_dim);
        let fc1_b = take(cfg.fc1_out);
        let mut lstm = Vec::with_capacity(cfg.lstm_layers);
        for l in 0..cfg.lstm_layers {
            let input = if l == 0 { cfg.fc1_out } else { h };
            let w_ih = take(4 * h * input);
            let w_hh = take(4 * h * h);
            let b = take(4 * h);
            lstm.push(LstmOffsets { input, w_ih, w_hh, b });
        }
        let feat = cfg.window * 2 * h;
        let fc2_w = take(cfg.fc2_out * feat);
        let fc2_b = take(cfg.fc2_out);
        let fc3_w = take(cfg.fc2_out);
        let fc3_b = take(1);
        Self {
            window: cfg.window,
            input: cfg.input_dim,
            fc1: cfg.fc1_out,
            hidden: h,
            fc2: cfg.fc2_out,
            fc1_w,
            fc1_b,
            lstm,
            fc2_w,
            fc2_b,
            fc3_w,
            fc3_b,
            total: at,
        }
    }

    pub fn feat_dim(&self) -> usize {
        self.window * 2 * self.hidden
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

#[inline]
fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    debug_assert_eq!(y.len(), x.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// out += W·x for row-major `W` with `out.len()` rows.
#[inline]
fn gemv_acc(out: &mut [f64], w: &[f64], x: &[f64]) {
    let cols = x.len();
    for (r, o) in out.iter_mut().enumerate() {
        *o += dot(&w[r * cols..(r + 1) * cols], x);
    }
}

/// out += Wᵀ·dy.
#[inline]
fn gemv_t_acc(out: &mut [f64], w: &[f64], dy: &[f64]) {
    let cols = out.len();
    for (r, &d) in dy.iter().enumerate() {
        if d != 0.0 {
            axpy(out, d, &w[r * cols..(r + 1) * cols]);
        }
    }
}

/// dW += dy ⊗ x.
#[inline]
fn outer_acc(dw: &mut [f64], dy: &[f64], x: &[f64]) {
    let cols = x.len();
    for (r, &d) in dy.iter().enumerate() {
        if d != 0.0 {
            axpy(&mut dw[r * cols..(r + 1) * cols], d, x);
        }
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Activations of one forward pass, kept for the backward pass.
#[derive(Debug, Clone)]
pub(crate) struct Trace {
    pub x: Vec<f64>,
    a1: Vec<f64>,
    z1: Vec<f64>,
    gates: Vec<Vec<f64>>,
    c: Vec<Vec<f64>>,
    tc: Vec<Vec<f64>>,
    h: Vec<Vec<f64>>,
    pub feat: Vec<f64>,
    a2: Vec<f64>,
    /// FC2 output after ReLU; the adaptation feature space.
    pub z2: Vec<f64>,
    pub y: f64,
}

impl Trace {
    pub fn new(l: &Layout) -> Self {
        let (w, h) = (l.window, l.hidden);
        let layers = l.lstm.len();
        Self {
            x: vec![0.0; w * l.input],
            a1: vec![0.0; w * l.fc1],
            z1: vec![0.0; w * l.fc1],
            gates: vec![vec![0.0; w * 4 * h]; layers],
            c: vec![vec![0.0; w * h]; layers],
            tc: vec![vec![0.0; w * h]; layers],
            h: vec![vec![0.0; w * h]; layers],
            feat: vec![0.0; l.feat_dim()],
            a2: vec![0.0; l.fc2],
            z2: vec![0.0; l.fc2],
            y: 0.0,
        }
    }
}

/// Reusable buffers for [`backward`].
#[derive(Debug, Clone)]
pub(crate) struct Scratch {
    dz2: Vec<f64>,
    dfeat: Vec<f64>,
    dh_ext: Vec<f64>,
    din: Vec<f64>,
    dc: Vec<f64>,
    dh_next: Vec<f64>,
    dc_next: Vec<f64>,
    dp: Vec<f64>,
    da1: Vec<f64>,
}

impl Scratch {
    pub fn new(l: &Layout) -> Self {
        let (w, h) = (l.window, l.hidden);
        let widest = l.fc1.max(h);
        Self {
            dz2: vec![0.0; l.fc2],
            dfeat: vec![0.0; l.feat_dim()],
            dh_ext: vec![0.0; w * h],
            din: vec![0.0; w * widest],
            dc: vec![0.0; h],
            dh_next: vec![0.0; h],
            dc_next: vec![0.0; h],
            dp: vec![0.0; 4 * h],
            da1: vec![0.0; l.fc1],
        }
    }
}

/// Forward pass on a normalized window (`W × in`, row-major); returns the
/// unit-scale output and fills `tr`.
pub(crate) fn forward(p: &[f64], l: &Layout, x: &[f64], tr: &mut Trace) -> f64 {
    let (w, h, fi) = (l.window, l.hidden, l.fc1);
    tr.x.copy_from_slice(x);
    let w1 = &p[l.fc1_w..l.fc1_w + fi * l.input];
    let b1 = &p[l.fc1_b..l.fc1_b + fi];
    for t in 0..w {
        let a = &mut tr.a1[t * fi..(t + 1) * fi];
        a.copy_from_slice(b1);
        gemv_acc(a, w1, &x[t * l.input..(t + 1) * l.input]);
        for (z, &v) in tr.z1[t * fi..(t + 1) * fi].iter_mut().zip(a.iter()) {
            *z = v.max(0.0);
        }
    }
    for (li, off) in l.lstm.iter().enumerate() {
        let nin = off.input;
        let w_ih = &p[off.w_ih..off.w_ih + 4 * h * nin];
        let w_hh = &p[off.w_hh..off.w_hh + 4 * h * h];
        let b = &p[off.b..off.b + 4 * h];
        let (below, rest) = tr.h.split_at_mut(li);
        let hs = &mut rest[0];
        let input_seq: &[f64] = if li == 0 { &tr.z1 } else { &below[li - 1] };
        let gates = &mut tr.gates[li];
        let cs = &mut tr.c[li];
        let tcs = &mut tr.tc[li];
        for t in 0..w {
            let g = &mut gates[t * 4 * h..(t + 1) * 4 * h];
            g.copy_from_slice(b);
            gemv_acc(g, w_ih, &input_seq[t * nin..(t + 1) * nin]);
            if t > 0 {
                let (prev, _) = hs.split_at(t * h);
                gemv_acc(g, w_hh, &prev[(t - 1) * h..]);
            }
            for j in 0..h {
                let ig = sigmoid(g[j]);
                let fg = sigmoid(g[h + j]);
                let gg = g[2 * h + j].tanh();
                let og = sigmoid(g[3 * h + j]);
                g[j] = ig;
                g[h + j] = fg;
                g[2 * h + j] = gg;
                g[3 * h + j] = og;
                let c_prev = if t > 0 { cs[(t - 1) * h + j] } else { 0.0 };
                let c = fg * c_prev + ig * gg;
                cs[t * h + j] = c;
                let tc = c.tanh();
                tcs[t * h + j] = tc;
                hs[t * h + j] = og * tc;
            }
        }
    }
    let top = l.lstm.len() - 1;
    for t in 0..w {
        tr.feat[t * 2 * h..t * 2 * h + h].copy_from_slice(&tr.h[top][t * h..(t + 1) * h]);
        tr.feat[t * 2 * h + h..(t + 1) * 2 * h].copy_from_slice(&tr.c[top][t * h..(t + 1) * h]);
    }
    let fd = l.feat_dim();
    tr.a2.copy_from_slice(&p[l.fc2_b..l.fc2_b + l.fc2]);
    gemv_acc(&mut tr.a2, &p[l.fc2_w..l.fc2_w + l.fc2 * fd], &tr.feat);
    for (z, &a) in tr.z2.iter_mut().zip(&tr.a2) {
        *z = a.max(0.0);
    }
    tr.y = p[l.fc3_b] + dot(&p[l.fc3_w..l.fc3_w + l.fc2], &tr.z2);
    tr.y
}

/// Accumulate into `g` the gradient of `dy·y + ⟨dz2_extra, z2⟩` for the pass in `tr`.
pub(crate) fn backward(p: &[f64], l: &Layout, tr: &Trace, dy: f64, dz2_extra: Option<&[f64]>, g: &mut [f64], s: &mut Scratch) {
    let (w, h, fi) = (l.window, l.hidden, l.fc1);
    let fd = l.feat_dim();

    g[l.fc3_b] += dy;
    axpy(&mut g[l.fc3_w..l.fc3_w + l.fc2], dy, &tr.z2);
    for (k, d) in s.dz2.iter_mut().enumerate() {
        let mut v = dy * p[l.fc3_w + k];
        if let Some(e) = dz2_extra {
            v += e[k];
        }
        *d = if tr.a2[k] > 0.0 { v } else { 0.0 };
    }
    let da2 = &s.dz2;
    axpy(&mut g[l.fc2_b..l.fc2_b + l.fc2], 1.0, da2);
    outer_acc(&mut g[l.fc2_w..l.fc2_w + l.fc2 * fd], da2, &tr.feat);
    s.dfeat.iter_mut().for_each(|v| *v = 0.0);
    gemv_t_acc(&mut s.dfeat, &p[l.fc2_w..l.fc2_w + l.fc2 * fd], da2);

    // External gradients arriving at the top layer's h and c.
    for t in 0..w {
        s.dh_ext[t * h..(t + 1) * h].copy_from_slice(&s.dfeat[t * 2 * h..t * 2 * h + h]);
    }
    let top = l.lstm.len() - 1;
    for li in (0..l.lstm.len()).rev() {
        let off = l.lstm[li];
        let nin = off.input;
        let input_seq: &[f64] = if li == 0 { &tr.z1 } else { &tr.h[li - 1] };
        let gates = &tr.gates[li];
        let cs = &tr.c[li];
        let tcs = &tr.tc[li];
        let hs = &tr.h[li];
        s.dh_next.iter_mut().for_each(|v| *v = 0.0);
        s.dc_next.iter_mut().for_each(|v| *v = 0.0);
        let din = &mut s.din[..w * nin];
        din.iter_mut().for_each(|v| *v = 0.0);
        for t in (0..w).rev() {
            let gt = &gates[t * 4 * h..(t + 1) * 4 * h];
            for j in 0..h {
                let dh = s.dh_ext[t * h + j] + s.dh_next[j];
                let tc = tcs[t * h + j];
                let (ig, fg, gg, og) = (gt[j], gt[h + j], gt[2 * h + j], gt[3 * h + j]);
                let mut dc = s.dc_next[j] + dh * og * (1.0 - tc * tc);
                if li == top {
                    dc += s.dfeat[t * 2 * h + h + j];
                }
                let c_prev = if t > 0 { cs[(t - 1) * h + j] } else { 0.0 };
                s.dp[j] = dc * gg * ig * (1.0 - ig);
                s.dp[h + j] = dc * c_prev * fg * (1.0 - fg);
                s.dp[2 * h + j] = dc * ig * (1.0 - gg * gg);
                s.dp[3 * h + j] = dh * tc * og * (1.0 - og);
                s.dc[j] = dc * fg;
            }
            std::mem::swap(&mut s.dc, &mut s.dc_next);
            axpy(&mut g[off.b..off.b + 4 * h], 1.0, &s.dp);
            outer_acc(&mut g[off.w_ih..off.w_ih + 4 * h * nin], &s.dp, &input_seq[t * nin..(t + 1) * nin]);
            gemv_t_acc(&mut din[t * nin..(t + 1) * nin], &p[off.w_ih..off.w_ih + 4 * h * nin], &s.dp);
            s.dh_next.iter_mut().for_each(|v| *v = 0.0);
            if t > 0 {
                outer_acc(&mut g[off.w_hh..off.w_hh + 4 * h * h], &s.dp, &hs[(t - 1) * h..t * h]);
                gemv_t_acc(&mut s.dh_next, &p[off.w_hh..off.w_hh + 4 * h * h], &s.dp);
            }
        }
        if li > 0 {
            s.dh_ext.copy_from_slice(&din[..w * h]);
        }
    }
    let w1 = l.fc1_w;
    for t in 0..w {
        for k in 0..fi {
            s.da1[k] = if tr.a1[t * fi + k] > 0.0 { s.din[t * fi + k] } else { 0.0 };
        }
        axpy(&mut g[l.fc1_b..l.fc1_b + fi], 1.0, &s.da1);
        outer_acc(&mut g[w1..w1 + fi * l.input], &s.da1, &tr.x[t * l.input..(t + 1) * l.input]);
    }
}
