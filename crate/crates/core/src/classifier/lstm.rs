//! Embedding → LSTM → dropout → dense → softmax, with exact backpropagation
//! through time.
//!
//! Gates are packed in the order input, forget, candidate, output along the
//! `4H` axis of the input weights, recurrent weights and bias.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ClassifierError;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Matrix { rows, cols, data }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `out += v · self` for a row vector `v` of length `rows`.
    #[inline]
    fn vec_mul_acc(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        for (r, &vr) in v.iter().enumerate() {
            if vr == 0.0 {
                continue;
            }
            for (o, &w) in out.iter_mut().zip(self.row(r)) {
                *o += vr * w;
            }
        }
    }

    /// `out[r] += self.row(r) · v` for a column vector `v` of length `cols`.
    #[inline]
    fn mul_vec_acc(&self, v: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            *o += self.row(r).iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    /// `self += a ⊗ b` (outer product).
    #[inline]
    fn add_outer(&mut self, a: &[f64], b: &[f64]) {
        for (r, &ar) in a.iter().enumerate() {
            if ar == 0.0 {
                continue;
            }
            for (x, &bc) in self.row_mut(r).iter_mut().zip(b) {
                *x += ar * bc;
            }
        }
    }
}

/// Layer sizes. `vocab` excludes the shared pad/OOV row, so the embedding
/// has `vocab + 1` rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub vocab: usize,
    pub embed: usize,
    pub hidden: usize,
    pub classes: usize,
}

impl Dims {
    pub fn new(vocab: usize, embed: usize, hidden: usize, classes: usize) -> Self {
        Dims { vocab, embed, hidden, classes }
    }
}

/// All trainable tensors. Gradients and Adam moments reuse this type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub dims: Dims,
    pub embedding: Matrix,
    pub lstm_w: Matrix,
    pub lstm_u: Matrix,
    pub lstm_b: Vec<f64>,
    pub dense_w: Matrix,
    pub dense_b: Vec<f64>,
}

pub const TENSOR_NAMES: [&str; 6] = ["embedding", "lstm_w", "lstm_u", "lstm_b", "dense_w", "dense_b"];

impl ModelParams {
    pub fn zeros(dims: Dims) -> Self {
        let Dims { vocab, embed, hidden, classes } = dims;
        ModelParams {
            dims,
            embedding: Matrix::zeros(vocab + 1, embed),
            lstm_w: Matrix::zeros(embed, 4 * hidden),
            lstm_u: Matrix::zeros(hidden, 4 * hidden),
            lstm_b: vec![0.0; 4 * hidden],
            dense_w: Matrix::zeros(hidden, classes),
            dense_b: vec![0.0; classes],
        }
    }

    /// Embeddings uniform in ±0.05, weight matrices uniform in
    /// ±sqrt(3 / fan_in), biases zero.
    pub fn init<R: Rng>(dims: Dims, rng: &mut R) -> Self {
        let mut p = ModelParams::zeros(dims);
        fill_uniform(&mut p.embedding.data, 0.05, rng);
        fill_uniform(&mut p.lstm_w.data, (3.0 / dims.embed as f64).sqrt(), rng);
        fill_uniform(&mut p.lstm_u.data, (3.0 / dims.hidden as f64).sqrt(), rng);
        fill_uniform(&mut p.dense_w.data, (3.0 / dims.hidden as f64).sqrt(), rng);
        p
    }

    /// Shape of each tensor in [`TENSOR_NAMES`] order.
    pub fn shapes(dims: Dims) -> [Vec<usize>; 6] {
        let Dims { vocab, embed, hidden, classes } = dims;
        [
            vec![vocab + 1, embed],
            vec![embed, 4 * hidden],
            vec![hidden, 4 * hidden],
            vec![4 * hidden],
            vec![hidden, classes],
            vec![classes],
        ]
    }

    pub fn tensors(&self) -> [&[f64]; 6] {
        [
            &self.embedding.data,
            &self.lstm_w.data,
            &self.lstm_u.data,
            &self.lstm_b,
            &self.dense_w.data,
            &self.dense_b,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 6] {
        [
            &mut self.embedding.data,
            &mut self.lstm_w.data,
            &mut self.lstm_u.data,
            &mut self.lstm_b,
            &mut self.dense_w.data,
            &mut self.dense_b,
        ]
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }

    /// Checks every tensor against the shapes implied by `dims`.
    pub fn validate(&self) -> Result<(), ClassifierError> {
        let shapes = Self::shapes(self.dims);
        let mats = [&self.embedding, &self.lstm_w, &self.lstm_u, &self.dense_w];
        let mat_names = ["embedding", "lstm_w", "lstm_u", "dense_w"];
        let mat_shapes = [&shapes[0], &shapes[1], &shapes[2], &shapes[4]];
        for ((m, name), shape) in mats.iter().zip(mat_names).zip(mat_shapes) {
            if m.rows != shape[0] || m.cols != shape[1] || m.data.len() != m.rows * m.cols {
                return Err(ClassifierError::Shape(format!(
                    "{name} is {}x{}, expected {}x{}",
                    m.rows, m.cols, shape[0], shape[1]
                )));
            }
        }
        if self.lstm_b.len() != shapes[3][0] {
            return Err(ClassifierError::Shape(format!("lstm_b has length {}", self.lstm_b.len())));
        }
        if self.dense_b.len() != shapes[5][0] {
            return Err(ClassifierError::Shape(format!("dense_b has length {}", self.dense_b.len())));
        }
        Ok(())
    }

    pub fn scale(&mut self, k: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|x| *x *= k);
        }
    }
}

fn fill_uniform<R: Rng>(xs: &mut [f64], limit: f64, rng: &mut R) {
    for x in xs {
        *x = rng.random_range(-limit..limit);
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `-ln p[true]`, with probabilities floored at 1e-12.
pub fn cross_entropy(probs: &[f64], true_label: usize) -> f64 {
    -probs[true_label].max(1e-12).ln()
}

/// Activations of one time step.
#[derive(Debug, Clone)]
pub struct StepCache {
    pub i: Vec<f64>,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub o: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
}

fn step(x: &[f64], h_prev: &[f64], c_prev: &[f64], p: &ModelParams) -> (Vec<f64>, StepCache) {
    let h = p.dims.hidden;
    let mut z = p.lstm_b.clone();
    p.lstm_w.vec_mul_acc(x, &mut z);
    p.lstm_u.vec_mul_acc(h_prev, &mut z);
    let i: Vec<f64> = z[..h].iter().map(|&v| sigmoid(v)).collect();
    let f: Vec<f64> = z[h..2 * h].iter().map(|&v| sigmoid(v)).collect();
    let g: Vec<f64> = z[2 * h..3 * h].iter().map(|&v| v.tanh()).collect();
    let o: Vec<f64> = z[3 * h..].iter().map(|&v| sigmoid(v)).collect();
    let c: Vec<f64> = (0..h).map(|k| f[k] * c_prev[k] + i[k] * g[k]).collect();
    let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
    let h_next = (0..h).map(|k| o[k] * tanh_c[k]).collect();
    (h_next, StepCache { i, f, g, o, c, tanh_c })
}

/// One LSTM step: returns the next hidden and cell state.
pub fn lstm_cell(
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    params: &ModelParams,
) -> Result<(Vec<f64>, Vec<f64>), ClassifierError> {
    let d = params.dims;
    if x.len() != d.embed || h_prev.len() != d.hidden || c_prev.len() != d.hidden {
        return Err(ClassifierError::Shape(format!(
            "lstm_cell got x={}, h={}, c={} for D={}, H={}",
            x.len(),
            h_prev.len(),
            c_prev.len(),
            d.embed,
            d.hidden
        )));
    }
    let (h, cache) = step(x, h_prev, c_prev, params);
    Ok((h, cache.c))
}

/// Everything the backward pass needs from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub indices: Vec<usize>,
    /// `hs[t]` is the hidden state entering step `t`; `hs[L]` is the final one.
    pub hs: Vec<Vec<f64>>,
    pub steps: Vec<StepCache>,
    pub mask: Option<Vec<f64>>,
    /// Final hidden state after dropout.
    pub dropped: Vec<f64>,
    pub probs: Vec<f64>,
}

pub fn forward(
    indices: &[usize],
    params: &ModelParams,
    dropout_mask: Option<&[f64]>,
) -> Result<(Vec<f64>, ForwardCache), ClassifierError> {
    let d = params.dims;
    if let Some(bad) = indices.iter().find(|&&ix| ix > d.vocab) {
        return Err(ClassifierError::Input(format!("token index {bad} exceeds vocabulary size {}", d.vocab)));
    }
    if let Some(m) = dropout_mask {
        if m.len() != d.hidden {
            return Err(ClassifierError::Shape(format!("dropout mask has length {}", m.len())));
        }
    }
    let zero = vec![0.0; d.hidden];
    let mut hs = Vec::with_capacity(indices.len() + 1);
    let mut steps = Vec::with_capacity(indices.len());
    hs.push(zero.clone());
    let mut c_prev = zero;
    for &ix in indices {
        let (h, cache) = step(params.embedding.row(ix), hs.last().unwrap(), &c_prev, params);
        c_prev = cache.c.clone();
        hs.push(h);
        steps.push(cache);
    }
    let last = hs.last().unwrap();
    let dropped: Vec<f64> = match dropout_mask {
        Some(m) => last.iter().zip(m).map(|(h, k)| h * k).collect(),
        None => last.clone(),
    };
    let mut logits = params.dense_b.clone();
    params.dense_w.vec_mul_acc(&dropped, &mut logits);
    if let Some(pos) = logits.iter().position(|z| !z.is_finite()) {
        return Err(ClassifierError::Numeric(format!("non-finite logit at class {pos}: {}", logits[pos])));
    }
    let probs = softmax(&logits);
    let cache = ForwardCache {
        indices: indices.to_vec(),
        hs,
        steps,
        mask: dropout_mask.map(<[f64]>::to_vec),
        dropped,
        probs: probs.clone(),
    };
    Ok((probs, cache))
}

/// Gradient of `cross_entropy(probs, true_label)` with respect to every
/// parameter, accumulated into `grads`.
pub fn backward_into(params: &ModelParams, cache: &ForwardCache, true_label: usize, grads: &mut ModelParams) {
    let hdim = params.dims.hidden;
    let mut dlogits = cache.probs.clone();
    dlogits[true_label] -= 1.0;

    grads.dense_w.add_outer(&cache.dropped, &dlogits);
    for (g, d) in grads.dense_b.iter_mut().zip(&dlogits) {
        *g += d;
    }
    let mut dh = vec![0.0; hdim];
    params.dense_w.mul_vec_acc(&dlogits, &mut dh);
    if let Some(mask) = &cache.mask {
        for (a, m) in dh.iter_mut().zip(mask) {
            *a *= m;
        }
    }

    let mut dc = vec![0.0; hdim];
    let mut dz = vec![0.0; 4 * hdim];
    let zero = vec![0.0; hdim];
    for t in (0..cache.steps.len()).rev() {
        let s = &cache.steps[t];
        let c_prev = if t == 0 { &zero } else { &cache.steps[t - 1].c };
        for k in 0..hdim {
            let dct = dc[k] + dh[k] * s.o[k] * (1.0 - s.tanh_c[k] * s.tanh_c[k]);
            let d_o = dh[k] * s.tanh_c[k];
            let d_i = dct * s.g[k];
            let d_g = dct * s.i[k];
            let d_f = dct * c_prev[k];
            dz[k] = d_i * s.i[k] * (1.0 - s.i[k]);
            dz[hdim + k] = d_f * s.f[k] * (1.0 - s.f[k]);
            dz[2 * hdim + k] = d_g * (1.0 - s.g[k] * s.g[k]);
            dz[3 * hdim + k] = d_o * s.o[k] * (1.0 - s.o[k]);
            dc[k] = dct * s.f[k];
        }
        let ix = cache.indices[t];
        grads.lstm_w.add_outer(params.embedding.row(ix), &dz);
        grads.lstm_u.add_outer(&cache.hs[t], &dz);
        for (g, d) in grads.lstm_b.iter_mut().zip(&dz) {
            *g += d;
        }
        params.lstm_w.mul_vec_acc(&dz, grads.embedding.row_mut(ix));
        dh.iter_mut().for_each(|v| *v = 0.0);
        params.lstm_u.mul_vec_acc(&dz, &mut dh);
    }
}

pub fn backward(params: &ModelParams, cache: &ForwardCache, true_label: usize) -> ModelParams {
    let mut grads = ModelParams::zeros(params.dims);
    backward_into(params, cache, true_label, &mut grads);
    grads
}
