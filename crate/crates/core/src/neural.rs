//! Dense feed-forward Q-network with exact backpropagation.
//!
//! Arbitrary layer sizes, ReLU on hidden layers, identity output, f64
//! throughout. The loss is the squared TD error on the taken action only;
//! `backward` returns its exact gradient, which the finite-difference suite
//! checks parameter by parameter. Updates go through Adam with bias
//! correction.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
struct Layer {
    /// Row-major, `rows` x `cols` = out x in.
    w: Vec<f64>,
    b: Vec<f64>,
    rows: usize,
    cols: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Mlp {
    pub sizes: Vec<usize>,
    layers: Vec<Layer>,
}

/// Per-layer gradient buffers, shape-matched to an `Mlp`.
#[derive(Debug, Clone)]
pub struct Gradients {
    w: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros(net: &Mlp) -> Self {
        Gradients {
            w: net.layers.iter().map(|l| vec![0.0; l.w.len()]).collect(),
            b: net.layers.iter().map(|l| vec![0.0; l.b.len()]).collect(),
        }
    }

    pub fn clear(&mut self) {
        for g in self.w.iter_mut().chain(self.b.iter_mut()) {
            g.iter_mut().for_each(|x| *x = 0.0);
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four accumulators break the dependency chain; this is the hot loop of
    // the whole trainer.
    let chunks = a.len() / 4 * 4;
    let (mut s0, mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0, 0.0);
    let mut i = 0;
    while i < chunks {
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
        i += 4;
    }
    let mut s = (s0 + s1) + (s2 + s3);
    while i < a.len() {
        s += a[i] * b[i];
        i += 1;
    }
    s
}

impl Mlp {
    /// Uniform Xavier weights in +-sqrt(6 / (fan_in + fan_out)), zero
    /// biases, drawn in a fixed order so equal seeds give equal parameters.
    pub fn new(sizes: &[usize], rng: &mut impl Rng) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output sizes");
        let layers = sizes
            .windows(2)
            .map(|pair| {
                let (fan_in, fan_out) = (pair[0], pair[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let w = (0..fan_in * fan_out)
                    .map(|_| rng.gen_range(-limit..limit))
                    .collect();
                Layer {
                    w,
                    b: vec![0.0; fan_out],
                    rows: fan_out,
                    cols: fan_in,
                }
            })
            .collect();
        Mlp {
            sizes: sizes.to_vec(),
            layers,
        }
    }

    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2);
        let layers = sizes
            .windows(2)
            .map(|pair| Layer {
                w: vec![0.0; pair[0] * pair[1]],
                b: vec![0.0; pair[1]],
                rows: pair[1],
                cols: pair[0],
            })
            .collect();
        Mlp {
            sizes: sizes.to_vec(),
            layers,
        }
    }

    pub fn input_len(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_len(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_len() {
            return Err(Error::Shape {
                expected: self.input_len(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Action values for one input. Pure function of (parameters, input).
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let last = self.layers.len() - 1;
        let mut a = x.to_vec();
        for (idx, layer) in self.layers.iter().enumerate() {
            let mut out = Vec::with_capacity(layer.rows);
            for r in 0..layer.rows {
                let z = layer.b[r] + dot(&layer.w[r * layer.cols..(r + 1) * layer.cols], &a);
                out.push(if idx < last { z.max(0.0) } else { z });
            }
            a = out;
        }
        Ok(a)
    }

    /// Forward pass keeping every layer's post-activation output.
    fn forward_cached(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let last = self.layers.len() - 1;
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        for (idx, layer) in self.layers.iter().enumerate() {
            let a = acts.last().unwrap();
            let mut out = Vec::with_capacity(layer.rows);
            for r in 0..layer.rows {
                let z = layer.b[r] + dot(&layer.w[r * layer.cols..(r + 1) * layer.cols], a);
                out.push(if idx < last { z.max(0.0) } else { z });
            }
            acts.push(out);
        }
        acts
    }

    /// Accumulates into `grads` the exact gradient of
    /// 0.5 * (Q(x, action) - td_target)^2 and returns that loss. The other
    /// output head receives zero gradient. Call `grads.clear()` between
    /// batches; batch averaging happens via the optimizer's `scale`.
    pub fn backward(
        &self,
        x: &[f64],
        action: usize,
        td_target: f64,
        grads: &mut Gradients,
    ) -> Result<f64> {
        self.check_input(x)?;
        if action >= self.output_len() {
            return Err(Error::Shape {
                expected: self.output_len(),
                got: action,
            });
        }
        let acts = self.forward_cached(x);
        let q = acts.last().unwrap()[action];
        let delta_out = q - td_target;
        let loss = 0.5 * delta_out * delta_out;

        let mut delta = vec![0.0; self.output_len()];
        delta[action] = delta_out;
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let input = &acts[l];
            let gw = &mut grads.w[l];
            let gb = &mut grads.b[l];
            for r in 0..layer.rows {
                let d = delta[r];
                if d != 0.0 {
                    let row = &mut gw[r * layer.cols..(r + 1) * layer.cols];
                    for (g, &a) in row.iter_mut().zip(input.iter()) {
                        *g += d * a;
                    }
                    gb[r] += d;
                }
            }
            if l > 0 {
                let mut prev = vec![0.0; layer.cols];
                for r in 0..layer.rows {
                    let d = delta[r];
                    if d != 0.0 {
                        let row = &layer.w[r * layer.cols..(r + 1) * layer.cols];
                        for (p, &w) in prev.iter_mut().zip(row.iter()) {
                            *p += d * w;
                        }
                    }
                }
                // ReLU gate: units that were clamped to zero pass nothing.
                for (p, &a) in prev.iter_mut().zip(acts[l].iter()) {
                    if a <= 0.0 {
                        *p = 0.0;
                    }
                }
                delta = prev;
            }
        }
        Ok(loss)
    }

    pub fn params_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.w.iter().chain(l.b.iter()).all(|x| x.is_finite()))
    }

    /// Flat view of all parameters, for tests that perturb them one by one.
    pub fn param(&self, idx: usize) -> f64 {
        self.with_param(idx, |p| *p)
    }

    pub fn set_param(&mut self, idx: usize, value: f64) {
        let mut i = idx;
        for l in self.layers.iter_mut() {
            if i < l.w.len() {
                l.w[i] = value;
                return;
            }
            i -= l.w.len();
            if i < l.b.len() {
                l.b[i] = value;
                return;
            }
            i -= l.b.len();
        }
        panic!("parameter index {idx} out of range");
    }

    fn with_param<T>(&self, idx: usize, f: impl Fn(&f64) -> T) -> T {
        let mut i = idx;
        for l in &self.layers {
            if i < l.w.len() {
                return f(&l.w[i]);
            }
            i -= l.w.len();
            if i < l.b.len() {
                return f(&l.b[i]);
            }
            i -= l.b.len();
        }
        panic!("parameter index {idx} out of range");
    }

    /// Gradient entry at the same flat index used by `param`.
    pub fn grad_at(&self, grads: &Gradients, idx: usize) -> f64 {
        let mut i = idx;
        for (l, layer) in self.layers.iter().enumerate() {
            if i < layer.w.len() {
                return grads.w[l][i];
            }
            i -= layer.w.len();
            if i < layer.b.len() {
                return grads.b[l][i];
            }
            i -= layer.b.len();
        }
        panic!("parameter index {idx} out of range");
    }

    /// Frobenius norms of the weight matrices, an upper bound on the layer
    /// operator norms.
    pub fn weight_norms(&self) -> Vec<f64> {
        self.layers
            .iter()
            .map(|l| l.w.iter().map(|w| w * w).sum::<f64>().sqrt())
            .collect()
    }
}

/// Copies all parameters from `src` into `dst`; architectures must match.
pub fn copy_parameters(src: &Mlp, dst: &mut Mlp) -> Result<()> {
    if src.sizes != dst.sizes {
        return Err(Error::Shape {
            expected: src.num_params(),
            got: dst.num_params(),
        });
    }
    dst.layers.clone_from(&src.layers);
    Ok(())
}

/// Adam with bias correction: alpha 0.001 by default, decay 0.9 / 0.999,
/// epsilon 1e-8.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Adam {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    t: u64,
    m_w: Vec<Vec<f64>>,
    m_b: Vec<Vec<f64>>,
    v_w: Vec<Vec<f64>>,
    v_b: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(net: &Mlp, alpha: f64) -> Self {
        let shape_w: Vec<Vec<f64>> = net.layers.iter().map(|l| vec![0.0; l.w.len()]).collect();
        let shape_b: Vec<Vec<f64>> = net.layers.iter().map(|l| vec![0.0; l.b.len()]).collect();
        Adam {
            alpha,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            t: 0,
            m_w: shape_w.clone(),
            m_b: shape_b.clone(),
            v_w: shape_w,
            v_b: shape_b,
        }
    }

    /// One update from accumulated gradients; `scale` folds in the batch
    /// mean (1 / batch size). Deterministic given inputs.
    pub fn step(&mut self, net: &mut Mlp, grads: &Gradients, scale: f64) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        let (alpha, beta1, beta2, eps) = (self.alpha, self.beta1, self.beta2, self.epsilon);
        let update = |params: &mut [f64], grads: &[f64], m: &mut [f64], v: &mut [f64]| {
            for i in 0..params.len() {
                let g = grads[i] * scale;
                m[i] = beta1 * m[i] + (1.0 - beta1) * g;
                v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                params[i] -= alpha * m_hat / (v_hat.sqrt() + eps);
            }
        };
        for (l, layer) in net.layers.iter_mut().enumerate() {
            update(&mut layer.w, &grads.w[l], &mut self.m_w[l], &mut self.v_w[l]);
            update(&mut layer.b, &grads.b[l], &mut self.m_b[l], &mut self.v_b[l]);
        }
    }
}
