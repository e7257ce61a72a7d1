//! Minimal dense network used by the actor and critic: ReLU hidden layers,
//! either a scalar linear head or per-group softmax heads, exact reverse-mode
//! gradients (including the softmax Jacobian and the gradient with respect
//! to the input), and an Adam optimizer.
//!
//! Everything is plain `Vec<f64>`; the networks here are tiny and the
//! training loop is single-threaded and deterministic.

use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Layer {
    /// Row-major `output_dim x input_dim`.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub input_dim: usize,
    pub output_dim: usize,
}

impl Layer {
    fn new(input_dim: usize, output_dim: usize, rng: &mut impl Rng) -> Self {
        // Uniform in +-1/sqrt(fan_in), zero bias.
        let bound = 1.0 / (input_dim as f64).sqrt();
        let weights = (0..input_dim * output_dim)
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        Layer {
            weights,
            biases: vec![0.0; output_dim],
            input_dim,
            output_dim,
        }
    }

    fn affine(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.reserve(self.output_dim);
        for o in 0..self.output_dim {
            let row = &self.weights[o * self.input_dim..(o + 1) * self.input_dim];
            let mut acc = self.biases[o];
            for (w, x) in row.iter().zip(input) {
                acc += w * x;
            }
            out.push(acc);
        }
    }
}

/// Output transform of the final layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Head {
    /// Raw linear outputs (critic).
    Linear,
    /// Softmax over consecutive groups of `group_size` outputs (actor);
    /// each group lands on the probability simplex.
    SoftmaxGroups { group_size: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Layer>,
    pub head: Head,
}

/// Per-layer activations kept for the backward pass.
pub struct ForwardTrace {
    input: Vec<f64>,
    /// Post-ReLU activations of each hidden layer.
    hidden: Vec<Vec<f64>>,
    /// Final layer pre-head values.
    logits: Vec<f64>,
    /// Post-head output.
    pub output: Vec<f64>,
}

/// Parameter gradients plus the gradient with respect to the network input.
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub input: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Gradients {
            weights: net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            biases: net.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
            input: vec![0.0; net.layers[0].input_dim],
        }
    }

    pub fn accumulate(&mut self, other: &Gradients) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for (x, y) in self.input.iter_mut().zip(&other.input) {
            *x += y;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for v in self.weights.iter_mut().chain(self.biases.iter_mut()) {
            for x in v.iter_mut() {
                *x *= factor;
            }
        }
        for x in self.input.iter_mut() {
            *x *= factor;
        }
    }

    /// L2 norm over parameter gradients (the input gradient is excluded).
    pub fn param_norm(&self) -> f64 {
        self.weights
            .iter()
            .chain(self.biases.iter())
            .flat_map(|v| v.iter())
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }

    /// Scale parameter gradients so their joint L2 norm is at most `max_norm`.
    pub fn clip_param_norm(&mut self, max_norm: f64) {
        let norm = self.param_norm();
        if norm > max_norm && norm > 0.0 {
            let s = max_norm / norm;
            for v in self.weights.iter_mut().chain(self.biases.iter_mut()) {
                for x in v.iter_mut() {
                    *x *= s;
                }
            }
        }
    }
}

fn softmax_groups(logits: &[f64], group_size: usize, out: &mut Vec<f64>) {
    debug_assert_eq!(logits.len() % group_size, 0);
    out.clear();
    out.reserve(logits.len());
    for group in logits.chunks(group_size) {
        let max = group.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        let start = out.len();
        for &z in group {
            let e = (z - max).exp();
            sum += e;
            out.push(e);
        }
        for x in &mut out[start..] {
            *x /= sum;
        }
    }
}

impl Mlp {
    /// `dims` lists input, hidden..., output sizes. Hidden layers are ReLU.
    pub fn new(dims: &[usize], head: Head, rng: &mut impl Rng) -> Self {
        assert!(dims.len() >= 2, "need at least input and output dims");
        if let Head::SoftmaxGroups { group_size } = head {
            assert_eq!(dims.last().unwrap() % group_size, 0, "output not grouped");
        }
        let layers = dims
            .windows(2)
            .map(|w| Layer::new(w[0], w[1], rng))
            .collect();
        Mlp { layers, head }
    }

    /// Like [`Mlp::new`], but the output layer starts uniform in
    /// `+-output_scale` instead of `+-1/sqrt(fan_in)`. A near-zero head
    /// keeps an actor at its neutral output (and a critic flat) until the
    /// layers below carry real signal; with the fan-in init the policy
    /// drifts on critic noise before the critic has learned anything and
    /// strands itself in a saturated softmax corner.
    pub fn new_scaled_output(
        dims: &[usize],
        head: Head,
        output_scale: f64,
        rng: &mut impl Rng,
    ) -> Self {
        let mut net = Self::new(dims, head, rng);
        let last = net.layers.last_mut().unwrap();
        for w in last.weights.iter_mut() {
            *w = rng.random_range(-output_scale..output_scale);
        }
        net
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().output_dim
    }

    pub fn forward_trace(&self, input: &[f64]) -> ForwardTrace {
        assert_eq!(input.len(), self.input_dim(), "input size");
        let mut hidden = Vec::with_capacity(self.layers.len().saturating_sub(1));
        let mut current = input.to_vec();
        let mut buf = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            layer.affine(&current, &mut buf);
            if i + 1 < self.layers.len() {
                for x in buf.iter_mut() {
                    if *x < 0.0 {
                        *x = 0.0;
                    }
                }
                hidden.push(buf.clone());
                std::mem::swap(&mut current, &mut buf);
            } else {
                current = buf.clone();
            }
        }
        let logits = current;
        let mut output = Vec::new();
        match self.head {
            Head::Linear => output = logits.clone(),
            Head::SoftmaxGroups { group_size } => softmax_groups(&logits, group_size, &mut output),
        }
        ForwardTrace {
            input: input.to_vec(),
            hidden,
            logits,
            output,
        }
    }

    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        self.forward_trace(input).output
    }

    /// Reverse-mode gradients of `sum(output * output_grad)` with respect to
    /// every parameter and to the input.
    pub fn backward(&self, trace: &ForwardTrace, output_grad: &[f64]) -> Gradients {
        assert_eq!(output_grad.len(), self.output_dim());
        let mut grads = Gradients::zeros_like(self);

        // Head Jacobian.
        let mut delta: Vec<f64> = match self.head {
            Head::Linear => output_grad.to_vec(),
            Head::SoftmaxGroups { group_size } => {
                let mut d = vec![0.0; trace.logits.len()];
                for (g, chunk) in trace.output.chunks(group_size).enumerate() {
                    let upstream = &output_grad[g * group_size..(g + 1) * group_size];
                    let dot: f64 = chunk.iter().zip(upstream).map(|(y, u)| y * u).sum();
                    for (i, (&y, &u)) in chunk.iter().zip(upstream).enumerate() {
                        d[g * group_size + i] = y * (u - dot);
                    }
                }
                d
            }
        };

        for (i, layer) in self.layers.iter().enumerate().rev() {
            let below: &[f64] = if i == 0 {
                &trace.input
            } else {
                &trace.hidden[i - 1]
            };
            for o in 0..layer.output_dim {
                let d = delta[o];
                if d != 0.0 {
                    let row = &mut grads.weights[i][o * layer.input_dim..(o + 1) * layer.input_dim];
                    for (w, x) in row.iter_mut().zip(below) {
                        *w += d * x;
                    }
                }
                grads.biases[i][o] += d;
            }
            // Gradient into the layer's input.
            let mut down = vec![0.0; layer.input_dim];
            for o in 0..layer.output_dim {
                let d = delta[o];
                if d != 0.0 {
                    let row = &layer.weights[o * layer.input_dim..(o + 1) * layer.input_dim];
                    for (g, w) in down.iter_mut().zip(row) {
                        *g += d * w;
                    }
                }
            }
            if i == 0 {
                grads.input = down;
            } else {
                // ReLU derivative from the post-activation values.
                for (g, &a) in down.iter_mut().zip(&trace.hidden[i - 1]) {
                    if a <= 0.0 {
                        *g = 0.0;
                    }
                }
                delta = down;
            }
        }
        grads
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.biases.iter()))
            .all(|x| x.is_finite())
    }
}

/// In-place `target = tau * source + (1 - tau) * target`.
pub fn soft_update(target: &mut Mlp, source: &Mlp, tau: f64) {
    for (t, s) in target.layers.iter_mut().zip(&source.layers) {
        for (a, b) in t.weights.iter_mut().zip(&s.weights) {
            *a = tau * b + (1.0 - tau) * *a;
        }
        for (a, b) in t.biases.iter_mut().zip(&s.biases) {
            *a = tau * b + (1.0 - tau) * *a;
        }
    }
}

/// Adam with the standard moment decays.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Adam {
    pub learning_rate: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    step: u64,
    m_weights: Vec<Vec<f64>>,
    v_weights: Vec<Vec<f64>>,
    m_biases: Vec<Vec<f64>>,
    v_biases: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(net: &Mlp, learning_rate: f64) -> Self {
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m_weights: net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            v_weights: net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            m_biases: net.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
            v_biases: net.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
        }
    }

    /// One descent step along `grads`.
    pub fn apply(&mut self, net: &mut Mlp, grads: &Gradients) {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for (i, layer) in net.layers.iter_mut().enumerate() {
            Self::apply_slice(
                &mut layer.weights,
                &grads.weights[i],
                &mut self.m_weights[i],
                &mut self.v_weights[i],
                self.learning_rate,
                self.beta1,
                self.beta2,
                self.epsilon,
                bc1,
                bc2,
            );
            Self::apply_slice(
                &mut layer.biases,
                &grads.biases[i],
                &mut self.m_biases[i],
                &mut self.v_biases[i],
                self.learning_rate,
                self.beta1,
                self.beta2,
                self.epsilon,
                bc1,
                bc2,
            );
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn apply_slice(
        params: &mut [f64],
        grads: &[f64],
        m: &mut [f64],
        v: &mut [f64],
        lr: f64,
        beta1: f64,
        beta2: f64,
        eps: f64,
        bc1: f64,
        bc2: f64,
    ) {
        for i in 0..params.len() {
            m[i] = beta1 * m[i] + (1.0 - beta1) * grads[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * grads[i] * grads[i];
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}
