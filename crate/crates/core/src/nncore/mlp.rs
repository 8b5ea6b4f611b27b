//! Dense feed-forward network.
//!
//! Each layer computes `a = act(W x + b)` with `W` stored row-major as
//! `(output_dim, input_dim)`. Batches are flat row-major buffers of shape
//! `(batch, dim)`.
//!
//! The training objective is `MSE + l2 * sum(W^2)` over weight matrices only;
//! biases are not regularized. The weight gradient therefore carries an extra
//! `2 * l2 * W` term.

use std::ops::Range;

use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::scalar::{gemm, Scalar, View};
use crate::error::{Error, Result};

/// Per-layer nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Activation {
    Swish { beta: f64 },
    Linear,
}

impl Activation {
    /// Swish with the fixed `beta = 1` (SiLU).
    pub const SILU: Activation = Activation::Swish { beta: 1.0 };

    #[inline]
    fn apply<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::Linear => x,
            Activation::Swish { beta } => x * logistic(T::lit(beta) * x),
        }
    }

    #[inline]
    fn derivative<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::Linear => T::one(),
            Activation::Swish { beta } => {
                let b = T::lit(beta);
                let s = logistic(b * x);
                s + b * x * s * (T::one() - s)
            }
        }
    }
}

#[inline]
fn logistic<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

/// `x * logistic(beta * x)`.
pub fn swish(x: f64, beta: f64) -> f64 {
    Activation::Swish { beta }.apply(x)
}

pub fn swish_derivative(x: f64, beta: f64) -> f64 {
    Activation::Swish { beta }.derivative(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub input_dim: usize,
    pub output_dim: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(input_dim: usize, output_dim: usize, activation: Activation) -> Self {
        LayerSpec {
            input_dim,
            output_dim,
            activation,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 {
            return Err(Error::Config(format!(
                "layer dims must be positive, got {}x{}",
                self.input_dim, self.output_dim
            )));
        }
        if let Activation::Swish { beta } = self.activation {
            if !(beta > 0.0 && beta.is_finite()) {
                return Err(Error::Config(format!("swish beta must be > 0, got {beta}")));
            }
        }
        Ok(())
    }
}

/// Layer specs for a chain of dims, with `hidden` on every layer but the last.
pub fn chain_specs(dims: &[usize], hidden: Activation, output: Activation) -> Vec<LayerSpec> {
    let n = dims.len().saturating_sub(1);
    (0..n)
        .map(|i| {
            let act = if i + 1 == n { output } else { hidden };
            LayerSpec::new(dims[i], dims[i + 1], act)
        })
        .collect()
}

/// Number of weight-matrix entries of a dense chain (biases excluded).
pub fn count_weights(dims: &[usize]) -> u64 {
    dims.windows(2).map(|w| w[0] as u64 * w[1] as u64).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub spec: LayerSpec,
    /// Row-major `(output_dim, input_dim)`.
    pub weights: Vec<T>,
    pub biases: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    layers: Vec<Dense<T>>,
}

/// Activations recorded during a batched forward pass, reused by backward.
#[derive(Debug, Default)]
pub struct Tape<T> {
    batch: usize,
    pre: Vec<Vec<T>>,
    post: Vec<Vec<T>>,
    delta: Vec<T>,
    delta_prev: Vec<T>,
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Tape {
            batch: 0,
            pre: Vec::new(),
            post: Vec::new(),
            delta: Vec::new(),
            delta_prev: Vec::new(),
        }
    }

    /// Output of the last traced forward pass.
    pub fn output(&self) -> &[T] {
        self.post.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Parameter gradients laid out exactly like the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub layers: Vec<(Vec<T>, Vec<T>)>,
}

impl<T: Scalar> Gradients<T> {
    pub fn zeros_like(model: &Mlp<T>) -> Self {
        Gradients {
            layers: model
                .layers
                .iter()
                .map(|l| (vec![T::zero(); l.weights.len()], vec![T::zero(); l.biases.len()]))
                .collect(),
        }
    }
}

impl<T: Scalar> Mlp<T> {
    /// Builds a network with uniform He-style weights (`limit = sqrt(6 / fan_in)`)
    /// and zero biases.
    pub fn new(specs: &[LayerSpec], seed: u64) -> Result<Self> {
        validate_chain(specs)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = specs
            .iter()
            .map(|spec| {
                let limit = (6.0 / spec.input_dim as f64).sqrt();
                let dist = Uniform::new_inclusive(-limit, limit).expect("finite bounds");
                let weights = (0..spec.input_dim * spec.output_dim)
                    .map(|_| T::lit(dist.sample(&mut rng)))
                    .collect();
                Dense {
                    spec: *spec,
                    weights,
                    biases: vec![T::zero(); spec.output_dim],
                }
            })
            .collect();
        Ok(Mlp { layers })
    }

    pub fn from_layers(layers: Vec<Dense<T>>) -> Result<Self> {
        let specs: Vec<_> = layers.iter().map(|l| l.spec).collect();
        validate_chain(&specs)?;
        for l in &layers {
            let want = l.spec.input_dim * l.spec.output_dim;
            if l.weights.len() != want || l.biases.len() != l.spec.output_dim {
                return Err(Error::shape(
                    "layer parameters",
                    format!("{want} weights, {} biases", l.spec.output_dim),
                    format!("{} weights, {} biases", l.weights.len(), l.biases.len()),
                ));
            }
            if l.weights.iter().chain(&l.biases).any(|v| !v.is_finite()) {
                return Err(Error::InvalidValue("non-finite parameter".into()));
            }
        }
        Ok(Mlp { layers })
    }

    /// Network with every weight and bias set to zero.
    pub fn zeros(specs: &[LayerSpec]) -> Result<Self> {
        validate_chain(specs)?;
        Ok(Mlp {
            layers: specs
                .iter()
                .map(|s| Dense {
                    spec: *s,
                    weights: vec![T::zero(); s.input_dim * s.output_dim],
                    biases: vec![T::zero(); s.output_dim],
                })
                .collect(),
        })
    }

    pub fn layers(&self) -> &[Dense<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense<T>] {
        &mut self.layers
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec).collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].spec.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].spec.output_dim
    }

    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(|l| l.spec.output_dim))
            .collect()
    }

    pub fn weight_count(&self) -> u64 {
        count_weights(&self.dims())
    }

    pub fn cast<U: Scalar>(&self) -> Mlp<U> {
        let conv = |v: &[T]| v.iter().map(|x| U::from_f64(x.to_f64().unwrap()).unwrap()).collect();
        Mlp {
            layers: self
                .layers
                .iter()
                .map(|l| Dense {
                    spec: l.spec,
                    weights: conv(&l.weights),
                    biases: conv(&l.biases),
                })
                .collect(),
        }
    }

    pub fn forward(&self, input: &[T]) -> Result<Vec<T>> {
        self.forward_batch(input, 1)
    }

    pub fn forward_batch(&self, inputs: &[T], batch: usize) -> Result<Vec<T>> {
        self.forward_layers(0..self.layers.len(), inputs, batch)
    }

    /// Runs only the layers in `range`; used to split an autoencoder into its
    /// encoder and decoder halves.
    pub fn forward_layers(&self, range: Range<usize>, inputs: &[T], batch: usize) -> Result<Vec<T>> {
        if range.start >= range.end || range.end > self.layers.len() {
            return Err(Error::Config(format!(
                "layer range {range:?} outside 0..{}",
                self.layers.len()
            )));
        }
        let in_dim = self.layers[range.start].spec.input_dim;
        check_len("forward input", inputs.len(), batch * in_dim, batch, in_dim)?;
        let mut current = inputs.to_vec();
        for layer in &self.layers[range] {
            let mut out = vec![T::zero(); batch * layer.spec.output_dim];
            affine(layer, &current, batch, &mut out);
            let act = layer.spec.activation;
            if act != Activation::Linear {
                out.iter_mut().for_each(|v| *v = act.apply(*v));
            }
            current = out;
        }
        Ok(current)
    }

    /// Forward pass that keeps pre- and post-activations for [`Self::backward_batch`].
    pub fn forward_traced(&self, inputs: &[T], batch: usize, tape: &mut Tape<T>) -> Result<()> {
        check_len("forward input", inputs.len(), batch * self.input_dim(), batch, self.input_dim())?;
        let n = self.layers.len();
        tape.batch = batch;
        tape.pre.resize_with(n, Vec::new);
        tape.post.resize_with(n, Vec::new);
        for (i, layer) in self.layers.iter().enumerate() {
            let len = batch * layer.spec.output_dim;
            let mut pre = std::mem::take(&mut tape.pre[i]);
            pre.resize(len, T::zero());
            {
                let input = if i == 0 { inputs } else { &tape.post[i - 1] };
                affine(layer, input, batch, &mut pre);
            }
            let mut post = std::mem::take(&mut tape.post[i]);
            post.clear();
            let act = layer.spec.activation;
            post.extend(pre.iter().map(|&z| act.apply(z)));
            tape.pre[i] = pre;
            tape.post[i] = post;
        }
        Ok(())
    }

    /// Gradients of `mean((y - target)^2) + l2 * sum(W^2)` over the batch,
    /// written into `grads` (overwritten, not accumulated). Returns the MSE term.
    ///
    /// `tape` must hold a [`Self::forward_traced`] pass over the same `inputs`.
    pub fn backward_batch(
        &self,
        inputs: &[T],
        targets: &[T],
        l2: f64,
        tape: &mut Tape<T>,
        grads: &mut Gradients<T>,
    ) -> Result<f64> {
        let batch = tape.batch;
        let out_dim = self.output_dim();
        check_len("backward target", targets.len(), batch * out_dim, batch, out_dim)?;
        if tape.post.len() != self.layers.len() || tape.output().len() != batch * out_dim {
            return Err(Error::shape(
                "backward tape",
                "a traced forward pass of this model",
                "stale or empty tape",
            ));
        }
        if grads.layers.len() != self.layers.len() {
            return Err(Error::shape(
                "gradient buffers",
                self.layers.len(),
                grads.layers.len(),
            ));
        }

        let scale = T::lit(2.0 / (batch * out_dim) as f64);
        let mut sse = 0.0f64;
        let last = self.layers.len() - 1;
        tape.delta.clear();
        {
            let act = self.layers[last].spec.activation;
            for ((&y, &t), &z) in tape.post[last].iter().zip(targets).zip(&tape.pre[last]) {
                let diff = y - t;
                sse += diff.to_f64().unwrap().powi(2);
                tape.delta.push(scale * diff * act.derivative(z));
            }
        }

        let l2 = T::lit(2.0 * l2);
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            let (din, dout) = (layer.spec.input_dim, layer.spec.output_dim);
            let input: &[T] = if i == 0 { inputs } else { &tape.post[i - 1] };
            let (gw, gb) = &mut grads.layers[i];

            // dW = delta^T * input
            gemm(
                dout,
                batch,
                din,
                View::transposed(&tape.delta, dout),
                View::row_major(input, din),
                T::zero(),
                gw,
            );
            if l2 > T::zero() {
                for (g, &w) in gw.iter_mut().zip(&layer.weights) {
                    *g = *g + l2 * w;
                }
            }
            gb.iter_mut().for_each(|g| *g = T::zero());
            for row in tape.delta.chunks_exact(dout) {
                for (g, &d) in gb.iter_mut().zip(row) {
                    *g = *g + d;
                }
            }

            if i > 0 {
                tape.delta_prev.resize(batch * din, T::zero());
                gemm(
                    batch,
                    dout,
                    din,
                    View::row_major(&tape.delta, dout),
                    View::row_major(&layer.weights, din),
                    T::zero(),
                    &mut tape.delta_prev,
                );
                let act = self.layers[i - 1].spec.activation;
                if act != Activation::Linear {
                    for (d, &z) in tape.delta_prev.iter_mut().zip(&tape.pre[i - 1]) {
                        *d = *d * act.derivative(z);
                    }
                }
                std::mem::swap(&mut tape.delta, &mut tape.delta_prev);
            }
        }
        Ok(sse / (batch * out_dim) as f64)
    }

    /// Single-sample convenience wrapper: returns `(mse, gradients)`.
    pub fn backward(&self, input: &[T], target: &[T], l2: f64) -> Result<(f64, Gradients<T>)> {
        let mut tape = Tape::new();
        let mut grads = Gradients::zeros_like(self);
        self.forward_traced(input, 1, &mut tape)?;
        let loss = self.backward_batch(input, target, l2, &mut tape, &mut grads)?;
        Ok((loss, grads))
    }

    /// The regularized objective `mse + l2 * sum(W^2)` for one batch.
    pub fn objective(&self, inputs: &[T], targets: &[T], batch: usize, l2: f64) -> Result<f64> {
        let pred = self.forward_batch(inputs, batch)?;
        let mse = mse_loss(&pred, targets)?;
        let reg: f64 = self
            .layers
            .iter()
            .flat_map(|l| &l.weights)
            .map(|w| w.to_f64().unwrap().powi(2))
            .sum();
        Ok(mse + l2 * reg)
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.biases).all(|v| v.is_finite()))
    }
}

/// Mean of squared component differences.
pub fn mse_loss<T: Scalar>(pred: &[T], target: &[T]) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::shape("mse_loss", pred.len(), target.len()));
    }
    if pred.is_empty() {
        return Err(Error::EmptyDataset("mse_loss on empty vectors"));
    }
    let sse: f64 = pred
        .iter()
        .zip(target)
        .map(|(&p, &t)| (p - t).to_f64().unwrap().powi(2))
        .sum();
    Ok(sse / pred.len() as f64)
}

fn affine<T: Scalar>(layer: &Dense<T>, input: &[T], batch: usize, out: &mut [T]) {
    let (din, dout) = (layer.spec.input_dim, layer.spec.output_dim);
    for row in out.chunks_exact_mut(dout) {
        row.copy_from_slice(&layer.biases);
    }
    gemm(
        batch,
        din,
        dout,
        View::row_major(input, din),
        View::transposed(&layer.weights, din),
        T::one(),
        out,
    );
}

fn check_len(context: &'static str, got: usize, want: usize, batch: usize, dim: usize) -> Result<()> {
    if got != want || batch == 0 {
        return Err(Error::shape(
            context,
            format!("{batch} x {dim} = {want} values"),
            format!("{got} values"),
        ));
    }
    Ok(())
}

fn validate_chain(specs: &[LayerSpec]) -> Result<()> {
    if specs.is_empty() {
        return Err(Error::Config("network needs at least one layer".into()));
    }
    for s in specs {
        s.validate()?;
    }
    for (k, pair) in specs.windows(2).enumerate() {
        if pair[0].output_dim != pair[1].input_dim {
            return Err(Error::shape(
                "layer chain",
                format!("layer {} input_dim {}", k + 1, pair[0].output_dim),
                pair[1].input_dim,
            ));
        }
    }
    Ok(())
}
