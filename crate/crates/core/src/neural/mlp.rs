//! Fully connected ReLU network with a softmax head.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    /// `weights[l]` maps layer `l` to layer `l + 1` (`out x in`).
    pub weights: Vec<DMatrix<f64>>,
    pub biases: Vec<DVector<f64>>,
}

/// Activations kept by [`Mlp::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct MlpCache {
    /// Input followed by every hidden activation (post-ReLU).
    activations: Vec<DVector<f64>>,
    pub logits: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub weights: Vec<DMatrix<f64>>,
    pub biases: Vec<DVector<f64>>,
}

impl MlpGrads {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        Self {
            weights: mlp.weights.iter().map(|w| DMatrix::zeros(w.nrows(), w.ncols())).collect(),
            biases: mlp.biases.iter().map(|b| DVector::zeros(b.len())).collect(),
        }
    }

    pub fn add_scaled(&mut self, other: &MlpGrads, s: f64) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += b * s;
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            *a += b * s;
        }
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &DVector<f64>) -> DVector<f64> {
    let m = logits.max();
    let e = logits.map(|v| (v - m).exp());
    let s = e.sum();
    e / s
}

/// Pulls a gradient on the softmax output back to the logits:
/// `alpha * (g - <alpha, g>)`.
pub fn softmax_backward(alpha: &DVector<f64>, g: &DVector<f64>) -> DVector<f64> {
    let dot = alpha.dot(g);
    alpha.component_mul(&g.add_scalar(-dot))
}

impl Mlp {
    /// He-uniform weights (`U(-sqrt(6/fan_in), sqrt(6/fan_in))`), zero biases.
    /// `sizes` lists the widths from input to output.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::InvalidParameter(format!("bad layer widths {sizes:?}")));
        }
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for pair in sizes.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let bound = (6.0 / fan_in as f64).sqrt();
            weights.push(DMatrix::from_fn(fan_out, fan_in, |_, _| rng.random_range(-bound..bound)));
            biases.push(DVector::zeros(fan_out));
        }
        Ok(Self { weights, biases })
    }

    pub fn zeros(sizes: &[usize]) -> Self {
        Self {
            weights: sizes.windows(2).map(|p| DMatrix::zeros(p[1], p[0])).collect(),
            biases: sizes.windows(2).map(|p| DVector::zeros(p[1])).collect(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weights[0].ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.last().unwrap().nrows()
    }

    pub fn forward(&self, x: &[f64]) -> Result<MlpCache> {
        if x.len() != self.input_dim() {
            return Err(Error::DimMismatch(self.input_dim(), x.len()));
        }
        let mut h = DVector::from_column_slice(x);
        let mut activations = Vec::with_capacity(self.weights.len());
        let last = self.weights.len() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let z = w * &h + b;
            activations.push(h);
            h = if l < last { z.map(|v| v.max(0.0)) } else { z };
        }
        Ok(MlpCache { activations, logits: h })
    }

    /// Softmax weights `alpha(x)`.
    pub fn weights_at(&self, x: &[f64]) -> Result<DVector<f64>> {
        Ok(softmax(&self.forward(x)?.logits))
    }

    /// Gradients of a scalar loss given its gradient on the logits.
    pub fn backward(&self, cache: &MlpCache, dlogits: &DVector<f64>) -> MlpGrads {
        let layers = self.weights.len();
        let mut grads = MlpGrads::zeros_like(self);
        let mut delta = dlogits.clone();
        for l in (0..layers).rev() {
            let input = &cache.activations[l];
            grads.weights[l] = &delta * input.transpose();
            grads.biases[l] = delta.clone();
            if l > 0 {
                let back = self.weights[l].transpose() * &delta;
                // input is a post-ReLU activation: the derivative is 1 where it is positive.
                delta = back.zip_map(input, |d, a| if a > 0.0 { d } else { 0.0 });
            }
        }
        grads
    }
}
