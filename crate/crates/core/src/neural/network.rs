use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layers::{sigmoid, Dense, Lstm};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Sigmoid,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Sigmoid => sigmoid(z),
        }
    }

    /// Derivative expressed through the activated output.
    pub fn derivative(self, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Sigmoid => y * (1.0 - y),
        }
    }
}

/// A scalar-output model with hand-written gradients.
pub trait Network: Clone + Send + Sync {
    type Input: Sync;

    fn predict(&self, x: &Self::Input) -> Result<f64>;

    /// Runs forward and backward for one input, adding `dL/dθ` to `grad`
    /// where `d_out` maps the prediction to `dL/dprediction`. Returns the
    /// prediction.
    fn accumulate_gradient(&self, x: &Self::Input, d_out: &dyn Fn(f64) -> f64, grad: &mut Self) -> Result<f64>;

    /// Same architecture with every parameter zero.
    fn zeros_like(&self) -> Self;

    fn params(&self) -> Vec<&[f64]>;

    fn params_mut(&mut self) -> Vec<&mut [f64]>;

    fn n_params(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    fn flat_params(&self) -> Vec<f64> {
        self.params().concat()
    }

    fn set_flat_params(&mut self, flat: &[f64]) {
        let mut i = 0;
        for p in self.params_mut() {
            p.copy_from_slice(&flat[i..i + p.len()]);
            i += p.len();
        }
    }
}

/// LSTM over a sequence, final hidden state into a one-neuron head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceModel {
    pub lstm: Lstm,
    pub head: Dense,
    pub activation: Activation,
}

impl SequenceModel {
    pub fn new(input_dim: usize, hidden_dim: usize, activation: Activation, rng: &mut impl Rng) -> Self {
        SequenceModel {
            lstm: Lstm::new(input_dim, hidden_dim, rng),
            head: Dense::new(hidden_dim, 1, rng),
            activation,
        }
    }
}

impl Network for SequenceModel {
    type Input = Vec<Vec<f64>>;

    fn predict(&self, x: &Self::Input) -> Result<f64> {
        let cache = self.lstm.forward(x)?;
        Ok(self.activation.apply(self.head.forward(cache.last_hidden())[0]))
    }

    fn accumulate_gradient(&self, x: &Self::Input, d_out: &dyn Fn(f64) -> f64, grad: &mut Self) -> Result<f64> {
        let cache = self.lstm.forward(x)?;
        let last = cache.last_hidden();
        let y = self.activation.apply(self.head.forward(last)[0]);
        let dz = d_out(y) * self.activation.derivative(y);
        let dh = self.head.backward(last, &[dz], &mut grad.head);
        let mut dhs = vec![vec![0.0; self.lstm.hidden_dim]; x.len()];
        *dhs.last_mut().unwrap() = dh;
        self.lstm.backward(&cache, &dhs, &mut grad.lstm);
        Ok(y)
    }

    fn zeros_like(&self) -> Self {
        SequenceModel {
            lstm: Lstm::zeros(self.lstm.input_dim, self.lstm.hidden_dim),
            head: Dense::zeros(self.head.input_dim, 1),
            activation: self.activation,
        }
    }

    fn params(&self) -> Vec<&[f64]> {
        let mut p = self.lstm.params();
        p.extend(self.head.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut p = self.lstm.params_mut();
        p.extend(self.head.params_mut());
        p
    }
}
