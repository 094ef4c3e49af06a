//! LSTM, dense and layer-norm layers with explicit backward passes.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Softmax of a small logit vector.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn xavier(rng: &mut impl Rng, fan_in: usize, fan_out: usize, n: usize) -> Vec<f64> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..n).map(|_| rng.random_range(-limit..limit)).collect()
}

/// `n x n` orthogonal matrix (row-major) by Gram–Schmidt on Gaussian rows.
fn orthogonal(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    loop {
        let mut rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..n).map(|_| StandardNormal.sample(rng)).collect())
            .collect();
        let mut ok = true;
        for i in 0..n {
            for j in 0..i {
                let d: f64 = (0..n).map(|k| rows[i][k] * rows[j][k]).sum();
                for k in 0..n {
                    rows[i][k] -= d * rows[j][k];
                }
            }
            let norm = rows[i].iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm < 1e-8 {
                ok = false;
                break;
            }
            rows[i].iter_mut().for_each(|v| *v /= norm);
        }
        if ok {
            return rows.concat();
        }
    }
}

/// `y = W x + b` with `W` stored row-major as `out x in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub input_dim: usize,
    pub output_dim: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Dense {
    pub fn new(input_dim: usize, output_dim: usize, rng: &mut impl Rng) -> Self {
        Dense {
            input_dim,
            output_dim,
            w: xavier(rng, input_dim, output_dim, input_dim * output_dim),
            b: vec![0.0; output_dim],
        }
    }

    pub fn zeros(input_dim: usize, output_dim: usize) -> Self {
        Dense {
            input_dim,
            output_dim,
            w: vec![0.0; input_dim * output_dim],
            b: vec![0.0; output_dim],
        }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        (0..self.output_dim)
            .map(|o| {
                let row = &self.w[o * self.input_dim..(o + 1) * self.input_dim];
                self.b[o] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect()
    }

    /// Accumulates parameter gradients into `grad` and returns `dL/dx`.
    pub fn backward(&self, x: &[f64], dy: &[f64], grad: &mut Dense) -> Vec<f64> {
        let mut dx = vec![0.0; self.input_dim];
        for o in 0..self.output_dim {
            let g = dy[o];
            grad.b[o] += g;
            let base = o * self.input_dim;
            for i in 0..self.input_dim {
                grad.w[base + i] += g * x[i];
                dx[i] += g * self.w[base + i];
            }
        }
        dx
    }

    pub fn params(&self) -> Vec<&[f64]> {
        vec![&self.w, &self.b]
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        vec![&mut self.w, &mut self.b]
    }
}

pub const LAYER_NORM_EPS: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerNorm {
    pub gain: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LayerNormCache {
    pub xhat: Vec<f64>,
    pub inv_std: f64,
}

impl LayerNorm {
    pub fn new(dim: usize) -> Self {
        LayerNorm {
            gain: vec![1.0; dim],
            bias: vec![0.0; dim],
        }
    }

    pub fn zeros(dim: usize) -> Self {
        LayerNorm {
            gain: vec![0.0; dim],
            bias: vec![0.0; dim],
        }
    }

    pub fn forward(&self, x: &[f64]) -> (Vec<f64>, LayerNormCache) {
        let (xhat, inv_std) = normalize(x);
        let y = xhat
            .iter()
            .zip(self.gain.iter().zip(&self.bias))
            .map(|(v, (g, b))| v * g + b)
            .collect();
        (y, LayerNormCache { xhat, inv_std })
    }

    pub fn backward(&self, cache: &LayerNormCache, dy: &[f64], grad: &mut LayerNorm) -> Vec<f64> {
        let n = dy.len() as f64;
        let dxhat: Vec<f64> = dy.iter().zip(&self.gain).map(|(d, g)| d * g).collect();
        for i in 0..dy.len() {
            grad.gain[i] += dy[i] * cache.xhat[i];
            grad.bias[i] += dy[i];
        }
        let mean_d = dxhat.iter().sum::<f64>() / n;
        let mean_dx = dxhat.iter().zip(&cache.xhat).map(|(a, b)| a * b).sum::<f64>() / n;
        dxhat
            .iter()
            .zip(&cache.xhat)
            .map(|(d, xh)| cache.inv_std * (d - mean_d - xh * mean_dx))
            .collect()
    }

    pub fn params(&self) -> Vec<&[f64]> {
        vec![&self.gain, &self.bias]
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        vec![&mut self.gain, &mut self.bias]
    }
}

fn normalize(x: &[f64]) -> (Vec<f64>, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let inv_std = 1.0 / (var + LAYER_NORM_EPS).sqrt();
    (x.iter().map(|v| (v - mean) * inv_std).collect(), inv_std)
}

/// `(x - mean) / sqrt(var + 1e-5) * gain + bias`.
pub fn layer_norm(x: &[f64], gain: &[f64], bias: &[f64]) -> Vec<f64> {
    let (xhat, _) = normalize(x);
    xhat.iter()
        .zip(gain.iter().zip(bias))
        .map(|(v, (g, b))| v * g + b)
        .collect()
}

/// Single LSTM layer. Gate blocks are ordered input, forget, cell, output;
/// `w` is `4H x D`, `u` is `4H x H`, both row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lstm {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub w: Vec<f64>,
    pub u: Vec<f64>,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LstmCache {
    pub xs: Vec<Vec<f64>>,
    /// activated gates `[i | f | g | o]` per step
    gates: Vec<Vec<f64>>,
    cs: Vec<Vec<f64>>,
    pub hs: Vec<Vec<f64>>,
}

impl LstmCache {
    pub fn last_hidden(&self) -> &[f64] {
        self.hs.last().unwrap()
    }
}

impl Lstm {
    pub fn new(input_dim: usize, hidden_dim: usize, rng: &mut impl Rng) -> Self {
        let h = hidden_dim;
        let w = xavier(rng, input_dim, 4 * h, 4 * h * input_dim);
        let mut u = vec![0.0; 4 * h * h];
        for gate in 0..4 {
            let q = orthogonal(rng, h);
            // block rows gate*h .. (gate+1)*h
            u[gate * h * h..(gate + 1) * h * h].copy_from_slice(&q);
        }
        let mut b = vec![0.0; 4 * h];
        b[h..2 * h].iter_mut().for_each(|v| *v = 1.0);
        Lstm {
            input_dim,
            hidden_dim,
            w,
            u,
            b,
        }
    }

    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        Lstm {
            input_dim,
            hidden_dim,
            w: vec![0.0; 4 * hidden_dim * input_dim],
            u: vec![0.0; 4 * hidden_dim * hidden_dim],
            b: vec![0.0; 4 * hidden_dim],
        }
    }

    pub fn forward(&self, xs: &[Vec<f64>]) -> Result<LstmCache> {
        if xs.is_empty() {
            return Err(Error::Shape("empty input sequence".into()));
        }
        if let Some(bad) = xs.iter().find(|x| x.len() != self.input_dim) {
            return Err(Error::Shape(format!(
                "LSTM expects inputs of dimension {}, got {}",
                self.input_dim,
                bad.len()
            )));
        }
        let (h, d) = (self.hidden_dim, self.input_dim);
        let mut cache = LstmCache {
            xs: xs.to_vec(),
            gates: Vec::with_capacity(xs.len()),
            cs: Vec::with_capacity(xs.len()),
            hs: Vec::with_capacity(xs.len()),
        };
        let mut h_prev = vec![0.0; h];
        let mut c_prev = vec![0.0; h];
        for x in xs {
            let mut a = self.b.clone();
            for (r, ar) in a.iter_mut().enumerate() {
                let wr = &self.w[r * d..(r + 1) * d];
                let ur = &self.u[r * h..(r + 1) * h];
                *ar += wr.iter().zip(x).map(|(p, q)| p * q).sum::<f64>()
                    + ur.iter().zip(&h_prev).map(|(p, q)| p * q).sum::<f64>();
            }
            let mut gates = vec![0.0; 4 * h];
            let mut c = vec![0.0; h];
            let mut hn = vec![0.0; h];
            for j in 0..h {
                let i = sigmoid(a[j]);
                let f = sigmoid(a[h + j]);
                let g = a[2 * h + j].tanh();
                let o = sigmoid(a[3 * h + j]);
                gates[j] = i;
                gates[h + j] = f;
                gates[2 * h + j] = g;
                gates[3 * h + j] = o;
                c[j] = f * c_prev[j] + i * g;
                hn[j] = o * c[j].tanh();
            }
            cache.gates.push(gates);
            cache.cs.push(c.clone());
            cache.hs.push(hn.clone());
            h_prev = hn;
            c_prev = c;
        }
        Ok(cache)
    }

    /// Backpropagation through time. `dhs[t]` is the loss gradient with
    /// respect to hidden state `t`; returns gradients for every input.
    pub fn backward(&self, cache: &LstmCache, dhs: &[Vec<f64>], grad: &mut Lstm) -> Vec<Vec<f64>> {
        let (h, d) = (self.hidden_dim, self.input_dim);
        let n = cache.xs.len();
        let mut dxs = vec![vec![0.0; d]; n];
        let mut dh_next = vec![0.0; h];
        let mut dc_next = vec![0.0; h];
        let zeros = vec![0.0; h];
        for t in (0..n).rev() {
            let gates = &cache.gates[t];
            let c = &cache.cs[t];
            let c_prev = if t > 0 { &cache.cs[t - 1] } else { &zeros };
            let h_prev = if t > 0 { &cache.hs[t - 1] } else { &zeros };
            let mut da = vec![0.0; 4 * h];
            for j in 0..h {
                let (i, f, g, o) = (gates[j], gates[h + j], gates[2 * h + j], gates[3 * h + j]);
                let dh = dhs[t][j] + dh_next[j];
                let tc = c[j].tanh();
                let dc = dh * o * (1.0 - tc * tc) + dc_next[j];
                da[j] = dc * g * i * (1.0 - i);
                da[h + j] = dc * c_prev[j] * f * (1.0 - f);
                da[2 * h + j] = dc * i * (1.0 - g * g);
                da[3 * h + j] = dh * tc * o * (1.0 - o);
                dc_next[j] = dc * f;
            }
            let x = &cache.xs[t];
            let mut dh_prev = vec![0.0; h];
            for (r, &g) in da.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                grad.b[r] += g;
                let wr = r * d;
                for k in 0..d {
                    grad.w[wr + k] += g * x[k];
                    dxs[t][k] += g * self.w[wr + k];
                }
                let ur = r * h;
                for k in 0..h {
                    grad.u[ur + k] += g * h_prev[k];
                    dh_prev[k] += g * self.u[ur + k];
                }
            }
            dh_next = dh_prev;
        }
        dxs
    }

    pub fn params(&self) -> Vec<&[f64]> {
        vec![&self.w, &self.u, &self.b]
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        vec![&mut self.w, &mut self.u, &mut self.b]
    }
}
