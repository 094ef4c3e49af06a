use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::loss::Loss;
use super::network::Network;
use super::optim::{clip_global_norm, Adam, AdamConfig};
use crate::error::{Error, Result};
use crate::numeric::seeded_rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub loss: Loss,
    pub max_epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub clip_norm: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.01,
            loss: Loss::Bce,
            max_epochs: 50,
            patience: 4,
            batch_size: 32,
            clip_norm: 5.0,
            seed: 7,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.lr
            )));
        }
        if self.patience == 0 || self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::Config(
                "patience, batch size and epoch count must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
}

impl History {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["epoch", "train_loss", "val_loss"])?;
        for r in &self.epochs {
            w.write_record([r.epoch.to_string(), r.train_loss.to_string(), r.val_loss.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Tracks the best validation loss and signals when `patience` epochs in a
/// row have failed to improve on it.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    epoch: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopSignal {
    Improved,
    Continue,
    Stop,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
            epoch: 0,
        }
    }

    pub fn observe(&mut self, val_loss: f64) -> StopSignal {
        self.epoch += 1;
        if val_loss < self.best {
            self.best = val_loss;
            self.best_epoch = self.epoch;
            StopSignal::Improved
        } else if self.epoch - self.best_epoch >= self.patience {
            StopSignal::Stop
        } else {
            StopSignal::Continue
        }
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }
}

pub fn evaluate_loss<N: Network>(model: &N, data: &[(N::Input, f64)], loss: Loss) -> Result<f64> {
    let losses = data
        .par_iter()
        .map(|(x, t)| Ok(loss.value(model.predict(x)?, *t)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}

pub fn predict_all<N: Network>(model: &N, inputs: &[N::Input]) -> Result<Vec<f64>> {
    inputs.par_iter().map(|x| model.predict(x)).collect()
}

/// Mean loss and mean gradient over a batch; per-sample gradients are
/// computed in parallel and summed in index order.
fn batch_gradient<N: Network>(
    model: &N,
    data: &[(N::Input, f64)],
    batch: &[usize],
    loss: Loss,
) -> Result<(f64, Vec<f64>)> {
    let parts = batch
        .par_iter()
        .map(|&i| {
            let (x, t) = &data[i];
            let t = *t;
            let mut g = model.zeros_like();
            let y = model.accumulate_gradient(x, &|y| loss.value_and_grad(y, t).1, &mut g)?;
            Ok((loss.value(y, t), g.flat_params()))
        })
        .collect::<Result<Vec<_>>>()?;
    let n = batch.len() as f64;
    let mut total = 0.0;
    let mut grad = vec![0.0; model.n_params()];
    for (l, g) in parts {
        total += l;
        for (a, b) in grad.iter_mut().zip(g) {
            *a += b;
        }
    }
    grad.iter_mut().for_each(|g| *g /= n);
    Ok((total / n, grad))
}

/// Mini-batch Adam with early stopping on validation loss; returns the
/// parameters of the best validation epoch. An empty validation set falls
/// back to the training loss.
pub fn train<N: Network>(
    mut model: N,
    train_set: &[(N::Input, f64)],
    val_set: &[(N::Input, f64)],
    config: &TrainConfig,
) -> Result<(N, History)> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::InsufficientData("empty training set".into()));
    }
    let mut adam = Adam::new(
        AdamConfig {
            lr: config.lr,
            ..Default::default()
        },
        model.n_params(),
    );
    let mut rng = seeded_rng(config.seed, 11);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut stopper = EarlyStopping::new(config.patience);
    let mut best = model.clone();
    let mut history = History::default();

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut seen = 0.0;
        let mut total = 0.0;
        for (b, batch) in order.chunks(config.batch_size).enumerate() {
            let (l, mut grad) = batch_gradient(&model, train_set, batch, config.loss)?;
            if !l.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Diverged(format!(
                    "non-finite loss at epoch {epoch}, batch {b} (lr {})",
                    config.lr
                )));
            }
            clip_global_norm(&mut grad, config.clip_norm);
            adam.step(model.params_mut(), &grad);
            total += l * batch.len() as f64;
            seen += batch.len() as f64;
        }
        let train_loss = total / seen;
        let val_loss = if val_set.is_empty() {
            evaluate_loss(&model, train_set, config.loss)?
        } else {
            evaluate_loss(&model, val_set, config.loss)?
        };
        if !val_loss.is_finite() {
            return Err(Error::Diverged(format!(
                "non-finite validation loss at epoch {epoch} (lr {})",
                config.lr
            )));
        }
        history.epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
        });
        match stopper.observe(val_loss) {
            StopSignal::Improved => best = model.clone(),
            StopSignal::Continue => {}
            StopSignal::Stop => break,
        }
    }
    history.best_epoch = stopper.best_epoch();
    Ok((best, history))
}
