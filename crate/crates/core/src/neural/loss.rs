use serde::{Deserialize, Serialize};

pub const BCE_CLIP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    Bce,
    Mae,
}

impl Loss {
    /// Per-sample loss and its derivative with respect to the prediction.
    pub fn value_and_grad(self, pred: f64, target: f64) -> (f64, f64) {
        match self {
            Loss::Bce => {
                let p = pred.clamp(BCE_CLIP, 1.0 - BCE_CLIP);
                let v = -(target * p.ln() + (1.0 - target) * (1.0 - p).ln());
                (v, (p - target) / (p * (1.0 - p)))
            }
            Loss::Mae => {
                let d = pred - target;
                let g = if d > 0.0 {
                    1.0
                } else if d < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                (d.abs(), g)
            }
        }
    }

    pub fn value(self, pred: f64, target: f64) -> f64 {
        self.value_and_grad(pred, target).0
    }
}

/// Batch-mean binary cross-entropy with clipped predictions.
pub fn bce(preds: &[f64], targets: &[f64]) -> f64 {
    mean_loss(Loss::Bce, preds, targets)
}

/// Batch-mean absolute error.
pub fn mae(preds: &[f64], targets: &[f64]) -> f64 {
    mean_loss(Loss::Mae, preds, targets)
}

fn mean_loss(loss: Loss, preds: &[f64], targets: &[f64]) -> f64 {
    preds.iter().zip(targets).map(|(&p, &t)| loss.value(p, t)).sum::<f64>() / preds.len() as f64
}
