use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Cls,
    Reg,
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cls" => Ok(Task::Cls),
            "reg" => Ok(Task::Reg),
            other => Err(Error::Config(format!("unknown task `{other}` (cls|reg)"))),
        }
    }
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Task::Cls => "cls",
            Task::Reg => "reg",
        })
    }
}

pub const CLS_THRESHOLD: f64 = 0.5;

/// Pearson correlation, `None` when either vector is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    if x.len() < 2 {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

pub fn mean_absolute_error(preds: &[f64], targets: &[f64]) -> f64 {
    preds.iter().zip(targets).map(|(p, t)| (p - t).abs()).sum::<f64>() / preds.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    /// Predictions and targets as 0/1 labels.
    pub fn from_labels(preds: &[u8], targets: &[u8]) -> Self {
        let mut c = Confusion::default();
        for (&p, &t) in preds.iter().zip(targets) {
            match (p, t) {
                (1, 1) => c.tp += 1,
                (1, _) => c.fp += 1,
                (_, 1) => c.fn_ += 1,
                _ => c.tn += 1,
            }
        }
        c
    }

    pub fn accuracy(&self) -> f64 {
        let n = self.tp + self.fp + self.tn + self.fn_;
        (self.tp + self.tn) as f64 / n as f64
    }

    /// F1 of the positive class; 0 when there are no true positives.
    pub fn f1(&self) -> f64 {
        if self.tp == 0 {
            return 0.0;
        }
        2.0 * self.tp as f64 / (2 * self.tp + self.fp + self.fn_) as f64
    }
}

pub fn threshold_labels(scores: &[f64]) -> Vec<u8> {
    scores.iter().map(|&s| u8::from(s >= CLS_THRESHOLD)).collect()
}

pub fn f1_score(scores: &[f64], targets: &[f64]) -> f64 {
    Confusion::from_labels(&threshold_labels(scores), &threshold_labels(targets)).f1()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub task: Task,
    pub n: usize,
    pub acc: f64,
    pub f1: f64,
    pub pcc: f64,
    pub mae: f64,
    /// PCC was undefined (constant input) and is reported as 0.
    pub pcc_degenerate: bool,
}

/// Classification scores are thresholded at 0.5; regression reports
/// `acc = 1 - mae` and leaves `f1` at 0.
pub fn compute_metrics(preds: &[f64], targets: &[f64], task: Task) -> Result<Metrics> {
    if preds.is_empty() || preds.len() != targets.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} targets",
            preds.len(),
            targets.len()
        )));
    }
    let mae = mean_absolute_error(preds, targets);
    let pcc = pearson(preds, targets);
    let mut m = Metrics {
        task,
        n: preds.len(),
        acc: 0.0,
        f1: 0.0,
        pcc: pcc.unwrap_or(0.0),
        mae,
        pcc_degenerate: pcc.is_none(),
    };
    match task {
        Task::Cls => {
            let c = Confusion::from_labels(&threshold_labels(preds), &threshold_labels(targets));
            m.acc = c.accuracy();
            m.f1 = c.f1();
        }
        Task::Reg => {
            m.acc = 1.0 - mae;
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity_regression() {
        let t = [0.1, 0.5, 0.7, 0.2];
        let m = compute_metrics(&t, &t, Task::Reg).unwrap();
        assert_eq!((m.pcc, m.acc, m.mae), (1.0, 1.0, 0.0));
    }

    #[test]
    fn anti_correlation() {
        let t = [0.2, 0.4, 0.6, 0.8];
        let p: Vec<f64> = t.iter().map(|v| 1.0 - v).collect();
        assert!((pearson(&p, &t).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn hand_computed_confusion() {
        let m = compute_metrics(&[1.0, 1.0, 0.0, 0.0], &[1.0, 0.0, 0.0, 0.0], Task::Cls).unwrap();
        assert_eq!(m.acc, 0.75);
        assert!((m.f1 - 2.0 / 3.0).abs() < 1e-15);
        let c = Confusion::from_labels(&[1, 0, 1, 1, 0, 0], &[1, 1, 0, 1, 0, 1]);
        assert_eq!((c.tp, c.fp, c.tn, c.fn_), (2, 1, 1, 2));
        assert_eq!(c.accuracy(), 0.5);
        assert_eq!(c.f1(), 4.0 / 7.0);
    }

    #[test]
    fn constant_predictions_are_flagged() {
        let m = compute_metrics(&[0.5; 4], &[0.1, 0.2, 0.3, 0.4], Task::Reg).unwrap();
        assert!(m.pcc_degenerate);
        assert_eq!(m.pcc, 0.0);
    }

    proptest! {
        #[test]
        fn acc_plus_mae_is_one(pairs in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..50)) {
            let (p, t): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let m = compute_metrics(&p, &t, Task::Reg).unwrap();
            prop_assert_eq!(m.acc + m.mae, 1.0);
        }

        #[test]
        fn permutation_invariant(pairs in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 2..30), rot in 0usize..30) {
            let (p, t): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
            let mut rotated = pairs.clone();
            rotated.rotate_left(rot % pairs.len());
            let (p2, t2): (Vec<f64>, Vec<f64>) = rotated.into_iter().unzip();
            let a = compute_metrics(&p, &t, Task::Cls).unwrap();
            let b = compute_metrics(&p2, &t2, Task::Cls).unwrap();
            prop_assert_eq!(a.acc, b.acc);
            prop_assert_eq!(a.f1, b.f1);
            let ra = compute_metrics(&p, &t, Task::Reg).unwrap();
            let rb = compute_metrics(&p2, &t2, Task::Reg).unwrap();
            prop_assert!((ra.pcc - rb.pcc).abs() < 1e-12);
            prop_assert!((ra.mae - rb.mae).abs() < 1e-12);
        }
    }
}
