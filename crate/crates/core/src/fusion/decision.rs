//! Decision-level fusion: convex combinations of per-model scores chosen by
//! exhaustive grid search on validation data.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{f1_score, pearson};

/// A grid point must beat the incumbent by more than this to replace it, so
/// floating-point noise cannot override the lexicographic tie rule.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionMetric {
    F1,
    Pcc,
}

impl std::str::FromStr for SelectionMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f1" => Ok(SelectionMetric::F1),
            "pcc" => Ok(SelectionMetric::Pcc),
            other => Err(Error::Config(format!("unknown metric `{other}` (f1|pcc)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionFusionWeights {
    pub weights: Vec<f64>,
    /// Integer grid coordinates; `weights[i] = grid[i] / steps`.
    pub grid: Vec<u32>,
    pub steps: u32,
    pub metric: SelectionMetric,
    pub score: f64,
}

impl DecisionFusionWeights {
    pub fn fuse(&self, preds: &[Vec<f64>]) -> Vec<f64> {
        fused_scores(preds, &self.weights)
    }
}

pub fn fused_scores(preds: &[Vec<f64>], weights: &[f64]) -> Vec<f64> {
    (0..preds[0].len())
        .map(|i| preds.iter().zip(weights).map(|(p, w)| w * p[i]).sum())
        .collect()
}

/// Metric of one weighting; `-inf` when undefined.
pub fn grid_score(fused: &[f64], labels: &[f64], metric: SelectionMetric) -> f64 {
    match metric {
        SelectionMetric::F1 => f1_score(fused, labels),
        SelectionMetric::Pcc => pearson(fused, labels).unwrap_or(f64::NEG_INFINITY),
    }
}

/// Every simplex point on the grid, in lexicographic order of coordinates
/// (the last coordinate is implied).
pub fn simplex_grid(n_models: usize, steps: u32) -> Vec<Vec<u32>> {
    fn rec(prefix: &mut Vec<u32>, remaining: u32, left: usize, out: &mut Vec<Vec<u32>>) {
        if left == 1 {
            let mut p = prefix.clone();
            p.push(remaining);
            out.push(p);
            return;
        }
        for i in 0..=remaining {
            prefix.push(i);
            rec(prefix, remaining - i, left - 1, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), steps, n_models, &mut out);
    out
}

pub fn decision_fuse(
    preds: &[Vec<f64>],
    labels: &[f64],
    metric: SelectionMetric,
    step: f64,
) -> Result<DecisionFusionWeights> {
    if !(2..=3).contains(&preds.len()) {
        return Err(Error::Config(format!(
            "decision fusion combines 2 or 3 models, got {}",
            preds.len()
        )));
    }
    if preds.iter().any(|p| p.len() != labels.len()) || labels.is_empty() {
        return Err(Error::Shape("prediction lists must align with labels".into()));
    }
    let steps = (1.0 / step).round() as u32;
    if steps == 0 || ((steps as f64) * step - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("grid step {step} does not divide 1")));
    }
    let grid = simplex_grid(preds.len(), steps);
    let scores: Vec<f64> = grid
        .par_iter()
        .map(|g| {
            let w: Vec<f64> = g.iter().map(|&i| i as f64 / steps as f64).collect();
            grid_score(&fused_scores(preds, &w), labels, metric)
        })
        .collect();
    let undefined = scores.iter().filter(|s| s.is_infinite()).count();
    if undefined > 0 {
        log::warn!("{undefined} decision-fusion grid points have an undefined metric");
    }
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] + TIE_TOLERANCE {
            best = i;
        }
    }
    let g = grid[best].clone();
    Ok(DecisionFusionWeights {
        weights: g.iter().map(|&i| i as f64 / steps as f64).collect(),
        grid: g,
        steps,
        metric,
        score: scores[best],
    })
}
