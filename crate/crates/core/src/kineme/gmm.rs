//! Diagonal-covariance Gaussian mixture fitted by EM, seeded with k-means++.

use ndarray::{Array2, ArrayView1};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{derive_seed, log_sum_exp, seeded_rng};

pub const VARIANCE_FLOOR: f64 = 1e-6;
const DEGENERATE_WEIGHT: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GmmConfig {
    pub components: usize,
    pub max_iter: usize,
    /// Convergence threshold on the change of mean per-point log-likelihood.
    pub tol: f64,
    pub seed: u64,
    pub restarts: usize,
}

impl Default for GmmConfig {
    fn default() -> Self {
        GmmConfig {
            components: 16,
            max_iter: 300,
            tol: 1e-7,
            seed: 7,
            restarts: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoeffMixture {
    pub weights: Vec<f64>,
    /// `components x dim`
    pub means: Array2<f64>,
    /// `components x dim`, every entry at least [`VARIANCE_FLOOR`]
    pub variances: Array2<f64>,
    /// Mean per-point log-likelihood after each E-step of the selected run,
    /// restarted whenever a degenerate component had to be re-seeded.
    pub log_likelihood_trace: Vec<f64>,
    pub reseeds: usize,
}

impl CoeffMixture {
    pub fn components(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means.ncols()
    }

    /// `log w_k + log N(x | mu_k, diag(var_k))` for every component.
    pub fn log_joint(&self, x: ArrayView1<f64>) -> Vec<f64> {
        let ln_2pi = (2.0 * std::f64::consts::PI).ln();
        (0..self.components())
            .map(|k| {
                let mut acc = 0.0;
                for d in 0..self.dim() {
                    let v = self.variances[[k, d]];
                    let diff = x[d] - self.means[[k, d]];
                    acc += ln_2pi + v.ln() + diff * diff / v;
                }
                self.weights[k].ln() - 0.5 * acc
            })
            .collect()
    }

    /// Posterior component responsibilities; sums to one.
    pub fn posterior(&self, x: ArrayView1<f64>) -> Vec<f64> {
        let lj = self.log_joint(x);
        let lse = log_sum_exp(&lj);
        lj.iter().map(|v| (v - lse).exp()).collect()
    }

    /// Maximum-posterior component; ties resolve to the lowest index.
    pub fn assign(&self, x: ArrayView1<f64>) -> usize {
        argmax_first(&self.log_joint(x))
    }

    pub fn mean_log_likelihood(&self, points: &Array2<f64>) -> f64 {
        let n = points.nrows();
        points
            .rows()
            .into_iter()
            .map(|x| log_sum_exp(&self.log_joint(x)))
            .sum::<f64>()
            / n as f64
    }

    /// Reorders components by descending weight (stable on ties).
    fn sorted_by_weight(mut self) -> Self {
        let mut order: Vec<usize> = (0..self.components()).collect();
        order.sort_by(|&a, &b| self.weights[b].total_cmp(&self.weights[a]).then(a.cmp(&b)));
        self.weights = order.iter().map(|&k| self.weights[k]).collect();
        self.means = Array2::from_shape_fn(self.means.dim(), |(k, d)| self.means[[order[k], d]]);
        self.variances = Array2::from_shape_fn(self.variances.dim(), |(k, d)| self.variances[[order[k], d]]);
        self
    }
}

pub(crate) fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Fits a mixture to the rows of `points`. The best of `restarts` runs by
/// final log-likelihood is returned, components sorted by descending weight.
pub fn fit_coeff_mixture(points: &Array2<f64>, config: &GmmConfig) -> Result<CoeffMixture> {
    let (n, _) = points.dim();
    let k = config.components;
    if k == 0 || k > n {
        return Err(Error::Config(format!(
            "{k} mixture components requested for {n} points"
        )));
    }
    if config.restarts == 0 {
        return Err(Error::Config("at least one EM restart is required".into()));
    }
    let runs: Vec<CoeffMixture> = (0..config.restarts)
        .into_par_iter()
        .map(|run| fit_single(points, config, derive_seed(config.seed, &[run as u64])))
        .collect();
    let mut best = 0;
    for (i, r) in runs.iter().enumerate() {
        let ll = *r.log_likelihood_trace.last().unwrap();
        let best_ll = *runs[best].log_likelihood_trace.last().unwrap();
        if ll > best_ll {
            best = i;
        }
    }
    Ok(runs.into_iter().nth(best).unwrap().sorted_by_weight())
}

fn global_variance(points: &Array2<f64>) -> Vec<f64> {
    let n = points.nrows() as f64;
    (0..points.ncols())
        .map(|d| {
            let col = points.column(d);
            let m = col.sum() / n;
            (col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n).max(VARIANCE_FLOOR)
        })
        .collect()
}

fn kmeans_plus_plus(points: &Array2<f64>, k: usize, rng: &mut impl Rng) -> Array2<f64> {
    let (n, dim) = points.dim();
    let mut centers = Array2::zeros((k, dim));
    let first = rng.random_range(0..n);
    centers.row_mut(0).assign(&points.row(first));
    let mut dist2: Vec<f64> = points.rows().into_iter().map(|x| sq_dist(x, centers.row(0))).collect();
    for c in 1..k {
        let total: f64 = dist2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut idx = n - 1;
            for (i, &d) in dist2.iter().enumerate() {
                if target < d {
                    idx = i;
                    break;
                }
                target -= d;
            }
            idx
        } else {
            rng.random_range(0..n)
        };
        centers.row_mut(c).assign(&points.row(pick));
        for (i, x) in points.rows().into_iter().enumerate() {
            dist2[i] = dist2[i].min(sq_dist(x, centers.row(c)));
        }
    }
    centers
}

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn fit_single(points: &Array2<f64>, config: &GmmConfig, seed: u64) -> CoeffMixture {
    let (n, dim) = points.dim();
    let k = config.components;
    let mut rng = seeded_rng(seed, 1);
    let gvar = global_variance(points);
    let mut model = CoeffMixture {
        weights: vec![1.0 / k as f64; k],
        means: kmeans_plus_plus(points, k, &mut rng),
        variances: Array2::from_shape_fn((k, dim), |(_, d)| gvar[d]),
        log_likelihood_trace: Vec::new(),
        reseeds: 0,
    };
    let max_reseeds = 10 * k;
    let mut resp = Array2::<f64>::zeros((n, k));
    let mut point_ll = vec![0.0; n];

    for _ in 0..config.max_iter.max(1) {
        // E-step
        for (i, x) in points.rows().into_iter().enumerate() {
            let lj = model.log_joint(x);
            let lse = log_sum_exp(&lj);
            point_ll[i] = lse;
            for c in 0..k {
                resp[[i, c]] = (lj[c] - lse).exp();
            }
        }
        let ll = point_ll.iter().sum::<f64>() / n as f64;
        let prev = model.log_likelihood_trace.last().copied();
        model.log_likelihood_trace.push(ll);
        if let Some(p) = prev {
            if (ll - p).abs() < config.tol {
                break;
            }
        }

        // M-step
        let mass: Vec<f64> = (0..k).map(|c| resp.column(c).sum()).collect();
        if let Some(c) = mass
            .iter()
            .position(|&m| m / (n as f64) < DEGENERATE_WEIGHT)
            .filter(|_| model.reseeds < max_reseeds)
        {
            let worst = (0..n).min_by(|&a, &b| point_ll[a].total_cmp(&point_ll[b])).unwrap();
            log::warn!("mixture component {c} degenerate; re-seeding from point {worst}");
            model.means.row_mut(c).assign(&points.row(worst));
            for d in 0..dim {
                model.variances[[c, d]] = gvar[d];
            }
            model.weights[c] = 1.0 / n as f64;
            let total: f64 = model.weights.iter().sum();
            model.weights.iter_mut().for_each(|w| *w /= total);
            model.reseeds += 1;
            model.log_likelihood_trace.clear();
            continue;
        }
        for c in 0..k {
            let m = mass[c];
            model.weights[c] = m / n as f64;
            for d in 0..dim {
                let mu = (0..n).map(|i| resp[[i, c]] * points[[i, d]]).sum::<f64>() / m;
                model.means[[c, d]] = mu;
            }
            for d in 0..dim {
                let mu = model.means[[c, d]];
                let var = (0..n)
                    .map(|i| {
                        let diff = points[[i, d]] - mu;
                        resp[[i, c]] * diff * diff
                    })
                    .sum::<f64>()
                    / m;
                model.variances[[c, d]] = var.max(VARIANCE_FLOOR);
            }
        }
    }
    if model.log_likelihood_trace.is_empty() {
        let ll = model.mean_log_likelihood(points);
        model.log_likelihood_trace.push(ll);
    }
    model
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn random_points(n: usize, dim: usize, seed: u64) -> Array2<f64> {
        let mut rng = seeded_rng(seed, 5);
        Array2::from_shape_fn((n, dim), |_| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn single_component_is_closed_form() {
        let pts = random_points(50, 3, 1);
        let cfg = GmmConfig {
            components: 1,
            restarts: 1,
            ..Default::default()
        };
        let m = fit_coeff_mixture(&pts, &cfg).unwrap();
        for d in 0..3 {
            let col = pts.column(d);
            let mean = col.sum() / 50.0;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 50.0;
            assert!((m.means[[0, d]] - mean).abs() < 1e-12);
            assert!((m.variances[[0, d]] - var.max(VARIANCE_FLOOR)).abs() < 1e-12);
        }
        assert_eq!(m.weights, vec![1.0]);
    }

    #[test]
    fn weights_on_simplex_and_variances_floored() {
        let mut pts = random_points(60, 2, 2);
        // a duplicated point cluster drives variances toward zero
        for i in 0..20 {
            pts[[i, 0]] = 0.5;
            pts[[i, 1]] = 0.5;
        }
        let cfg = GmmConfig {
            components: 3,
            restarts: 2,
            ..Default::default()
        };
        let m = fit_coeff_mixture(&pts, &cfg).unwrap();
        assert!((m.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(m.variances.iter().all(|&v| v >= VARIANCE_FLOOR));
        for w in m.weights.windows(2) {
            assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn log_likelihood_is_monotone() {
        let pts = random_points(200, 4, 3);
        let cfg = GmmConfig {
            components: 5,
            restarts: 3,
            tol: 0.0,
            max_iter: 200,
            ..Default::default()
        };
        let m = fit_coeff_mixture(&pts, &cfg).unwrap();
        for w in m.log_likelihood_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn posterior_sums_to_one() {
        let pts = random_points(80, 3, 4);
        let m = fit_coeff_mixture(
            &pts,
            &GmmConfig {
                components: 4,
                ..Default::default()
            },
        )
        .unwrap();
        for x in pts.rows() {
            let p = m.posterior(x);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn two_separated_clusters_match_nearest_centroid() {
        let mut rng = seeded_rng(9, 0);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let dim = 5;
        let pts = Array2::from_shape_fn((200, dim), |(i, _)| {
            let c = if i < 100 { 0.0 } else { 10.0 };
            c + noise.sample(&mut rng)
        });
        let m = fit_coeff_mixture(
            &pts,
            &GmmConfig {
                components: 2,
                ..Default::default()
            },
        )
        .unwrap();
        // nearest-centroid oracle against the generating centers
        let oracle: Vec<usize> = pts
            .rows()
            .into_iter()
            .map(|x| {
                let d0: f64 = x.iter().map(|v| v * v).sum();
                let d1: f64 = x.iter().map(|v| (v - 10.0).powi(2)).sum();
                usize::from(d1 < d0)
            })
            .collect();
        let assigned: Vec<usize> = pts.rows().into_iter().map(|x| m.assign(x)).collect();
        let same = oracle.iter().zip(&assigned).filter(|(a, b)| a == b).count();
        let agreement = same.max(200 - same) as f64 / 200.0;
        assert!(agreement >= 0.99, "agreement {agreement}");
    }

    #[test]
    fn too_many_components() {
        let pts = random_points(3, 2, 0);
        assert!(matches!(
            fit_coeff_mixture(
                &pts,
                &GmmConfig {
                    components: 4,
                    ..Default::default()
                }
            ),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn argmax_ties_pick_lowest() {
        assert_eq!(argmax_first(&[0.5, 0.9, 0.9]), 1);
    }
}
