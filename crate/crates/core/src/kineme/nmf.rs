//! Non-negative matrix factorization with Lee–Seung multiplicative updates
//! on the Frobenius objective `||H - B C||_F^2`.

use ndarray::{Array2, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{compensated_sum, seeded_rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NmfConfig {
    pub rank: usize,
    pub max_iter: usize,
    /// Stop once the relative objective decrease of one iteration falls below this.
    pub tol: f64,
    pub seed: u64,
}

impl Default for NmfConfig {
    fn default() -> Self {
        NmfConfig {
            rank: 20,
            max_iter: 500,
            tol: 1e-6,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NmfModel {
    /// `rows x rank`
    pub basis: Array2<f64>,
    /// `rank x cols`
    pub coeffs: Array2<f64>,
    /// Objective before the first update, then after every iteration.
    pub objective_trace: Vec<f64>,
}

impl NmfModel {
    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    pub fn final_objective(&self) -> f64 {
        *self.objective_trace.last().unwrap()
    }
}

/// Squared Frobenius residual, summed with compensation so that per-iteration
/// differences stay meaningful near convergence.
pub fn frobenius_objective(h: &Array2<f64>, basis: &Array2<f64>, coeffs: &Array2<f64>) -> f64 {
    let approx = basis.dot(coeffs);
    compensated_sum(h.iter().zip(approx.iter()).map(|(a, b)| {
        let d = a - b;
        d * d
    }))
}

pub fn fit_nmf(h: &Array2<f64>, config: &NmfConfig) -> Result<NmfModel> {
    let (rows, cols) = h.dim();
    if h.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::Precondition("NMF input must be finite and non-negative".into()));
    }
    let r = config.rank;
    if r == 0 || r > rows.min(cols) {
        return Err(Error::Config(format!("NMF rank {r} outside [1, {}]", rows.min(cols))));
    }

    let mut rng = seeded_rng(config.seed, 0);
    let scale = (h.mean().unwrap_or(0.0) / r as f64).sqrt().max(1e-3);
    let mut basis = Array2::from_shape_fn((rows, r), |_| scale * rng.random_range(0.01..1.0));
    let mut coeffs = Array2::from_shape_fn((r, cols), |_| scale * rng.random_range(0.01..1.0));

    let mut trace = vec![frobenius_objective(h, &basis, &coeffs)];
    for _ in 0..config.max_iter {
        // C <- C * (B^T H) / (B^T B C)
        let numer = basis.t().dot(h);
        let denom = basis.t().dot(&basis).dot(&coeffs);
        multiplicative_step(&mut coeffs, &numer, &denom);

        // B <- B * (H C^T) / (B C C^T)
        let numer = h.dot(&coeffs.t());
        let denom = basis.dot(&coeffs.dot(&coeffs.t()));
        multiplicative_step(&mut basis, &numer, &denom);

        let obj = frobenius_objective(h, &basis, &coeffs);
        let prev = *trace.last().unwrap();
        trace.push(obj);
        if obj == 0.0 || (prev > 0.0 && (prev - obj) / prev < config.tol) {
            break;
        }
    }
    Ok(NmfModel {
        basis,
        coeffs,
        objective_trace: trace,
    })
}

/// Entries with a zero denominator are left unchanged, which keeps each
/// step an exact majorization-minimization update.
fn multiplicative_step(target: &mut Array2<f64>, numer: &Array2<f64>, denom: &Array2<f64>) {
    Zip::from(target).and(numer).and(denom).for_each(|t, &n, &d| {
        if d > 0.0 {
            *t *= n / d;
        }
    });
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_nonneg(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
        let mut rng = seeded_rng(seed, 99);
        Array2::from_shape_fn((rows, cols), |_| rng.random_range(0.0..1.0))
    }

    #[test]
    fn exact_low_rank_instance_is_recovered() {
        let b0 = random_nonneg(180, 5, 1);
        let c0 = random_nonneg(5, 40, 2);
        let h = b0.dot(&c0);
        let cfg = NmfConfig {
            rank: 5,
            max_iter: 5000,
            tol: 0.0,
            seed: 3,
        };
        let m = fit_nmf(&h, &cfg).unwrap();
        let norm2: f64 = h.iter().map(|v| v * v).sum();
        assert!(
            m.final_objective() < 1e-3 * norm2,
            "objective {} vs bound {}",
            m.final_objective(),
            1e-3 * norm2
        );
    }

    #[test]
    fn objective_never_increases() {
        let h = random_nonneg(30, 50, 4);
        let cfg = NmfConfig {
            rank: 6,
            max_iter: 300,
            tol: 0.0,
            seed: 5,
        };
        let m = fit_nmf(&h, &cfg).unwrap();
        for w in m.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{} -> {}", w[0], w[1]);
        }
        assert!(m.basis.iter().all(|&v| v >= 0.0));
        assert!(m.coeffs.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn ones_matrix_is_rank_one() {
        let h = Array2::ones((4, 6));
        let cfg = NmfConfig {
            rank: 1,
            max_iter: 2000,
            tol: 0.0,
            seed: 0,
        };
        let m = fit_nmf(&h, &cfg).unwrap();
        assert!(m.final_objective() <= 1e-6);
    }

    #[test]
    fn negative_input_is_rejected() {
        let mut h = Array2::ones((3, 3));
        h[[1, 1]] = -0.1;
        assert!(matches!(
            fit_nmf(
                &h,
                &NmfConfig {
                    rank: 1,
                    ..Default::default()
                }
            ),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn rank_out_of_range() {
        let h = Array2::ones((3, 4));
        for rank in [0, 4] {
            assert!(matches!(
                fit_nmf(
                    &h,
                    &NmfConfig {
                        rank,
                        ..Default::default()
                    }
                ),
                Err(Error::Config(_))
            ));
        }
    }

    #[test]
    fn same_seed_same_factors() {
        let h = random_nonneg(20, 25, 8);
        let cfg = NmfConfig {
            rank: 4,
            max_iter: 50,
            tol: 0.0,
            seed: 11,
        };
        let a = fit_nmf(&h, &cfg).unwrap();
        let b = fit_nmf(&h, &cfg).unwrap();
        assert_eq!(a.basis, b.basis);
        assert_eq!(a.objective_trace, b.objective_trace);
    }
}
