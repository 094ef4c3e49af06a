//! Non-negative least squares, `argmin_{c >= 0} ||h - B c||^2`.
//!
//! Projected-gradient steps with Armijo backtracking along the projection
//! arc, each followed by an exact solve on the current free set (with
//! Lawson–Hanson style interpolation back into the feasible region). The
//! free-set solve makes termination at a tight KKT tolerance cheap once the
//! gradient steps have settled the active set.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// Default KKT tolerance, relative to the gradient magnitude at `c = 0`.
pub const KKT_TOL: f64 = 1e-8;

const ARMIJO_SIGMA: f64 = 1e-2;

#[derive(Debug, Clone)]
pub struct NnlsResult {
    pub coeffs: Array1<f64>,
    pub objective: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Pre-factored problem data for repeated projections onto one basis.
#[derive(Debug, Clone)]
pub struct NnlsSolver {
    basis: Array2<f64>,
    gram: Array2<f64>,
    tol: f64,
    max_iter: usize,
}

impl NnlsSolver {
    pub fn new(basis: Array2<f64>) -> Self {
        let gram = basis.t().dot(&basis);
        let (dim, r) = basis.dim();
        NnlsSolver {
            basis,
            gram,
            tol: KKT_TOL,
            max_iter: 10 * r * dim.max(1),
        }
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn basis(&self) -> &Array2<f64> {
        &self.basis
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    pub fn objective(&self, h: &Array1<f64>, c: &Array1<f64>) -> f64 {
        let r = h - &self.basis.dot(c);
        r.dot(&r)
    }

    pub fn solve(&self, h: &Array1<f64>) -> Result<NnlsResult> {
        if h.len() != self.basis.nrows() {
            return Err(Error::Shape(format!(
                "segment has dimension {}, basis expects {}",
                h.len(),
                self.basis.nrows()
            )));
        }
        let r = self.rank();
        let q = self.basis.t().dot(h);
        let hh = h.dot(h);
        let f = |c: &Array1<f64>| c.dot(&self.gram.dot(c)) - 2.0 * q.dot(c) + hh;
        let grad = |c: &Array1<f64>| 2.0 * (&self.gram.dot(c) - &q);
        let scale = q.iter().fold(0.0f64, |m, v| m.max(2.0 * v.abs())).max(1.0);
        let tol = self.tol * scale;

        let mut c = Array1::<f64>::zeros(r);
        let mut fc = f(&c);
        let mut step = 1.0 / (2.0 * self.gram.diag().sum().max(1e-300));
        let mut iterations = 0;
        let mut kkt = kkt_residual(&c, &grad(&c));
        while kkt > tol && iterations < self.max_iter {
            iterations += 1;
            let g = grad(&c);

            // projected-gradient step with Armijo backtracking
            let mut t = step * 2.0;
            loop {
                let cand = (&c - &(t * &g)).mapv(|v| v.max(0.0));
                let fcand = f(&cand);
                let decrease = g.dot(&(&cand - &c));
                if fcand <= fc + ARMIJO_SIGMA * decrease || t < 1e-300 {
                    c = cand;
                    fc = fcand;
                    step = t;
                    break;
                }
                t *= 0.5;
            }

            // exact minimization on the free set, keeping feasibility
            self.free_set_refine(&mut c, &q);
            let fnew = f(&c);
            if fnew <= fc {
                fc = fnew;
            }
            kkt = kkt_residual(&c, &grad(&c));
        }
        Ok(NnlsResult {
            objective: self.objective(h, &c),
            converged: kkt <= tol,
            coeffs: c,
            kkt_residual: kkt,
            iterations,
        })
    }

    fn free_set_refine(&self, c: &mut Array1<f64>, q: &Array1<f64>) {
        let r = c.len();
        for _ in 0..r {
            let free: Vec<usize> = (0..r).filter(|&i| c[i] > 0.0).collect();
            if free.is_empty() {
                return;
            }
            let Some(z) = solve_spd_subsystem(&self.gram, q, &free) else {
                return;
            };
            if z.iter().all(|&v| v > 0.0) {
                for (k, &i) in free.iter().enumerate() {
                    c[i] = z[k];
                }
                return;
            }
            // step toward z until the first free coordinate reaches zero
            let mut alpha = 1.0;
            let mut hit = free[0];
            for (k, &i) in free.iter().enumerate() {
                if z[k] <= 0.0 {
                    let a = c[i] / (c[i] - z[k]);
                    if a < alpha {
                        alpha = a;
                        hit = i;
                    }
                }
            }
            for (k, &i) in free.iter().enumerate() {
                c[i] += alpha * (z[k] - c[i]);
                if c[i] < 0.0 {
                    c[i] = 0.0;
                }
            }
            c[hit] = 0.0;
        }
    }
}

/// First-order optimality violation: `|g_i|` on positive coordinates and the
/// negative part of `g_i` on coordinates at the bound.
pub fn kkt_residual(c: &Array1<f64>, g: &Array1<f64>) -> f64 {
    c.iter()
        .zip(g.iter())
        .map(|(&ci, &gi)| if ci > 0.0 { gi.abs() } else { (-gi).max(0.0) })
        .fold(0.0, f64::max)
}

/// Solves `G[F,F] z = q[F]` by Cholesky; `None` if the subsystem is not
/// numerically positive definite.
fn solve_spd_subsystem(gram: &Array2<f64>, q: &Array1<f64>, free: &[usize]) -> Option<Vec<f64>> {
    let n = free.len();
    let mut l = vec![0.0; n * n];
    let max_diag = free.iter().map(|&i| gram[[i, i]]).fold(0.0, f64::max);
    for i in 0..n {
        for j in 0..=i {
            let mut s = gram[[free[i], free[j]]];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= 1e-13 * max_diag {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = q[free[i]];
        for k in 0..i {
            s -= l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    let mut z = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[k * n + i] * z[k];
        }
        z[i] = s / l[i * n + i];
    }
    Some(z)
}

/// One-shot convenience wrapper.
pub fn nnls(basis: &Array2<f64>, h: &Array1<f64>) -> Result<NnlsResult> {
    NnlsSolver::new(basis.clone()).solve(h)
}
