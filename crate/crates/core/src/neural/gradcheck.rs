//! Central finite-difference verification of analytic gradients.

use super::loss::Loss;
use super::network::Network;
use crate::error::Result;

pub const FD_STEP: f64 = 1e-5;
/// Floor on the denominator of the relative error, so that parameters with
/// vanishing gradients are judged on absolute agreement.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub n_params: usize,
    pub max_rel_error: f64,
    pub worst_param: usize,
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_error < tol
    }
}

pub fn relative_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(REL_ERROR_FLOOR)
}

fn mean_loss<N: Network>(model: &N, data: &[(N::Input, f64)], loss: Loss) -> Result<f64> {
    let mut total = 0.0;
    for (x, t) in data {
        total += loss.value(model.predict(x)?, *t);
    }
    Ok(total / data.len() as f64)
}

/// Compares the analytic gradient of the mean loss over `data` with central
/// differences of step `h`, for every parameter.
pub fn gradient_check<N: Network>(model: &N, data: &[(N::Input, f64)], loss: Loss, h: f64) -> Result<GradCheckReport> {
    let mut grad = model.zeros_like();
    let n = data.len() as f64;
    for (x, t) in data {
        let t = *t;
        model.accumulate_gradient(x, &|y| loss.value_and_grad(y, t).1 / n, &mut grad)?;
    }
    let analytic = grad.flat_params();
    let base = model.flat_params();
    let mut probe = model.clone();
    let mut numeric = Vec::with_capacity(base.len());
    for i in 0..base.len() {
        let mut p = base.clone();
        p[i] = base[i] + h;
        probe.set_flat_params(&p);
        let up = mean_loss(&probe, data, loss)?;
        p[i] = base[i] - h;
        probe.set_flat_params(&p);
        let down = mean_loss(&probe, data, loss)?;
        numeric.push((up - down) / (2.0 * h));
    }
    let mut max_rel_error = 0.0;
    let mut worst_param = 0;
    for (i, (a, nm)) in analytic.iter().zip(&numeric).enumerate() {
        let e = relative_error(*a, *nm);
        if e > max_rel_error {
            max_rel_error = e;
            worst_param = i;
        }
    }
    Ok(GradCheckReport {
        n_params: base.len(),
        max_rel_error,
        worst_param,
        analytic,
        numeric,
    })
}
