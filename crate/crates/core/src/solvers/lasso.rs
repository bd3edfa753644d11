use ndarray::Array1;

use super::linalg::{normalized_system, LinearFit, RegressionProblem};
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct LassoFit {
    pub fit: LinearFit,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after each full sweep.
    pub objective_trace: Vec<f64>,
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Cyclic coordinate descent on
///
/// `1/(2W) * sum_i w_i (y_i - b - x_i . beta)^2 + lambda * |beta|_1`
///
/// with `W = sum_i w_i` and an unpenalized intercept `b`. Sweeps use the
/// precomputed weighted Gram matrix (covariance updates), so one sweep costs
/// `O(p^2)` independent of `n`. Stops when the largest coefficient change in a
/// sweep is below `tol` or after `max_iter` sweeps.
pub fn lasso_cd(p: &RegressionProblem, lambda: f64, tol: f64, max_iter: usize) -> Result<LassoFit> {
    p.validate()?;
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidInput(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("tol must be > 0, got {tol}")));
    }
    let sys = normalized_system(p);
    let n_feat = p.n_features();
    let gram = &sys.gram;
    let mut beta = Array1::<f64>::zeros(n_feat);
    // gram . beta, kept in sync with beta
    let mut g_beta = Array1::<f64>::zeros(n_feat);
    let objective = |beta: &Array1<f64>, g_beta: &Array1<f64>| {
        0.5 * (sys.yty - 2.0 * sys.xty.dot(beta) + beta.dot(g_beta)) + lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
    };

    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let mut max_delta = 0.0f64;
        for j in 0..n_feat {
            let gjj = gram[[j, j]];
            let old = beta[j];
            let new = if gjj <= 1e-14 {
                0.0
            } else {
                let rho = sys.xty[j] - g_beta[j] + gjj * old;
                soft_threshold(rho, lambda) / gjj
            };
            let delta = new - old;
            if delta != 0.0 {
                beta[j] = new;
                g_beta.scaled_add(delta, &gram.column(j));
                max_delta = max_delta.max(delta.abs());
            }
        }
        trace.push(objective(&beta, &g_beta));
        if max_delta < tol {
            converged = true;
            break;
        }
    }
    let intercept = sys.y_mean - sys.x_mean.dot(&beta);
    Ok(LassoFit {
        fit: LinearFit { coef: beta, intercept },
        iterations,
        converged,
        objective_trace: trace,
    })
}
