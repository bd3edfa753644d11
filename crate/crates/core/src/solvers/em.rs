use ndarray::{Array1, Array2};
use rand::Rng as _;

use super::lasso::lasso_cd;
use super::linalg::{weighted_least_squares, LinearFit, RegressionProblem};
use crate::util::rng;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct EmOptions {
    pub components: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    /// Optional L1 penalty inside the M-step (0 = plain weighted least squares).
    pub l1: f64,
}

impl EmOptions {
    pub fn new(components: usize, seed: u64) -> Self {
        Self {
            components,
            tol: 1e-6,
            max_iter: 100,
            seed,
            l1: 0.0,
        }
    }
}

/// `y ~ sum_j theta_j * N(intercept_j + beta_j . x, sigma_j^2)`.
#[derive(Clone, Debug)]
pub struct MixtureRegressionModel {
    pub theta: Vec<f64>,
    pub components: Vec<LinearFit>,
    pub sigmas: Vec<f64>,
    /// Weighted log-likelihood after each E-step, since the last reseed.
    pub log_likelihood: Vec<f64>,
    pub iterations: usize,
    /// A collapsed component was re-initialised once.
    pub reseeded: bool,
    /// Components still carrying responsibility mass.
    pub active: Vec<bool>,
}

impl MixtureRegressionModel {
    pub fn n_components(&self) -> usize {
        self.theta.len()
    }

    pub fn effective_components(&self) -> usize {
        self.active.iter().filter(|a| **a).count()
    }

    /// Posterior component probabilities for one observation `(x, y)`.
    pub fn responsibilities(&self, row: ndarray::ArrayView1<f64>, y: f64) -> Vec<f64> {
        let logs: Vec<f64> = (0..self.n_components())
            .map(|j| {
                if !self.active[j] {
                    return f64::NEG_INFINITY;
                }
                let r = y - self.components[j].predict_row(row);
                self.theta[j].ln() + log_normal(r, self.sigmas[j])
            })
            .collect();
        softmax(&logs)
    }
}

fn log_normal(residual: f64, sigma: f64) -> f64 {
    let z = residual / sigma;
    -0.5 * z * z - sigma.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn softmax(xs: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(xs);
    xs.iter().map(|x| (x - lse).exp()).collect()
}

fn random_responsibilities(n: usize, m: usize, rng: &mut crate::util::Rng) -> Array2<f64> {
    let mut r = Array2::from_shape_fn((n, m), |_| rng.gen_range(0.0..1.0) + 1e-3);
    for mut row in r.rows_mut() {
        let s = row.sum();
        row /= s;
    }
    r
}

/// Component responsibility mass (as a share of total weight) below which
/// a component counts as collapsed.
const COLLAPSE_SHARE: f64 = 1e-6;

fn fit_component(p: &RegressionProblem, resp: ndarray::ArrayView1<f64>, l1: f64) -> Result<LinearFit> {
    let sub = p.reweighted(resp);
    if l1 > 0.0 {
        return Ok(lasso_cd(&sub, l1, 1e-8, 1000)?.fit);
    }
    match weighted_least_squares(&sub, 0.0) {
        Err(Error::Singular(_)) => weighted_least_squares(&sub, 1e-8),
        other => other,
    }
}

/// EM for a mixture of `M` linear regressions.
///
/// Responsibilities start from a seeded random assignment. The M-step fits
/// each component by weighted least squares (or lasso when `l1 > 0`) and
/// sets its noise scale to the weighted residual RMS, floored at
/// `1e-3 * std(y)` so an exactly interpolating component cannot drive the
/// likelihood to infinity. Iteration stops once the log-likelihood gain
/// per unit of sample weight drops below `tol`.
///
/// A component whose responsibility mass vanishes is re-seeded once; any
/// later collapse deactivates it and the fit continues with the remaining
/// components.
pub fn em_mixture_regression(p: &RegressionProblem, opts: &EmOptions) -> Result<MixtureRegressionModel> {
    p.validate()?;
    if opts.components == 0 {
        return Err(Error::InvalidInput("mixture needs at least one component".into()));
    }
    if !(opts.tol > 0.0) || opts.max_iter == 0 {
        return Err(Error::InvalidInput("EM needs tol > 0 and max_iter >= 1".into()));
    }
    let n = p.n_samples();
    let m = opts.components;
    let w_total = p.weights.sum();
    let y_mean = p.targets.dot(&p.weights) / w_total;
    let y_var = p.targets.iter().zip(p.weights.iter()).map(|(y, w)| w * (y - y_mean).powi(2)).sum::<f64>() / w_total;
    let sigma_floor = 1e-3 * y_var.sqrt().max(1e-6);

    let mut rng = rng(opts.seed);
    let mut resp = random_responsibilities(n, m, &mut rng);
    let mut active = vec![true; m];
    let mut reseeded = false;
    let mut theta = vec![1.0 / m as f64; m];
    let mut components = vec![
        LinearFit {
            coef: Array1::zeros(p.n_features()),
            intercept: y_mean,
        };
        m
    ];
    let mut sigmas = vec![y_var.sqrt().max(sigma_floor); m];
    let mut trace: Vec<f64> = Vec::new();
    let mut iterations = 0;

    while iterations < opts.max_iter {
        iterations += 1;

        // M-step
        let mut restarted = false;
        for j in 0..m {
            if !active[j] {
                continue;
            }
            let mass: f64 = resp.column(j).iter().zip(p.weights.iter()).map(|(r, w)| r * w).sum();
            if mass < COLLAPSE_SHARE * w_total {
                if !reseeded {
                    reseeded = true;
                    restarted = true;
                    for i in 0..n {
                        resp[[i, j]] = rng.gen_range(0.0..1.0) + 1e-3;
                    }
                    normalize_rows(&mut resp, &active);
                    break;
                }
                active[j] = false;
                theta[j] = 0.0;
                resp.column_mut(j).fill(0.0);
                normalize_rows(&mut resp, &active);
            }
        }
        if restarted {
            trace.clear();
            continue;
        }
        for j in 0..m {
            if !active[j] {
                continue;
            }
            let rj = resp.column(j);
            let mass: f64 = rj.iter().zip(p.weights.iter()).map(|(r, w)| r * w).sum();
            let fit = fit_component(p, rj, opts.l1)?;
            let pred = fit.predict(&p.design);
            let sse: f64 = (0..n)
                .map(|i| p.weights[i] * rj[i] * (p.targets[i] - pred[i]).powi(2))
                .sum();
            sigmas[j] = (sse / mass).sqrt().max(sigma_floor);
            theta[j] = mass / w_total;
            components[j] = fit;
        }

        // E-step
        let preds: Vec<Array1<f64>> = components.iter().map(|c| c.predict(&p.design)).collect();
        let mut ll = 0.0;
        let mut logs = vec![0.0; m];
        for i in 0..n {
            for j in 0..m {
                logs[j] = if active[j] {
                    theta[j].ln() + log_normal(p.targets[i] - preds[j][i], sigmas[j])
                } else {
                    f64::NEG_INFINITY
                };
            }
            let lse = log_sum_exp(&logs);
            ll += p.weights[i] * lse;
            for j in 0..m {
                resp[[i, j]] = (logs[j] - lse).exp();
            }
        }
        let prev = trace.last().copied();
        trace.push(ll);
        if let Some(prev) = prev {
            if (ll - prev) / w_total < opts.tol {
                break;
            }
        }
    }

    Ok(MixtureRegressionModel {
        theta,
        components,
        sigmas,
        log_likelihood: trace,
        iterations,
        reseeded,
        active,
    })
}

fn normalize_rows(resp: &mut Array2<f64>, active: &[bool]) {
    let m = active.len();
    for mut row in resp.rows_mut() {
        let s: f64 = (0..m).filter(|&j| active[j]).map(|j| row[j]).sum();
        let k = active.iter().filter(|a| **a).count() as f64;
        for j in 0..m {
            row[j] = if !active[j] {
                0.0
            } else if s > 0.0 {
                row[j] / s
            } else {
                1.0 / k
            };
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn two_lines(seed: u64, n: usize) -> RegressionProblem {
        let mut rng = rng(seed);
        let mut x = Array2::zeros((n, 1));
        let mut y = Array1::zeros(n);
        for i in 0..n {
            let xi: f64 = rng.gen_range(-1.0..1.0);
            let noise: f64 = rng.gen_range(-0.05..0.05);
            x[[i, 0]] = xi;
            y[i] = if i % 2 == 0 { 2.0 * xi + 1.0 } else { -3.0 * xi - 1.0 } + noise;
        }
        RegressionProblem::unweighted(x, y).unwrap()
    }

    #[test]
    fn single_component_is_weighted_least_squares() {
        let mut r = rng(5);
        let x = Array2::from_shape_fn((50, 3), |_| r.gen_range(-1.0..1.0));
        let y = Array1::from_shape_fn(50, |_| r.gen_range(-1.0..1.0));
        let w = Array1::from_shape_fn(50, |_| r.gen_range(0.5..1.5));
        let p = RegressionProblem::new(x, y, w).unwrap();
        let model = em_mixture_regression(&p, &EmOptions::new(1, 3)).unwrap();
        let wls = weighted_least_squares(&p, 0.0).unwrap();
        for j in 0..3 {
            assert_abs_diff_eq!(model.components[0].coef[j], wls.coef[j], epsilon = 1e-8);
        }
        assert_abs_diff_eq!(model.components[0].intercept, wls.intercept, epsilon = 1e-8);
        assert_abs_diff_eq!(model.theta[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn recovers_two_planted_slopes() {
        let p = two_lines(11, 400);
        let model = em_mixture_regression(&p, &EmOptions { max_iter: 500, ..EmOptions::new(2, 7) }).unwrap();
        let mut slopes: Vec<f64> = model.components.iter().map(|c| c.coef[0]).collect();
        slopes.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((slopes[0] + 3.0).abs() < 0.05, "{slopes:?}");
        assert!((slopes[1] - 2.0).abs() < 0.05, "{slopes:?}");
        assert_abs_diff_eq!(model.theta.iter().sum::<f64>(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn log_likelihood_is_monotone() {
        for seed in 0..8 {
            let p = two_lines(100 + seed, 200);
            let model = em_mixture_regression(&p, &EmOptions { max_iter: 300, tol: 1e-10, ..EmOptions::new(3, seed) }).unwrap();
            for w in model.log_likelihood.windows(2) {
                assert!(w[1] >= w[0] - 1e-9, "seed {seed}: {} -> {}", w[0], w[1]);
            }
            assert!(model.sigmas.iter().zip(&model.active).all(|(s, a)| !a || *s > 0.0));
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let p = two_lines(1, 100);
        let a = em_mixture_regression(&p, &EmOptions::new(2, 4)).unwrap();
        let b = em_mixture_regression(&p, &EmOptions::new(2, 4)).unwrap();
        assert_eq!(a.components, b.components);
        assert_eq!(a.log_likelihood, b.log_likelihood);
    }

    #[test]
    fn collapse_is_survivable() {
        // constant data: every component explains it equally; more components
        // than distinct rows must still produce finite output
        let x = Array2::from_shape_fn((6, 1), |(i, _)| (i % 2) as f64);
        let y = Array1::from_shape_fn(6, |i| (i % 2) as f64);
        let p = RegressionProblem::unweighted(x, y).unwrap();
        let model = em_mixture_regression(&p, &EmOptions::new(5, 2)).unwrap();
        assert!(model.effective_components() >= 1);
        assert!(model.components.iter().all(|c| c.coef.iter().all(|v| v.is_finite())));
        assert_abs_diff_eq!(model.theta.iter().sum::<f64>(), 1.0, epsilon = 1e-9);
    }
}
