use ndarray::{Array1, Array2, ArrayView1, Axis};

use crate::{Error, Result};

/// Weighted regression inputs: `n x p` design, `n` targets, `n` nonnegative weights.
#[derive(Clone, Debug)]
pub struct RegressionProblem {
    pub design: Array2<f64>,
    pub targets: Array1<f64>,
    pub weights: Array1<f64>,
    /// Fit an unpenalized intercept (the default). Kernel SHAP and a few
    /// tests need a regression through the origin.
    pub fit_intercept: bool,
}

impl RegressionProblem {
    pub fn new(design: Array2<f64>, targets: Array1<f64>, weights: Array1<f64>) -> Result<Self> {
        let p = Self {
            design,
            targets,
            weights,
            fit_intercept: true,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn unweighted(design: Array2<f64>, targets: Array1<f64>) -> Result<Self> {
        let n = targets.len();
        Self::new(design, targets, Array1::ones(n))
    }

    pub fn without_intercept(mut self) -> Self {
        self.fit_intercept = false;
        self
    }

    pub fn n_samples(&self) -> usize {
        self.targets.len()
    }

    pub fn n_features(&self) -> usize {
        self.design.ncols()
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let n = self.design.nrows();
        if self.targets.len() != n || self.weights.len() != n {
            return Err(Error::InvalidInput(format!(
                "design has {n} rows, targets {}, weights {}",
                self.targets.len(),
                self.weights.len()
            )));
        }
        if n == 0 {
            return Err(Error::InvalidInput("regression problem has no rows".into()));
        }
        if self.design.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("design matrix"));
        }
        if self.targets.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("targets"));
        }
        if self.weights.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidInput("weights must be finite and nonnegative".into()));
        }
        if self.weights.sum() <= 0.0 {
            return Err(Error::InvalidInput("weights are all zero".into()));
        }
        Ok(())
    }

    /// Same problem with per-row weights multiplied by `extra`.
    pub(crate) fn reweighted(&self, extra: ArrayView1<f64>) -> RegressionProblem {
        RegressionProblem {
            design: self.design.clone(),
            targets: self.targets.clone(),
            weights: &self.weights * &extra,
            fit_intercept: self.fit_intercept,
        }
    }
}

/// Linear model `intercept + coef . x`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearFit {
    pub coef: Array1<f64>,
    pub intercept: f64,
}

impl LinearFit {
    pub fn predict_row(&self, row: ArrayView1<f64>) -> f64 {
        self.intercept + row.dot(&self.coef)
    }

    pub fn predict(&self, design: &Array2<f64>) -> Array1<f64> {
        design.dot(&self.coef) + self.intercept
    }
}

/// Weighted normal-equation pieces after optional centering, all divided by
/// the weight total: `gram = X'WX / W`, `xty = X'Wy / W`, `yty = y'Wy / W`.
pub(crate) struct Normalized {
    pub gram: Array2<f64>,
    pub xty: Array1<f64>,
    pub yty: f64,
    pub x_mean: Array1<f64>,
    pub y_mean: f64,
}

pub(crate) fn normalized_system(p: &RegressionProblem) -> Normalized {
    let w_total = p.weights.sum();
    let (x_mean, y_mean) = if p.fit_intercept {
        let xm = p.design.t().dot(&p.weights) / w_total;
        let ym = p.targets.dot(&p.weights) / w_total;
        (xm, ym)
    } else {
        (Array1::zeros(p.n_features()), 0.0)
    };
    let sw = p.weights.mapv(f64::sqrt);
    let mut xs = &p.design - &x_mean.view().insert_axis(Axis(0));
    xs *= &sw.view().insert_axis(Axis(1));
    let ys = (&p.targets - y_mean) * &sw;
    let gram = xs.t().dot(&xs) / w_total;
    let xty = xs.t().dot(&ys) / w_total;
    let yty = ys.dot(&ys) / w_total;
    Normalized {
        gram,
        xty,
        yty,
        x_mean,
        y_mean,
    }
}

/// Solve `a x = b` for symmetric positive definite `a` by Cholesky.
/// Pivots below `1e-10 * max(diag)` are reported as singular.
pub(crate) fn cholesky_solve(a: &Array2<f64>, b: &Array1<f64>) -> Result<Array1<f64>> {
    let n = a.nrows();
    let max_diag = a.diag().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let threshold = 1e-10 * max_diag.max(f64::MIN_POSITIVE);
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut s = a[[j, j]];
        for k in 0..j {
            s -= l[[j, k]] * l[[j, k]];
        }
        if !(s > threshold) {
            return Err(Error::Singular(format!(
                "normal equations are rank deficient at column {j}; use ridge > 0"
            )));
        }
        let d = s.sqrt();
        l[[j, j]] = d;
        for i in (j + 1)..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / d;
        }
    }
    let mut y = Array1::<f64>::zeros(n);
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[[i, k]] * y[k];
        }
        y[i] = s / l[[i, i]];
    }
    let mut x = Array1::<f64>::zeros(n);
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l[[k, i]] * x[k];
        }
        x[i] = s / l[[i, i]];
    }
    Ok(x)
}

/// Weighted least squares with ridge `ridge * I` added to the normalized
/// Gram matrix. The intercept (when fit) is never penalized.
pub fn weighted_least_squares(p: &RegressionProblem, ridge: f64) -> Result<LinearFit> {
    p.validate()?;
    if !(ridge >= 0.0) || !ridge.is_finite() {
        return Err(Error::InvalidInput(format!("ridge must be a finite nonnegative number, got {ridge}")));
    }
    let sys = normalized_system(p);
    let mut a = sys.gram;
    for j in 0..a.nrows() {
        a[[j, j]] += ridge;
    }
    let coef = cholesky_solve(&a, &sys.xty)?;
    let intercept = sys.y_mean - sys.x_mean.dot(&coef);
    Ok(LinearFit { coef, intercept })
}
