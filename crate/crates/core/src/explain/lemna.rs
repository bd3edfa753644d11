use std::time::Instant;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use super::lime::design_matrix;
use super::perturb::perturb;
use super::{check_input, finish, weighted_items, Explanation, ExplainerKind, ExplanationFlag};
use crate::classifiers::BlackBox;
use crate::dataset::FeatureVector;
use crate::solvers::{em_mixture_regression, weighted_least_squares, EmOptions, RegressionProblem};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LemnaParams {
    pub perturbations: usize,
    pub flip_prob: f64,
    /// Mixture size `M`.
    pub components: usize,
    pub tol: f64,
    pub max_iter: usize,
    /// Optional L1 penalty inside each M-step.
    pub l1: f64,
}

impl Default for LemnaParams {
    fn default() -> Self {
        Self {
            perturbations: 1000,
            flip_prob: 0.1,
            components: 3,
            tol: 1e-6,
            max_iter: 100,
            l1: 0.0,
        }
    }
}

impl LemnaParams {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.perturbations < 10 {
            v.push(format!("lemna.perturbations must be >= 10, got {}", self.perturbations));
        }
        if !(self.flip_prob > 0.0 && self.flip_prob < 1.0) {
            v.push(format!("lemna.flip_prob must be in (0, 1), got {}", self.flip_prob));
        }
        if self.components == 0 {
            v.push("lemna.components must be >= 1".into());
        }
        if !(self.tol > 0.0) {
            v.push(format!("lemna.tol must be > 0, got {}", self.tol));
        }
        if self.max_iter == 0 {
            v.push("lemna.max_iter must be >= 1".into());
        }
        if !(self.l1 >= 0.0 && self.l1.is_finite()) {
            v.push(format!("lemna.l1 must be >= 0, got {}", self.l1));
        }
        v
    }
}

/// Mixture of `M` linear regressions fitted by EM on perturbations; the
/// component most responsible for the sample supplies the attributions.
pub fn explain_lemna<M: BlackBox + ?Sized>(model: &M, x: &FeatureVector, params: &LemnaParams, seed: u64) -> Result<Explanation> {
    let start = Instant::now();
    super::config_error(params.violations())?;
    check_input(model, x)?;
    let pred = model.predict_bits(x.bits());
    let mut e = Explanation::new(ExplainerKind::Lemna, model, pred);

    let set = perturb(x, params.perturbations, params.flip_prob, seed)?;
    let rows: Vec<&[u8]> = std::iter::once(x.bits()).chain(set.vectors.iter().map(|v| v.bits())).collect();
    let targets: Array1<f64> = rows.iter().map(|r| model.score(r, pred)).collect();
    if targets.iter().all(|&y| y == targets[0]) {
        e.flags.push(ExplanationFlag::Degenerate);
        return Ok(finish(e, start));
    }
    let y_x = targets[0];
    let design = design_matrix(rows.iter().copied(), x.len());
    let problem = RegressionProblem::unweighted(design, targets)?;

    let opts = EmOptions {
        tol: params.tol,
        max_iter: params.max_iter,
        l1: params.l1,
        ..EmOptions::new(params.components, seed)
    };
    let mixture = em_mixture_regression(&problem, &opts);
    let coef = match mixture {
        Ok(mix) if mix.effective_components() == mix.n_components() => {
            let row = problem.design.row(0);
            let resp = mix.responsibilities(row, y_x);
            let j = (0..resp.len())
                .max_by(|&a, &b| resp[a].partial_cmp(&resp[b]).unwrap().then(b.cmp(&a)))
                .unwrap();
            mix.components[j].coef.to_vec()
        }
        Ok(_) | Err(Error::Singular(_)) => {
            e.flags.push(ExplanationFlag::SingleComponentFallback);
            let fit = match weighted_least_squares(&problem, 0.0) {
                Err(Error::Singular(_)) => weighted_least_squares(&problem, 1e-8)?,
                other => other?,
            };
            fit.coef.to_vec()
        }
        Err(other) => return Err(other),
    };
    e.items = weighted_items(&coef);
    Ok(finish(e, start))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::{FnModel, ScoreFnModel};

    #[test]
    fn single_component_finds_the_dictator() {
        let m = FnModel::new(12, 2, "d", |b| b[0] as usize);
        let x = FeatureVector::from_bools((0..12).map(|i| i % 3 == 0));
        let params = LemnaParams {
            components: 1,
            ..LemnaParams::default()
        };
        let e = explain_lemna(&m, &x, &params, 2).unwrap();
        assert_eq!(e.items[0].feature, 0);
        assert_eq!(e.items, explain_lemna(&m, &x, &params, 2).unwrap().items);
    }

    #[test]
    fn regime_is_picked_by_the_sample() {
        // f0 drives the score when f5 = 1, f1 when f5 = 0
        let m = ScoreFnModel::new(10, 2, "regimes", |b| {
            let s = if b[5] == 1 {
                0.1 + 0.8 * f64::from(b[0])
            } else {
                0.1 + 0.8 * f64::from(b[1])
            };
            vec![1.0 - s, s]
        });
        let x = FeatureVector::from_bools((0..10).map(|i| i == 0 || i == 1 || i == 5));
        let params = LemnaParams {
            components: 2,
            flip_prob: 0.3,
            ..LemnaParams::default()
        };
        let e = explain_lemna(&m, &x, &params, 11).unwrap();
        let rank = |f: usize| e.items.iter().position(|i| i.feature == f).unwrap_or(usize::MAX);
        assert!(rank(0) < rank(1), "{e:?}");
    }

    #[test]
    fn constant_model_is_degenerate() {
        let m = FnModel::new(4, 2, "c", |_| 1);
        let e = explain_lemna(&m, &FeatureVector::zeros(4), &LemnaParams::default(), 0).unwrap();
        assert!(e.is_empty() && e.has_flag(ExplanationFlag::Degenerate));
    }
}
