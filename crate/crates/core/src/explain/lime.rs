use std::time::Instant;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::perturb::perturb;
use super::{check_input, finish, weighted_items, Explanation, ExplainerKind, ExplanationFlag};
use crate::classifiers::BlackBox;
use crate::dataset::FeatureVector;
use crate::solvers::{lasso_cd, RegressionProblem};
use crate::Result;

/// How a perturbation's distance to the explained sample becomes its
/// regression weight.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Proximity {
    /// `exp(-dist^2 / width^2)` over cosine distance.
    ExponentialCosine,
    /// `1 - dist`, the cosine similarity itself.
    Cosine,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LimeParams {
    pub perturbations: usize,
    pub flip_prob: f64,
    pub kernel_width: f64,
    /// L1 penalty of the surrogate.
    pub lambda: f64,
    pub proximity: Proximity,
}

impl Default for LimeParams {
    fn default() -> Self {
        Self {
            perturbations: 1000,
            flip_prob: 0.1,
            kernel_width: 0.25,
            lambda: 0.01,
            proximity: Proximity::ExponentialCosine,
        }
    }
}

impl LimeParams {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.perturbations < 10 {
            v.push(format!("lime.perturbations must be >= 10, got {}", self.perturbations));
        }
        if !(self.flip_prob > 0.0 && self.flip_prob < 1.0) {
            v.push(format!("lime.flip_prob must be in (0, 1), got {}", self.flip_prob));
        }
        if !(self.kernel_width > 0.0 && self.kernel_width.is_finite()) {
            v.push(format!("lime.kernel_width must be > 0, got {}", self.kernel_width));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            v.push(format!("lime.lambda must be >= 0, got {}", self.lambda));
        }
        v
    }
}

/// Cosine distance between bit vectors; an all-zero vector is at distance 1
/// from anything but another all-zero vector.
pub fn cosine_distance(a: &[u8], b: &[u8]) -> f64 {
    let (mut dot, mut na, mut nb) = (0u32, 0u32, 0u32);
    for (&x, &y) in a.iter().zip(b) {
        dot += u32::from(x & y);
        na += u32::from(x);
        nb += u32::from(y);
    }
    match (na, nb) {
        (0, 0) => 0.0,
        (0, _) | (_, 0) => 1.0,
        _ => (1.0 - f64::from(dot) / (f64::from(na) * f64::from(nb)).sqrt()).max(0.0),
    }
}

pub(crate) fn design_matrix<'a>(rows: impl ExactSizeIterator<Item = &'a [u8]>, d: usize) -> Array2<f64> {
    let n = rows.len();
    let mut m = Array2::<f64>::zeros((n, d));
    for (i, r) in rows.enumerate() {
        for (j, &b) in r.iter().enumerate() {
            m[[i, j]] = f64::from(b);
        }
    }
    m
}

/// Sparse local linear surrogate fitted on proximity-weighted perturbations.
pub fn explain_lime<M: BlackBox + ?Sized>(model: &M, x: &FeatureVector, params: &LimeParams, seed: u64) -> Result<Explanation> {
    let start = Instant::now();
    super::config_error(params.violations())?;
    check_input(model, x)?;
    let pred = model.predict_bits(x.bits());
    let mut e = Explanation::new(ExplainerKind::Lime, model, pred);

    let set = perturb(x, params.perturbations, params.flip_prob, seed)?;
    // the sample itself anchors the fit at distance 0
    let rows: Vec<&[u8]> = std::iter::once(x.bits()).chain(set.vectors.iter().map(|v| v.bits())).collect();
    let targets: Array1<f64> = rows.iter().map(|r| model.score(r, pred)).collect();
    let weights: Array1<f64> = rows
        .iter()
        .map(|r| {
            let dist = cosine_distance(x.bits(), r);
            match params.proximity {
                Proximity::ExponentialCosine => (-(dist * dist) / (params.kernel_width * params.kernel_width)).exp(),
                Proximity::Cosine => 1.0 - dist,
            }
        })
        .collect();

    let first = targets[0];
    let varying = targets.iter().zip(&weights).any(|(&y, &w)| w > 0.0 && y != first);
    if !varying {
        e.flags.push(ExplanationFlag::Degenerate);
        return Ok(finish(e, start));
    }
    let design = design_matrix(rows.iter().copied(), x.len());
    let problem = RegressionProblem::new(design, targets, weights)?;
    let fit = lasso_cd(&problem, params.lambda, 1e-9, 10_000)?;
    e.items = weighted_items(fit.fit.coef.as_slice().expect("contiguous coefficients"));
    Ok(finish(e, start))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::{FnModel, ScoreFnModel};
    use rand::{Rng, SeedableRng};

    #[test]
    fn cosine_distance_edge_cases() {
        assert_eq!(cosine_distance(&[0, 0], &[0, 0]), 0.0);
        assert_eq!(cosine_distance(&[0, 0], &[1, 0]), 1.0);
        assert_eq!(cosine_distance(&[1, 0], &[0, 1]), 1.0);
        assert_eq!(cosine_distance(&[1, 1], &[1, 1]), 0.0);
        assert!((cosine_distance(&[1, 1], &[1, 0]) - (1.0 - 1.0 / 2f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn dictator_model_ranks_its_feature_first() {
        let m = FnModel::new(20, 2, "dictator", |b| b[0] as usize);
        let x = FeatureVector::from_bools((0..20).map(|i| i % 2 == 0));
        let e = explain_lime(&m, &x, &LimeParams::default(), 3).unwrap();
        assert_eq!(e.items[0].feature, 0);
        assert_eq!(e.items, explain_lime(&m, &x, &LimeParams::default(), 3).unwrap().items);
    }

    #[test]
    fn constant_model_is_degenerate() {
        let m = FnModel::new(8, 2, "const", |_| 1);
        let e = explain_lime(&m, &FeatureVector::zeros(8), &LimeParams::default(), 0).unwrap();
        assert!(e.is_empty());
        assert!(e.has_flag(ExplanationFlag::Degenerate));
    }

    #[test]
    fn five_nonzero_coefficients_give_at_least_five_items() {
        let w = [0.3, -0.25, 0.2, 0.15, -0.1];
        let m = ScoreFnModel::new(10, 2, "lin", move |b| {
            let s = 0.5 + w.iter().zip(b).map(|(w, &x)| w * f64::from(x)).sum::<f64>() / 2.0;
            vec![1.0 - s, s]
        });
        let x = FeatureVector::from_bools((0..10).map(|i| i < 5));
        let params = LimeParams {
            lambda: 1e-4,
            ..LimeParams::default()
        };
        let e = explain_lime(&m, &x, &params, 1).unwrap();
        let top5: Vec<usize> = e.top_k(5);
        assert_eq!(top5.len(), 5);
        let mut sorted = top5.clone();
        sorted.sort();
        assert_eq!(sorted, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn linear_models_recover_largest_coefficient() {
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        for case in 0..40 {
            let d = r.gen_range(3..=20);
            let w: Vec<f64> = (0..d).map(|_| r.gen_range(-1.0..1.0)).collect();
            let norm: f64 = w.iter().map(|v: &f64| v.abs()).sum();
            let wc = w.clone();
            let m = ScoreFnModel::new(d, 2, "lin", move |b| {
                let s = 0.5 + wc.iter().zip(b).map(|(w, &x)| w * f64::from(x)).sum::<f64>() / (2.0 * norm);
                vec![1.0 - s, s]
            });
            let x = FeatureVector::from_bools((0..d).map(|_| r.gen_bool(0.5)));
            let e = explain_lime(&m, &x, &LimeParams { lambda: 1e-4, ..LimeParams::default() }, case).unwrap();
            let mut by_size: Vec<usize> = (0..d).collect();
            by_size.sort_by(|&a, &b| w[b].abs().partial_cmp(&w[a].abs()).unwrap());
            if w[by_size[1]].abs() > 0.9 * w[by_size[0]].abs() {
                continue; // near tie: either answer is correct
            }
            let best = by_size[0];
            assert_eq!(e.items[0].feature, best, "case {case}: {w:?}");
        }
    }
}
