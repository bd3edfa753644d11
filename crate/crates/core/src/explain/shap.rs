use std::collections::HashMap;
use std::time::Instant;

use ndarray::{Array1, Array2};
use rand::seq::index::sample;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{check_input, finish, weighted_items, Explanation, ExplainerKind};
use crate::classifiers::BlackBox;
use crate::dataset::FeatureVector;
use crate::solvers::{weighted_least_squares, RegressionProblem};
use crate::util::rng;
use crate::{Error, Result};

/// Values taken by features absent from a coalition.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapReference {
    #[default]
    Zeros,
    /// The bitwise complement of the explained sample.
    Complement,
    Vector(Vec<u8>),
}

impl ShapReference {
    fn resolve(&self, x: &FeatureVector) -> Result<Vec<u8>> {
        match self {
            ShapReference::Zeros => Ok(vec![0; x.len()]),
            ShapReference::Complement => Ok(x.complement().bits().to_vec()),
            ShapReference::Vector(v) => {
                if v.len() != x.len() {
                    return Err(Error::Dimension {
                        expected: x.len(),
                        got: v.len(),
                    });
                }
                if v.iter().any(|&b| b > 1) {
                    return Err(Error::InvalidInput("reference vector must be binary".into()));
                }
                Ok(v.clone())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShapParams {
    /// Coalition budget; `None` means `2d + 2048`. A budget covering all
    /// `2^d - 2` proper coalitions enumerates them exactly.
    pub coalitions: Option<usize>,
    pub reference: ShapReference,
    pub ridge: f64,
}

impl Default for ShapParams {
    fn default() -> Self {
        Self {
            coalitions: None,
            reference: ShapReference::Zeros,
            ridge: 0.0,
        }
    }
}

impl ShapParams {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            v.push(format!("shap.ridge must be >= 0, got {}", self.ridge));
        }
        if self.coalitions == Some(0) {
            v.push("shap.coalitions must be positive".into());
        }
        v
    }

    fn budget(&self, d: usize) -> usize {
        self.coalitions.unwrap_or(2 * d + 2048)
    }
}

fn ln_binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).map(|i| ((n - i) as f64).ln() - ((i + 1) as f64).ln()).sum()
}

/// All `k`-subsets of `0..n` in lexicographic order.
fn for_each_subset(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        // rightmost position that can still advance
        let mut i = k;
        while i > 0 && idx[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Coalition design of kernel SHAP: each mask with its kernel weight.
struct Coalitions {
    masks: Vec<Vec<bool>>,
    weights: Vec<f64>,
}

/// Shapley kernel mass of all coalitions of size `s` (and `d - s` when the
/// two sizes differ): `C(d,s) * (d-1) / (C(d,s) s (d-s))`.
fn size_mass(d: usize, s: usize) -> f64 {
    let one = (d - 1) as f64 / (s * (d - s)) as f64;
    if s == d - s {
        one
    } else {
        2.0 * one
    }
}

/// Enumerate small and large coalition sizes while the budget allows, then
/// sample the rest in complementary pairs, spreading the remaining kernel
/// mass evenly over the draws.
fn build_coalitions(d: usize, budget: usize, seed: u64) -> Coalitions {
    let mut out = Coalitions {
        masks: Vec::new(),
        weights: Vec::new(),
    };
    let half = d / 2;
    let mut remaining = budget as f64;
    let mut mass_left: f64 = (1..=half).map(|s| size_mass(d, s)).sum();
    let mut first_sampled = half + 1;
    for s in 1..=half {
        let paired = s != d - s;
        let count = ln_binomial(d, s).exp() * if paired { 2.0 } else { 1.0 };
        let mass = size_mass(d, s);
        if remaining * mass / mass_left + 1e-8 < count {
            first_sampled = s;
            break;
        }
        let per_subset = mass / count;
        for_each_subset(d, s, |idx| {
            let mut m = vec![false; d];
            for &i in idx {
                m[i] = true;
            }
            if paired {
                out.masks.push(m.iter().map(|b| !b).collect());
                out.weights.push(per_subset);
            }
            out.masks.push(m);
            out.weights.push(per_subset);
        });
        remaining -= count;
        mass_left -= mass;
    }
    if first_sampled > half || remaining < 1.0 {
        return out;
    }

    // sample the sizes that could not be enumerated
    let sizes: Vec<usize> = (first_sampled..=half).collect();
    let size_weights: Vec<f64> = sizes.iter().map(|&s| size_mass(d, s)).collect();
    let total: f64 = size_weights.iter().sum();
    let mut r = rng(seed);
    let mut counts: HashMap<Vec<bool>, f64> = HashMap::new();
    let mut order: Vec<Vec<bool>> = Vec::new();
    let mut draws = 0.0;
    let target = remaining.floor() as usize;
    let mut attempts = 0;
    while counts.len() < target && attempts < 4 * target.max(1) {
        attempts += 1;
        let mut u = r.gen::<f64>() * total;
        let mut s = *sizes.last().unwrap();
        for (&sz, &w) in sizes.iter().zip(&size_weights) {
            if u < w {
                s = sz;
                break;
            }
            u -= w;
        }
        let mut m = vec![false; d];
        for i in sample(&mut r, d, s).into_iter() {
            m[i] = true;
        }
        let mut add = |m: Vec<bool>| {
            if !counts.contains_key(&m) {
                order.push(m.clone());
            }
            *counts.entry(m).or_insert(0.0) += 1.0;
        };
        if s != d - s {
            add(m.iter().map(|b| !b).collect());
            draws += 1.0;
        }
        add(m);
        draws += 1.0;
    }
    for m in order {
        let c = counts[&m];
        out.weights.push(mass_left * c / draws);
        out.masks.push(m);
    }
    out
}

fn masked(x: &[u8], reference: &[u8], mask: &[bool]) -> Vec<u8> {
    mask.iter()
        .zip(x.iter().zip(reference))
        .map(|(&keep, (&a, &b))| if keep { a } else { b })
        .collect()
}

/// Kernel SHAP: Shapley-kernel weighted regression over coalitions with the
/// attributions constrained to sum to `f(x) - f(reference)`.
pub fn explain_shap<M: BlackBox + ?Sized>(model: &M, x: &FeatureVector, params: &ShapParams, seed: u64) -> Result<Explanation> {
    let start = Instant::now();
    super::config_error(params.violations())?;
    check_input(model, x)?;
    let d = x.len();
    let budget = params.budget(d);
    if budget < d + 2 {
        return Err(Error::InvalidInput(format!(
            "kernel SHAP needs at least d + 2 = {} coalitions, got {budget}",
            d + 2
        )));
    }
    let pred = model.predict_bits(x.bits());
    let reference = params.reference.resolve(x)?;
    let fx = model.score(x.bits(), pred);
    let f0 = model.score(&reference, pred);
    let delta = fx - f0;
    let mut e = Explanation::new(ExplainerKind::Shap, model, pred);
    if d == 1 {
        e.items = weighted_items(&[delta]);
        return Ok(finish(e, start));
    }

    let co = build_coalitions(d, budget, seed);
    let n = co.masks.len();
    let last = d - 1;
    let mut design = Array2::<f64>::zeros((n, d - 1));
    let mut targets = Array1::<f64>::zeros(n);
    for (i, mask) in co.masks.iter().enumerate() {
        let y = model.score(&masked(x.bits(), &reference, mask), pred) - f0;
        let zl = f64::from(u8::from(mask[last]));
        targets[i] = y - delta * zl;
        for j in 0..last {
            design[[i, j]] = f64::from(u8::from(mask[j])) - zl;
        }
    }
    let problem = RegressionProblem::new(design, targets, Array1::from(co.weights))?.without_intercept();
    let fit = match weighted_least_squares(&problem, params.ridge) {
        Err(Error::Singular(_)) if params.ridge == 0.0 => weighted_least_squares(&problem, 1e-10)?,
        other => other?,
    };
    let mut phi: Vec<f64> = fit.coef.to_vec();
    phi.push(delta - phi.iter().sum::<f64>());
    e.items = weighted_items(&phi);
    Ok(finish(e, start))
}

/// Exact Shapley values of `S -> score(x on S, reference elsewhere)` for the
/// class predicted on `x`, by enumerating all `2^d` coalitions.
pub fn exact_shapley<M: BlackBox + ?Sized>(model: &M, x: &FeatureVector, reference: &FeatureVector) -> Result<Vec<f64>> {
    check_input(model, x)?;
    check_input(model, reference)?;
    let d = x.len();
    if d > 20 {
        return Err(Error::InvalidInput(format!("exact Shapley enumeration is limited to d <= 20, got {d}")));
    }
    let pred = model.predict_bits(x.bits());
    let values: Vec<f64> = (0u32..1 << d)
        .map(|s| {
            let bits: Vec<u8> = (0..d)
                .map(|j| if s >> j & 1 == 1 { x.get(j) } else { reference.get(j) })
                .collect();
            model.score(&bits, pred)
        })
        .collect();
    // weight of a coalition of size s not containing the player
    let w: Vec<f64> = (0..d).map(|s| 1.0 / (d as f64 * ln_binomial(d - 1, s).exp())).collect();
    let mut phi = vec![0.0; d];
    for s in 0u32..1 << d {
        let size = s.count_ones() as usize;
        for (j, p) in phi.iter_mut().enumerate() {
            if s >> j & 1 == 0 {
                *p += w[size] * (values[(s | 1 << j) as usize] - values[s as usize]);
            }
        }
    }
    Ok(phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::{FnModel, ScoreFnModel};

    fn attributions(e: &Explanation, d: usize) -> Vec<f64> {
        let mut v = vec![0.0; d];
        for it in &e.items {
            v[it.feature] = it.weight;
        }
        v
    }

    #[test]
    fn subset_enumeration_counts() {
        for (n, k, c) in [(5, 2, 10), (6, 3, 20), (4, 4, 1), (4, 1, 4)] {
            let mut seen = 0;
            for_each_subset(n, k, |idx| {
                assert_eq!(idx.len(), k);
                assert!(idx.windows(2).all(|w| w[0] < w[1]));
                seen += 1;
            });
            assert_eq!(seen, c, "C({n},{k})");
        }
    }

    #[test]
    fn exact_shapley_axioms() {
        let x = FeatureVector::new(vec![1, 1, 1]).unwrap();
        let z = FeatureVector::zeros(3);
        let dictator = FnModel::new(3, 2, "d", |b| b[0] as usize);
        assert_eq!(exact_shapley(&dictator, &x, &z).unwrap(), vec![1.0, 0.0, 0.0]);
        let constant = ScoreFnModel::new(3, 2, "c", |_| vec![0.3, 0.7]);
        assert!(exact_shapley(&constant, &x, &z).unwrap().iter().all(|v| v.abs() < 1e-15));
        let majority = FnModel::new(3, 2, "maj", |b| usize::from(b.iter().map(|&v| v as u32).sum::<u32>() >= 2));
        let phi = exact_shapley(&majority, &x, &z).unwrap();
        assert!((phi[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((phi[0] - phi[1]).abs() < 1e-12 && (phi[1] - phi[2]).abs() < 1e-12);
    }

    #[test]
    fn symmetric_and_gets_equal_attributions() {
        let m = FnModel::new(2, 2, "and", |b| usize::from(b[0] == 1 && b[1] == 1));
        let x = FeatureVector::new(vec![1, 1]).unwrap();
        let e = explain_shap(&m, &x, &ShapParams::default(), 0).unwrap();
        let phi = attributions(&e, 2);
        assert!((phi[0] - 0.5).abs() < 1e-9 && (phi[1] - 0.5).abs() < 1e-9, "{phi:?}");
    }

    #[test]
    fn full_enumeration_matches_exact_values() {
        let d = 8;
        let m = ScoreFnModel::new(d, 2, "nl", |b| {
            let s = (0.2 * f64::from(b[0]) + 0.3 * f64::from(b[1] & b[2]) + 0.1 * f64::from(b[3] | b[4]) + 0.2 * f64::from(b[5] ^ b[7]))
                .min(1.0);
            vec![1.0 - s, s]
        });
        let x = FeatureVector::new(vec![1, 1, 1, 0, 1, 1, 0, 1]).unwrap();
        let params = ShapParams {
            coalitions: Some((1 << d) - 2),
            ..ShapParams::default()
        };
        let e = explain_shap(&m, &x, &params, 0).unwrap();
        let phi = attributions(&e, d);
        let exact = exact_shapley(&m, &x, &FeatureVector::zeros(d)).unwrap();
        for j in 0..d {
            assert!((phi[j] - exact[j]).abs() < 1e-9, "feature {j}: {} vs {}", phi[j], exact[j]);
        }
    }

    #[test]
    fn efficiency_holds_with_sampled_coalitions() {
        let d = 30;
        let m = ScoreFnModel::new(d, 2, "nl", |b| {
            let s = (b.iter().take(10).map(|&v| f64::from(v)).sum::<f64>() / 10.0).powi(2);
            vec![1.0 - s, s]
        });
        let x = FeatureVector::from_bools((0..d).map(|i| i % 2 == 0));
        for reference in [ShapReference::Zeros, ShapReference::Complement] {
            let params = ShapParams {
                reference: reference.clone(),
                ..ShapParams::default()
            };
            let e = explain_shap(&m, &x, &params, 5).unwrap();
            let r = params.reference.resolve(&x).unwrap();
            let pred = m.predict_bits(x.bits());
            let want = m.score(x.bits(), pred) - m.score(&r, pred);
            let got: f64 = e.items.iter().map(|i| i.weight).sum();
            assert!((got - want).abs() < 1e-9, "{reference:?}: {got} vs {want}");
            assert_eq!(e.items, explain_shap(&m, &x, &params, 5).unwrap().items);
        }
    }

    #[test]
    fn too_few_coalitions_is_an_error() {
        let m = FnModel::new(10, 2, "m", |b| b[0] as usize);
        let params = ShapParams {
            coalitions: Some(11),
            ..ShapParams::default()
        };
        assert!(explain_shap(&m, &FeatureVector::zeros(10), &params, 0).is_err());
    }
}
