//! The five interpreters. Each maps (model, sample, params, seed) to a
//! ranked [`Explanation`]: weighted attributions for LIME, SHAP and LEMNA,
//! rule predicates for Anchor and LORE.

mod anchor;
mod cache;
mod lemna;
mod lime;
mod lore;
mod perturb;
mod shap;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::classifiers::BlackBox;
use crate::dataset::FeatureVector;
use crate::util::sha256_hex;
use crate::{Error, Result};

pub use anchor::{explain_anchor, AnchorParams};
pub use cache::{read_cache, CacheRecord, CacheWriter};
pub use lemna::{explain_lemna, LemnaParams};
pub use lime::{cosine_distance, explain_lime, LimeParams, Proximity};
pub use lore::{explain_lore, lore_fitness, LoreParams};
pub use perturb::{perturb, PerturbationSet};
pub use shap::{exact_shapley, explain_shap, ShapParams, ShapReference};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExplainerKind {
    Lime,
    Anchor,
    Lore,
    Shap,
    Lemna,
}

impl ExplainerKind {
    pub const ALL: [ExplainerKind; 5] = [
        ExplainerKind::Lime,
        ExplainerKind::Anchor,
        ExplainerKind::Lore,
        ExplainerKind::Shap,
        ExplainerKind::Lemna,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExplainerKind::Lime => "lime",
            ExplainerKind::Anchor => "anchor",
            ExplainerKind::Lore => "lore",
            ExplainerKind::Shap => "shap",
            ExplainerKind::Lemna => "lemna",
        }
    }

    pub fn is_rule_based(self) -> bool {
        matches!(self, ExplainerKind::Anchor | ExplainerKind::Lore)
    }
}

impl std::fmt::Display for ExplainerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ExplainerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExplainerKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(vec![format!("unknown explainer '{s}' (expected lime, anchor, lore, shap or lemna)")]))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    EqualsOne,
    EqualsZero,
    Weighted,
}

impl Constraint {
    /// Rule predicate requiring `bit`.
    pub fn equals(bit: u8) -> Self {
        if bit == 1 {
            Constraint::EqualsOne
        } else {
            Constraint::EqualsZero
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplanationItem {
    pub feature: usize,
    pub constraint: Constraint,
    pub weight: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExplanationFlag {
    /// The surrogate had nothing to fit (constant target, no counterexample).
    Degenerate,
    /// Anchor search ended without a rule meeting the precision threshold.
    NonAnchored,
    /// The LEMNA mixture collapsed and a single linear model was used.
    SingleComponentFallback,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub approach: ExplainerKind,
    pub model_id: String,
    pub sample_id: String,
    pub predicted_label: usize,
    pub items: Vec<ExplanationItem>,
    pub elapsed_s: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<ExplanationFlag>,
}

impl Explanation {
    fn new<M: BlackBox + ?Sized>(approach: ExplainerKind, model: &M, predicted_label: usize) -> Self {
        Self {
            approach,
            model_id: model.model_id().to_string(),
            sample_id: String::new(),
            predicted_label,
            items: Vec::new(),
            elapsed_s: 0.0,
            flags: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn has_flag(&self, flag: ExplanationFlag) -> bool {
        self.flags.contains(&flag)
    }

    /// Features of the first `min(k, len)` items, in rank order.
    pub fn top_k(&self, k: usize) -> Vec<usize> {
        self.items.iter().take(k).map(|i| i.feature).collect()
    }

    /// Checks the structural invariants against a dimension `d`.
    pub fn validate(&self, d: usize) -> Result<()> {
        let mut seen = vec![false; d];
        for it in &self.items {
            if it.feature >= d {
                return Err(Error::InvalidInput(format!("explanation feature {} out of range (d = {d})", it.feature)));
            }
            if std::mem::replace(&mut seen[it.feature], true) {
                return Err(Error::InvalidInput(format!("explanation repeats feature {}", it.feature)));
            }
            if !it.weight.is_finite() || (it.constraint != Constraint::Weighted && it.weight < 0.0) {
                return Err(Error::InvalidInput(format!("bad weight {} on feature {}", it.weight, it.feature)));
            }
        }
        Ok(())
    }
}

/// Nonzero coefficients as weighted items, by |weight| descending, ties by
/// feature index. Coefficients at rounding-noise level relative to the
/// largest one count as zero.
pub(crate) fn weighted_items(coef: &[f64]) -> Vec<ExplanationItem> {
    let scale = coef.iter().filter(|w| w.is_finite()).fold(0.0f64, |m, w| m.max(w.abs()));
    let floor = scale * 1e-12;
    let mut items: Vec<ExplanationItem> = coef
        .iter()
        .enumerate()
        .filter(|(_, w)| w.is_finite() && w.abs() > floor)
        .map(|(feature, &weight)| ExplanationItem {
            feature,
            constraint: Constraint::Weighted,
            weight,
        })
        .collect();
    items.sort_by(|a, b| {
        b.weight
            .abs()
            .partial_cmp(&a.weight.abs())
            .unwrap()
            .then(a.feature.cmp(&b.feature))
    });
    items
}

pub(crate) fn check_input<M: BlackBox + ?Sized>(model: &M, x: &FeatureVector) -> Result<()> {
    if x.len() != model.n_features() {
        return Err(Error::Dimension {
            expected: model.n_features(),
            got: x.len(),
        });
    }
    Ok(())
}

/// Parameters of all five interpreters, as read from an experiment config.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExplainerParams {
    pub lime: LimeParams,
    pub shap: ShapParams,
    pub anchor: AnchorParams,
    pub lore: LoreParams,
    pub lemna: LemnaParams,
}

impl ExplainerParams {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        v.extend(self.lime.violations());
        v.extend(self.shap.violations());
        v.extend(self.anchor.violations());
        v.extend(self.lore.violations());
        v.extend(self.lemna.violations());
        v
    }

    /// Short digest of one interpreter's parameters; cache lines produced
    /// under different parameters never mix.
    pub fn params_hash(&self, kind: ExplainerKind) -> String {
        let json = match kind {
            ExplainerKind::Lime => serde_json::to_string(&self.lime),
            ExplainerKind::Shap => serde_json::to_string(&self.shap),
            ExplainerKind::Anchor => serde_json::to_string(&self.anchor),
            ExplainerKind::Lore => serde_json::to_string(&self.lore),
            ExplainerKind::Lemna => serde_json::to_string(&self.lemna),
        }
        .expect("parameter structs serialize");
        sha256_hex(format!("{kind}:{json}").as_bytes())[..16].to_string()
    }
}

pub(crate) fn config_error(v: Vec<String>) -> Result<()> {
    if v.is_empty() {
        Ok(())
    } else {
        Err(Error::Config(v))
    }
}

/// Run interpreter `kind` on one sample.
pub fn explain<M: BlackBox + ?Sized>(
    kind: ExplainerKind,
    model: &M,
    sample_id: &str,
    x: &FeatureVector,
    params: &ExplainerParams,
    seed: u64,
) -> Result<Explanation> {
    let start = Instant::now();
    let mut e = match kind {
        ExplainerKind::Lime => explain_lime(model, x, &params.lime, seed),
        ExplainerKind::Shap => explain_shap(model, x, &params.shap, seed),
        ExplainerKind::Anchor => explain_anchor(model, x, &params.anchor, seed),
        ExplainerKind::Lore => explain_lore(model, x, &params.lore, seed),
        ExplainerKind::Lemna => explain_lemna(model, x, &params.lemna, seed),
    }?;
    e.sample_id = sample_id.to_string();
    e.elapsed_s = start.elapsed().as_secs_f64().max(f64::MIN_POSITIVE);
    Ok(e)
}

/// Stamp the wall-clock time of a per-kind run.
pub(crate) fn finish(mut e: Explanation, start: Instant) -> Explanation {
    e.elapsed_s = start.elapsed().as_secs_f64().max(f64::MIN_POSITIVE);
    e
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_names_round_trip() {
        for k in ExplainerKind::ALL {
            assert_eq!(k.as_str().parse::<ExplainerKind>().unwrap(), k);
            assert_eq!(serde_json::to_string(&k).unwrap(), format!("\"{k}\""));
        }
        assert!(matches!("gradcam".parse::<ExplainerKind>(), Err(Error::Config(_))));
    }

    #[test]
    fn weighted_items_rank_by_magnitude_then_index() {
        let items = weighted_items(&[0.1, -0.5, 0.0, 0.5, f64::NAN]);
        let order: Vec<usize> = items.iter().map(|i| i.feature).collect();
        assert_eq!(order, vec![1, 3, 0]);
        assert_eq!(items[0].weight, -0.5);
    }

    #[test]
    fn params_hash_tracks_only_the_relevant_block() {
        let a = ExplainerParams::default();
        let mut b = a.clone();
        b.lime.perturbations = 500;
        assert_ne!(a.params_hash(ExplainerKind::Lime), b.params_hash(ExplainerKind::Lime));
        assert_eq!(a.params_hash(ExplainerKind::Shap), b.params_hash(ExplainerKind::Shap));
        assert_ne!(a.params_hash(ExplainerKind::Shap), a.params_hash(ExplainerKind::Lemna));
    }

    #[test]
    fn validate_catches_duplicates_and_range() {
        let mut e = Explanation {
            approach: ExplainerKind::Lime,
            model_id: "m".into(),
            sample_id: "s".into(),
            predicted_label: 0,
            items: weighted_items(&[1.0, 2.0]),
            elapsed_s: 0.1,
            flags: vec![],
        };
        assert!(e.validate(2).is_ok());
        assert!(e.validate(1).is_err());
        e.items.push(e.items[0].clone());
        assert!(e.validate(2).is_err());
    }
}
