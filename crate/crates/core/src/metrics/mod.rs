//! Explanation-quality metrics computed from cached explanations: dice
//! similarity of top-k feature sets, stability across a similar-model
//! family, robustness across samples, effectiveness under mutation and
//! consistency across approaches.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifiers::BlackBox;
use crate::dataset::FeatureVector;
use crate::explain::{Constraint, Explanation};
use crate::util::{derive_seed, rng};
use crate::{Error, Result};

/// Explanations of one interpreter, keyed by sample id.
pub type ExplanationSet = BTreeMap<String, Explanation>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Stability,
    Robustness,
    Effectiveness,
    Consistency,
}

impl MetricKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MetricKind::Stability => "stability",
            MetricKind::Robustness => "robustness",
            MetricKind::Effectiveness => "effectiveness",
            MetricKind::Consistency => "consistency",
        }
    }
}

impl std::fmt::Display for MetricKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Value of a metric at one `k`. `value` is `None` when every sample was
/// skipped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricPoint {
    pub k: usize,
    pub value: Option<f64>,
    pub n_samples: usize,
    pub n_skipped: usize,
    /// Per-sample terms, sorted by sample id.
    pub per_sample: Vec<(String, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries {
    pub metric: MetricKind,
    pub points: Vec<MetricPoint>,
}

impl MetricSeries {
    pub fn at(&self, k: usize) -> Option<&MetricPoint> {
        self.points.iter().find(|p| p.k == k)
    }

    pub fn value(&self, k: usize) -> Option<f64> {
        self.at(k).and_then(|p| p.value)
    }
}

fn point(k: usize, terms: Vec<(String, Option<f64>)>) -> MetricPoint {
    let per_sample: Vec<(String, f64)> = terms.iter().filter_map(|(id, v)| v.map(|v| (id.clone(), v))).collect();
    let n = per_sample.len();
    MetricPoint {
        k,
        value: (n > 0).then(|| per_sample.iter().map(|(_, v)| v).sum::<f64>() / n as f64),
        n_samples: n,
        n_skipped: terms.len() - n,
        per_sample,
    }
}

fn check_ks(ks: &[usize]) -> Result<()> {
    if ks.is_empty() || ks.contains(&0) {
        return Err(Error::InvalidInput(format!("k values must be >= 1 and non-empty, got {ks:?}")));
    }
    Ok(())
}

/// Sorted, de-duplicated sample ids so results do not depend on
/// presentation order.
fn canonical(samples: &[String]) -> Vec<String> {
    let set: BTreeSet<&String> = samples.iter().collect();
    set.into_iter().cloned().collect()
}

/// Dice coefficient of two feature-index sets; `None` if both are empty.
pub fn dice_sets(a: &[usize], b: &[usize]) -> Option<f64> {
    if a.is_empty() && b.is_empty() {
        return None;
    }
    let common = a.iter().filter(|f| b.contains(f)).count();
    Some(2.0 * common as f64 / (a.len() + b.len()) as f64)
}

/// `2 |a ∩ b| / (|a| + |b|)` over the top-`min(k, |e|)` features of each
/// explanation; `None` when both are empty.
pub fn dice_similarity(e1: &Explanation, e2: &Explanation, k: usize) -> Option<f64> {
    dice_sets(&e1.top_k(k), &e2.top_k(k))
}

fn usable(e: Option<&Explanation>) -> Option<&Explanation> {
    e.filter(|e| !e.is_empty())
}

/// Mean pairwise dice among several explanation sources per sample, then the
/// mean over samples. Shared by stability (sources = family members) and
/// consistency (sources = approaches).
fn mean_pairwise(metric: MetricKind, sources: &[&ExplanationSet], samples: &[String], ks: &[usize]) -> Result<MetricSeries> {
    check_ks(ks)?;
    if sources.len() < 2 {
        return Err(Error::InvalidInput(format!("{metric} needs at least 2 explanation sources, got {}", sources.len())));
    }
    let ids = canonical(samples);
    let points = ks
        .iter()
        .map(|&k| {
            let terms: Vec<(String, Option<f64>)> = ids
                .par_iter()
                .map(|id| {
                    let es: Option<Vec<&Explanation>> = sources.iter().map(|s| usable(s.get(id))).collect();
                    let v = es.map(|es| {
                        let mut sum = 0.0;
                        let mut pairs = 0;
                        for i in 0..es.len() {
                            for j in i + 1..es.len() {
                                sum += dice_similarity(es[i], es[j], k).expect("non-empty explanations");
                                pairs += 1;
                            }
                        }
                        sum / pairs as f64
                    });
                    (id.clone(), v)
                })
                .collect();
            point(k, terms)
        })
        .collect();
    Ok(MetricSeries { metric, points })
}

/// Mean dice across the interpreters of a similar-model family, per sample,
/// averaged over samples. A sample lacking a usable explanation from any
/// member is skipped.
pub fn stability(family: &[&ExplanationSet], samples: &[String], ks: &[usize]) -> Result<MetricSeries> {
    mean_pairwise(MetricKind::Stability, family, samples, ks)
}

/// Mean dice across approaches explaining the same model.
pub fn consistency(approaches: &[&ExplanationSet], samples: &[String], ks: &[usize]) -> Result<MetricSeries> {
    mean_pairwise(MetricKind::Consistency, approaches, samples, ks)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassRobustness {
    pub class: usize,
    pub n: usize,
    /// Mean same-label similarity.
    pub s_bar: f64,
    /// Mean different-label similarity.
    pub d_bar: f64,
    pub rob: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustnessBreakdown {
    pub k: usize,
    pub classes: Vec<ClassRobustness>,
}

impl RobustnessBreakdown {
    /// Per-class rows from `(class, avgS, avgD)` sample terms.
    pub fn from_terms(k: usize, terms: &[(usize, f64, f64)]) -> Self {
        let mut acc: BTreeMap<usize, (usize, f64, f64)> = BTreeMap::new();
        for &(c, s, d) in terms {
            let e = acc.entry(c).or_insert((0, 0.0, 0.0));
            e.0 += 1;
            e.1 += s;
            e.2 += d;
        }
        let classes = acc
            .into_iter()
            .map(|(class, (n, s, d))| {
                let s_bar = s / n as f64;
                let d_bar = d / n as f64;
                ClassRobustness {
                    class,
                    n,
                    s_bar,
                    d_bar,
                    rob: s_bar - d_bar,
                }
            })
            .collect();
        Self { k, classes }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub series: MetricSeries,
    pub breakdowns: Vec<RobustnessBreakdown>,
}

/// Deterministic subsample of at most `cap` entries, seeded per sample.
fn cap_neighbours(pool: &[usize], cap: usize, seed: u64, id: &str, side: &str) -> Vec<usize> {
    if pool.len() <= cap {
        return pool.to_vec();
    }
    let mut r = rng(derive_seed(&[&seed.to_string(), id, side]));
    let mut picked: Vec<usize> = sample(&mut r, pool.len(), cap).into_iter().map(|i| pool[i]).collect();
    picked.sort_unstable();
    picked
}

/// For each sample: mean dice to other samples with the same predicted label
/// minus mean dice to samples with a different one, each neighbour set
/// capped at `neighbor_cap` by seeded subsampling. Samples lacking a usable
/// explanation, or lacking same- or different-label neighbours, are skipped.
pub fn robustness(
    explanations: &ExplanationSet,
    samples: &[String],
    ks: &[usize],
    neighbor_cap: usize,
    seed: u64,
) -> Result<RobustnessReport> {
    check_ks(ks)?;
    if neighbor_cap == 0 {
        return Err(Error::InvalidInput("neighbor_cap must be >= 1".into()));
    }
    let ids = canonical(samples);
    let valid: Vec<usize> = (0..ids.len()).filter(|&i| usable(explanations.get(&ids[i])).is_some()).collect();
    let label = |i: usize| explanations[&ids[i]].predicted_label;

    // neighbour sets do not depend on k
    let neighbours: Vec<Option<(Vec<usize>, Vec<usize>)>> = (0..ids.len())
        .into_par_iter()
        .map(|i| {
            usable(explanations.get(&ids[i]))?;
            let (same, diff): (Vec<usize>, Vec<usize>) =
                valid.iter().copied().filter(|&j| j != i).partition(|&j| label(j) == label(i));
            if same.is_empty() || diff.is_empty() {
                return None;
            }
            Some((
                cap_neighbours(&same, neighbor_cap, seed, &ids[i], "same"),
                cap_neighbours(&diff, neighbor_cap, seed, &ids[i], "different"),
            ))
        })
        .collect();
    if neighbours.iter().all(Option::is_none) {
        return Err(Error::InvalidInput(
            "robustness skipped every sample: no sample has both same-label and different-label neighbours".into(),
        ));
    }

    let mut points = Vec::new();
    let mut breakdowns = Vec::new();
    for &k in ks {
        let tops: Vec<Vec<usize>> = ids
            .iter()
            .map(|id| explanations.get(id).map(|e| e.top_k(k)).unwrap_or_default())
            .collect();
        let avg = |i: usize, js: &[usize]| js.iter().map(|&j| dice_sets(&tops[i], &tops[j]).unwrap()).sum::<f64>() / js.len() as f64;
        let terms: Vec<Option<(usize, f64, f64)>> = (0..ids.len())
            .into_par_iter()
            .map(|i| neighbours[i].as_ref().map(|(s, d)| (label(i), avg(i, s), avg(i, d))))
            .collect();
        let flat: Vec<(usize, f64, f64)> = terms.iter().flatten().copied().collect();
        breakdowns.push(RobustnessBreakdown::from_terms(k, &flat));
        points.push(point(
            k,
            ids.iter().cloned().zip(terms.iter().map(|t| t.map(|(_, s, d)| s - d))).collect(),
        ));
    }
    Ok(RobustnessReport {
        series: MetricSeries {
            metric: MetricKind::Robustness,
            points,
        },
        breakdowns,
    })
}

/// Contradict the top-`min(k, |e|)` explanation features of `x`: weighted
/// features are flipped, `equals_one` predicates become 0 and `equals_zero`
/// predicates become 1.
pub fn mutate(x: &FeatureVector, e: &Explanation, k: usize) -> FeatureVector {
    let mut out = x.clone();
    for it in e.items.iter().take(k) {
        match it.constraint {
            Constraint::Weighted => out.flip(it.feature),
            Constraint::EqualsOne => out.set(it.feature, false),
            Constraint::EqualsZero => out.set(it.feature, true),
        }
    }
    out
}

/// A sample to score: id and feature vector.
pub type Sample<'a> = (&'a str, &'a FeatureVector);

fn check_model<M: BlackBox + ?Sized>(model: &M, samples: &[Sample<'_>], explanations: &ExplanationSet) -> Result<()> {
    for (id, x) in samples {
        if x.len() != model.n_features() {
            return Err(Error::Dimension {
                expected: model.n_features(),
                got: x.len(),
            });
        }
        if let Some(e) = explanations.get(*id) {
            if e.model_id != model.model_id() {
                return Err(Error::Mismatch(format!(
                    "explanation of sample {id} was produced by model {}, not {}",
                    e.model_id,
                    model.model_id()
                )));
            }
        }
    }
    Ok(())
}

fn canonical_samples<'a>(samples: &[Sample<'a>]) -> Vec<Sample<'a>> {
    let mut v = samples.to_vec();
    v.sort_by(|a, b| a.0.cmp(b.0));
    v.dedup_by(|a, b| a.0 == b.0);
    v
}

/// Fraction of samples whose prediction changes after [`mutate`].
pub fn effectiveness<M: BlackBox + ?Sized>(
    model: &M,
    samples: &[Sample<'_>],
    explanations: &ExplanationSet,
    ks: &[usize],
) -> Result<MetricSeries> {
    check_ks(ks)?;
    check_model(model, samples, explanations)?;
    let samples = canonical_samples(samples);
    let base: Vec<usize> = samples.par_iter().map(|(_, x)| model.predict_bits(x.bits())).collect();
    let points = ks
        .iter()
        .map(|&k| {
            let terms = samples
                .par_iter()
                .zip(&base)
                .map(|((id, x), &before)| {
                    let v = usable(explanations.get(*id)).map(|e| {
                        let after = model.predict_bits(mutate(x, e, k).bits());
                        f64::from(u8::from(after != before))
                    });
                    (id.to_string(), v)
                })
                .collect();
            point(k, terms)
        })
        .collect();
    Ok(MetricSeries {
        metric: MetricKind::Effectiveness,
        points,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectiveFeature {
    pub feature: usize,
    /// Share of scored samples whose effective set contains the feature.
    pub weight: f64,
    pub count: usize,
}

/// Features that take part in flipping predictions. For each sample the
/// top-k items are contradicted one at a time; the shortest prefix that
/// changes the prediction is that sample's effective set (empty if none
/// does). Weights are shares of scored samples, highest first.
pub fn effective_features<M: BlackBox + ?Sized>(
    model: &M,
    samples: &[Sample<'_>],
    explanations: &ExplanationSet,
    k: usize,
) -> Result<(Vec<EffectiveFeature>, usize)> {
    check_ks(&[k])?;
    check_model(model, samples, explanations)?;
    let samples = canonical_samples(samples);
    let sets: Vec<Option<Vec<usize>>> = samples
        .par_iter()
        .map(|(id, x)| {
            let e = usable(explanations.get(*id))?;
            let before = model.predict_bits(x.bits());
            let top = e.items.len().min(k);
            let hit = (1..=top).find(|&j| model.predict_bits(mutate(x, e, j).bits()) != before);
            Some(hit.map(|j| e.top_k(j)).unwrap_or_default())
        })
        .collect();
    let scored = sets.iter().flatten().count();
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for f in sets.iter().flatten().flatten() {
        *counts.entry(*f).or_insert(0) += 1;
    }
    let mut out: Vec<EffectiveFeature> = counts
        .into_iter()
        .map(|(feature, count)| EffectiveFeature {
            feature,
            weight: count as f64 / scored.max(1) as f64,
            count,
        })
        .collect();
    out.sort_by(|a, b| b.count.cmp(&a.count).then(a.feature.cmp(&b.feature)));
    Ok((out, scored))
}
