use std::collections::HashSet;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::perturb::flip_bits;
use super::{check_input, finish, Constraint, Explanation, ExplainerKind, ExplanationFlag, ExplanationItem};
use crate::classifiers::BlackBox;
use crate::dataset::FeatureVector;
use crate::util::{rng, Rng};
use crate::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnchorParams {
    /// Required precision `pi` of the returned rule.
    pub precision_threshold: f64,
    /// Confidence parameter of the Hoeffding lower bound.
    pub delta: f64,
    pub beam_width: usize,
    /// Perturbations drawn per candidate evaluation round.
    pub batch_size: usize,
    /// Cap on perturbations spent on one candidate.
    pub max_samples: usize,
    pub coverage_samples: usize,
    /// Probability of flipping each bit not fixed by the rule; 0.5 draws
    /// free bits uniformly.
    pub flip_prob: f64,
    pub max_anchor_size: usize,
}

impl Default for AnchorParams {
    fn default() -> Self {
        Self {
            precision_threshold: 0.95,
            delta: 0.05,
            beam_width: 2,
            batch_size: 100,
            max_samples: 2000,
            coverage_samples: 10_000,
            flip_prob: 0.5,
            max_anchor_size: 10,
        }
    }
}

impl AnchorParams {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.precision_threshold > 0.0 && self.precision_threshold < 1.0) {
            v.push(format!("anchor.precision_threshold must be in (0, 1), got {}", self.precision_threshold));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            v.push(format!("anchor.delta must be in (0, 1), got {}", self.delta));
        }
        if self.beam_width == 0 {
            v.push("anchor.beam_width must be >= 1".into());
        }
        if self.batch_size == 0 {
            v.push("anchor.batch_size must be >= 1".into());
        }
        if self.max_samples < self.batch_size {
            v.push(format!(
                "anchor.max_samples ({}) must be >= anchor.batch_size ({})",
                self.max_samples, self.batch_size
            ));
        }
        if self.coverage_samples == 0 {
            v.push("anchor.coverage_samples must be >= 1".into());
        }
        if !(self.flip_prob > 0.0 && self.flip_prob < 1.0) {
            v.push(format!("anchor.flip_prob must be in (0, 1), got {}", self.flip_prob));
        }
        if self.max_anchor_size == 0 {
            v.push("anchor.max_anchor_size must be >= 1".into());
        }
        v
    }
}

/// Half-width of the Hoeffding interval after `n` Bernoulli draws.
pub(crate) fn hoeffding_eps(n: usize, delta: f64) -> f64 {
    ((1.0 / delta).ln() / (2.0 * n as f64)).sqrt()
}

#[derive(Clone)]
struct Candidate {
    /// Features in the order they were added.
    rule: Vec<usize>,
    n: usize,
    hits: usize,
    coverage: f64,
}

impl Candidate {
    fn mean(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.hits as f64 / self.n as f64
        }
    }
}

struct Search<'a, M: ?Sized> {
    model: &'a M,
    x: &'a [u8],
    pred: usize,
    params: &'a AnchorParams,
    rng: Rng,
    /// `agree[f]`: bitset over the coverage pool of draws with `f` equal to x.
    agree: Vec<Vec<u64>>,
    pool_size: usize,
}

impl<M: BlackBox + ?Sized> Search<'_, M> {
    fn sample(&mut self, c: &mut Candidate) {
        for _ in 0..self.params.batch_size {
            let mut z = flip_bits(self.x, self.params.flip_prob, &mut self.rng);
            for &f in &c.rule {
                z[f] = self.x[f];
            }
            c.hits += usize::from(self.model.predict_bits(&z) == self.pred);
            c.n += 1;
        }
    }

    fn coverage(&self, rule: &[usize]) -> f64 {
        if rule.is_empty() {
            return 1.0;
        }
        let words = self.agree[0].len();
        let mut count = 0u32;
        for w in 0..words {
            let mut acc = u64::MAX;
            for &f in rule {
                acc &= self.agree[f][w];
            }
            count += acc.count_ones();
        }
        f64::from(count) / self.pool_size as f64
    }

    fn bounds(&self, c: &Candidate) -> (f64, f64) {
        let eps = hoeffding_eps(c.n, self.params.delta);
        (c.mean() - eps, c.mean() + eps)
    }

    fn undecided(&self, c: &Candidate) -> bool {
        let (lb, ub) = self.bounds(c);
        let pi = self.params.precision_threshold;
        lb < pi && ub >= pi && c.n < self.params.max_samples
    }

    fn accepted(&self, c: &Candidate) -> bool {
        self.bounds(c).0 >= self.params.precision_threshold
    }

    /// Spend extra samples on the leading candidates until none of them is
    /// still undecided.
    fn refine(&mut self, cands: &mut [Candidate]) {
        let lead = 2 * self.params.beam_width;
        loop {
            let order = ranking(cands);
            let todo: Vec<usize> = order.into_iter().take(lead).filter(|&i| self.undecided(&cands[i])).collect();
            if todo.is_empty() {
                return;
            }
            for i in todo {
                self.sample(&mut cands[i]);
            }
        }
    }
}

/// Candidate indices by precision, then coverage, then creation order.
fn ranking(cands: &[Candidate]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..cands.len()).collect();
    order.sort_by(|&a, &b| {
        cands[b]
            .mean()
            .partial_cmp(&cands[a].mean())
            .unwrap()
            .then(cands[b].coverage.partial_cmp(&cands[a].coverage).unwrap())
            .then(a.cmp(&b))
    });
    order
}

fn to_explanation<M: BlackBox + ?Sized>(s: &Search<'_, M>, mut e: Explanation, rule: &[usize]) -> Explanation {
    let mut prev = 1.0;
    for (i, &f) in rule.iter().enumerate() {
        let cov = s.coverage(&rule[..=i]);
        e.items.push(ExplanationItem {
            feature: f,
            constraint: Constraint::equals(s.x[f]),
            weight: (prev - cov).max(0.0),
        });
        prev = cov;
    }
    e
}

/// Beam search for a high-precision conjunction of the sample's own feature
/// values, accepted once a Hoeffding lower bound on its precision reaches
/// the threshold; among accepted rules the widest coverage wins.
pub fn explain_anchor<M: BlackBox + ?Sized>(model: &M, x: &FeatureVector, params: &AnchorParams, seed: u64) -> Result<Explanation> {
    let start = Instant::now();
    super::config_error(params.violations())?;
    check_input(model, x)?;
    let d = x.len();
    let pred = model.predict_bits(x.bits());
    let e = Explanation::new(ExplainerKind::Anchor, model, pred);

    let mut r = rng(seed);
    let words = params.coverage_samples.div_ceil(64);
    let mut agree = vec![vec![0u64; words]; d];
    for j in 0..params.coverage_samples {
        let z = flip_bits(x.bits(), params.flip_prob, &mut r);
        for (f, row) in agree.iter_mut().enumerate() {
            if z[f] == x.get(f) {
                row[j / 64] |= 1 << (j % 64);
            }
        }
    }
    let mut s = Search {
        model,
        x: x.bits(),
        pred,
        params,
        rng: r,
        agree,
        pool_size: params.coverage_samples,
    };

    let mut root = vec![Candidate {
        rule: vec![],
        n: 0,
        hits: 0,
        coverage: 1.0,
    }];
    s.sample(&mut root[0]);
    s.refine(&mut root);
    if s.accepted(&root[0]) {
        return Ok(finish(e, start));
    }
    let mut best = root.pop().unwrap();
    let mut beam: Vec<Vec<usize>> = vec![vec![]];

    for _ in 0..params.max_anchor_size.min(d) {
        let mut seen = HashSet::new();
        let mut cands = Vec::new();
        for b in &beam {
            for f in 0..d {
                if b.contains(&f) {
                    continue;
                }
                let mut rule = b.clone();
                rule.push(f);
                let mut key = rule.clone();
                key.sort_unstable();
                if seen.insert(key) {
                    let coverage = s.coverage(&rule);
                    cands.push(Candidate {
                        rule,
                        n: 0,
                        hits: 0,
                        coverage,
                    });
                }
            }
        }
        if cands.is_empty() {
            break;
        }
        for c in cands.iter_mut() {
            s.sample(c);
        }
        s.refine(&mut cands);

        let order = ranking(&cands);
        let winner = order
            .iter()
            .copied()
            .filter(|&i| s.accepted(&cands[i]))
            .max_by(|&a, &b| {
                cands[a]
                    .coverage
                    .partial_cmp(&cands[b].coverage)
                    .unwrap()
                    .then(cands[a].mean().partial_cmp(&cands[b].mean()).unwrap())
                    .then(b.cmp(&a))
            });
        if let Some(w) = winner {
            let rule = cands[w].rule.clone();
            return Ok(finish(to_explanation(&s, e, &rule), start));
        }
        let top = order[0];
        if cands[top].mean() > best.mean() {
            best = cands[top].clone();
        }
        beam = order.iter().take(params.beam_width).map(|&i| cands[i].rule.clone()).collect();
    }

    let mut e = to_explanation(&s, e, &best.rule);
    e.flags.push(ExplanationFlag::NonAnchored);
    Ok(finish(e, start))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::FnModel;

    fn x_with(d: usize, ones: &[usize]) -> FeatureVector {
        FeatureVector::from_bools((0..d).map(|i| ones.contains(&i)))
    }

    #[test]
    fn single_rule_model_yields_that_predicate() {
        let m = FnModel::new(12, 2, "r2", |b| b[2] as usize);
        let x = x_with(12, &[2, 5, 7]);
        let e = explain_anchor(&m, &x, &AnchorParams::default(), 1).unwrap();
        assert_eq!(e.items.len(), 1);
        assert_eq!((e.items[0].feature, e.items[0].constraint), (2, Constraint::EqualsOne));
        assert!(e.flags.is_empty());
        assert!((e.items[0].weight - 0.5).abs() < 0.05);
    }

    #[test]
    fn conjunction_is_recovered_in_full() {
        let m = FnModel::new(10, 2, "and", |b| usize::from(b[3] == 1 && b[6] == 1));
        let x = x_with(10, &[3, 6, 8]);
        let e = explain_anchor(&m, &x, &AnchorParams::default(), 4).unwrap();
        let mut feats = e.top_k(10);
        feats.sort();
        assert_eq!(feats, vec![3, 6]);
        // the negative class is anchored by a single zero
        let neg = x_with(10, &[3]);
        let e = explain_anchor(&m, &neg, &AnchorParams::default(), 4).unwrap();
        assert_eq!(e.items.len(), 1);
        assert_eq!((e.items[0].feature, e.items[0].constraint), (6, Constraint::EqualsZero));
    }

    #[test]
    fn vacuous_threshold_accepts_the_empty_rule() {
        let m = FnModel::new(6, 2, "r", |b| b[0] as usize);
        let params = AnchorParams {
            precision_threshold: 1e-9,
            ..AnchorParams::default()
        };
        let e = explain_anchor(&m, &x_with(6, &[0]), &params, 0).unwrap();
        assert!(e.is_empty() && e.flags.is_empty());
    }

    #[test]
    fn unreachable_precision_is_flagged() {
        // parity of six bits cannot be pinned by fewer than six predicates
        let m = FnModel::new(6, 2, "parity", |b| b.iter().map(|&v| v as usize).sum::<usize>() % 2);
        let params = AnchorParams {
            max_anchor_size: 3,
            ..AnchorParams::default()
        };
        let e = explain_anchor(&m, &x_with(6, &[1]), &params, 2).unwrap();
        assert!(e.has_flag(ExplanationFlag::NonAnchored));
        assert!(e.validate(6).is_ok());
    }

    #[test]
    fn returned_anchor_holds_on_fresh_perturbations() {
        let m = FnModel::new(16, 2, "m", |b| usize::from(b[1] == 1 && (b[4] == 1 || b[9] == 0)));
        let x = x_with(16, &[1, 4, 11]);
        let params = AnchorParams::default();
        let e = explain_anchor(&m, &x, &params, 8).unwrap();
        assert!(e.flags.is_empty());
        let pred = m.predict_bits(x.bits());
        let mut r = rng(999);
        let n = 10_000;
        let mut hits = 0;
        for _ in 0..n {
            let mut z = flip_bits(x.bits(), params.flip_prob, &mut r);
            for it in &e.items {
                z[it.feature] = x.get(it.feature);
            }
            hits += usize::from(m.predict_bits(&z) == pred);
        }
        let precision = hits as f64 / n as f64;
        let slack = hoeffding_eps(n, params.delta);
        assert!(precision >= params.precision_threshold - slack, "{precision}");
    }
}
