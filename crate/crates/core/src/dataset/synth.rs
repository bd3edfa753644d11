use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{natural_cmp, FeatureDictionary, FeatureVector, LabeledDataset};
use crate::util::{rng, Rng};
use crate::{Error, Result};

/// A planted conjunction: `(feature index, required bit)` pairs.
pub type Conjunction = Vec<(usize, u8)>;

/// Planted-rule generator description. `rule_sets[c]` lists the conjunctions
/// that identify class `c`; at most one class may have none and acts as the
/// default class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub d: usize,
    pub n: usize,
    pub rule_sets: Vec<Vec<Conjunction>>,
    #[serde(default)]
    pub noise_rate: f64,
    #[serde(default)]
    pub seed: u64,
    /// Defaults to `benign`/`malicious` for two classes, `class_<c>` otherwise.
    #[serde(default)]
    pub label_names: Option<Vec<String>>,
}

impl SyntheticSpec {
    /// Two classes: class 1 iff every feature in `rule` is 1.
    pub fn single_rule(d: usize, n: usize, rule: &[usize], seed: u64) -> Self {
        Self {
            d,
            n,
            rule_sets: vec![vec![], vec![rule.iter().map(|&f| (f, 1)).collect()]],
            noise_rate: 0.0,
            seed,
            label_names: None,
        }
    }

    /// Every invariant violation, empty when the spec is valid.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.d == 0 {
            v.push("d must be at least 1".to_string());
        }
        if self.n == 0 {
            v.push("n must be at least 1".to_string());
        }
        if self.rule_sets.len() < 2 {
            v.push("rule_sets must describe at least two classes".to_string());
        }
        if !(0.0..0.5).contains(&self.noise_rate) {
            v.push(format!("noise_rate {} outside [0, 0.5)", self.noise_rate));
        }
        if self.rule_sets.iter().filter(|r| r.is_empty()).count() > 1 {
            v.push("at most one class may have an empty rule set".to_string());
        }
        for (c, rules) in self.rule_sets.iter().enumerate() {
            for (r, conj) in rules.iter().enumerate() {
                if conj.is_empty() {
                    v.push(format!("class {c} conjunction {r} is empty"));
                }
                for &(f, bit) in conj {
                    if f >= self.d {
                        v.push(format!("class {c} conjunction {r}: feature {f} >= d={}", self.d));
                    }
                    if bit > 1 {
                        v.push(format!("class {c} conjunction {r}: bit {bit} is not 0 or 1"));
                    }
                    if conj.iter().any(|&(g, b)| g == f && b != bit) && bit == 1 {
                        v.push(format!("class {c} conjunction {r}: feature {f} required both 0 and 1"));
                    }
                }
            }
        }
        if let Some(names) = &self.label_names {
            if names.len() != self.rule_sets.len() {
                v.push(format!(
                    "{} label names for {} classes",
                    names.len(),
                    self.rule_sets.len()
                ));
            }
            if names.windows(2).any(|w| natural_cmp(&w[0], &w[1]) != std::cmp::Ordering::Less) {
                v.push("label_names must be distinct and in natural order".to_string());
            }
        }
        v
    }

    fn label_names_or_default(&self) -> Vec<String> {
        match &self.label_names {
            Some(n) => n.clone(),
            None if self.rule_sets.len() == 2 => vec!["benign".into(), "malicious".into()],
            None => (0..self.rule_sets.len()).map(|c| format!("class_{c}")).collect(),
        }
    }
}

fn satisfies(bits: &[u8], conj: &Conjunction) -> bool {
    conj.iter().all(|&(f, b)| bits[f] == b)
}

const REPAIR_ATTEMPTS: usize = 256;

/// Draw one sample of class `class`: uniform bits, one of the class's
/// conjunctions planted, every other class's conjunctions broken.
fn draw_sample(spec: &SyntheticSpec, class: usize, rng: &mut Rng) -> Result<Vec<u8>> {
    let own = &spec.rule_sets[class];
    for _ in 0..REPAIR_ATTEMPTS {
        let mut bits: Vec<u8> = (0..spec.d).map(|_| u8::from(rng.gen_bool(0.5))).collect();
        let planted: &[(usize, u8)] = if own.is_empty() {
            &[]
        } else {
            own.choose(rng).unwrap()
        };
        for &(f, b) in planted {
            bits[f] = b;
        }
        let mut ok = false;
        for _ in 0..REPAIR_ATTEMPTS {
            let violated = spec
                .rule_sets
                .iter()
                .enumerate()
                .filter(|&(c, _)| c != class)
                .flat_map(|(_, rules)| rules.iter())
                .find(|conj| satisfies(&bits, conj));
            let Some(conj) = violated else {
                ok = true;
                break;
            };
            let free: Vec<usize> = conj
                .iter()
                .map(|&(f, _)| f)
                .filter(|f| !planted.iter().any(|&(g, _)| g == *f))
                .collect();
            let Some(&f) = free.choose(rng) else { break };
            bits[f] ^= 1;
        }
        if ok {
            return Ok(bits);
        }
    }
    Err(Error::InvalidInput(format!(
        "cannot draw a sample that satisfies class {class} rules without satisfying another class"
    )))
}

/// Generate a planted-rule dataset. Deterministic per `spec.seed`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<LabeledDataset> {
    let violations = spec.violations();
    if !violations.is_empty() {
        return Err(Error::Config(violations));
    }
    let n_classes = spec.rule_sets.len();
    let mut rng = rng(spec.seed);
    let mut samples = Vec::with_capacity(spec.n);
    let mut labels = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let class = rng.gen_range(0..n_classes);
        let bits = draw_sample(spec, class, &mut rng)?;
        let mut label = class;
        if spec.noise_rate > 0.0 && rng.gen_bool(spec.noise_rate) {
            let other = rng.gen_range(0..n_classes - 1);
            label = if other >= class { other + 1 } else { other };
        }
        samples.push(FeatureVector(bits));
        labels.push(label);
    }
    let names = (0..spec.d).map(|i| format!("f{i}")).collect();
    let dictionary = FeatureDictionary::synthetic(names)?;
    let ids = (0..spec.n).map(|i| format!("s{i:06}")).collect();
    LabeledDataset::new(dictionary, samples, labels, spec.label_names_or_default(), ids)
}
