//! Black-box classifiers explained by the interpreters: random forest,
//! k-nearest neighbours and a multilayer perceptron, plus evaluation,
//! similar-model families and information-gain feature ranking.

mod evaluate;
mod family;
mod forest;
mod info_gain;
mod knn;
mod mlp;
mod oracle;
mod persist;

use serde::{Deserialize, Serialize};

use crate::dataset::{FeatureVector, LabeledDataset, Split};
use crate::util::sha256_hex;
use crate::{Error, Result};

pub use evaluate::{evaluate, evaluate_indices, ClassPerformance, PerformanceReport};
pub use family::{train_similar_family, SimilarModelFamily, Variation};
pub use forest::{Forest, ForestParams, MaxFeatures, SplitCriterion};
pub use info_gain::{entropy, information_gain, information_gain_ranking};
pub use knn::{KnnModel, KnnParams, Weighting};
pub use mlp::{Activation, MlpModel, MlpParams};
pub use oracle::{FnModel, ScoreFnModel};
pub use persist::{load_model, save_model, MODEL_FORMAT_VERSION, MODEL_MAGIC};

/// Anything an interpreter can query: a total, deterministic map from bit
/// vectors to class indices, optionally with per-class scores.
pub trait BlackBox: Sync {
    fn n_features(&self) -> usize;
    fn n_classes(&self) -> usize;
    fn model_id(&self) -> &str;

    /// Predicted class. `bits.len()` must equal [`BlackBox::n_features`].
    fn predict_bits(&self, bits: &[u8]) -> usize;

    /// Per-class scores summing to 1 (vote fractions, probabilities), when
    /// the model exposes them.
    fn class_scores(&self, _bits: &[u8]) -> Option<Vec<f64>> {
        None
    }

    /// Numeric response for `class`: its score when available, otherwise
    /// the indicator of predicting it.
    fn score(&self, bits: &[u8], class: usize) -> f64 {
        match self.class_scores(bits) {
            Some(s) => s[class],
            None => f64::from(u8::from(self.predict_bits(bits) == class)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    RandomForest,
    Knn,
    Mlp,
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Algorithm::RandomForest => "random_forest",
            Algorithm::Knn => "knn",
            Algorithm::Mlp => "mlp",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "snake_case")]
pub enum Hyperparams {
    RandomForest(ForestParams),
    Knn(KnnParams),
    Mlp(MlpParams),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    #[serde(flatten)]
    pub hyperparams: Hyperparams,
    #[serde(default)]
    pub seed: u64,
}

impl TrainConfig {
    pub fn random_forest(tree_count: usize, seed: u64) -> Self {
        Self {
            hyperparams: Hyperparams::RandomForest(ForestParams {
                tree_count,
                ..ForestParams::default()
            }),
            seed,
        }
    }

    pub fn knn(neighbor_count: usize) -> Self {
        Self {
            hyperparams: Hyperparams::Knn(KnnParams {
                neighbor_count,
                ..KnnParams::default()
            }),
            seed: 0,
        }
    }

    pub fn mlp(params: MlpParams, seed: u64) -> Self {
        Self {
            hyperparams: Hyperparams::Mlp(params),
            seed,
        }
    }

    pub fn algorithm(&self) -> Algorithm {
        match self.hyperparams {
            Hyperparams::RandomForest(_) => Algorithm::RandomForest,
            Hyperparams::Knn(_) => Algorithm::Knn,
            Hyperparams::Mlp(_) => Algorithm::Mlp,
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        match &self.hyperparams {
            Hyperparams::RandomForest(p) => {
                if p.tree_count == 0 {
                    v.push("random_forest.tree_count must be >= 1".into());
                }
                if p.min_samples_leaf == 0 {
                    v.push("random_forest.min_samples_leaf must be >= 1".into());
                }
                if p.min_samples_split < 2 {
                    v.push("random_forest.min_samples_split must be >= 2".into());
                }
                if let MaxFeatures::Count(0) = p.max_features {
                    v.push("random_forest.max_features must be >= 1".into());
                }
            }
            Hyperparams::Knn(p) => {
                if p.neighbor_count == 0 {
                    v.push("knn.neighbor_count must be >= 1".into());
                }
            }
            Hyperparams::Mlp(p) => {
                if p.max_iterations == 0 {
                    v.push("mlp.max_iterations must be >= 1".into());
                }
                if p.batch_size == 0 {
                    v.push("mlp.batch_size must be >= 1".into());
                }
                if p.neurons_per_layer == 0 && p.hidden_layers > 0 {
                    v.push("mlp.neurons_per_layer must be >= 1".into());
                }
                if !(p.learning_rate > 0.0 && p.learning_rate.is_finite()) {
                    v.push("mlp.learning_rate must be a positive number".into());
                }
            }
        }
        v
    }

    /// Short human-readable tag, e.g. `random_forest(trees=100,seed=1)`.
    pub fn describe(&self) -> String {
        match &self.hyperparams {
            Hyperparams::RandomForest(p) => format!("random_forest(trees={},seed={})", p.tree_count, self.seed),
            Hyperparams::Knn(p) => format!("knn(k={})", p.neighbor_count),
            Hyperparams::Mlp(p) => format!(
                "mlp({}x{},iter={},seed={})",
                p.hidden_layers, p.neurons_per_layer, p.max_iterations, self.seed
            ),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Learned {
    RandomForest(Forest),
    Knn(KnnModel),
    Mlp(MlpModel),
}

/// A trained classifier `f`. Immutable once built; `model_id` is a content
/// hash of configuration and learned parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    config: TrainConfig,
    learned: Learned,
    dictionary_fingerprint: String,
    n_features: usize,
    n_classes: usize,
    model_id: String,
}

impl ClassifierModel {
    fn assemble(config: TrainConfig, learned: Learned, ds: &LabeledDataset) -> Result<Self> {
        let mut m = Self {
            config,
            learned,
            dictionary_fingerprint: ds.dictionary().fingerprint(),
            n_features: ds.n_features(),
            n_classes: ds.n_classes(),
            model_id: String::new(),
        };
        m.model_id = m.content_hash()?;
        Ok(m)
    }

    pub(crate) fn content_hash(&self) -> Result<String> {
        let body = serde_json::to_vec(&(
            &self.config,
            &self.learned,
            &self.dictionary_fingerprint,
            self.n_features,
            self.n_classes,
        ))?;
        Ok(sha256_hex(&body)[..32].to_string())
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn learned(&self) -> &Learned {
        &self.learned
    }

    pub fn algorithm(&self) -> Algorithm {
        self.config.algorithm()
    }

    pub fn dictionary_fingerprint(&self) -> &str {
        &self.dictionary_fingerprint
    }

    /// Error unless `ds` uses the dictionary this model was trained on.
    pub fn check_dataset(&self, ds: &LabeledDataset) -> Result<()> {
        let fp = ds.dictionary().fingerprint();
        if fp != self.dictionary_fingerprint {
            return Err(Error::Mismatch(format!(
                "model {} was trained on dictionary {}, dataset has {fp}",
                self.model_id, self.dictionary_fingerprint
            )));
        }
        Ok(())
    }

    /// Checked prediction.
    pub fn predict(&self, x: &FeatureVector) -> Result<usize> {
        if x.len() != self.n_features {
            return Err(Error::Dimension {
                expected: self.n_features,
                got: x.len(),
            });
        }
        Ok(self.predict_bits(x.bits()))
    }
}

impl BlackBox for ClassifierModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn predict_bits(&self, bits: &[u8]) -> usize {
        match &self.learned {
            Learned::RandomForest(f) => f.predict(bits),
            Learned::Knn(k) => k.predict(bits),
            Learned::Mlp(m) => m.predict(bits),
        }
    }

    fn class_scores(&self, bits: &[u8]) -> Option<Vec<f64>> {
        Some(match &self.learned {
            Learned::RandomForest(f) => f.votes(bits),
            Learned::Knn(k) => k.votes(bits),
            Learned::Mlp(m) => m.probabilities(bits),
        })
    }
}

/// Train one classifier on the training side of `split`. Deterministic in
/// `(ds, split, cfg)`.
pub fn train(ds: &LabeledDataset, split: &Split, cfg: &TrainConfig) -> Result<ClassifierModel> {
    let violations = cfg.violations();
    if !violations.is_empty() {
        return Err(Error::Config(violations));
    }
    if split.train().is_empty() {
        return Err(Error::InvalidInput("training side of the split is empty".into()));
    }
    if let Some(&bad) = split.train().iter().find(|&&i| i >= ds.len()) {
        return Err(Error::InvalidInput(format!("split index {bad} out of range")));
    }
    let distinct = {
        let mut seen = vec![false; ds.n_classes()];
        split.train().iter().for_each(|&i| seen[ds.label(i)] = true);
        seen.iter().filter(|s| **s).count()
    };
    let learned = match &cfg.hyperparams {
        Hyperparams::RandomForest(p) => {
            if distinct < 2 {
                return Err(Error::InvalidInput("random forest needs at least two classes in training data".into()));
            }
            Learned::RandomForest(forest::train_forest(ds, split.train(), p, cfg.seed))
        }
        Hyperparams::Knn(p) => Learned::Knn(knn::fit_knn(ds, split.train(), p)),
        Hyperparams::Mlp(p) => {
            if distinct < 2 {
                return Err(Error::InvalidInput("mlp needs at least two classes in training data".into()));
            }
            Learned::Mlp(mlp::train_mlp(ds, split.train(), p, cfg.seed))
        }
    };
    ClassifierModel::assemble(cfg.clone(), learned, ds)
}
