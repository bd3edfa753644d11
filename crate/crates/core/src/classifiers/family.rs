use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{train, Algorithm, ClassifierModel, Hyperparams, TrainConfig};
use crate::dataset::{LabeledDataset, Split};
use crate::{Error, Result};

/// Which hyperparameter is varied across a similar-model family.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variation {
    RfTreeCounts(Vec<usize>),
    Seeds(Vec<u64>),
    KnnNeighbors(Vec<usize>),
    MlpIterations(Vec<usize>),
}

impl Variation {
    pub fn len(&self) -> usize {
        match self {
            Variation::RfTreeCounts(v) | Variation::KnnNeighbors(v) | Variation::MlpIterations(v) => v.len(),
            Variation::Seeds(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn describe(&self) -> String {
        match self {
            Variation::RfTreeCounts(v) => format!("rf_tree_counts={v:?}"),
            Variation::Seeds(v) => format!("seeds={v:?}"),
            Variation::KnnNeighbors(v) => format!("knn_neighbors={v:?}"),
            Variation::MlpIterations(v) => format!("mlp_iterations={v:?}"),
        }
    }

    /// Short label of member `i`, e.g. `trees=98`.
    pub fn member_label(&self, i: usize) -> String {
        match self {
            Variation::RfTreeCounts(v) => format!("trees={}", v[i]),
            Variation::Seeds(v) => format!("seed={}", v[i]),
            Variation::KnnNeighbors(v) => format!("k={}", v[i]),
            Variation::MlpIterations(v) => format!("iterations={}", v[i]),
        }
    }

    /// Configuration of member `i`: `base` with one field replaced.
    pub fn member_config(&self, base: &TrainConfig, i: usize) -> Result<TrainConfig> {
        let mut cfg = base.clone();
        match (self, &mut cfg.hyperparams) {
            (Variation::RfTreeCounts(v), Hyperparams::RandomForest(p)) => p.tree_count = v[i],
            (Variation::KnnNeighbors(v), Hyperparams::Knn(p)) => p.neighbor_count = v[i],
            (Variation::MlpIterations(v), Hyperparams::Mlp(p)) => p.max_iterations = v[i],
            (Variation::Seeds(v), _) => cfg.seed = v[i],
            (var, _) => {
                return Err(Error::InvalidInput(format!(
                    "variation {} does not apply to algorithm {}",
                    var.describe(),
                    base.algorithm()
                )))
            }
        }
        Ok(cfg)
    }

    /// Member whose varied value equals the base configuration's own value,
    /// e.g. the 100-tree forest of `[98, 99, 100, 101]`.
    pub fn matching_member(&self, base: &TrainConfig) -> Option<usize> {
        match (self, &base.hyperparams) {
            (Variation::RfTreeCounts(v), Hyperparams::RandomForest(p)) => v.iter().position(|&t| t == p.tree_count),
            (Variation::KnnNeighbors(v), Hyperparams::Knn(p)) => v.iter().position(|&k| k == p.neighbor_count),
            (Variation::MlpIterations(v), Hyperparams::Mlp(p)) => v.iter().position(|&k| k == p.max_iterations),
            (Variation::Seeds(v), _) => v.iter().position(|&s| s == base.seed),
            _ => None,
        }
    }
}

/// `alpha >= 2` near-identical models sharing algorithm and dictionary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarModelFamily {
    pub models: Vec<ClassifierModel>,
    pub variation: Variation,
}

impl SimilarModelFamily {
    pub fn alpha(&self) -> usize {
        self.models.len()
    }

    pub fn algorithm(&self) -> Algorithm {
        self.models[0].algorithm()
    }
}

/// Train one model per variation value, everything else held fixed.
/// Members train in parallel; each is deterministic on its own.
pub fn train_similar_family(
    ds: &LabeledDataset,
    split: &Split,
    cfg: &TrainConfig,
    variation: &Variation,
) -> Result<SimilarModelFamily> {
    if variation.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "a similar-model family needs at least 2 members, got {}",
            variation.len()
        )));
    }
    let configs = (0..variation.len())
        .map(|i| variation.member_config(cfg, i))
        .collect::<Result<Vec<_>>>()?;
    let models = configs
        .par_iter()
        .map(|c| train(ds, split, c))
        .collect::<Result<Vec<_>>>()?;
    Ok(SimilarModelFamily {
        models,
        variation: variation.clone(),
    })
}
