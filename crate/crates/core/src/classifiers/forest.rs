use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::solvers::{cart_build, DecisionTree, TreeParams};
use crate::util::{argmax, rng_stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitCriterion {
    Gini,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    Sqrt,
    All,
    Count(usize),
}

impl MaxFeatures {
    fn resolve(self, d: usize) -> usize {
        match self {
            MaxFeatures::Sqrt => ((d as f64).sqrt().floor() as usize).max(1),
            MaxFeatures::All => d,
            MaxFeatures::Count(n) => n.clamp(1, d),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub tree_count: usize,
    pub split_criterion: SplitCriterion,
    pub min_samples_leaf: usize,
    pub min_samples_split: usize,
    pub max_depth: Option<usize>,
    pub max_features: MaxFeatures,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            tree_count: 100,
            split_criterion: SplitCriterion::Gini,
            min_samples_leaf: 1,
            min_samples_split: 2,
            max_depth: None,
            max_features: MaxFeatures::Sqrt,
            bootstrap: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    trees: Vec<DecisionTree>,
    n_classes: usize,
}

impl Forest {
    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    /// Fraction of trees voting for each class.
    pub fn votes(&self, bits: &[u8]) -> Vec<f64> {
        let mut v = vec![0.0; self.n_classes];
        for t in &self.trees {
            v[t.predict(bits)] += 1.0;
        }
        let n = self.trees.len() as f64;
        v.iter_mut().for_each(|x| *x /= n);
        v
    }

    /// Majority vote; ties go to the smallest class index.
    pub fn predict(&self, bits: &[u8]) -> usize {
        argmax(&self.votes(bits))
    }
}

/// Tree `t` draws from stream `t` of the seed, so a forest of `n` trees
/// shares its first `n - 1` trees with the forest of `n - 1` trees.
pub(crate) fn train_forest(ds: &LabeledDataset, train: &[usize], p: &ForestParams, seed: u64) -> Forest {
    let samples: Vec<&[u8]> = train.iter().map(|&i| ds.sample(i).bits()).collect();
    let labels: Vec<usize> = train.iter().map(|&i| ds.label(i)).collect();
    let tree_params = TreeParams {
        max_depth: p.max_depth,
        min_leaf: p.min_samples_leaf,
        min_split: p.min_samples_split,
        max_features: Some(p.max_features.resolve(ds.n_features())),
    };
    let n = samples.len();
    let trees = (0..p.tree_count)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_stream(seed, t as u64);
            let mut weights = vec![0.0; n];
            if p.bootstrap {
                for _ in 0..n {
                    weights[rng.gen_range(0..n)] += 1.0;
                }
            } else {
                weights.iter_mut().for_each(|w| *w = 1.0);
            }
            cart_build(&samples, &labels, &weights, ds.n_classes(), &tree_params, Some(&mut rng))
        })
        .collect();
    Forest {
        trees,
        n_classes: ds.n_classes(),
    }
}
