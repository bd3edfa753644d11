use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::LabeledDataset;
use crate::util::rng;
use crate::{Error, Result};

/// Disjoint train/test partition of dataset indices. Both sides are sorted.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    train: Vec<usize>,
    test: Vec<usize>,
}

impl Split {
    pub fn new(mut train: Vec<usize>, mut test: Vec<usize>, n: usize) -> Result<Self> {
        train.sort_unstable();
        test.sort_unstable();
        if train.is_empty() {
            return Err(Error::InvalidInput("split has an empty training side".into()));
        }
        if train.windows(2).any(|w| w[0] == w[1]) || test.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidInput("split repeats an index".into()));
        }
        if train.iter().chain(&test).any(|&i| i >= n) {
            return Err(Error::InvalidInput(format!("split index out of range for {n} samples")));
        }
        let (mut a, mut b) = (0, 0);
        while a < train.len() && b < test.len() {
            match train[a].cmp(&test[b]) {
                std::cmp::Ordering::Equal => {
                    return Err(Error::InvalidInput(format!("index {} is in both train and test", train[a])))
                }
                std::cmp::Ordering::Less => a += 1,
                std::cmp::Ordering::Greater => b += 1,
            }
        }
        Ok(Self { train, test })
    }

    pub fn train(&self) -> &[usize] {
        &self.train
    }

    pub fn test(&self) -> &[usize] {
        &self.test
    }
}

/// Half of every class goes to training. Odd classes put the extra sample in
/// test; a singleton class goes to training.
pub fn split_per_class(ds: &LabeledDataset, seed: u64) -> Result<Split> {
    if ds.is_empty() {
        return Err(Error::InvalidInput("cannot split an empty dataset".into()));
    }
    let mut rng = rng(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for mut group in ds.class_indices() {
        if group.is_empty() {
            continue;
        }
        group.shuffle(&mut rng);
        let n_train = if group.len() == 1 { 1 } else { group.len() / 2 };
        train.extend_from_slice(&group[..n_train]);
        test.extend_from_slice(&group[n_train..]);
    }
    Split::new(train, test, ds.len())
}

/// Unstratified Bernoulli split: each sample goes to training with
/// probability `train_fraction`.
pub fn split_random(ds: &LabeledDataset, train_fraction: f64, seed: u64) -> Result<Split> {
    if ds.is_empty() {
        return Err(Error::InvalidInput("cannot split an empty dataset".into()));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidInput(format!("train_fraction {train_fraction} outside (0,1)")));
    }
    let mut rng = rng(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for i in 0..ds.len() {
        if rng.gen_bool(train_fraction) {
            train.push(i);
        } else {
            test.push(i);
        }
    }
    if train.is_empty() || test.is_empty() {
        return Err(Error::InvalidInput(format!(
            "degenerate split: {} train / {} test samples",
            train.len(),
            test.len()
        )));
    }
    Split::new(train, test, ds.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{FeatureDictionary, FeatureVector};

    fn dataset_with_class_sizes(sizes: &[usize]) -> LabeledDataset {
        let dict = FeatureDictionary::synthetic(vec!["f0".into()]).unwrap();
        let mut samples = Vec::new();
        let mut labels = Vec::new();
        let mut ids = Vec::new();
        for (c, &n) in sizes.iter().enumerate() {
            for _ in 0..n {
                ids.push(format!("s{}", ids.len()));
                samples.push(FeatureVector::zeros(1));
                labels.push(c);
            }
        }
        let names = (0..sizes.len()).map(|c| format!("class_{c}")).collect();
        LabeledDataset::new(dict, samples, labels, names, ids).unwrap()
    }

    fn count(split: &Split, ds: &LabeledDataset, class: usize) -> (usize, usize) {
        let tr = split.train().iter().filter(|&&i| ds.label(i) == class).count();
        let te = split.test().iter().filter(|&&i| ds.label(i) == class).count();
        (tr, te)
    }

    #[test]
    fn per_class_rounding() {
        let ds = dataset_with_class_sizes(&[5, 1, 4]);
        let split = split_per_class(&ds, 3).unwrap();
        assert_eq!(count(&split, &ds, 0), (2, 3));
        assert_eq!(count(&split, &ds, 1), (1, 0));
        assert_eq!(count(&split, &ds, 2), (2, 2));
        assert_eq!(split, split_per_class(&ds, 3).unwrap());
    }

    #[test]
    fn random_split_is_deterministic_and_rejects_degenerate() {
        let ds = dataset_with_class_sizes(&[50, 50]);
        assert_eq!(split_random(&ds, 0.5, 9).unwrap(), split_random(&ds, 0.5, 9).unwrap());
        let tiny = dataset_with_class_sizes(&[1, 1]);
        assert!(split_random(&tiny, 0.999, 1).is_err());
        assert!(split_random(&ds, 1.0, 1).is_err());
    }

    #[test]
    fn random_split_fraction_within_binomial_bound() {
        let ds = dataset_with_class_sizes(&[5_000, 5_000]);
        let split = split_random(&ds, 0.5, 42).unwrap();
        let sigma = (10_000.0f64 * 0.25).sqrt();
        assert!((split.train().len() as f64 - 5_000.0).abs() <= 3.0 * sigma);
        assert_eq!(split.train().len() + split.test().len(), 10_000);
    }

    #[test]
    fn split_new_rejects_overlap() {
        assert!(Split::new(vec![0, 1], vec![1], 3).is_err());
        assert!(Split::new(vec![], vec![1], 3).is_err());
        assert!(Split::new(vec![5], vec![], 3).is_err());
    }
}
