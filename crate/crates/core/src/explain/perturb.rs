use rand::Rng as _;

use crate::classifiers::BlackBox;
use crate::dataset::FeatureVector;
use crate::util::{rng, Rng};
use crate::{Error, Result};

/// Neighbourhood of one sample. `labels` stays empty until
/// [`PerturbationSet::label_with`] runs a model over the vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct PerturbationSet {
    pub base_sample_id: String,
    pub vectors: Vec<FeatureVector>,
    pub labels: Vec<usize>,
}

impl PerturbationSet {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn label_with<M: BlackBox + ?Sized>(&mut self, model: &M) {
        self.labels = self.vectors.iter().map(|v| model.predict_bits(v.bits())).collect();
    }
}

pub(crate) fn flip_bits(x: &[u8], flip_prob: f64, rng: &mut Rng) -> Vec<u8> {
    x.iter().map(|&b| if rng.gen_bool(flip_prob) { 1 - b } else { b }).collect()
}

/// `t` vectors, each flipping every bit of `x` independently with
/// `flip_prob`. The original `x` is not added as a member, though a draw may
/// coincide with it.
pub fn perturb(x: &FeatureVector, t: usize, flip_prob: f64, seed: u64) -> Result<PerturbationSet> {
    if t == 0 {
        return Err(Error::InvalidInput("perturbation count must be at least 1".into()));
    }
    if !(flip_prob > 0.0 && flip_prob < 1.0) {
        return Err(Error::InvalidInput(format!("flip probability {flip_prob} outside (0, 1)")));
    }
    let mut r = rng(seed);
    let vectors = (0..t).map(|_| FeatureVector(flip_bits(x.bits(), flip_prob, &mut r))).collect();
    Ok(PerturbationSet {
        base_sample_id: String::new(),
        vectors,
        labels: Vec::new(),
    })
}
