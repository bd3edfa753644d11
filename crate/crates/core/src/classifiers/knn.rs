use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::util::argmax;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    Uniform,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KnnParams {
    pub neighbor_count: usize,
    pub weighting: Weighting,
}

impl Default for KnnParams {
    fn default() -> Self {
        Self {
            neighbor_count: 10,
            weighting: Weighting::Uniform,
        }
    }
}

/// Stored training set, compared by Hamming distance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    neighbor_count: usize,
    n_features: usize,
    n_classes: usize,
    /// Bits packed into 64-bit words, one row per training sample.
    packed: Vec<Vec<u64>>,
    labels: Vec<usize>,
}

fn pack(bits: &[u8]) -> Vec<u64> {
    let mut words = vec![0u64; bits.len().div_ceil(64)];
    for (i, &b) in bits.iter().enumerate() {
        if b == 1 {
            words[i / 64] |= 1 << (i % 64);
        }
    }
    words
}

impl KnnModel {
    /// Uniform vote fractions over the `k` nearest training samples.
    /// Equidistant candidates are taken in training order.
    pub fn votes(&self, bits: &[u8]) -> Vec<f64> {
        let q = pack(bits);
        let dists: Vec<u32> = self
            .packed
            .iter()
            .map(|row| row.iter().zip(&q).map(|(a, b)| (a ^ b).count_ones()).sum())
            .collect();
        let k = self.neighbor_count.min(self.labels.len());
        // counting selection: distances are bounded by d
        let mut hist = vec![0usize; self.n_features + 1];
        dists.iter().for_each(|&d| hist[d as usize] += 1);
        let mut cutoff = 0;
        let mut below = 0;
        while below + hist[cutoff] < k {
            below += hist[cutoff];
            cutoff += 1;
        }
        let mut at_cutoff = k - below;
        let mut votes = vec![0.0; self.n_classes];
        for (i, &d) in dists.iter().enumerate() {
            let d = d as usize;
            if d < cutoff {
                votes[self.labels[i]] += 1.0;
            } else if d == cutoff && at_cutoff > 0 {
                votes[self.labels[i]] += 1.0;
                at_cutoff -= 1;
            }
        }
        votes.iter_mut().for_each(|v| *v /= k as f64);
        votes
    }

    /// Majority class; vote ties go to the smallest class index.
    pub fn predict(&self, bits: &[u8]) -> usize {
        argmax(&self.votes(bits))
    }
}

pub(crate) fn fit_knn(ds: &LabeledDataset, train: &[usize], p: &KnnParams) -> KnnModel {
    KnnModel {
        neighbor_count: p.neighbor_count,
        n_features: ds.n_features(),
        n_classes: ds.n_classes(),
        packed: train.iter().map(|&i| pack(ds.sample(i).bits())).collect(),
        labels: train.iter().map(|&i| ds.label(i)).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn packing_spans_words() {
        let mut bits = vec![0u8; 130];
        bits[0] = 1;
        bits[64] = 1;
        bits[129] = 1;
        let p = pack(&bits);
        assert_eq!(p.len(), 3);
        assert_eq!(p.iter().map(|w| w.count_ones()).sum::<u32>(), 3);
    }

    #[test]
    fn equidistant_neighbours_taken_in_training_order() {
        let m = KnnModel {
            neighbor_count: 2,
            n_features: 2,
            n_classes: 2,
            packed: vec![pack(&[1, 0]), pack(&[0, 1]), pack(&[1, 1])],
            labels: vec![1, 0, 0],
        };
        // [0,0] is at distance 1 from rows 0 and 1, distance 2 from row 2
        assert_eq!(m.votes(&[0, 0]), vec![0.5, 0.5]);
        assert_eq!(m.predict(&[0, 0]), 0);
        assert_eq!(m.predict(&[1, 1]), 0);
    }
}
