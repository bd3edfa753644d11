use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::util::{argmax, Rng};

/// Growth limits for [`cart_build`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeParams {
    /// `None` grows until purity.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub min_split: usize,
    /// Features drawn per split (random forest). `None` examines all.
    pub max_features: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: None,
            min_leaf: 1,
            min_split: 2,
            max_features: None,
        }
    }
}

/// Internal node tests one binary feature: `left` holds rows where the
/// feature is 0, `right` rows where it is 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split { feature: usize, left: usize, right: usize },
    Leaf { distribution: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    nodes: Vec<Node>,
    n_features: usize,
    n_classes: usize,
}

impl DecisionTree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    fn leaf_index(&self, bits: &[u8]) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split { feature, left, right } => {
                    i = if bits[*feature] == 1 { *right } else { *left };
                }
            }
        }
    }

    pub fn distribution(&self, bits: &[u8]) -> &[f64] {
        match &self.nodes[self.leaf_index(bits)] {
            Node::Leaf { distribution } => distribution,
            Node::Split { .. } => unreachable!(),
        }
    }

    pub fn predict(&self, bits: &[u8]) -> usize {
        argmax(self.distribution(bits))
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

fn gini(counts: &[f64], total: f64) -> f64 {
    if total <= 0.0 {
        return 0.0;
    }
    1.0 - counts.iter().map(|c| (c / total) * (c / total)).sum::<f64>()
}

struct Builder<'a, S> {
    samples: &'a [S],
    labels: &'a [usize],
    weights: &'a [f64],
    n_classes: usize,
    n_features: usize,
    params: &'a TreeParams,
    rng: Option<&'a mut Rng>,
    nodes: Vec<Node>,
}

const GAIN_TIE: f64 = 1e-12;

impl<S: AsRef<[u8]>> Builder<'_, S> {
    fn class_counts(&self, rows: &[usize]) -> Vec<f64> {
        let mut c = vec![0.0; self.n_classes];
        for &r in rows {
            c[self.labels[r]] += self.weights[r];
        }
        c
    }

    /// Best split among `features` (ascending order), as `(gain, feature)`.
    fn best_in(&self, rows: &[usize], features: &[usize], parent: &[f64], total: f64) -> Option<(f64, usize)> {
        let parent_gini = gini(parent, total);
        let mut best: Option<(f64, usize)> = None;
        let mut ones = vec![0.0; self.n_classes];
        for &f in features {
            ones.iter_mut().for_each(|v| *v = 0.0);
            let mut n_ones = 0usize;
            for &r in rows {
                if self.samples[r].as_ref()[f] == 1 {
                    ones[self.labels[r]] += self.weights[r];
                    n_ones += 1;
                }
            }
            let n_zeros = rows.len() - n_ones;
            if n_ones < self.params.min_leaf.max(1) || n_zeros < self.params.min_leaf.max(1) {
                continue;
            }
            let w_one: f64 = ones.iter().sum();
            let zeros: Vec<f64> = parent.iter().zip(&ones).map(|(p, o)| p - o).collect();
            let w_zero = total - w_one;
            let gain = parent_gini - (w_one / total) * gini(&ones, w_one) - (w_zero / total) * gini(&zeros, w_zero);
            if best.is_none_or(|(g, _)| gain > g + GAIN_TIE) {
                best = Some((gain, f));
            }
        }
        best
    }

    fn choose_split(&mut self, rows: &[usize], parent: &[f64], total: f64) -> Option<usize> {
        let d = self.n_features;
        match (self.params.max_features, self.rng.as_deref_mut()) {
            (Some(m), Some(rng)) if m < d => {
                let mut subset: Vec<usize> = sample(rng, d, m.max(1)).into_vec();
                subset.sort_unstable();
                if let Some((_, f)) = self.best_in(rows, &subset, parent, total) {
                    return Some(f);
                }
                // every drawn feature is constant here; fall back to the rest
                let rest: Vec<usize> = (0..d).filter(|f| subset.binary_search(f).is_err()).collect();
                self.best_in(rows, &rest, parent, total).map(|(_, f)| f)
            }
            _ => {
                let all: Vec<usize> = (0..d).collect();
                self.best_in(rows, &all, parent, total).map(|(_, f)| f)
            }
        }
    }

    fn leaf(&mut self, counts: Vec<f64>, total: f64) -> usize {
        let distribution = if total > 0.0 {
            counts.iter().map(|c| c / total).collect()
        } else {
            vec![1.0 / self.n_classes as f64; self.n_classes]
        };
        self.nodes.push(Node::Leaf { distribution });
        self.nodes.len() - 1
    }

    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let counts = self.class_counts(&rows);
        let total: f64 = counts.iter().sum();
        let pure = counts.iter().filter(|&&c| c > 0.0).count() <= 1;
        let depth_limited = self.params.max_depth.is_some_and(|m| depth >= m);
        if pure || depth_limited || rows.len() < self.params.min_split.max(2) || rows.len() < 2 * self.params.min_leaf.max(1) {
            return self.leaf(counts, total);
        }
        let Some(feature) = self.choose_split(&rows, &counts, total) else {
            return self.leaf(counts, total);
        };
        let (right_rows, left_rows): (Vec<usize>, Vec<usize>) =
            rows.into_iter().partition(|&r| self.samples[r].as_ref()[feature] == 1);
        let id = self.nodes.len();
        self.nodes.push(Node::Split {
            feature,
            left: 0,
            right: 0,
        });
        let left = self.grow(left_rows, depth + 1);
        let right = self.grow(right_rows, depth + 1);
        self.nodes[id] = Node::Split { feature, left, right };
        id
    }
}

/// Greedy CART on binary features with the gini criterion.
///
/// Rows with zero weight are ignored. Gain ties go to the lowest feature
/// index. Zero-gain splits are allowed while a node is impure, so
/// interactions such as XOR are still separated. `rng` is only used when
/// `params.max_features` restricts the candidate features.
///
/// # Panics
/// If no row has positive weight, or inputs have inconsistent lengths.
pub fn cart_build<S: AsRef<[u8]>>(
    samples: &[S],
    labels: &[usize],
    weights: &[f64],
    n_classes: usize,
    params: &TreeParams,
    rng: Option<&mut Rng>,
) -> DecisionTree {
    assert_eq!(samples.len(), labels.len());
    assert_eq!(samples.len(), weights.len());
    let rows: Vec<usize> = (0..samples.len()).filter(|&i| weights[i] > 0.0).collect();
    assert!(!rows.is_empty(), "cart_build needs at least one row with positive weight");
    let n_features = samples[rows[0]].as_ref().len();
    let n_classes = n_classes.max(labels.iter().copied().max().map_or(1, |m| m + 1));
    let mut b = Builder {
        samples,
        labels,
        weights,
        n_classes,
        n_features,
        params,
        rng,
        nodes: Vec::new(),
    };
    b.grow(rows, 0);
    DecisionTree {
        nodes: b.nodes,
        n_features,
        n_classes,
    }
}

/// The conjunction of split conditions met by `bits` on its root-to-leaf
/// path, as `(feature, bit)` in path order. A feature tested twice keeps only
/// its deepest condition.
pub fn cart_path_predicates(tree: &DecisionTree, bits: &[u8]) -> Vec<(usize, u8)> {
    let mut path: Vec<(usize, u8)> = Vec::new();
    let mut i = 0;
    while let Node::Split { feature, left, right } = &tree.nodes[i] {
        let bit = bits[*feature];
        path.retain(|&(f, _)| f != *feature);
        path.push((*feature, bit));
        i = if bit == 1 { *right } else { *left };
    }
    path
}
