use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::util::{argmax, rng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    Logistic,
}

impl Activation {
    fn apply(self, z: &mut Array2<f64>) {
        match self {
            Activation::Relu => z.mapv_inplace(|v| v.max(0.0)),
            Activation::Tanh => z.mapv_inplace(f64::tanh),
            Activation::Logistic => z.mapv_inplace(|v| 1.0 / (1.0 + (-v).exp())),
        }
    }

    /// Derivative expressed through the activation output `a`.
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Relu => f64::from(u8::from(a > 0.0)),
            Activation::Tanh => 1.0 - a * a,
            Activation::Logistic => a * (1.0 - a),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpParams {
    pub hidden_layers: usize,
    pub neurons_per_layer: usize,
    pub activation: Activation,
    /// Training epochs.
    pub max_iterations: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl Default for MlpParams {
    fn default() -> Self {
        Self {
            hidden_layers: 3,
            neurons_per_layer: 128,
            activation: Activation::Relu,
            max_iterations: 200,
            batch_size: 200,
            learning_rate: 0.01,
        }
    }
}

/// Fully connected network with a softmax output layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    activation: Activation,
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
}

impl MlpModel {
    /// Activations of every layer; the last entry holds softmax probabilities.
    fn forward(&self, input: Array2<f64>) -> Vec<Array2<f64>> {
        let mut acts = vec![input];
        let last = self.weights.len() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = acts[l].dot(w) + b;
            if l < last {
                self.activation.apply(&mut z);
            } else {
                softmax_rows(&mut z);
            }
            acts.push(z);
        }
        acts
    }

    pub fn probabilities(&self, bits: &[u8]) -> Vec<f64> {
        let x = Array2::from_shape_fn((1, bits.len()), |(_, j)| f64::from(bits[j]));
        self.forward(x).pop().unwrap().row(0).to_vec()
    }

    pub fn predict(&self, bits: &[u8]) -> usize {
        argmax(&self.probabilities(bits))
    }
}

fn softmax_rows(z: &mut Array2<f64>) {
    for mut row in z.rows_mut() {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - m).exp());
        let s = row.sum();
        row /= s;
    }
}

/// Plain mini-batch gradient descent on softmax cross-entropy with Glorot
/// uniform initialisation. One iteration is one pass over the shuffled
/// training set.
pub(crate) fn train_mlp(ds: &LabeledDataset, train: &[usize], p: &MlpParams, seed: u64) -> MlpModel {
    let mut rng = rng(seed);
    let d = ds.n_features();
    let c = ds.n_classes();
    let mut sizes = vec![d];
    sizes.extend(std::iter::repeat_n(p.neurons_per_layer, p.hidden_layers));
    sizes.push(c);
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for w in sizes.windows(2) {
        let limit = (6.0 / (w[0] + w[1]) as f64).sqrt();
        weights.push(Array2::from_shape_fn((w[0], w[1]), |_| rng.gen_range(-limit..limit)));
        biases.push(Array1::from_shape_fn(w[1], |_| rng.gen_range(-limit..limit)));
    }
    let mut model = MlpModel {
        activation: p.activation,
        weights,
        biases,
    };

    let x_all = Array2::from_shape_fn((train.len(), d), |(i, j)| f64::from(ds.sample(train[i]).get(j)));
    let mut order: Vec<usize> = (0..train.len()).collect();
    let batch = p.batch_size.min(train.len());
    for _ in 0..p.max_iterations {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            let xb = x_all.select(Axis(0), chunk);
            let acts = model.forward(xb);
            let n = chunk.len() as f64;
            let mut delta = acts.last().unwrap().clone();
            for (r, &i) in chunk.iter().enumerate() {
                delta[[r, ds.label(train[i])]] -= 1.0;
            }
            delta /= n;
            for l in (0..model.weights.len()).rev() {
                let grad_w = acts[l].t().dot(&delta);
                let grad_b = delta.sum_axis(Axis(0));
                let next_delta = if l > 0 {
                    let mut back = delta.dot(&model.weights[l].t());
                    let a = &acts[l];
                    back.zip_mut_with(a, |g, &av| *g *= model.activation.derivative_from_output(av));
                    Some(back)
                } else {
                    None
                };
                model.weights[l].scaled_add(-p.learning_rate, &grad_w);
                model.biases[l].scaled_add(-p.learning_rate, &grad_b);
                if let Some(nd) = next_delta {
                    delta = nd;
                }
            }
        }
    }
    model
}
