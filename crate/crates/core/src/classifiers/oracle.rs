use super::BlackBox;
use crate::util::argmax;

type PredictFn = dyn Fn(&[u8]) -> usize + Send + Sync;
type ScoreFn = dyn Fn(&[u8]) -> Vec<f64> + Send + Sync;

/// A hand-written hard-label model, e.g. "class 1 iff bit 0 is set".
pub struct FnModel {
    n_features: usize,
    n_classes: usize,
    id: String,
    f: Box<PredictFn>,
}

impl FnModel {
    pub fn new(
        n_features: usize,
        n_classes: usize,
        id: impl Into<String>,
        f: impl Fn(&[u8]) -> usize + Send + Sync + 'static,
    ) -> Self {
        Self {
            n_features,
            n_classes,
            id: id.into(),
            f: Box::new(f),
        }
    }
}

impl BlackBox for FnModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn model_id(&self) -> &str {
        &self.id
    }

    fn predict_bits(&self, bits: &[u8]) -> usize {
        (self.f)(bits)
    }
}

/// A hand-written model exposing per-class scores; predicts their argmax.
pub struct ScoreFnModel {
    n_features: usize,
    n_classes: usize,
    id: String,
    f: Box<ScoreFn>,
}

impl ScoreFnModel {
    pub fn new(
        n_features: usize,
        n_classes: usize,
        id: impl Into<String>,
        f: impl Fn(&[u8]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            n_features,
            n_classes,
            id: id.into(),
            f: Box::new(f),
        }
    }
}

impl BlackBox for ScoreFnModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn model_id(&self) -> &str {
        &self.id
    }

    fn predict_bits(&self, bits: &[u8]) -> usize {
        argmax(&(self.f)(bits))
    }

    fn class_scores(&self, bits: &[u8]) -> Option<Vec<f64>> {
        Some((self.f)(bits))
    }
}
