use serde::{Deserialize, Serialize};

use super::BlackBox;
use crate::dataset::{LabeledDataset, Split};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassPerformance {
    pub class: usize,
    pub name: String,
    pub support: usize,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
    pub tpr: f64,
    pub fpr: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
}

/// Test-side detection metrics. For two classes the rates refer to class 1
/// (the positive, e.g. malicious, class); for more classes they are
/// macro-averaged one-vs-rest rates. `f_measure` is always the harmonic mean
/// of the reported `precision` and `recall`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerformanceReport {
    pub n_samples: usize,
    pub tpr: f64,
    pub fpr: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub accuracy: f64,
    pub per_class: Vec<ClassPerformance>,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

pub fn evaluate<M: BlackBox + ?Sized>(model: &M, ds: &LabeledDataset, split: &Split) -> Result<PerformanceReport> {
    evaluate_indices(model, ds, split.test())
}

/// Metrics over an arbitrary index set (e.g. the training side).
pub fn evaluate_indices<M: BlackBox + ?Sized>(model: &M, ds: &LabeledDataset, indices: &[usize]) -> Result<PerformanceReport> {
    if indices.is_empty() {
        return Err(Error::InvalidInput("cannot evaluate on an empty sample set".into()));
    }
    if model.n_features() != ds.n_features() {
        return Err(Error::Dimension {
            expected: model.n_features(),
            got: ds.n_features(),
        });
    }
    let c = ds.n_classes().max(model.n_classes());
    let mut confusion = vec![vec![0usize; c]; c];
    for &i in indices {
        let pred = model.predict_bits(ds.sample(i).bits());
        confusion[ds.label(i)][pred] += 1;
    }
    let n = indices.len();
    let correct: usize = (0..c).map(|k| confusion[k][k]).sum();
    let per_class: Vec<ClassPerformance> = (0..c)
        .map(|k| {
            let tp = confusion[k][k];
            let support: usize = confusion[k].iter().sum();
            let predicted: usize = (0..c).map(|t| confusion[t][k]).sum();
            let fn_ = support - tp;
            let fp = predicted - tp;
            let tn = n - tp - fn_ - fp;
            let precision = ratio(tp, tp + fp);
            let recall = ratio(tp, tp + fn_);
            ClassPerformance {
                class: k,
                name: ds.label_names().get(k).cloned().unwrap_or_else(|| format!("class_{k}")),
                support,
                tp,
                fp,
                fn_,
                tn,
                tpr: recall,
                fpr: ratio(fp, fp + tn),
                precision,
                recall,
                f_measure: harmonic(precision, recall),
            }
        })
        .collect();

    let (tpr, fpr, precision, recall) = if c == 2 {
        let pos = &per_class[1];
        (pos.tpr, pos.fpr, pos.precision, pos.recall)
    } else {
        let m = c as f64;
        (
            per_class.iter().map(|p| p.tpr).sum::<f64>() / m,
            per_class.iter().map(|p| p.fpr).sum::<f64>() / m,
            per_class.iter().map(|p| p.precision).sum::<f64>() / m,
            per_class.iter().map(|p| p.recall).sum::<f64>() / m,
        )
    };
    Ok(PerformanceReport {
        n_samples: n,
        tpr,
        fpr,
        precision,
        recall,
        f_measure: harmonic(precision, recall),
        accuracy: ratio(correct, n),
        per_class,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::FnModel;
    use crate::dataset::{FeatureDictionary, FeatureVector};

    fn binary_ds(rows: &[(u8, usize)]) -> LabeledDataset {
        let dict = FeatureDictionary::synthetic(vec!["f0".into()]).unwrap();
        LabeledDataset::new(
            dict,
            rows.iter().map(|(b, _)| FeatureVector::new(vec![*b]).unwrap()).collect(),
            rows.iter().map(|(_, l)| *l).collect(),
            vec!["benign".into(), "malicious".into()],
            (0..rows.len()).map(|i| format!("s{i}")).collect(),
        )
        .unwrap()
    }

    #[test]
    fn hand_checked_confusion() {
        // model predicts bit 0; rows: TP, FP, FN, TN
        let ds = binary_ds(&[(1, 1), (1, 0), (0, 1), (0, 0)]);
        let m = FnModel::new(1, 2, "id", |b| b[0] as usize);
        let r = evaluate_indices(&m, &ds, &[0, 1, 2, 3]).unwrap();
        assert_eq!(r.precision, 0.5);
        assert_eq!(r.recall, 0.5);
        assert_eq!(r.f_measure, 0.5);
        assert_eq!(r.accuracy, 0.5);
        assert_eq!(r.fpr, 0.5);
    }

    #[test]
    fn perfect_and_inverted_predictors() {
        let ds = binary_ds(&[(1, 1), (0, 0), (1, 1), (0, 0)]);
        let idx = [0, 1, 2, 3];
        let perfect = FnModel::new(1, 2, "p", |b| b[0] as usize);
        let r = evaluate_indices(&perfect, &ds, &idx).unwrap();
        assert_eq!((r.accuracy, r.fpr, r.tpr), (1.0, 0.0, 1.0));
        let inverted = FnModel::new(1, 2, "i", |b| 1 - b[0] as usize);
        assert_eq!(evaluate_indices(&inverted, &ds, &idx).unwrap().accuracy, 0.0);
        assert!(evaluate_indices(&perfect, &ds, &[]).is_err());
    }
}
