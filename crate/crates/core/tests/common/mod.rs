#![allow(dead_code)]

use std::path::{Path, PathBuf};

use explainbench::explain::{Constraint, ExplainerKind, Explanation, ExplanationItem};
use explainbench::harness::{Context, ExperimentConfig, RunOptions};
use explainbench::metrics::ExplanationSet;

/// Weighted explanation ranking `feats` in the given order.
pub fn ranked(id: &str, label: usize, feats: &[usize]) -> Explanation {
    Explanation {
        approach: ExplainerKind::Lime,
        model_id: "mock".into(),
        sample_id: id.into(),
        predicted_label: label,
        items: feats
            .iter()
            .enumerate()
            .map(|(r, &f)| ExplanationItem {
                feature: f,
                constraint: Constraint::Weighted,
                weight: (feats.len() - r) as f64,
            })
            .collect(),
        elapsed_s: 0.001,
        flags: vec![],
    }
}

pub fn set_of(es: Vec<Explanation>) -> ExplanationSet {
    es.into_iter().map(|e| (e.sample_id.clone(), e)).collect()
}

pub fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

/// The shipped planted-rule config, writing into `out`.
pub fn planted_context(out: &Path, tweak: impl FnOnce(&mut ExperimentConfig)) -> Context {
    let cfg = ExperimentConfig::load(workspace_root().join("configs/planted_rule.json")).unwrap();
    let mut cfg = RunOptions {
        out: Some(out.to_path_buf()),
        seed: None,
    }
    .apply(cfg);
    tweak(&mut cfg);
    Context::load(cfg).unwrap()
}
