use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::report::{host_description, num, write_csv_rows, write_json, write_text};
use super::{explanation_seed, Context, LoadedModels};
use crate::explain::{explain, ExplainerKind};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuntimeRow {
    pub approach: ExplainerKind,
    pub dataset: String,
    pub classifier: String,
    pub n_samples: usize,
    pub mean_seconds: f64,
    pub total_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuntimeReport {
    pub host: Vec<(String, String)>,
    pub rows: Vec<RuntimeRow>,
}

impl RuntimeReport {
    pub fn mean(&self, approach: ExplainerKind) -> Option<f64> {
        self.rows.iter().find(|r| r.approach == approach).map(|r| r.mean_seconds)
    }
}

/// Time every configured interpreter on the first `bench.samples` test
/// samples of the base model. Samples run one after another so the
/// per-sample times are not skewed by contention.
pub fn cmd_bench(ctx: &Context) -> Result<RuntimeReport> {
    let cfg = &ctx.config;
    let n = cfg.bench.samples;
    if n == 0 {
        return Err(Error::Config(vec!["bench.samples must be >= 1".into()]));
    }
    let models = LoadedModels::load(ctx)?;
    let (name, model) = models.base();
    let ds = &ctx.dataset;
    let test = ctx.split.test();
    let picked = &test[..n.min(test.len())];
    if picked.len() < n {
        log::warn!("bench: only {} test samples available, {n} requested", picked.len());
    }
    let dataset = ctx.dataset_name();

    let mut rows = Vec::new();
    for &kind in &cfg.explainers {
        // one untimed call so lazy allocation is not charged to the first sample
        let (id0, x0) = (ds.sample_id(picked[0]), ds.sample(picked[0]));
        explain(kind, model, id0, x0, &cfg.explainer_params, explanation_seed(cfg.seed, kind, id0))?;

        let mut total = 0.0;
        for &i in picked {
            let id = ds.sample_id(i);
            let start = Instant::now();
            explain(kind, model, id, ds.sample(i), &cfg.explainer_params, explanation_seed(cfg.seed, kind, id))?;
            total += start.elapsed().as_secs_f64();
        }
        let mean = total / picked.len() as f64;
        log::info!("bench {kind}: {mean:.4}s per sample over {} samples", picked.len());
        rows.push(RuntimeRow {
            approach: kind,
            dataset: dataset.clone(),
            classifier: name.clone(),
            n_samples: picked.len(),
            mean_seconds: mean,
            total_seconds: total,
        });
    }
    let report = RuntimeReport {
        host: host_description(),
        rows,
    };

    let csv: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.approach.to_string(),
                r.dataset.clone(),
                r.classifier.clone(),
                r.n_samples.to_string(),
                num(r.mean_seconds),
                num(r.total_seconds),
            ]
        })
        .collect();
    write_csv_rows(
        &ctx.out("reports/runtime.csv"),
        &["approach", "dataset", "classifier", "n_samples", "mean_seconds", "total_seconds"],
        &csv,
    )?;
    write_json(&ctx.out("reports/runtime.json"), &report)?;
    write_text(&ctx.out("reports/runtime.md"), &runtime_markdown(&report, &name))?;
    Ok(report)
}

fn runtime_markdown(r: &RuntimeReport, classifier: &str) -> String {
    let mut md = String::from("# Runtime per sample (seconds)\n\n");
    for (k, v) in &r.host {
        let _ = writeln!(md, "- {k}: {v}");
    }
    let _ = writeln!(md, "- classifier: {classifier}");
    if let Some(row) = r.rows.first() {
        let _ = writeln!(md, "- samples: {}", row.n_samples);
    }
    md.push_str("\nTimes are relative to this machine.\n\n| Dataset |");
    for row in &r.rows {
        let _ = write!(md, " {} |", display_name(row.approach));
    }
    md.push_str("\n|---|");
    md.push_str(&"---:|".repeat(r.rows.len()));
    md.push('\n');
    if let Some(row) = r.rows.first() {
        let _ = write!(md, "| {} |", row.dataset);
        for row in &r.rows {
            let _ = write!(md, " {:.4} |", row.mean_seconds);
        }
        md.push('\n');
    }
    md
}

fn display_name(k: ExplainerKind) -> &'static str {
    match k {
        ExplainerKind::Lime => "LIME",
        ExplainerKind::Anchor => "Anchor",
        ExplainerKind::Lore => "LORE",
        ExplainerKind::Shap => "SHAP",
        ExplainerKind::Lemna => "LEMNA",
    }
}
