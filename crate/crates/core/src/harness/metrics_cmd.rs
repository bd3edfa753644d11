use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use super::report::{fixed, num, opt, write_csv_rows, write_text};
use super::{cache_path, Context, LoadedModels};
use crate::classifiers::{BlackBox, ClassifierModel};
use crate::explain::{read_cache, ExplainerKind};
use crate::metrics::{
    consistency, effective_features, effectiveness, robustness, stability, EffectiveFeature, ExplanationSet, MetricKind,
    MetricPoint, MetricSeries, RobustnessBreakdown, Sample,
};
use crate::{Error, Result};

/// One line of `reports/metrics.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricRow {
    pub metric: MetricKind,
    /// Interpreter name, or `all` for consistency.
    pub approach: String,
    pub classifier: String,
    pub k: usize,
    pub value: Option<f64>,
    pub n_samples: usize,
    pub n_skipped: usize,
}

#[derive(Clone, Debug)]
pub struct EffectiveRow {
    pub classifier: String,
    pub approach: ExplainerKind,
    pub class: usize,
    pub features: Vec<EffectiveFeature>,
    pub scored: usize,
}

#[derive(Clone, Debug)]
pub struct MetricsSummary {
    pub rows: Vec<MetricRow>,
    /// `(classifier, approach, per-k breakdowns)`.
    pub robustness: Vec<(String, ExplainerKind, Vec<RobustnessBreakdown>)>,
    pub effective: Vec<EffectiveRow>,
}

impl MetricsSummary {
    pub fn series(&self, metric: MetricKind, approach: &str, classifier: &str) -> Vec<&MetricRow> {
        self.rows
            .iter()
            .filter(|r| r.metric == metric && r.approach == approach && r.classifier == classifier)
            .collect()
    }
}

fn load_set(
    ctx: &Context,
    kind: ExplainerKind,
    model: &ClassifierModel,
    wanted: &HashSet<&str>,
    missing: &mut Vec<String>,
) -> Result<ExplanationSet> {
    let path = cache_path(&ctx.config.out_dir, kind, model.model_id());
    let mut set = ExplanationSet::new();
    for rec in read_cache(&path)? {
        let e = rec.explanation;
        if wanted.contains(e.sample_id.as_str()) {
            e.validate(ctx.dataset.n_features())?;
            set.insert(e.sample_id.clone(), e);
        }
    }
    for id in wanted {
        if !set.contains_key(*id) {
            missing.push(format!("({id}, {kind}, {})", model.model_id()));
        }
    }
    Ok(set)
}

fn rows_of(series: &MetricSeries, approach: &str, classifier: &str) -> Vec<MetricRow> {
    series
        .points
        .iter()
        .map(|p| MetricRow {
            metric: series.metric,
            approach: approach.to_string(),
            classifier: classifier.to_string(),
            k: p.k,
            value: p.value,
            n_samples: p.n_samples,
            n_skipped: p.n_skipped,
        })
        .collect()
}

fn all_skipped(metric: MetricKind, ks: &[usize], n: usize) -> MetricSeries {
    MetricSeries {
        metric,
        points: ks
            .iter()
            .map(|&k| MetricPoint {
                k,
                value: None,
                n_samples: 0,
                n_skipped: n,
                per_sample: Vec::new(),
            })
            .collect(),
    }
}

/// Score cached explanations: stability over the family, robustness,
/// effectiveness and consistency over each scored model. Writes the metric
/// CSVs and a markdown summary.
pub fn cmd_metrics(ctx: &Context) -> Result<MetricsSummary> {
    let models = LoadedModels::load(ctx)?;
    let cfg = &ctx.config;
    let ds = &ctx.dataset;
    let ks = cfg.ks();
    let indices = ctx.explain_indices();
    let ids: Vec<String> = indices.iter().map(|&i| ds.sample_id(i).to_string()).collect();
    let wanted: HashSet<&str> = ids.iter().map(String::as_str).collect();
    let samples: Vec<Sample<'_>> = indices.iter().map(|&i| (ds.sample_id(i), ds.sample(i))).collect();

    let mut missing = Vec::new();
    let mut sets: BTreeMap<(ExplainerKind, String), ExplanationSet> = BTreeMap::new();
    for &kind in &cfg.explainers {
        for m in models.distinct() {
            let set = load_set(ctx, kind, m, &wanted, &mut missing)?;
            sets.insert((kind, m.model_id().to_string()), set);
        }
    }
    if !missing.is_empty() {
        missing.sort();
        let n = missing.len();
        let mut msg = missing.into_iter().take(10).collect::<Vec<_>>().join(", ");
        if n > 10 {
            let _ = write!(msg, " and {} more", n - 10);
        }
        return Err(Error::IncompleteCache(format!("{n} (sample, approach, model) explanations missing: {msg}; run `explain`")));
    }
    let set = |kind: ExplainerKind, m: &ClassifierModel| &sets[&(kind, m.model_id().to_string())];

    let mut rows = Vec::new();
    if let Some((f, members)) = &models.family {
        let label = format!("{}_family", f.of);
        for &kind in &cfg.explainers {
            let fam: Vec<&ExplanationSet> = members.iter().map(|m| set(kind, m)).collect();
            rows.extend(rows_of(&stability(&fam, &ids, &ks)?, kind.as_str(), &label));
        }
    }

    let mut rob_out = Vec::new();
    let mut effective = Vec::new();
    for (name, model) in models.scored() {
        for &kind in &cfg.explainers {
            let s = set(kind, model);
            match robustness(s, &ids, &ks, cfg.neighbor_cap, cfg.seed) {
                Ok(r) => {
                    rows.extend(rows_of(&r.series, kind.as_str(), &name));
                    rob_out.push((name.clone(), kind, r.breakdowns));
                }
                Err(Error::InvalidInput(msg)) => {
                    log::warn!("robustness of {kind} on {name}: {msg}");
                    rows.extend(rows_of(&all_skipped(MetricKind::Robustness, &ks, ids.len()), kind.as_str(), &name));
                }
                Err(e) => return Err(e),
            }
            rows.extend(rows_of(&effectiveness(model, &samples, s, &ks)?, kind.as_str(), &name));

            let mut by_class: BTreeMap<usize, Vec<Sample<'_>>> = BTreeMap::new();
            for smp in &samples {
                by_class.entry(model.predict_bits(smp.1.bits())).or_default().push(*smp);
            }
            for (class, group) in by_class {
                let (features, scored) = effective_features(model, &group, s, cfg.effective_k)?;
                effective.push(EffectiveRow {
                    classifier: name.clone(),
                    approach: kind,
                    class,
                    features,
                    scored,
                });
            }
        }
        if cfg.explainers.len() >= 2 {
            let all: Vec<&ExplanationSet> = cfg.explainers.iter().map(|&k| set(k, model)).collect();
            rows.extend(rows_of(&consistency(&all, &ids, &ks)?, "all", &name));
        }
    }

    let summary = MetricsSummary {
        rows,
        robustness: rob_out,
        effective,
    };
    write_reports(ctx, &models, &summary)?;
    Ok(summary)
}

fn write_reports(ctx: &Context, models: &LoadedModels, s: &MetricsSummary) -> Result<()> {
    let dataset = ctx.dataset_name();
    let ds = &ctx.dataset;
    let rows: Vec<Vec<String>> = s
        .rows
        .iter()
        .map(|r| {
            vec![
                r.metric.to_string(),
                r.approach.clone(),
                dataset.clone(),
                r.classifier.clone(),
                r.k.to_string(),
                opt(r.value),
                r.n_samples.to_string(),
                r.n_skipped.to_string(),
            ]
        })
        .collect();
    write_csv_rows(
        &ctx.out("reports/metrics.csv"),
        &["metric", "approach", "dataset", "classifier", "k", "value", "n_samples", "n_skipped"],
        &rows,
    )?;

    let mut rob = Vec::new();
    for (name, kind, bds) in &s.robustness {
        for b in bds {
            for c in &b.classes {
                rob.push(vec![
                    dataset.clone(),
                    name.clone(),
                    kind.to_string(),
                    b.k.to_string(),
                    c.class.to_string(),
                    ds.label_names()[c.class].clone(),
                    c.n.to_string(),
                    num(c.s_bar),
                    num(c.d_bar),
                    num(c.rob),
                ]);
            }
        }
    }
    write_csv_rows(
        &ctx.out("reports/robustness_by_class.csv"),
        &["dataset", "classifier", "approach", "k", "class", "label", "n", "s_bar", "d_bar", "rob"],
        &rob,
    )?;

    let mut eff = Vec::new();
    for e in &s.effective {
        for (rank, f) in e.features.iter().enumerate() {
            eff.push(vec![
                dataset.clone(),
                e.classifier.clone(),
                e.approach.to_string(),
                e.class.to_string(),
                ds.label_names()[e.class].clone(),
                e.scored.to_string(),
                (rank + 1).to_string(),
                ds.dictionary().name(f.feature).to_string(),
                num(f.weight),
                f.count.to_string(),
            ]);
        }
    }
    write_csv_rows(
        &ctx.out("reports/effective_features.csv"),
        &["dataset", "classifier", "approach", "class", "label", "n_scored", "rank", "feature", "weight", "count"],
        &eff,
    )?;

    write_text(&ctx.out("reports/summary.md"), &summary_markdown(ctx, models, s))
}

fn summary_markdown(ctx: &Context, models: &LoadedModels, s: &MetricsSummary) -> String {
    let cfg = &ctx.config;
    let ks = cfg.ks();
    let shown: Vec<usize> = ks
        .iter()
        .copied()
        .filter(|&k| k == cfg.k_range[0] || k == cfg.k_range[1] || k % 5 == 0)
        .collect();
    let mut md = String::new();
    let _ = writeln!(md, "# Explanation metrics: {}\n", ctx.dataset_name());
    let _ = writeln!(
        md,
        "{} samples explained, k from {} to {}, seed {}.\n",
        ctx.explain_indices().len(),
        cfg.k_range[0],
        cfg.k_range[1],
        cfg.seed
    );
    if let Some((f, ms)) = &models.family {
        let _ = writeln!(
            md,
            "Stability is measured over a family of {} `{}` models ({}).",
            ms.len(),
            f.of,
            f.variation.describe()
        );
        if ms.len() == 2 {
            let _ = writeln!(md, "\n**Note:** the family has only 2 members, so stability rests on a single model pair.");
        }
        md.push('\n');
    }
    for metric in [
        MetricKind::Stability,
        MetricKind::Robustness,
        MetricKind::Effectiveness,
        MetricKind::Consistency,
    ] {
        let mut keys: Vec<(String, String)> = Vec::new();
        for r in s.rows.iter().filter(|r| r.metric == metric) {
            let key = (r.classifier.clone(), r.approach.clone());
            if !keys.contains(&key) {
                keys.push(key);
            }
        }
        if keys.is_empty() {
            continue;
        }
        let _ = writeln!(md, "## {}\n", capitalize(metric.as_str()));
        let _ = write!(md, "| classifier | approach |");
        for k in &shown {
            let _ = write!(md, " k={k} |");
        }
        let _ = write!(md, "\n|---|---|");
        md.push_str(&"---:|".repeat(shown.len()));
        md.push('\n');
        for (c, a) in keys {
            let _ = write!(md, "| {c} | {a} |");
            for k in &shown {
                let v = s
                    .rows
                    .iter()
                    .find(|r| r.metric == metric && r.classifier == c && r.approach == a && r.k == *k)
                    .and_then(|r| r.value);
                let _ = write!(md, " {} |", fixed(v, 3));
            }
            md.push('\n');
        }
        md.push('\n');
    }
    let _ = writeln!(
        md,
        "Effective features (`effective_features.csv`, k = {}): for each sample the shortest prefix of its \
         explanation whose contradiction flips the prediction; a feature's weight is the share of scored samples \
         of that predicted class whose prefix contains it.",
        cfg.effective_k
    );
    md
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    c.next().map(|f| f.to_uppercase().chain(c).collect()).unwrap_or_default()
}
