use std::time::Instant;

use super::report::{num, write_csv_rows, write_json};
use super::{Context, FamilyEntry, ModelEntry, ModelIndex, MODEL_INDEX};
use crate::classifiers::{
    evaluate, information_gain_ranking, save_model, train, train_similar_family, BlackBox, ClassifierModel, PerformanceReport,
};
use crate::dataset::write_csv;
use crate::Result;

#[derive(Clone, Debug)]
pub struct TrainSummary {
    pub index: ModelIndex,
    /// `(model name, test-side performance)` for classifiers, then family
    /// members.
    pub performance: Vec<(String, PerformanceReport)>,
}

fn entry(ctx: &Context, name: &str, file: String, m: &ClassifierModel) -> Result<ModelEntry> {
    save_model(m, ctx.out(&file))?;
    Ok(ModelEntry {
        name: name.to_string(),
        model_id: m.model_id().to_string(),
        file,
        algorithm: m.algorithm(),
        config: m.config().describe(),
    })
}

/// Train every configured classifier and the similar-model family, save
/// them with an index, and write performance and information-gain reports.
pub fn cmd_train(ctx: &Context) -> Result<TrainSummary> {
    ctx.write_snapshot()?;
    let ds = &ctx.dataset;
    let cfg = &ctx.config;
    std::fs::create_dir_all(ctx.out("models/family")).map_err(|e| crate::Error::io(ctx.out("models"), e))?;
    if matches!(cfg.dataset, super::DatasetSource::Synthetic(_)) {
        let path = ctx.out("data/dataset.csv");
        super::report::ensure_parent(&path)?;
        write_csv(ds, &path)?;
    }

    let mut performance = Vec::new();
    let mut classifiers = Vec::new();
    for spec in &cfg.classifiers {
        let start = Instant::now();
        let m = train(ds, &ctx.split, &spec.train_config(cfg.seed))?;
        log::info!("trained {} ({}) in {:.2}s", spec.name, m.config().describe(), start.elapsed().as_secs_f64());
        performance.push((spec.name.clone(), evaluate(&m, ds, &ctx.split)?));
        classifiers.push(entry(ctx, &spec.name, format!("models/{}.json", spec.name), &m)?);
    }

    let family = match &cfg.family {
        None => None,
        Some(f) => {
            let base_cfg = cfg.classifier(&f.of).expect("validated").train_config(cfg.seed);
            let start = Instant::now();
            let fam = train_similar_family(ds, &ctx.split, &base_cfg, &f.variation)?;
            log::info!(
                "trained {}-member family of {} ({}) in {:.2}s",
                fam.alpha(),
                f.of,
                f.variation.describe(),
                start.elapsed().as_secs_f64()
            );
            if fam.alpha() == 2 {
                log::warn!("similar-model family has only 2 members; stability rests on a single pair");
            }
            let mut members = Vec::new();
            for (i, m) in fam.models.iter().enumerate() {
                let name = format!("{}[{}]", f.of, f.variation.member_label(i));
                performance.push((name.clone(), evaluate(m, ds, &ctx.split)?));
                members.push(entry(ctx, &name, format!("models/family/member_{i}.json"), m)?);
            }
            Some(FamilyEntry {
                of: f.of.clone(),
                variation: f.variation.clone(),
                base_member: f.base_member.or_else(|| f.variation.matching_member(&base_cfg)).expect("validated"),
                members,
            })
        }
    };

    let index = ModelIndex {
        dataset_fingerprint: ds.dictionary().fingerprint(),
        classifiers,
        family,
    };
    write_json(&ctx.out(MODEL_INDEX), &index)?;

    let name = ctx.dataset_name();
    let rows: Vec<Vec<String>> = performance
        .iter()
        .map(|(m, r)| {
            vec![
                name.clone(),
                m.clone(),
                r.n_samples.to_string(),
                num(r.tpr),
                num(r.fpr),
                num(r.precision),
                num(r.recall),
                num(r.f_measure),
                num(r.accuracy),
            ]
        })
        .collect();
    write_csv_rows(
        &ctx.out("reports/performance.csv"),
        &["dataset", "classifier", "n_test", "tpr", "fpr", "precision", "recall", "f_measure", "accuracy"],
        &rows,
    )?;
    let mut by_class = Vec::new();
    for (m, r) in &performance {
        for c in &r.per_class {
            by_class.push(vec![
                name.clone(),
                m.clone(),
                c.class.to_string(),
                c.name.clone(),
                c.support.to_string(),
                c.tp.to_string(),
                c.fp.to_string(),
                c.fn_.to_string(),
                c.tn.to_string(),
                num(c.tpr),
                num(c.fpr),
                num(c.precision),
                num(c.recall),
                num(c.f_measure),
            ]);
        }
    }
    write_csv_rows(
        &ctx.out("reports/performance_by_class.csv"),
        &[
            "dataset", "classifier", "class", "label", "support", "tp", "fp", "fn", "tn", "tpr", "fpr", "precision", "recall",
            "f_measure",
        ],
        &by_class,
    )?;

    let ranking = information_gain_ranking(ds, &ctx.split, cfg.ig_top_n);
    let dict = ds.dictionary();
    let ig_rows: Vec<Vec<String>> = ranking
        .iter()
        .enumerate()
        .map(|(i, (feat, gain))| {
            let kind = dict.index_of(feat).map(|j| dict.kinds()[j]).expect("ranked feature exists");
            vec![
                name.clone(),
                (i + 1).to_string(),
                feat.clone(),
                serde_json::to_value(kind).unwrap().as_str().unwrap_or_default().to_string(),
                num(*gain),
            ]
        })
        .collect();
    write_csv_rows(&ctx.out("reports/information_gain.csv"), &["dataset", "rank", "feature", "kind", "gain"], &ig_rows)?;

    Ok(TrainSummary { index, performance })
}
