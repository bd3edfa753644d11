mod common;

use std::path::Path;

use explainbench::classifiers::BlackBox;
use explainbench::explain::{read_cache, ExplainerKind};
use explainbench::harness::{
    cache_path, cmd_bench, cmd_explain, cmd_metrics, cmd_synth, cmd_train, Context, ExperimentConfig, LoadedModels,
    RunOptions,
};
use explainbench::metrics::MetricKind;
use explainbench::Error;

fn small_config(out: &Path) -> ExperimentConfig {
    let json = r#"{
        "name": "small",
        "dataset": {"synthetic": {"d": 12, "n": 240, "rule_sets": [[], [[[3, 1], [8, 1]]]], "seed": 5}},
        "classifiers": [{"name": "rf", "algorithm": "random_forest", "tree_count": 10}],
        "family": {"of": "rf", "variation": {"rf_tree_counts": [9, 10, 11]}},
        "explainers": ["lime", "shap"],
        "explainer_params": {"lime": {"perturbations": 200}, "shap": {"coalitions": 200}},
        "k_range": [1, 5],
        "explain_limit": 20,
        "bench": {"samples": 3},
        "seed": 11
    }"#;
    let cfg: ExperimentConfig = serde_json::from_str(json).unwrap();
    RunOptions {
        out: Some(out.to_path_buf()),
        seed: None,
    }
    .apply(cfg)
}

fn pipeline(out: &Path) -> Context {
    let ctx = Context::load(small_config(out)).unwrap();
    cmd_train(&ctx).unwrap();
    cmd_explain(&ctx).unwrap();
    ctx
}

fn read_rows(path: &Path) -> Vec<csv::StringRecord> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(Result::unwrap).collect()
}

#[test]
fn explain_writes_one_line_per_sample_approach_and_model() {
    let dir = tempfile::tempdir().unwrap();
    let ctx = pipeline(dir.path());
    let models = LoadedModels::load(&ctx).unwrap();
    // rf shares its model with the 10-tree family member
    assert_eq!(models.distinct().len(), 3);
    let mut lines = 0;
    for kind in [ExplainerKind::Lime, ExplainerKind::Shap] {
        for m in models.distinct() {
            let recs = read_cache(cache_path(dir.path(), kind, m.model_id())).unwrap();
            assert!(recs.iter().all(|r| r.explanation.elapsed_s > 0.0));
            lines += recs.len();
        }
    }
    assert_eq!(lines, 20 * 2 * 3);
    // a second run finds everything cached
    let again = cmd_explain(&ctx).unwrap();
    assert_eq!((again.written, again.skipped), (0, 120));
}

#[test]
fn interrupted_explain_resumes_to_the_same_cache() {
    let full = tempfile::tempdir().unwrap();
    pipeline(full.path());

    let part = tempfile::tempdir().unwrap();
    let ctx = Context::load(small_config(part.path())).unwrap();
    cmd_train(&ctx).unwrap();
    cmd_explain(&ctx).unwrap();
    // simulate a crash: drop the tail of one cache and leave half a line
    let models = LoadedModels::load(&ctx).unwrap();
    let id = models.distinct()[0].model_id().to_string();
    let path = cache_path(part.path(), ExplainerKind::Lime, &id);
    let text = std::fs::read_to_string(&path).unwrap();
    let keep: Vec<&str> = text.lines().take(7).collect();
    let next = text.lines().nth(7).unwrap();
    std::fs::write(&path, format!("{}\n{}", keep.join("\n"), &next[..next.len() / 2])).unwrap();

    let s = cmd_explain(&ctx).unwrap();
    assert_eq!(s.written, 13);
    let strip = |p: &Path| -> Vec<_> {
        read_cache(p)
            .unwrap()
            .into_iter()
            .map(|r| (r.explanation.sample_id, r.explanation.items, r.seed, r.params_hash))
            .collect()
    };
    assert_eq!(strip(&path), strip(&cache_path(full.path(), ExplainerKind::Lime, &id)));
}

#[test]
fn changed_parameters_do_not_mix_with_cached_lines() {
    let dir = tempfile::tempdir().unwrap();
    pipeline(dir.path());
    let mut cfg = small_config(dir.path());
    cfg.explainer_params.lime.perturbations = 300;
    let ctx = Context::load(cfg).unwrap();
    assert!(matches!(cmd_explain(&ctx), Err(Error::Mismatch(_))));
}

#[test]
fn metrics_emit_one_row_per_k_and_account_for_every_sample() {
    let dir = tempfile::tempdir().unwrap();
    let ctx = pipeline(dir.path());
    let s = cmd_metrics(&ctx).unwrap();
    for (metric, approach, classifier) in [
        (MetricKind::Stability, "lime", "rf_family"),
        (MetricKind::Robustness, "shap", "rf"),
        (MetricKind::Effectiveness, "lime", "rf"),
        (MetricKind::Consistency, "all", "rf"),
    ] {
        let rows = s.series(metric, approach, classifier);
        assert_eq!(rows.iter().map(|r| r.k).collect::<Vec<_>>(), vec![1, 2, 3, 4, 5]);
        assert!(rows.iter().all(|r| r.n_samples + r.n_skipped == 20));
    }

    let rows = read_rows(&dir.path().join("reports/metrics.csv"));
    // 2 approaches x (stability + robustness + effectiveness) + consistency, 5 ks each
    assert_eq!(rows.len(), (2 * 3 + 1) * 5);
    for r in &rows {
        let n: usize = r[6].parse().unwrap();
        let skipped: usize = r[7].parse().unwrap();
        assert_eq!(n + skipped, 20);
        if !r[5].is_empty() {
            let v: f64 = r[5].parse().unwrap();
            let lo = if &r[0] == "robustness" { -1.0 } else { 0.0 };
            assert!((lo..=1.0).contains(&v));
        }
    }
    for r in read_rows(&dir.path().join("reports/robustness_by_class.csv")) {
        let (s_bar, d_bar, rob): (f64, f64, f64) = (r[7].parse().unwrap(), r[8].parse().unwrap(), r[9].parse().unwrap());
        assert!((rob - (s_bar - d_bar)).abs() < 1e-12);
    }
    assert!(!read_rows(&dir.path().join("reports/effective_features.csv")).is_empty());
    assert!(dir.path().join("reports/summary.md").is_file());
}

#[test]
fn identical_mock_explanations_give_stability_one() {
    let dir = tempfile::tempdir().unwrap();
    let ctx = pipeline(dir.path());
    let models = LoadedModels::load(&ctx).unwrap();
    let ids: Vec<String> = models
        .distinct()
        .iter()
        .map(|m| m.model_id().to_string())
        .collect();
    // copy the first model's lines into every member's cache, relabelled
    let src = std::fs::read_to_string(cache_path(dir.path(), ExplainerKind::Lime, &ids[0])).unwrap();
    for id in &ids[1..] {
        std::fs::write(cache_path(dir.path(), ExplainerKind::Lime, id), src.replace(&ids[0], id)).unwrap();
    }
    let s = cmd_metrics(&ctx).unwrap();
    assert!(s
        .series(MetricKind::Stability, "lime", "rf_family")
        .iter()
        .all(|r| r.value == Some(1.0)));
}

#[test]
fn missing_cache_lines_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let ctx = pipeline(dir.path());
    let models = LoadedModels::load(&ctx).unwrap();
    let id = models.distinct()[1].model_id().to_string();
    std::fs::remove_file(cache_path(dir.path(), ExplainerKind::Shap, &id)).unwrap();
    match cmd_metrics(&ctx) {
        Err(Error::IncompleteCache(msg)) => {
            assert!(msg.starts_with("20 "), "{msg}");
            assert!(msg.contains(&id) && msg.contains("and 10 more"), "{msg}");
        }
        other => panic!("expected an incomplete-cache error, got {:?}", other.map(|_| ())),
    }
}

#[test]
fn training_twice_gives_identical_models() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ia = cmd_train(&Context::load(small_config(a.path())).unwrap()).unwrap().index;
    let ib = cmd_train(&Context::load(small_config(b.path())).unwrap()).unwrap().index;
    assert_eq!(ia, ib);
    let perf = read_rows(&a.path().join("reports/performance.csv"));
    // rf plus three family members
    assert_eq!(perf.len(), 4);
    assert_eq!(&perf[1][1], "rf[trees=9]");
    assert_eq!(read_rows(&a.path().join("reports/information_gain.csv")).len(), 12);
    assert!(a.path().join("data/dataset.csv").is_file());
    assert!(a.path().join("config.effective.json").is_file());
}

#[test]
fn commands_need_trained_models() {
    let dir = tempfile::tempdir().unwrap();
    let ctx = Context::load(small_config(dir.path())).unwrap();
    assert!(matches!(cmd_explain(&ctx), Err(Error::InvalidInput(_))));
    assert!(matches!(cmd_metrics(&ctx), Err(Error::InvalidInput(_))));
}

#[test]
fn bench_reports_one_row_per_approach() {
    let dir = tempfile::tempdir().unwrap();
    let ctx = Context::load(small_config(dir.path())).unwrap();
    cmd_train(&ctx).unwrap();
    let r = cmd_bench(&ctx).unwrap();
    assert_eq!(r.rows.len(), 2);
    assert!(r.rows.iter().all(|row| row.n_samples == 3 && row.mean_seconds > 0.0));
    assert_eq!(read_rows(&dir.path().join("reports/runtime.csv")).len(), 2);
    assert!(std::fs::read_to_string(dir.path().join("reports/runtime.md")).unwrap().contains("| small |"));

    let mut cfg = small_config(dir.path());
    cfg.bench.samples = 0;
    assert!(matches!(cmd_bench(&Context::load(cfg).unwrap()), Err(Error::Config(_))));
}

#[test]
fn invalid_configs_list_every_problem_before_any_work() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    cfg.dataset = explainbench::harness::DatasetSource::Csv {
        path: dir.path().join("absent.csv"),
        dictionary: None,
    };
    cfg.explainers.clear();
    cfg.k_range = [3, 2];
    match Context::load(cfg) {
        Err(Error::Config(v)) => {
            assert_eq!(v.len(), 3, "{v:?}");
            assert!(v[0].contains("absent.csv"));
        }
        _ => panic!("expected a config error"),
    }
    assert!(!dir.path().join("models").exists());

    let mut cfg = small_config(dir.path());
    cfg.k_range = [1, 13];
    assert!(matches!(Context::load(cfg), Err(Error::Config(_))));

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"dataset": {"synthetic": {"d": 4, "n": 10, "rule_sets": [[], []]}}, "bogus": 1}"#).unwrap();
    assert!(matches!(ExperimentConfig::load(&bad), Err(Error::Config(_))));
}

#[test]
fn synth_output_loads_back_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(&spec, r#"{"d": 10, "n": 80, "rule_sets": [[], [[[1, 1], [4, 0]]]], "seed": 2}"#).unwrap();
    let a = cmd_synth(&spec, &dir.path().join("a"), None).unwrap();
    let b = cmd_synth(&spec, &dir.path().join("b"), None).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let ds = explainbench::dataset::load_csv(&a).unwrap();
    assert_eq!((ds.len(), ds.n_features()), (80, 10));
    let c = cmd_synth(&spec, &dir.path().join("c"), Some(3)).unwrap();
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
}

#[test]
fn shipped_config_parses() {
    let cfg = ExperimentConfig::load(common::workspace_root().join("configs/planted_rule.json")).unwrap();
    cfg.validate().unwrap();
    assert_eq!(cfg.explainers.len(), 5);
}
