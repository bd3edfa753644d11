use std::collections::HashSet;
use std::time::Instant;

use rayon::prelude::*;

use super::{cache_path, Context, LoadedModels};
use crate::classifiers::BlackBox;
use crate::explain::{explain, read_cache, CacheRecord, CacheWriter, ExplainerKind};
use crate::util::derive_seed;
use crate::{Error, Result};

const CHUNK: usize = 32;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ExplainSummary {
    /// Explanations computed by this run.
    pub written: usize,
    /// Explanations already present in the caches.
    pub skipped: usize,
}

/// Seed for one explanation. Independent of the model, so family members
/// see the same perturbations and stability measures model variation only.
pub fn explanation_seed(seed: u64, kind: ExplainerKind, sample_id: &str) -> u64 {
    derive_seed(&[&seed.to_string(), kind.as_str(), sample_id])
}

/// Explain every selected test sample with every configured interpreter on
/// every distinct model, appending to per-(interpreter, model) caches.
/// Samples already cached are skipped, so an interrupted run resumes.
pub fn cmd_explain(ctx: &Context) -> Result<ExplainSummary> {
    let models = LoadedModels::load(ctx)?;
    let cfg = &ctx.config;
    let ds = &ctx.dataset;
    let indices = ctx.explain_indices();
    let mut summary = ExplainSummary::default();

    for &kind in &cfg.explainers {
        let hash = cfg.explainer_params.params_hash(kind);
        for model in models.distinct() {
            let path = cache_path(&cfg.out_dir, kind, model.model_id());
            super::report::ensure_parent(&path)?;
            let mut done = HashSet::new();
            for rec in read_cache(&path)? {
                let e = &rec.explanation;
                let stale = rec.params_hash != hash
                    || e.approach != kind
                    || e.model_id != model.model_id()
                    || rec.seed != explanation_seed(cfg.seed, kind, &e.sample_id);
                if stale {
                    return Err(Error::Mismatch(format!(
                        "{}: cached explanation of sample {} was produced with different parameters or seed; \
                         delete the cache or use a fresh output directory",
                        path.display(),
                        e.sample_id
                    )));
                }
                done.insert(e.sample_id.clone());
            }
            let todo: Vec<usize> = indices.iter().copied().filter(|&i| !done.contains(ds.sample_id(i))).collect();
            summary.skipped += indices.len() - todo.len();
            if todo.is_empty() {
                continue;
            }
            log::info!("{kind} on {}: {} to explain, {} cached", model.model_id(), todo.len(), indices.len() - todo.len());
            let start = Instant::now();
            let mut writer = CacheWriter::open(&path)?;
            for chunk in todo.chunks(CHUNK) {
                let recs = chunk
                    .par_iter()
                    .map(|&i| {
                        let id = ds.sample_id(i);
                        let seed = explanation_seed(cfg.seed, kind, id);
                        let explanation = explain(kind, model, id, ds.sample(i), &cfg.explainer_params, seed)?;
                        Ok(CacheRecord {
                            explanation,
                            seed,
                            params_hash: hash.clone(),
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                for r in &recs {
                    writer.append(r)?;
                }
                summary.written += recs.len();
            }
            log::info!("{kind} on {}: done in {:.2}s", model.model_id(), start.elapsed().as_secs_f64());
        }
    }
    Ok(summary)
}
