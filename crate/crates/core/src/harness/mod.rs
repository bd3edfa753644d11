//! Config-driven orchestration: `synth`, `train`, `explain`, `metrics` and
//! `bench`, each reading an [`ExperimentConfig`] and writing into its output
//! directory.

mod bench;
mod config;
mod explain_cmd;
mod metrics_cmd;
mod report;
mod synth_cmd;
mod train_cmd;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classifiers::{load_model, Algorithm, BlackBox, ClassifierModel, Variation};
use crate::dataset::{generate_synthetic, load_csv, load_csv_with_dictionary, split_per_class, split_random, LabeledDataset, Split};
use crate::explain::ExplainerKind;
use crate::util::derive_seed;
use crate::{Error, Result};

pub use bench::{cmd_bench, RuntimeReport, RuntimeRow};
pub use config::{BenchSpec, ClassifierSpec, DatasetSource, ExperimentConfig, FamilySpec, SplitPolicy};
pub use explain_cmd::{cmd_explain, explanation_seed, ExplainSummary};
pub use metrics_cmd::{cmd_metrics, MetricRow, MetricsSummary};
pub use synth_cmd::cmd_synth;
pub use train_cmd::{cmd_train, TrainSummary};

/// Command-line overrides applied on top of a config file.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

impl RunOptions {
    pub fn apply(&self, mut cfg: ExperimentConfig) -> ExperimentConfig {
        if let Some(o) = &self.out {
            cfg.out_dir = o.clone();
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        cfg
    }
}

/// A validated config with its dataset loaded and split.
pub struct Context {
    pub config: ExperimentConfig,
    pub dataset: LabeledDataset,
    pub split: Split,
}

impl Context {
    pub fn load(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let dataset = match &config.dataset {
            DatasetSource::Csv { path, dictionary: None } => load_csv(path)?,
            DatasetSource::Csv {
                path,
                dictionary: Some(dict),
            } => load_csv_with_dictionary(path, dict)?,
            DatasetSource::Synthetic(spec) => generate_synthetic(spec)?,
        };
        let hi = config.k_range[1];
        if hi > dataset.n_features() {
            return Err(Error::Config(vec![format!(
                "k_range max {hi} exceeds the feature count {}",
                dataset.n_features()
            )]));
        }
        let seed = derive_seed(&[&config.seed.to_string(), "split"]);
        let split = match config.split {
            SplitPolicy::Random { train_fraction } => split_random(&dataset, train_fraction, seed)?,
            SplitPolicy::PerClass => split_per_class(&dataset, seed)?,
        };
        Ok(Self { config, dataset, split })
    }

    pub fn out(&self, rel: impl AsRef<Path>) -> PathBuf {
        self.config.out_dir.join(rel)
    }

    pub fn dataset_name(&self) -> String {
        self.config.dataset_name()
    }

    /// Test samples that get explained and scored, in dataset order.
    pub fn explain_indices(&self) -> Vec<usize> {
        let t = self.split.test();
        t[..self.config.explain_limit.map_or(t.len(), |l| l.min(t.len()))].to_vec()
    }

    fn write_snapshot(&self) -> Result<()> {
        let path = self.out("config.effective.json");
        report::write_json(&path, &self.config)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelEntry {
    pub name: String,
    pub model_id: String,
    /// Path relative to the output directory.
    pub file: String,
    pub algorithm: Algorithm,
    pub config: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyEntry {
    pub of: String,
    pub variation: Variation,
    pub base_member: usize,
    pub members: Vec<ModelEntry>,
}

/// Written by `train`, read by the later commands.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelIndex {
    pub dataset_fingerprint: String,
    pub classifiers: Vec<ModelEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<FamilyEntry>,
}

pub const MODEL_INDEX: &str = "models/index.json";

/// Models loaded from an index and checked against the dataset.
pub struct LoadedModels {
    pub classifiers: Vec<(String, ClassifierModel)>,
    pub family: Option<(FamilyEntry, Vec<ClassifierModel>)>,
}

impl LoadedModels {
    pub fn load(ctx: &Context) -> Result<Self> {
        let index_path = ctx.out(MODEL_INDEX);
        if !index_path.is_file() {
            return Err(Error::InvalidInput(format!(
                "{} not found; run `train` with this config first",
                index_path.display()
            )));
        }
        let text = std::fs::read_to_string(&index_path).map_err(|e| Error::io(&index_path, e))?;
        let index: ModelIndex = serde_json::from_str(&text)?;
        let fp = ctx.dataset.dictionary().fingerprint();
        if index.dataset_fingerprint != fp {
            return Err(Error::Mismatch(format!(
                "models were trained on a dataset with dictionary fingerprint {}, the configured dataset has {fp}",
                index.dataset_fingerprint
            )));
        }
        let load = |e: &ModelEntry| -> Result<ClassifierModel> {
            let m = load_model(ctx.out(&e.file))?;
            if m.model_id() != e.model_id {
                return Err(Error::Mismatch(format!("{}: model id differs from the index", e.file)));
            }
            m.check_dataset(&ctx.dataset)?;
            Ok(m)
        };
        let mut classifiers = Vec::new();
        for spec in &ctx.config.classifiers {
            let entry = index
                .classifiers
                .iter()
                .find(|e| e.name == spec.name)
                .ok_or_else(|| Error::Mismatch(format!("classifier '{}' is not in the model index; rerun `train`", spec.name)))?;
            classifiers.push((spec.name.clone(), load(entry)?));
        }
        let family = match (&ctx.config.family, index.family) {
            (None, _) => None,
            (Some(_), None) => return Err(Error::Mismatch("the model index has no similar-model family; rerun `train`".into())),
            (Some(_), Some(f)) => {
                let models = f.members.iter().map(load).collect::<Result<Vec<_>>>()?;
                Some((f, models))
            }
        };
        Ok(Self { classifiers, family })
    }

    /// Every distinct model that needs explanations.
    pub fn distinct(&self) -> Vec<&ClassifierModel> {
        let mut out: Vec<&ClassifierModel> = Vec::new();
        let fam = self.family.iter().flat_map(|(_, ms)| ms.iter());
        for m in self.classifiers.iter().map(|(_, m)| m).chain(fam) {
            if !out.iter().any(|o| o.model_id() == m.model_id()) {
                out.push(m);
            }
        }
        out
    }

    /// Models scored for robustness, effectiveness and consistency, with
    /// report labels: the named classifiers plus the family's base member
    /// when it is not one of them.
    pub fn scored(&self) -> Vec<(String, &ClassifierModel)> {
        let mut out: Vec<(String, &ClassifierModel)> = self.classifiers.iter().map(|(n, m)| (n.clone(), m)).collect();
        if let Some((f, ms)) = &self.family {
            let base = &ms[f.base_member];
            if !out.iter().any(|(_, m)| m.model_id() == base.model_id()) {
                out.push((format!("{}[{}]", f.of, f.variation.member_label(f.base_member)), base));
            }
        }
        out
    }

    /// The designated base model: the family's base member, else the first
    /// classifier.
    pub fn base(&self) -> (String, &ClassifierModel) {
        if let Some((f, ms)) = &self.family {
            let base = &ms[f.base_member];
            let label = self
                .classifiers
                .iter()
                .find(|(_, m)| m.model_id() == base.model_id())
                .map(|(n, _)| n.clone())
                .unwrap_or_else(|| format!("{}[{}]", f.of, f.variation.member_label(f.base_member)));
            return (label, base);
        }
        let (n, m) = &self.classifiers[0];
        (n.clone(), m)
    }
}

pub fn cache_path(out_dir: &Path, kind: ExplainerKind, model_id: &str) -> PathBuf {
    out_dir.join("explanations").join(kind.as_str()).join(format!("{model_id}.jsonl"))
}
