use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classifiers::{Hyperparams, TrainConfig, Variation};
use crate::dataset::SyntheticSpec;
use crate::explain::{ExplainerKind, ExplainerParams};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSource {
    Csv {
        path: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dictionary: Option<PathBuf>,
    },
    Synthetic(SyntheticSpec),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum SplitPolicy {
    Random {
        #[serde(default = "half")]
        train_fraction: f64,
    },
    PerClass,
}

fn half() -> f64 {
    0.5
}

impl Default for SplitPolicy {
    fn default() -> Self {
        SplitPolicy::Random { train_fraction: 0.5 }
    }
}

/// A named classifier. Its seed defaults to the experiment seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    pub name: String,
    #[serde(flatten)]
    pub hyperparams: Hyperparams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ClassifierSpec {
    pub fn train_config(&self, experiment_seed: u64) -> TrainConfig {
        TrainConfig {
            hyperparams: self.hyperparams.clone(),
            seed: self.seed.unwrap_or(experiment_seed),
        }
    }
}

/// Similar-model family derived from one named classifier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    /// Name of the classifier whose configuration is varied.
    pub of: String,
    pub variation: Variation,
    /// Member used for robustness and effectiveness; defaults to the member
    /// whose varied value equals the classifier's own.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_member: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSpec {
    pub samples: usize,
}

impl Default for BenchSpec {
    fn default() -> Self {
        Self { samples: 20 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Dataset label used in reports.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub dataset: DatasetSource,
    #[serde(default)]
    pub split: SplitPolicy,
    pub classifiers: Vec<ClassifierSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<FamilySpec>,
    pub explainers: Vec<ExplainerKind>,
    #[serde(default)]
    pub explainer_params: ExplainerParams,
    #[serde(default = "default_k_range")]
    pub k_range: [usize; 2],
    #[serde(default = "default_neighbor_cap")]
    pub neighbor_cap: usize,
    /// Explain only the first `n` test samples (by dataset order).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explain_limit: Option<usize>,
    #[serde(default = "default_effective_k")]
    pub effective_k: usize,
    #[serde(default = "default_ig_top_n")]
    pub ig_top_n: usize,
    #[serde(default)]
    pub bench: BenchSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
}

fn default_k_range() -> [usize; 2] {
    [1, 20]
}

fn default_neighbor_cap() -> usize {
    200
}

fn default_effective_k() -> usize {
    5
}

fn default_ig_top_n() -> usize {
    20
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    /// Read a JSON config; relative paths inside it are taken relative to
    /// the config file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(vec![format!("cannot read config {}: {e}", path.display())]))?;
        let mut cfg: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| Error::Config(vec![format!("{}: {e}", path.display())]))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let DatasetSource::Csv { path, dictionary } = &mut self.dataset {
            fix(path);
            if let Some(d) = dictionary {
                fix(d);
            }
        }
        fix(&mut self.out_dir);
    }

    pub fn dataset_name(&self) -> String {
        if let Some(n) = &self.name {
            return n.clone();
        }
        match &self.dataset {
            DatasetSource::Csv { path, .. } => path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "dataset".into()),
            DatasetSource::Synthetic(_) => "synthetic".into(),
        }
    }

    pub fn classifier(&self, name: &str) -> Option<&ClassifierSpec> {
        self.classifiers.iter().find(|c| c.name == name)
    }

    pub fn ks(&self) -> Vec<usize> {
        (self.k_range[0]..=self.k_range[1]).collect()
    }

    /// Every problem with the configuration that can be seen without
    /// loading data.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        match &self.dataset {
            DatasetSource::Csv { path, dictionary } => {
                if !path.is_file() {
                    v.push(format!("dataset file {} does not exist", path.display()));
                }
                if let Some(d) = dictionary {
                    if !d.is_file() {
                        v.push(format!("dictionary file {} does not exist", d.display()));
                    }
                }
            }
            DatasetSource::Synthetic(spec) => v.extend(spec.violations().into_iter().map(|s| format!("synthetic: {s}"))),
        }
        if let SplitPolicy::Random { train_fraction } = self.split {
            if !(train_fraction > 0.0 && train_fraction < 1.0) {
                v.push(format!("split.train_fraction must be in (0, 1), got {train_fraction}"));
            }
        }
        if self.classifiers.is_empty() {
            v.push("at least one classifier is required".into());
        }
        let mut names = HashSet::new();
        for c in &self.classifiers {
            if c.name.is_empty() || c.name.contains(['/', '\\']) {
                v.push(format!("classifier name '{}' must be non-empty and contain no path separators", c.name));
            }
            if !names.insert(&c.name) {
                v.push(format!("duplicate classifier name '{}'", c.name));
            }
            v.extend(
                c.train_config(self.seed)
                    .violations()
                    .into_iter()
                    .map(|s| format!("classifier '{}': {s}", c.name)),
            );
        }
        if let Some(f) = &self.family {
            match self.classifier(&f.of) {
                None => v.push(format!("family.of names unknown classifier '{}'", f.of)),
                Some(c) => {
                    let cfg = c.train_config(self.seed);
                    if f.variation.len() < 2 {
                        v.push(format!("family needs at least 2 members, got {}", f.variation.len()));
                    } else if let Err(e) = f.variation.member_config(&cfg, 0) {
                        v.push(format!("family: {e}"));
                    } else {
                        match f.base_member {
                            Some(b) if b >= f.variation.len() => {
                                v.push(format!("family.base_member {b} out of range (family has {} members)", f.variation.len()))
                            }
                            None if f.variation.matching_member(&cfg).is_none() => v.push(format!(
                                "family: no member matches classifier '{}'; set family.base_member",
                                f.of
                            )),
                            _ => {}
                        }
                    }
                }
            }
        }
        if self.explainers.is_empty() {
            v.push("at least one explainer is required".into());
        }
        let mut seen = HashSet::new();
        for k in &self.explainers {
            if !seen.insert(k) {
                v.push(format!("explainer '{k}' listed twice"));
            }
        }
        v.extend(self.explainer_params.violations());
        let [lo, hi] = self.k_range;
        if lo == 0 || lo > hi {
            v.push(format!("k_range [{lo}, {hi}] must satisfy 1 <= min <= max"));
        }
        if let DatasetSource::Synthetic(spec) = &self.dataset {
            if hi > spec.d {
                v.push(format!("k_range max {hi} exceeds the feature count {}", spec.d));
            }
        }
        if self.neighbor_cap == 0 {
            v.push("neighbor_cap must be >= 1".into());
        }
        if self.effective_k == 0 {
            v.push("effective_k must be >= 1".into());
        }
        if self.explain_limit == Some(0) {
            v.push("explain_limit must be >= 1 when set".into());
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v))
        }
    }
}
