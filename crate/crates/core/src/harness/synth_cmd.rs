use std::path::{Path, PathBuf};

use super::report::{ensure_parent, write_json};
use crate::dataset::{generate_synthetic, write_csv, SyntheticSpec};
use crate::{Error, Result};

/// Generate the dataset described by a synthetic spec file into
/// `out_dir/dataset.csv`, returning that path. `seed` overrides the spec's.
pub fn cmd_synth(spec_path: &Path, out_dir: &Path, seed: Option<u64>) -> Result<PathBuf> {
    let text = std::fs::read_to_string(spec_path)
        .map_err(|e| Error::Config(vec![format!("cannot read spec {}: {e}", spec_path.display())]))?;
    let mut spec: SyntheticSpec =
        serde_json::from_str(&text).map_err(|e| Error::Config(vec![format!("{}: {e}", spec_path.display())]))?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    let ds = generate_synthetic(&spec)?;
    let path = out_dir.join("dataset.csv");
    ensure_parent(&path)?;
    write_csv(&ds, &path)?;
    write_json(&out_dir.join("synthetic_spec.effective.json"), &spec)?;
    log::info!("wrote {} samples x {} features to {}", ds.len(), ds.n_features(), path.display());
    Ok(path)
}
