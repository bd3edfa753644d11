//! Binary-feature labeled datasets: types, CSV ingestion, splits and
//! planted-rule synthetic generation.

mod csv_io;
mod split;
mod synth;

use std::cmp::Ordering;
use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::util::sha256_hex;
use crate::{Error, Result};

pub use csv_io::{load_csv, load_csv_with_dictionary, load_dictionary_sidecar, read_csv, write_csv, write_csv_to};
pub use split::{split_per_class, split_random, Split};
pub use synth::{generate_synthetic, Conjunction, SyntheticSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Api,
    Permission,
    Intent,
    Synthetic,
}

/// Entry of the optional dictionary sidecar file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DictionaryEntry {
    pub name: String,
    pub kind: FeatureKind,
}

/// Named feature space shared by a dataset and every model trained on it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureDictionary {
    names: Vec<String>,
    kinds: Vec<FeatureKind>,
}

impl FeatureDictionary {
    pub fn new(names: Vec<String>, kinds: Vec<FeatureKind>) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::InvalidInput("feature dictionary must contain at least one feature".into()));
        }
        if names.len() != kinds.len() {
            return Err(Error::InvalidInput(format!(
                "{} feature names but {} kinds",
                names.len(),
                kinds.len()
            )));
        }
        let mut seen = HashSet::with_capacity(names.len());
        for n in &names {
            if !seen.insert(n.as_str()) {
                return Err(Error::InvalidInput(format!("duplicate feature name '{n}'")));
            }
        }
        Ok(Self { names, kinds })
    }

    /// All features of kind `synthetic`.
    pub fn synthetic(names: Vec<String>) -> Result<Self> {
        let kinds = vec![FeatureKind::Synthetic; names.len()];
        Self::new(names, kinds)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn kinds(&self) -> &[FeatureKind] {
        &self.kinds
    }

    pub fn name(&self, index: usize) -> &str {
        &self.names[index]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Content hash of the ordered feature names. Kinds are display metadata
    /// and do not participate.
    pub fn fingerprint(&self) -> String {
        sha256_hex(self.names.join("\n").as_bytes())[..32].to_string()
    }

    /// Replace kinds with those listed in a sidecar. Every feature must be listed.
    pub fn with_sidecar(mut self, entries: &[DictionaryEntry]) -> Result<Self> {
        if entries.len() != self.names.len() {
            return Err(Error::InvalidInput(format!(
                "dictionary sidecar lists {} features, dataset has {}",
                entries.len(),
                self.names.len()
            )));
        }
        for e in entries {
            let idx = self.index_of(&e.name).ok_or_else(|| {
                Error::InvalidInput(format!("dictionary sidecar names unknown feature '{}'", e.name))
            })?;
            self.kinds[idx] = e.kind;
        }
        Ok(self)
    }
}

/// A `d`-dimensional vector over {0,1}.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<u8>", into = "Vec<u8>")]
pub struct FeatureVector(pub(crate) Vec<u8>);

impl FeatureVector {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if let Some(pos) = bits.iter().position(|&b| b > 1) {
            return Err(Error::InvalidInput(format!(
                "feature vector element {pos} is {}, expected 0 or 1",
                bits[pos]
            )));
        }
        Ok(Self(bits))
    }

    pub fn zeros(d: usize) -> Self {
        Self(vec![0; d])
    }

    pub fn from_bools(bits: impl IntoIterator<Item = bool>) -> Self {
        Self(bits.into_iter().map(u8::from).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn get(&self, i: usize) -> u8 {
        self.0[i]
    }

    pub fn set(&mut self, i: usize, bit: bool) {
        self.0[i] = u8::from(bit);
    }

    pub fn flip(&mut self, i: usize) {
        self.0[i] ^= 1;
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&b| b == 1).count()
    }

    pub fn hamming(&self, other: &FeatureVector) -> usize {
        self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count()
    }

    /// Bitwise complement.
    pub fn complement(&self) -> Self {
        Self(self.0.iter().map(|b| b ^ 1).collect())
    }
}

impl TryFrom<Vec<u8>> for FeatureVector {
    type Error = Error;

    fn try_from(bits: Vec<u8>) -> Result<Self> {
        Self::new(bits)
    }
}

impl From<FeatureVector> for Vec<u8> {
    fn from(v: FeatureVector) -> Self {
        v.0
    }
}

impl AsRef<[u8]> for FeatureVector {
    fn as_ref(&self) -> &[u8] {
        &self.0
    }
}

/// Samples, class labels and sample identifiers over one dictionary.
///
/// Class names are kept in natural order (digit runs compare numerically),
/// so the class index of a name does not depend on row order in a file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    dictionary: FeatureDictionary,
    samples: Vec<FeatureVector>,
    labels: Vec<usize>,
    label_names: Vec<String>,
    sample_ids: Vec<String>,
}

impl LabeledDataset {
    pub fn new(
        dictionary: FeatureDictionary,
        samples: Vec<FeatureVector>,
        labels: Vec<usize>,
        label_names: Vec<String>,
        sample_ids: Vec<String>,
    ) -> Result<Self> {
        if samples.len() != labels.len() || samples.len() != sample_ids.len() {
            return Err(Error::InvalidInput(format!(
                "{} samples, {} labels, {} sample ids",
                samples.len(),
                labels.len(),
                sample_ids.len()
            )));
        }
        if label_names.is_empty() {
            return Err(Error::InvalidInput("at least one class name is required".into()));
        }
        for w in label_names.windows(2) {
            if natural_cmp(&w[0], &w[1]) != Ordering::Less {
                return Err(Error::InvalidInput(format!(
                    "class names must be distinct and in natural order ('{}' before '{}')",
                    w[0], w[1]
                )));
            }
        }
        let d = dictionary.len();
        for (i, s) in samples.iter().enumerate() {
            if s.len() != d {
                return Err(Error::InvalidInput(format!(
                    "sample {} has {} features, dictionary has {d}",
                    sample_ids[i],
                    s.len()
                )));
            }
        }
        if let Some(i) = labels.iter().position(|&l| l >= label_names.len()) {
            return Err(Error::InvalidInput(format!(
                "sample {} has label index {} but only {} classes",
                sample_ids[i],
                labels[i],
                label_names.len()
            )));
        }
        let mut seen = HashSet::with_capacity(sample_ids.len());
        for id in &sample_ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::InvalidInput(format!("duplicate sample id '{id}'")));
            }
        }
        Ok(Self {
            dictionary,
            samples,
            labels,
            label_names,
            sample_ids,
        })
    }

    pub fn dictionary(&self) -> &FeatureDictionary {
        &self.dictionary
    }

    pub fn samples(&self) -> &[FeatureVector] {
        &self.samples
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label_names(&self) -> &[String] {
        &self.label_names
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Feature count `d`.
    pub fn n_features(&self) -> usize {
        self.dictionary.len()
    }

    pub fn n_classes(&self) -> usize {
        self.label_names.len()
    }

    pub fn sample(&self, i: usize) -> &FeatureVector {
        &self.samples[i]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn sample_id(&self, i: usize) -> &str {
        &self.sample_ids[i]
    }

    /// Sample indices grouped by class, each group in dataset order.
    pub fn class_indices(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.n_classes()];
        for (i, &l) in self.labels.iter().enumerate() {
            groups[l].push(i);
        }
        groups
    }

    /// Replace feature kinds from a sidecar dictionary.
    pub fn with_dictionary_sidecar(mut self, entries: &[DictionaryEntry]) -> Result<Self> {
        self.dictionary = self.dictionary.with_sidecar(entries)?;
        Ok(self)
    }
}

/// Ordering where runs of ASCII digits compare by numeric value, so that
/// `class_2 < class_10`.
pub fn natural_cmp(a: &str, b: &str) -> Ordering {
    let (mut ai, mut bi) = (a.char_indices().peekable(), b.char_indices().peekable());
    loop {
        match (ai.peek().copied(), bi.peek().copied()) {
            (None, None) => return a.cmp(b),
            (None, Some(_)) => return Ordering::Less,
            (Some(_), None) => return Ordering::Greater,
            (Some((sa, ca)), Some((sb, cb))) => {
                if ca.is_ascii_digit() && cb.is_ascii_digit() {
                    let ea = digit_run_end(a, sa);
                    let eb = digit_run_end(b, sb);
                    let na = a[sa..ea].trim_start_matches('0');
                    let nb = b[sb..eb].trim_start_matches('0');
                    let ord = na.len().cmp(&nb.len()).then_with(|| na.cmp(nb));
                    if ord != Ordering::Equal {
                        return ord;
                    }
                    while ai.peek().is_some_and(|&(i, _)| i < ea) {
                        ai.next();
                    }
                    while bi.peek().is_some_and(|&(i, _)| i < eb) {
                        bi.next();
                    }
                } else {
                    if ca != cb {
                        return ca.cmp(&cb);
                    }
                    ai.next();
                    bi.next();
                }
            }
        }
    }
}

fn digit_run_end(s: &str, start: usize) -> usize {
    s[start..]
        .find(|c: char| !c.is_ascii_digit())
        .map_or(s.len(), |off| start + off)
}
