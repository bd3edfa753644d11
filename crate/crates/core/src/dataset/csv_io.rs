use std::collections::BTreeSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{natural_cmp, DictionaryEntry, FeatureDictionary, FeatureVector, LabeledDataset};
use crate::{Error, Result};

const ID_COLUMN: &str = "sample_id";
const LABEL_COLUMN: &str = "label";

/// Load a dataset from `sample_id,label,<features...>` CSV.
pub fn load_csv(path: impl AsRef<Path>) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, &path.display().to_string())
}

/// Load a dataset and take feature kinds from a JSON sidecar `[{name, kind}]`.
pub fn load_csv_with_dictionary(csv_path: impl AsRef<Path>, sidecar: impl AsRef<Path>) -> Result<LabeledDataset> {
    let ds = load_csv(csv_path)?;
    let entries = load_dictionary_sidecar(sidecar)?;
    ds.with_dictionary_sidecar(&entries)
}

pub fn load_dictionary_sidecar(path: impl AsRef<Path>) -> Result<Vec<DictionaryEntry>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Load {
        path: path.display().to_string(),
        row: e.line(),
        column: format!("char {}", e.column()),
        message: e.to_string(),
    })
}

/// Parse CSV from any reader. `source` names the input in error messages.
pub fn read_csv<R: Read>(reader: R, source: &str) -> Result<LabeledDataset> {
    let load_err = |row: usize, column: &str, message: String| Error::Load {
        path: source.to_string(),
        row,
        column: column.to_string(),
        message,
    };

    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();

    let header = match records.next() {
        Some(rec) => rec.map_err(|e| load_err(1, "-", e.to_string()))?,
        None => return Err(load_err(1, "-", "empty file".into())),
    };
    if header.len() < 3 || &header[0] != ID_COLUMN || &header[1] != LABEL_COLUMN {
        return Err(load_err(
            1,
            "-",
            format!("header must be '{ID_COLUMN},{LABEL_COLUMN},<feature names...>' with at least one feature"),
        ));
    }
    let feature_names: Vec<String> = header.iter().skip(2).map(str::to_string).collect();
    let mut seen = BTreeSet::new();
    for (j, name) in feature_names.iter().enumerate() {
        if name.is_empty() {
            return Err(load_err(1, &format!("#{}", j + 3), "empty feature name".into()));
        }
        if !seen.insert(name.as_str()) {
            return Err(load_err(1, name, format!("duplicate feature name '{name}'")));
        }
    }
    let dictionary = FeatureDictionary::synthetic(feature_names)?;
    let d = dictionary.len();

    let mut samples = Vec::new();
    let mut raw_labels: Vec<String> = Vec::new();
    let mut sample_ids = Vec::new();
    let mut id_set = BTreeSet::new();
    for rec in records {
        let rec = rec.map_err(|e| {
            let row = e.position().map_or(0, |p| p.line() as usize);
            load_err(row, "-", e.to_string())
        })?;
        let row = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != d + 2 {
            return Err(load_err(row, "-", format!("expected {} cells, found {}", d + 2, rec.len())));
        }
        let id = rec[0].to_string();
        if id.is_empty() {
            return Err(load_err(row, ID_COLUMN, "empty sample id".into()));
        }
        if !id_set.insert(id.clone()) {
            return Err(load_err(row, ID_COLUMN, format!("duplicate sample id '{id}'")));
        }
        if rec[1].is_empty() {
            return Err(load_err(row, LABEL_COLUMN, "empty label".into()));
        }
        let mut bits = Vec::with_capacity(d);
        for j in 0..d {
            let cell = &rec[j + 2];
            match cell {
                "0" => bits.push(0),
                "1" => bits.push(1),
                other => {
                    return Err(load_err(
                        row,
                        dictionary.name(j),
                        format!("non-binary value '{other}'"),
                    ))
                }
            }
        }
        samples.push(FeatureVector(bits));
        raw_labels.push(rec[1].to_string());
        sample_ids.push(id);
    }

    let mut label_names: Vec<String> = raw_labels.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    label_names.sort_by(|a, b| natural_cmp(a, b));
    let labels = raw_labels
        .iter()
        .map(|l| label_names.iter().position(|n| n == l).unwrap())
        .collect();
    if label_names.is_empty() {
        return Err(load_err(2, LABEL_COLUMN, "file contains no samples".into()));
    }
    LabeledDataset::new(dictionary, samples, labels, label_names, sample_ids)
}

pub fn write_csv(ds: &LabeledDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_csv_to(ds, &mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_csv_to<W: Write>(ds: &LabeledDataset, writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    let mut header = vec![ID_COLUMN.to_string(), LABEL_COLUMN.to_string()];
    header.extend(ds.dictionary().names().iter().cloned());
    w.write_record(&header)?;
    for i in 0..ds.len() {
        let mut row = Vec::with_capacity(ds.n_features() + 2);
        row.push(ds.sample_id(i).to_string());
        row.push(ds.label_names()[ds.label(i)].clone());
        row.extend(ds.sample(i).bits().iter().map(|b| if *b == 1 { "1".to_string() } else { "0".to_string() }));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<LabeledDataset> {
        read_csv(text.as_bytes(), "test.csv")
    }

    #[test]
    fn parses_small_file() {
        let ds = parse("sample_id,label,f0,f1\na,benign,0,1\nb,malicious,1,1\nc,benign,0,0\n").unwrap();
        assert_eq!(ds.n_features(), 2);
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.label_names(), &["benign".to_string(), "malicious".to_string()]);
        assert_eq!(ds.labels(), &[0, 1, 0]);
        assert_eq!(ds.sample(1).bits(), &[1, 1]);
    }

    #[test]
    fn non_binary_cell_names_row_and_column() {
        let err = parse("sample_id,label,f0,f1\na,benign,0,1\nb,malicious,2,1\n").unwrap_err();
        match err {
            Error::Load { row, column, .. } => {
                assert_eq!(row, 3);
                assert_eq!(column, "f0");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_headers_and_duplicates() {
        assert!(parse("id,label,f0\na,x,0\n").is_err());
        assert!(parse("sample_id,label\na,x\n").is_err());
        let dup_feature = parse("sample_id,label,f0,f0\na,x,0,1\n").unwrap_err();
        assert!(dup_feature.to_string().contains("duplicate feature"));
        let dup_id = parse("sample_id,label,f0\na,x,0\na,y,1\n").unwrap_err();
        assert!(matches!(dup_id, Error::Load { row: 3, .. }));
        assert!(parse("sample_id,label,f0\na,x,0,1\n").is_err());
        assert!(parse("").is_err());
    }

    #[test]
    fn class_index_independent_of_row_order() {
        let ds = parse("sample_id,label,f0\na,malicious,1\nb,benign,0\n").unwrap();
        assert_eq!(ds.labels(), &[1, 0]);
    }
}
