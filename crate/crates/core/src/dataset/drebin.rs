use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::Path;

use super::{Dataset, Label, SparseRow};
use crate::error::{Error, Result};

/// Builds a one-hot dataset from a Drebin-style corpus.
///
/// `feature_dir` holds one text file per application, named by its hash, with
/// one `category::feature` string per line. `label_manifest` is a CSV whose
/// `sha256` column lists the malware samples; every other file is benign.
/// Only feature strings seen in at least `min_feature_count` applications
/// become columns. Rows follow file-name order and columns are sorted
/// lexicographically, so repeated ingests are identical.
pub fn ingest_drebin(
    feature_dir: impl AsRef<Path>,
    label_manifest: impl AsRef<Path>,
    min_feature_count: usize,
) -> Result<Dataset> {
    let feature_dir = feature_dir.as_ref();
    let label_manifest = label_manifest.as_ref();
    if min_feature_count == 0 {
        return Err(Error::Config("min_feature_count must be at least 1".into()));
    }

    let malware = read_manifest(label_manifest)?;

    let mut apps: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    let entries = fs::read_dir(feature_dir).map_err(|e| Error::io(feature_dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(feature_dir, e))?;
        let path = entry.path();
        if !path.is_file() {
            continue;
        }
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else {
            continue;
        };
        if stem.starts_with('.') {
            continue;
        }
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let features = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(str::to_string)
            .collect();
        apps.insert(stem.to_string(), features);
    }

    if let Some(missing) = malware.iter().find(|id| !apps.contains_key(*id)) {
        return Err(Error::Consistency(format!(
            "manifest lists {missing} but no feature file exists for it in {}",
            feature_dir.display()
        )));
    }

    let mut document_frequency: BTreeMap<&str, usize> = BTreeMap::new();
    for features in apps.values() {
        for f in features {
            *document_frequency.entry(f.as_str()).or_default() += 1;
        }
    }
    // BTreeMap iteration is already lexicographic.
    let vocabulary: Vec<String> = document_frequency
        .into_iter()
        .filter(|(_, n)| *n >= min_feature_count)
        .map(|(f, _)| f.to_string())
        .collect();
    if vocabulary.is_empty() {
        return Err(Error::Config(format!(
            "no feature occurs in {min_feature_count} or more applications"
        )));
    }

    let mut rows = Vec::with_capacity(apps.len());
    let mut labels = Vec::with_capacity(apps.len());
    for (id, features) in &apps {
        // Both sides are sorted, so the binary search yields increasing columns.
        let columns: Vec<u32> = features
            .iter()
            .filter_map(|f| vocabulary.binary_search(f).ok().map(|c| c as u32))
            .collect();
        rows.push(SparseRow::binary(columns));
        labels.push(if malware.contains(id) {
            Label::Positive
        } else {
            Label::Negative
        });
    }

    let n = vocabulary.len();
    Dataset::new(rows, labels, n)?.with_vocabulary(vocabulary)
}

fn read_manifest(path: &Path) -> Result<HashSet<String>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(file);
    let header = reader.headers().map_err(|e| Error::Parse {
        row: 1,
        column: 0,
        message: e.to_string(),
    })?;
    let column = header
        .iter()
        .position(|h| h.trim().eq_ignore_ascii_case("sha256"))
        .ok_or_else(|| Error::Parse {
            row: 1,
            column: 0,
            message: format!("manifest {} has no sha256 column", path.display()),
        })?;
    let mut ids = HashSet::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            row: i + 2,
            column: 0,
            message: e.to_string(),
        })?;
        if let Some(id) = record.get(column).map(str::trim).filter(|s| !s.is_empty()) {
            ids.insert(id.to_string());
        }
    }
    Ok(ids)
}
