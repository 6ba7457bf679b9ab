//! On-disk format for fitted models and pools.
//!
//! An artifact is JSON Lines: the first line is a header naming the format
//! and version, and every following line is one serialized member model.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classifiers::Model;
use crate::error::{Error, Result};
use crate::pool::{BalanceMode, BaseKind, ClassifierPool, Provenance};

pub const POOL_FORMAT: &str = "imbalanced-ds/pool";
pub const MODEL_FORMAT: &str = "imbalanced-ds/model";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactHeader {
    pub format: String,
    pub version: u32,
    pub base_kind: Option<BaseKind>,
    pub n: usize,
    pub balance: Option<BalanceMode>,
    /// Bootstrap seed per member.
    pub seeds: Vec<u64>,
    pub provenance: Vec<Provenance>,
}

fn write_lines(path: &Path, header: &ArtifactHeader, members: &[Model]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let ser = |e: serde_json::Error| Error::Serde(e.to_string());
    serde_json::to_writer(&mut out, header).map_err(ser)?;
    out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    for m in members {
        serde_json::to_writer(&mut out, m).map_err(ser)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

fn read_lines(path: &Path, expected_format: &str) -> Result<(ArtifactHeader, Vec<Model>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let first = lines
        .next()
        .ok_or_else(|| Error::Serde(format!("{} is empty", path.display())))?
        .map_err(|e| Error::io(path, e))?;
    let header: ArtifactHeader =
        serde_json::from_str(&first).map_err(|e| Error::Serde(format!("bad header: {e}")))?;
    if header.format != expected_format {
        return Err(Error::Serde(format!(
            "expected a {expected_format} artifact, found {}",
            header.format
        )));
    }
    if header.version != FORMAT_VERSION {
        return Err(Error::Serde(format!(
            "unsupported artifact version {} (this build reads {FORMAT_VERSION})",
            header.version
        )));
    }
    let mut members = Vec::with_capacity(header.n);
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        members.push(
            serde_json::from_str(&line).map_err(|e| Error::Serde(format!("member {i}: {e}")))?,
        );
    }
    if members.len() != header.n {
        return Err(Error::Serde(format!(
            "header announces {} members, file holds {}",
            header.n,
            members.len()
        )));
    }
    Ok((header, members))
}

pub fn save_pool(pool: &ClassifierPool, path: impl AsRef<Path>) -> Result<()> {
    let header = ArtifactHeader {
        format: POOL_FORMAT.into(),
        version: FORMAT_VERSION,
        base_kind: Some(pool.base_kind()),
        n: pool.len(),
        balance: Some(pool.balance()),
        seeds: pool.provenance().iter().map(|p| p.bootstrap_seed).collect(),
        provenance: pool.provenance().to_vec(),
    };
    write_lines(path.as_ref(), &header, pool.members())
}

pub fn load_pool(path: impl AsRef<Path>) -> Result<ClassifierPool> {
    let (header, members) = read_lines(path.as_ref(), POOL_FORMAT)?;
    let base_kind = header
        .base_kind
        .ok_or_else(|| Error::Serde("pool header lacks base_kind".into()))?;
    let balance = header.balance.unwrap_or(BalanceMode::None);
    ClassifierPool::new(members, header.provenance, base_kind, balance)
}

pub fn save_model(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    let header = ArtifactHeader {
        format: MODEL_FORMAT.into(),
        version: FORMAT_VERSION,
        base_kind: None,
        n: 1,
        balance: None,
        seeds: Vec::new(),
        provenance: Vec::new(),
    };
    write_lines(path.as_ref(), &header, std::slice::from_ref(model))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Model> {
    let (_, mut members) = read_lines(path.as_ref(), MODEL_FORMAT)?;
    Ok(members.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::Classifier;
    use crate::pool::{build_pool, PoolConfig};
    use crate::synthetic::{gaussian_blobs, BlobConfig};

    #[test]
    fn pool_round_trip_and_version_check() {
        let d = gaussian_blobs(&BlobConfig {
            n: 200,
            imbalance_ratio: 4.0,
            ..Default::default()
        })
        .unwrap();
        let pool = build_pool(
            &d,
            &PoolConfig {
                n: 4,
                balance: BalanceMode::Bbb,
                ..Default::default()
            },
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pool.jsonl");
        save_pool(&pool, &path).unwrap();
        let back = load_pool(&path).unwrap();
        assert_eq!(back, pool);

        assert!(load_model(&path).is_err());
        let text = std::fs::read_to_string(&path).unwrap();
        std::fs::write(&path, text.replacen("\"version\":1", "\"version\":99", 1)).unwrap();
        assert!(load_pool(&path).is_err());

        let model_path = dir.path().join("model.jsonl");
        save_model(pool.member(0), &model_path).unwrap();
        let m = load_model(&model_path).unwrap();
        assert_eq!(m.predict(d.row(0)), pool.member(0).predict(d.row(0)));
    }
}
