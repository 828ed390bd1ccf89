//! Line-delimited JSON dataset files.
//!
//! The first line is a header fixing the feature dimension:
//!
//! ```text
//! {"format":"hiermargin-dataset","version":1,"feature_dim":3}
//! {"id":"s0","labels":["A","a1"],"features":[0.1,0.2,0.3]}
//! ```
//!
//! Each following non-blank line is one record with a unique `id`, a
//! root-first `labels` path and exactly `feature_dim` features.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::taxonomy::{NodeId, Taxonomy};

pub const FORMAT_NAME: &str = "hiermargin-dataset";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    feature_dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub id: String,
    pub labels: Vec<String>,
    pub features: Vec<f64>,
}

/// Samples linked to the leaves of a taxonomy.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub feature_dim: usize,
    pub records: Vec<Record>,
    /// Leaf class of each record.
    pub leaves: Vec<NodeId>,
}

impl Dataset {
    /// Validates records and builds the taxonomy from their label paths.
    pub fn from_records(feature_dim: usize, records: Vec<Record>) -> Result<(Dataset, Taxonomy)> {
        // Records handed over directly are numbered as if they followed a header.
        let mut seen = HashSet::new();
        for (k, r) in records.iter().enumerate() {
            check_record(r, feature_dim, k + 2, &mut seen)?;
        }
        let paths: Vec<&[String]> = records.iter().map(|r| r.labels.as_slice()).collect();
        let taxonomy = Taxonomy::build(&paths)?;
        let leaves = records
            .iter()
            .map(|r| taxonomy.leaf(&r.labels).expect("every record path is a leaf"))
            .collect();
        Ok((
            Dataset {
                feature_dim,
                records,
                leaves,
            },
            taxonomy,
        ))
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Record indices per leaf class, in record order.
    pub fn index_by_class(&self) -> HashMap<NodeId, Vec<usize>> {
        let mut out: HashMap<NodeId, Vec<usize>> = HashMap::new();
        for (k, leaf) in self.leaves.iter().enumerate() {
            out.entry(*leaf).or_default().push(k);
        }
        out
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.records.iter().position(|r| r.id == id)
    }

    /// Records at `indices`, keeping leaf handles into the same taxonomy.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            feature_dim: self.feature_dim,
            records: indices.iter().map(|&k| self.records[k].clone()).collect(),
            leaves: indices.iter().map(|&k| self.leaves[k]).collect(),
        }
    }

    /// Splits every class by position: the first `train_per_class` samples
    /// of a class go to the first set, the rest to the second.
    pub fn split_per_class(&self, train_per_class: usize) -> (Dataset, Dataset) {
        let mut count: HashMap<NodeId, usize> = HashMap::new();
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for (k, leaf) in self.leaves.iter().enumerate() {
            let c = count.entry(*leaf).or_default();
            if *c < train_per_class {
                a.push(k);
            } else {
                b.push(k);
            }
            *c += 1;
        }
        (self.subset(&a), self.subset(&b))
    }
}

fn check_record(r: &Record, dim: usize, line: usize, seen: &mut HashSet<String>) -> Result<()> {
    if r.labels.is_empty() {
        return Err(Error::Parse {
            line,
            message: format!("record {} has an empty label path", r.id),
        });
    }
    if r.features.len() != dim {
        return Err(Error::DimMismatch {
            line,
            id: r.id.clone(),
            expected: dim,
            got: r.features.len(),
        });
    }
    if !r.features.iter().all(|v| v.is_finite()) {
        return Err(Error::Parse {
            line,
            message: format!("record {} has non-finite features", r.id),
        });
    }
    if !seen.insert(r.id.clone()) {
        return Err(Error::DuplicateId {
            line,
            id: r.id.clone(),
        });
    }
    Ok(())
}

/// Parses dataset text. Line numbers in errors are 1-based.
pub fn parse_dataset(text: &str) -> Result<(Dataset, Taxonomy)> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let (hline, htext) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "empty file: missing header line".into(),
    })?;
    let header: Header = serde_json::from_str(htext).map_err(|e| Error::Parse {
        line: hline,
        message: format!("bad header: {e}"),
    })?;
    if header.format != FORMAT_NAME || header.version != FORMAT_VERSION {
        return Err(Error::Parse {
            line: hline,
            message: format!(
                "unsupported format {} v{} (expected {FORMAT_NAME} v{FORMAT_VERSION})",
                header.format, header.version
            ),
        });
    }
    if header.feature_dim == 0 {
        return Err(Error::Parse {
            line: hline,
            message: "feature_dim must be positive".into(),
        });
    }

    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (line, l) in lines {
        let r: Record = serde_json::from_str(l).map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        check_record(&r, header.feature_dim, line, &mut seen)?;
        records.push(r);
    }
    if records.is_empty() {
        return Err(Error::Parse {
            line: hline,
            message: "no records after header".into(),
        });
    }
    Dataset::from_records(header.feature_dim, records)
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<(Dataset, Taxonomy)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&text)
}

pub fn write_records(w: &mut impl Write, feature_dim: usize, records: &[Record]) -> std::io::Result<()> {
    let header = Header {
        format: FORMAT_NAME.into(),
        version: FORMAT_VERSION,
        feature_dim,
    };
    writeln!(w, "{}", serde_json::to_string(&header)?)?;
    for r in records {
        writeln!(w, "{}", serde_json::to_string(r)?)?;
    }
    Ok(())
}

pub fn save_records(path: impl AsRef<Path>, feature_dim: usize, records: &[Record]) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_records(&mut w, feature_dim, records)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}
