//! Line-delimited JSON snapshot files.
//!
//! The first line is a header naming the format version, the graph hash and how many of
//! the records belong to the training split. Each following line is one snapshot.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cascade::{Cascade, Dataset, Snapshot};
use crate::error::{Error, Result};

pub const SNAPSHOT_FORMAT: &str = "rumor-source-snapshots";
pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotHeader {
    pub format: String,
    pub version: u32,
    pub graph_hash: String,
    pub nodes: usize,
    pub count: usize,
    /// Records `0..train` form the training split.
    pub train: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SnapshotRecord {
    version: u32,
    graph_hash: String,
    sources: Vec<usize>,
    /// 1 for positive, 0 for negative (ground truth, before masking).
    states: Vec<u8>,
    timestamps: Vec<i64>,
    spreaders: Vec<i64>,
    probs: Vec<f64>,
    psi: Vec<usize>,
    delta: f64,
    theta: f64,
    halted_at_theta: bool,
    retries: usize,
}

impl SnapshotRecord {
    fn from_snapshot(s: &Snapshot, graph_hash: &str) -> Self {
        let c = &s.cascade;
        SnapshotRecord {
            version: SNAPSHOT_VERSION,
            graph_hash: graph_hash.to_string(),
            sources: c.sources.clone(),
            states: c.positive.iter().map(|&p| p as u8).collect(),
            timestamps: c.timestamp.clone(),
            spreaders: c.spreader.clone(),
            probs: c.probs.clone(),
            psi: s.masked.clone(),
            delta: s.delta,
            theta: s.theta,
            halted_at_theta: c.halted_at_theta,
            retries: s.retries,
        }
    }

    fn into_snapshot(self, n: usize) -> Result<Snapshot> {
        let lengths = [self.states.len(), self.timestamps.len(), self.spreaders.len(), self.probs.len()];
        if lengths.iter().any(|&l| l != n) {
            return Err(Error::Schema(format!("per-node arrays have lengths {lengths:?}, header says {n} nodes")));
        }
        if self.states.iter().any(|&s| s > 1) {
            return Err(Error::Schema("states must be 0 or 1".into()));
        }
        if let Some(&v) = self.sources.iter().find(|&&v| v >= n) {
            return Err(Error::NodeOutOfRange { node: v, n });
        }
        let cascade = Cascade {
            sources: self.sources,
            positive: self.states.iter().map(|&s| s == 1).collect(),
            timestamp: self.timestamps,
            spreader: self.spreaders,
            probs: self.probs,
            halted_at_theta: self.halted_at_theta,
        };
        Snapshot::new(cascade, self.psi, self.delta, self.theta, self.retries)
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string(value).map_err(|e| Error::Schema(e.to_string()))
}

fn render_dataset(dataset: &Dataset, graph_hash: &str, nodes: usize) -> Result<String> {
    let header = SnapshotHeader {
        format: SNAPSHOT_FORMAT.into(),
        version: SNAPSHOT_VERSION,
        graph_hash: graph_hash.into(),
        nodes,
        count: dataset.train.len() + dataset.test.len(),
        train: dataset.train.len(),
    };
    let mut text = to_json(&header)?;
    text.push('\n');
    for s in dataset.train.iter().chain(&dataset.test) {
        if s.n() != nodes {
            return Err(Error::Shape(format!("snapshot has {} nodes, graph has {nodes}", s.n())));
        }
        writeln!(text, "{}", to_json(&SnapshotRecord::from_snapshot(s, graph_hash))?).expect("write to string");
    }
    Ok(text)
}

/// Writes `train` followed by `test`.
pub fn save_dataset(path: impl AsRef<Path>, dataset: &Dataset, graph_hash: &str, nodes: usize) -> Result<()> {
    let path = path.as_ref();
    let text = render_dataset(dataset, graph_hash, nodes)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// SHA-256 (hex) of the file [`save_dataset`] would write.
pub fn dataset_hash(dataset: &Dataset, graph_hash: &str) -> String {
    let nodes = dataset.train.first().or(dataset.test.first()).map_or(0, Snapshot::n);
    let text = render_dataset(dataset, graph_hash, nodes).expect("snapshots share one node count");
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Writes a plain snapshot list (all records count as training data).
pub fn save_snapshots(path: impl AsRef<Path>, snapshots: &[Snapshot], graph_hash: &str, nodes: usize) -> Result<()> {
    let dataset = Dataset {
        train: snapshots.to_vec(),
        test: Vec::new(),
    };
    save_dataset(path, &dataset, graph_hash, nodes)
}

/// Reads a snapshot file, returning its header and the records split by `header.train`.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<(SnapshotHeader, Dataset)> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines().enumerate();
    let parse = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let (_, first) = lines
        .next()
        .ok_or_else(|| Error::EmptyInput(format!("{} has no header line", path.display())))?;
    let first = first.map_err(|e| Error::io(path, e))?;
    let header: SnapshotHeader = serde_json::from_str(&first).map_err(|e| parse(1, e.to_string()))?;
    if header.format != SNAPSHOT_FORMAT {
        return Err(Error::Schema(format!("{}: not a snapshot file ({:?})", path.display(), header.format)));
    }
    if header.version != SNAPSHOT_VERSION {
        return Err(Error::Schema(format!(
            "{}: snapshot file version {} (supported: {SNAPSHOT_VERSION})",
            path.display(),
            header.version
        )));
    }
    let mut all = Vec::with_capacity(header.count);
    for (i, line) in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: SnapshotRecord = serde_json::from_str(&line).map_err(|e| parse(i + 1, e.to_string()))?;
        if record.version != SNAPSHOT_VERSION {
            return Err(Error::Schema(format!(
                "{}:{}: record version {} (supported: {SNAPSHOT_VERSION})",
                path.display(),
                i + 1,
                record.version
            )));
        }
        if record.graph_hash != header.graph_hash {
            return Err(Error::GraphHashMismatch {
                expected: header.graph_hash.clone(),
                found: record.graph_hash,
            });
        }
        all.push(record.into_snapshot(header.nodes).map_err(|e| e.context(format!("{}:{}", path.display(), i + 1)))?);
    }
    if all.len() != header.count || header.train > header.count {
        return Err(Error::Schema(format!(
            "{}: header announces {} records ({} train), found {}",
            path.display(),
            header.count,
            header.train,
            all.len()
        )));
    }
    let test = all.split_off(header.train);
    Ok((header, Dataset { train: all, test }))
}

/// Reads every record of a snapshot file as one list.
pub fn load_snapshots(path: impl AsRef<Path>) -> Result<(SnapshotHeader, Vec<Snapshot>)> {
    let (header, mut d) = load_dataset(path)?;
    d.train.append(&mut d.test);
    Ok((header, d.train))
}

/// Fails unless the file was generated for the graph with `expected_hash`.
pub fn check_graph_hash(header: &SnapshotHeader, expected_hash: &str) -> Result<()> {
    if header.graph_hash != expected_hash {
        return Err(Error::GraphHashMismatch {
            expected: expected_hash.into(),
            found: header.graph_hash.clone(),
        });
    }
    Ok(())
}
