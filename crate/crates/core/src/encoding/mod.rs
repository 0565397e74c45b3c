//! Per-node feature construction: observed state, diffusion time, and Laplacian
//! positional coordinates of the infected subgraph.
//!
//! Column layout of the default [`FeatureMatrix`] is `[state | time | pe_1 .. pe_k]`.
//! Negative nodes carry `-1` in every positional column. Masked nodes stay in the
//! infected subgraph and receive real spectral coordinates.

mod eigen;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

pub use eigen::{symmetric_eigendecomposition, SpectralResult};

use crate::cascade::Snapshot;
use crate::error::{Error, Result};
use crate::graph::{induced_positive_subgraph, Graph, Observation};

/// Eigenvalues below this are treated as trivial (one per non-singleton component).
pub const TRIVIAL_EIGENVALUE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    /// Positional dimension.
    pub k: usize,
    /// Feed raw round numbers instead of timestamps scaled to `[0, 1]`.
    pub raw_timestamps: bool,
    /// Two-channel state and a spreader-rank channel next to the timestamp.
    pub extended: bool,
    /// Replace every positional column with zeros.
    pub zero_positional: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            k: 16,
            raw_timestamps: false,
            extended: false,
            zero_positional: false,
        }
    }
}

impl FeatureConfig {
    /// Width of the non-positional prefix.
    pub fn prefix_width(&self) -> usize {
        if self.extended {
            4
        } else {
            2
        }
    }

    pub fn width(&self) -> usize {
        self.prefix_width() + self.k
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid("k", "positional dimension must be at least 1"));
        }
        Ok(())
    }

    pub fn column_names(&self) -> Vec<String> {
        let mut names: Vec<String> = if self.extended {
            ["x1_pos", "x1_neg", "x2", "x2_spreader"].map(String::from).to_vec()
        } else {
            vec!["x1".into(), "x2".into()]
        };
        names.extend((1..=self.k).map(|i| format!("pe_{i}")));
        names
    }
}

/// Node feature matrix, one row per node of the full graph.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub data: Array2<f64>,
    pub k: usize,
    pub prefix: usize,
}

impl FeatureMatrix {
    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn cols(&self) -> usize {
        self.data.ncols()
    }

    pub fn positional(&self) -> ndarray::ArrayView2<'_, f64> {
        self.data.slice(s![.., self.prefix..])
    }

    /// Tab-separated dump with a `node` column and one named column per feature.
    pub fn write_dump(&self, path: impl AsRef<Path>, config: &FeatureConfig) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::from("node");
        for name in config.column_names() {
            out.push('\t');
            out.push_str(&name);
        }
        out.push('\n');
        for (v, row) in self.data.rows().into_iter().enumerate() {
            let _ = write!(out, "{v}");
            for x in row {
                let _ = write!(out, "\t{x}");
            }
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// `+1` observed positive, `-1` observed negative, `0` masked.
pub fn state_feature(snapshot: &Snapshot) -> Vec<f64> {
    snapshot
        .observed_state
        .iter()
        .map(|o| match o {
            Observation::Positive => 1.0,
            Observation::Negative => -1.0,
            Observation::Unknown => 0.0,
        })
        .collect()
}

/// Observed infection time (scaled by the largest observed time unless `raw`), `-1` otherwise.
pub fn diffusion_feature(snapshot: &Snapshot, raw: bool) -> Vec<f64> {
    let max_t = snapshot.observed_timestamp.iter().flatten().copied().max().unwrap_or(0);
    snapshot
        .observed_timestamp
        .iter()
        .map(|t| match t {
            None => -1.0,
            Some(t) if raw => *t as f64,
            Some(_) if max_t == 0 => 0.0,
            Some(t) => *t as f64 / max_t as f64,
        })
        .collect()
}

/// `I - D^-1/2 A D^-1/2`, with isolated nodes contributing an identity row.
pub fn sym_normalized_laplacian(graph: &Graph) -> Array2<f64> {
    let n = graph.n();
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|v| match graph.neighbors(v).len() {
            0 => 0.0,
            d => 1.0 / (d as f64).sqrt(),
        })
        .collect();
    let mut l = Array2::<f64>::eye(n);
    for &(i, j) in graph.edges() {
        let w = -inv_sqrt[i] * inv_sqrt[j];
        l[[i, j]] = w;
        l[[j, i]] = w;
    }
    l
}

/// Flips `vector` so its largest-magnitude entry (lowest index on ties) is positive.
pub fn canonicalize_sign(vector: &mut [f64]) {
    let max = vector.iter().map(|x| x.abs()).fold(0.0, f64::max);
    if let Some(pivot) = vector.iter().find(|x| x.abs() >= max - 1e-12) {
        if *pivot < 0.0 {
            vector.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// Spectral coordinates of the kept nodes of a subgraph: the `k` smallest non-trivial
/// eigenvectors, sign-canonicalized, zero-padded when fewer exist.
pub fn subgraph_positional_encoding(subgraph: &Graph, k: usize) -> Result<Array2<f64>> {
    let spectrum = symmetric_eigendecomposition(sym_normalized_laplacian(subgraph).view())?;
    let mut out = Array2::<f64>::zeros((subgraph.n(), k));
    let chosen = spectrum
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, &lambda)| lambda >= TRIVIAL_EIGENVALUE)
        .take(k);
    for (col, (r, _)) in chosen.enumerate() {
        let mut vector = spectrum.eigenvectors.column(r).to_vec();
        canonicalize_sign(&mut vector);
        out.column_mut(col).assign(&ndarray::Array1::from(vector));
    }
    Ok(out)
}

/// Positional block for every node of the full graph; rows outside the infected subgraph are `-1`.
pub fn positional_feature(snapshot: &Snapshot, graph: &Graph, k: usize) -> Result<Array2<f64>> {
    if k == 0 {
        return Err(Error::invalid("k", "positional dimension must be at least 1"));
    }
    let (subgraph, map) = induced_positive_subgraph(graph, &snapshot.observed_state)?;
    let coords = subgraph_positional_encoding(&subgraph, k)?;
    let mut out = Array2::from_elem((graph.n(), k), -1.0);
    for (r, &v) in map.kept().iter().enumerate() {
        out.row_mut(v).assign(&coords.row(r));
    }
    Ok(out)
}

/// Column-concatenated feature matrix for one snapshot.
pub fn assemble_features(snapshot: &Snapshot, graph: &Graph, config: &FeatureConfig) -> Result<FeatureMatrix> {
    config.validate()?;
    let n = graph.n();
    if snapshot.n() != n {
        return Err(Error::Shape(format!("snapshot has {} nodes, graph has {n}", snapshot.n())));
    }
    let state = state_feature(snapshot);
    let time = diffusion_feature(snapshot, config.raw_timestamps);
    let positional = if config.zero_positional {
        Array2::zeros((n, config.k))
    } else {
        positional_feature(snapshot, graph, config.k)?
    };

    let prefix = config.prefix_width();
    let mut data = Array2::<f64>::zeros((n, config.width()));
    for v in 0..n {
        if config.extended {
            let (pos, neg) = match snapshot.observed_state[v] {
                Observation::Positive => (1.0, -1.0),
                Observation::Negative => (-1.0, 1.0),
                Observation::Unknown => (0.0, 0.0),
            };
            data[[v, 0]] = pos;
            data[[v, 1]] = neg;
            data[[v, 2]] = time[v];
            data[[v, 3]] = spreader_rank(snapshot, v);
        } else {
            data[[v, 0]] = state[v];
            data[[v, 1]] = time[v];
        }
    }
    data.slice_mut(s![.., prefix..]).assign(&positional);
    if data.ncols() != prefix + config.k {
        return Err(Error::Shape("feature width disagrees with layout".into()));
    }
    Ok(FeatureMatrix {
        data,
        k: config.k,
        prefix,
    })
}

/// Spreader id scaled to `[0, 1]` for observed non-source positives, `-1` otherwise.
fn spreader_rank(snapshot: &Snapshot, v: usize) -> f64 {
    let n = snapshot.n();
    match (snapshot.observed_timestamp[v], snapshot.cascade.spreader[v]) {
        (Some(t), sp) if t > 0 && sp >= 0 && n > 1 => sp as f64 / (n - 1) as f64,
        _ => -1.0,
    }
}
