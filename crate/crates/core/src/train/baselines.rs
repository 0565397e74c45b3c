//! Reference detectors that need no training.

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::cascade::Snapshot;
use crate::error::{Error, Result};
use crate::graph::{induced_positive_subgraph, Graph};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMethod {
    /// `k` uniform draws from the observed-positive and unknown nodes.
    Random,
    /// Highest full-graph degree among the candidates, ties by id.
    Degree,
    /// Jordan-center style: smallest eccentricity inside the largest infected component.
    Eccentricity,
}

impl BaselineMethod {
    pub const ALL: [BaselineMethod; 3] = [BaselineMethod::Random, BaselineMethod::Degree, BaselineMethod::Eccentricity];

    pub fn name(self) -> &'static str {
        match self {
            BaselineMethod::Random => "random",
            BaselineMethod::Degree => "degree",
            BaselineMethod::Eccentricity => "eccentricity",
        }
    }
}

impl std::str::FromStr for BaselineMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BaselineMethod::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::invalid("baseline", format!("unknown baseline {s:?}")))
    }
}

/// Predicted source set of size at most `k` (sorted).
pub fn baseline_detect(
    method: BaselineMethod,
    snapshot: &Snapshot,
    graph: &Graph,
    k: usize,
    rng: &mut Rng,
) -> Result<Vec<usize>> {
    if k == 0 {
        return Err(Error::invalid("k", "baselines need k >= 1"));
    }
    let candidates = snapshot.candidates();
    if candidates.is_empty() {
        return Err(Error::EmptyInput("snapshot has no positive or unknown nodes".into()));
    }
    let mut chosen = match method {
        BaselineMethod::Random => index::sample(rng, candidates.len(), k.min(candidates.len()))
            .into_iter()
            .map(|i| candidates[i])
            .collect(),
        BaselineMethod::Degree => {
            let mut order = candidates;
            order.sort_by_key(|&v| (std::cmp::Reverse(graph.neighbors(v).len()), v));
            order.truncate(k);
            order
        }
        BaselineMethod::Eccentricity => eccentricity_centers(snapshot, graph, k)?,
    };
    chosen.sort_unstable();
    Ok(chosen)
}

fn eccentricity_centers(snapshot: &Snapshot, graph: &Graph, k: usize) -> Result<Vec<usize>> {
    let (sub, map) = induced_positive_subgraph(graph, &snapshot.observed_state)?;
    let (comp, count) = sub.connected_components();
    let mut sizes = vec![0usize; count];
    for &c in &comp {
        sizes[c] += 1;
    }
    // largest component, lowest label on ties
    let largest = (0..count).max_by_key(|&c| (sizes[c], std::cmp::Reverse(c))).expect("nonempty subgraph");
    let mut scored: Vec<(usize, usize)> = (0..sub.n())
        .filter(|&v| comp[v] == largest)
        .map(|v| {
            let ecc = sub.bfs_distances(v).into_iter().flatten().max().unwrap_or(0);
            (ecc, map.kept()[v])
        })
        .collect();
    scored.sort_unstable();
    Ok(scored.into_iter().take(k).map(|(_, v)| v).collect())
}
