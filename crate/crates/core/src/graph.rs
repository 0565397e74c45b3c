//! Undirected simple graphs, edge-list ingestion, and induced subgraphs.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Observed status of a node in a snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Observation {
    Positive,
    Negative,
    Unknown,
}

/// Immutable undirected simple graph on nodes `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    adjacency: Vec<Vec<usize>>,
    edges: Vec<(usize, usize)>,
    labels: Option<Vec<String>>,
}

/// Counts collected while reading an edge-list file.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LoadReport {
    pub nodes: usize,
    pub edges: usize,
    pub lines: usize,
    pub comment_lines: usize,
    pub self_loops_dropped: usize,
    pub duplicates_dropped: usize,
    pub components: usize,
}

impl Graph {
    /// Builds a graph from an edge list; self-loops and repeated pairs are dropped.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        Self::build(n, edges, None).map(|(g, _, _)| g)
    }

    fn build(
        n: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        labels: Option<Vec<String>>,
    ) -> Result<(Self, usize, usize)> {
        if n == 0 {
            return Err(Error::EmptyGraph("graph needs at least one node".into()));
        }
        let mut set = BTreeSet::new();
        let mut self_loops = 0;
        let mut duplicates = 0;
        for (a, b) in edges {
            for v in [a, b] {
                if v >= n {
                    return Err(Error::NodeOutOfRange { node: v, n });
                }
            }
            if a == b {
                self_loops += 1;
                continue;
            }
            if !set.insert((a.min(b), a.max(b))) {
                duplicates += 1;
            }
        }
        let edges: Vec<_> = set.into_iter().collect();
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b) in &edges {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Ok((
            Graph {
                adjacency,
                edges,
                labels,
            },
            self_loops,
            duplicates,
        ))
    }

    pub fn n(&self) -> usize {
        self.adjacency.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Edges as `(i, j)` with `i < j`, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Sorted neighbor list.
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> Result<usize> {
        self.check(v)?;
        Ok(self.adjacency[v].len())
    }

    /// Adjacency entry `A[i][j]`.
    pub fn adjacent(&self, i: usize, j: usize) -> bool {
        self.adjacency[i].binary_search(&j).is_ok()
    }

    pub fn mean_degree(&self) -> f64 {
        2.0 * self.num_edges() as f64 / self.n() as f64
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn label(&self, v: usize) -> String {
        match &self.labels {
            Some(labels) => labels[v].clone(),
            None => v.to_string(),
        }
    }

    fn check(&self, v: usize) -> Result<()> {
        if v >= self.n() {
            Err(Error::NodeOutOfRange { node: v, n: self.n() })
        } else {
            Ok(())
        }
    }

    /// Component id per node (ids assigned in order of smallest member) and the component count.
    pub fn connected_components(&self) -> (Vec<usize>, usize) {
        let n = self.n();
        let mut comp = vec![usize::MAX; n];
        let mut count = 0;
        let mut queue = VecDeque::new();
        for start in 0..n {
            if comp[start] != usize::MAX {
                continue;
            }
            comp[start] = count;
            queue.push_back(start);
            while let Some(u) = queue.pop_front() {
                for &w in &self.adjacency[u] {
                    if comp[w] == usize::MAX {
                        comp[w] = count;
                        queue.push_back(w);
                    }
                }
            }
            count += 1;
        }
        (comp, count)
    }

    /// BFS hop distances from `source`; `None` for unreachable nodes.
    pub fn bfs_distances(&self, source: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.n()];
        dist[source] = Some(0);
        let mut queue = VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            let d = dist[u].unwrap() + 1;
            for &w in &self.adjacency[u] {
                if dist[w].is_none() {
                    dist[w] = Some(d);
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    /// Subgraph induced on the nodes for which `keep` returns true.
    pub fn induced_subgraph(&self, keep: impl Fn(usize) -> bool) -> Result<(Graph, SubgraphMap)> {
        let kept: Vec<usize> = (0..self.n()).filter(|&v| keep(v)).collect();
        if kept.is_empty() {
            return Err(Error::EmptyGraph("induced subgraph keeps no nodes".into()));
        }
        let map = SubgraphMap::new(self.n(), kept);
        let edges = self.edges.iter().filter_map(|&(a, b)| {
            Some((map.inverse(a)?, map.inverse(b)?))
        });
        let labels = self
            .labels
            .as_ref()
            .map(|l| map.kept().iter().map(|&v| l[v].clone()).collect());
        let (sub, _, _) = Graph::build(map.len(), edges, labels)?;
        Ok((sub, map))
    }

    /// SHA-256 over the canonical node count and sorted edge list.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.n() as u64).to_le_bytes());
        for &(a, b) in &self.edges {
            hasher.update((a as u64).to_le_bytes());
            hasher.update((b as u64).to_le_bytes());
        }
        hex::encode(hasher.finalize())
    }

    /// Writes one `label label` line per edge.
    pub fn write_edge_list(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::new();
        for &(a, b) in &self.edges {
            let _ = writeln!(out, "{}\t{}", self.label(a), self.label(b));
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// Correspondence between an induced subgraph and its parent graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubgraphMap {
    kept: Vec<usize>,
    inverse: Vec<Option<usize>>,
}

impl SubgraphMap {
    fn new(parent_n: usize, kept: Vec<usize>) -> Self {
        let mut inverse = vec![None; parent_n];
        for (r, &v) in kept.iter().enumerate() {
            inverse[v] = Some(r);
        }
        SubgraphMap { kept, inverse }
    }

    /// Original ids of the retained nodes, strictly increasing.
    pub fn kept(&self) -> &[usize] {
        &self.kept
    }

    /// Subgraph index of an original node, if retained.
    pub fn inverse(&self, original: usize) -> Option<usize> {
        self.inverse.get(original).copied().flatten()
    }

    pub fn len(&self) -> usize {
        self.kept.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kept.is_empty()
    }
}

/// Subgraph induced on observed-positive and unknown nodes; negative nodes are deleted.
pub fn induced_positive_subgraph(
    graph: &Graph,
    observed: &[Observation],
) -> Result<(Graph, SubgraphMap)> {
    if observed.len() != graph.n() {
        return Err(Error::Shape(format!(
            "{} observations for a graph with {} nodes",
            observed.len(),
            graph.n()
        )));
    }
    graph
        .induced_subgraph(|v| observed[v] != Observation::Negative)
        .map_err(|_| Error::EmptyGraph("no positive or unknown nodes in snapshot".into()))
}

/// Reads an edge list and returns the graph along with its load report.
///
/// Lines starting with `#` or `%` are comments. With `delimiter = None` tokens are
/// split on any whitespace. Labels are assigned ids in sorted order, numerically when
/// every label parses as an integer.
pub fn read_edge_list(path: impl AsRef<Path>, delimiter: Option<char>) -> Result<(Graph, LoadReport)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_edge_list(&text, delimiter, path)
}

/// Parses edge-list text; `origin` is used in error messages.
pub fn parse_edge_list(text: &str, delimiter: Option<char>, origin: impl AsRef<Path>) -> Result<(Graph, LoadReport)> {
    let path = origin.as_ref();
    let mut report = LoadReport::default();
    let mut raw = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        report.lines += 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if trimmed.starts_with('#') || trimmed.starts_with('%') {
            report.comment_lines += 1;
            continue;
        }
        let tokens: Vec<&str> = match delimiter {
            None => trimmed.split_whitespace().collect(),
            Some(d) => trimmed.split(d).map(str::trim).filter(|t| !t.is_empty()).collect(),
        };
        if tokens.len() != 2 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                message: format!("expected 2 tokens, found {}", tokens.len()),
            });
        }
        raw.push((tokens[0].to_string(), tokens[1].to_string()));
    }

    let distinct: BTreeSet<&str> = raw.iter().flat_map(|(a, b)| [a.as_str(), b.as_str()]).collect();
    let mut labels: Vec<String> = distinct.into_iter().map(str::to_string).collect();
    let numeric: Option<Vec<i64>> = labels.iter().map(|l| l.parse().ok()).collect();
    if let Some(values) = numeric {
        let mut paired: Vec<(i64, String)> = values.into_iter().zip(labels).collect();
        paired.sort();
        labels = paired.into_iter().map(|(_, l)| l).collect();
    }
    let ids: BTreeMap<&str, usize> = labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let edges: Vec<(usize, usize)> = raw
        .iter()
        .map(|(a, b)| (ids[a.as_str()], ids[b.as_str()]))
        .collect();

    let n = labels.len();
    if n == 0 {
        return Err(Error::EmptyGraph(format!("{}: no edges", path.display())));
    }
    let (graph, self_loops, duplicates) = Graph::build(n, edges, Some(labels))?;
    if graph.num_edges() == 0 {
        return Err(Error::EmptyGraph(format!(
            "{}: zero edges after removing self-loops",
            path.display()
        )));
    }
    report.nodes = graph.n();
    report.edges = graph.num_edges();
    report.self_loops_dropped = self_loops;
    report.duplicates_dropped = duplicates;
    report.components = graph.connected_components().1;
    Ok((graph, report))
}

/// [`read_edge_list`] that emits the load report as a log line.
pub fn load_edge_list(path: impl AsRef<Path>, delimiter: Option<char>) -> Result<Graph> {
    let path = path.as_ref();
    let (graph, r) = read_edge_list(path, delimiter)?;
    log::info!(
        "load_edge_list path={} nodes={} edges={} lines={} comments={} self_loops_dropped={} duplicates_dropped={} components={}",
        path.display(),
        r.nodes,
        r.edges,
        r.lines,
        r.comment_lines,
        r.self_loops_dropped,
        r.duplicates_dropped,
        r.components
    );
    Ok(graph)
}
