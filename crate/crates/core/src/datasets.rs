//! Small built-in graphs.
//!
//! The bundled `football_surrogate.edges` is a planted-partition graph shaped like the
//! 2000 US college football schedule network: 115 teams in 12 conferences of the
//! historical sizes, 613 games, mean degree 10.66. Point `RUMOR_SOURCE_FOOTBALL` at the
//! real edge list to use it instead.

use std::collections::BTreeSet;

use rand::seq::IndexedRandom;
use rand::Rng as _;

use crate::error::Result;
use crate::graph::{parse_edge_list, read_edge_list, Graph};
use crate::rng;

/// Bundled football-like edge list.
pub const FOOTBALL_SURROGATE: &str = include_str!("../data/football_surrogate.edges");

/// Seed that reproduces [`FOOTBALL_SURROGATE`] via [`football_like`].
pub const FOOTBALL_SURROGATE_SEED: u64 = 2000;

/// Environment variable naming an external football edge list.
pub const FOOTBALL_ENV: &str = "RUMOR_SOURCE_FOOTBALL";

pub const FOOTBALL_NODES: usize = 115;
pub const FOOTBALL_EDGES: usize = 613;

/// Conference sizes of the 2000 season (11 conferences plus independents).
const CONFERENCES: [usize; 12] = [9, 8, 11, 12, 10, 5, 13, 8, 10, 12, 7, 10];

/// The football graph: `$RUMOR_SOURCE_FOOTBALL` when set, the bundled surrogate otherwise.
pub fn football() -> Result<Graph> {
    match std::env::var_os(FOOTBALL_ENV) {
        Some(path) => read_edge_list(path, None).map(|(g, _)| g),
        None => parse_edge_list(FOOTBALL_SURROGATE, None, "football_surrogate.edges").map(|(g, _)| g),
    }
}

/// Connected planted-partition graph with football conference sizes and exactly 613 edges.
pub fn football_like(seed: u64) -> Graph {
    let n: usize = CONFERENCES.iter().sum();
    let mut block = Vec::with_capacity(n);
    for (c, &size) in CONFERENCES.iter().enumerate() {
        block.extend(std::iter::repeat_n(c, size));
    }
    for attempt in 0.. {
        let mut r = rng::stream(seed, attempt);
        let mut intra = BTreeSet::new();
        let mut inter = BTreeSet::new();
        for i in 0..n {
            for j in i + 1..n {
                if block[i] == block[j] {
                    if r.random_bool(0.75) {
                        intra.insert((i, j));
                    }
                } else if r.random_bool(0.0366) {
                    inter.insert((i, j));
                }
            }
        }
        let target_inter = FOOTBALL_EDGES.saturating_sub(intra.len());
        while inter.len() > target_inter {
            let all: Vec<_> = inter.iter().copied().collect();
            inter.remove(all.choose(&mut r).unwrap());
        }
        while inter.len() < target_inter {
            let i = r.random_range(0..n);
            let j = r.random_range(0..n);
            if block[i] != block[j] {
                inter.insert((i.min(j), i.max(j)));
            }
        }
        let g = Graph::from_edges(n, intra.into_iter().chain(inter)).unwrap();
        if g.num_edges() == FOOTBALL_EDGES && g.connected_components().1 == 1 {
            return g;
        }
    }
    unreachable!()
}

pub fn path(n: usize) -> Graph {
    Graph::from_edges(n, (1..n).map(|i| (i - 1, i))).unwrap()
}

pub fn cycle(n: usize) -> Graph {
    Graph::from_edges(n, (0..n).map(|i| (i, (i + 1) % n))).unwrap()
}

/// Star with node 0 at the center.
pub fn star(leaves: usize) -> Graph {
    Graph::from_edges(leaves + 1, (1..=leaves).map(|l| (0, l))).unwrap()
}

pub fn complete(n: usize) -> Graph {
    Graph::from_edges(n, (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j)))).unwrap()
}

/// Erdős–Rényi graph, resampled until connected.
pub fn connected_random(n: usize, p: f64, seed: u64) -> Graph {
    for attempt in 0.. {
        let mut r = rng::stream(seed, attempt);
        let edges: Vec<_> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|_| r.random_bool(p))
            .collect();
        let g = Graph::from_edges(n, edges).unwrap();
        if g.connected_components().1 == 1 {
            return g;
        }
    }
    unreachable!()
}
