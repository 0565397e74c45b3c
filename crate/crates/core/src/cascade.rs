//! Heterogeneous independent-cascade simulation and snapshot generation.
//!
//! A cascade runs in synchronous rounds. Nodes activated in round `t - 1` each make a
//! single Bernoulli attempt, with their own forwarding probability, on every neighbor
//! that is still negative. When several spreaders reach the same node in one round the
//! smallest spreader id wins. The run stops at the end of the first round in which at
//! least `ceil(theta * n)` nodes are positive, or when a round activates nobody.

use rand::seq::index;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, Observation};
use crate::rng::{self, Rng};

/// Parameters for generating one snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagationConfig {
    pub source_fraction: f64,
    pub p_low: f64,
    pub p_high: f64,
    pub theta: f64,
    pub delta: f64,
    pub max_retries: usize,
    /// When false, sources are never placed in the masked set.
    pub mask_sources: bool,
    pub seed: u64,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        PropagationConfig {
            source_fraction: 0.05,
            p_low: 0.1,
            p_high: 0.5,
            theta: 0.30,
            delta: 0.1,
            max_retries: 20,
            mask_sources: true,
            seed: 0,
        }
    }
}

impl PropagationConfig {
    pub fn validate(&self) -> Result<()> {
        check_open_fraction("source_fraction", self.source_fraction)?;
        check_bounds(self.p_low, self.p_high)?;
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(Error::invalid("theta", format!("{} not in (0, 1]", self.theta)));
        }
        if !(self.delta >= 0.0 && self.delta < 1.0) {
            return Err(Error::invalid("delta", format!("{} not in [0, 1)", self.delta)));
        }
        Ok(())
    }
}

fn check_open_fraction(field: &str, value: f64) -> Result<()> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("{value} not in (0, 1)")))
    }
}

fn check_bounds(p_low: f64, p_high: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p_low) && (0.0..=1.0).contains(&p_high) && p_low <= p_high {
        Ok(())
    } else {
        Err(Error::invalid(
            "p_low/p_high",
            format!("need 0 <= p_low <= p_high <= 1, got {p_low}, {p_high}"),
        ))
    }
}

/// Number of positive nodes at which a cascade halts.
pub fn halting_target(theta: f64, n: usize) -> usize {
    // guard against 0.1 * 120 = 12.000000000000002
    ((theta * n as f64) - 1e-9).ceil().max(0.0) as usize
}

/// `round(fraction * n)` with halves rounded away from zero.
pub fn rounded_count(fraction: f64, n: usize) -> usize {
    (fraction * n as f64 + 1e-9).round() as usize
}

/// One simulated propagation outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cascade {
    /// Sorted source ids.
    pub sources: Vec<usize>,
    pub positive: Vec<bool>,
    /// Infection round, `-1` for negative nodes.
    pub timestamp: Vec<i64>,
    /// Infecting neighbor, `-1` for sources and negative nodes.
    pub spreader: Vec<i64>,
    pub probs: Vec<f64>,
    pub halted_at_theta: bool,
}

impl Cascade {
    pub fn n(&self) -> usize {
        self.positive.len()
    }

    pub fn infected_count(&self) -> usize {
        self.positive.iter().filter(|&&p| p).count()
    }

    pub fn is_source(&self, v: usize) -> bool {
        self.sources.binary_search(&v).is_ok()
    }

    pub fn max_timestamp(&self) -> i64 {
        self.timestamp.iter().copied().max().unwrap_or(-1)
    }
}

/// Uniform random subset of `max(1, round(fraction * n))` nodes, sorted.
pub fn sample_sources(graph: &Graph, fraction: f64, rng: &mut Rng) -> Result<Vec<usize>> {
    check_open_fraction("source_fraction", fraction)?;
    let n = graph.n();
    let k = rounded_count(fraction, n).clamp(1, n);
    let mut sources = index::sample(rng, n, k).into_vec();
    sources.sort_unstable();
    Ok(sources)
}

/// Independent `U(p_low, p_high)` forwarding probability per node.
pub fn sample_probabilities(graph: &Graph, p_low: f64, p_high: f64, rng: &mut Rng) -> Result<Vec<f64>> {
    check_bounds(p_low, p_high)?;
    Ok((0..graph.n())
        .map(|_| {
            if p_low == p_high {
                p_low
            } else {
                rng.random_range(p_low..=p_high)
            }
        })
        .collect())
}

/// Synchronous-round independent cascade from `sources`.
pub fn simulate_ic(graph: &Graph, sources: &[usize], probs: &[f64], theta: f64, rng: &mut Rng) -> Result<Cascade> {
    let n = graph.n();
    if sources.is_empty() {
        return Err(Error::invalid("sources", "at least one source is required"));
    }
    if probs.len() != n {
        return Err(Error::Shape(format!("{} probabilities for {} nodes", probs.len(), n)));
    }
    if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::invalid("probs", format!("{p} not in [0, 1]")));
    }
    let mut sorted = sources.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if let Some(&v) = sorted.iter().find(|&&v| v >= n) {
        return Err(Error::NodeOutOfRange { node: v, n });
    }

    let target = halting_target(theta, n);
    let mut positive = vec![false; n];
    let mut timestamp = vec![-1i64; n];
    let mut spreader = vec![-1i64; n];
    for &s in &sorted {
        positive[s] = true;
        timestamp[s] = 0;
    }
    let mut count = sorted.len();
    let mut frontier = sorted.clone();
    let mut halted = count >= target;
    let mut round = 0i64;

    while !halted && !frontier.is_empty() {
        round += 1;
        let mut next = Vec::new();
        // frontier is ascending, so the first successful spreader of a node is the smallest id
        for &u in &frontier {
            let p = probs[u];
            for &w in graph.neighbors(u) {
                if positive[w] {
                    continue;
                }
                if rng.random_bool(p) {
                    positive[w] = true;
                    timestamp[w] = round;
                    spreader[w] = u as i64;
                    next.push(w);
                }
            }
        }
        count += next.len();
        next.sort_unstable();
        frontier = next;
        halted = count >= target;
    }

    Ok(Cascade {
        sources: sorted,
        positive,
        timestamp,
        spreader,
        probs: probs.to_vec(),
        halted_at_theta: halted,
    })
}

/// A cascade observed with a fraction of nodes masked.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    /// Ground truth, kept for scoring only.
    pub cascade: Cascade,
    /// Sorted masked node ids (the unknown set).
    pub masked: Vec<usize>,
    pub observed_state: Vec<Observation>,
    pub observed_timestamp: Vec<Option<i64>>,
    pub delta: f64,
    pub theta: f64,
    /// Resimulations needed before the cascade reached the halting target.
    pub retries: usize,
}

impl Snapshot {
    pub fn new(cascade: Cascade, mut masked: Vec<usize>, delta: f64, theta: f64, retries: usize) -> Result<Self> {
        let n = cascade.n();
        masked.sort_unstable();
        masked.dedup();
        let mut is_masked = vec![false; n];
        for &v in &masked {
            if v >= n {
                return Err(Error::NodeOutOfRange { node: v, n });
            }
            is_masked[v] = true;
        }
        let observed_state = (0..n)
            .map(|v| match (is_masked[v], cascade.positive[v]) {
                (true, _) => Observation::Unknown,
                (false, true) => Observation::Positive,
                (false, false) => Observation::Negative,
            })
            .collect();
        let observed_timestamp = (0..n)
            .map(|v| (!is_masked[v] && cascade.positive[v]).then_some(cascade.timestamp[v]))
            .collect();
        Ok(Snapshot {
            cascade,
            masked,
            observed_state,
            observed_timestamp,
            delta,
            theta,
            retries,
        })
    }

    pub fn n(&self) -> usize {
        self.cascade.n()
    }

    pub fn sources(&self) -> &[usize] {
        &self.cascade.sources
    }

    pub fn is_masked(&self, v: usize) -> bool {
        self.masked.binary_search(&v).is_ok()
    }

    /// Sources that landed in the masked set.
    pub fn masked_sources(&self) -> Vec<usize> {
        self.cascade.sources.iter().copied().filter(|&s| self.is_masked(s)).collect()
    }

    /// Nodes observed positive or unknown.
    pub fn candidates(&self) -> Vec<usize> {
        (0..self.n())
            .filter(|&v| self.observed_state[v] != Observation::Negative)
            .collect()
    }
}

/// Sources, probabilities, cascade with resimulation until the halting target is met, then masking.
pub fn generate_snapshot(graph: &Graph, config: &PropagationConfig, rng: &mut Rng) -> Result<Snapshot> {
    config.validate()?;
    let n = graph.n();
    let probs = sample_probabilities(graph, config.p_low, config.p_high, rng)?;
    let mut best: Option<Cascade> = None;
    let mut retries = 0;
    let cascade = loop {
        let sources = sample_sources(graph, config.source_fraction, rng)?;
        let cascade = simulate_ic(graph, &sources, &probs, config.theta, rng)?;
        if cascade.halted_at_theta {
            break cascade;
        }
        if best.as_ref().is_none_or(|b| cascade.infected_count() > b.infected_count()) {
            best = Some(cascade);
        }
        if retries == config.max_retries {
            let best = best.unwrap();
            return Err(Error::RetriesExhausted {
                target: halting_target(config.theta, n),
                attempts: retries + 1,
                best_infected: best.infected_count(),
                best: Box::new(best),
            });
        }
        retries += 1;
    };

    let m = rounded_count(config.delta, n);
    let universe: Vec<usize> = if config.mask_sources {
        (0..n).collect()
    } else {
        (0..n).filter(|&v| !cascade.is_source(v)).collect()
    };
    if m > universe.len() {
        return Err(Error::invalid("delta", format!("cannot mask {m} of {} eligible nodes", universe.len())));
    }
    let masked = index::sample(rng, universe.len(), m)
        .into_iter()
        .map(|i| universe[i])
        .collect();
    Snapshot::new(cascade, masked, config.delta, config.theta, retries)
}

/// Train/test split of independently generated snapshots.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub train: Vec<Snapshot>,
    pub test: Vec<Snapshot>,
}

/// `num_samples` snapshots, sample `i` drawn from stream `i` of the master seed.
pub fn build_dataset(graph: &Graph, config: &PropagationConfig, num_samples: usize, split: f64) -> Result<Dataset> {
    if num_samples < 5 {
        return Err(Error::invalid("num_samples", format!("{num_samples} < 5")));
    }
    check_open_fraction("split", split)?;
    config.validate()?;
    let mut all = (0..num_samples as u64)
        .into_par_iter()
        .map(|i| generate_snapshot(graph, config, &mut rng::stream(config.seed, i)).map_err(|e| e.context(format!("sample {i}"))))
        .collect::<Result<Vec<_>>>()?;
    let n_train = rounded_count(split, num_samples);
    let test = all.split_off(n_train);
    Ok(Dataset { train: all, test })
}
