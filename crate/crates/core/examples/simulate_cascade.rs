//! Independent-cascade snapshots on the football graph.
//!
//! ```text
//! cargo run --example simulate_cascade -- 0.1
//! ```
//! The optional argument is the masked fraction δ.

use rumor_source::cascade::{generate_snapshot, PropagationConfig};
use rumor_source::datasets;
use rumor_source::graph::Observation;
use rumor_source::rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let delta: f64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(0.1);
    let g = datasets::football()?;
    let config = PropagationConfig { delta, ..PropagationConfig::default() };
    println!("graph: {} nodes, {} edges; theta {}, delta {delta}", g.n(), g.num_edges(), config.theta);
    println!("snapshot  infected  rounds  retries  masked  masked_sources  unknown");
    for i in 0..8 {
        let mut r = rng::stream(17, i);
        let s = generate_snapshot(&g, &config, &mut r)?;
        let unknown = s.observed_state.iter().filter(|&&o| o == Observation::Unknown).count();
        println!(
            "{i:>8}  {:>8}  {:>6}  {:>7}  {:>6}  {:>14}  {unknown:>7}",
            s.cascade.infected_count(),
            s.cascade.max_timestamp(),
            s.retries,
            s.masked.len(),
            s.masked_sources().len(),
        );
    }
    Ok(())
}
