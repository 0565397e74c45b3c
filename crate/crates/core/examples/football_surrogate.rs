//! Regenerates the bundled football-like edge list.
//!
//! ```text
//! cargo run --example football_surrogate -- crates/core/data/football_surrogate.edges
//! ```

use std::fmt::Write as _;

use rumor_source::datasets::{football_like, FOOTBALL_SURROGATE_SEED};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "football_surrogate.edges".into());
    let g = football_like(FOOTBALL_SURROGATE_SEED);
    let mut text = String::new();
    writeln!(text, "# planted-partition surrogate of the 2000 college football network")?;
    writeln!(text, "# 115 nodes, 12 blocks, {} edges, seed {FOOTBALL_SURROGATE_SEED}", g.num_edges())?;
    for &(a, b) in g.edges() {
        writeln!(text, "{a}\t{b}")?;
    }
    std::fs::write(&out, text)?;
    let (_, count) = g.connected_components();
    println!(
        "wrote {out}: {} nodes, {} edges, mean degree {:.2}, {count} component(s), hash {}",
        g.n(),
        g.num_edges(),
        g.mean_degree(),
        &g.content_hash()[..16]
    );
    Ok(())
}
