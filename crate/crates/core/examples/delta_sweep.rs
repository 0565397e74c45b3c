//! Detection quality against the masked fraction δ, written as a CSV table.
//!
//! ```text
//! cargo run --release --example delta_sweep -- out/sweep
//! ```
//! Rerunning with the same directory reuses finished grid points.

use std::path::PathBuf;

use rumor_source::datasets;
use rumor_source::report::sweep_table;
use rumor_source::train::{run_sweep, BaselineMethod, RunSpec, SweepKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "delta_sweep".into()));
    std::fs::create_dir_all(&dir)?;
    let g = datasets::football()?;
    let mut base = RunSpec::for_graph(&g);
    base.model.hidden_width = 32;
    base.train.epochs = 30;
    base.baselines = vec![BaselineMethod::Random];

    let grid = SweepKind::Delta.default_grid();
    let rows = run_sweep(SweepKind::Delta, &grid, &base, &g, Some(&dir))?;
    let table = sweep_table(&base.hash(), &rows);
    table.write(dir.join("delta.csv"))?;
    print!("{}", table.render());
    Ok(())
}
