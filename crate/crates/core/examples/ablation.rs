//! Runs every model variant on the same snapshots and prints one row per variant.

use rumor_source::datasets;
use rumor_source::report::summary_table;
use rumor_source::train::{run_ablation, AblationVariant, BaselineMethod, RunSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let g = datasets::football()?;
    let mut base = RunSpec::for_graph(&g);
    base.model.hidden_width = 32;
    base.train.epochs = 30;
    base.baselines = vec![BaselineMethod::Random];

    let mut rows = Vec::new();
    for variant in AblationVariant::ALL {
        let r = run_ablation(variant, &base, &g)?;
        rows.push((variant.name().to_string(), r.summary, r.baselines));
    }
    print!("{}", summary_table(&base.hash(), &rows).render());
    Ok(())
}
