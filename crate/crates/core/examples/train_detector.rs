//! Trains a detector on simulated football snapshots and compares it with the baselines
//! on the held-out snapshots.
//!
//! ```text
//! cargo run --release --example train_detector -- 64 100
//! ```
//! Arguments: hidden width and epoch budget.

use rumor_source::datasets;
use rumor_source::train::{run_experiment, BaselineMethod, RunSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let hidden: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(64);
    let epochs: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(100);

    let g = datasets::football()?;
    let mut spec = RunSpec::for_graph(&g);
    spec.model.num_layers = 2;
    spec.model.hidden_width = hidden;
    spec.train.epochs = epochs;
    spec.baselines = BaselineMethod::ALL.to_vec();

    let result = run_experiment(&g, &spec)?;
    let history = &result.outcome.history;
    for h in history.iter().step_by((history.len() / 10).max(1)) {
        println!(
            "epoch {:>4}  loss {:>9.4}  val F {:.3}",
            h.epoch,
            h.train_loss,
            h.val_f_score.unwrap_or(f64::NAN)
        );
    }
    println!("kept epoch {} of {}", result.outcome.best_epoch, history.len());

    let s = &result.summary;
    println!("\nmethod        acc     F   precision  recall  masked recovery");
    println!(
        "detector   {:.3} {:.3}      {:.3}   {:.3}  {}",
        s.acc_mean,
        s.f_mean,
        s.precision_mean,
        s.recall_mean,
        s.masked_recovery_mean.map_or("-".into(), |r| format!("{r:.3}"))
    );
    for (m, b) in &result.baselines {
        println!(
            "{:<12} {:.3} {:.3}      {:.3}   {:.3}  {}",
            m.name(),
            b.acc_mean,
            b.f_mean,
            b.precision_mean,
            b.recall_mean,
            b.masked_recovery_mean.map_or("-".into(), |r| format!("{r:.3}"))
        );
    }
    Ok(())
}
