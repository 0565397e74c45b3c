//! The file-based pipeline: a TOML configuration, a snapshot file, a checkpoint, and
//! evaluation of the checkpoint against the stored test split.

use rumor_source::cascade::build_dataset;
use rumor_source::config::ExperimentConfig;
use rumor_source::model::{load_checkpoint, save_checkpoint, Checkpoint};
use rumor_source::snapshot_io::{check_graph_hash, load_dataset, save_dataset};
use rumor_source::train::{evaluate, train, MetricsSummary};

const CONFIG: &str = r#"
dataset = "football"
delta = 0.1
num_layers = 2
hidden_width = 32
epochs = 20
seed = 11
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile_dir()?;
    let mut config = ExperimentConfig::from_toml(CONFIG, "inline.toml".as_ref())?;
    config.set("num_samples=40")?;
    let graph = config.load_graph()?;
    let spec = config.run_spec(graph.n())?.resolved();
    println!("config hash {}", config.hash());

    let snapshots = dir.join("snapshots.jsonl");
    let dataset = build_dataset(&graph, &spec.propagation, spec.num_samples, spec.split)?;
    save_dataset(&snapshots, &dataset, &graph.content_hash(), graph.n())?;

    let (header, loaded) = load_dataset(&snapshots)?;
    check_graph_hash(&header, &graph.content_hash())?;
    println!("{} snapshots ({} train) in {}", header.count, header.train, snapshots.display());

    let outcome = train(&loaded.train, &graph, &spec.model, &spec.features, &spec.train)?;
    let checkpoint_path = dir.join("checkpoint.json");
    let checkpoint = Checkpoint::new(
        &outcome.params,
        &spec.model,
        &spec.features,
        spec.train.seed,
        outcome.best_epoch,
        graph.content_hash(),
    )?;
    save_checkpoint(&checkpoint_path, &checkpoint)?;

    let restored = load_checkpoint(&checkpoint_path)?;
    let params = restored.params()?;
    let reports = evaluate(&params, &loaded.test, &graph, &restored.model, &restored.features, &spec.train)?;
    let s = MetricsSummary::from_reports(&reports);
    println!("restored checkpoint: test acc {:.3}, F {:.3}", s.acc_mean, s.f_mean);
    Ok(())
}

fn tempfile_dir() -> std::io::Result<std::path::PathBuf> {
    let dir = std::env::temp_dir().join(format!("rumor-source-example-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}
