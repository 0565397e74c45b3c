use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rumor_source::cascade::build_dataset;
use rumor_source::config::ExperimentConfig;
use rumor_source::error::{Error, Result};
use rumor_source::graph::Graph;
use rumor_source::model::{load_checkpoint, save_checkpoint, Checkpoint};
use rumor_source::report::{self, Table};
use rumor_source::snapshot_io::{self, check_graph_hash};
use rumor_source::train::{
    evaluate, run_ablation, run_sweep, train, AblationVariant, BaselineMethod, MetricsSummary, PredictMode,
    RunSpec, SweepKind,
};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "rumor-source", version, about = "Rumor source detection with incomplete observations")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Single-threaded execution.
    #[arg(long, global = true)]
    serial: bool,
    /// Baseline to report alongside the model; repeatable (overrides the config).
    #[arg(long = "baseline", global = true)]
    baselines: Vec<BaselineMethod>,
    /// Override one config key, e.g. `--set delta=0.2`; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a snapshot dataset.
    Simulate {
        /// Number of snapshots (overrides `num_samples`).
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Train on the training split of a snapshot file.
    Train {
        /// Defaults to `<out>/snapshots.jsonl`.
        #[arg(long)]
        snapshots: Option<PathBuf>,
    },
    /// Evaluate a checkpoint.
    Eval {
        /// Defaults to `<out>/checkpoint.json`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Defaults to `<out>/snapshots.jsonl`.
        #[arg(long)]
        snapshots: Option<PathBuf>,
        #[arg(long, default_value = "test", value_parser = ["train", "test", "all"])]
        split: String,
        #[arg(long)]
        mode: Option<PredictMode>,
    },
    /// Sweep the halting fraction or the incomplete ratio.
    Sweep {
        #[arg(long)]
        kind: SweepKind,
    },
    /// Train one ablation variant (or `all`).
    Ablate {
        #[arg(long, default_value = "full")]
        variant: String,
    },
    /// Collect finished sweep and ablation tables from the output directory.
    Report,
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut config = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    for assignment in &common.sets {
        config.set(assignment)?;
    }
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(out) = &common.out {
        config.out_dir = out.clone();
    }
    if !common.baselines.is_empty() {
        config.baselines = common.baselines.clone();
    }
    Ok(config)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

#[derive(Serialize)]
struct RunSummary<'a> {
    tool_version: &'a str,
    config_hash: String,
    seed: u64,
    graph_hash: String,
    dataset_hash: Option<String>,
    metrics: &'a MetricsSummary,
    baselines: &'a [(BaselineMethod, MetricsSummary)],
}

fn simulate(config: &ExperimentConfig, graph: &Graph, spec: &RunSpec, samples: Option<usize>) -> Result<()> {
    let mut spec = spec.clone();
    if let Some(s) = samples {
        spec.num_samples = s;
    }
    spec.validate()?;
    let resolved = spec.resolved();
    let dataset = build_dataset(graph, &resolved.propagation, resolved.num_samples, resolved.split)?;
    ensure_dir(&config.out_dir)?;
    let path = config.out_dir.join("snapshots.jsonl");
    snapshot_io::save_dataset(&path, &dataset, &graph.content_hash(), graph.n())?;

    let mut table = Table::new(
        &config.hash(),
        ["snapshot", "split", "sources", "infected", "retries", "masked", "masked_sources"],
    );
    let splits = dataset.train.iter().map(|s| ("train", s)).chain(dataset.test.iter().map(|s| ("test", s)));
    for (i, (split, s)) in splits.enumerate() {
        table.push(vec![
            i.to_string(),
            split.into(),
            s.sources().len().to_string(),
            s.cascade.infected_count().to_string(),
            s.retries.to_string(),
            s.masked.len().to_string(),
            s.masked_sources().len().to_string(),
        ]);
    }
    table.write(config.out_dir.join("generation.csv"))?;
    println!(
        "wrote {} snapshots ({} train / {} test) to {}",
        table.len(),
        dataset.train.len(),
        dataset.test.len(),
        path.display()
    );
    Ok(())
}

fn cmd_train(config: &ExperimentConfig, graph: &Graph, spec: &RunSpec, snapshots: Option<PathBuf>) -> Result<()> {
    let path = snapshots.unwrap_or_else(|| config.out_dir.join("snapshots.jsonl"));
    let (header, dataset) = snapshot_io::load_dataset(&path)?;
    check_graph_hash(&header, &graph.content_hash())?;
    if dataset.train.is_empty() {
        return Err(Error::EmptyInput(format!("{} has no training snapshots", path.display())));
    }
    let resolved = spec.resolved();
    let outcome = train(&dataset.train, graph, &resolved.model, &resolved.features, &resolved.train)?;
    ensure_dir(&config.out_dir)?;
    let checkpoint = Checkpoint::new(
        &outcome.params,
        &resolved.model,
        &resolved.features,
        resolved.train.seed,
        outcome.best_epoch,
        graph.content_hash(),
    )?;
    let ck_path = config.out_dir.join("checkpoint.json");
    save_checkpoint(&ck_path, &checkpoint)?;
    report::history_table(&config.hash(), &outcome.history).write(config.out_dir.join("history.csv"))?;
    println!(
        "trained {} epochs (best {}), checkpoint {}",
        outcome.history.len(),
        outcome.best_epoch,
        ck_path.display()
    );
    Ok(())
}

fn cmd_eval(
    config: &ExperimentConfig,
    graph: &Graph,
    spec: &RunSpec,
    checkpoint: Option<PathBuf>,
    snapshots: Option<PathBuf>,
    split: &str,
    mode: Option<PredictMode>,
) -> Result<()> {
    let ck_path = checkpoint.unwrap_or_else(|| config.out_dir.join("checkpoint.json"));
    let checkpoint = load_checkpoint(&ck_path)?;
    let params = checkpoint.params()?;
    if checkpoint.graph_hash != graph.content_hash() {
        return Err(Error::GraphHashMismatch {
            expected: graph.content_hash(),
            found: checkpoint.graph_hash.clone(),
        });
    }
    if checkpoint.features.k != spec.features.k {
        return Err(Error::Shape(format!(
            "checkpoint was trained with k = {}, configuration has k = {}",
            checkpoint.features.k, spec.features.k
        )));
    }
    let path = snapshots.unwrap_or_else(|| config.out_dir.join("snapshots.jsonl"));
    let (header, mut dataset) = snapshot_io::load_dataset(&path)?;
    check_graph_hash(&header, &graph.content_hash())?;
    let chosen = match split {
        "train" => dataset.train,
        "test" => dataset.test,
        _ => {
            dataset.train.append(&mut dataset.test);
            dataset.train
        }
    };
    if chosen.is_empty() {
        return Err(Error::EmptyInput(format!("{} has no {split} snapshots", path.display())));
    }
    let mut train_config = spec.resolved().train;
    if let Some(m) = mode {
        train_config.predict_mode = m;
    }
    let reports = evaluate(&params, &chosen, graph, &checkpoint.model, &checkpoint.features, &train_config)?;
    let summary = MetricsSummary::from_reports(&reports);
    let seed = rumor_source::rng::derive_seed(config.seed, 3, 0);
    let baselines = config
        .baselines
        .iter()
        .map(|&m| Ok((m, rumor_source::train::evaluate_baseline(m, &chosen, graph, seed)?)))
        .collect::<Result<Vec<_>>>()?;
    ensure_dir(&config.out_dir)?;
    let hash = config.hash();
    report::metrics_table(&hash, &reports).write(config.out_dir.join(format!("eval-{split}.csv")))?;
    let table = report::summary_table(&hash, &[(split.to_string(), summary.clone(), baselines.clone())]);
    table.write(config.out_dir.join(format!("eval-{split}-summary.csv")))?;
    print!("{}", table.render());
    report::write_json(
        config.out_dir.join(format!("eval-{split}.json")),
        &RunSummary {
            tool_version: report::TOOL_VERSION,
            config_hash: hash,
            seed: config.seed,
            graph_hash: graph.content_hash(),
            dataset_hash: Some(snapshot_io::dataset_hash(
                &rumor_source::cascade::Dataset { train: chosen, test: Vec::new() },
                &graph.content_hash(),
            )),
            metrics: &summary,
            baselines: &baselines,
        },
    )
}

fn cmd_sweep(config: &ExperimentConfig, graph: &Graph, spec: &RunSpec, kind: SweepKind) -> Result<()> {
    let grid = match kind {
        SweepKind::Theta => &config.theta_grid,
        SweepKind::Delta => &config.delta_grid,
    };
    ensure_dir(&config.out_dir)?;
    let rows = run_sweep(kind, grid, spec, graph, Some(&config.out_dir))?;
    let table = report::sweep_table(&config.hash(), &rows);
    table.write(config.out_dir.join(format!("sweep-{}.csv", kind.name())))?;
    print!("{}", table.render());
    Ok(())
}

fn cmd_ablate(config: &ExperimentConfig, graph: &Graph, spec: &RunSpec, variant: &str) -> Result<()> {
    let variants: Vec<AblationVariant> = if variant == "all" {
        AblationVariant::ALL.to_vec()
    } else {
        vec![variant.parse()?]
    };
    ensure_dir(&config.out_dir)?;
    let hash = config.hash();
    for v in variants {
        let result = run_ablation(v, spec, graph)?;
        let table = report::summary_table(&hash, &[(v.name().to_string(), result.summary.clone(), result.baselines.clone())]);
        table.write(config.out_dir.join(format!("ablation-{}.csv", v.name())))?;
        report::write_json(
            config.out_dir.join(format!("ablation-{}.json", v.name())),
            &RunSummary {
                tool_version: report::TOOL_VERSION,
                config_hash: hash.clone(),
                seed: config.seed,
                graph_hash: graph.content_hash(),
                dataset_hash: Some(result.dataset_hash.clone()),
                metrics: &result.summary,
                baselines: &result.baselines,
            },
        )?;
        print!("{}", table.render());
    }
    Ok(())
}

/// Concatenates the finished sweep and ablation tables found in the output directory.
fn cmd_report(config: &ExperimentConfig) -> Result<()> {
    let dir = &config.out_dir;
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
            name.ends_with(".csv") && (name.starts_with("sweep-") || name.starts_with("ablation-") || name.starts_with("eval-"))
        })
        .collect();
    entries.sort();
    if entries.is_empty() {
        return Err(Error::EmptyInput(format!("no result tables in {}", dir.display())));
    }
    let mut out = report::provenance_line(&config.hash());
    out.push('\n');
    for p in &entries {
        let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
        out.push_str(&format!("\n## {}\n", p.file_name().unwrap().to_string_lossy()));
        out.push_str(&text);
    }
    let path = dir.join("report.txt");
    std::fs::write(&path, &out).map_err(|e| Error::io(&path, e))?;
    print!("{out}");
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let config = load_config(&cli.common)?;
    if cli.common.serial {
        rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build_global()
            .map_err(|e| Error::invalid("--serial", e.to_string()))?;
    }
    if let Command::Report = cli.command {
        return cmd_report(&config);
    }
    let graph = config.load_graph()?;
    let spec = config.run_spec(graph.n())?;
    match cli.command {
        Command::Simulate { samples } => simulate(&config, &graph, &spec, samples),
        Command::Train { snapshots } => cmd_train(&config, &graph, &spec, snapshots),
        Command::Eval {
            checkpoint,
            snapshots,
            split,
            mode,
        } => cmd_eval(&config, &graph, &spec, checkpoint, snapshots, &split, mode),
        Command::Sweep { kind } => cmd_sweep(&config, &graph, &spec, kind),
        Command::Ablate { variant } => cmd_ablate(&config, &graph, &spec, &variant),
        Command::Report => unreachable!(),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
