//! End-to-end runs: generate a dataset, train, evaluate, compare with baselines.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{baseline_detect, compute_metrics, evaluate, train, BaselineMethod, MetricsSummary, TrainConfig, TrainOutcome};
use crate::cascade::{build_dataset, Dataset, PropagationConfig};
use crate::encoding::FeatureConfig;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::model::{AttentionVariant, ModelConfig};
use crate::rng;
use crate::snapshot_io;

const DATA_TAG: u64 = 1;
const TRAIN_TAG: u64 = 2;
const BASELINE_TAG: u64 = 3;

/// Everything that determines one train/evaluate run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    /// Its `seed` is replaced by one derived from [`RunSpec::seed`].
    pub propagation: PropagationConfig,
    pub features: FeatureConfig,
    /// Its `input_width` is replaced by the feature width.
    pub model: ModelConfig,
    /// Its `seed` is replaced by one derived from [`RunSpec::seed`].
    pub train: TrainConfig,
    pub num_samples: usize,
    pub split: f64,
    pub baselines: Vec<BaselineMethod>,
    pub seed: u64,
}

impl RunSpec {
    /// Default settings for `graph`.
    pub fn for_graph(graph: &Graph) -> Self {
        let features = FeatureConfig::default();
        RunSpec {
            propagation: PropagationConfig::default(),
            model: ModelConfig::for_graph(graph.n(), features.width()),
            features,
            train: TrainConfig::default(),
            num_samples: 100,
            split: 0.8,
            baselines: Vec::new(),
            seed: 0,
        }
    }

    /// Copy with the derived seeds and widths filled in.
    pub fn resolved(&self) -> RunSpec {
        let mut spec = self.clone();
        spec.propagation.seed = rng::derive_seed(self.seed, DATA_TAG, 0);
        spec.train.seed = rng::derive_seed(self.seed, TRAIN_TAG, 0);
        spec.model.input_width = self.features.width();
        spec
    }

    pub fn validate(&self) -> Result<()> {
        let spec = self.resolved();
        spec.propagation.validate()?;
        spec.features.validate()?;
        spec.model.validate()?;
        spec.train.validate()?;
        if spec.num_samples < 5 {
            return Err(Error::invalid("num_samples", format!("{} is below the minimum of 5", spec.num_samples)));
        }
        if !(spec.split > 0.0 && spec.split < 1.0) {
            return Err(Error::invalid("split", format!("{} is not in (0, 1)", spec.split)));
        }
        Ok(())
    }

    /// Short content hash of the resolved spec.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(&self.resolved()).expect("spec serializes");
        hex::encode(&Sha256::digest(text.as_bytes())[..8])
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub spec: RunSpec,
    pub dataset: Dataset,
    pub dataset_hash: String,
    pub outcome: TrainOutcome,
    pub test_reports: Vec<super::MetricsReport>,
    pub summary: MetricsSummary,
    pub baselines: Vec<(BaselineMethod, MetricsSummary)>,
}

/// Baseline metrics over `snapshots`, each predicting `|s|` nodes.
pub fn evaluate_baseline(
    method: BaselineMethod,
    snapshots: &[crate::cascade::Snapshot],
    graph: &Graph,
    seed: u64,
) -> Result<MetricsSummary> {
    let reports = snapshots
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut r = rng::stream(seed, i as u64);
            let predicted = baseline_detect(method, s, graph, s.sources().len(), &mut r)?;
            Ok(compute_metrics(&predicted, s))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricsSummary::from_reports(&reports))
}

pub fn run_experiment(graph: &Graph, spec: &RunSpec) -> Result<RunResult> {
    spec.validate()?;
    let resolved = spec.resolved();
    let dataset = build_dataset(graph, &resolved.propagation, resolved.num_samples, resolved.split)?;
    let dataset_hash = snapshot_io::dataset_hash(&dataset, &graph.content_hash());
    let outcome = train(&dataset.train, graph, &resolved.model, &resolved.features, &resolved.train)?;
    let test_reports = evaluate(
        &outcome.params,
        &dataset.test,
        graph,
        &resolved.model,
        &resolved.features,
        &resolved.train,
    )?;
    let summary = MetricsSummary::from_reports(&test_reports);
    let baseline_seed = rng::derive_seed(spec.seed, BASELINE_TAG, 0);
    let baselines = resolved
        .baselines
        .iter()
        .map(|&m| Ok((m, evaluate_baseline(m, &dataset.test, graph, baseline_seed)?)))
        .collect::<Result<Vec<_>>>()?;
    log::info!(
        "run seed {} hash {}: acc {:.4} F {:.4} (best epoch {} of {})",
        spec.seed,
        spec.hash(),
        summary.acc_mean,
        summary.f_mean,
        outcome.best_epoch,
        outcome.history.len()
    );
    Ok(RunResult {
        spec: spec.clone(),
        dataset,
        dataset_hash,
        outcome,
        test_reports,
        summary,
        baselines,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    Theta,
    Delta,
}

impl SweepKind {
    pub fn name(self) -> &'static str {
        match self {
            SweepKind::Theta => "theta",
            SweepKind::Delta => "delta",
        }
    }

    /// Grid used by default: θ from 10% to 30% in steps of 5%, δ from 0 to 25% in steps of 5%.
    pub fn default_grid(self) -> Vec<f64> {
        match self {
            SweepKind::Theta => vec![0.10, 0.15, 0.20, 0.25, 0.30],
            SweepKind::Delta => vec![0.0, 0.05, 0.10, 0.15, 0.20, 0.25],
        }
    }

    fn apply(self, spec: &mut RunSpec, value: f64) {
        match self {
            SweepKind::Theta => spec.propagation.theta = value,
            SweepKind::Delta => spec.propagation.delta = value,
        }
    }
}

impl std::str::FromStr for SweepKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "theta" => Ok(SweepKind::Theta),
            "delta" => Ok(SweepKind::Delta),
            other => Err(Error::invalid("sweep", format!("unknown sweep kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub kind: SweepKind,
    pub index: usize,
    pub value: f64,
    pub seed: u64,
    pub config_hash: String,
    pub dataset_hash: String,
    pub summary: MetricsSummary,
    pub baselines: Vec<(BaselineMethod, MetricsSummary)>,
}

/// One run per grid value; point `i` uses seed `base.seed + i`. With `out_dir`, each
/// finished point is stored as `sweep-<kind>-<i>.json` and reused on the next call when
/// its config hash still matches.
pub fn run_sweep(
    kind: SweepKind,
    grid: &[f64],
    base: &RunSpec,
    graph: &Graph,
    out_dir: Option<&Path>,
) -> Result<Vec<SweepRow>> {
    if grid.is_empty() {
        return Err(Error::invalid("grid", "sweep grid is empty"));
    }
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut rows = Vec::with_capacity(grid.len());
    for (i, &value) in grid.iter().enumerate() {
        let mut spec = base.clone();
        kind.apply(&mut spec, value);
        spec.seed = base.seed.wrapping_add(i as u64);
        let hash = spec.hash();
        let point_path = out_dir.map(|d| d.join(format!("sweep-{}-{i}.json", kind.name())));
        if let Some(row) = point_path.as_deref().and_then(|p| load_point(p, &hash)) {
            log::info!("{} = {value}: reusing {}", kind.name(), point_path.as_ref().unwrap().display());
            rows.push(row);
            continue;
        }
        let result = run_experiment(graph, &spec).map_err(|e| e.context(format!("{} = {value}", kind.name())))?;
        let row = SweepRow {
            kind,
            index: i,
            value,
            seed: spec.seed,
            config_hash: hash,
            dataset_hash: result.dataset_hash,
            summary: result.summary,
            baselines: result.baselines,
        };
        if let Some(p) = &point_path {
            let text = serde_json::to_string_pretty(&row).map_err(|e| Error::Schema(e.to_string()))?;
            std::fs::write(p, text).map_err(|e| Error::io(p, e))?;
        }
        rows.push(row);
    }
    Ok(rows)
}

fn load_point(path: &Path, hash: &str) -> Option<SweepRow> {
    let text = std::fs::read_to_string(path).ok()?;
    let row: SweepRow = serde_json::from_str(&text).ok()?;
    (row.config_hash == hash).then_some(row)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationVariant {
    Full,
    /// Zero positional columns.
    NoPe,
    /// Uniform attention weights.
    NoAttention,
    AttentionSmallDegree,
    AttentionLargeDegree,
    /// ξ = 1.
    NoBalance,
}

impl AblationVariant {
    pub const ALL: [AblationVariant; 6] = [
        AblationVariant::Full,
        AblationVariant::NoPe,
        AblationVariant::NoAttention,
        AblationVariant::AttentionSmallDegree,
        AblationVariant::AttentionLargeDegree,
        AblationVariant::NoBalance,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AblationVariant::Full => "full",
            AblationVariant::NoPe => "no_pe",
            AblationVariant::NoAttention => "no_attention",
            AblationVariant::AttentionSmallDegree => "attention_small_degree",
            AblationVariant::AttentionLargeDegree => "attention_large_degree",
            AblationVariant::NoBalance => "no_balance",
        }
    }

    pub fn apply(self, spec: &RunSpec) -> RunSpec {
        let mut spec = spec.clone();
        match self {
            AblationVariant::Full => {}
            AblationVariant::NoPe => spec.features.zero_positional = true,
            AblationVariant::NoAttention => spec.model.attention_variant = AttentionVariant::Uniform,
            AblationVariant::AttentionSmallDegree => spec.model.attention_variant = AttentionVariant::DegreeSmall,
            AblationVariant::AttentionLargeDegree => spec.model.attention_variant = AttentionVariant::DegreeLarge,
            AblationVariant::NoBalance => spec.train.class_balance = false,
        }
        spec
    }
}

impl std::str::FromStr for AblationVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AblationVariant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::invalid("variant", format!("unknown ablation variant {s:?}")))
    }
}

/// The base run with one component switched off or replaced. Every variant sees the same
/// dataset and initialization seed as the full model.
pub fn run_ablation(variant: AblationVariant, base: &RunSpec, graph: &Graph) -> Result<RunResult> {
    run_experiment(graph, &variant.apply(base)).map_err(|e| e.context(format!("ablation {}", variant.name())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets;
    use crate::encoding::assemble_features;

    fn tiny_spec(graph: &Graph) -> RunSpec {
        let mut spec = RunSpec::for_graph(graph);
        spec.features.k = 4;
        spec.model.hidden_width = 8;
        spec.model.heads_per_layer = 2;
        spec.train.epochs = 4;
        spec.num_samples = 10;
        spec.propagation.source_fraction = 0.1;
        spec.baselines = vec![BaselineMethod::Random, BaselineMethod::Degree];
        spec.seed = 3;
        spec
    }

    #[test]
    fn single_point_sweep_matches_plain_run() {
        let g = datasets::connected_random(40, 0.1, 1);
        let spec = tiny_spec(&g);
        let plain = run_experiment(&g, &spec).unwrap();
        let rows = run_sweep(SweepKind::Delta, &[spec.propagation.delta], &spec, &g, None).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].summary, plain.summary);
        assert_eq!(rows[0].baselines, plain.baselines);
    }

    #[test]
    fn sweep_resumes_from_point_files() {
        let g = datasets::connected_random(40, 0.1, 1);
        let spec = tiny_spec(&g);
        let dir = tempfile::tempdir().unwrap();
        let grid = [0.0, 0.2];
        let first = run_sweep(SweepKind::Delta, &grid, &spec, &g, Some(dir.path())).unwrap();
        let marker = dir.path().join("sweep-delta-1.json");
        let stamp = std::fs::metadata(&marker).unwrap().modified().unwrap();
        let second = run_sweep(SweepKind::Delta, &grid, &spec, &g, Some(dir.path())).unwrap();
        assert_eq!(first, second);
        assert_eq!(std::fs::metadata(&marker).unwrap().modified().unwrap(), stamp);
        assert!(run_sweep(SweepKind::Delta, &[], &spec, &g, None).is_err());
    }

    #[test]
    fn no_pe_changes_only_positional_columns() {
        let g = datasets::connected_random(40, 0.1, 1);
        let spec = tiny_spec(&g);
        let full = spec.resolved();
        let no_pe = AblationVariant::NoPe.apply(&spec).resolved();
        let d = build_dataset(&g, &full.propagation, 5, 0.8).unwrap();
        for s in &d.train {
            let a = assemble_features(s, &g, &full.features).unwrap();
            let b = assemble_features(s, &g, &no_pe.features).unwrap();
            assert_eq!(a.data.slice(ndarray::s![.., ..2]), b.data.slice(ndarray::s![.., ..2]));
            assert!(b.positional().iter().all(|&x| x == 0.0));
        }
        assert_eq!(full.propagation, no_pe.propagation);
        assert_eq!(full.train.seed, no_pe.train.seed);
    }

    #[test]
    fn variants_map_to_components() {
        let g = datasets::cycle(10);
        let spec = tiny_spec(&g);
        assert!(!AblationVariant::NoBalance.apply(&spec).train.class_balance);
        assert_eq!(
            AblationVariant::NoAttention.apply(&spec).model.attention_variant,
            AttentionVariant::Uniform
        );
        assert_eq!("no_pe".parse::<AblationVariant>().unwrap(), AblationVariant::NoPe);
        assert_ne!(spec.hash(), AblationVariant::NoPe.apply(&spec).hash());
    }

    #[test]
    fn default_grids() {
        assert_eq!(SweepKind::Theta.default_grid().len(), 5);
        assert_eq!(SweepKind::Delta.default_grid().len(), 6);
    }
}
