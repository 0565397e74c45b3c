//! Training, prediction and evaluation.

mod baselines;
mod experiment;
mod metrics;

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

pub use baselines::{baseline_detect, BaselineMethod};
pub use experiment::{
    evaluate_baseline, run_ablation, run_experiment, run_sweep, AblationVariant, RunResult, RunSpec, SweepKind, SweepRow,
};
pub use metrics::{compute_metrics, MetricsReport, MetricsSummary};

use crate::cascade::Snapshot;
use crate::encoding::{assemble_features, FeatureConfig, FeatureMatrix};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::model::{backward, forward, init_params, ModelConfig, ModelParams, Neighborhoods};
use crate::rng;

/// Probabilities below this are clamped before taking the log.
pub const PROBABILITY_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictMode {
    /// Every node whose source probability exceeds the threshold.
    Threshold,
    /// The `|s|` most probable nodes, ties broken by node id.
    TopK,
}

impl std::str::FromStr for PredictMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "threshold" => Ok(PredictMode::Threshold),
            "top_k" => Ok(PredictMode::TopK),
            other => Err(Error::invalid("predict_mode", format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub l2_lambda: f64,
    pub epochs: usize,
    pub early_stop_patience: usize,
    /// `false` forces ξ = 1.
    pub class_balance: bool,
    pub threshold: f64,
    pub predict_mode: PredictMode,
    /// Penalize `λ Σ ‖W‖` instead of `λ Σ ‖W‖²`.
    pub literal_norm: bool,
    /// Trailing fraction of the training snapshots held out for early stopping.
    pub val_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            l2_lambda: 5e-4,
            epochs: 200,
            early_stop_patience: 25,
            class_balance: true,
            threshold: 0.5,
            predict_mode: PredictMode::Threshold,
            literal_norm: false,
            val_fraction: 0.125,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate", format!("{} must be positive", self.learning_rate)));
        }
        if !(self.l2_lambda >= 0.0 && self.l2_lambda.is_finite()) {
            return Err(Error::invalid("l2_lambda", format!("{} must be non-negative", self.l2_lambda)));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::invalid("threshold", format!("{} is not in (0, 1)", self.threshold)));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs", "must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(Error::invalid("val_fraction", format!("{} is not in [0, 1)", self.val_fraction)));
        }
        Ok(())
    }
}

/// `ξ = |s| / (n − |s|)`.
pub fn class_weight(n: usize, s_count: usize) -> Result<f64> {
    if s_count == 0 || s_count >= n {
        return Err(Error::invalid("sources", format!("need 0 < |s| < n, got |s| = {s_count}, n = {n}")));
    }
    Ok(s_count as f64 / (n - s_count) as f64)
}

#[derive(Debug, Clone)]
pub struct LossOutput {
    pub value: f64,
    pub data_term: f64,
    pub regularization: f64,
    /// `∂loss/∂P`, `n × 2`.
    pub probability_gradient: Array2<f64>,
    /// Number of true-class probabilities that hit [`PROBABILITY_FLOOR`].
    pub clamped: usize,
}

/// Regularization value and its gradient (projection matrices only).
pub fn regularization(params: &ModelParams, lambda: f64, literal_norm: bool) -> (f64, ModelParams) {
    let mut grad = params.zeros_like();
    let mut value = 0.0;
    if lambda == 0.0 {
        return (0.0, grad);
    }
    for (layer, g_layer) in params.layers.iter().zip(&mut grad.layers) {
        for (h, g) in layer.heads.iter().zip(&mut g_layer.heads) {
            let sq: f64 = h.w.iter().map(|x| x * x).sum();
            if literal_norm {
                let norm = sq.sqrt();
                value += lambda * norm;
                if norm > 0.0 {
                    g.w.assign(&(&h.w * (lambda / norm)));
                }
            } else {
                value += lambda * sq;
                g.w.assign(&(&h.w * (2.0 * lambda)));
            }
        }
    }
    (value, grad)
}

/// Class-balanced negative log-likelihood plus the weight penalty.
pub fn loss(
    probabilities: ArrayView2<'_, f64>,
    is_source: &[bool],
    xi: f64,
    lambda: f64,
    params: &ModelParams,
    literal_norm: bool,
) -> Result<LossOutput> {
    let n = probabilities.nrows();
    if probabilities.ncols() != 2 || is_source.len() != n {
        return Err(Error::Shape(format!(
            "probabilities {:?} for {} labels",
            probabilities.dim(),
            is_source.len()
        )));
    }
    let mut grad = Array2::zeros((n, 2));
    let mut data_term = 0.0;
    let mut clamped = 0;
    for (i, &src) in is_source.iter().enumerate() {
        let (class, weight) = if src { (1, 1.0) } else { (0, xi) };
        let p = probabilities[[i, class]];
        if p < PROBABILITY_FLOOR {
            clamped += 1;
            data_term -= weight * PROBABILITY_FLOOR.ln();
        } else {
            data_term -= weight * p.ln();
            grad[[i, class]] = -weight / p;
        }
    }
    if clamped > 0 {
        log::warn!("{clamped} true-class probabilities clamped at {PROBABILITY_FLOOR:e}");
    }
    let (reg, _) = regularization(params, lambda, literal_norm);
    Ok(LossOutput {
        value: data_term + reg,
        data_term,
        regularization: reg,
        probability_gradient: grad,
        clamped,
    })
}

/// Adam with decay rates 0.9 / 0.999 and epsilon 1e-8.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    m: ModelParams,
    v: ModelParams,
    t: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    pub fn new(params: &ModelParams, learning_rate: f64) -> Self {
        Adam {
            learning_rate,
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut ModelParams, grad: &ModelParams) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        let lr = self.learning_rate;
        let tensors = params
            .tensors_mut()
            .into_iter()
            .zip(grad.tensors())
            .zip(self.m.tensors_mut())
            .zip(self.v.tensors_mut());
        for (((p, g), m), v) in tensors {
            for i in 0..p.len() {
                m[i] = Self::BETA1 * m[i] + (1.0 - Self::BETA1) * g[i];
                v[i] = Self::BETA2 * v[i] + (1.0 - Self::BETA2) * g[i] * g[i];
                p[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + Self::EPS);
            }
        }
    }
}

/// A snapshot with its features and labels precomputed.
#[derive(Debug, Clone)]
pub struct Prepared<'a> {
    pub snapshot: &'a Snapshot,
    pub features: FeatureMatrix,
    pub is_source: Vec<bool>,
}

pub fn prepare<'a>(snapshots: &'a [Snapshot], graph: &Graph, features: &FeatureConfig) -> Result<Vec<Prepared<'a>>> {
    use rayon::prelude::*;
    snapshots
        .par_iter()
        .map(|s| {
            let mut is_source = vec![false; s.n()];
            for &v in s.sources() {
                is_source[v] = true;
            }
            Ok(Prepared {
                snapshot: s,
                features: assemble_features(s, graph, features)?,
                is_source,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Mean loss over the epoch's optimizer steps.
    pub train_loss: f64,
    pub val_f_score: Option<f64>,
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the best validation epoch (the last epoch without validation data).
    pub params: ModelParams,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub model_config: ModelConfig,
    pub clamped: usize,
}

/// Trains from scratch. The trailing `val_fraction` of `train_set` is held out for early
/// stopping on mean F-score.
pub fn train(
    train_set: &[Snapshot],
    graph: &Graph,
    model_config: &ModelConfig,
    features: &FeatureConfig,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    model_config.validate()?;
    if train_set.is_empty() {
        return Err(Error::EmptyInput("training set has no snapshots".into()));
    }
    if model_config.input_width != features.width() {
        return Err(Error::Shape(format!(
            "model input width {} does not match feature width {}",
            model_config.input_width,
            features.width()
        )));
    }
    let val_count = crate::cascade::rounded_count(config.val_fraction, train_set.len()).min(train_set.len() - 1);
    let (fit, val) = train_set.split_at(train_set.len() - val_count);
    let fit = prepare(fit, graph, features)?;
    let val = prepare(val, graph, features)?;
    let nbrs = Neighborhoods::new(graph, model_config.self_loops_in_attention)?;

    let mut params = init_params(model_config, &mut rng::stream(config.seed, 0))?;
    let mut adam = Adam::new(&params, config.learning_rate);
    let mut shuffle_rng = rng::stream(config.seed, 1);
    let mut order: Vec<usize> = (0..fit.len()).collect();
    let mut history = Vec::new();
    let mut best: Option<(f64, usize, ModelParams)> = None;
    let mut clamped = 0;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut total = 0.0;
        for &idx in &order {
            let item = &fit[idx];
            let trace = forward(&params, &item.features, &nbrs, model_config)?;
            let xi = if config.class_balance {
                class_weight(item.snapshot.n(), item.snapshot.sources().len())?
            } else {
                1.0
            };
            let out = loss(
                trace.probabilities.view(),
                &item.is_source,
                xi,
                config.l2_lambda,
                &params,
                config.literal_norm,
            )?;
            if !out.value.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    snapshot: idx,
                    loss: out.value,
                });
            }
            clamped += out.clamped;
            total += out.value;
            let mut grad = backward(&params, model_config, &nbrs, &trace, out.probability_gradient.view())?;
            let (_, reg_grad) = regularization(&params, config.l2_lambda, config.literal_norm);
            grad.add_scaled(&reg_grad, 1.0);
            adam.step(&mut params, &grad);
            if !params.all_finite() {
                return Err(Error::Diverged {
                    epoch,
                    snapshot: idx,
                    loss: f64::NAN,
                });
            }
        }
        let train_loss = total / fit.len() as f64;

        let (val_f, val_acc) = if val.is_empty() {
            (None, None)
        } else {
            let reports = evaluate_prepared(&params, &val, &nbrs, model_config, config)?;
            let summary = MetricsSummary::from_reports(&reports);
            (Some(summary.f_mean), Some(summary.acc_mean))
        };
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_f_score: val_f,
            val_accuracy: val_acc,
        });
        log::debug!("epoch {epoch}: loss {train_loss:.6} val F {val_f:?}");

        let score = val_f.unwrap_or(f64::NEG_INFINITY);
        match &best {
            Some((b, ..)) if score <= *b && val_f.is_some() => {}
            _ => best = Some((score, epoch, params.clone())),
        }
        let best_epoch = best.as_ref().map_or(epoch, |b| b.1);
        if val_f.is_some() && epoch - best_epoch >= config.early_stop_patience {
            break;
        }
    }
    let (_, best_epoch, best_params) = best.expect("at least one epoch ran");
    Ok(TrainOutcome {
        params: best_params,
        history,
        best_epoch,
        model_config: model_config.clone(),
        clamped,
    })
}

/// Nodes predicted as sources from the source-class probabilities.
pub fn predict_from_probabilities(
    source_probability: ArrayView1<'_, f64>,
    mode: PredictMode,
    threshold: f64,
    k: usize,
) -> Vec<usize> {
    match mode {
        PredictMode::Threshold => (0..source_probability.len())
            .filter(|&v| source_probability[v] > threshold)
            .collect(),
        PredictMode::TopK => {
            let mut order: Vec<usize> = (0..source_probability.len()).collect();
            order.sort_by(|&a, &b| source_probability[b].total_cmp(&source_probability[a]).then(a.cmp(&b)));
            order.truncate(k);
            order.sort_unstable();
            order
        }
    }
}

/// Predicted source set for one snapshot. `top_k` mode uses the true `|s|`.
pub fn predict_sources(
    params: &ModelParams,
    snapshot: &Snapshot,
    graph: &Graph,
    model_config: &ModelConfig,
    features: &FeatureConfig,
    mode: PredictMode,
    threshold: f64,
) -> Result<Vec<usize>> {
    let nbrs = Neighborhoods::new(graph, model_config.self_loops_in_attention)?;
    let x = assemble_features(snapshot, graph, features)?;
    let trace = forward(params, &x, &nbrs, model_config)?;
    Ok(predict_from_probabilities(
        trace.source_probabilities(),
        mode,
        threshold,
        snapshot.sources().len(),
    ))
}

fn evaluate_prepared(
    params: &ModelParams,
    items: &[Prepared<'_>],
    nbrs: &Neighborhoods,
    model_config: &ModelConfig,
    config: &TrainConfig,
) -> Result<Vec<MetricsReport>> {
    use rayon::prelude::*;
    items
        .par_iter()
        .map(|item| {
            let trace = forward(params, &item.features, nbrs, model_config)?;
            let predicted = predict_from_probabilities(
                trace.source_probabilities(),
                config.predict_mode,
                config.threshold,
                item.snapshot.sources().len(),
            );
            Ok(compute_metrics(&predicted, item.snapshot))
        })
        .collect()
}

/// Per-snapshot metrics of a trained model.
pub fn evaluate(
    params: &ModelParams,
    snapshots: &[Snapshot],
    graph: &Graph,
    model_config: &ModelConfig,
    features: &FeatureConfig,
    config: &TrainConfig,
) -> Result<Vec<MetricsReport>> {
    let items = prepare(snapshots, graph, features)?;
    let nbrs = Neighborhoods::new(graph, model_config.self_loops_in_attention)?;
    evaluate_prepared(params, &items, &nbrs, model_config, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cascade::{build_dataset, PropagationConfig};
    use crate::datasets;
    use ndarray::array;
    use num_rational::Ratio;
    use proptest::prelude::*;

    #[test]
    fn class_weight_examples() {
        assert!((class_weight(100, 5).unwrap() - 1.0 / 19.0).abs() < 1e-15);
        assert_eq!(class_weight(2, 1).unwrap(), 1.0);
        assert!(class_weight(5, 0).is_err());
        assert!(class_weight(5, 5).is_err());
    }

    proptest! {
        #[test]
        fn weight_expectation_identity(n in 2u64..100_000, frac in 0.0f64..1.0) {
            let s = 1 + ((n - 2) as f64 * frac) as u64;
            let xi = Ratio::new(s, n - s);
            prop_assert_eq!(xi * Ratio::from_integer(n - s), Ratio::from_integer(s));
        }

        #[test]
        fn loss_matches_two_pass_oracle(
            rows in proptest::collection::vec((0.001f64..0.999, any::<bool>()), 2..40),
            xi in 0.01f64..2.0,
        ) {
            let n = rows.len();
            let probs = Array2::from_shape_fn((n, 2), |(i, c)| if c == 1 { rows[i].0 } else { 1.0 - rows[i].0 });
            let labels: Vec<bool> = rows.iter().map(|r| r.1).collect();
            let params = ModelParams { layers: Vec::new() };
            let out = loss(probs.view(), &labels, xi, 0.0, &params, false).unwrap();
            let mut sources = 0.0;
            for i in (0..n).filter(|&i| labels[i]) {
                sources += -probs[[i, 1]].ln();
            }
            let mut others = 0.0;
            for i in (0..n).filter(|&i| !labels[i]) {
                others += -probs[[i, 0]].ln();
            }
            prop_assert!((out.value - (sources + xi * others)).abs() <= 1e-12 * (1.0 + out.value.abs()));
        }
    }

    #[test]
    fn uniform_predictions_loss() {
        let n = 40;
        let labels: Vec<bool> = (0..n).map(|i| i % 8 == 0).collect();
        let s = labels.iter().filter(|&&b| b).count();
        let probs = Array2::from_elem((n, 2), 0.5);
        let config = ModelConfig { hidden_width: 4, heads_per_layer: 2, ..ModelConfig::for_graph(n, 3) };
        let params = init_params(&config, &mut rng::stream(0, 0)).unwrap();
        let reg = 5e-4 * params.weight_sq_norm();
        let xi = class_weight(n, s).unwrap();
        let out = loss(probs.view(), &labels, xi, 5e-4, &params, false).unwrap();
        assert!((out.value - (2.0 * s as f64 * 2f64.ln() + reg)).abs() < 1e-10);
        let out = loss(probs.view(), &labels, 1.0, 5e-4, &params, false).unwrap();
        assert!((out.value - (n as f64 * 2f64.ln() + reg)).abs() < 1e-10);
    }

    #[test]
    fn perfect_predictions_leave_regularization() {
        let probs = array![[0.0, 1.0], [1.0, 0.0]];
        let params = ModelParams { layers: Vec::new() };
        let out = loss(probs.view(), &[true, false], 1.0, 0.1, &params, false).unwrap();
        assert_eq!(out.data_term, 0.0);
        assert_eq!(out.clamped, 0);
        let out = loss(probs.view(), &[false, true], 1.0, 0.0, &params, false).unwrap();
        assert_eq!(out.clamped, 2);
        assert!(out.value.is_finite());
    }

    #[test]
    fn regularization_gradients() {
        let config = ModelConfig { hidden_width: 4, heads_per_layer: 2, ..ModelConfig::for_graph(10, 3) };
        let params = init_params(&config, &mut rng::stream(1, 0)).unwrap();
        for literal in [false, true] {
            let (value, grad) = regularization(&params, 0.3, literal);
            let mut probe = params.clone();
            let h = 1e-6;
            let orig = probe.layers[1].heads[0].w[[0, 1]];
            probe.layers[1].heads[0].w[[0, 1]] = orig + h;
            let up = regularization(&probe, 0.3, literal).0;
            probe.layers[1].heads[0].w[[0, 1]] = orig - h;
            let down = regularization(&probe, 0.3, literal).0;
            let numeric = (up - down) / (2.0 * h);
            assert!((numeric - grad.layers[1].heads[0].w[[0, 1]]).abs() < 1e-8);
            assert!(value > 0.0);
            assert!(grad.layers[0].heads[0].a.iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn prediction_rules() {
        let half = Array2::from_elem((4, 2), 0.5);
        assert!(predict_from_probabilities(half.column(1), PredictMode::Threshold, 0.5, 1).is_empty());
        let p = ndarray::arr1(&[0.9, 0.8, 0.8, 0.1]);
        assert_eq!(predict_from_probabilities(p.view(), PredictMode::TopK, 0.5, 2), [0, 1]);
        let p = ndarray::arr1(&[0.1, 0.8, 0.9, 0.8]);
        assert_eq!(predict_from_probabilities(p.view(), PredictMode::TopK, 0.5, 2), [1, 2]);
        let strict = predict_from_probabilities(p.view(), PredictMode::Threshold, 0.85, 0);
        let loose = predict_from_probabilities(p.view(), PredictMode::Threshold, 0.5, 0);
        assert!(strict.iter().all(|v| loose.contains(v)));
    }

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        let config = ModelConfig { hidden_width: 2, heads_per_layer: 1, ..ModelConfig::for_graph(10, 2) };
        let mut params = ModelParams::zeros(&config);
        let mut grad = params.zeros_like();
        grad.layers[0].heads[0].w[[0, 0]] = 3.0;
        grad.layers[0].heads[0].w[[0, 1]] = -0.01;
        let mut adam = Adam::new(&params, 0.1);
        adam.step(&mut params, &grad);
        assert!((params.layers[0].heads[0].w[[0, 0]] + 0.1).abs() < 1e-8);
        assert!((params.layers[0].heads[0].w[[0, 1]] - 0.1).abs() < 1e-6);
        assert_eq!(params.layers[0].heads[0].w[[1, 0]], 0.0);
    }

    fn tiny_setup() -> (Graph, Vec<Snapshot>, ModelConfig, FeatureConfig, TrainConfig) {
        let g = datasets::connected_random(40, 0.1, 6);
        let prop = PropagationConfig { seed: 2, source_fraction: 0.1, ..PropagationConfig::default() };
        let d = build_dataset(&g, &prop, 10, 0.8).unwrap();
        let features = FeatureConfig { k: 4, ..FeatureConfig::default() };
        let model = ModelConfig {
            hidden_width: 8,
            heads_per_layer: 2,
            ..ModelConfig::for_graph(g.n(), features.width())
        };
        let train_config = TrainConfig { epochs: 12, learning_rate: 1e-2, seed: 5, ..TrainConfig::default() };
        (g, d.train, model, features, train_config)
    }

    #[test]
    fn training_is_deterministic_and_bounded() {
        let (g, snaps, model, features, config) = tiny_setup();
        let a = train(&snaps, &g, &model, &features, &config).unwrap();
        let b = train(&snaps, &g, &model, &features, &config).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.history, b.history);
        assert!(a.history.len() <= config.epochs);
        assert!(a.best_epoch <= a.history.len());
        assert!(a.history.iter().all(|h| h.val_f_score.is_some()));
    }

    #[test]
    fn training_reduces_loss() {
        let (g, snaps, model, features, config) = tiny_setup();
        let out = train(&snaps, &g, &model, &features, &config).unwrap();
        let first = out.history.first().unwrap().train_loss;
        let last = out.history.last().unwrap().train_loss;
        assert!(last < first, "{first} -> {last}");
    }

    #[test]
    fn training_rejects_bad_inputs() {
        let (g, snaps, model, features, config) = tiny_setup();
        assert!(matches!(train(&[], &g, &model, &features, &config), Err(Error::EmptyInput(_))));
        let wide = ModelConfig { input_width: 9, ..model.clone() };
        assert!(matches!(train(&snaps, &g, &wide, &features, &config), Err(Error::Shape(_))));
        let bad = TrainConfig { threshold: 1.0, ..config };
        assert!(train(&snaps, &g, &model, &features, &bad).is_err());
    }

    #[test]
    fn divergence_is_reported() {
        let (g, snaps, model, features, config) = tiny_setup();
        let wild = TrainConfig { learning_rate: f64::MAX, epochs: 3, ..config };
        match train(&snaps, &g, &model, &features, &wild) {
            Err(Error::Diverged { epoch, .. }) => assert_eq!(epoch, 1),
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
