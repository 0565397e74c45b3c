//! Flat TOML experiment configuration.
//!
//! ```toml
//! dataset = "football"
//! delta = 0.1
//! hidden_width = 800
//! epochs = 200
//! seed = 7
//! ```
//!
//! Unset keys take the defaults below; unknown keys are rejected. Width and head count
//! default by graph size when left out.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cascade::PropagationConfig;
use crate::datasets;
use crate::encoding::FeatureConfig;
use crate::error::{Error, Result};
use crate::graph::{load_edge_list, Graph};
use crate::model::{AttentionVariant, ModelConfig};
use crate::train::{BaselineMethod, PredictMode, RunSpec, TrainConfig};

/// Name of the bundled football graph in the `dataset` key.
pub const BUILTIN_FOOTBALL: &str = "football";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// `"football"` or a path to an edge list.
    pub dataset: String,
    pub delimiter: Option<char>,

    pub source_fraction: f64,
    pub p_low: f64,
    pub p_high: f64,
    pub theta: f64,
    pub delta: f64,
    pub max_retries: usize,
    pub mask_sources: bool,

    pub k: usize,
    pub raw_timestamps: bool,
    pub extended_features: bool,

    pub num_layers: usize,
    pub heads_per_layer: Option<usize>,
    pub hidden_width: Option<usize>,
    pub lrelu_slope: f64,
    pub attention_variant: AttentionVariant,
    pub self_loops_in_attention: bool,

    pub learning_rate: f64,
    pub l2_lambda: f64,
    pub epochs: usize,
    pub early_stop_patience: usize,
    pub class_balance: bool,
    pub threshold: f64,
    pub predict_mode: PredictMode,
    pub literal_norm: bool,
    pub val_fraction: f64,

    pub num_samples: usize,
    pub split: f64,
    pub theta_grid: Vec<f64>,
    pub delta_grid: Vec<f64>,
    pub baselines: Vec<BaselineMethod>,
    pub out_dir: PathBuf,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let p = PropagationConfig::default();
        let f = FeatureConfig::default();
        let m = ModelConfig::for_graph(0, f.width());
        let t = TrainConfig::default();
        ExperimentConfig {
            dataset: BUILTIN_FOOTBALL.into(),
            delimiter: None,
            source_fraction: p.source_fraction,
            p_low: p.p_low,
            p_high: p.p_high,
            theta: p.theta,
            delta: p.delta,
            max_retries: p.max_retries,
            mask_sources: p.mask_sources,
            k: f.k,
            raw_timestamps: f.raw_timestamps,
            extended_features: f.extended,
            num_layers: m.num_layers,
            heads_per_layer: None,
            hidden_width: None,
            lrelu_slope: m.lrelu_slope,
            attention_variant: m.attention_variant,
            self_loops_in_attention: m.self_loops_in_attention,
            learning_rate: t.learning_rate,
            l2_lambda: t.l2_lambda,
            epochs: t.epochs,
            early_stop_patience: t.early_stop_patience,
            class_balance: t.class_balance,
            threshold: t.threshold,
            predict_mode: t.predict_mode,
            literal_norm: t.literal_norm,
            val_fraction: t.val_fraction,
            num_samples: 100,
            split: 0.8,
            theta_grid: crate::train::SweepKind::Theta.default_grid(),
            delta_grid: crate::train::SweepKind::Delta.default_grid(),
            baselines: Vec::new(),
            out_dir: PathBuf::from("out"),
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Invalid {
            field: origin.display().to_string(),
            message: e.message().to_string(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Sets one key from a `key=value` string. The value is read as TOML, falling back to
    /// a plain string.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| Error::invalid("--set", format!("expected key=value, got {assignment:?}")))?;
        let key = key.trim();
        let raw = raw.trim();
        let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(raw.to_string()));
        let mut table = toml::Table::try_from(&*self).expect("config serializes");
        if !table.contains_key(key) && !Self::optional_keys().contains(&key) {
            return Err(Error::invalid(key, "unknown configuration key"));
        }
        table.insert(key.to_string(), value);
        *self = table.try_into().map_err(|e: toml::de::Error| Error::invalid(key, e.message().to_string()))?;
        Ok(())
    }

    fn optional_keys() -> [&'static str; 3] {
        ["delimiter", "heads_per_layer", "hidden_width"]
    }

    pub fn load_graph(&self) -> Result<Graph> {
        if self.dataset == BUILTIN_FOOTBALL {
            datasets::football()
        } else {
            load_edge_list(&self.dataset, self.delimiter)
        }
    }

    /// Settings for a graph with `n` nodes, validated.
    pub fn run_spec(&self, n: usize) -> Result<RunSpec> {
        let features = FeatureConfig {
            k: self.k,
            raw_timestamps: self.raw_timestamps,
            extended: self.extended_features,
            zero_positional: false,
        };
        let sized = ModelConfig::for_graph(n, features.width());
        let spec = RunSpec {
            propagation: PropagationConfig {
                source_fraction: self.source_fraction,
                p_low: self.p_low,
                p_high: self.p_high,
                theta: self.theta,
                delta: self.delta,
                max_retries: self.max_retries,
                mask_sources: self.mask_sources,
                seed: 0,
            },
            model: ModelConfig {
                num_layers: self.num_layers,
                heads_per_layer: self.heads_per_layer.unwrap_or(sized.heads_per_layer),
                hidden_width: self.hidden_width.unwrap_or(sized.hidden_width),
                input_width: features.width(),
                output_classes: 2,
                lrelu_slope: self.lrelu_slope,
                attention_variant: self.attention_variant,
                self_loops_in_attention: self.self_loops_in_attention,
            },
            features,
            train: TrainConfig {
                learning_rate: self.learning_rate,
                l2_lambda: self.l2_lambda,
                epochs: self.epochs,
                early_stop_patience: self.early_stop_patience,
                class_balance: self.class_balance,
                threshold: self.threshold,
                predict_mode: self.predict_mode,
                literal_norm: self.literal_norm,
                val_fraction: self.val_fraction,
                seed: 0,
            },
            num_samples: self.num_samples,
            split: self.split,
            baselines: self.baselines.clone(),
            seed: self.seed,
        };
        spec.validate()?;
        for (name, grid) in [("theta_grid", &self.theta_grid), ("delta_grid", &self.delta_grid)] {
            if grid.is_empty() {
                return Err(Error::invalid(name, "grid is empty"));
            }
        }
        for &t in &self.theta_grid {
            if !(t > 0.0 && t <= 1.0) {
                return Err(Error::invalid("theta_grid", format!("{t} is not in (0, 1]")));
            }
        }
        for &d in &self.delta_grid {
            if !(0.0..1.0).contains(&d) {
                return Err(Error::invalid("delta_grid", format!("{d} is not in [0, 1)")));
            }
        }
        Ok(spec)
    }

    /// Short content hash; equal hashes mean equal configurations. The output directory
    /// is left out.
    pub fn hash(&self) -> String {
        let content = ExperimentConfig { out_dir: PathBuf::new(), ..self.clone() };
        let text = serde_json::to_string(&content).expect("config serializes");
        hex::encode(&Sha256::digest(text.as_bytes())[..8])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve_to_size_dependent_widths() {
        let c = ExperimentConfig::default();
        let spec = c.run_spec(115).unwrap();
        assert_eq!(spec.model.heads_per_layer, 4);
        assert_eq!(spec.model.hidden_width, 800);
        assert_eq!(spec.model.input_width, 18);
        assert_eq!(c.run_spec(5000).unwrap().model.heads_per_layer, 2);
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = ExperimentConfig::from_toml("delta = 0.1\nbogus = 3\n", Path::new("x.toml")).unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
        let mut c = ExperimentConfig::default();
        assert!(c.set("bogus=1").is_err());
    }

    #[test]
    fn invalid_values_name_the_field() {
        let c = ExperimentConfig::from_toml("delta = 1.5\n", Path::new("x.toml")).unwrap();
        match c.run_spec(115) {
            Err(Error::Invalid { field, .. }) => assert_eq!(field, "delta"),
            other => panic!("{other:?}"),
        }
        let c = ExperimentConfig { hidden_width: Some(801), ..ExperimentConfig::default() };
        assert!(c.run_spec(115).is_err());
    }

    #[test]
    fn overrides_and_round_trip() {
        let mut c = ExperimentConfig::from_toml("epochs = 10\nseed = 4\n", Path::new("x.toml")).unwrap();
        c.set("epochs=3").unwrap();
        c.set("hidden_width = 16").unwrap();
        c.set("attention_variant=uniform").unwrap();
        c.set("baselines=[\"degree\"]").unwrap();
        c.set("dataset=graphs/x.edges").unwrap();
        assert_eq!(c.epochs, 3);
        assert_eq!(c.hidden_width, Some(16));
        assert_eq!(c.attention_variant, AttentionVariant::Uniform);
        assert_eq!(c.baselines, [BaselineMethod::Degree]);
        assert_eq!(c.dataset, "graphs/x.edges");
        assert!(c.set("epochs=many").is_err());
        let back = ExperimentConfig::from_toml(&c.to_toml(), Path::new("y.toml")).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
        c.seed += 1;
        assert_ne!(back.hash(), c.hash());
        let moved = ExperimentConfig { out_dir: "elsewhere".into(), ..c.clone() };
        assert_eq!(moved.hash(), c.hash());
    }
}
