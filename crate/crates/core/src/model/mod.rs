//! Multi-head graph-attention classifier.
//!
//! Every layer runs `K` heads over the full graph. A head projects node features with
//! `W`, scores each edge as `e_ij = a · LReLU([W x_i ‖ W x_j])`, normalizes the scores
//! with a softmax over the neighborhood of `i`, and aggregates `Σ_j α_ij W x_j`. Hidden
//! layers apply ELU per head and concatenate; the last layer averages its 2-wide heads
//! and applies a row softmax.

mod attention;
mod checkpoint;

use ndarray::{Array1, Array2};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

pub use attention::{
    attention_logits, attention_weights, backward, final_layer_forward, forward, layer_forward, ForwardTrace,
    HeadTrace, LayerTrace, Neighborhoods,
};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_VERSION};

use crate::error::{Error, Result};
use crate::rng::Rng;

/// How attention weights are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttentionVariant {
    /// Softmax of learned logits.
    Learned,
    /// `1 / |N(i)|`.
    Uniform,
    /// Every weight is 1 (plain neighborhood sum).
    Sum,
    /// Proportional to `1 / |N(j)|`.
    DegreeSmall,
    /// Proportional to `|N(j)|`.
    DegreeLarge,
}

impl AttentionVariant {
    pub fn is_learned(self) -> bool {
        self == AttentionVariant::Learned
    }
}

impl std::str::FromStr for AttentionVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "learned" => AttentionVariant::Learned,
            "uniform" => AttentionVariant::Uniform,
            "sum" => AttentionVariant::Sum,
            "degree_small" => AttentionVariant::DegreeSmall,
            "degree_large" => AttentionVariant::DegreeLarge,
            other => return Err(Error::invalid("attention_variant", format!("unknown variant {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Attention layers, counting the output layer.
    pub num_layers: usize,
    pub heads_per_layer: usize,
    /// Concatenated width of every hidden layer.
    pub hidden_width: usize,
    pub input_width: usize,
    pub output_classes: usize,
    pub lrelu_slope: f64,
    pub attention_variant: AttentionVariant,
    pub self_loops_in_attention: bool,
}

impl ModelConfig {
    /// Width defaults by graph size: 4 heads / 800 below 1000 nodes, 2 / 500 below
    /// 100k nodes, 1 / 500 above.
    pub fn for_graph(n: usize, input_width: usize) -> Self {
        let (heads, hidden) = match n {
            0..1000 => (4, 800),
            1000..100_000 => (2, 500),
            _ => (1, 500),
        };
        ModelConfig {
            num_layers: 3,
            heads_per_layer: heads,
            hidden_width: hidden,
            input_width,
            output_classes: 2,
            lrelu_slope: 0.2,
            attention_variant: AttentionVariant::Learned,
            self_loops_in_attention: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_layers == 0 {
            return Err(Error::invalid("num_layers", "need at least one layer"));
        }
        if self.heads_per_layer == 0 {
            return Err(Error::invalid("heads_per_layer", "need at least one head"));
        }
        if self.num_layers > 1 && (self.hidden_width == 0 || self.hidden_width % self.heads_per_layer != 0) {
            return Err(Error::invalid(
                "hidden_width",
                format!("{} is not a positive multiple of {} heads", self.hidden_width, self.heads_per_layer),
            ));
        }
        if self.input_width == 0 {
            return Err(Error::invalid("input_width", "must be positive"));
        }
        if self.output_classes != 2 {
            return Err(Error::invalid("output_classes", "the detector is a two-class model"));
        }
        if !self.lrelu_slope.is_finite() {
            return Err(Error::invalid("lrelu_slope", "must be finite"));
        }
        Ok(())
    }

    pub fn head_width(&self) -> usize {
        self.hidden_width / self.heads_per_layer
    }

    /// `(input width, per-head output width)` of layer `l`.
    pub fn layer_shape(&self, l: usize) -> (usize, usize) {
        let last = l + 1 == self.num_layers;
        let input = if l == 0 { self.input_width } else { self.hidden_width };
        let output = if last { self.output_classes } else { self.head_width() };
        (input, output)
    }
}

/// Parameters of one attention head.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadParams {
    /// `out × in` projection.
    pub w: Array2<f64>,
    /// Length `2 · out`; the first half scores the receiving node, the second the neighbor.
    pub a: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub heads: Vec<HeadParams>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub layers: Vec<LayerParams>,
}

impl ModelParams {
    pub fn zeros(config: &ModelConfig) -> Self {
        let layers = (0..config.num_layers)
            .map(|l| {
                let (input, output) = config.layer_shape(l);
                LayerParams {
                    heads: (0..config.heads_per_layer)
                        .map(|_| HeadParams {
                            w: Array2::zeros((output, input)),
                            a: Array1::zeros(2 * output),
                        })
                        .collect(),
                }
            })
            .collect();
        ModelParams { layers }
    }

    pub fn zeros_like(&self) -> Self {
        self.map(|x| x * 0.0)
    }

    fn map(&self, f: impl Fn(f64) -> f64 + Copy) -> Self {
        ModelParams {
            layers: self
                .layers
                .iter()
                .map(|layer| LayerParams {
                    heads: layer
                        .heads
                        .iter()
                        .map(|h| HeadParams {
                            w: h.w.mapv(f),
                            a: h.a.mapv(f),
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    /// Every tensor in a fixed order: per layer, per head, `w` then `a`.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for layer in &self.layers {
            for h in &layer.heads {
                out.push(h.w.as_slice().expect("standard layout"));
                out.push(h.a.as_slice().expect("standard layout"));
            }
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            for h in &mut layer.heads {
                out.push(h.w.as_slice_mut().expect("standard layout"));
                out.push(h.a.as_slice_mut().expect("standard layout"));
            }
        }
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// `Σ ‖W‖²` over all projection matrices (attention vectors excluded).
    pub fn weight_sq_norm(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| &l.heads)
            .map(|h| h.w.iter().map(|x| x * x).sum::<f64>())
            .sum()
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &ModelParams, scale: f64) {
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += scale * s;
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }

    /// Checks shapes against `config`.
    pub fn check_shapes(&self, config: &ModelConfig) -> Result<()> {
        if self.layers.len() != config.num_layers {
            return Err(Error::Shape(format!("{} layers, config has {}", self.layers.len(), config.num_layers)));
        }
        for (l, layer) in self.layers.iter().enumerate() {
            let (input, output) = config.layer_shape(l);
            if layer.heads.len() != config.heads_per_layer {
                return Err(Error::Shape(format!("layer {l} has {} heads", layer.heads.len())));
            }
            for h in &layer.heads {
                if h.w.dim() != (output, input) || h.a.len() != 2 * output {
                    return Err(Error::Shape(format!(
                        "layer {l}: W {:?} / a {} but config wants ({output}, {input}) / {}",
                        h.w.dim(),
                        h.a.len(),
                        2 * output
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Glorot-uniform initialization: entries of each tensor are `U(-b, b)` with
/// `b = sqrt(6 / (fan_in + fan_out))`; an attention vector counts as a `1 × 2·out` matrix.
pub fn init_params(config: &ModelConfig, rng: &mut Rng) -> Result<ModelParams> {
    config.validate()?;
    let mut params = ModelParams::zeros(config);
    for layer in &mut params.layers {
        for h in &mut layer.heads {
            let (out, input) = h.w.dim();
            let bw = glorot_bound(input, out);
            h.w.mapv_inplace(|_| rng.random_range(-bw..=bw));
            let ba = glorot_bound(h.a.len(), 1);
            h.a.mapv_inplace(|_| rng.random_range(-ba..=ba));
        }
    }
    Ok(params)
}

pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn default_shapes() {
        let c = ModelConfig::for_graph(115, 18);
        let p = init_params(&c, &mut rng::stream(0, 0)).unwrap();
        assert_eq!(p.layers[0].heads[0].w.dim(), (200, 18));
        assert_eq!(p.layers[1].heads[0].w.dim(), (200, 800));
        assert_eq!(p.layers[2].heads[0].w.dim(), (2, 800));
        assert_eq!(p.layers[0].heads.len(), 4);
        p.check_shapes(&c).unwrap();
        assert_eq!(ModelConfig::for_graph(4039, 18).heads_per_layer, 2);
        assert_eq!(ModelConfig::for_graph(317_080, 18).heads_per_layer, 1);
    }

    #[test]
    fn init_deterministic_and_bounded() {
        let c = ModelConfig { hidden_width: 12, heads_per_layer: 3, ..ModelConfig::for_graph(10, 5) };
        let a = init_params(&c, &mut rng::stream(3, 1)).unwrap();
        let b = init_params(&c, &mut rng::stream(3, 1)).unwrap();
        assert_eq!(a, b);
        for layer in &a.layers {
            for h in &layer.heads {
                let (out, input) = h.w.dim();
                let bw = glorot_bound(input, out);
                assert!(h.w.iter().all(|x| x.abs() <= bw));
                let ba = glorot_bound(h.a.len(), 1);
                assert!(h.a.iter().all(|x| x.abs() <= ba));
            }
        }
    }

    #[test]
    fn invalid_configs() {
        let base = ModelConfig::for_graph(10, 5);
        assert!(ModelConfig { hidden_width: 801, ..base.clone() }.validate().is_err());
        assert!(ModelConfig { num_layers: 0, ..base.clone() }.validate().is_err());
        assert!(ModelConfig { output_classes: 3, ..base }.validate().is_err());
    }

    #[test]
    fn variant_parsing() {
        assert_eq!("degree_small".parse::<AttentionVariant>().unwrap(), AttentionVariant::DegreeSmall);
        assert!("other".parse::<AttentionVariant>().is_err());
    }
}
