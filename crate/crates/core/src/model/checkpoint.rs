//! JSON checkpoints. Tensors are stored shape-tagged as base64 little-endian f64.

use std::path::Path;

use base64::Engine as _;
use base64::engine::general_purpose::STANDARD;
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{HeadParams, LayerParams, ModelConfig, ModelParams};
use crate::encoding::FeatureConfig;
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TensorRecord {
    name: String,
    shape: Vec<usize>,
    data: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub model: ModelConfig,
    pub features: FeatureConfig,
    pub seed: u64,
    /// Epoch the parameters were taken from (1-based).
    pub epoch: usize,
    /// Hash of the graph the model was trained on.
    pub graph_hash: String,
    tensors: Vec<TensorRecord>,
}

fn encode(values: &[f64]) -> String {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    STANDARD.encode(bytes)
}

fn decode(text: &str, expected: usize, name: &str) -> Result<Vec<f64>> {
    let bytes = STANDARD
        .decode(text)
        .map_err(|e| Error::Schema(format!("tensor {name}: {e}")))?;
    if bytes.len() != expected * 8 {
        return Err(Error::Shape(format!("tensor {name}: {} bytes for {expected} values", bytes.len())));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

impl Checkpoint {
    pub fn new(
        params: &ModelParams,
        model: &ModelConfig,
        features: &FeatureConfig,
        seed: u64,
        epoch: usize,
        graph_hash: impl Into<String>,
    ) -> Result<Self> {
        params.check_shapes(model)?;
        let mut tensors = Vec::new();
        for (l, layer) in params.layers.iter().enumerate() {
            for (h, head) in layer.heads.iter().enumerate() {
                tensors.push(TensorRecord {
                    name: format!("layer{l}.head{h}.w"),
                    shape: head.w.shape().to_vec(),
                    data: encode(head.w.as_slice().expect("standard layout")),
                });
                tensors.push(TensorRecord {
                    name: format!("layer{l}.head{h}.a"),
                    shape: vec![head.a.len()],
                    data: encode(head.a.as_slice().expect("standard layout")),
                });
            }
        }
        Ok(Checkpoint {
            version: CHECKPOINT_VERSION,
            model: model.clone(),
            features: features.clone(),
            seed,
            epoch,
            graph_hash: graph_hash.into(),
            tensors,
        })
    }

    /// Decodes the parameters, checking every shape against the stored config.
    pub fn params(&self) -> Result<ModelParams> {
        self.model.validate()?;
        if self.model.input_width != self.features.width() {
            return Err(Error::Shape(format!(
                "model input width {} does not match feature width {}",
                self.model.input_width,
                self.features.width()
            )));
        }
        let mut records = self.tensors.iter();
        let mut next = |name: String, shape: &[usize]| -> Result<Vec<f64>> {
            let rec = records
                .next()
                .ok_or_else(|| Error::Schema(format!("missing tensor {name}")))?;
            if rec.name != name || rec.shape != shape {
                return Err(Error::Shape(format!(
                    "tensor {} {:?}, expected {name} {shape:?}",
                    rec.name, rec.shape
                )));
            }
            decode(&rec.data, shape.iter().product(), &name)
        };
        let mut layers = Vec::new();
        for l in 0..self.model.num_layers {
            let (input, output) = self.model.layer_shape(l);
            let mut heads = Vec::new();
            for h in 0..self.model.heads_per_layer {
                let w = next(format!("layer{l}.head{h}.w"), &[output, input])?;
                let a = next(format!("layer{l}.head{h}.a"), &[2 * output])?;
                heads.push(HeadParams {
                    w: Array2::from_shape_vec((output, input), w).map_err(|e| Error::Shape(e.to_string()))?,
                    a: Array1::from(a),
                });
            }
            layers.push(LayerParams { heads });
        }
        if records.next().is_some() {
            return Err(Error::Schema("checkpoint has more tensors than its config describes".into()));
        }
        let params = ModelParams { layers };
        if !params.all_finite() {
            return Err(Error::Schema("checkpoint contains non-finite parameters".into()));
        }
        Ok(params)
    }
}

pub fn save_checkpoint(path: impl AsRef<Path>, checkpoint: &Checkpoint) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(checkpoint).map_err(|e| Error::Schema(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let checkpoint: Checkpoint =
        serde_json::from_str(&text).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
    if checkpoint.version != CHECKPOINT_VERSION {
        return Err(Error::Schema(format!(
            "{}: checkpoint version {} (supported: {CHECKPOINT_VERSION})",
            path.display(),
            checkpoint.version
        )));
    }
    checkpoint.params()?;
    Ok(checkpoint)
}
