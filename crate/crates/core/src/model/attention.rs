use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};

use super::{AttentionVariant, HeadParams, LayerParams, ModelConfig, ModelParams};
use crate::encoding::FeatureMatrix;
use crate::error::{Error, Result};
use crate::graph::Graph;

/// Attention neighborhoods in compressed-row form. Row `i` lists `N(i)`, plus `i` itself
/// when self-loops are enabled, in ascending order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Neighborhoods {
    offsets: Vec<usize>,
    targets: Vec<usize>,
}

impl Neighborhoods {
    pub fn new(graph: &Graph, self_loops: bool) -> Result<Self> {
        let mut offsets = Vec::with_capacity(graph.n() + 1);
        let mut targets = Vec::with_capacity(2 * graph.num_edges() + graph.n());
        offsets.push(0);
        for i in 0..graph.n() {
            let nbrs = graph.neighbors(i);
            if self_loops {
                let at = nbrs.partition_point(|&j| j < i);
                targets.extend_from_slice(&nbrs[..at]);
                targets.push(i);
                targets.extend_from_slice(&nbrs[at..]);
            } else {
                if nbrs.is_empty() {
                    return Err(Error::invalid(
                        "self_loops_in_attention",
                        format!("node {i} is isolated, so its attention neighborhood is empty"),
                    ));
                }
                targets.extend_from_slice(nbrs);
            }
            offsets.push(targets.len());
        }
        Ok(Neighborhoods { offsets, targets })
    }

    pub fn n(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Total number of (i, j) attention pairs.
    pub fn num_pairs(&self) -> usize {
        self.targets.len()
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.targets[self.offsets[i]..self.offsets[i + 1]]
    }

    /// Pair indices of row `i`.
    pub fn range(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    /// `|N(i)|`, counting the self-loop when present.
    pub fn size(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }
}

fn lrelu(x: f64, slope: f64) -> f64 {
    if x >= 0.0 { x } else { slope * x }
}

fn lrelu_grad(x: f64, slope: f64) -> f64 {
    if x >= 0.0 { 1.0 } else { slope }
}

fn elu(x: f64) -> f64 {
    if x > 0.0 { x } else { x.exp_m1() }
}

fn elu_grad(x: f64) -> f64 {
    if x > 0.0 { 1.0 } else { x.exp() }
}

fn check_width(x: ArrayView2<'_, f64>, head: &HeadParams, nbrs: &Neighborhoods) -> Result<()> {
    if x.ncols() != head.w.ncols() {
        return Err(Error::Shape(format!("features have {} columns, layer expects {}", x.ncols(), head.w.ncols())));
    }
    if x.nrows() != nbrs.n() {
        return Err(Error::Shape(format!("features have {} rows, graph has {} nodes", x.nrows(), nbrs.n())));
    }
    Ok(())
}

/// Splits `e_ij = a · LReLU([h_i ‖ h_j])` into the per-node halves `s_i = a₁ · LReLU(h_i)`
/// and `t_j = a₂ · LReLU(h_j)`.
fn score_halves(h: ArrayView2<'_, f64>, a: ArrayView1<'_, f64>, slope: f64) -> (Array1<f64>, Array1<f64>) {
    let out = h.ncols();
    let activated = h.mapv(|x| lrelu(x, slope));
    (activated.dot(&a.slice(s![..out])), activated.dot(&a.slice(s![out..])))
}

/// Per-pair logits `e_ij = aᵀ LReLU([W xᵢ ‖ W xⱼ])`, in [`Neighborhoods`] pair order.
pub fn attention_logits(
    head: &HeadParams,
    x: ArrayView2<'_, f64>,
    nbrs: &Neighborhoods,
    slope: f64,
) -> Result<Vec<f64>> {
    check_width(x, head, nbrs)?;
    let h = x.dot(&head.w.t());
    let (src, dst) = score_halves(h.view(), head.a.view(), slope);
    Ok(logits_from_halves(&src, &dst, nbrs))
}

fn logits_from_halves(src: &Array1<f64>, dst: &Array1<f64>, nbrs: &Neighborhoods) -> Vec<f64> {
    let mut e = Vec::with_capacity(nbrs.num_pairs());
    for i in 0..nbrs.n() {
        e.extend(nbrs.row(i).iter().map(|&j| src[i] + dst[j]));
    }
    e
}

/// Row-wise softmax of `logits` over each neighborhood.
pub fn attention_weights(logits: &[f64], nbrs: &Neighborhoods) -> Result<Vec<f64>> {
    if logits.len() != nbrs.num_pairs() {
        return Err(Error::Shape(format!("{} logits for {} attention pairs", logits.len(), nbrs.num_pairs())));
    }
    let mut alpha = vec![0.0; logits.len()];
    for i in 0..nbrs.n() {
        let range = nbrs.range(i);
        if range.is_empty() {
            return Err(Error::invalid("neighborhood", format!("node {i} has an empty attention neighborhood")));
        }
        let row = &logits[range.clone()];
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for (a, &e) in alpha[range.clone()].iter_mut().zip(row) {
            *a = (e - max).exp();
            total += *a;
        }
        for a in &mut alpha[range] {
            *a /= total;
        }
    }
    Ok(alpha)
}

/// Attention weights of the non-learned variants.
fn fixed_weights(variant: AttentionVariant, nbrs: &Neighborhoods) -> Vec<f64> {
    let mut alpha = Vec::with_capacity(nbrs.num_pairs());
    for i in 0..nbrs.n() {
        let row = nbrs.row(i);
        match variant {
            AttentionVariant::Learned => unreachable!("learned weights depend on parameters"),
            AttentionVariant::Uniform => alpha.extend(std::iter::repeat_n(1.0 / row.len() as f64, row.len())),
            AttentionVariant::Sum => alpha.extend(std::iter::repeat_n(1.0, row.len())),
            AttentionVariant::DegreeSmall | AttentionVariant::DegreeLarge => {
                let raw: Vec<f64> = row
                    .iter()
                    .map(|&j| {
                        let d = nbrs.size(j) as f64;
                        if variant == AttentionVariant::DegreeSmall { 1.0 / d } else { d }
                    })
                    .collect();
                let total: f64 = raw.iter().sum();
                alpha.extend(raw.iter().map(|r| r / total));
            }
        }
    }
    alpha
}

/// Everything one head computed during a forward pass.
#[derive(Debug, Clone)]
pub struct HeadTrace {
    /// `H = X Wᵀ`.
    pub projected: Array2<f64>,
    /// Pair logits; empty for the fixed-weight variants.
    pub logits: Vec<f64>,
    pub alpha: Vec<f64>,
    /// `Σ_j α_ij H_j`, before the head nonlinearity.
    pub aggregated: Array2<f64>,
}

#[derive(Debug, Clone)]
pub struct LayerTrace {
    pub input: Array2<f64>,
    pub heads: Vec<HeadTrace>,
    /// Concatenated ELU outputs for hidden layers, mean-pooled logits for the last layer.
    pub output: Array2<f64>,
}

#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub layers: Vec<LayerTrace>,
    /// `n × 2` class probabilities; column 1 is the source class.
    pub probabilities: Array2<f64>,
}

impl ForwardTrace {
    pub fn source_probabilities(&self) -> ArrayView1<'_, f64> {
        self.probabilities.column(1)
    }
}

fn head_forward(
    head: &HeadParams,
    x: ArrayView2<'_, f64>,
    nbrs: &Neighborhoods,
    config: &ModelConfig,
) -> Result<HeadTrace> {
    check_width(x, head, nbrs)?;
    let projected = x.dot(&head.w.t());
    let (logits, alpha) = if config.attention_variant.is_learned() {
        let (src, dst) = score_halves(projected.view(), head.a.view(), config.lrelu_slope);
        let logits = logits_from_halves(&src, &dst, nbrs);
        let alpha = attention_weights(&logits, nbrs)?;
        (logits, alpha)
    } else {
        (Vec::new(), fixed_weights(config.attention_variant, nbrs))
    };
    let mut aggregated = Array2::zeros(projected.raw_dim());
    for i in 0..nbrs.n() {
        let mut row = aggregated.row_mut(i);
        for (p, &j) in nbrs.range(i).zip(nbrs.row(i)) {
            row.scaled_add(alpha[p], &projected.row(j));
        }
    }
    Ok(HeadTrace {
        projected,
        logits,
        alpha,
        aggregated,
    })
}

/// Hidden attention layer: per-head aggregation, ELU, concatenation.
pub fn layer_forward(
    layer: &LayerParams,
    x: ArrayView2<'_, f64>,
    nbrs: &Neighborhoods,
    config: &ModelConfig,
) -> Result<(Array2<f64>, LayerTrace)> {
    let heads = layer
        .heads
        .iter()
        .map(|h| head_forward(h, x, nbrs, config))
        .collect::<Result<Vec<_>>>()?;
    let views: Vec<_> = heads.iter().map(|h| h.aggregated.view()).collect();
    let output = ndarray::concatenate(Axis(1), &views)
        .map_err(|e| Error::Shape(e.to_string()))?
        .mapv_into(elu);
    let trace = LayerTrace {
        input: x.to_owned(),
        heads,
        output: output.clone(),
    };
    Ok((output, trace))
}

/// Output layer: mean of the per-head 2-vectors, then a row softmax.
pub fn final_layer_forward(
    layer: &LayerParams,
    x: ArrayView2<'_, f64>,
    nbrs: &Neighborhoods,
    config: &ModelConfig,
) -> Result<(Array2<f64>, LayerTrace)> {
    if layer.heads.iter().any(|h| h.w.nrows() != 2) {
        return Err(Error::Shape("output heads must be 2 wide".into()));
    }
    let heads = layer
        .heads
        .iter()
        .map(|h| head_forward(h, x, nbrs, config))
        .collect::<Result<Vec<_>>>()?;
    let mut pooled = Array2::zeros((x.nrows(), 2));
    for h in &heads {
        pooled += &h.aggregated;
    }
    pooled /= heads.len() as f64;
    let probabilities = row_softmax(&pooled);
    let trace = LayerTrace {
        input: x.to_owned(),
        heads,
        output: pooled,
    };
    Ok((probabilities, trace))
}

fn row_softmax(z: &Array2<f64>) -> Array2<f64> {
    let mut p = z.clone();
    for mut row in p.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let total = row.sum();
        row /= total;
    }
    p
}

/// Full forward pass.
pub fn forward(
    params: &ModelParams,
    features: &FeatureMatrix,
    nbrs: &Neighborhoods,
    config: &ModelConfig,
) -> Result<ForwardTrace> {
    forward_array(params, features.data.view(), nbrs, config)
}

pub(crate) fn forward_array(
    params: &ModelParams,
    x: ArrayView2<'_, f64>,
    nbrs: &Neighborhoods,
    config: &ModelConfig,
) -> Result<ForwardTrace> {
    params.check_shapes(config)?;
    if x.ncols() != config.input_width {
        return Err(Error::Shape(format!(
            "feature width {} does not match model input width {}",
            x.ncols(),
            config.input_width
        )));
    }
    let mut layers = Vec::with_capacity(params.layers.len());
    let mut current = x.to_owned();
    let last = params.layers.len() - 1;
    for (l, layer) in params.layers.iter().enumerate() {
        let (next, trace) = if l == last {
            final_layer_forward(layer, current.view(), nbrs, config)?
        } else {
            layer_forward(layer, current.view(), nbrs, config)?
        };
        layers.push(trace);
        current = next;
    }
    Ok(ForwardTrace {
        layers,
        probabilities: current,
    })
}

/// Gradient of a scalar loss with respect to every parameter, given `∂loss/∂P` for the
/// `n × 2` probabilities recorded in `trace`.
pub fn backward(
    params: &ModelParams,
    config: &ModelConfig,
    nbrs: &Neighborhoods,
    trace: &ForwardTrace,
    loss_gradient: ArrayView2<'_, f64>,
) -> Result<ModelParams> {
    params.check_shapes(config)?;
    let p = &trace.probabilities;
    if loss_gradient.dim() != p.dim() || p.nrows() != nbrs.n() {
        return Err(Error::Shape(format!(
            "loss gradient {:?} / probabilities {:?} / {} nodes",
            loss_gradient.dim(),
            p.dim(),
            nbrs.n()
        )));
    }
    if trace.layers.len() != params.layers.len() {
        return Err(Error::Shape(format!(
            "trace has {} layers, params have {}",
            trace.layers.len(),
            params.layers.len()
        )));
    }

    // softmax: dz = p ⊙ (dp − ⟨dp, p⟩)
    let mut dz = Array2::zeros(p.raw_dim());
    for ((mut dz_row, p_row), dp_row) in dz.rows_mut().into_iter().zip(p.rows()).zip(loss_gradient.rows()) {
        let inner = p_row.dot(&dp_row);
        for ((d, &pi), &gi) in dz_row.iter_mut().zip(p_row).zip(dp_row) {
            *d = pi * (gi - inner);
        }
    }

    let mut grads = params.zeros_like();
    let last = params.layers.len() - 1;
    // gradient w.r.t. the output of the layer being processed
    let mut d_out = dz;
    for l in (0..=last).rev() {
        let layer = &params.layers[l];
        let lt = &trace.layers[l];
        let k = layer.heads.len();
        if lt.heads.len() != k || lt.input.nrows() != nbrs.n() {
            return Err(Error::Shape(format!("trace layer {l} does not match parameters")));
        }
        let mut d_input = (l > 0).then(|| Array2::<f64>::zeros(lt.input.raw_dim()));
        for (h, (head, ht)) in layer.heads.iter().zip(&lt.heads).enumerate() {
            let width = head.w.nrows();
            let d_agg = if l == last {
                &d_out / k as f64
            } else {
                let slice = d_out.slice(s![.., h * width..(h + 1) * width]);
                let mut d = slice.to_owned();
                d.zip_mut_with(&ht.aggregated, |g, &o| *g *= elu_grad(o));
                d
            };
            let g = &mut grads.layers[l].heads[h];
            let dx = head_backward(head, ht, &lt.input, d_agg.view(), nbrs, config, g, d_input.is_some())?;
            if let (Some(acc), Some(dx)) = (d_input.as_mut(), dx) {
                *acc += &dx;
            }
        }
        if let Some(d) = d_input {
            d_out = d;
        }
    }
    Ok(grads)
}

#[allow(clippy::too_many_arguments)]
fn head_backward(
    head: &HeadParams,
    ht: &HeadTrace,
    input: &Array2<f64>,
    d_agg: ArrayView2<'_, f64>,
    nbrs: &Neighborhoods,
    config: &ModelConfig,
    grad: &mut HeadParams,
    want_input_grad: bool,
) -> Result<Option<Array2<f64>>> {
    let h = &ht.projected;
    if h.dim() != d_agg.dim() || ht.alpha.len() != nbrs.num_pairs() {
        return Err(Error::Shape("stale forward trace".into()));
    }
    let learned = config.attention_variant.is_learned();
    let mut d_h = Array2::<f64>::zeros(h.raw_dim());
    let n = nbrs.n();
    let mut d_src = Array1::<f64>::zeros(n);
    let mut d_dst = Array1::<f64>::zeros(n);
    let mut d_alpha = Vec::new();
    for i in 0..n {
        let range = nbrs.range(i);
        let g_i = d_agg.row(i);
        d_alpha.clear();
        for (p, &j) in range.clone().zip(nbrs.row(i)) {
            d_h.row_mut(j).scaled_add(ht.alpha[p], &g_i);
            if learned {
                d_alpha.push(g_i.dot(&h.row(j)));
            }
        }
        if learned {
            let alpha = &ht.alpha[range];
            let mean: f64 = alpha.iter().zip(&d_alpha).map(|(a, d)| a * d).sum();
            for ((&a, &da), &j) in alpha.iter().zip(&d_alpha).zip(nbrs.row(i)) {
                let de = a * (da - mean);
                d_src[i] += de;
                d_dst[j] += de;
            }
        }
    }
    if learned {
        let width = h.ncols();
        let slope = config.lrelu_slope;
        let activated = h.mapv(|x| lrelu(x, slope));
        grad.a.slice_mut(s![..width]).assign(&activated.t().dot(&d_src));
        grad.a.slice_mut(s![width..]).assign(&activated.t().dot(&d_dst));
        let a_src = head.a.slice(s![..width]);
        let a_dst = head.a.slice(s![width..]);
        for ((i, c), d) in d_h.indexed_iter_mut() {
            *d += (d_src[i] * a_src[c] + d_dst[i] * a_dst[c]) * lrelu_grad(h[[i, c]], slope);
        }
    }
    grad.w.assign(&d_h.t().dot(input));
    Ok(want_input_grad.then(|| d_h.dot(&head.w)))
}
