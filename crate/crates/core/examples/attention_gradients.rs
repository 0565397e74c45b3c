//! One forward and backward pass of the attention network on a small graph, with a
//! central-difference spot check of a few weight gradients.

use rumor_source::cascade::{generate_snapshot, PropagationConfig};
use rumor_source::datasets;
use rumor_source::encoding::{assemble_features, FeatureConfig};
use rumor_source::model::{backward, forward, init_params, ModelConfig, ModelParams, Neighborhoods};
use rumor_source::rng;
use rumor_source::train::{class_weight, loss};

fn total_loss(
    params: &ModelParams,
    x: &rumor_source::encoding::FeatureMatrix,
    nbrs: &Neighborhoods,
    config: &ModelConfig,
    labels: &[bool],
    xi: f64,
) -> f64 {
    let trace = forward(params, x, nbrs, config).unwrap();
    loss(trace.probabilities.view(), labels, xi, 5e-4, params, false).unwrap().value
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let g = datasets::connected_random(20, 0.2, 5);
    let propagation = PropagationConfig { source_fraction: 0.1, ..PropagationConfig::default() };
    let snapshot = generate_snapshot(&g, &propagation, &mut rng::stream(1, 0))?;
    let features = FeatureConfig { k: 4, ..FeatureConfig::default() };
    let x = assemble_features(&snapshot, &g, &features)?;
    let config = ModelConfig {
        heads_per_layer: 2,
        hidden_width: 8,
        ..ModelConfig::for_graph(g.n(), features.width())
    };
    let nbrs = Neighborhoods::new(&g, config.self_loops_in_attention)?;
    let params = init_params(&config, &mut rng::stream(9, 0))?;
    println!("{} parameters in {} layers", params.num_parameters(), params.layers.len());

    let trace = forward(&params, &x, &nbrs, &config)?;
    let alpha = &trace.layers[0].heads[0].alpha;
    let worst = (0..g.n())
        .map(|i| (alpha[nbrs.range(i)].iter().sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);
    println!("largest attention row-sum error in layer 1: {worst:.2e}");

    let labels: Vec<bool> = (0..g.n()).map(|v| snapshot.cascade.is_source(v)).collect();
    let xi = class_weight(g.n(), snapshot.sources().len())?;
    let out = loss(trace.probabilities.view(), &labels, xi, 5e-4, &params, false)?;
    let mut grad = backward(&params, &config, &nbrs, &trace, out.probability_gradient.view())?;
    let (_, reg_grad) = rumor_source::train::regularization(&params, 5e-4, false);
    grad.add_scaled(&reg_grad, 1.0);
    println!("loss {:.6}", out.value);

    let h = 1e-6;
    for (layer, row, col) in [(0, 0, 0), (1, 2, 3), (2, 1, 5)] {
        let mut plus = params.clone();
        plus.layers[layer].heads[0].w[[row, col]] += h;
        let mut minus = params.clone();
        minus.layers[layer].heads[0].w[[row, col]] -= h;
        let numeric =
            (total_loss(&plus, &x, &nbrs, &config, &labels, xi) - total_loss(&minus, &x, &nbrs, &config, &labels, xi))
                / (2.0 * h);
        let analytic = grad.layers[layer].heads[0].w[[row, col]];
        println!("layer {layer} W[{row},{col}]: analytic {analytic:+.8e} numeric {numeric:+.8e}");
    }
    Ok(())
}
