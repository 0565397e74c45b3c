//! Laplacian spectra and the per-snapshot node features.

use rumor_source::cascade::{generate_snapshot, PropagationConfig};
use rumor_source::datasets;
use rumor_source::encoding::{
    assemble_features, sym_normalized_laplacian, symmetric_eigendecomposition, FeatureConfig,
};
use rumor_source::rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for (name, g) in [("P3", datasets::path(3)), ("K3", datasets::complete(3)), ("C6", datasets::cycle(6))] {
        let l = sym_normalized_laplacian(&g);
        let spectrum = symmetric_eigendecomposition(l.view())?;
        let values: Vec<String> = spectrum.eigenvalues.iter().map(|v| format!("{v:.6}")).collect();
        println!("{name}: {}", values.join(" "));
    }

    let g = datasets::football()?;
    let snapshot = generate_snapshot(&g, &PropagationConfig::default(), &mut rng::stream(3, 0))?;
    let config = FeatureConfig { k: 4, ..FeatureConfig::default() };
    let x = assemble_features(&snapshot, &g, &config)?;
    println!("\nfeatures {} x {}: {}", x.rows(), x.cols(), config.column_names().join(", "));
    for &v in snapshot.sources().iter().take(3) {
        let row: Vec<String> = x.data.row(v).iter().map(|c| format!("{c:+.3}")).collect();
        println!("source {v:>3}: {}", row.join(" "));
    }
    if let Some(v) = (0..g.n()).find(|&v| !snapshot.cascade.positive[v]) {
        let row: Vec<String> = x.data.row(v).iter().map(|c| format!("{c:+.3}")).collect();
        println!("healthy {v:>2}: {}", row.join(" "));
    }
    Ok(())
}
