use rumor_source::datasets;
use rumor_source::train::{evaluate, run_experiment, MetricsSummary, RunSpec};

#[test]
fn default_football_loss_falls_early() {
    let g = datasets::football().unwrap();
    let mut spec = RunSpec::for_graph(&g);
    spec.train.epochs = 6;
    spec.train.early_stop_patience = 10;
    let r = run_experiment(&g, &spec).unwrap();
    let losses: Vec<f64> = r.outcome.history.iter().map(|h| h.train_loss).collect();
    let falling = losses.windows(2).take(5).filter(|w| w[1] < w[0]).count();
    assert!(falling >= 4, "{losses:?}");
}

#[test]
fn converged_run_fits_train_at_least_as_well_as_test() {
    let g = datasets::football().unwrap();
    let mut spec = RunSpec::for_graph(&g);
    spec.model.hidden_width = 64;
    spec.train.early_stop_patience = spec.train.epochs;
    let r = run_experiment(&g, &spec).unwrap();
    let res = r.spec.resolved();
    let train = evaluate(&r.outcome.params, &r.dataset.train, &g, &res.model, &res.features, &res.train).unwrap();
    let train = MetricsSummary::from_reports(&train);
    assert!(train.f_mean >= r.summary.f_mean, "train {} test {}", train.f_mean, r.summary.f_mean);
    assert!(r.outcome.best_epoch <= r.outcome.history.len());
}
