use serde::{Deserialize, Serialize};

use crate::cascade::Snapshot;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    /// `|ŝ ∩ s ∩ Ψ| / |s ∩ Ψ|`; `None` when no source was masked.
    pub masked_source_recovery: Option<f64>,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

/// Scores a predicted source set against the snapshot's ground truth.
pub fn compute_metrics(predicted: &[usize], snapshot: &Snapshot) -> MetricsReport {
    let n = snapshot.n();
    let mut flagged = vec![false; n];
    for &v in predicted {
        flagged[v] = true;
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for (v, &f) in flagged.iter().enumerate() {
        match (f, snapshot.cascade.is_source(v)) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let recall = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
    let f_score = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    let masked = snapshot.masked_sources();
    let masked_source_recovery =
        (!masked.is_empty()).then(|| masked.iter().filter(|&&v| flagged[v]).count() as f64 / masked.len() as f64);
    MetricsReport {
        accuracy: (tp + tn) as f64 / n as f64,
        precision,
        recall,
        f_score,
        masked_source_recovery,
        tp,
        fp,
        fn_,
        tn,
    }
}

/// Mean and population standard deviation of each metric over snapshots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub count: usize,
    pub acc_mean: f64,
    pub acc_std: f64,
    pub f_mean: f64,
    pub f_std: f64,
    pub precision_mean: f64,
    pub recall_mean: f64,
    /// Mean over the snapshots where recovery is defined.
    pub masked_recovery_mean: Option<f64>,
    pub masked_recovery_count: usize,
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    (mean, var.sqrt())
}

impl MetricsSummary {
    pub fn from_reports(reports: &[MetricsReport]) -> Self {
        let (acc_mean, acc_std) = mean_std(reports.iter().map(|r| r.accuracy));
        let (f_mean, f_std) = mean_std(reports.iter().map(|r| r.f_score));
        let (precision_mean, _) = mean_std(reports.iter().map(|r| r.precision));
        let (recall_mean, _) = mean_std(reports.iter().map(|r| r.recall));
        let recoveries = reports.iter().filter_map(|r| r.masked_source_recovery);
        let masked_recovery_count = recoveries.clone().count();
        let masked_recovery_mean = (masked_recovery_count > 0).then(|| mean_std(recoveries).0);
        MetricsSummary {
            count: reports.len(),
            acc_mean,
            acc_std,
            f_mean,
            f_std,
            precision_mean,
            recall_mean,
            masked_recovery_mean,
            masked_recovery_count,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cascade::Cascade;
    use rand::seq::index;
    use rand::Rng as _;

    fn snapshot(n: usize, sources: Vec<usize>, masked: Vec<usize>) -> Snapshot {
        let mut positive = vec![false; n];
        let mut timestamp = vec![-1; n];
        for &s in &sources {
            positive[s] = true;
            timestamp[s] = 0;
        }
        let cascade = Cascade {
            sources,
            positive,
            timestamp,
            spreader: vec![-1; n],
            probs: vec![0.2; n],
            halted_at_theta: true,
        };
        Snapshot::new(cascade, masked, 0.1, 0.3, 0).unwrap()
    }

    #[test]
    fn exact_prediction() {
        let s = snapshot(10, vec![1, 4], vec![4]);
        let r = compute_metrics(&[1, 4], &s);
        assert_eq!((r.precision, r.recall, r.f_score, r.accuracy), (1.0, 1.0, 1.0, 1.0));
        assert_eq!(r.masked_source_recovery, Some(1.0));
    }

    #[test]
    fn disjoint_prediction() {
        let s = snapshot(10, vec![1, 4], vec![]);
        let r = compute_metrics(&[2, 3], &s);
        assert_eq!((r.precision, r.recall, r.f_score), (0.0, 0.0, 0.0));
        assert_eq!(r.accuracy, (10.0 - 4.0) / 10.0);
        assert_eq!(r.masked_source_recovery, None);
    }

    #[test]
    fn undefined_recovery_excluded_from_summary() {
        let a = compute_metrics(&[1], &snapshot(6, vec![1], vec![1]));
        let b = compute_metrics(&[], &snapshot(6, vec![1], vec![]));
        let s = MetricsSummary::from_reports(&[a, b]);
        assert_eq!(s.masked_recovery_mean, Some(1.0));
        assert_eq!(s.masked_recovery_count, 1);
        assert_eq!(s.f_mean, 0.5);
        assert_eq!(s.f_std, 0.5);
    }

    #[test]
    fn confusion_counts_match_brute_force() {
        let mut r = crate::rng::stream(44, 0);
        for _ in 0..10_000 {
            let n = r.random_range(2..30);
            let ns = r.random_range(1..n);
            let np = r.random_range(0..=n);
            let mut sources = index::sample(&mut r, n, ns).into_vec();
            sources.sort_unstable();
            let predicted = index::sample(&mut r, n, np).into_vec();
            let snap = snapshot(n, sources.clone(), vec![]);
            let m = compute_metrics(&predicted, &snap);
            let tp = predicted.iter().filter(|v| sources.contains(v)).count();
            assert_eq!(m.tp, tp);
            assert_eq!(m.tp + m.fp, predicted.len());
            assert_eq!(m.tp + m.fn_, sources.len());
            assert_eq!(m.tp + m.fp + m.fn_ + m.tn, n);
            assert_eq!(m.accuracy, (m.tp + m.tn) as f64 / n as f64);
            let (p, rc) = (m.precision, m.recall);
            let f = if p + rc > 0.0 { 2.0 * p * rc / (p + rc) } else { 0.0 };
            assert_eq!(m.f_score, f);
        }
    }
}
