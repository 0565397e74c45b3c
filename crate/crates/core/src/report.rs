//! Comma-separated output tables. Every table starts with a `#` line carrying the tool
//! version and the hash of the configuration that produced it.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::train::{BaselineMethod, EpochRecord, MetricsReport, MetricsSummary, SweepRow};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn provenance_line(config_hash: &str) -> String {
    format!("# rumor-source {TOOL_VERSION} config {config_hash}")
}

#[derive(Debug, Clone)]
pub struct Table {
    config_hash: String,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

impl Table {
    pub fn new(config_hash: &str, header: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Table {
            config_hash: config_hash.into(),
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn render(&self) -> String {
        let mut out = provenance_line(&self.config_hash);
        out.push('\n');
        out.push_str(&self.header.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.render()).map_err(|e| Error::io(path, e))
    }
}

fn baseline_columns(methods: &[BaselineMethod]) -> Vec<String> {
    methods.iter().map(|m| format!("baseline_f_{}", m.name())).collect()
}

/// One row per grid value.
pub fn sweep_table(config_hash: &str, rows: &[SweepRow]) -> Table {
    let methods: Vec<BaselineMethod> = rows
        .first()
        .map(|r| r.baselines.iter().map(|b| b.0).collect())
        .unwrap_or_default();
    let mut header: Vec<String> = [
        "sweep_value", "acc_mean", "acc_std", "f_mean", "f_std", "precision", "recall", "masked_recovery",
    ]
    .map(String::from)
    .to_vec();
    header.extend(baseline_columns(&methods));
    let mut table = Table::new(config_hash, header);
    for r in rows {
        let s = &r.summary;
        let mut row = vec![
            r.value.to_string(),
            s.acc_mean.to_string(),
            s.acc_std.to_string(),
            s.f_mean.to_string(),
            s.f_std.to_string(),
            s.precision_mean.to_string(),
            s.recall_mean.to_string(),
            opt(s.masked_recovery_mean),
        ];
        row.extend(r.baselines.iter().map(|(_, b)| b.f_mean.to_string()));
        table.push(row);
    }
    table
}

/// Aggregate rows tagged by name (ablation variants, evaluation splits).
pub fn summary_table(config_hash: &str, rows: &[(String, MetricsSummary, Vec<(BaselineMethod, MetricsSummary)>)]) -> Table {
    let methods: Vec<BaselineMethod> = rows
        .first()
        .map(|r| r.2.iter().map(|b| b.0).collect())
        .unwrap_or_default();
    let mut header: Vec<String> = [
        "variant", "snapshots", "acc_mean", "acc_std", "f_mean", "f_std", "precision", "recall", "masked_recovery",
    ]
    .map(String::from)
    .to_vec();
    header.extend(baseline_columns(&methods));
    header.extend(methods.iter().map(|m| format!("baseline_recovery_{}", m.name())));
    let mut table = Table::new(config_hash, header);
    for (name, s, baselines) in rows {
        let mut row = vec![
            name.clone(),
            s.count.to_string(),
            s.acc_mean.to_string(),
            s.acc_std.to_string(),
            s.f_mean.to_string(),
            s.f_std.to_string(),
            s.precision_mean.to_string(),
            s.recall_mean.to_string(),
            opt(s.masked_recovery_mean),
        ];
        row.extend(baselines.iter().map(|(_, b)| b.f_mean.to_string()));
        row.extend(baselines.iter().map(|(_, b)| opt(b.masked_recovery_mean)));
        table.push(row);
    }
    table
}

/// Per-snapshot metrics.
pub fn metrics_table(config_hash: &str, reports: &[MetricsReport]) -> Table {
    let mut table = Table::new(
        config_hash,
        ["snapshot", "accuracy", "precision", "recall", "f_score", "masked_recovery", "tp", "fp", "fn", "tn"],
    );
    for (i, r) in reports.iter().enumerate() {
        table.push(vec![
            i.to_string(),
            r.accuracy.to_string(),
            r.precision.to_string(),
            r.recall.to_string(),
            r.f_score.to_string(),
            opt(r.masked_source_recovery),
            r.tp.to_string(),
            r.fp.to_string(),
            r.fn_.to_string(),
            r.tn.to_string(),
        ]);
    }
    table
}

pub fn history_table(config_hash: &str, history: &[EpochRecord]) -> Table {
    let mut table = Table::new(config_hash, ["epoch", "train_loss", "val_f_score", "val_accuracy"]);
    for h in history {
        table.push(vec![
            h.epoch.to_string(),
            h.train_loss.to_string(),
            opt(h.val_f_score),
            opt(h.val_accuracy),
        ]);
    }
    table
}

/// Writes a JSON document next to the tables.
pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Schema(e.to_string()))?;
    let _ = writeln!(text);
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_has_provenance_and_header() {
        let mut t = Table::new("abc", ["a", "b"]);
        t.push(vec!["1".into(), "2".into()]);
        let text = t.render();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], format!("# rumor-source {TOOL_VERSION} config abc"));
        assert_eq!(lines[1], "a,b");
        assert_eq!(lines[2], "1,2");
    }

    #[test]
    fn history_rows_match_epochs() {
        let h: Vec<EpochRecord> = (1..=3)
            .map(|epoch| EpochRecord {
                epoch,
                train_loss: 1.0 / epoch as f64,
                val_f_score: None,
                val_accuracy: Some(0.5),
            })
            .collect();
        assert_eq!(history_table("h", &h).len(), 3);
    }
}
