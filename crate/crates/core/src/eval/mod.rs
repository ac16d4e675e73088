//! Metrics, the weekly historical-average baseline, sudden-change analysis,
//! and the experiment runners behind ablation and multi-step studies.

mod experiment;
mod metrics;

use std::path::Path;

use crate::error::{Error, Result};
use crate::io::{fmt_f64, write_atomic};

pub use experiment::{
    ablation_run, ha_predictions, multistep_eval, run_experiment, score, unscaled_predictions, Experiment,
    ExperimentData, ExperimentSpec,
};
pub use metrics::{ha_predict, mae, rmse, sudden_change_split};

/// Fraction of timesteps flagged as sudden changes.
pub const DEFAULT_SUDDEN_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub experiment: String,
    pub partition: String,
    pub rmse: f64,
    pub mae: f64,
    pub count: usize,
}

/// CSV rows `experiment, partition, rmse, mae, count`.
pub fn write_report_csv(path: &Path, reports: &[MetricReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["experiment", "partition", "rmse", "mae", "count"])?;
    for r in reports {
        w.write_record([
            r.experiment.clone(),
            r.partition.clone(),
            fmt_f64(r.rmse),
            fmt_f64(r.mae),
            r.count.to_string(),
        ])?;
    }
    write_atomic(path, &w.into_inner().map_err(|e| Error::Io(e.into_error()))?)
}

pub fn read_report_csv(path: &Path) -> Result<Vec<MetricReport>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let mut out = Vec::new();
    for rec in rdr.deserialize() {
        let (experiment, partition, rmse, mae, count): (String, String, f64, f64, usize) = rec?;
        out.push(MetricReport {
            experiment,
            partition,
            rmse,
            mae,
            count,
        });
    }
    Ok(out)
}

/// Fixed-width table: one row per experiment, RMSE/MAE column pairs per
/// partition in first-seen order.
pub fn summary_table(reports: &[MetricReport]) -> String {
    let mut experiments: Vec<&str> = Vec::new();
    let mut partitions: Vec<&str> = Vec::new();
    for r in reports {
        if !experiments.contains(&r.experiment.as_str()) {
            experiments.push(&r.experiment);
        }
        if !partitions.contains(&r.partition.as_str()) {
            partitions.push(&r.partition);
        }
    }
    let name_w = experiments.iter().map(|e| e.len()).max().unwrap_or(0).max(10);
    let mut out = format!("{:<name_w$}", "Method");
    for p in &partitions {
        out += &format!(" | {:>21}", p);
    }
    out += &format!("\n{:<name_w$}", "");
    for _ in &partitions {
        out += &format!(" | {:>10} {:>10}", "RMSE", "MAE");
    }
    out.push('\n');
    out += &"-".repeat(name_w + partitions.len() * 24);
    out.push('\n');
    for e in &experiments {
        out += &format!("{:<name_w$}", e);
        for p in &partitions {
            match reports.iter().find(|r| r.experiment == *e && r.partition == *p) {
                Some(r) => out += &format!(" | {:>10.4} {:>10.4}", r.rmse, r.mae),
                None => out += &format!(" | {:>10} {:>10}", "-", "-"),
            }
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(e: &str, p: &str, rmse: f64) -> MetricReport {
        MetricReport {
            experiment: e.into(),
            partition: p.into(),
            rmse,
            mae: rmse / 2.0,
            count: 10,
        }
    }

    #[test]
    fn csv_roundtrip_and_table() {
        let reports = vec![report("HA", "test", 3.5), report("MVGCN", "test", 1.25), report("MVGCN", "sudden", 4.0)];
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("report.csv");
        write_report_csv(&p, &reports).unwrap();
        assert_eq!(read_report_csv(&p).unwrap(), reports);
        let table = summary_table(&reports);
        assert_eq!(table.lines().count(), 5);
        assert!(table.contains("1.2500"));
    }
}
