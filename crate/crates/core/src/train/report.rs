use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::repeat::RepeatSummary;
use super::trainer::{History, TrainOutcome};
use super::{Metrics, TrainConfig};
use crate::error::Result;
use crate::model::Variant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub fit: usize,
    pub val: usize,
    pub test: usize,
}

/// Machine-readable record of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: TrainConfig,
    pub variant: Variant,
    pub seed: u64,
    pub split: SplitSizes,
    pub metrics: Metrics,
    pub history: History,
}

impl RunReport {
    pub fn from_outcome(out: &TrainOutcome) -> Self {
        Self {
            config: out.config.clone(),
            variant: out.config.variant,
            seed: out.config.seed,
            split: SplitSizes {
                fit: out.data.fit.len(),
                val: out.data.val.len(),
                test: out.data.split.test.len(),
            },
            metrics: out.evaluation.metrics.clone(),
            history: out.history.clone(),
        }
    }
}

/// Summary of repeated runs as `{config, per_run, mean, std, runtime_secs}`.
pub fn repeat_report(summary: &RepeatSummary) -> serde_json::Value {
    serde_json::json!({
        "config": summary.config,
        "per_run": summary.runs,
        "succeeded": summary.succeeded,
        "failed": summary.failed,
        "mean": {
            "micro_f1": summary.micro_f1_mean,
            "mae": summary.mae_mean,
            "per_class_f1": summary.per_class_f1_mean,
        },
        "std": {
            "kind": summary.std_kind,
            "micro_f1": summary.micro_f1_std,
            "mae": summary.mae_std,
        },
        "display": {
            "micro_f1": summary.micro_f1_display(),
            "mae": summary.mae_display(),
        },
        "runtime_secs": summary.runtime_secs,
    })
}

/// `<kind>-<variant>-seed<seed>.<ext>`.
pub fn report_file_name(kind: &str, variant: Variant, seed: u64, ext: &str) -> String {
    format!("{kind}-{variant}-seed{seed}.{ext}")
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_carry_variant_and_seed() {
        assert_eq!(
            report_file_name("metrics", Variant::TrusteeOnly, 7, "json"),
            "metrics-trustgnn-1-seed7.json"
        );
    }
}
