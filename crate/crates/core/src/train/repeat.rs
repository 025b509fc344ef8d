use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{format_percent, format_plain, mean_std, Metrics};
use super::trainer::train;
use super::TrainConfig;
use crate::error::{Error, Result};
use crate::graph::TrustGraph;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub metrics: Option<Metrics>,
    pub error: Option<String>,
    pub best_epoch: Option<usize>,
    pub epochs_run: usize,
    pub runtime_secs: f64,
}

/// Aggregate over repeated runs. Standard deviations are sample (n - 1)
/// deviations over the successful runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatSummary {
    pub config: TrainConfig,
    pub runs: Vec<RunRecord>,
    pub succeeded: usize,
    pub failed: usize,
    pub micro_f1_mean: f64,
    pub micro_f1_std: f64,
    pub mae_mean: f64,
    pub mae_std: f64,
    pub per_class_f1_mean: Vec<f64>,
    pub std_kind: String,
    pub runtime_secs: f64,
}

impl RepeatSummary {
    pub fn micro_f1_display(&self) -> String {
        format_percent(self.micro_f1_mean, self.micro_f1_std)
    }

    pub fn mae_display(&self) -> String {
        format_plain(self.mae_mean, self.mae_std)
    }
}

pub fn run_seed(graph: &TrustGraph, config: &TrainConfig, seed: u64) -> RunRecord {
    let cfg = TrainConfig { seed, ..config.clone() };
    let start = Instant::now();
    match train(graph, &cfg) {
        Ok(out) => RunRecord {
            seed,
            metrics: Some(out.evaluation.metrics),
            error: None,
            best_epoch: out.history.best_epoch,
            epochs_run: out.history.epochs_run(),
            runtime_secs: out.runtime_secs,
        },
        Err(e) => {
            log::warn!("run with seed {seed} failed: {e}");
            RunRecord {
                seed,
                metrics: None,
                error: Some(e.to_string()),
                best_epoch: None,
                epochs_run: 0,
                runtime_secs: start.elapsed().as_secs_f64(),
            }
        }
    }
}

/// `config.repeats` independent runs with seeds `seed, seed + 1, ...` on up
/// to `workers` threads. Failed runs are recorded and excluded from the
/// statistics; if every run fails the first error is returned.
pub fn repeat_runs(graph: &TrustGraph, config: &TrainConfig, workers: usize) -> Result<RepeatSummary> {
    config.validate()?;
    let start = Instant::now();
    let seeds: Vec<u64> = (0..config.repeats as u64)
        .map(|i| config.seed.wrapping_add(i))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    let runs: Vec<RunRecord> = pool.install(|| seeds.par_iter().map(|&s| run_seed(graph, config, s)).collect());
    summarize(config, runs, start.elapsed().as_secs_f64())
}

pub fn summarize(config: &TrainConfig, runs: Vec<RunRecord>, runtime_secs: f64) -> Result<RepeatSummary> {
    let ok: Vec<&Metrics> = runs.iter().filter_map(|r| r.metrics.as_ref()).collect();
    if ok.is_empty() {
        let first = runs
            .iter()
            .find_map(|r| r.error.clone())
            .unwrap_or_else(|| "no runs".into());
        return Err(Error::RunsFailed {
            total: runs.len(),
            first,
        });
    }
    let f1: Vec<f64> = ok.iter().map(|m| m.micro_f1).collect();
    let mae: Vec<f64> = ok.iter().map(|m| m.mae).collect();
    let (micro_f1_mean, micro_f1_std) = mean_std(&f1);
    let (mae_mean, mae_std) = mean_std(&mae);
    let classes = ok[0].per_class_f1.len();
    let per_class_f1_mean = (0..classes)
        .map(|c| ok.iter().map(|m| m.per_class_f1[c]).sum::<f64>() / ok.len() as f64)
        .collect();
    Ok(RepeatSummary {
        config: config.clone(),
        succeeded: ok.len(),
        failed: runs.len() - ok.len(),
        runs,
        micro_f1_mean,
        micro_f1_std,
        mae_mean,
        mae_std,
        per_class_f1_mean,
        std_kind: "sample".into(),
        runtime_secs,
    })
}
