use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::repeat::{repeat_runs, RepeatSummary};
use super::TrainConfig;
use crate::error::{Error, Result};
use crate::graph::TrustGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    K,
    NodeDim,
    EdgeDim,
    TrainRatio,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::K => "k",
            SweepAxis::NodeDim => "node_dim",
            SweepAxis::EdgeDim => "edge_dim",
            SweepAxis::TrainRatio => "train_ratio",
        }
    }

    /// Config with this axis set to `value`.
    pub fn apply(self, base: &TrainConfig, value: &str) -> Result<TrainConfig> {
        let mut cfg = base.clone();
        let key = match self {
            SweepAxis::K => "k",
            SweepAxis::NodeDim => "node_attr_dim",
            SweepAxis::EdgeDim => "edge_attr_dim",
            SweepAxis::TrainRatio => "train_ratio",
        };
        cfg.set(key, value)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "k" => Ok(SweepAxis::K),
            "node_dim" | "node_attr_dim" => Ok(SweepAxis::NodeDim),
            "edge_dim" | "edge_attr_dim" => Ok(SweepAxis::EdgeDim),
            "train_ratio" => Ok(SweepAxis::TrainRatio),
            other => Err(Error::invalid(format!("unknown sweep axis `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub value: String,
    pub summary: Option<RepeatSummary>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub axis: SweepAxis,
    pub cells: Vec<SweepCell>,
}

/// One [`repeat_runs`] per value. A failing cell records its error and the
/// sweep moves on.
pub fn sweep(
    graph: &TrustGraph,
    base: &TrainConfig,
    axis: SweepAxis,
    values: &[String],
    workers: usize,
) -> Result<SweepTable> {
    if values.is_empty() {
        return Err(Error::invalid("sweep needs at least one value"));
    }
    let configs = values.iter().map(|v| axis.apply(base, v)).collect::<Result<Vec<_>>>()?;
    let cells = values
        .iter()
        .zip(configs)
        .map(|(value, cfg)| {
            log::info!("sweep {axis} = {value}");
            match repeat_runs(graph, &cfg, workers) {
                Ok(summary) => SweepCell {
                    value: value.clone(),
                    summary: Some(summary),
                    error: None,
                },
                Err(e) => SweepCell {
                    value: value.clone(),
                    summary: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok(SweepTable { axis, cells })
}

impl SweepTable {
    /// Tab-separated `value micro_f1 mae succeeded failed`.
    pub fn to_tsv(&self) -> String {
        let mut out = format!("{}\tmicro_f1\tmae\tsucceeded\tfailed\n", self.axis);
        for c in &self.cells {
            match &c.summary {
                Some(s) => out.push_str(&format!(
                    "{}\t{}\t{}\t{}\t{}\n",
                    c.value,
                    s.micro_f1_display(),
                    s.mae_display(),
                    s.succeeded,
                    s.failed
                )),
                None => out.push_str(&format!("{}\terror\terror\t0\t-\n", c.value)),
            }
        }
        out
    }
}
