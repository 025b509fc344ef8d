//! `key = value` configuration files and their command-line overrides.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use trustgnn::train::TrainConfig;

use crate::UsageError;

/// Training settings plus the paths a command works on.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CliConfig {
    pub train: TrainConfig,
    pub dataset: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    /// Training keys set by the file or by flags, in application order.
    pub explicit: Vec<(String, String)>,
}

fn normalize(key: &str) -> String {
    key.trim().replace('-', "_").to_ascii_lowercase()
}

impl CliConfig {
    pub fn set(&mut self, key: &str, value: &str, base: Option<&Path>) -> Result<(), UsageError> {
        let key = normalize(key);
        let path = || {
            let p = PathBuf::from(value.trim());
            match base {
                Some(dir) if p.is_relative() => dir.join(p),
                _ => p,
            }
        };
        match key.as_str() {
            "dataset" => self.dataset = Some(path()),
            "output_dir" => self.output_dir = Some(path()),
            "checkpoint" => self.checkpoint = Some(path()),
            _ => {
                self.train.set(&key, value).map_err(|e| UsageError(e.to_string()))?;
                self.explicit.push((key, value.trim().to_string()));
            }
        }
        Ok(())
    }

    /// Parses a config file. Blank lines and `#` comments are skipped;
    /// relative paths resolve against the file's directory.
    pub fn apply_file(&mut self, path: &Path) -> Result<(), UsageError> {
        let text =
            fs::read_to_string(path).map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| UsageError(format!("{}:{}: expected `key = value`", path.display(), i + 1)))?;
            self.set(key, value, base)
                .map_err(|e| UsageError(format!("{}:{}: {}", path.display(), i + 1, e.0)))?;
        }
        Ok(())
    }

    /// `base` with every explicitly set training key applied on top.
    pub fn overlay(&self, base: &TrainConfig) -> Result<TrainConfig, UsageError> {
        let mut cfg = base.clone();
        for (k, v) in &self.explicit {
            cfg.set(k, v).map_err(|e| UsageError(e.to_string()))?;
        }
        cfg.validate().map_err(|e| UsageError(e.to_string()))?;
        Ok(cfg)
    }

    pub fn require_dataset(&self) -> Result<&Path, UsageError> {
        self.dataset
            .as_deref()
            .ok_or_else(|| UsageError("no dataset given (use --dataset or `dataset =` in the config)".into()))
    }

    pub fn require_checkpoint(&self) -> Result<&Path, UsageError> {
        self.checkpoint
            .as_deref()
            .ok_or_else(|| UsageError("no checkpoint given (use --checkpoint)".into()))
    }

    pub fn require_output_dir(&self) -> Result<&Path, UsageError> {
        self.output_dir
            .as_deref()
            .ok_or_else(|| UsageError("no output directory given (use --output-dir)".into()))
    }
}

/// Flags shared by every command that trains or loads a model. Each one
/// overrides the config-file key of the same name.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// Config file of `key = value` lines.
    #[arg(long, env = "TRUSTGNN_CONFIG", value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Edge list: canonical TSV (with its .nodes.tsv sidecar) or a raw dump.
    #[arg(long, env = "TRUSTGNN_DATASET", value_name = "FILE")]
    pub dataset: Option<String>,
    /// Directory for reports and checkpoints; created if missing.
    #[arg(long, env = "TRUSTGNN_OUTPUT_DIR", value_name = "DIR")]
    pub output_dir: Option<String>,
    /// Checkpoint to read (eval, predict, explain) or write (train).
    #[arg(long, env = "TRUSTGNN_CHECKPOINT", value_name = "FILE")]
    pub checkpoint: Option<String>,
    /// Adam learning rate [default: 0.005].
    #[arg(long, env = "TRUSTGNN_LR", allow_hyphen_values = true)]
    pub lr: Option<String>,
    /// Node attribute width [default: 1024].
    #[arg(long, env = "TRUSTGNN_NODE_ATTR_DIM")]
    pub node_attr_dim: Option<String>,
    /// Edge attribute width [default: 1024].
    #[arg(long, env = "TRUSTGNN_EDGE_ATTR_DIM")]
    pub edge_attr_dim: Option<String>,
    /// Hidden width, must be even [default: 128].
    #[arg(long, env = "TRUSTGNN_DIM")]
    pub dim: Option<String>,
    /// Maximum chain length [default: 2].
    #[arg(long, env = "TRUSTGNN_K")]
    pub k: Option<String>,
    /// `upto-k` or `exact-k` [default: upto-k].
    #[arg(long, env = "TRUSTGNN_CHAIN_MODE")]
    pub chain_mode: Option<String>,
    /// Epoch budget [default: 200].
    #[arg(long, env = "TRUSTGNN_EPOCHS")]
    pub epochs: Option<String>,
    /// Early-stopping patience in epochs [default: 20].
    #[arg(long, env = "TRUSTGNN_PATIENCE")]
    pub patience: Option<String>,
    /// Share of training edges held out for early stopping [default: 0.1].
    #[arg(long, env = "TRUSTGNN_VAL_FRACTION", allow_hyphen_values = true)]
    pub val_fraction: Option<String>,
    /// Seed for the split, the initialization and the validation carve [default: 0].
    #[arg(long, env = "TRUSTGNN_SEED")]
    pub seed: Option<String>,
    /// `full`, `trustgnn-1`, `trustgnn-2` or `trustgnn-3` [default: full].
    #[arg(long, env = "TRUSTGNN_VARIANT")]
    pub variant: Option<String>,
    /// Runs per repeated measurement [default: 20].
    #[arg(long, env = "TRUSTGNN_REPEATS")]
    pub repeats: Option<String>,
    /// `learnable` or `one-hot` [default: learnable].
    #[arg(long, env = "TRUSTGNN_EDGE_ATTR_MODE")]
    pub edge_attr_mode: Option<String>,
    /// Share of edges used for training [default: 0.8].
    #[arg(long, env = "TRUSTGNN_TRAIN_RATIO", allow_hyphen_values = true)]
    pub train_ratio: Option<String>,
    /// Number of trust levels [default: 4].
    #[arg(long, env = "TRUSTGNN_NUM_RELATIONS")]
    pub num_relations: Option<String>,
    /// Global gradient-norm clip, or `off` [default: off].
    #[arg(long, env = "TRUSTGNN_GRAD_CLIP", allow_hyphen_values = true)]
    pub grad_clip: Option<String>,
}

impl ConfigArgs {
    fn overrides(&self) -> Vec<(&'static str, &Option<String>)> {
        vec![
            ("dataset", &self.dataset),
            ("output_dir", &self.output_dir),
            ("checkpoint", &self.checkpoint),
            ("lr", &self.lr),
            ("node_attr_dim", &self.node_attr_dim),
            ("edge_attr_dim", &self.edge_attr_dim),
            ("dim", &self.dim),
            ("k", &self.k),
            ("chain_mode", &self.chain_mode),
            ("epochs", &self.epochs),
            ("patience", &self.patience),
            ("val_fraction", &self.val_fraction),
            ("seed", &self.seed),
            ("variant", &self.variant),
            ("repeats", &self.repeats),
            ("edge_attr_mode", &self.edge_attr_mode),
            ("train_ratio", &self.train_ratio),
            ("num_relations", &self.num_relations),
            ("grad_clip", &self.grad_clip),
        ]
    }

    /// Defaults, then the config file, then flags and environment.
    pub fn resolve(&self) -> Result<CliConfig, UsageError> {
        let mut cfg = CliConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        for (key, value) in self.overrides() {
            if let Some(v) = value {
                cfg.set(key, v, None)
                    .map_err(|e| UsageError(format!("--{}: {}", key.replace('_', "-"), e.0)))?;
            }
        }
        cfg.train.validate().map_err(|e| UsageError(e.to_string()))?;
        Ok(cfg)
    }
}
