use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{enumerate_chain_types, ChainMode};
use crate::model::{EdgeAttrMode, ModelDims, ModelSpec, Variant};

/// Hyper-parameters and protocol settings for one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub node_attr_dim: usize,
    pub edge_attr_dim: usize,
    /// Shared width of `h`, `r`, `z` and `q`.
    pub dim: usize,
    /// Maximum chain length K.
    pub max_chain_len: usize,
    pub chain_mode: ChainMode,
    pub epochs: usize,
    pub patience: usize,
    /// Share of the training edges held out for early stopping.
    pub val_fraction: f64,
    pub seed: u64,
    pub variant: Variant,
    pub repeats: usize,
    pub edge_attr_mode: EdgeAttrMode,
    pub train_ratio: f64,
    pub num_relations: usize,
    /// Global gradient-norm clip; off when `None`.
    pub grad_clip: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.005,
            node_attr_dim: 1024,
            edge_attr_dim: 1024,
            dim: 128,
            max_chain_len: 2,
            chain_mode: ChainMode::UpToK,
            epochs: 200,
            patience: 20,
            val_fraction: 0.1,
            seed: 0,
            variant: Variant::Full,
            repeats: 20,
            edge_attr_mode: EdgeAttrMode::Learnable,
            train_ratio: 0.8,
            num_relations: 4,
            grad_clip: None,
        }
    }
}

/// Keys accepted by [`TrainConfig::set`], in documentation order.
pub const CONFIG_KEYS: &[&str] = &[
    "lr",
    "node_attr_dim",
    "edge_attr_dim",
    "dim",
    "k",
    "chain_mode",
    "epochs",
    "patience",
    "val_fraction",
    "seed",
    "variant",
    "repeats",
    "edge_attr_mode",
    "train_ratio",
    "num_relations",
    "grad_clip",
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::invalid(format!("bad value `{value}` for `{key}`")))
}

impl TrainConfig {
    /// Sets one field from its textual form. Dashes and underscores are
    /// interchangeable in keys.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_").to_ascii_lowercase();
        match key.as_str() {
            "lr" => self.lr = parse(&key, value)?,
            "node_attr_dim" => self.node_attr_dim = parse(&key, value)?,
            "edge_attr_dim" => self.edge_attr_dim = parse(&key, value)?,
            "attr_dim" => {
                self.node_attr_dim = parse(&key, value)?;
                self.edge_attr_dim = self.node_attr_dim;
            }
            "dim" => self.dim = parse(&key, value)?,
            "k" | "max_chain_len" => self.max_chain_len = parse(&key, value)?,
            "chain_mode" => self.chain_mode = value.parse()?,
            "epochs" => self.epochs = parse(&key, value)?,
            "patience" => self.patience = parse(&key, value)?,
            "val_fraction" => self.val_fraction = parse(&key, value)?,
            "seed" => self.seed = parse(&key, value)?,
            "variant" => self.variant = value.parse()?,
            "repeats" => self.repeats = parse(&key, value)?,
            "edge_attr_mode" => self.edge_attr_mode = value.parse()?,
            "train_ratio" => self.train_ratio = parse(&key, value)?,
            "num_relations" => self.num_relations = parse(&key, value)?,
            "grad_clip" => {
                self.grad_clip = match value.trim() {
                    "" | "off" | "none" => None,
                    v => Some(parse(&key, v)?),
                }
            }
            other => return Err(Error::invalid(format!("unknown configuration key `{other}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::invalid(msg));
        if self.dim == 0 || !self.dim.is_multiple_of(2) {
            return fail(format!("dim must be positive and even, got {}", self.dim));
        }
        if self.node_attr_dim == 0 || self.edge_attr_dim == 0 {
            return fail("attribute dimensions must be positive".into());
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return fail(format!("lr must be positive, got {}", self.lr));
        }
        if self.max_chain_len == 0 {
            return fail("K must be at least 1".into());
        }
        if self.epochs == 0 || self.repeats == 0 || self.num_relations == 0 {
            return fail("epochs, repeats and num_relations must be positive".into());
        }
        if !(0.0..0.5).contains(&self.val_fraction) {
            return fail(format!("val_fraction must lie in [0, 0.5), got {}", self.val_fraction));
        }
        if !(self.train_ratio > 0.0 && self.train_ratio < 1.0) {
            return fail(format!("train_ratio must lie in (0, 1), got {}", self.train_ratio));
        }
        if let Some(c) = self.grad_clip {
            if c.is_nan() || c <= 0.0 {
                return fail(format!("grad_clip must be positive, got {c}"));
            }
        }
        Ok(())
    }

    pub fn dims(&self) -> ModelDims {
        ModelDims {
            node_attr: self.node_attr_dim,
            edge_attr: self.edge_attr_dim,
            hidden: self.dim,
            embed: self.dim,
            attention: self.dim,
        }
    }

    pub fn model_spec(&self, num_nodes: usize) -> Result<ModelSpec> {
        self.validate()?;
        Ok(ModelSpec {
            num_nodes,
            num_relations: self.num_relations,
            dims: self.dims(),
            variant: self.variant,
            edge_attr_mode: self.edge_attr_mode,
            chains: enumerate_chain_types(self.num_relations, self.max_chain_len, self.chain_mode)?,
        })
    }
}
