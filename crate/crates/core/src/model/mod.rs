//! The trust evaluation network.
//!
//! Forward pass, per node `v`:
//!
//! 1. `h_v = x_v W_node`; per relation `r_i = normalize(x_edge_i W_edge_i)`
//!    so that every complex entry of `r_i` has modulus one.
//! 2. For each chain type `P = (t1..tk)` the trustee message is the sum of
//!    `h_u` over walks `u -> .. -> v` of that type, rotated by
//!    `ρ = r_t1 ∘ .. ∘ r_tk`; the trustor message sums over walks starting at
//!    `v` and rotates by `conj(ρ)`.
//! 3. `h_v^P = (h_v + message) W_P`, with a separate `W̄_P` for the trustor
//!    role.
//! 4. Chain types are weighted by a softmax over
//!    `mean_v qᵀ tanh(h_v^P W_attn + b)`, per role with separate parameters.
//! 5. `Z_final = (Z ∥ Z̄) W_fuse`, and an ordered pair `(u, v)` is scored
//!    by a one-hidden-layer MLP on `z_u ∥ z_v`.
//!
//! Because a rotation is constant per chain type and distributes over sums,
//! the walk sum is taken first (sparse products) and rotated once.

mod checkpoint;
mod forward;
mod params;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT_VERSION};
pub use forward::{
    aggregate_chain_type, attention_weights, compose_rotation, fuse_roles, predict_distributions, predict_logits,
    predict_pair, propagate_chain_type, transform_attributes, AttentionVars, Embeddings, ForwardVars, PredictorVars,
    ReachMemo, RoleVars, TrustGnn, UNIT_EPS,
};
pub use params::{ModelParams, Param, ParamVars};

use crate::error::Error;
use crate::graph::ChainIndex;

/// Which parts of the network are wired in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum Variant {
    #[default]
    #[serde(rename = "full")]
    Full,
    /// Trustee role only.
    #[serde(rename = "trustgnn-1")]
    TrusteeOnly,
    /// Trustor role only.
    #[serde(rename = "trustgnn-2")]
    TrustorOnly,
    /// Plain sum over chain types instead of attention.
    #[serde(rename = "trustgnn-3")]
    UniformSum,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Full,
        Variant::TrusteeOnly,
        Variant::TrustorOnly,
        Variant::UniformSum,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::TrusteeOnly => "trustgnn-1",
            Variant::TrustorOnly => "trustgnn-2",
            Variant::UniformSum => "trustgnn-3",
        }
    }

    pub fn uses_trustee(self) -> bool {
        self != Variant::TrustorOnly
    }

    pub fn uses_trustor(self) -> bool {
        self != Variant::TrusteeOnly
    }

    pub fn uses_attention(self) -> bool {
        self != Variant::UniformSum
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::invalid(format!("unknown variant `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeAttrMode {
    /// Random initial vectors trained with the network.
    #[default]
    Learnable,
    /// Fixed one-hot vectors of width `|R|`.
    OneHot,
}

impl FromStr for EdgeAttrMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.trim().to_ascii_lowercase().as_str() {
            "learnable" => Ok(EdgeAttrMode::Learnable),
            "one-hot" | "onehot" | "one_hot" => Ok(EdgeAttrMode::OneHot),
            other => Err(Error::invalid(format!("unknown edge attribute mode `{other}`"))),
        }
    }
}

impl fmt::Display for EdgeAttrMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EdgeAttrMode::Learnable => "learnable",
            EdgeAttrMode::OneHot => "one-hot",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub node_attr: usize,
    pub edge_attr: usize,
    /// Width of `h`, `r` and the per-type representations. Must be even.
    pub hidden: usize,
    /// Width of `z`.
    pub embed: usize,
    /// Width of the attention vector `q`.
    pub attention: usize,
}

impl ModelDims {
    pub fn uniform(attr: usize, dim: usize) -> Self {
        Self {
            node_attr: attr,
            edge_attr: attr,
            hidden: dim,
            embed: dim,
            attention: dim,
        }
    }
}

/// Everything that fixes parameter shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub num_nodes: usize,
    pub num_relations: usize,
    pub dims: ModelDims,
    pub variant: Variant,
    pub edge_attr_mode: EdgeAttrMode,
    pub chains: ChainIndex,
}
