use std::collections::HashMap;

use rand::Rng;

use super::{EdgeAttrMode, ModelSpec};
use crate::error::{Error, Result};
use crate::ndiff::{Tape, Tensor, Var};

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
    pub trainable: bool,
}

/// Named parameter tensors in a fixed creation order.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    entries: Vec<Param>,
    index: HashMap<String, usize>,
}

pub(crate) fn chain_name(j: usize, trustor: bool) -> String {
    if trustor {
        format!("w_chain_bar.{j}")
    } else {
        format!("w_chain.{j}")
    }
}

pub(crate) fn edge_name(i: usize) -> String {
    format!("w_edge.{i}")
}

fn uniform(rng: &mut impl Rng, rows: usize, cols: usize, fan_in: usize) -> Tensor {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    Tensor::from_fn(rows, cols, |_, _| rng.gen_range(-bound..bound))
}

impl ModelParams {
    /// Expected `(name, shape, trainable)` for a spec, in creation order.
    pub fn layout(spec: &ModelSpec) -> Vec<(String, [usize; 2], bool)> {
        let d = spec.dims;
        let r = spec.num_relations;
        let j = spec.chains.len();
        let edge_width = match spec.edge_attr_mode {
            EdgeAttrMode::Learnable => d.edge_attr,
            EdgeAttrMode::OneHot => r,
        };
        let mut out = vec![
            ("node_attr".to_string(), [spec.num_nodes, d.node_attr], true),
            (
                "edge_attr".to_string(),
                [r, edge_width],
                spec.edge_attr_mode == EdgeAttrMode::Learnable,
            ),
            ("w_node".to_string(), [d.node_attr, d.hidden], true),
        ];
        for i in 0..r {
            out.push((edge_name(i), [edge_width, d.hidden], true));
        }
        for trustor in [false, true] {
            for k in 0..j {
                out.push((chain_name(k, trustor), [d.hidden, d.hidden], true));
            }
        }
        for suffix in ["", "_bar"] {
            out.push((format!("attn_w{suffix}"), [d.hidden, d.attention], true));
            out.push((format!("attn_b{suffix}"), [1, d.attention], true));
            out.push((format!("attn_q{suffix}"), [d.attention, 1], true));
        }
        let fuse_in = if spec.variant.uses_trustee() && spec.variant.uses_trustor() {
            2 * d.hidden
        } else {
            d.hidden
        };
        out.push(("w_fuse".to_string(), [fuse_in, d.embed], true));
        out.push(("mlp_w1".to_string(), [2 * d.embed, d.embed], true));
        out.push(("mlp_b1".to_string(), [1, d.embed], true));
        out.push(("mlp_w2".to_string(), [d.embed, r], true));
        out.push(("mlp_b2".to_string(), [1, r], true));
        out
    }

    /// Fan-in scaled uniform initialization; one-hot edge attributes when
    /// configured.
    pub fn init(spec: &ModelSpec, rng: &mut impl Rng) -> Self {
        let entries = Self::layout(spec)
            .into_iter()
            .map(|(name, [rows, cols], trainable)| {
                let value = match name.as_str() {
                    "edge_attr" if spec.edge_attr_mode == EdgeAttrMode::OneHot => Tensor::identity(rows),
                    "node_attr" | "edge_attr" => uniform(rng, rows, cols, cols),
                    _ => {
                        // biases take the fan-in of the layer they belong to
                        let fan_in = if rows == 1 { cols } else { rows };
                        uniform(rng, rows, cols, fan_in)
                    }
                };
                Param { name, value, trainable }
            })
            .collect();
        Self::from_entries(entries)
    }

    pub fn from_entries(entries: Vec<Param>) -> Self {
        let index = entries.iter().enumerate().map(|(i, p)| (p.name.clone(), i)).collect();
        Self { entries, index }
    }

    /// Checks names and shapes against the layout of `spec`.
    pub fn validate(&self, spec: &ModelSpec) -> Result<()> {
        let layout = Self::layout(spec);
        let mut problems = Vec::new();
        for (name, shape, _) in &layout {
            match self.index.get(name) {
                None => problems.push(format!("missing `{name}` (expected {shape:?})")),
                Some(&i) => {
                    let got = self.entries[i].value.shape();
                    if got != *shape {
                        problems.push(format!("`{name}`: expected {shape:?}, found {got:?}"));
                    }
                }
            }
        }
        for p in &self.entries {
            if !layout.iter().any(|(n, _, _)| *n == p.name) {
                problems.push(format!("unexpected `{}`", p.name));
            }
        }
        const SHOWN: usize = 6;
        if problems.is_empty() {
            return Ok(());
        }
        let more = problems.len().saturating_sub(SHOWN);
        problems.truncate(SHOWN);
        if more > 0 {
            problems.push(format!("{more} more"));
        }
        Err(Error::Checkpoint(format!(
            "parameter shapes do not match the configuration: {}",
            problems.join("; ")
        )))
    }

    pub fn entries(&self) -> &[Param] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut [Param] {
        &mut self.entries
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.index.get(name).map(|&i| &self.entries[i].value)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.index.get(name).map(|&i| &mut self.entries[i].value)
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn num_scalars(&self) -> usize {
        self.entries.iter().map(|p| p.value.len()).sum()
    }

    /// Records every entry on `tape`: trainable ones as parameters, the rest
    /// as constants.
    pub fn record(&self, tape: &mut Tape) -> ParamVars {
        let vars = self
            .entries
            .iter()
            .map(|p| {
                if p.trainable {
                    tape.param(p.value.clone())
                } else {
                    tape.constant(p.value.clone())
                }
            })
            .collect();
        ParamVars {
            vars,
            index: self.index.clone(),
        }
    }
}

/// Tape handles for a [`ModelParams`], in the same order.
#[derive(Debug, Clone)]
pub struct ParamVars {
    vars: Vec<Var>,
    index: HashMap<String, usize>,
}

impl ParamVars {
    pub fn get(&self, name: &str) -> Result<Var> {
        self.index
            .get(name)
            .map(|&i| self.vars[i])
            .ok_or_else(|| Error::invalid(format!("no parameter named `{name}`")))
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    pub fn chain(&self, j: usize, trustor: bool) -> Result<Var> {
        self.get(&chain_name(j, trustor))
    }

    pub fn edge(&self, i: usize) -> Result<Var> {
        self.get(&edge_name(i))
    }
}
