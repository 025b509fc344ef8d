use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{ChainIndex, ChainType};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationRow {
    pub rank: usize,
    pub chain: ChainType,
    /// 1-based levels joined by arrows, e.g. `1→4`.
    pub label: String,
    pub alpha: Option<f64>,
    pub alpha_bar: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub rows: Vec<ExplanationRow>,
    pub requested: usize,
    pub total_types: usize,
    /// Sum of the ranking weights over every chain type.
    pub weight_sum: f64,
}

/// Ranks chain types by trustee weight (trustor weight when the trustee role
/// is absent), highest first, and keeps `top_k`. Ties keep enumeration
/// order. A `top_k` above the number of types is clamped.
pub fn explain(
    chains: &ChainIndex,
    alpha: Option<&[f64]>,
    alpha_bar: Option<&[f64]>,
    top_k: usize,
) -> Result<Explanation> {
    let ranking = alpha
        .or(alpha_bar)
        .ok_or_else(|| Error::invalid("no attention weights to explain"))?;
    for w in [alpha, alpha_bar].into_iter().flatten() {
        if w.len() != chains.len() {
            return Err(Error::invalid(format!(
                "{} weights for {} chain types",
                w.len(),
                chains.len()
            )));
        }
    }
    let total = chains.len();
    if top_k > total {
        log::warn!("top-k {top_k} exceeds the {total} chain types; showing all");
    }
    let mut order: Vec<usize> = (0..total).collect();
    order.sort_by(|&a, &b| ranking[b].total_cmp(&ranking[a]));
    let rows = order
        .into_iter()
        .take(top_k.min(total))
        .enumerate()
        .map(|(rank, j)| {
            let chain = chains.types()[j].clone();
            ExplanationRow {
                rank: rank + 1,
                label: chain.label(),
                chain,
                alpha: alpha.map(|a| a[j]),
                alpha_bar: alpha_bar.map(|a| a[j]),
            }
        })
        .collect();
    Ok(Explanation {
        rows,
        requested: top_k,
        total_types: total,
        weight_sum: ranking.iter().sum(),
    })
}

impl Explanation {
    /// `chain_label,alpha,alpha_bar`; a missing role leaves its column empty.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "chain_label,alpha,alpha_bar")?;
        let cell = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        for r in &self.rows {
            writeln!(w, "{},{},{}", r.label, cell(r.alpha), cell(r.alpha_bar))?;
        }
        Ok(())
    }

    /// Mean 1-based level over every relation in the listed chains.
    pub fn mean_level(&self) -> f64 {
        mean_level(self.rows.iter().map(|r| &r.chain))
    }
}

/// Mean 1-based level over every relation in `chains`.
pub fn mean_level<'a>(chains: impl IntoIterator<Item = &'a ChainType>) -> f64 {
    let (sum, n) = chains
        .into_iter()
        .flat_map(|c| c.rels())
        .fold((0usize, 0usize), |(s, n), &r| (s + r + 1, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum as f64 / n as f64
    }
}
