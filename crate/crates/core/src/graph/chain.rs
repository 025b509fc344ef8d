use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered sequence of relation ids along a trust chain.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChainType(Vec<usize>);

impl ChainType {
    pub fn new(rels: Vec<usize>) -> Result<Self> {
        if rels.is_empty() {
            return Err(Error::invalid("chain type must contain at least one relation"));
        }
        Ok(Self(rels))
    }

    pub fn rels(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn reversed(&self) -> ChainType {
        ChainType(self.0.iter().rev().copied().collect())
    }

    /// Human label with 1-based trust levels, e.g. `1→4`.
    pub fn label(&self) -> String {
        self.0.iter().map(|r| (r + 1).to_string()).collect::<Vec<_>>().join("→")
    }
}

impl fmt::Display for ChainType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum ChainMode {
    /// Every length from 1 to K.
    #[default]
    #[serde(rename = "upto-K")]
    UpToK,
    /// Only length K.
    #[serde(rename = "exact-K")]
    ExactK,
}

impl FromStr for ChainMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "upto-k" | "upto_k" | "upto" => Ok(ChainMode::UpToK),
            "exact-k" | "exact_k" | "exact" => Ok(ChainMode::ExactK),
            other => Err(Error::invalid(format!("unknown chain mode `{other}`"))),
        }
    }
}

impl fmt::Display for ChainMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChainMode::UpToK => "upto-K",
            ChainMode::ExactK => "exact-K",
        })
    }
}

/// Deterministic list of chain types: shorter first, lexicographic within a
/// length.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainIndex {
    max_len: usize,
    mode: ChainMode,
    num_relations: usize,
    types: Vec<ChainType>,
}

impl ChainIndex {
    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn mode(&self) -> ChainMode {
        self.mode
    }

    pub fn num_relations(&self) -> usize {
        self.num_relations
    }

    pub fn types(&self) -> &[ChainType] {
        &self.types
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    pub fn position(&self, chain: &ChainType) -> Option<usize> {
        self.types.iter().position(|c| c == chain)
    }

    /// Same chain types in a caller-chosen order. Used to check that
    /// aggregation does not depend on ordering.
    pub fn permuted(&self, order: &[usize]) -> Result<ChainIndex> {
        let mut seen = vec![false; self.types.len()];
        if order.len() != self.types.len() {
            return Err(Error::invalid("permutation has the wrong length"));
        }
        for &i in order {
            if i >= seen.len() || std::mem::replace(&mut seen[i], true) {
                return Err(Error::invalid("not a permutation"));
            }
        }
        Ok(ChainIndex {
            types: order.iter().map(|&i| self.types[i].clone()).collect(),
            ..self.clone()
        })
    }
}

pub fn enumerate_chain_types(num_relations: usize, max_len: usize, mode: ChainMode) -> Result<ChainIndex> {
    if max_len == 0 {
        return Err(Error::invalid("maximum chain length K must be at least 1"));
    }
    if num_relations == 0 {
        return Err(Error::invalid("need at least one relation type"));
    }
    let lengths = match mode {
        ChainMode::UpToK => 1..=max_len,
        ChainMode::ExactK => max_len..=max_len,
    };
    let mut types = Vec::new();
    for len in lengths {
        // odometer over base-|R| digits, most significant first
        let mut digits = vec![0usize; len];
        loop {
            types.push(ChainType(digits.clone()));
            let mut pos = len;
            loop {
                if pos == 0 {
                    break;
                }
                pos -= 1;
                digits[pos] += 1;
                if digits[pos] < num_relations {
                    break;
                }
                digits[pos] = 0;
            }
            if digits.iter().all(|&d| d == 0) {
                break;
            }
        }
    }
    Ok(ChainIndex {
        max_len,
        mode,
        num_relations,
        types,
    })
}
