//! Directed trust graphs with typed edges.
//!
//! A [`TrustGraph`] holds dense node ids `0..num_nodes`, a deduplicated edge
//! list and, per relation type `t`, the adjacency matrix `A_t` in compressed
//! row form together with its transpose. Both are built once at construction
//! because propagation runs in both directions every epoch.

mod chain;
mod io;
mod reach;
mod sparse;
mod split;

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use chain::{enumerate_chain_types, ChainIndex, ChainMode, ChainType};
pub use io::{load_node_map, parse_level, sidecar_path, LEVEL_NAMES};
pub use reach::{brute_force_chain_paths, Direction, RelationStep, MAX_ORACLE_WALKS};
pub use sparse::Csr;
pub use split::{random_partition, split_edges, EdgeSplit};

use crate::error::{Error, Result};

/// One directed trust statement `src -> dst` of relation type `rel`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub rel: usize,
}

impl Edge {
    pub fn new(src: usize, dst: usize, rel: usize) -> Self {
        Self { src, dst, rel }
    }
}

#[derive(Debug, Clone)]
pub struct TrustGraph {
    num_nodes: usize,
    num_relations: usize,
    edges: Vec<Edge>,
    node_ids: Vec<String>,
    /// `A_t`, rows are sources.
    out_adj: Vec<Arc<Csr>>,
    /// `A_tᵀ`, rows are targets.
    in_adj: Vec<Arc<Csr>>,
}

impl TrustGraph {
    /// Validates and indexes an edge list. Node labels default to the dense
    /// ids.
    pub fn new(num_nodes: usize, num_relations: usize, edges: Vec<Edge>) -> Result<Self> {
        let node_ids = (0..num_nodes).map(|i| i.to_string()).collect();
        Self::with_node_ids(node_ids, num_relations, edges)
    }

    pub fn with_node_ids(node_ids: Vec<String>, num_relations: usize, edges: Vec<Edge>) -> Result<Self> {
        let num_nodes = node_ids.len();
        if num_relations == 0 {
            return Err(Error::InvalidGraph("need at least one relation type".into()));
        }
        let mut seen: HashMap<(usize, usize), usize> = HashMap::with_capacity(edges.len());
        let mut kept = Vec::with_capacity(edges.len());
        for e in edges {
            if e.src >= num_nodes || e.dst >= num_nodes {
                return Err(Error::InvalidGraph(format!(
                    "edge {} -> {} references a node outside 0..{num_nodes}",
                    e.src, e.dst
                )));
            }
            if e.rel >= num_relations {
                return Err(Error::InvalidGraph(format!(
                    "edge {} -> {} has relation {} but only {num_relations} exist",
                    e.src, e.dst, e.rel
                )));
            }
            if e.src == e.dst {
                return Err(Error::InvalidGraph(format!("self-loop on node {}", e.src)));
            }
            match seen.get(&(e.src, e.dst)) {
                Some(&rel) if rel == e.rel => continue,
                Some(&rel) => {
                    return Err(Error::InvalidGraph(format!(
                        "edge {} -> {} given with relations {rel} and {}",
                        e.src, e.dst, e.rel
                    )))
                }
                None => {
                    seen.insert((e.src, e.dst), e.rel);
                    kept.push(e);
                }
            }
        }
        let mut out_adj = Vec::with_capacity(num_relations);
        let mut in_adj = Vec::with_capacity(num_relations);
        for t in 0..num_relations {
            let typed = kept.iter().filter(|e| e.rel == t);
            out_adj.push(Arc::new(Csr::from_pairs(
                num_nodes,
                num_nodes,
                typed.clone().map(|e| (e.src, e.dst)),
            )));
            in_adj.push(Arc::new(Csr::from_pairs(
                num_nodes,
                num_nodes,
                typed.map(|e| (e.dst, e.src)),
            )));
        }
        Ok(Self {
            num_nodes,
            num_relations,
            edges: kept,
            node_ids,
            out_adj,
            in_adj,
        })
    }

    /// SHA-256 over node labels, relation count and edges, in order.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.num_relations as u64).to_le_bytes());
        for id in &self.node_ids {
            h.update(id.as_bytes());
            h.update([0]);
        }
        for e in &self.edges {
            for v in [e.src, e.dst, e.rel] {
                h.update((v as u64).to_le_bytes());
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_relations(&self) -> usize {
        self.num_relations
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node_ids(&self) -> &[String] {
        &self.node_ids
    }

    /// Replaces node labels, e.g. with the original ids from a sidecar map.
    pub fn relabel(&mut self, node_ids: Vec<String>) -> Result<()> {
        if node_ids.len() != self.num_nodes {
            return Err(Error::InvalidGraph(format!(
                "node map has {} entries for {} nodes",
                node_ids.len(),
                self.num_nodes
            )));
        }
        self.node_ids = node_ids;
        Ok(())
    }

    pub fn node_index(&self) -> HashMap<&str, usize> {
        self.node_ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect()
    }

    /// `A_t`.
    pub fn adjacency(&self, rel: usize) -> &Csr {
        &self.out_adj[rel]
    }

    /// `A_tᵀ`.
    pub fn adjacency_transpose(&self, rel: usize) -> &Csr {
        &self.in_adj[rel]
    }

    /// Relation of edge `src -> dst`, if present.
    pub fn relation(&self, src: usize, dst: usize) -> Option<usize> {
        (0..self.num_relations).find(|&t| self.out_adj[t].contains(src, dst))
    }

    /// Same node set, different edges. Used to build the message-passing
    /// graph from the training edges.
    pub fn with_edges(&self, edges: &[Edge]) -> Result<TrustGraph> {
        Self::with_node_ids(self.node_ids.clone(), self.num_relations, edges.to_vec())
    }

    /// Every edge flipped.
    pub fn reversed(&self) -> TrustGraph {
        let edges = self.edges.iter().map(|e| Edge::new(e.dst, e.src, e.rel)).collect();
        Self::with_node_ids(self.node_ids.clone(), self.num_relations, edges)
            .expect("reversing a valid graph stays valid")
    }

    /// Counts of edges per relation.
    pub fn relation_histogram(&self) -> Vec<usize> {
        let mut h = vec![0; self.num_relations];
        for e in &self.edges {
            h[e.rel] += 1;
        }
        h
    }
}
