//! Sums of node representations over typed walks.
//!
//! For a chain type `(t1, ..., tk)` the trustee-direction sum at `v` adds
//! `H[u]` for every walk `u -t1-> ... -tk-> v`, which is
//! `A_tkᵀ ··· A_t1ᵀ H`. The trustor-direction sum at `v` adds `H[u]` for
//! every walk `v -t1-> ... -tk-> u`, which is `A_t1 ··· A_tk H`. Walks may
//! revisit nodes.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{ChainType, Csr, TrustGraph};
use crate::error::{Error, Result};
use crate::ndiff::{LinearMap, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Walks ending at the node.
    Trustee,
    /// Walks starting at the node.
    Trustor,
}

impl Direction {
    pub fn opposite(self) -> Direction {
        match self {
            Direction::Trustee => Direction::Trustor,
            Direction::Trustor => Direction::Trustee,
        }
    }
}

/// One hop of propagation for a single relation, as a differentiable linear
/// map. Trustee hops multiply by `A_tᵀ`, trustor hops by `A_t`; each is the
/// other's adjoint.
pub struct RelationStep {
    forward: Arc<Csr>,
    adjoint: Arc<Csr>,
}

impl LinearMap for RelationStep {
    fn apply(&self, x: &Tensor) -> Result<Tensor> {
        self.forward.spmm(x)
    }

    fn apply_adjoint(&self, g: &Tensor) -> Result<Tensor> {
        self.adjoint.spmm(g)
    }
}

impl TrustGraph {
    pub fn relation_step(&self, rel: usize, direction: Direction) -> RelationStep {
        let (a, at) = (self.out_adj[rel].clone(), self.in_adj[rel].clone());
        match direction {
            Direction::Trustee => RelationStep {
                forward: at,
                adjoint: a,
            },
            Direction::Trustor => RelationStep {
                forward: a,
                adjoint: at,
            },
        }
    }

    /// Relations in the order their hops are applied to `H`.
    pub fn hop_order(chain: &ChainType, direction: Direction) -> Vec<usize> {
        match direction {
            Direction::Trustee => chain.rels().to_vec(),
            Direction::Trustor => chain.rels().iter().rev().copied().collect(),
        }
    }

    pub(crate) fn check_chain(&self, chain: &ChainType) -> Result<()> {
        if let Some(&bad) = chain.rels().iter().find(|&&r| r >= self.num_relations) {
            return Err(Error::invalid(format!(
                "chain {chain} uses relation {bad} but the graph has {}",
                self.num_relations
            )));
        }
        Ok(())
    }

    pub fn chain_reach_sum(&self, chain: &ChainType, direction: Direction, h: &Tensor) -> Result<Tensor> {
        self.check_chain(chain)?;
        if h.rows() != self.num_nodes {
            return Err(Error::Shape {
                op: "chain_reach_sum",
                left: [self.num_nodes, h.cols()],
                right: h.shape(),
            });
        }
        let mut x = h.clone();
        for rel in Self::hop_order(chain, direction) {
            x = self.relation_step(rel, direction).apply(&x)?;
        }
        Ok(x)
    }
}

pub const MAX_ORACLE_WALKS: usize = 1_000_000;

/// Every walk of the chain's type ending at `v` (trustee) or starting at `v`
/// (trustor), each listed from head to tail. Built from the raw edge list by
/// depth-first search, independent of the sparse matrices.
pub fn brute_force_chain_paths(
    graph: &TrustGraph,
    chain: &ChainType,
    direction: Direction,
    v: usize,
) -> Result<Vec<Vec<usize>>> {
    graph.check_chain(chain)?;
    if v >= graph.num_nodes() {
        return Err(Error::invalid(format!("node {v} out of range")));
    }
    let n = graph.num_nodes();
    let r = graph.num_relations();
    // next[t][x]: neighbours of x when walking away from v
    let mut next = vec![vec![Vec::new(); n]; r];
    for e in graph.edges() {
        match direction {
            Direction::Trustee => next[e.rel][e.dst].push(e.src),
            Direction::Trustor => next[e.rel][e.src].push(e.dst),
        }
    }
    let rels: Vec<usize> = match direction {
        Direction::Trustee => chain.rels().iter().rev().copied().collect(),
        Direction::Trustor => chain.rels().to_vec(),
    };

    let mut out = Vec::new();
    let mut stack = vec![v];
    fn dfs(
        depth: usize,
        rels: &[usize],
        next: &[Vec<Vec<usize>>],
        stack: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) -> Result<()> {
        if depth == rels.len() {
            if out.len() >= MAX_ORACLE_WALKS {
                return Err(Error::OracleOverflow(MAX_ORACLE_WALKS));
            }
            out.push(stack.clone());
            return Ok(());
        }
        let here = *stack.last().expect("non-empty");
        for &nb in &next[rels[depth]][here] {
            stack.push(nb);
            dfs(depth + 1, rels, next, stack, out)?;
            stack.pop();
        }
        Ok(())
    }
    dfs(0, &rels, &next, &mut stack, &mut out)?;
    if direction == Direction::Trustee {
        for p in &mut out {
            p.reverse();
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Edge;

    fn chain(r: &[usize]) -> ChainType {
        ChainType::new(r.to_vec()).unwrap()
    }

    // u=0, a=1, v=2
    fn line() -> TrustGraph {
        TrustGraph::new(3, 2, vec![Edge::new(0, 1, 0), Edge::new(1, 2, 1)]).unwrap()
    }

    #[test]
    fn single_path_trustee_and_trustor() {
        let g = line();
        let h = Tensor::identity(3);
        let m = g.chain_reach_sum(&chain(&[0, 1]), Direction::Trustee, &h).unwrap();
        assert_eq!(m.row(2), h.row(0));
        assert_eq!(m.row(0), &[0.0; 3]);
        assert_eq!(m.row(1), &[0.0; 3]);
        let m = g.chain_reach_sum(&chain(&[0, 1]), Direction::Trustor, &h).unwrap();
        assert_eq!(m.row(0), h.row(2));
        assert_eq!(m.row(1), &[0.0; 3]);
        assert_eq!(m.row(2), &[0.0; 3]);
    }

    #[test]
    fn brute_force_line() {
        let g = line();
        assert_eq!(
            brute_force_chain_paths(&g, &chain(&[0, 1]), Direction::Trustee, 2).unwrap(),
            vec![vec![0, 1, 2]]
        );
        assert!(brute_force_chain_paths(&g, &chain(&[1, 0]), Direction::Trustee, 2)
            .unwrap()
            .is_empty());
        assert_eq!(
            brute_force_chain_paths(&g, &chain(&[0, 1]), Direction::Trustor, 0).unwrap(),
            vec![vec![0, 1, 2]]
        );
    }

    #[test]
    fn diamond_has_two_paths() {
        // u=0, a=1, b=2, v=3
        let g = TrustGraph::new(
            4,
            1,
            vec![
                Edge::new(0, 1, 0),
                Edge::new(0, 2, 0),
                Edge::new(1, 3, 0),
                Edge::new(2, 3, 0),
            ],
        )
        .unwrap();
        let mut paths = brute_force_chain_paths(&g, &chain(&[0, 0]), Direction::Trustee, 3).unwrap();
        paths.sort();
        assert_eq!(paths, vec![vec![0, 1, 3], vec![0, 2, 3]]);
        let m = g
            .chain_reach_sum(&chain(&[0, 0]), Direction::Trustee, &Tensor::identity(4))
            .unwrap();
        assert_eq!(m.row(3), &[2.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn walks_may_revisit() {
        let g = TrustGraph::new(2, 1, vec![Edge::new(0, 1, 0), Edge::new(1, 0, 0)]).unwrap();
        let paths = brute_force_chain_paths(&g, &chain(&[0, 0]), Direction::Trustee, 0).unwrap();
        assert_eq!(paths, vec![vec![0, 1, 0]]);
    }

    #[test]
    fn oracle_guard_trips() {
        // complete digraph on 40 nodes, walks of length 4 into a node: 39^4 > 1e6
        let n = 40;
        let mut edges = Vec::new();
        for a in 0..n {
            for b in 0..n {
                if a != b {
                    edges.push(Edge::new(a, b, 0));
                }
            }
        }
        let g = TrustGraph::new(n, 1, edges).unwrap();
        let err = brute_force_chain_paths(&g, &chain(&[0, 0, 0, 0]), Direction::Trustee, 0);
        assert!(matches!(err, Err(Error::OracleOverflow(_))));
    }

    #[test]
    fn shape_mismatch() {
        assert!(line()
            .chain_reach_sum(&chain(&[0]), Direction::Trustee, &Tensor::zeros(2, 2))
            .is_err());
    }
}
