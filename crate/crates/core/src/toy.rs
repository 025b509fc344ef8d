//! Small graphs and configurations for tests, self-checks and demos.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::{Edge, TrustGraph};
use crate::model::EdgeAttrMode;
use crate::train::TrainConfig;

/// Six nodes where every pair that is connected in both directions carries a
/// different level each way, e.g. `0 -> 1` is master while `1 -> 0` is
/// observer.
pub fn asymmetric_toy() -> TrustGraph {
    let edges = vec![
        Edge::new(0, 1, 3),
        Edge::new(1, 0, 0),
        Edge::new(2, 3, 2),
        Edge::new(3, 2, 1),
        Edge::new(4, 5, 3),
        Edge::new(5, 4, 0),
        Edge::new(1, 2, 2),
        Edge::new(3, 4, 1),
    ];
    TrustGraph::new(6, 4, edges).expect("toy graph is valid")
}

/// Pairs of the toy graph whose two directions carry different levels.
pub fn asymmetric_pairs(graph: &TrustGraph) -> Vec<(usize, usize)> {
    graph
        .edges()
        .iter()
        .filter(|e| e.src < e.dst)
        .filter_map(|e| match graph.relation(e.dst, e.src) {
            Some(back) if back != e.rel => Some((e.src, e.dst)),
            _ => None,
        })
        .collect()
}

/// Random graph with `num_nodes` nodes where each ordered pair is an edge
/// with probability `density`.
pub fn random_graph(rng: &mut impl Rng, num_nodes: usize, num_relations: usize, density: f64) -> TrustGraph {
    let mut edges = Vec::new();
    for u in 0..num_nodes {
        for v in 0..num_nodes {
            if u != v && rng.gen_bool(density) {
                edges.push(Edge::new(u, v, rng.gen_range(0..num_relations)));
            }
        }
    }
    TrustGraph::new(num_nodes, num_relations, edges).expect("random graph is valid")
}

/// Fixed ten-node, four-level graph with twenty edges for gradient checks.
pub fn gradient_toy() -> TrustGraph {
    random_graph(&mut ChaCha8Rng::seed_from_u64(1), 10, 4, 0.25)
}

/// Small widths and full-batch training on every edge, sized for
/// millisecond epochs.
pub fn toy_config() -> TrainConfig {
    TrainConfig {
        node_attr_dim: 16,
        edge_attr_dim: 16,
        dim: 16,
        val_fraction: 0.0,
        repeats: 3,
        edge_attr_mode: EdgeAttrMode::Learnable,
        ..TrainConfig::default()
    }
}
