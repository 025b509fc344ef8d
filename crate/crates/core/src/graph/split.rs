use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Edge;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeSplit {
    pub train: Vec<Edge>,
    pub test: Vec<Edge>,
    pub seed: u64,
}

/// Uniformly random partition of `items` into a part of
/// `round(fraction * len)` items and the rest. Both parts keep the input's
/// relative order.
pub fn random_partition<T: Clone>(items: &[T], fraction: f64, seed: u64) -> (Vec<T>, Vec<T>) {
    let n_first = ((items.len() as f64) * fraction).round() as usize;
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut in_first = vec![false; items.len()];
    for &i in &order[..n_first.min(items.len())] {
        in_first[i] = true;
    }
    let mut first = Vec::with_capacity(n_first);
    let mut rest = Vec::with_capacity(items.len() - n_first.min(items.len()));
    for (item, take) in items.iter().zip(in_first) {
        if take {
            first.push(item.clone());
        } else {
            rest.push(item.clone());
        }
    }
    (first, rest)
}

pub fn split_edges(edges: &[Edge], train_ratio: f64, seed: u64) -> Result<EdgeSplit> {
    if !(train_ratio > 0.0 && train_ratio < 1.0) {
        return Err(Error::invalid(format!(
            "train ratio must lie strictly between 0 and 1, got {train_ratio}"
        )));
    }
    let (train, test) = random_partition(edges, train_ratio, seed);
    if train.is_empty() || test.is_empty() {
        return Err(Error::invalid(format!(
            "train ratio {train_ratio} on {} edges leaves an empty side",
            edges.len()
        )));
    }
    Ok(EdgeSplit { train, test, seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn edges(n: usize) -> Vec<Edge> {
        (0..n).map(|i| Edge::new(i, i + 1, i % 4)).collect()
    }

    #[test]
    fn advogato_sized_rounding() {
        let s = split_edges(&edges(51_127), 0.8, 1).unwrap();
        assert!(s.train.len() == 40_901 || s.train.len() == 40_902);
        assert_eq!(s.train.len() + s.test.len(), 51_127);
    }

    #[test]
    fn partition_and_determinism() {
        let all = edges(500);
        let a = split_edges(&all, 0.6, 7).unwrap();
        let b = split_edges(&all, 0.6, 7).unwrap();
        assert_eq!(a, b);
        let c = split_edges(&all, 0.6, 8).unwrap();
        assert_ne!(a.train, c.train);
        let tr: HashSet<_> = a.train.iter().collect();
        let te: HashSet<_> = a.test.iter().collect();
        assert!(tr.is_disjoint(&te));
        assert_eq!(tr.len() + te.len(), all.len());
        for ratio in [0.4, 0.6, 0.8] {
            let s = split_edges(&all, ratio, 3).unwrap();
            assert!((s.train.len() as f64 - ratio * 500.0).abs() <= 1.0);
        }
    }

    #[test]
    fn bad_ratios() {
        assert!(split_edges(&edges(10), 0.0, 0).is_err());
        assert!(split_edges(&edges(10), 1.0, 0).is_err());
        assert!(split_edges(&edges(1), 0.5, 0).is_err());
    }
}
