//! Uniform edge holdout and the two-stage training construction.
//!
//! `sample_holdout` keeps exactly `round(alpha * m)` edges of the true graph.
//! `build_training_instance` removes a further `1 - alpha'` share of the
//! observed edges as positives; negatives are the non-edges of the observed
//! graph, and level-0 features for training must be computed on the doubly
//! reduced graph.

use rand::seq::{index, SliceRandom};

use crate::error::{Error, Result};
use crate::graph::{Graph, Pair};
use crate::rng;

#[derive(Debug, Clone)]
pub struct HoldoutSplit {
    pub observed: Graph,
    pub holdout_edges: Vec<Pair>,
    pub alpha: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct LabeledPairs {
    pub pairs: Vec<Pair>,
    pub labels: Vec<bool>,
    /// Graph the training features must be computed on.
    pub feature_graph: Graph,
    /// Non-edges of the observed graph before any cap was applied.
    pub negatives_available: usize,
}

impl LabeledPairs {
    pub fn positive_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }

    pub fn negative_count(&self) -> usize {
        self.labels.len() - self.positive_count()
    }
}

pub fn sample_holdout(graph: &Graph, alpha: f64, seed: u64) -> Result<HoldoutSplit> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::OutOfRange {
            name: "alpha",
            value: alpha,
            range: "(0, 1]",
        });
    }
    let m = graph.edge_count();
    if m == 0 {
        return Err(Error::TooSmall("graph has no edges".into()));
    }
    let keep = (alpha * m as f64).round() as usize;
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut rng::stream(seed, 1));
    let mut holdout: Vec<Pair> = order[keep..].iter().map(|&e| graph.edges()[e]).collect();
    holdout.sort_unstable();
    let observed = graph.remove_edges(&holdout)?;
    Ok(HoldoutSplit {
        observed,
        holdout_edges: holdout,
        alpha,
        seed,
    })
}

/// Candidate pairs at test time: every non-edge of the observed graph, with
/// `true` labels on the held-out edges.
pub fn test_candidates(split: &HoldoutSplit) -> (Vec<Pair>, Vec<bool>) {
    let pairs: Vec<Pair> = split.observed.non_edges().collect();
    let labels = pairs
        .iter()
        .map(|p| split.holdout_edges.binary_search(p).is_ok())
        .collect();
    (pairs, labels)
}

/// `negative_cap`, when set and smaller than the available non-edges,
/// replaces the full negative set with a uniform subsample of that size.
pub fn build_training_instance(
    split: &HoldoutSplit,
    alpha_prime: f64,
    seed: u64,
    negative_cap: Option<usize>,
) -> Result<LabeledPairs> {
    if !(alpha_prime > 0.0 && alpha_prime < 1.0) {
        return Err(Error::OutOfRange {
            name: "alpha_prime",
            value: alpha_prime,
            range: "(0, 1)",
        });
    }
    let observed = &split.observed;
    let m = observed.edge_count();
    if m < 2 {
        return Err(Error::TooSmall(format!(
            "observed graph has {m} edges, need at least 2"
        )));
    }
    let remove = (((1.0 - alpha_prime) * m as f64).round() as usize).clamp(1, m - 1);
    let mut r = rng::stream(seed, 2);
    let mut positives: Vec<Pair> = index::sample(&mut r, m, remove)
        .into_iter()
        .map(|e| observed.edges()[e])
        .collect();
    positives.sort_unstable();
    let feature_graph = observed.remove_edges(&positives)?;

    let available = observed.non_edge_count();
    let negatives: Vec<Pair> = match negative_cap {
        Some(cap) if cap < available => {
            let mut ranks = index::sample(&mut r, available, cap).into_vec();
            ranks.sort_unstable();
            let mut out = Vec::with_capacity(cap);
            let mut next = 0;
            for (rank, p) in observed.non_edges().enumerate() {
                if next == ranks.len() {
                    break;
                }
                if ranks[next] == rank {
                    out.push(p);
                    next += 1;
                }
            }
            out
        }
        _ => observed.non_edges().collect(),
    };

    let mut pairs = positives;
    let mut labels = vec![true; pairs.len()];
    labels.extend(std::iter::repeat_n(false, negatives.len()));
    pairs.extend(negatives);
    Ok(LabeledPairs {
        pairs,
        labels,
        feature_graph,
        negatives_available: available,
    })
}

/// Stratified k-fold split of row indices. Returns `(train, validate)` per fold.
pub fn kfold(labels: &[bool], folds: usize, seed: u64) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    if folds < 2 {
        return Err(Error::OutOfRange {
            name: "folds",
            value: folds as f64,
            range: ">= 2",
        });
    }
    let mut pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i]).collect();
    let mut neg: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i]).collect();
    if pos.len() < folds || neg.len() < folds {
        return Err(Error::TooSmall(format!(
            "{} positives and {} negatives cannot fill {folds} folds",
            pos.len(),
            neg.len()
        )));
    }
    let mut r = rng::stream(seed, 3);
    pos.shuffle(&mut r);
    neg.shuffle(&mut r);
    let mut fold_of = vec![0usize; labels.len()];
    for (k, &i) in pos.iter().enumerate() {
        fold_of[i] = k % folds;
    }
    for (k, &i) in neg.iter().enumerate() {
        fold_of[i] = k % folds;
    }
    Ok((0..folds)
        .map(|f| {
            let (val, train): (Vec<usize>, Vec<usize>) =
                (0..labels.len()).partition(|&i| fold_of[i] == f);
            (train, val)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cycle(n: usize) -> Graph {
        Graph::from_edges(n, (0..n).map(|i| (i, (i + 1) % n))).unwrap()
    }

    #[test]
    fn holdout_counts() {
        let g = cycle(10);
        let s = sample_holdout(&g, 0.8, 7).unwrap();
        assert_eq!(s.observed.edge_count(), 8);
        assert_eq!(s.holdout_edges.len(), 2);
        for e in &s.holdout_edges {
            assert!(g.has_edge(e.0, e.1));
            assert!(!s.observed.has_edge(e.0, e.1));
        }
    }

    #[test]
    fn alpha_one_is_identity() {
        let g = cycle(6);
        let s = sample_holdout(&g, 1.0, 1).unwrap();
        assert!(s.holdout_edges.is_empty());
        assert_eq!(s.observed, g);
    }

    #[test]
    fn alpha_range_checked() {
        let g = cycle(6);
        assert!(sample_holdout(&g, 0.0, 1).is_err());
        assert!(sample_holdout(&g, 1.5, 1).is_err());
    }

    #[test]
    fn holdout_is_deterministic() {
        let g = cycle(30);
        let a = sample_holdout(&g, 0.8, 99).unwrap();
        let b = sample_holdout(&g, 0.8, 99).unwrap();
        assert_eq!(a.holdout_edges, b.holdout_edges);
        let c = sample_holdout(&g, 0.8, 100).unwrap();
        assert_ne!(a.holdout_edges, c.holdout_edges);
    }

    #[test]
    fn training_positive_count() {
        let g = cycle(125);
        let s = sample_holdout(&g, 0.8, 3).unwrap();
        assert_eq!(s.observed.edge_count(), 100);
        let t = build_training_instance(&s, 0.8, 5, None).unwrap();
        assert_eq!(t.positive_count(), 20);
        assert_eq!(t.feature_graph.edge_count(), 80);
        assert_eq!(t.negative_count(), s.observed.non_edge_count());
        for (p, &l) in t.pairs.iter().zip(&t.labels) {
            if l {
                assert!(s.observed.has_edge(p.0, p.1));
                assert!(!t.feature_graph.has_edge(p.0, p.1));
            } else {
                assert!(!s.observed.has_edge(p.0, p.1));
            }
        }
    }

    #[test]
    fn sparse_negatives_count() {
        let g = Graph::from_edges(100, (0..50).map(|i| (i, i + 50))).unwrap();
        let s = sample_holdout(&g, 1.0, 0).unwrap();
        let t = build_training_instance(&s, 0.8, 0, None).unwrap();
        assert_eq!(t.negative_count(), 100 * 99 / 2 - 50);
    }

    #[test]
    fn tiny_graph_rounds_positives_up() {
        let g = Graph::from_edges(4, [(0, 1), (2, 3)]).unwrap();
        let s = sample_holdout(&g, 1.0, 0).unwrap();
        let t = build_training_instance(&s, 0.9, 0, None).unwrap();
        assert_eq!(t.positive_count(), 1);
        let one = Graph::from_edges(3, [(0, 1)]).unwrap();
        let s = sample_holdout(&one, 1.0, 0).unwrap();
        assert!(matches!(
            build_training_instance(&s, 0.8, 0, None),
            Err(Error::TooSmall(_))
        ));
    }

    #[test]
    fn negative_cap_subsamples() {
        let g = cycle(60);
        let s = sample_holdout(&g, 0.8, 1).unwrap();
        let t = build_training_instance(&s, 0.8, 1, Some(100)).unwrap();
        assert_eq!(t.negative_count(), 100);
        let mut negs: Vec<_> = t
            .pairs
            .iter()
            .zip(&t.labels)
            .filter(|(_, &l)| !l)
            .map(|(p, _)| *p)
            .collect();
        negs.dedup();
        assert_eq!(negs.len(), 100);
        assert!(negs.iter().all(|p| !s.observed.has_edge(p.0, p.1)));
    }

    #[test]
    fn kfold_partition_and_stratification() {
        let mut labels = vec![true; 20];
        labels.extend(vec![false; 83]);
        let folds = kfold(&labels, 5, 11).unwrap();
        let mut seen = vec![0; labels.len()];
        for (train, val) in &folds {
            assert_eq!(val.iter().filter(|&&i| labels[i]).count(), 4);
            assert_eq!(train.len() + val.len(), labels.len());
            for &i in val {
                seen[i] += 1;
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
        assert_eq!(folds, kfold(&labels, 5, 11).unwrap());
        assert!(kfold(&labels[..19], 5, 0).is_err());
        assert!(kfold(&[true, true, false, false, false], 5, 0).is_err());
    }
}
