use std::io::Write;

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Node-to-community map with block statistics.
///
/// `block_edges` is a dense k x k matrix: off-diagonal entries count edges
/// between two blocks, diagonal entries count edges inside a block once.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    assignment: Vec<usize>,
    k: usize,
    block_edges: Vec<u64>,
    block_sizes: Vec<usize>,
    block_degrees: Vec<u64>,
}

impl Partition {
    /// Labels are compacted to `0..k` in order of first appearance.
    pub fn from_assignment(g: &Graph, labels: &[usize]) -> Result<Self> {
        if labels.len() != g.node_count() {
            return Err(Error::ColumnMismatch(format!(
                "{} labels for {} nodes",
                labels.len(),
                g.node_count()
            )));
        }
        let mut remap = std::collections::HashMap::new();
        let assignment: Vec<usize> = labels
            .iter()
            .map(|&l| {
                let next = remap.len();
                *remap.entry(l).or_insert(next)
            })
            .collect();
        let k = remap.len().max(1);
        let mut p = Partition {
            assignment,
            k,
            block_edges: vec![0; k * k],
            block_sizes: vec![0; k],
            block_degrees: vec![0; k],
        };
        p.recompute(g);
        Ok(p)
    }

    pub fn single_block(g: &Graph) -> Self {
        Self::from_assignment(g, &vec![0; g.node_count()]).expect("label count matches")
    }

    fn recompute(&mut self, g: &Graph) {
        let k = self.k;
        self.block_edges = vec![0; k * k];
        self.block_sizes = vec![0; k];
        self.block_degrees = vec![0; k];
        for (i, &b) in self.assignment.iter().enumerate() {
            self.block_sizes[b] += 1;
            self.block_degrees[b] += g.degree(i) as u64;
        }
        for &(i, j) in g.edges() {
            let (r, s) = (self.assignment[i], self.assignment[j]);
            if r == s {
                self.block_edges[r * k + r] += 1;
            } else {
                self.block_edges[r * k + s] += 1;
                self.block_edges[s * k + r] += 1;
            }
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    #[inline]
    pub fn block_of(&self, i: usize) -> usize {
        self.assignment[i]
    }

    /// `m_rs` for `r != s`, `m_rr` (counted once) on the diagonal.
    #[inline]
    pub fn edges_between(&self, r: usize, s: usize) -> u64 {
        self.block_edges[r * self.k + s]
    }

    #[inline]
    pub fn size(&self, r: usize) -> usize {
        self.block_sizes[r]
    }

    #[inline]
    pub fn degree_sum(&self, r: usize) -> u64 {
        self.block_degrees[r]
    }

    pub fn sizes(&self) -> &[usize] {
        &self.block_sizes
    }

    /// Recompute statistics from the assignment and compare.
    pub fn is_consistent(&self, g: &Graph) -> bool {
        let mut fresh = self.clone();
        fresh.recompute(g);
        let m = g.edge_count() as u64;
        let k = self.k;
        let within: u64 = (0..k).map(|r| self.edges_between(r, r)).sum();
        let across: u64 = (0..k)
            .flat_map(|r| (r + 1..k).map(move |s| (r, s)))
            .map(|(r, s)| self.edges_between(r, s))
            .sum();
        fresh == *self
            && self.block_sizes.iter().sum::<usize>() == g.node_count()
            && within + across == m
            && self.block_degrees.iter().sum::<u64>() == 2 * m
    }

    /// Newman-Girvan modularity from block statistics.
    pub fn modularity(&self) -> f64 {
        let m: u64 = (0..self.k)
            .map(|r| {
                self.edges_between(r, r) + (r + 1..self.k).map(|s| self.edges_between(r, s)).sum::<u64>()
            })
            .sum();
        if m == 0 {
            return 0.0;
        }
        let m = m as f64;
        (0..self.k)
            .map(|r| {
                let d = self.block_degrees[r] as f64;
                self.edges_between(r, r) as f64 / m - (d / (2.0 * m)).powi(2)
            })
            .sum()
    }

    /// Fraction of nodes whose block matches `truth` under the best
    /// one-to-one relabeling (greedy on the confusion matrix).
    pub fn agreement(&self, truth: &[usize]) -> f64 {
        let n = self.assignment.len();
        if n == 0 {
            return 1.0;
        }
        let kt = truth.iter().copied().max().map_or(0, |x| x + 1);
        let mut conf = vec![0usize; self.k * kt];
        for i in 0..n {
            conf[self.assignment[i] * kt + truth[i]] += 1;
        }
        let mut cells: Vec<(usize, usize, usize)> = (0..self.k)
            .flat_map(|a| (0..kt).map(move |b| (a, b)))
            .map(|(a, b)| (conf[a * kt + b], a, b))
            .collect();
        cells.sort_unstable_by(|x, y| y.cmp(x));
        let (mut used_a, mut used_b) = (vec![false; self.k], vec![false; kt]);
        let mut matched = 0;
        for (c, a, b) in cells {
            if !used_a[a] && !used_b[b] {
                used_a[a] = true;
                used_b[b] = true;
                matched += c;
            }
        }
        matched as f64 / n as f64
    }

    pub fn write_csv<W: Write>(&self, g: &Graph, mut w: W) -> std::io::Result<()> {
        writeln!(w, "node,community")?;
        for (i, &b) in self.assignment.iter().enumerate() {
            writeln!(w, "{},{}", g.label(i), b)?;
        }
        Ok(())
    }
}

/// Modularity by direct edge iteration, independent of block statistics.
pub fn modularity_by_edges(g: &Graph, labels: &[usize]) -> f64 {
    let m = g.edge_count() as f64;
    if m == 0.0 {
        return 0.0;
    }
    let within = g
        .edges()
        .iter()
        .filter(|&&(i, j)| labels[i] == labels[j])
        .count() as f64;
    let mut deg: std::collections::HashMap<usize, f64> = std::collections::HashMap::new();
    for i in 0..g.node_count() {
        *deg.entry(labels[i]).or_default() += g.degree(i) as f64;
    }
    within / m - deg.values().map(|d| (d / (2.0 * m)).powi(2)).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn statistics_reconcile() {
        let g = Graph::from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4), (0, 4)]).unwrap();
        let p = Partition::from_assignment(&g, &[7, 7, 7, 3, 3]).unwrap();
        assert_eq!(p.k(), 2);
        assert_eq!(p.assignment(), &[0, 0, 0, 1, 1]);
        assert_eq!(p.edges_between(0, 0), 2);
        assert_eq!(p.edges_between(1, 1), 1);
        assert_eq!(p.edges_between(0, 1), 2);
        assert_eq!(p.degree_sum(0), 6);
        assert!(p.is_consistent(&g));
        let q = modularity_by_edges(&g, p.assignment());
        assert!((p.modularity() - q).abs() < 1e-12);
    }

    #[test]
    fn agreement_is_permutation_invariant() {
        let g = Graph::from_edges(4, [(0, 1), (2, 3)]).unwrap();
        let p = Partition::from_assignment(&g, &[1, 1, 0, 0]).unwrap();
        assert_eq!(p.agreement(&[1, 1, 0, 0]), 1.0);
        assert_eq!(p.agreement(&[0, 0, 1, 1]), 1.0);
        assert_eq!(p.agreement(&[0, 1, 0, 1]), 0.5);
    }

    #[test]
    fn csv_output() {
        let g = Graph::from_edges(2, [(0, 1)]).unwrap();
        let mut buf = Vec::new();
        Partition::single_block(&g).write_csv(&g, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "node,community\n0,0\n1,0\n");
    }
}
