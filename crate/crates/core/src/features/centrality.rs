//! Node-level structural measures used by the topological predictors.

use std::collections::VecDeque;

use crate::graph::Graph;
use crate::par;

pub const UNREACHABLE: u32 = u32::MAX;

/// Triangles through each node.
pub fn triangles(g: &Graph) -> Vec<usize> {
    let mut t = vec![0usize; g.node_count()];
    for &(i, j) in g.edges() {
        g.for_each_common_neighbor(i, j, |z| {
            // Each triangle is seen once per edge; credit only from its smallest edge.
            if z > j {
                t[i] += 1;
                t[j] += 1;
                t[z] += 1;
            }
        });
    }
    t
}

/// Results of a BFS from every source.
#[derive(Debug, Clone)]
pub struct PathStats {
    /// Row-major n x n hop distances, `UNREACHABLE` when disconnected.
    pub dist: Vec<u32>,
    /// Normalized shortest-path betweenness.
    pub betweenness: Vec<f64>,
    /// Normalized load centrality.
    pub load: Vec<f64>,
    /// Closeness with the reachable-fraction correction for disconnected graphs.
    pub closeness: Vec<f64>,
}

impl PathStats {
    #[inline]
    pub fn distance(&self, n: usize, i: usize, j: usize) -> u32 {
        self.dist[i * n + j]
    }
}

const SOURCE_CHUNK: usize = 32;

struct SourceAcc {
    dist: Vec<u32>,
    between: Vec<f64>,
    load: Vec<f64>,
}

pub fn path_stats(g: &Graph) -> PathStats {
    let n = g.node_count();
    let chunks = n.div_ceil(SOURCE_CHUNK);
    let partials: Vec<SourceAcc> = par::map_range(chunks, |c| {
        let lo = c * SOURCE_CHUNK;
        let hi = (lo + SOURCE_CHUNK).min(n);
        let mut acc = SourceAcc {
            dist: Vec::with_capacity((hi - lo) * n),
            between: vec![0.0; n],
            load: vec![0.0; n],
        };
        let mut work = BfsWork::new(n);
        for s in lo..hi {
            work.run(g, s, &mut acc);
        }
        acc
    });

    let mut dist = Vec::with_capacity(n * n);
    let mut betweenness = vec![0.0; n];
    let mut load = vec![0.0; n];
    for p in partials {
        dist.extend_from_slice(&p.dist);
        for v in 0..n {
            betweenness[v] += p.between[v];
            load[v] += p.load[v];
        }
    }
    // Every unordered pair was counted from both ends.
    let scale = if n > 2 {
        1.0 / ((n - 1) as f64 * (n - 2) as f64)
    } else {
        0.0
    };
    for v in 0..n {
        betweenness[v] *= scale;
        load[v] *= scale;
    }

    let closeness = (0..n)
        .map(|i| {
            let row = &dist[i * n..(i + 1) * n];
            let (mut total, mut reach) = (0u64, 0usize);
            for (j, &d) in row.iter().enumerate() {
                if j != i && d != UNREACHABLE {
                    total += d as u64;
                    reach += 1;
                }
            }
            if total == 0 || n < 2 {
                0.0
            } else {
                let r = reach as f64;
                (r / total as f64) * (r / (n - 1) as f64)
            }
        })
        .collect();

    PathStats {
        dist,
        betweenness,
        load,
        closeness,
    }
}

struct BfsWork {
    order: Vec<usize>,
    sigma: Vec<f64>,
    delta: Vec<f64>,
    load: Vec<f64>,
    dist: Vec<u32>,
    queue: VecDeque<usize>,
}

impl BfsWork {
    fn new(n: usize) -> Self {
        BfsWork {
            order: Vec::with_capacity(n),
            sigma: vec![0.0; n],
            delta: vec![0.0; n],
            load: vec![0.0; n],
            dist: vec![UNREACHABLE; n],
            queue: VecDeque::new(),
        }
    }

    fn run(&mut self, g: &Graph, s: usize, acc: &mut SourceAcc) {
        let n = g.node_count();
        self.dist.fill(UNREACHABLE);
        self.sigma.fill(0.0);
        self.delta.fill(0.0);
        self.order.clear();
        self.dist[s] = 0;
        self.sigma[s] = 1.0;
        self.queue.push_back(s);
        while let Some(u) = self.queue.pop_front() {
            self.order.push(u);
            let du = self.dist[u];
            for &v in g.neighbors(u) {
                if self.dist[v] == UNREACHABLE {
                    self.dist[v] = du + 1;
                    self.queue.push_back(v);
                }
                if self.dist[v] == du + 1 {
                    self.sigma[v] += self.sigma[u];
                }
            }
        }
        // Brandes dependency accumulation, farthest nodes first.
        for &w in self.order.iter().rev() {
            let dw = self.dist[w];
            for &v in g.neighbors(w) {
                if self.dist[v] + 1 == dw {
                    self.delta[v] += self.sigma[v] / self.sigma[w] * (1.0 + self.delta[w]);
                }
            }
            if w != s {
                acc.between[w] += self.delta[w];
            }
        }
        // Load: each node forwards its load split equally among predecessors.
        for &w in &self.order {
            self.load[w] = 1.0;
        }
        for &w in self.order.iter().rev() {
            if w == s {
                continue;
            }
            let dw = self.dist[w];
            let preds = g
                .neighbors(w)
                .iter()
                .filter(|&&v| self.dist[v] + 1 == dw)
                .count();
            if self.dist[w] == 1 {
                continue;
            }
            let share = self.load[w] / preds as f64;
            for &v in g.neighbors(w) {
                if self.dist[v] + 1 == dw {
                    self.load[v] += share;
                }
            }
        }
        for &w in &self.order {
            if w != s {
                acc.load[w] += self.load[w] - 1.0;
            }
            self.load[w] = 0.0;
        }
        acc.dist.extend_from_slice(&self.dist[..n]);
    }
}

/// Unit-norm principal eigenvector and the matching eigenvalue.
#[derive(Debug, Clone)]
pub struct Eigenvector {
    pub vector: Vec<f64>,
    pub lambda_max: f64,
    pub converged: bool,
}

/// Power iteration on `A + I` (shifting removes the bipartite oscillation),
/// L1 tolerance `tol`, capped at `max_iter`. Falls back to the normalized
/// degree vector if it does not converge.
pub fn eigenvector_centrality(g: &Graph, tol: f64, max_iter: usize) -> Eigenvector {
    let n = g.node_count();
    if n == 0 {
        return Eigenvector {
            vector: vec![],
            lambda_max: 0.0,
            converged: true,
        };
    }
    if g.edge_count() == 0 {
        return Eigenvector {
            vector: vec![1.0 / (n as f64).sqrt(); n],
            lambda_max: 0.0,
            converged: true,
        };
    }
    let mut x = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    let mut converged = false;
    for _ in 0..max_iter {
        for i in 0..n {
            next[i] = x[i] + g.neighbors(i).iter().map(|&z| x[z]).sum::<f64>();
        }
        normalize_l2(&mut next);
        let diff: f64 = x.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut x, &mut next);
        if diff < tol {
            converged = true;
            break;
        }
    }
    if !converged {
        let mut d: Vec<f64> = g.degrees().into_iter().map(|d| d as f64).collect();
        normalize_l2(&mut d);
        let max_degree = g.degrees().into_iter().max().unwrap_or(0) as f64;
        return Eigenvector {
            vector: d,
            lambda_max: max_degree,
            converged: false,
        };
    }
    let ax_dot_x: f64 = (0..n)
        .map(|i| x[i] * g.neighbors(i).iter().map(|&z| x[z]).sum::<f64>())
        .sum();
    Eigenvector {
        vector: x,
        lambda_max: ax_dot_x,
        converged: true,
    }
}

/// Katz centrality `x = sum_k (a A)^k 1` with `a = attenuation / lambda_max`,
/// L2-normalized.
pub fn katz_centrality(g: &Graph, lambda_max: f64, attenuation: f64, tol: f64) -> Vec<f64> {
    let n = g.node_count();
    if n == 0 {
        return vec![];
    }
    if lambda_max <= 0.0 {
        return vec![1.0 / (n as f64).sqrt(); n];
    }
    let a = attenuation / lambda_max;
    let mut x = vec![1.0; n];
    let mut next = vec![0.0; n];
    for _ in 0..10_000 {
        for i in 0..n {
            next[i] = 1.0 + a * g.neighbors(i).iter().map(|&z| x[z]).sum::<f64>();
        }
        let diff: f64 = x.iter().zip(&next).map(|(p, q)| (p - q).abs()).sum();
        std::mem::swap(&mut x, &mut next);
        if diff < tol * n as f64 {
            break;
        }
    }
    normalize_l2(&mut x);
    x
}

/// Global PageRank, uniform teleport, dangling mass spread uniformly.
pub fn pagerank(g: &Graph, damping: f64, tol: f64, max_iter: usize) -> Vec<f64> {
    let n = g.node_count();
    if n == 0 {
        return vec![];
    }
    let uniform = 1.0 / n as f64;
    let mut x = vec![uniform; n];
    let mut next = vec![0.0; n];
    for _ in 0..max_iter {
        let dangling: f64 = (0..n).filter(|&i| g.degree(i) == 0).map(|i| x[i]).sum();
        let base = (1.0 - damping) * uniform + damping * dangling * uniform;
        next.fill(base);
        for i in 0..n {
            let d = g.degree(i);
            if d > 0 {
                let share = damping * x[i] / d as f64;
                for &z in g.neighbors(i) {
                    next[z] += share;
                }
            }
        }
        let diff: f64 = x.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut x, &mut next);
        if diff < tol {
            break;
        }
    }
    x
}

/// Personalized PageRank vectors for every source, row-major n x n.
/// Row `i` restarts at `i` with probability `restart`; dangling mass returns
/// to the source.
pub fn personalized_pagerank(g: &Graph, restart: f64, tol: f64, max_iter: usize) -> Vec<f64> {
    let n = g.node_count();
    let rows: Vec<Vec<f64>> = par::map_range(n, |s| ppr_row(g, s, restart, tol, max_iter));
    rows.concat()
}

fn ppr_row(g: &Graph, s: usize, restart: f64, tol: f64, max_iter: usize) -> Vec<f64> {
    let n = g.node_count();
    let mut x = vec![0.0; n];
    x[s] = 1.0;
    if g.degree(s) == 0 {
        return x;
    }
    let damping = 1.0 - restart;
    let mut next = vec![0.0; n];
    for _ in 0..max_iter {
        next.fill(0.0);
        let mut back_to_source = restart;
        for i in 0..n {
            let xi = x[i];
            if xi == 0.0 {
                continue;
            }
            let d = g.degree(i);
            if d == 0 {
                back_to_source += damping * xi;
                continue;
            }
            let share = damping * xi / d as f64;
            for &z in g.neighbors(i) {
                next[z] += share;
            }
        }
        next[s] += back_to_source;
        let diff: f64 = x.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut x, &mut next);
        if diff < tol {
            break;
        }
    }
    x
}

pub fn normalize_l2(x: &mut [f64]) {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        x.iter_mut().for_each(|v| *v /= norm);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> Graph {
        Graph::from_edges(3, [(0, 1), (1, 2)]).unwrap()
    }

    #[test]
    fn triangle_counts() {
        let k4 = Graph::from_edges(4, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]).unwrap();
        assert_eq!(triangles(&k4), vec![3, 3, 3, 3]);
        assert_eq!(triangles(&path3()), vec![0, 0, 0]);
    }

    #[test]
    fn path_betweenness_and_load() {
        let s = path_stats(&path3());
        assert_eq!(s.betweenness, vec![0.0, 1.0, 0.0]);
        assert_eq!(s.load, vec![0.0, 1.0, 0.0]);
        assert_eq!(s.distance(3, 0, 2), 2);
        assert!((s.closeness[1] - 1.0).abs() < 1e-12);
        assert!((s.closeness[0] - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn cycle_eigenvector_is_flat() {
        let c4 = Graph::from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        let ev = eigenvector_centrality(&c4, 1e-8, 1000);
        assert!(ev.converged);
        for v in &ev.vector {
            assert!((v - 0.5).abs() < 1e-9);
        }
        assert!((ev.lambda_max - 2.0).abs() < 1e-9);
    }

    #[test]
    fn ppr_rows_are_distributions() {
        let g = Graph::from_edges(5, [(0, 1), (1, 2), (2, 0), (2, 3)]).unwrap();
        let ppr = personalized_pagerank(&g, 0.15, 1e-10, 500);
        for s in 0..5 {
            let row_sum: f64 = ppr[s * 5..(s + 1) * 5].iter().sum();
            assert!((row_sum - 1.0).abs() < 1e-9);
        }
        // isolated source keeps all mass
        assert_eq!(ppr[4 * 5 + 4], 1.0);
    }

    #[test]
    fn pagerank_sums_to_one() {
        let g = Graph::from_edges(4, [(0, 1), (1, 2)]).unwrap();
        let pr = pagerank(&g, 0.85, 1e-12, 500);
        assert!((pr.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(pr[1] > pr[0]);
    }
}
