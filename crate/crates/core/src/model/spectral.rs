//! Spectral clustering with the Bethe Hessian, a symmetric n x n surrogate
//! for the non-backtracking operator.

use nalgebra::DMatrix;
use rand::Rng as _;

use super::partition::Partition;
use super::sbm::max_blocks;
use crate::graph::Graph;
use crate::rng;

const KMEANS_RESTARTS: usize = 10;
const KMEANS_ITERS: usize = 100;

#[derive(Debug, Clone)]
pub struct SpectralFit {
    pub partition: Partition,
    /// Number of negative Bethe-Hessian eigenvalues (clamped to `1..=k_max`).
    pub k_estimate: usize,
    pub r: f64,
}

/// `r = sqrt(sum d^2 / sum d - 1)`, the square root of the average excess degree.
pub fn bethe_radius(g: &Graph) -> f64 {
    let (s1, s2) = g
        .degrees()
        .iter()
        .fold((0.0, 0.0), |(a, b), &d| (a + d as f64, b + (d * d) as f64));
    if s1 == 0.0 {
        return 1.0;
    }
    (s2 / s1 - 1.0).max(1.0).sqrt()
}

/// `H(r) = (r^2 - 1) I - r A + D`.
pub fn bethe_hessian(g: &Graph, r: f64) -> DMatrix<f64> {
    let n = g.node_count();
    let mut h = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        h[(i, i)] = r * r - 1.0 + g.degree(i) as f64;
        for &j in g.neighbors(i) {
            h[(i, j)] = -r;
        }
    }
    h
}

/// Low end of the Bethe-Hessian spectrum.
#[derive(Debug, Clone)]
pub struct BetheSpectrum {
    pub r: f64,
    /// Number of negative eigenvalues, clamped to `1..=k_max`.
    pub k_estimate: usize,
    n: usize,
    /// Eigenvectors for the `cols` smallest eigenvalues, row-major n x cols.
    vectors: Vec<f64>,
    cols: usize,
}

impl BetheSpectrum {
    /// Keeps `extra` eigenvectors beyond the estimated count.
    pub fn compute(g: &Graph, extra: usize) -> Self {
        let n = g.node_count();
        let r = bethe_radius(g);
        if g.edge_count() == 0 || n < 3 {
            return BetheSpectrum {
                r,
                k_estimate: 1,
                n,
                vectors: vec![],
                cols: 0,
            };
        }
        let eig = bethe_hessian(g, r).symmetric_eigen();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
        let negative = order.iter().filter(|&&i| eig.eigenvalues[i] < 0.0).count();
        let k_estimate = negative.clamp(1, max_blocks(n));
        let cols = (k_estimate + extra).min(n);
        let mut vectors = vec![0.0; n * cols];
        for (c, &col) in order[..cols].iter().enumerate() {
            for i in 0..n {
                vectors[i * cols + c] = eig.eigenvectors[(i, col)];
            }
        }
        BetheSpectrum {
            r,
            k_estimate,
            n,
            vectors,
            cols,
        }
    }

    /// k-means on the first `k` eigenvectors, rows scaled to unit length
    /// so hubs do not dominate.
    pub fn partition(&self, g: &Graph, k: usize, seed: u64) -> Partition {
        let k = k.min(self.cols);
        if k <= 1 {
            return Partition::single_block(g);
        }
        let mut points = Vec::with_capacity(self.n * k);
        for i in 0..self.n {
            let row = &self.vectors[i * self.cols..i * self.cols + k];
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            points.extend(row.iter().map(|x| if norm > 0.0 { x / norm } else { 0.0 }));
        }
        let labels = kmeans(&points, k, k, seed);
        Partition::from_assignment(g, &labels).expect("label count matches")
    }
}

pub fn fit_spectral_nb(g: &Graph, seed: u64) -> SpectralFit {
    let spectrum = BetheSpectrum::compute(g, 0);
    SpectralFit {
        partition: spectrum.partition(g, spectrum.k_estimate, seed),
        k_estimate: spectrum.k_estimate,
        r: spectrum.r,
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Seeded k-means++ with restarts; returns the lowest-inertia labeling.
pub fn kmeans(points: &[f64], dim: usize, k: usize, seed: u64) -> Vec<usize> {
    let n = points.len() / dim;
    let row = |i: usize| &points[i * dim..(i + 1) * dim];
    let mut best: Option<(f64, Vec<usize>)> = None;
    for restart in 0..KMEANS_RESTARTS {
        let mut rg = rng::stream(seed, 40 + restart as u64);
        let mut centers: Vec<f64> = Vec::with_capacity(k * dim);
        centers.extend_from_slice(row(rg.random_range(0..n)));
        let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(row(i), &centers[..dim])).collect();
        while centers.len() < k * dim {
            let total: f64 = d2.iter().sum();
            let pick = if total <= 0.0 {
                rg.random_range(0..n)
            } else {
                let mut u = rg.random::<f64>() * total;
                let mut p = n - 1;
                for (i, &d) in d2.iter().enumerate() {
                    if u < d {
                        p = i;
                        break;
                    }
                    u -= d;
                }
                p
            };
            let c = centers.len() / dim;
            centers.extend_from_slice(row(pick));
            for i in 0..n {
                d2[i] = d2[i].min(sq_dist(row(i), &centers[c * dim..(c + 1) * dim]));
            }
        }

        let mut labels = vec![0usize; n];
        let mut inertia = f64::INFINITY;
        for iter in 0..KMEANS_ITERS {
            let mut changed = false;
            inertia = 0.0;
            for i in 0..n {
                let (mut bd, mut bc) = (f64::INFINITY, 0);
                for c in 0..k {
                    let d = sq_dist(row(i), &centers[c * dim..(c + 1) * dim]);
                    if d < bd {
                        bd = d;
                        bc = c;
                    }
                }
                inertia += bd;
                if labels[i] != bc || iter == 0 {
                    changed |= labels[i] != bc;
                    labels[i] = bc;
                }
            }
            if !changed && iter > 0 {
                break;
            }
            let mut sums = vec![0.0; k * dim];
            let mut counts = vec![0usize; k];
            for i in 0..n {
                counts[labels[i]] += 1;
                for (s, x) in sums[labels[i] * dim..(labels[i] + 1) * dim].iter_mut().zip(row(i)) {
                    *s += x;
                }
            }
            for c in 0..k {
                if counts[c] > 0 {
                    for t in 0..dim {
                        centers[c * dim + t] = sums[c * dim + t] / counts[c] as f64;
                    }
                }
            }
        }
        if best.as_ref().is_none_or(|(b, _)| inertia < *b) {
            best = Some((inertia, labels));
        }
    }
    best.map(|b| b.1).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn planted(n_per: usize, k: usize, p_in: f64, p_out: f64, seed: u64) -> Graph {
        let n = n_per * k;
        let mut r = rng::rng(seed);
        let mut e = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let p = if i / n_per == j / n_per { p_in } else { p_out };
                if r.random::<f64>() < p {
                    e.push((i, j));
                }
            }
        }
        Graph::from_edges(n, e).unwrap()
    }

    #[test]
    fn finds_two_planted_blocks() {
        let hits = (0..10)
            .filter(|&s| fit_spectral_nb(&planted(60, 2, 0.15, 0.005, s), s).k_estimate == 2)
            .count();
        assert!(hits >= 9, "{hits}/10");
        let g = planted(60, 2, 0.15, 0.005, 99);
        let truth: Vec<usize> = (0..120).map(|i| i / 60).collect();
        assert!(fit_spectral_nb(&g, 1).partition.agreement(&truth) > 0.95);
    }

    #[test]
    fn er_graph_has_one_block() {
        let g = planted(150, 1, 0.05, 0.0, 7);
        assert_eq!(fit_spectral_nb(&g, 0).k_estimate, 1);
    }

    #[test]
    fn k_estimate_is_relabeling_invariant() {
        let g = planted(40, 3, 0.3, 0.01, 5);
        let n = g.node_count();
        let perm: Vec<usize> = (0..n).map(|i| (i * 37 + 11) % n).collect();
        let h = g.relabel(&perm).unwrap();
        assert_eq!(fit_spectral_nb(&g, 0).k_estimate, fit_spectral_nb(&h, 0).k_estimate);
    }

    #[test]
    fn kmeans_separates_clusters() {
        let pts = [0.0, 0.1, 0.05, 10.0, 10.1, 9.9];
        let l = kmeans(&pts, 1, 2, 3);
        assert_eq!(l[0], l[1]);
        assert_eq!(l[1], l[2]);
        assert_ne!(l[0], l[3]);
        assert_eq!(l[3], l[5]);
    }
}
