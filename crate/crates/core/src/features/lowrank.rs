//! Rank-`r` approximations of the adjacency matrix.
//!
//! The adjacency matrix is symmetric, so its SVD follows from the
//! eigendecomposition: singular values are `|lambda|`, and
//! `A_r = sum_k lambda_k u_k u_k^T` over the `r` eigenpairs of largest
//! magnitude. Both the exact (dense eigensolver) and the randomized
//! subspace-iteration variants are stored in that form.

use nalgebra::{DMatrix, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng;

#[derive(Debug, Clone)]
pub struct LowRank {
    n: usize,
    rank: usize,
    /// Eigenvalues, largest magnitude first.
    lambdas: Vec<f64>,
    /// Row-major n x rank eigenvector matrix.
    vectors: Vec<f64>,
    /// Row-major n x rank sums of eigenvector rows over each node's neighbors.
    neighbor_sums: Vec<f64>,
    degrees: Vec<usize>,
}

/// Default rank: `min(32, n - 1)`, at least 1.
pub fn default_rank(n: usize) -> usize {
    32.min(n.saturating_sub(1)).max(1)
}

pub fn dense_adjacency(g: &Graph) -> DMatrix<f64> {
    let n = g.node_count();
    let mut a = DMatrix::<f64>::zeros(n, n);
    for &(i, j) in g.edges() {
        a[(i, j)] = 1.0;
        a[(j, i)] = 1.0;
    }
    a
}

fn check_rank(g: &Graph, rank: usize) -> Result<()> {
    if rank == 0 || rank > g.node_count() {
        return Err(Error::OutOfRange {
            name: "rank",
            value: rank as f64,
            range: "[1, n]",
        });
    }
    Ok(())
}

pub fn low_rank_approx(g: &Graph, rank: usize) -> Result<LowRank> {
    LowRank::exact(g, rank)
}

impl LowRank {
    /// Truncation of the full eigendecomposition.
    pub fn exact(g: &Graph, rank: usize) -> Result<Self> {
        check_rank(g, rank)?;
        let eig = SymmetricEigen::new(dense_adjacency(g));
        Ok(Self::from_eigen(g, rank, eig.eigenvalues.as_slice(), &eig.eigenvectors))
    }

    /// Randomized range finder with `power_steps` subspace iterations and
    /// `oversample` extra columns, followed by a Rayleigh-Ritz projection.
    pub fn approximate(
        g: &Graph,
        rank: usize,
        power_steps: usize,
        oversample: usize,
        seed: u64,
    ) -> Result<Self> {
        check_rank(g, rank)?;
        let n = g.node_count();
        let width = (rank + oversample).min(n);
        let mut r = rng::stream(seed, 11);
        let omega = DMatrix::<f64>::from_fn(n, width, |_, _| StandardNormal.sample(&mut r));
        let mut q = orthonormalize(sparse_mul(g, &omega));
        for _ in 0..power_steps {
            q = orthonormalize(sparse_mul(g, &q));
        }
        let aq = sparse_mul(g, &q);
        let small = q.transpose() * &aq;
        let small = (&small + small.transpose()) * 0.5;
        let eig = SymmetricEigen::new(small);
        let lifted = &q * &eig.eigenvectors;
        Ok(Self::from_eigen(g, rank.min(width), eig.eigenvalues.as_slice(), &lifted))
    }

    fn from_eigen(g: &Graph, rank: usize, values: &[f64], vectors: &DMatrix<f64>) -> Self {
        let n = g.node_count();
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| {
            values[b]
                .abs()
                .total_cmp(&values[a].abs())
                .then(values[b].total_cmp(&values[a]))
        });
        order.truncate(rank);
        let lambdas: Vec<f64> = order.iter().map(|&k| values[k]).collect();
        let mut vecs = vec![0.0; n * rank];
        for (c, &k) in order.iter().enumerate() {
            // Fix the sign so the largest-magnitude entry is positive.
            let col = vectors.column(k);
            let pivot = col
                .iter()
                .copied()
                .fold(0.0f64, |best, v| if v.abs() > best.abs() { v } else { best });
            let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
            for i in 0..n {
                vecs[i * rank + c] = sign * col[i];
            }
        }
        let mut neighbor_sums = vec![0.0; n * rank];
        for i in 0..n {
            for &z in g.neighbors(i) {
                for c in 0..rank {
                    neighbor_sums[i * rank + c] += vecs[z * rank + c];
                }
            }
        }
        LowRank {
            n,
            rank,
            lambdas,
            vectors: vecs,
            neighbor_sums,
            degrees: g.degrees(),
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.lambdas
    }

    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.rank..(i + 1) * self.rank]
    }

    /// Entry `(i, j)` of the rank-r approximation.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.row(i), self.row(j));
        (0..self.rank).map(|c| self.lambdas[c] * a[c] * b[c]).sum()
    }

    /// Dot product of columns `i` and `j` of the approximation.
    pub fn column_dot(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.row(i), self.row(j));
        (0..self.rank)
            .map(|c| self.lambdas[c] * self.lambdas[c] * a[c] * b[c])
            .sum()
    }

    /// Mean of the approximation's entries between each endpoint and the
    /// other endpoint's neighbors; 0 when neither endpoint has neighbors.
    pub fn neighbor_mean(&self, i: usize, j: usize) -> f64 {
        let count = self.degrees[i] + self.degrees[j];
        if count == 0 {
            return 0.0;
        }
        let (ui, uj) = (self.row(i), self.row(j));
        let si = &self.neighbor_sums[i * self.rank..(i + 1) * self.rank];
        let sj = &self.neighbor_sums[j * self.rank..(j + 1) * self.rank];
        let total: f64 = (0..self.rank)
            .map(|c| self.lambdas[c] * (ui[c] * sj[c] + uj[c] * si[c]))
            .sum();
        total / count as f64
    }

    /// Dense reconstruction; test and diagnostics use only.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.entry(i, j))
    }
}

fn sparse_mul(g: &Graph, x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::<f64>::zeros(x.nrows(), x.ncols());
    for c in 0..x.ncols() {
        for i in 0..g.node_count() {
            let mut s = 0.0;
            for &z in g.neighbors(i) {
                s += x[(z, c)];
            }
            out[(i, c)] = s;
        }
    }
    out
}

/// Modified Gram-Schmidt; columns that collapse are replaced by zeros.
fn orthonormalize(mut m: DMatrix<f64>) -> DMatrix<f64> {
    for c in 0..m.ncols() {
        for p in 0..c {
            let dot = m.column(c).dot(&m.column(p));
            let prev = m.column(p).clone_owned();
            m.column_mut(c).axpy(-dot, &prev, 1.0);
        }
        let norm = m.column(c).norm();
        if norm > 1e-12 {
            m.column_mut(c).unscale_mut(norm);
        } else {
            m.column_mut(c).fill(0.0);
        }
    }
    m
}
