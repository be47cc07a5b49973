//! DeepWalk node embeddings (uniform walks, skip-gram with negative
//! sampling) and the pair features derived from them.

use std::cell::Cell;
use std::io::Write;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{Column, Family, PairFeatureTable};
use crate::graph::{Graph, Pair};
use crate::{par, rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedConfig {
    pub dims: usize,
    pub walks_per_node: usize,
    pub walk_length: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Lock-free parallel SGD. Results then depend on thread timing.
    pub racy_parallel: bool,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        EmbedConfig {
            dims: 32,
            walks_per_node: 10,
            walk_length: 40,
            window: 5,
            negatives: 5,
            epochs: 3,
            learning_rate: 0.025,
            racy_parallel: false,
        }
    }
}

impl EmbedConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dims < 2 {
            return Err(Error::InvalidSpec(format!("dims must be at least 2, got {}", self.dims)));
        }
        if self.walk_length < 2 || self.window == 0 || self.epochs == 0 {
            return Err(Error::InvalidSpec(
                "walk_length >= 2, window >= 1 and epochs >= 1 are required".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::OutOfRange {
                name: "learning_rate",
                value: self.learning_rate,
                range: "(0, inf)",
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Embedding {
    n: usize,
    dims: usize,
    vectors: Vec<f64>,
    pub config: EmbedConfig,
    pub seed: u64,
    /// Mean negative-sampling loss per epoch.
    pub epoch_loss: Vec<f64>,
    /// True when training ran lock-free in parallel.
    pub nondeterministic: bool,
}

impl Embedding {
    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.dims..(i + 1) * self.dims]
    }

    pub fn cosine(&self, i: usize, j: usize) -> f64 {
        let (u, v) = (self.vector(i), self.vector(j));
        let (nu, nv) = (dot(u, u).sqrt(), dot(v, v).sqrt());
        if nu == 0.0 || nv == 0.0 {
            0.0
        } else {
            dot(u, v) / (nu * nv)
        }
    }

    pub fn write_csv<W: Write>(&self, g: &Graph, mut w: W) -> std::io::Result<()> {
        write!(w, "node")?;
        for c in 0..self.dims {
            write!(w, ",v{c}")?;
        }
        writeln!(w)?;
        for i in 0..self.n {
            write!(w, "{}", g.label(i))?;
            for x in self.vector(i) {
                write!(w, ",{x}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Uniform random walks, `walks_per_node` from every non-isolated node.
/// Each start node has its own stream; walks come back grouped by round
/// and then shuffled with a seeded permutation.
pub fn random_walks(g: &Graph, walks_per_node: usize, walk_length: usize, seed: u64) -> Vec<Vec<usize>> {
    let n = g.node_count();
    let per_node: Vec<Vec<Vec<usize>>> = par::map_range(n, |start| {
        if g.degree(start) == 0 {
            return Vec::new();
        }
        let mut r = rng::stream(seed, start as u64);
        (0..walks_per_node)
            .map(|_| {
                let mut walk = Vec::with_capacity(walk_length);
                let mut cur = start;
                walk.push(cur);
                while walk.len() < walk_length {
                    let nb = g.neighbors(cur);
                    cur = nb[r.random_range(0..nb.len())];
                    walk.push(cur);
                }
                walk
            })
            .collect()
    });
    let mut corpus: Vec<Vec<usize>> = Vec::with_capacity(n * walks_per_node);
    for round in 0..walks_per_node {
        for walks in &per_node {
            if let Some(w) = walks.get(round) {
                corpus.push(w.clone());
            }
        }
    }
    corpus.shuffle(&mut rng::stream(seed, u64::MAX));
    corpus
}

/// Cumulative unigram^0.75 table for negative sampling.
struct NoiseTable {
    cumulative: Vec<f64>,
}

impl NoiseTable {
    fn new(n: usize, corpus: &[Vec<usize>]) -> Self {
        let mut counts = vec![0.0f64; n];
        for w in corpus {
            for &v in w {
                counts[v] += 1.0;
            }
        }
        let mut acc = 0.0;
        let cumulative = counts
            .iter()
            .map(|&c| {
                acc += c.powf(0.75);
                acc
            })
            .collect();
        NoiseTable { cumulative }
    }

    fn sample(&self, r: &mut rng::Rng) -> usize {
        let total = *self.cumulative.last().unwrap_or(&0.0);
        let u = r.random::<f64>() * total;
        self.cumulative.partition_point(|&c| c <= u).min(self.cumulative.len() - 1)
    }
}

trait Store {
    fn get(&self, i: usize) -> f64;
    fn add(&self, i: usize, delta: f64);
}

struct Plain(Vec<Cell<f64>>);

impl Store for Plain {
    fn get(&self, i: usize) -> f64 {
        self.0[i].get()
    }
    fn add(&self, i: usize, delta: f64) {
        self.0[i].set(self.0[i].get() + delta);
    }
}

struct Atomic(Vec<AtomicU64>);

impl Store for Atomic {
    fn get(&self, i: usize) -> f64 {
        f64::from_bits(self.0[i].load(Ordering::Relaxed))
    }
    fn add(&self, i: usize, delta: f64) {
        let v = self.get(i) + delta;
        self.0[i].store(v.to_bits(), Ordering::Relaxed);
    }
}

struct Trainer<'a, S: Store> {
    input: &'a S,
    output: &'a S,
    dims: usize,
    window: usize,
    negatives: usize,
    noise: &'a NoiseTable,
}

impl<S: Store> Trainer<'_, S> {
    /// One pass over `walks`. Returns (summed loss, number of positive pairs).
    fn pass(&self, walks: &[Vec<usize>], r: &mut rng::Rng, lr_at: &dyn Fn(usize) -> f64, offset: usize) -> (f64, usize) {
        let d = self.dims;
        let mut grad = vec![0.0; d];
        let mut loss = 0.0;
        let mut pairs = 0;
        for (w_idx, walk) in walks.iter().enumerate() {
            let lr = lr_at(offset + w_idx);
            for (pos, &center) in walk.iter().enumerate() {
                let lo = pos.saturating_sub(self.window);
                let hi = (pos + self.window + 1).min(walk.len());
                for (cpos, &context) in walk.iter().enumerate().take(hi).skip(lo) {
                    if cpos == pos {
                        continue;
                    }
                    grad.iter_mut().for_each(|g| *g = 0.0);
                    let ci = center * d;
                    for s in 0..=self.negatives {
                        let (target, label) = if s == 0 {
                            (context, 1.0)
                        } else {
                            let t = self.noise.sample(r);
                            if t == context {
                                continue;
                            }
                            (t, 0.0)
                        };
                        let ti = target * d;
                        let mut f = 0.0;
                        for c in 0..d {
                            f += self.input.get(ci + c) * self.output.get(ti + c);
                        }
                        let p = sigmoid(f);
                        loss -= if label == 1.0 { p.max(1e-12).ln() } else { (1.0 - p).max(1e-12).ln() };
                        let g = lr * (label - p);
                        for c in 0..d {
                            grad[c] += g * self.output.get(ti + c);
                            self.output.add(ti + c, g * self.input.get(ci + c));
                        }
                    }
                    for c in 0..d {
                        self.input.add(ci + c, grad[c]);
                    }
                    pairs += 1;
                }
            }
        }
        (loss, pairs)
    }
}

/// Train a DeepWalk embedding. Isolated nodes keep the zero vector.
pub fn deepwalk_embed(g: &Graph, cfg: &EmbedConfig, seed: u64) -> Result<Embedding> {
    cfg.validate()?;
    let n = g.node_count();
    let d = cfg.dims;
    let corpus = random_walks(g, cfg.walks_per_node, cfg.walk_length, rng::derive(seed, 70));
    let noise = NoiseTable::new(n, &corpus);

    let mut init = rng::stream(seed, 71);
    let mut input: Vec<f64> = (0..n * d).map(|_| (init.random::<f64>() - 0.5) / d as f64).collect();
    for i in 0..n {
        if g.degree(i) == 0 {
            input[i * d..(i + 1) * d].iter_mut().for_each(|x| *x = 0.0);
        }
    }
    let output = vec![0.0f64; n * d];

    let total = (corpus.len() * cfg.epochs).max(1);
    let lr0 = cfg.learning_rate;
    let mut epoch_loss = Vec::with_capacity(cfg.epochs);
    let racy = cfg.racy_parallel && par::parallel_enabled();

    let vectors: Vec<f64> = if racy {
        let input = Atomic(input.into_iter().map(|x| AtomicU64::new(x.to_bits())).collect());
        let output = Atomic(output.into_iter().map(|x| AtomicU64::new(x.to_bits())).collect());
        let trainer = Trainer { input: &input, output: &output, dims: d, window: cfg.window, negatives: cfg.negatives, noise: &noise };
        const CHUNK: usize = 256;
        let chunks = corpus.len().div_ceil(CHUNK);
        for epoch in 0..cfg.epochs {
            let base = epoch * corpus.len();
            let lr_at = |step: usize| lr0 * (1.0 - step as f64 / total as f64).max(1e-4);
            let parts = par::map_range(chunks, |c| {
                let lo = c * CHUNK;
                let hi = (lo + CHUNK).min(corpus.len());
                let mut r = rng::stream(rng::derive(seed, 72 + epoch as u64), c as u64);
                trainer.pass(&corpus[lo..hi], &mut r, &lr_at, base + lo)
            });
            let (l, p) = parts.iter().fold((0.0, 0), |(a, b), &(l, p)| (a + l, b + p));
            epoch_loss.push(if p > 0 { l / p as f64 } else { 0.0 });
        }
        input.0.into_iter().map(|a| f64::from_bits(a.into_inner())).collect()
    } else {
        let input = Plain(input.into_iter().map(Cell::new).collect());
        let output = Plain(output.into_iter().map(Cell::new).collect());
        let trainer = Trainer { input: &input, output: &output, dims: d, window: cfg.window, negatives: cfg.negatives, noise: &noise };
        let mut r = rng::stream(seed, 72);
        for epoch in 0..cfg.epochs {
            let base = epoch * corpus.len();
            let lr_at = |step: usize| lr0 * (1.0 - step as f64 / total as f64).max(1e-4);
            let (l, p) = trainer.pass(&corpus, &mut r, &lr_at, base);
            epoch_loss.push(if p > 0 { l / p as f64 } else { 0.0 });
        }
        input.0.into_iter().map(Cell::into_inner).collect()
    };

    if let Some(k) = vectors.iter().position(|x: &f64| !x.is_finite()) {
        return Err(Error::NonFinite { row: k / d, column: k % d });
    }
    Ok(Embedding {
        n,
        dims: d,
        vectors,
        config: cfg.clone(),
        seed,
        epoch_loss,
        nondeterministic: racy,
    })
}

pub fn column_ids(dims: usize) -> Vec<String> {
    let mut ids: Vec<String> = (0..dims).map(|c| format!("EMB-H{c}")).collect();
    ids.extend(["EMB-DOT", "EMB-SIG", "EMB-NDIST"].map(String::from));
    ids
}

/// `d` Hadamard products, the dot product, its sigmoid, and the negated
/// Euclidean distance.
pub fn pair_embed_features(e: &Embedding, pairs: &[Pair]) -> Result<PairFeatureTable> {
    let d = e.dims;
    let width = d + 3;
    let mut values = vec![0.0; pairs.len() * width];
    const ROWS_PER_CHUNK: usize = 1024;
    par::fill_chunks(&mut values, ROWS_PER_CHUNK * width, |offset, slice| {
        let first = offset / width;
        for (r, row) in slice.chunks_mut(width).enumerate() {
            let (i, j) = pairs[first + r];
            let (u, v) = (e.vector(i), e.vector(j));
            let mut dist2 = 0.0;
            let mut dp = 0.0;
            for c in 0..d {
                row[c] = u[c] * v[c];
                dp += row[c];
                dist2 += (u[c] - v[c]) * (u[c] - v[c]);
            }
            row[d] = dp;
            row[d + 1] = sigmoid(dp);
            row[d + 2] = -dist2.sqrt();
        }
    });
    let columns = column_ids(d).into_iter().map(|id| Column::new(id, Family::Embedding)).collect();
    PairFeatureTable::new(pairs.to_vec(), columns, values)
}

/// Embed `g` and tabulate `pairs`.
pub fn embedding_table(g: &Graph, pairs: &[Pair], cfg: &EmbedConfig, seed: u64) -> Result<PairFeatureTable> {
    pair_embed_features(&deepwalk_embed(g, cfg, seed)?, pairs)
}
