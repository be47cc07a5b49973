//! Newman-Girvan modularity: greedy agglomeration followed by one pass of
//! node-level moves, and the "add this edge" score.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use super::partition::Partition;
use crate::graph::{Graph, Pair};
use crate::rng;

/// Greedy agglomerative maximization (merge the pair with the largest
/// positive gain until none remains), then one seeded sweep of single-node
/// moves that only accepts strict improvements.
pub fn fit_modularity(g: &Graph, seed: u64) -> Partition {
    let n = g.node_count();
    let m = g.edge_count() as f64;
    if m == 0.0 {
        return Partition::single_block(g);
    }
    // Community-level adjacency: links[r][s] = edges between r and s.
    let mut links: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
    for &(i, j) in g.edges() {
        *links[i].entry(j).or_default() += 1.0;
        *links[j].entry(i).or_default() += 1.0;
    }
    let mut degree: Vec<f64> = g.degrees().into_iter().map(|d| d as f64).collect();
    let mut alive: Vec<bool> = vec![true; n];
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();

    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for r in 0..n {
            if !alive[r] {
                continue;
            }
            for (&s, &e) in links[r].range(r + 1..) {
                let gain = e / m - degree[r] * degree[s] / (2.0 * m * m);
                if gain > 1e-12 && best.is_none_or(|(b, _, _)| gain > b) {
                    best = Some((gain, r, s));
                }
            }
        }
        let Some((_, r, s)) = best else { break };
        // merge s into r
        let moved = std::mem::take(&mut links[s]);
        for (t, e) in moved {
            if t == r {
                continue;
            }
            *links[r].entry(t).or_default() += e;
            let back = links[t].remove(&s).unwrap_or(0.0);
            *links[t].entry(r).or_default() += back;
        }
        links[r].remove(&s);
        degree[r] += degree[s];
        degree[s] = 0.0;
        alive[s] = false;
        let ms = std::mem::take(&mut members[s]);
        members[r].extend(ms);
    }

    let mut label = vec![0usize; n];
    for (c, mem) in members.iter().enumerate() {
        for &i in mem {
            label[i] = c;
        }
    }
    local_pass(g, &mut label, &mut degree, seed);
    Partition::from_assignment(g, &label).expect("label count matches")
}

fn local_pass(g: &Graph, label: &mut [usize], comm_degree: &mut [f64], seed: u64) {
    let m = g.edge_count() as f64;
    let mut order: Vec<usize> = (0..g.node_count()).collect();
    order.shuffle(&mut rng::stream(seed, 21));
    let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
    for v in order {
        let r = label[v];
        let dv = g.degree(v) as f64;
        if dv == 0.0 {
            continue;
        }
        counts.clear();
        for &z in g.neighbors(v) {
            *counts.entry(label[z]).or_default() += 1.0;
        }
        let k_in_r = counts.get(&r).copied().unwrap_or(0.0);
        let d_r_without = comm_degree[r] - dv;
        let mut best = (1e-12, r);
        for (&s, &k_in_s) in &counts {
            if s == r {
                continue;
            }
            let gain =
                (k_in_s - k_in_r) / m - dv * (comm_degree[s] - d_r_without) / (2.0 * m * m);
            if gain > best.0 {
                best = (gain, s);
            }
        }
        if best.1 != r {
            comm_degree[r] -= dv;
            comm_degree[best.1] += dv;
            label[v] = best.1;
        }
    }
}

/// Change in modularity from inserting edge `(i, j)`, partition held fixed.
pub fn score_modularity(p: &Partition, pairs: &[Pair]) -> Vec<f64> {
    let k = p.k();
    let m: f64 = (0..k)
        .map(|r| p.edges_between(r, r) + (r + 1..k).map(|s| p.edges_between(r, s)).sum::<u64>())
        .sum::<u64>() as f64;
    let within: f64 = (0..k).map(|r| p.edges_between(r, r) as f64).sum();
    let deg_sq: f64 = (0..k).map(|r| (p.degree_sum(r) as f64).powi(2)).sum();
    let q_before = if m > 0.0 {
        within / m - deg_sq / (4.0 * m * m)
    } else {
        0.0
    };
    let m1 = m + 1.0;
    pairs
        .iter()
        .map(|&(i, j)| {
            let (r, s) = (p.block_of(i), p.block_of(j));
            let (dr, ds) = (p.degree_sum(r) as f64, p.degree_sum(s) as f64);
            let (w, d2) = if r == s {
                (within + 1.0, deg_sq + 4.0 * dr + 4.0)
            } else {
                (within, deg_sq + 2.0 * dr + 2.0 * ds + 2.0)
            };
            w / m1 - d2 / (4.0 * m1 * m1) - q_before
        })
        .collect()
}
