//! The 42 topological predictor columns.
//!
//! Column order: 8 global values broadcast to every row, 14 pairwise scores,
//! then 10 node measures for each endpoint (`-i`, `-j`) with `i < j`.

use serde::{Deserialize, Serialize};

use super::centrality::{self, PathStats, UNREACHABLE};
use super::lowrank::{default_rank, LowRank};
use super::table::{Column, Family, PairFeatureTable};
use crate::error::Result;
use crate::graph::{canonical, Graph, Pair};
use crate::par;

pub const GLOBAL_IDS: [&str; 8] = ["N", "OE", "AD", "VD", "ND", "DA", "NT", "ACC"];
pub const PAIRWISE_IDS: [&str; 14] = [
    "CN",
    "SP",
    "LHN",
    "PPR",
    "PA",
    "JC",
    "AA",
    "RA",
    "LRA",
    "dLRA",
    "mLRA",
    "LRA-approx",
    "dLRA-approx",
    "mLRA-approx",
];
pub const NODE_IDS: [&str; 10] = ["LCC", "AND", "SPBC", "CC", "DC", "EC", "KC", "LNT", "PR", "LC"];

pub fn column_ids() -> Vec<String> {
    let mut ids: Vec<String> = GLOBAL_IDS.iter().map(|s| s.to_string()).collect();
    ids.extend(PAIRWISE_IDS.iter().map(|s| s.to_string()));
    for id in NODE_IDS {
        ids.push(format!("{id}-i"));
        ids.push(format!("{id}-j"));
    }
    ids
}

pub fn columns() -> Vec<Column> {
    column_ids()
        .into_iter()
        .map(|id| Column::new(id, Family::Topological))
        .collect()
}

/// Numerical settings for the iterative measures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopoConfig {
    pub ppr_restart: f64,
    pub ppr_tol: f64,
    pub ppr_max_iter: usize,
    pub pagerank_damping: f64,
    pub katz_attenuation: f64,
    pub katz_tol: f64,
    pub eigen_tol: f64,
    pub eigen_max_iter: usize,
    /// `None` means `min(32, n - 1)`.
    pub lra_rank: Option<usize>,
    pub lra_power_steps: usize,
    pub lra_oversample: usize,
}

impl Default for TopoConfig {
    fn default() -> Self {
        TopoConfig {
            ppr_restart: 0.15,
            ppr_tol: 1e-8,
            ppr_max_iter: 200,
            pagerank_damping: 0.85,
            katz_attenuation: 0.9,
            katz_tol: 1e-8,
            eigen_tol: 1e-8,
            eigen_max_iter: 1000,
            lra_rank: None,
            lra_power_steps: 2,
            lra_oversample: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlobalFeatures {
    pub nodes: f64,
    pub edges: f64,
    pub average_degree: f64,
    pub degree_variance: f64,
    pub diameter: f64,
    pub assortativity: f64,
    pub transitivity: f64,
    pub average_clustering: f64,
}

impl GlobalFeatures {
    pub fn as_array(&self) -> [f64; 8] {
        [
            self.nodes,
            self.edges,
            self.average_degree,
            self.degree_variance,
            self.diameter,
            self.assortativity,
            self.transitivity,
            self.average_clustering,
        ]
    }
}

fn local_clustering(g: &Graph, tri: &[usize]) -> Vec<f64> {
    (0..g.node_count())
        .map(|i| {
            let d = g.degree(i);
            if d < 2 {
                0.0
            } else {
                2.0 * tri[i] as f64 / (d * (d - 1)) as f64
            }
        })
        .collect()
}

fn assortativity(g: &Graph) -> f64 {
    let m = g.edge_count();
    if m == 0 {
        return 0.0;
    }
    // Pearson correlation over both orientations of every edge.
    let (mut sx, mut sxx, mut sxy) = (0.0, 0.0, 0.0);
    for &(i, j) in g.edges() {
        let (a, b) = (g.degree(i) as f64, g.degree(j) as f64);
        sx += a + b;
        sxx += a * a + b * b;
        sxy += 2.0 * a * b;
    }
    let k = 2.0 * m as f64;
    let mean = sx / k;
    let var = sxx / k - mean * mean;
    if var <= 1e-12 * mean.max(1.0).powi(2) {
        return 0.0;
    }
    (sxy / k - mean * mean) / var
}

fn diameter_of_largest_component(g: &Graph, paths: &PathStats) -> f64 {
    let n = g.node_count();
    let (comp, count) = g.components();
    let mut sizes = vec![0usize; count];
    for &c in &comp {
        sizes[c] += 1;
    }
    let largest = (0..count)
        .max_by(|&a, &b| sizes[a].cmp(&sizes[b]).then(b.cmp(&a)))
        .unwrap_or(0);
    let mut best = 0u32;
    for i in (0..n).filter(|&i| comp[i] == largest) {
        for j in (0..n).filter(|&j| comp[j] == largest) {
            let d = paths.distance(n, i, j);
            if d != UNREACHABLE {
                best = best.max(d);
            }
        }
    }
    best as f64
}

fn global_from_parts(g: &Graph, tri: &[usize], lcc: &[f64], paths: &PathStats) -> GlobalFeatures {
    let n = g.node_count();
    let m = g.edge_count();
    let degrees = g.degrees();
    let mean = if n > 0 { 2.0 * m as f64 / n as f64 } else { 0.0 };
    let variance = if n > 1 {
        degrees
            .iter()
            .map(|&d| (d as f64 - mean).powi(2))
            .sum::<f64>()
            / n as f64
    } else {
        0.0
    };
    let closed: usize = tri.iter().sum();
    let triples: usize = degrees.iter().map(|&d| d * d.saturating_sub(1) / 2).sum();
    let transitivity = if triples == 0 {
        0.0
    } else {
        closed as f64 / triples as f64
    };
    GlobalFeatures {
        nodes: n as f64,
        edges: m as f64,
        average_degree: mean,
        degree_variance: variance,
        diameter: diameter_of_largest_component(g, paths),
        assortativity: assortativity(g),
        transitivity,
        average_clustering: if n > 0 {
            lcc.iter().sum::<f64>() / n as f64
        } else {
            0.0
        },
    }
}

pub fn global_features(g: &Graph) -> GlobalFeatures {
    let tri = centrality::triangles(g);
    let lcc = local_clustering(g, &tri);
    let paths = centrality::path_stats(g);
    global_from_parts(g, &tri, &lcc, &paths)
}

/// Everything the row kernel needs, computed once per graph.
pub struct TopoContext<'g> {
    g: &'g Graph,
    global: [f64; 8],
    paths: PathStats,
    ppr: Vec<f64>,
    exact: LowRank,
    approx: LowRank,
    /// Row-major n x 10 node measures in `NODE_IDS` order.
    node: Vec<f64>,
}

impl<'g> TopoContext<'g> {
    pub fn new(g: &'g Graph, cfg: &TopoConfig, seed: u64) -> Result<Self> {
        let n = g.node_count();
        let tri = centrality::triangles(g);
        let lcc = local_clustering(g, &tri);
        let paths = centrality::path_stats(g);
        let global = global_from_parts(g, &tri, &lcc, &paths).as_array();
        let ev = centrality::eigenvector_centrality(g, cfg.eigen_tol, cfg.eigen_max_iter);
        let katz = centrality::katz_centrality(g, ev.lambda_max, cfg.katz_attenuation, cfg.katz_tol);
        let pr = centrality::pagerank(g, cfg.pagerank_damping, cfg.ppr_tol, cfg.ppr_max_iter);
        let ppr = centrality::personalized_pagerank(g, cfg.ppr_restart, cfg.ppr_tol, cfg.ppr_max_iter);
        let rank = cfg.lra_rank.unwrap_or_else(|| default_rank(n)).min(n).max(1);
        let exact = LowRank::exact(g, rank)?;
        let approx = LowRank::approximate(g, rank, cfg.lra_power_steps, cfg.lra_oversample, seed)?;

        let mut node = vec![0.0; n * NODE_IDS.len()];
        for i in 0..n {
            let d = g.degree(i);
            let and = if d == 0 {
                0.0
            } else {
                g.neighbors(i).iter().map(|&z| g.degree(z) as f64).sum::<f64>() / d as f64
            };
            let dc = if n > 1 { d as f64 / (n - 1) as f64 } else { 0.0 };
            let row = [
                lcc[i],
                and,
                paths.betweenness[i],
                paths.closeness[i],
                dc,
                ev.vector[i],
                katz[i],
                tri[i] as f64,
                pr[i],
                paths.load[i],
            ];
            node[i * NODE_IDS.len()..(i + 1) * NODE_IDS.len()].copy_from_slice(&row);
        }
        Ok(TopoContext {
            g,
            global,
            paths,
            ppr,
            exact,
            approx,
            node,
        })
    }

    pub fn global(&self) -> [f64; 8] {
        self.global
    }

    /// Hop distance, with disconnected pairs mapped to `n`.
    pub fn hops(&self, i: usize, j: usize) -> f64 {
        let n = self.g.node_count();
        match self.paths.distance(n, i, j) {
            UNREACHABLE => n as f64,
            d => d as f64,
        }
    }

    /// Personalized PageRank averaged over both orientations.
    pub fn ppr(&self, i: usize, j: usize) -> f64 {
        let n = self.g.node_count();
        0.5 * (self.ppr[i * n + j] + self.ppr[j * n + i])
    }

    fn fill_row(&self, pair: Pair, out: &mut [f64]) {
        let g = self.g;
        let (i, j) = canonical(pair.0, pair.1);
        out[..8].copy_from_slice(&self.global);

        let (di, dj) = (g.degree(i), g.degree(j));
        let (mut cn, mut aa, mut ra) = (0usize, 0.0, 0.0);
        g.for_each_common_neighbor(i, j, |z| {
            let dz = g.degree(z) as f64;
            cn += 1;
            aa += 1.0 / dz.ln();
            ra += 1.0 / dz;
        });
        let union = di + dj - cn;
        let p = &mut out[8..22];
        p[0] = cn as f64;
        p[1] = -self.hops(i, j);
        p[2] = if di * dj == 0 {
            0.0
        } else {
            cn as f64 / (di * dj) as f64
        };
        p[3] = self.ppr(i, j);
        p[4] = (di * dj) as f64;
        p[5] = if union == 0 {
            0.0
        } else {
            cn as f64 / union as f64
        };
        p[6] = aa;
        p[7] = ra;
        p[8] = self.exact.entry(i, j);
        p[9] = self.exact.column_dot(i, j);
        p[10] = self.exact.neighbor_mean(i, j);
        p[11] = self.approx.entry(i, j);
        p[12] = self.approx.column_dot(i, j);
        p[13] = self.approx.neighbor_mean(i, j);

        let k = NODE_IDS.len();
        let (ni, nj) = (&self.node[i * k..(i + 1) * k], &self.node[j * k..(j + 1) * k]);
        for m in 0..k {
            out[22 + 2 * m] = ni[m];
            out[22 + 2 * m + 1] = nj[m];
        }
    }

    pub fn table(&self, pairs: &[Pair]) -> Result<PairFeatureTable> {
        let width = 42;
        let mut values = vec![0.0; pairs.len() * width];
        const ROWS_PER_CHUNK: usize = 1024;
        par::fill_chunks(&mut values, ROWS_PER_CHUNK * width, |offset, slice| {
            let first = offset / width;
            for (r, row) in slice.chunks_mut(width).enumerate() {
                self.fill_row(pairs[first + r], row);
            }
        });
        PairFeatureTable::new(pairs.to_vec(), columns(), values)
    }
}

/// Convenience wrapper: build the context and tabulate `pairs`.
pub fn topological_table(
    g: &Graph,
    pairs: &[Pair],
    cfg: &TopoConfig,
    seed: u64,
) -> Result<PairFeatureTable> {
    TopoContext::new(g, cfg, seed)?.table(pairs)
}

/// The 14 pairwise columns only.
pub fn pairwise_scores(g: &Graph, pairs: &[Pair], cfg: &TopoConfig, seed: u64) -> Result<PairFeatureTable> {
    let idx: Vec<usize> = (8..22).collect();
    Ok(topological_table(g, pairs, cfg, seed)?.select(&idx))
}

/// The 20 endpoint columns only.
pub fn node_features(g: &Graph, pairs: &[Pair], cfg: &TopoConfig, seed: u64) -> Result<PairFeatureTable> {
    let idx: Vec<usize> = (22..42).collect();
    Ok(topological_table(g, pairs, cfg, seed)?.select(&idx))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table_for(g: &Graph, pairs: &[Pair]) -> PairFeatureTable {
        topological_table(g, pairs, &TopoConfig::default(), 1).unwrap()
    }

    fn val(t: &PairFeatureTable, row: usize, id: &str) -> f64 {
        t.get(row, t.column_index(id).unwrap())
    }

    #[test]
    fn forty_two_unique_columns() {
        let ids = column_ids();
        assert_eq!(ids.len(), 42);
        let mut s = ids.clone();
        s.sort();
        s.dedup();
        assert_eq!(s.len(), 42);
    }

    #[test]
    fn triangle_globals() {
        let k3 = Graph::from_edges(3, [(0, 1), (1, 2), (0, 2)]).unwrap();
        let gf = global_features(&k3);
        assert_eq!(gf.nodes, 3.0);
        assert_eq!(gf.edges, 3.0);
        assert_eq!(gf.average_degree, 2.0);
        assert_eq!(gf.degree_variance, 0.0);
        assert_eq!(gf.diameter, 1.0);
        assert_eq!(gf.assortativity, 0.0);
        assert_eq!(gf.transitivity, 1.0);
        assert_eq!(gf.average_clustering, 1.0);
    }

    #[test]
    fn path_globals() {
        let p = Graph::from_edges(3, [(0, 1), (1, 2)]).unwrap();
        let gf = global_features(&p);
        assert!((gf.average_degree - 4.0 / 3.0).abs() < 1e-12);
        assert_eq!(gf.diameter, 2.0);
        assert_eq!(gf.transitivity, 0.0);
        assert_eq!(gf.average_clustering, 0.0);
    }

    #[test]
    fn regular_graph_assortativity_zero_and_disconnected_diameter() {
        let c5 = Graph::from_edges(5, (0..5).map(|i| (i, (i + 1) % 5))).unwrap();
        assert_eq!(global_features(&c5).assortativity, 0.0);
        let g = Graph::from_edges(7, [(0, 1), (1, 2), (2, 3), (4, 5)]).unwrap();
        assert_eq!(global_features(&g).diameter, 3.0);
        let single = Graph::from_edges(1, []).unwrap();
        let gf = global_features(&single);
        assert_eq!((gf.degree_variance, gf.diameter), (0.0, 0.0));
    }

    #[test]
    fn path_pair_scores() {
        let p = Graph::from_edges(3, [(0, 1), (1, 2)]).unwrap();
        let t = table_for(&p, &[(0, 2)]);
        assert_eq!(val(&t, 0, "CN"), 1.0);
        assert_eq!(val(&t, 0, "JC"), 1.0);
        assert!((val(&t, 0, "AA") - 1.0 / 2f64.ln()).abs() < 1e-12);
        assert_eq!(val(&t, 0, "RA"), 0.5);
        assert_eq!(val(&t, 0, "PA"), 1.0);
        assert_eq!(val(&t, 0, "LHN"), 1.0);
        assert_eq!(val(&t, 0, "SP"), -2.0);
    }

    #[test]
    fn disconnected_pair() {
        let g = Graph::from_edges(4, [(0, 1), (2, 3)]).unwrap();
        let t = table_for(&g, &[(0, 2)]);
        assert_eq!(val(&t, 0, "CN"), 0.0);
        assert_eq!(val(&t, 0, "JC"), 0.0);
        assert_eq!(val(&t, 0, "SP"), -4.0);
    }

    #[test]
    fn node_measures_on_small_graphs() {
        let p = Graph::from_edges(3, [(0, 1), (1, 2)]).unwrap();
        let t = table_for(&p, &[(0, 1)]);
        assert_eq!(val(&t, 0, "SPBC-i"), 0.0);
        assert_eq!(val(&t, 0, "SPBC-j"), 1.0);
        let star = Graph::from_edges(5, (1..5).map(|i| (0, i))).unwrap();
        let t = table_for(&star, &[(0, 3)]);
        assert_eq!(val(&t, 0, "DC-i"), 1.0);
        assert_eq!(val(&t, 0, "DC-j"), 0.25);
        let c4 = Graph::from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        let t = table_for(&c4, &[(0, 2), (1, 3)]);
        for r in 0..2 {
            assert!((val(&t, r, "EC-i") - 0.5).abs() < 1e-9);
            assert!((val(&t, r, "EC-j") - 0.5).abs() < 1e-9);
        }
    }

    #[test]
    fn split_views_match_full_table() {
        let g = Graph::from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4), (1, 3)]).unwrap();
        let pairs: Vec<_> = g.non_edges().collect();
        let cfg = TopoConfig::default();
        let full = topological_table(&g, &pairs, &cfg, 1).unwrap();
        let pw = pairwise_scores(&g, &pairs, &cfg, 1).unwrap();
        let nf = node_features(&g, &pairs, &cfg, 1).unwrap();
        assert_eq!(pw.cols(), 14);
        assert_eq!(nf.cols(), 20);
        assert_eq!(pw.column_by_id("JC"), full.column_by_id("JC"));
        assert_eq!(nf.column_by_id("PR-j"), full.column_by_id("PR-j"));
    }
}

