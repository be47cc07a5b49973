//! Stochastic block models fitted by minimum description length.
//!
//! The description length (in nats internally, bits at the API) is the
//! microcanonical entropy of the graph given block edge counts, plus
//! uniform priors on the edge-count matrix, the partition, and (for the
//! degree-corrected variant) the within-block degree sequences:
//!
//! * SBM: `sum_{r<s} ln C(n_r n_s, m_rs) + sum_r ln C(C(n_r, 2), m_rr)`
//! * DC-SBM: `sum_r ln e_r! - sum_{r<s} ln m_rs! - sum_r ln (2 m_rr)!! - sum_i ln d_i!`
//!   plus, for the degrees, `sum_r [ln n_r! - sum_d ln eta_rd! + ln q(e_r, n_r)]`
//!   where `eta_rd` counts nodes of degree `d` in block `r` and `q(e, n)`
//!   counts partitions of `e` into at most `n` parts
//! * shared: `ln n + ln C(n-1, k-1) + ln n! - sum_r ln n_r!` for the
//!   partition; for the edge counts (k > 1), `ln (m + 1)` for the number
//!   `e_in` of within-block edges, then `ln multiset(k, e_in)` and
//!   `ln multiset(k(k-1)/2, m - e_in)`.
//!
//! Fitting is multi-start. Each start sweeps single-node moves until none
//! improves, then agglomerates blocks level by level (each level followed
//! by more sweeps) down to one block. One start is a seeded random
//! assignment into `k_max` blocks, the other the spectral partition. The
//! level with the smallest description length over all starts wins.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use std::sync::OnceLock;

use super::partition::Partition;
use super::spectral::BetheSpectrum;
use crate::graph::{Graph, Pair};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SbmVariant {
    #[serde(rename = "sbm")]
    Sbm,
    #[serde(rename = "dcsbm")]
    DcSbm,
}

const LN2: f64 = std::f64::consts::LN_2;
const IMPROVEMENT: f64 = 1e-9;
const MAX_SWEEPS: usize = 30;
const MERGE_RATIO: f64 = 1.3;
/// Up to this many blocks, sweeps try every block for every node.
const FULL_SCAN: usize = 48;

/// `ln x!`, tabulated for small arguments.
struct LnFact {
    table: Vec<f64>,
}

impl LnFact {
    fn new(max: usize) -> Self {
        let len = (max + 1).min(1 << 21);
        let mut table = Vec::with_capacity(len);
        let mut acc = 0.0;
        table.push(0.0);
        for x in 1..len {
            acc += (x as f64).ln();
            table.push(acc);
        }
        LnFact { table }
    }

    #[inline]
    fn get(&self, x: u64) -> f64 {
        match self.table.get(x as usize) {
            Some(&v) => v,
            None => libm::lgamma(x as f64 + 1.0),
        }
    }

    #[inline]
    fn binom(&self, n: u64, k: u64) -> f64 {
        debug_assert!(k <= n, "C({n}, {k})");
        self.get(n) - self.get(k) - self.get(n - k)
    }
}

const Q_EXACT: usize = 1000;

fn q_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let w = Q_EXACT + 1;
        let mut table = vec![f64::NEG_INFINITY; w * w];
        // cur[m] = q(m, n) for the current n
        let mut cur = vec![0.0f64; w];
        cur[0] = 1.0;
        table[0] = 0.0;
        for n in 1..w {
            for m in n..w {
                cur[m] += cur[m - n];
            }
            for m in 0..w {
                table[m * w + n] = cur[m].ln();
            }
        }
        table
    })
}

/// `ln q(m, n)`: log of the number of partitions of `m` into at most `n`
/// parts. Exact for `m <= 1000`, asymptotic beyond.
fn ln_q(lf: &LnFact, m: u64, n: u64) -> f64 {
    if m == 0 || n == 0 {
        return 0.0;
    }
    let n = n.min(m);
    if m as usize <= Q_EXACT {
        return q_table()[m as usize * (Q_EXACT + 1) + n as usize];
    }
    let (mf, nf) = (m as f64, n as f64);
    if nf < mf.powf(0.25) {
        return lf.binom(m - 1, n - 1) - lf.get(n);
    }
    let c = std::f64::consts::PI * (2.0f64 / 3.0).sqrt();
    let mut s = c * mf.sqrt() - (4.0 * 3f64.sqrt() * mf).ln();
    if n < m {
        let x = nf / mf.sqrt() - mf.ln() / c;
        s -= (2.0 / c) * (-c * x / 2.0).exp();
    }
    s
}

/// Largest block count searched: `min(n/4, 4 sqrt(n))`, at least 1.
pub fn max_blocks(n: usize) -> usize {
    let by_sqrt = (4.0 * (n as f64).sqrt()).floor() as usize;
    (n / 4).min(by_sqrt).max(1)
}

struct BlockState<'g> {
    g: &'g Graph,
    variant: SbmVariant,
    lf: LnFact,
    cap: usize,
    label: Vec<usize>,
    size: Vec<u64>,
    deg: Vec<u64>,
    edges: Vec<u64>,
    k: usize,
    // edges inside blocks
    e_in: u64,
    constant: f64,
    scratch: Vec<u64>,
    touched: Vec<usize>,
    // per-block histogram over distinct degrees (DC only), cap x distinct
    deg_idx: Vec<usize>,
    distinct: usize,
    hist: Vec<u64>,
}

impl<'g> BlockState<'g> {
    fn new(g: &'g Graph, variant: SbmVariant, labels: &[usize], cap: usize) -> Self {
        let n = g.node_count();
        let m = g.edge_count();
        let lf = LnFact::new(n * n / 2 + 2 * m + n + cap * cap + 4);
        let constant = match variant {
            SbmVariant::Sbm => 0.0,
            SbmVariant::DcSbm => -(0..n).map(|i| lf.get(g.degree(i) as u64)).sum::<f64>(),
        };
        let (deg_idx, distinct) = match variant {
            SbmVariant::Sbm => (vec![0; n], 0),
            SbmVariant::DcSbm => {
                let mut ds: Vec<usize> = g.degrees();
                ds.sort_unstable();
                ds.dedup();
                ((0..n).map(|i| ds.binary_search(&g.degree(i)).unwrap()).collect(), ds.len())
            }
        };
        let mut s = BlockState {
            g,
            variant,
            lf,
            cap,
            label: labels.to_vec(),
            size: vec![0; cap],
            deg: vec![0; cap],
            edges: vec![0; cap * cap],
            k: 0,
            e_in: 0,
            constant,
            scratch: vec![0; cap],
            touched: Vec::new(),
            hist: vec![0; cap * distinct],
            deg_idx,
            distinct,
        };
        for (i, &b) in labels.iter().enumerate() {
            s.size[b] += 1;
            s.deg[b] += g.degree(i) as u64;
            if distinct > 0 {
                s.hist[b * distinct + s.deg_idx[i]] += 1;
            }
        }
        for &(i, j) in g.edges() {
            let (r, t) = (labels[i], labels[j]);
            if r == t {
                s.edges[r * cap + r] += 1;
            } else {
                s.edges[r * cap + t] += 1;
                s.edges[t * cap + r] += 1;
            }
        }
        s.k = s.size.iter().filter(|&&x| x > 0).count();
        s.e_in = (0..cap).map(|r| s.e(r, r)).sum();
        s
    }

    #[inline]
    fn e(&self, r: usize, t: usize) -> u64 {
        self.edges[r * self.cap + t]
    }

    #[inline]
    fn pair_term(&self, na: u64, nb: u64, mab: u64) -> f64 {
        match self.variant {
            SbmVariant::Sbm => self.lf.binom(na * nb, mab),
            SbmVariant::DcSbm => -self.lf.get(mab),
        }
    }

    #[inline]
    fn within_term(&self, na: u64, maa: u64) -> f64 {
        match self.variant {
            SbmVariant::Sbm => self.lf.binom(na * na.saturating_sub(1) / 2, maa),
            SbmVariant::DcSbm => -(maa as f64 * LN2 + self.lf.get(maa)),
        }
    }

    #[inline]
    fn block_term(&self, na: u64, ea: u64) -> f64 {
        let partition = -self.lf.get(na);
        match self.variant {
            SbmVariant::Sbm => partition,
            // the ln n_r! of the degree prior cancels the partition's
            SbmVariant::DcSbm => self.lf.get(ea) + ln_q(&self.lf, ea, na),
        }
    }

    /// Partition prior plus the edge-count prior: the split of `m` into
    /// within- and between-block edges, then each part spread uniformly
    /// over its cells.
    fn global_term(&self, k: usize, e_in: u64) -> f64 {
        let n = self.g.node_count() as u64;
        let m = self.g.edge_count() as u64;
        let k = k.max(1) as u64;
        let edges = if k == 1 {
            0.0
        } else {
            let e_out = m - e_in;
            let off = k * (k - 1) / 2;
            ((m + 1) as f64).ln() + self.lf.binom(k + e_in - 1, e_in) + self.lf.binom(off + e_out - 1, e_out)
        };
        (n as f64).ln() + self.lf.binom(n - 1, k - 1) + self.lf.get(n) + edges + self.constant
    }

    fn hist_term(&self, r: usize) -> f64 {
        let d = self.distinct;
        -self.hist[r * d..(r + 1) * d].iter().map(|&h| self.lf.get(h)).sum::<f64>()
    }

    fn total(&self) -> f64 {
        let mut dl = self.global_term(self.k, self.e_in);
        for r in 0..self.cap {
            if self.distinct > 0 {
                dl += self.hist_term(r);
            }
        }
        for r in 0..self.cap {
            if self.size[r] == 0 {
                continue;
            }
            dl += self.block_term(self.size[r], self.deg[r]);
            dl += self.within_term(self.size[r], self.e(r, r));
            for t in r + 1..self.cap {
                if self.size[t] > 0 {
                    dl += self.pair_term(self.size[r], self.size[t], self.e(r, t));
                }
            }
        }
        dl
    }

    fn count_neighbors(&mut self, v: usize) {
        for &t in &self.touched {
            self.scratch[t] = 0;
        }
        self.touched.clear();
        for &z in self.g.neighbors(v) {
            let t = self.label[z];
            if self.scratch[t] == 0 {
                self.touched.push(t);
            }
            self.scratch[t] += 1;
        }
    }

    /// DL change of moving `v` to block `s`; `count_neighbors(v)` must be current.
    fn move_delta(&self, v: usize, s: usize) -> f64 {
        let r = self.label[v];
        if r == s {
            return 0.0;
        }
        let dv = self.g.degree(v) as u64;
        let c = &self.scratch;
        let (nr, ns) = (self.size[r], self.size[s]);
        let (nr2, ns2) = (nr - 1, ns + 1);
        let mut delta = 0.0;

        delta -= self.block_term(nr, self.deg[r]) + self.block_term(ns, self.deg[s]);
        delta += self.block_term(nr2, self.deg[r] - dv) + self.block_term(ns2, self.deg[s] + dv);

        let (mrr, mss, mrs) = (self.e(r, r), self.e(s, s), self.e(r, s));
        delta -= self.within_term(nr, mrr) + self.within_term(ns, mss) + self.pair_term(nr, ns, mrs);
        delta += self.within_term(nr2, mrr - c[r])
            + self.within_term(ns2, mss + c[s])
            + self.pair_term(nr2, ns2, mrs + c[r] - c[s]);

        for t in 0..self.cap {
            if t == r || t == s || self.size[t] == 0 {
                continue;
            }
            let (mrt, mst) = (self.e(r, t), self.e(s, t));
            if mrt == 0 && mst == 0 {
                continue;
            }
            let nt = self.size[t];
            delta -= self.pair_term(nr, nt, mrt) + self.pair_term(ns, nt, mst);
            delta += self.pair_term(nr2, nt, mrt - c[t]) + self.pair_term(ns2, nt, mst + c[t]);
        }

        if self.distinct > 0 {
            let t = self.deg_idx[v];
            delta += (self.hist[r * self.distinct + t] as f64).ln()
                - ((self.hist[s * self.distinct + t] + 1) as f64).ln();
        }

        let k2 = self.k - usize::from(nr == 1) + usize::from(ns == 0);
        let e_in2 = self.e_in + c[s] - c[r];
        if k2 != self.k || e_in2 != self.e_in {
            delta += self.global_term(k2, e_in2) - self.global_term(self.k, self.e_in);
        }
        delta
    }

    fn apply_move(&mut self, v: usize, s: usize) {
        let r = self.label[v];
        let dv = self.g.degree(v) as u64;
        let cap = self.cap;
        if self.size[s] == 0 {
            self.k += 1;
        }
        if self.size[r] == 1 {
            self.k -= 1;
        }
        self.size[r] -= 1;
        self.size[s] += 1;
        self.deg[r] -= dv;
        self.deg[s] += dv;
        self.e_in = self.e_in + self.scratch[s] - self.scratch[r];
        if self.distinct > 0 {
            let t = self.deg_idx[v];
            self.hist[r * self.distinct + t] -= 1;
            self.hist[s * self.distinct + t] += 1;
        }
        for idx in 0..self.touched.len() {
            let t = self.touched[idx];
            let ct = self.scratch[t];
            // edges v-t leave (r, t) and join (s, t)
            if t == r {
                self.edges[r * cap + r] -= ct;
            } else {
                self.edges[r * cap + t] -= ct;
                self.edges[t * cap + r] -= ct;
            }
            if t == s {
                self.edges[s * cap + s] += ct;
            } else {
                self.edges[s * cap + t] += ct;
                self.edges[t * cap + s] += ct;
            }
        }
        self.label[v] = s;
    }

    fn merge_delta(&self, r: usize, s: usize) -> f64 {
        let (nr, ns) = (self.size[r], self.size[s]);
        let nu = nr + ns;
        let mut delta = self.block_term(nu, self.deg[r] + self.deg[s])
            - self.block_term(nr, self.deg[r])
            - self.block_term(ns, self.deg[s]);
        let (mrr, mss, mrs) = (self.e(r, r), self.e(s, s), self.e(r, s));
        delta += self.within_term(nu, mrr + mss + mrs)
            - self.within_term(nr, mrr)
            - self.within_term(ns, mss)
            - self.pair_term(nr, ns, mrs);
        for t in 0..self.cap {
            if t == r || t == s || self.size[t] == 0 {
                continue;
            }
            let (mrt, mst) = (self.e(r, t), self.e(s, t));
            if mrt == 0 && mst == 0 {
                continue;
            }
            let nt = self.size[t];
            delta += self.pair_term(nu, nt, mrt + mst)
                - self.pair_term(nr, nt, mrt)
                - self.pair_term(ns, nt, mst);
        }
        let d = self.distinct;
        for t in 0..d {
            let (hr, hs) = (self.hist[r * d + t], self.hist[s * d + t]);
            if hr > 0 && hs > 0 {
                delta -= self.lf.get(hr + hs) - self.lf.get(hr) - self.lf.get(hs);
            }
        }
        delta + self.global_term(self.k - 1, self.e_in + mrs) - self.global_term(self.k, self.e_in)
    }

    fn apply_merge(&mut self, r: usize, s: usize) {
        let cap = self.cap;
        for l in self.label.iter_mut() {
            if *l == s {
                *l = r;
            }
        }
        let mrs = self.e(r, s);
        let mss = self.e(s, s);
        self.e_in += mrs;
        self.edges[r * cap + r] += mss + mrs;
        for t in 0..cap {
            if t == r || t == s {
                continue;
            }
            let mst = self.e(s, t);
            self.edges[r * cap + t] += mst;
            self.edges[t * cap + r] += mst;
        }
        for t in 0..cap {
            self.edges[s * cap + t] = 0;
            self.edges[t * cap + s] = 0;
        }
        let d = self.distinct;
        for t in 0..d {
            self.hist[r * d + t] += self.hist[s * d + t];
            self.hist[s * d + t] = 0;
        }
        self.size[r] += self.size[s];
        self.deg[r] += self.deg[s];
        self.size[s] = 0;
        self.deg[s] = 0;
        self.k -= 1;
    }

    /// Sweeps of greedy single-node moves. Returns the DL after each
    /// accepted move, starting with the DL before the phase.
    fn sweeps(&mut self, rng: &mut rng::Rng, max_sweeps: usize) -> Vec<f64> {
        let n = self.g.node_count();
        let mut dl = self.total();
        let mut trace = vec![dl];
        let mut order: Vec<usize> = (0..n).collect();
        let mut candidates: Vec<usize> = Vec::new();
        for _ in 0..max_sweeps {
            order.shuffle(rng);
            let mut moved = false;
            for &v in &order {
                self.count_neighbors(v);
                candidates.clear();
                if self.k <= FULL_SCAN {
                    candidates.extend((0..self.cap).filter(|&b| self.size[b] > 0));
                } else {
                    candidates.extend(self.touched.iter().copied());
                    let nonempty: Vec<usize> = (0..self.cap).filter(|&b| self.size[b] > 0).collect();
                    candidates.push(nonempty[rng.random_range(0..nonempty.len())]);
                    candidates.sort_unstable();
                    candidates.dedup();
                }
                let r = self.label[v];
                let mut best = (-IMPROVEMENT, r);
                for &s in &candidates {
                    if s == r {
                        continue;
                    }
                    let d = self.move_delta(v, s);
                    if d < best.0 {
                        best = (d, s);
                    }
                }
                if best.1 != r {
                    self.apply_move(v, best.1);
                    dl += best.0;
                    trace.push(dl);
                    moved = true;
                }
            }
            if !moved {
                break;
            }
        }
        trace
    }

    /// Merge block pairs, cheapest first, until `target` blocks remain.
    fn merge_to(&mut self, target: usize) {
        let live: Vec<usize> = (0..self.cap).filter(|&b| self.size[b] > 0).collect();
        let mut cand: Vec<(f64, usize, usize)> = Vec::new();
        for (a, &r) in live.iter().enumerate() {
            for &s in &live[a + 1..] {
                cand.push((self.merge_delta(r, s), r, s));
            }
        }
        cand.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
        let mut used = vec![false; self.cap];
        for (_, r, s) in cand {
            if self.k <= target {
                break;
            }
            if used[r] || used[s] {
                continue;
            }
            used[r] = true;
            used[s] = true;
            self.apply_merge(r, s);
        }
        // Enough disjoint pairs may not exist; fall back to pairwise merges.
        while self.k > target {
            let live: Vec<usize> = (0..self.cap).filter(|&b| self.size[b] > 0).collect();
            let mut best = (f64::INFINITY, live[0], live[1]);
            for (a, &r) in live.iter().enumerate() {
                for &s in &live[a + 1..] {
                    let d = self.merge_delta(r, s);
                    if d < best.0 {
                        best = (d, r, s);
                    }
                }
            }
            self.apply_merge(best.1, best.2);
        }
    }
}

#[derive(Debug, Clone)]
pub struct SbmFit {
    pub partition: Partition,
    /// Description length of `partition`, in bits.
    pub description_length: f64,
    /// DL (bits) after each accepted single-node move, one list per sweep phase.
    pub move_traces: Vec<Vec<f64>>,
    /// Block count and DL (bits) at each agglomeration level.
    pub levels: Vec<(usize, f64)>,
}

/// Exact description length in bits.
pub fn description_length(g: &Graph, p: &Partition, variant: SbmVariant) -> f64 {
    BlockState::new(g, variant, p.assignment(), p.k()).total() / LN2
}

/// Bits needed for the graph under a single-block model.
pub fn er_description_length(n: usize, m: usize) -> f64 {
    let lf = LnFact::new(n * n / 2 + 2);
    let pairs = (n * n.saturating_sub(1) / 2) as u64;
    (lf.binom(pairs, m as u64) + (n as f64).ln()) / LN2
}

/// Extra spectral starts beyond the estimated block count.
pub const SPECTRAL_EXTRA: usize = 2;

pub fn fit_sbm_mdl(g: &Graph, variant: SbmVariant, seed: u64) -> SbmFit {
    let spectrum = BetheSpectrum::compute(g, SPECTRAL_EXTRA);
    fit_sbm_mdl_from(g, variant, &spectral_starts(g, &spectrum, seed), seed)
}

/// Spectral partitions at the estimated block count and a few above it.
pub fn spectral_starts(g: &Graph, spectrum: &BetheSpectrum, seed: u64) -> Vec<Vec<usize>> {
    let k = spectrum.k_estimate;
    (k..=k + SPECTRAL_EXTRA)
        .filter(|&b| b <= max_blocks(g.node_count()) && (b > 1 || k == 1))
        .map(|b| spectrum.partition(g, b, rng::derive(seed, 32 + b as u64)).assignment().to_vec())
        .collect()
}

/// Multi-start fit: a random start plus one start per labeling in `starts`.
pub fn fit_sbm_mdl_from(g: &Graph, variant: SbmVariant, starts: &[Vec<usize>], seed: u64) -> SbmFit {
    let n = g.node_count();
    if g.edge_count() == 0 || n < 2 {
        let p = Partition::single_block(g);
        let dl = description_length(g, &p, variant);
        return SbmFit {
            partition: p,
            description_length: dl,
            move_traces: vec![],
            levels: vec![(1, dl)],
        };
    }
    let k_max = max_blocks(n);
    let mut r = rng::stream(seed, 31);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut r);
    let mut random = vec![0usize; n];
    for (pos, &i) in order.iter().enumerate() {
        random[i] = pos % k_max;
    }

    let mut traces = Vec::new();
    let mut best: Option<(f64, Vec<usize>, Vec<(usize, f64)>)> = None;
    for init in std::iter::once(&random).chain(starts) {
        let init = Partition::from_assignment(g, init).expect("label count matches");
        let cap = init.k().max(k_max);
        let mut state = BlockState::new(g, variant, init.assignment(), cap);
        traces.push(state.sweeps(&mut r, MAX_SWEEPS));
        let mut run_best = (state.total(), state.label.clone());
        let mut levels = vec![(state.k, run_best.0 / LN2)];
        while state.k > 1 {
            let target = ((state.k as f64 / MERGE_RATIO).floor() as usize).clamp(1, state.k - 1);
            state.merge_to(target);
            traces.push(state.sweeps(&mut r, MAX_SWEEPS));
            let dl = state.total();
            levels.push((state.k, dl / LN2));
            if dl < run_best.0 - IMPROVEMENT {
                run_best = (dl, state.label.clone());
            }
        }
        if best.as_ref().is_none_or(|b| run_best.0 < b.0 - IMPROVEMENT) {
            best = Some((run_best.0, run_best.1, levels));
        }
    }
    let (_, labels, levels) = best.expect("at least one start");
    let partition = Partition::from_assignment(g, &labels).expect("label count matches");
    SbmFit {
        description_length: description_length(g, &partition, variant),
        partition,
        move_traces: traces
            .into_iter()
            .map(|t| t.into_iter().map(|x| x / LN2).collect())
            .collect(),
        levels,
    }
}

/// Plug-in edge probabilities (SBM) or Poisson rates (DC-SBM).
pub fn score_sbm(g: &Graph, p: &Partition, variant: SbmVariant, pairs: &[Pair]) -> Vec<f64> {
    pairs
        .iter()
        .map(|&(i, j)| {
            let (r, s) = (p.block_of(i), p.block_of(j));
            match variant {
                SbmVariant::Sbm => {
                    if r == s {
                        let nr = p.size(r) as f64;
                        if nr < 2.0 {
                            0.0
                        } else {
                            p.edges_between(r, r) as f64 / (nr * (nr - 1.0) / 2.0)
                        }
                    } else {
                        p.edges_between(r, s) as f64 / (p.size(r) as f64 * p.size(s) as f64)
                    }
                }
                SbmVariant::DcSbm => dc_rate(g, p, i, j),
            }
        })
        .collect()
}

/// `(d_i / d_r) (d_j / d_s) omega_rs` with `omega_rr = 2 m_rr`, `omega_rs = m_rs`.
pub fn dc_rate(g: &Graph, p: &Partition, i: usize, j: usize) -> f64 {
    let (r, s) = (p.block_of(i), p.block_of(j));
    let (dr, ds) = (p.degree_sum(r) as f64, p.degree_sum(s) as f64);
    if dr == 0.0 || ds == 0.0 {
        return 0.0;
    }
    let omega = if r == s {
        2.0 * p.edges_between(r, r) as f64
    } else {
        p.edges_between(r, s) as f64
    };
    (g.degree(i) as f64 / dr) * (g.degree(j) as f64 / ds) * omega
}

#[cfg(test)]
mod tests {
    use super::*;

    fn planted(n_per: usize, k: usize, p_in: f64, p_out: f64, seed: u64) -> (Graph, Vec<usize>) {
        let n = n_per * k;
        let truth: Vec<usize> = (0..n).map(|i| i / n_per).collect();
        let mut r = rng::rng(seed);
        let mut e = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let p = if truth[i] == truth[j] { p_in } else { p_out };
                if r.random::<f64>() < p {
                    e.push((i, j));
                }
            }
        }
        (Graph::from_edges(n, e).unwrap(), truth)
    }

    #[test]
    fn single_block_sbm_is_er_encoding() {
        let (g, _) = planted(20, 2, 0.3, 0.05, 1);
        let p = Partition::single_block(&g);
        let dl = description_length(&g, &p, SbmVariant::Sbm);
        let er = er_description_length(g.node_count(), g.edge_count());
        assert!((dl - er).abs() < 1e-9, "{dl} vs {er}");
    }

    #[test]
    fn move_and_merge_deltas_match_recomputation() {
        let (g, _) = planted(15, 3, 0.4, 0.05, 2);
        for variant in [SbmVariant::Sbm, SbmVariant::DcSbm] {
            let labels: Vec<usize> = (0..g.node_count()).map(|i| (i * 7) % 5).collect();
            let mut st = BlockState::new(&g, variant, &labels, 6);
            for (v, s) in [(0, 3), (4, 5), (10, 0), (0, 1)] {
                let before = st.total();
                st.count_neighbors(v);
                let d = st.move_delta(v, s);
                st.apply_move(v, s);
                let after = st.total();
                assert!((after - before - d).abs() < 1e-8, "{variant:?} move");
                let fresh = BlockState::new(&g, variant, &st.label.clone(), 6);
                assert!((fresh.total() - after).abs() < 1e-8);
            }
            let before = st.total();
            let d = st.merge_delta(1, 3);
            st.apply_merge(1, 3);
            assert!((st.total() - before - d).abs() < 1e-8, "{variant:?} merge");
            let fresh = BlockState::new(&g, variant, &st.label.clone(), 6);
            assert!((fresh.total() - st.total()).abs() < 1e-8);
        }
    }

    #[test]
    fn recovers_two_planted_blocks() {
        let (g, truth) = planted(40, 2, 0.25, 0.01, 3);
        for variant in [SbmVariant::Sbm, SbmVariant::DcSbm] {
            let fit = fit_sbm_mdl(&g, variant, 9);
            assert_eq!(fit.partition.k(), 2, "{variant:?}");
            assert!(fit.partition.agreement(&truth) >= 0.95);
            assert!(fit.partition.is_consistent(&g));
        }
    }

    #[test]
    fn move_traces_strictly_decrease() {
        let (g, _) = planted(25, 3, 0.3, 0.02, 4);
        let fit = fit_sbm_mdl(&g, SbmVariant::DcSbm, 1);
        for t in &fit.move_traces {
            assert!(t.windows(2).all(|w| w[1] < w[0]));
        }
        let best = fit.levels.iter().map(|l| l.1).fold(f64::INFINITY, f64::min);
        assert!((fit.description_length - best).abs() < 1e-6);
    }

    #[test]
    fn scores_follow_plug_in_formulas() {
        let g = Graph::from_edges(6, [(0, 1), (1, 2), (0, 2), (3, 4), (2, 3), (4, 5)]).unwrap();
        let p = Partition::from_assignment(&g, &[0, 0, 0, 1, 1, 1]).unwrap();
        let s = score_sbm(&g, &p, SbmVariant::Sbm, &[(0, 1), (3, 5), (0, 5)]);
        assert_eq!(s, vec![1.0, 2.0 / 3.0, 1.0 / 9.0]);
        let dc = score_sbm(&g, &p, SbmVariant::DcSbm, &[(0, 5), (2, 5), (3, 5)]);
        // block degrees 7 and 5
        assert!((dc[0] - (2.0 / 7.0) * (1.0 / 5.0) * 1.0).abs() < 1e-12);
        assert!((dc[1] / dc[0] - 1.5).abs() < 1e-12);
        assert!((dc[2] - (2.0 / 5.0) * (1.0 / 5.0) * 4.0).abs() < 1e-12);
    }
}
