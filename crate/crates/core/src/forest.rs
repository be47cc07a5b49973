//! Random forest of CART classifiers with class-weighted Gini impurity.
//!
//! Features are quantile-binned once per training call, and splits are
//! found by scanning per-node histograms. Thresholds are stored as raw
//! feature values (a bin's upper edge), so prediction needs no binning.
//! Every tree draws from its own RNG stream, which makes the forest
//! independent of how trees are scheduled across workers.

use rand::seq::index;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{par, rng};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub trees: usize,
    /// `None` grows until leaves are pure or too small.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Features tried per node; `None` means `ceil(sqrt(F))`.
    pub mtry: Option<usize>,
    pub bootstrap: bool,
    pub bins: usize,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            trees: 100,
            max_depth: None,
            min_leaf: 1,
            mtry: None,
            bootstrap: true,
            bins: 64,
        }
    }
}

impl ForestParams {
    pub fn mtry_for(&self, features: usize) -> usize {
        self.mtry
            .unwrap_or_else(|| (features as f64).sqrt().ceil() as usize)
            .clamp(1, features.max(1))
    }
}

/// Flat tree. A node with `feature == LEAF` is a leaf holding `value`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub feature: Vec<u32>,
    pub threshold: Vec<f64>,
    pub left: Vec<u32>,
    pub right: Vec<u32>,
    pub value: Vec<f64>,
}

const LEAF: u32 = u32::MAX;

impl Tree {
    fn push_leaf(&mut self, value: f64) -> usize {
        self.feature.push(LEAF);
        self.threshold.push(0.0);
        self.left.push(0);
        self.right.push(0);
        self.value.push(value);
        self.feature.len() - 1
    }

    pub fn node_count(&self) -> usize {
        self.feature.len()
    }

    pub fn depth(&self) -> usize {
        fn rec(t: &Tree, i: usize) -> usize {
            if t.feature[i] == LEAF {
                0
            } else {
                1 + rec(t, t.left[i] as usize).max(rec(t, t.right[i] as usize))
            }
        }
        rec(self, 0)
    }

    /// `(feature, threshold)` of every internal node.
    pub fn splits(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.feature
            .iter()
            .zip(&self.threshold)
            .filter(|(&f, _)| f != LEAF)
            .map(|(&f, &t)| (f as usize, t))
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            let f = self.feature[i];
            if f == LEAF {
                return self.value[i];
            }
            i = if row[f as usize] <= self.threshold[i] {
                self.left[i]
            } else {
                self.right[i]
            } as usize;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub version: u32,
    pub params: ForestParams,
    pub n_features: usize,
    pub seed: u64,
    pub trees: Vec<Tree>,
    /// Mean decrease in weighted Gini impurity, normalized to sum 1.
    pub importances: Vec<f64>,
}

/// Column-binned view of the training rows.
struct Binned {
    rows: usize,
    /// Feature-major bin codes.
    codes: Vec<u16>,
    /// Upper edge (a data value) of every bin, per feature.
    edges: Vec<Vec<f64>>,
}

impl Binned {
    fn new(x: &[f64], n_features: usize, rows: &[usize], bins: usize) -> Self {
        let bins = bins.clamp(2, u16::MAX as usize);
        let per_feature: Vec<(Vec<f64>, Vec<u16>)> = par::map_range(n_features, |f| {
            let mut vals: Vec<f64> = rows.iter().map(|&r| x[r * n_features + f]).collect();
            vals.sort_unstable_by(f64::total_cmp);
            vals.dedup();
            let edges: Vec<f64> = if vals.len() <= bins {
                vals
            } else {
                let mut e: Vec<f64> = (1..=bins)
                    .map(|b| vals[(b * vals.len()).div_ceil(bins) - 1])
                    .collect();
                e.dedup();
                e
            };
            let codes = rows
                .iter()
                .map(|&r| edges.partition_point(|&e| e < x[r * n_features + f]).min(edges.len() - 1) as u16)
                .collect();
            (edges, codes)
        });
        let mut codes = Vec::with_capacity(n_features * rows.len());
        let mut edges = Vec::with_capacity(n_features);
        for (e, c) in per_feature {
            edges.push(e);
            codes.extend(c);
        }
        Binned {
            rows: rows.len(),
            codes,
            edges,
        }
    }

    #[inline]
    fn code(&self, f: usize, local: usize) -> usize {
        self.codes[f * self.rows + local] as usize
    }
}

fn gini(pos: f64, neg: f64) -> f64 {
    let w = pos + neg;
    if w <= 0.0 {
        0.0
    } else {
        let p = pos / w;
        2.0 * p * (1.0 - p)
    }
}

struct Grower<'a> {
    data: &'a Binned,
    labels: &'a [bool],
    class_weight: [f64; 2],
    params: &'a ForestParams,
    mtry: usize,
}

struct Split {
    feature: usize,
    bin: usize,
    gain: f64,
}

impl Grower<'_> {
    fn weight(&self, local: usize) -> (f64, f64) {
        if self.labels[local] {
            (self.class_weight[1], 0.0)
        } else {
            (0.0, self.class_weight[0])
        }
    }

    fn best_split(&self, idx: &[usize], pos: f64, neg: f64, r: &mut rng::Rng) -> Option<Split> {
        let f_total = self.data.edges.len();
        let parent = (pos + neg) * gini(pos, neg);
        let mut best: Option<Split> = None;
        let mut hist_pos = Vec::new();
        let mut hist_neg = Vec::new();
        let mut hist_n = Vec::new();
        for f in index::sample(r, f_total, self.mtry) {
            let nb = self.data.edges[f].len();
            if nb < 2 {
                continue;
            }
            hist_pos.clear();
            hist_pos.resize(nb, 0.0);
            hist_neg.clear();
            hist_neg.resize(nb, 0.0);
            hist_n.clear();
            hist_n.resize(nb, 0usize);
            for &i in idx {
                let b = self.data.code(f, i);
                let (wp, wn) = self.weight(i);
                hist_pos[b] += wp;
                hist_neg[b] += wn;
                hist_n[b] += 1;
            }
            let (mut lp, mut ln, mut lc) = (0.0, 0.0, 0usize);
            for b in 0..nb - 1 {
                lp += hist_pos[b];
                ln += hist_neg[b];
                lc += hist_n[b];
                if lc < self.params.min_leaf {
                    continue;
                }
                if idx.len() - lc < self.params.min_leaf {
                    break;
                }
                if hist_n[b] == 0 {
                    continue;
                }
                let (rp, rn) = (pos - lp, neg - ln);
                let gain = parent - (lp + ln) * gini(lp, ln) - (rp + rn) * gini(rp, rn);
                if gain > 1e-12 && best.as_ref().is_none_or(|s| gain > s.gain) {
                    best = Some(Split { feature: f, bin: b, gain });
                }
            }
        }
        best
    }

    /// Returns the tree and the per-feature impurity decrease.
    fn grow(&self, mut idx: Vec<usize>, r: &mut rng::Rng) -> (Tree, Vec<f64>) {
        let mut tree = Tree {
            feature: vec![],
            threshold: vec![],
            left: vec![],
            right: vec![],
            value: vec![],
        };
        let mut decrease = vec![0.0; self.data.edges.len()];
        // (node slot, start, end, depth)
        let mut stack: Vec<(usize, usize, usize, usize)> = Vec::new();
        let root = tree.push_leaf(0.0);
        stack.push((root, 0, idx.len(), 0));
        while let Some((node, lo, hi, depth)) = stack.pop() {
            let slice = &idx[lo..hi];
            let (pos, neg) = slice.iter().fold((0.0, 0.0), |(p, n), &i| {
                let (wp, wn) = self.weight(i);
                (p + wp, n + wn)
            });
            tree.value[node] = if pos + neg > 0.0 { pos / (pos + neg) } else { 0.0 };
            let depth_ok = self.params.max_depth.is_none_or(|d| depth < d);
            if !depth_ok || pos == 0.0 || neg == 0.0 || slice.len() < 2 * self.params.min_leaf.max(1) {
                continue;
            }
            let Some(split) = self.best_split(slice, pos, neg, r) else {
                continue;
            };
            let slice = &mut idx[lo..hi];
            let mut mid = 0;
            for t in 0..slice.len() {
                if self.data.code(split.feature, slice[t]) <= split.bin {
                    slice.swap(t, mid);
                    mid += 1;
                }
            }
            decrease[split.feature] += split.gain;
            let l = tree.push_leaf(0.0);
            let rr = tree.push_leaf(0.0);
            tree.feature[node] = split.feature as u32;
            tree.threshold[node] = self.data.edges[split.feature][split.bin];
            tree.left[node] = l as u32;
            tree.right[node] = rr as u32;
            stack.push((rr, lo + mid, hi, depth + 1));
            stack.push((l, lo, lo + mid, depth + 1));
        }
        (tree, decrease)
    }
}

/// Train on the rows `rows` of the row-major matrix `x` (`n_features` wide).
/// `labels` is indexed like the rows of `x`.
pub fn train_forest_rows(
    x: &[f64],
    n_features: usize,
    labels: &[bool],
    rows: &[usize],
    params: &ForestParams,
    seed: u64,
) -> Result<Forest> {
    if n_features == 0 {
        return Err(Error::Empty("feature columns"));
    }
    if x.len() != labels.len() * n_features {
        return Err(Error::ColumnMismatch(format!(
            "{} values for {} labels x {} features",
            x.len(),
            labels.len(),
            n_features
        )));
    }
    if params.trees == 0 {
        return Err(Error::InvalidSpec("forest needs at least one tree".into()));
    }
    let local_labels: Vec<bool> = rows.iter().map(|&r| labels[r]).collect();
    let p = local_labels.iter().filter(|&&l| l).count();
    let q = local_labels.len() - p;
    if p < 2 || q < 2 {
        return Err(Error::DegenerateLabels(format!("{p} positives and {q} negatives")));
    }
    for &r in rows {
        if let Some(c) = x[r * n_features..(r + 1) * n_features].iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: r, column: c });
        }
    }
    let data = Binned::new(x, n_features, rows, params.bins);
    let total = local_labels.len() as f64;
    let grower = Grower {
        data: &data,
        labels: &local_labels,
        class_weight: [total / (2.0 * q as f64), total / (2.0 * p as f64)],
        params,
        mtry: params.mtry_for(n_features),
    };
    let grown: Vec<(Tree, Vec<f64>)> = par::map_range(params.trees, |t| {
        let mut r = rng::stream(rng::derive(seed, t as u64), 0);
        let idx: Vec<usize> = if params.bootstrap {
            (0..rows.len()).map(|_| r.random_range(0..rows.len())).collect()
        } else {
            (0..rows.len()).collect()
        };
        grower.grow(idx, &mut r)
    });
    let mut importances = vec![0.0; n_features];
    let mut trees = Vec::with_capacity(grown.len());
    for (tree, dec) in grown {
        for (a, d) in importances.iter_mut().zip(dec) {
            *a += d / params.trees as f64;
        }
        trees.push(tree);
    }
    let sum: f64 = importances.iter().sum();
    if sum > 0.0 {
        importances.iter_mut().for_each(|v| *v /= sum);
    } else {
        importances.iter_mut().for_each(|v| *v = 1.0 / n_features as f64);
    }
    Ok(Forest {
        version: FORMAT_VERSION,
        params: params.clone(),
        n_features,
        seed,
        trees,
        importances,
    })
}

pub fn train_forest(x: &[f64], n_features: usize, labels: &[bool], params: &ForestParams, seed: u64) -> Result<Forest> {
    let rows: Vec<usize> = (0..labels.len()).collect();
    train_forest_rows(x, n_features, labels, &rows, params, seed)
}

impl Forest {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(row)).sum::<f64>() / self.trees.len() as f64
    }

    /// Scores for every row of a row-major matrix.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        let f = self.n_features;
        if !x.len().is_multiple_of(f) {
            return Err(Error::ColumnMismatch(format!("{} values are not a multiple of {f}", x.len())));
        }
        let mut out = vec![0.0; x.len() / f];
        par::fill_chunks(&mut out, 2048, |offset, slice| {
            for (k, o) in slice.iter_mut().enumerate() {
                let r = offset + k;
                *o = self.predict_row(&x[r * f..(r + 1) * f]);
            }
        });
        Ok(out)
    }

    pub fn predict_rows(&self, x: &[f64], rows: &[usize]) -> Vec<f64> {
        let f = self.n_features;
        par::map_slice(rows, |&r| self.predict_row(&x[r * f..(r + 1) * f]))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: Forest = serde_json::from_str(s)?;
        if f.version != FORMAT_VERSION {
            return Err(Error::InvalidSpec(format!(
                "forest format version {} (expected {FORMAT_VERSION})",
                f.version
            )));
        }
        Ok(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n: usize, seed: u64) -> (Vec<f64>, Vec<bool>) {
        // column 0 decides the label, column 1 is noise
        let mut r = rng::rng(seed);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let a: f64 = r.random();
            let b: f64 = r.random();
            x.extend([a, b]);
            y.push(a > 0.6);
        }
        (x, y)
    }

    #[test]
    fn separable_data_is_fit_perfectly() {
        let x: Vec<f64> = (0..40).map(|i| i as f64).collect();
        let y: Vec<bool> = (0..40).map(|i| i >= 25).collect();
        let f = train_forest(&x, 1, &y, &ForestParams::default(), 1).unwrap();
        let s = f.predict(&x).unwrap();
        let worst_pos = (25..40).map(|i| s[i]).fold(f64::INFINITY, f64::min);
        let best_neg = (0..25).map(|i| s[i]).fold(f64::NEG_INFINITY, f64::max);
        assert!(worst_pos > best_neg);
    }

    #[test]
    fn thresholds_in_training_range_and_leaves_bounded() {
        let (x, y) = toy(300, 2);
        let f = train_forest(&x, 2, &y, &ForestParams::default(), 3).unwrap();
        for t in &f.trees {
            for (feat, th) in t.splits() {
                let col = x.iter().skip(feat).step_by(2);
                let (lo, hi) = col.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
                assert!(th >= lo && th <= hi);
            }
            assert!(t.value.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn stumps_have_one_breakpoint() {
        let (x, y) = toy(200, 4);
        let col: Vec<f64> = x.iter().step_by(2).copied().collect();
        let params = ForestParams { max_depth: Some(1), trees: 7, ..ForestParams::default() };
        let f = train_forest(&col, 1, &y, &params, 5).unwrap();
        for t in &f.trees {
            assert!(t.node_count() <= 3);
            assert!(t.depth() <= 1);
        }
    }

    #[test]
    fn importance_prefers_signal_and_sums_to_one() {
        for seed in 0..10 {
            let (x, y) = toy(300, 10 + seed);
            let f = train_forest(&x, 2, &y, &ForestParams { trees: 30, ..ForestParams::default() }, seed).unwrap();
            assert!((f.importances.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(f.importances[0] > f.importances[1]);
        }
    }

    #[test]
    fn constant_column_gets_zero_importance() {
        let (x, y) = toy(200, 6);
        let x3: Vec<f64> = x.chunks(2).flat_map(|r| [r[0], r[1], 7.0]).collect();
        let f = train_forest(&x3, 3, &y, &ForestParams { trees: 20, ..ForestParams::default() }, 0).unwrap();
        assert_eq!(f.importances[2], 0.0);
    }

    #[test]
    fn duplicated_column_shares_credit() {
        let (x, y) = toy(300, 8);
        let params = ForestParams { trees: 60, mtry: Some(1), ..ForestParams::default() };
        let single = train_forest(&x, 2, &y, &params, 2).unwrap();
        let x3: Vec<f64> = x.chunks(2).flat_map(|r| [r[0], r[0], r[1]]).collect();
        let dup = train_forest(&x3, 3, &y, &params, 2).unwrap();
        assert!((dup.importances.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let combined = dup.importances[0] + dup.importances[1];
        assert!((combined - single.importances[0]).abs() < 0.1, "{combined} vs {}", single.importances[0]);
    }

    #[test]
    fn rejects_bad_inputs() {
        let x = vec![0.0, 1.0, 2.0, 3.0];
        assert!(matches!(
            train_forest(&x, 1, &[true, true, true, true], &ForestParams::default(), 0),
            Err(Error::DegenerateLabels(_))
        ));
        let x = vec![0.0, f64::NAN, 2.0, 3.0];
        assert!(train_forest(&x, 1, &[true, false, true, false], &ForestParams::default(), 0).is_err());
    }

    #[test]
    fn deterministic_and_json_round_trip() {
        let (x, y) = toy(150, 9);
        let p = ForestParams { trees: 10, ..ForestParams::default() };
        let a = train_forest(&x, 2, &y, &p, 11).unwrap();
        let b = train_forest(&x, 2, &y, &p, 11).unwrap();
        assert_eq!(a, b);
        let back = Forest::from_json(&a.to_json().unwrap()).unwrap();
        assert_eq!(a.predict(&x).unwrap(), back.predict(&x).unwrap());
        let mut bad: serde_json::Value = serde_json::from_str(&a.to_json().unwrap()).unwrap();
        bad["version"] = 99.into();
        assert!(Forest::from_json(&bad.to_string()).is_err());
    }

    #[test]
    fn worker_count_does_not_change_trees() {
        let (x, y) = toy(150, 12);
        let p = ForestParams { trees: 12, ..ForestParams::default() };
        let a = par::with_workers(1, || train_forest(&x, 2, &y, &p, 4).unwrap());
        let b = par::with_workers(4, || train_forest(&x, 2, &y, &p, 4).unwrap());
        assert_eq!(a, b);
    }
}
