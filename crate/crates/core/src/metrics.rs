//! AUC, precision and recall, and the analytics on forest importances:
//! entropy, top-x% fit, Lorenz curve and Gini coefficient.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probability that a positive outscores a negative, ties counting one half.
/// Computed by sorting, in integer half-units, so it equals brute-force
/// pair counting exactly.
pub fn auc(pos: &[f64], neg: &[f64]) -> Result<f64> {
    if pos.is_empty() {
        return Err(Error::Empty("positive scores"));
    }
    if neg.is_empty() {
        return Err(Error::Empty("negative scores"));
    }
    let mut all: Vec<(f64, bool)> = pos.iter().map(|&s| (s, true)).chain(neg.iter().map(|&s| (s, false))).collect();
    all.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
    let mut twice_wins: u128 = 0;
    let mut neg_below: u128 = 0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        let (mut p, mut q) = (0u128, 0u128);
        while j < all.len() && all[j].0 == all[i].0 {
            if all[j].1 {
                p += 1;
            } else {
                q += 1;
            }
            j += 1;
        }
        twice_wins += 2 * p * neg_below + p * q;
        neg_below += q;
        i = j;
    }
    Ok(twice_wins as f64 / (2 * pos.len() as u128 * neg.len() as u128) as f64)
}

/// AUC from a score column and parallel labels.
pub fn auc_labeled(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (pos, neg) = split_by_label(scores, labels);
    auc(&pos, &neg)
}

pub fn split_by_label(scores: &[f64], labels: &[bool]) -> (Vec<f64>, Vec<f64>) {
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for (&s, &l) in scores.iter().zip(labels) {
        if l {
            pos.push(s);
        } else {
            neg.push(s);
        }
    }
    (pos, neg)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRecall {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Nothing scored at or above the threshold; precision is reported as 0.
    pub no_predicted_positives: bool,
}

/// Confusion-matrix scores for the rule `score >= threshold`.
pub fn precision_recall(scores: &[f64], labels: &[bool], threshold: f64) -> Result<PrecisionRecall> {
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= threshold, l) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            _ => {}
        }
    }
    from_counts(tp, fp, fn_)
}

pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Result<PrecisionRecall> {
    if tp + fn_ == 0 {
        return Err(Error::Empty("positive labels"));
    }
    let no_pred = tp + fp == 0;
    let precision = if no_pred { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let recall = tp as f64 / (tp + fn_) as f64;
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(PrecisionRecall {
        precision,
        recall,
        f1,
        no_predicted_positives: no_pred,
    })
}

/// Threshold on the grid `0.00, 0.01, ..., 1.00` with the highest F1; ties
/// go to the lowest threshold.
pub fn best_f1_threshold(scores: &[f64], labels: &[bool]) -> Result<(f64, f64)> {
    let mut best = (0.0, -1.0);
    for t in 0..=100 {
        let th = t as f64 / 100.0;
        let f1 = precision_recall(scores, labels, th)?.f1;
        if f1 > best.1 {
            best = (th, f1);
        }
    }
    Ok(best)
}

fn normalized(importances: &[f64]) -> Result<Vec<f64>> {
    if importances.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::InvalidSpec("importances must be finite and non-negative".into()));
    }
    let sum: f64 = importances.iter().sum();
    if sum <= 0.0 {
        return Err(Error::Empty("importance mass"));
    }
    Ok(importances.iter().map(|v| v / sum).collect())
}

fn entropy_bits(p: &[f64]) -> f64 {
    -p.iter().filter(|&&v| v > 0.0).map(|&v| v * v.log2()).sum::<f64>()
}

pub fn importance_entropy(importances: &[f64]) -> Result<f64> {
    Ok(entropy_bits(&normalized(importances)?))
}

/// Entropy of the mean normalized importance vector over several networks
/// sharing one column layout.
pub fn pooled_importance_entropy(per_network: &[Vec<f64>]) -> Result<f64> {
    let first = per_network.first().ok_or(Error::Empty("importance vectors"))?;
    let mut mean = vec![0.0; first.len()];
    for v in per_network {
        if v.len() != first.len() {
            return Err(Error::ColumnMismatch(format!("{} importances vs {}", v.len(), first.len())));
        }
        for (m, p) in mean.iter_mut().zip(normalized(v)?) {
            *m += p / per_network.len() as f64;
        }
    }
    importance_entropy(&mean)
}

/// Entropy of a vector that puts 90% of the mass uniformly on `top` of `total`
/// predictors and 10% uniformly on the rest.
pub fn top_x_model_entropy(top: usize, total: usize) -> f64 {
    if top >= total {
        return (total as f64).log2();
    }
    let hi = 0.9 / top as f64;
    let lo = 0.1 / (total - top) as f64;
    -(0.9 * hi.log2() + 0.1 * lo.log2())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopX {
    pub count: usize,
    pub percent: f64,
}

/// Predictor count whose 90/10 model entropy is closest to the empirical
/// entropy, scanning every count from 1 to F.
pub fn fit_top_x(importances: &[f64]) -> Result<TopX> {
    let h = importance_entropy(importances)?;
    let f = importances.len();
    let mut best = (f64::INFINITY, 1);
    for c in 1..=f {
        let d = (top_x_model_entropy(c, f) - h).abs();
        if d < best.0 - 1e-12 {
            best = (d, c);
        }
    }
    Ok(TopX {
        count: best.1,
        percent: 100.0 * best.1 as f64 / f as f64,
    })
}

/// Entropy of the importance mass aggregated by group. `None` marks a column
/// without a group.
pub fn family_entropy<K: Ord + Clone>(importances: &[f64], groups: &[Option<K>]) -> Result<f64> {
    if groups.len() != importances.len() {
        return Err(Error::ColumnMismatch(format!(
            "{} groups for {} importances",
            groups.len(),
            importances.len()
        )));
    }
    let p = normalized(importances)?;
    let mut mass: BTreeMap<K, f64> = BTreeMap::new();
    for (c, (v, g)) in p.iter().zip(groups).enumerate() {
        let g = g
            .clone()
            .ok_or_else(|| Error::InvalidSpec(format!("column {c} has no family")))?;
        *mass.entry(g).or_default() += v;
    }
    let agg: Vec<f64> = mass.into_values().collect();
    Ok(entropy_bits(&agg))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lorenz {
    /// `(cumulative feature share, cumulative importance share)`, from (0, 0) to (1, 1).
    pub points: Vec<(f64, f64)>,
    pub gini: f64,
}

/// Lorenz curve of ascending-sorted importances and the Gini coefficient
/// `1 - 2 * area`, with the area by trapezoids.
pub fn lorenz_gini(importances: &[f64]) -> Result<Lorenz> {
    let mut p = normalized(importances)?;
    p.sort_unstable_by(f64::total_cmp);
    let f = p.len() as f64;
    let mut points = Vec::with_capacity(p.len() + 1);
    points.push((0.0, 0.0));
    let mut cum = 0.0;
    let mut area = 0.0;
    for (i, v) in p.iter().enumerate() {
        let prev = cum;
        cum += v;
        area += (prev + cum) / (2.0 * f);
        points.push(((i + 1) as f64 / f, cum));
    }
    if let Some(last) = points.last_mut() {
        last.1 = 1.0;
    }
    Ok(Lorenz {
        points,
        gini: 1.0 - 2.0 * area,
    })
}

pub fn write_lorenz_csv<W: Write>(l: &Lorenz, mut w: W) -> std::io::Result<()> {
    writeln!(w, "cum_features,cum_importance")?;
    for (x, y) in &l.points {
        writeln!(w, "{x},{y}")?;
    }
    Ok(())
}

/// AUC of each raw column on test rows, after flipping any column whose
/// training AUC is below one half.
pub fn oriented_column_aucs(
    train: &[Vec<f64>],
    train_labels: &[bool],
    test: &[Vec<f64>],
    test_labels: &[bool],
) -> Result<Vec<f64>> {
    train
        .iter()
        .zip(test)
        .map(|(tr, te)| {
            let a = auc_labeled(tr, train_labels)?;
            let t = auc_labeled(te, test_labels)?;
            Ok(if a < 0.5 { 1.0 - t } else { t })
        })
        .collect()
}

/// Counts of AUC values in `bins` equal-width bins over [0, 1].
pub fn histogram(values: &[f64], bins: usize) -> Vec<usize> {
    let mut h = vec![0; bins];
    for &v in values {
        let b = ((v.clamp(0.0, 1.0) * bins as f64) as usize).min(bins - 1);
        h[b] += 1;
    }
    h
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaturationPoint {
    pub k: usize,
    pub auc: f64,
}

/// Smallest `k` whose AUC reaches 95% of the full-stack AUC.
pub fn k_star(curve: &[SaturationPoint], full_auc: f64) -> Option<usize> {
    curve
        .iter()
        .filter(|p| p.auc >= 0.95 * full_auc)
        .map(|p| p.k)
        .min()
}

pub fn write_saturation_csv<W: Write>(curve: &[SaturationPoint], mut w: W) -> std::io::Result<()> {
    writeln!(w, "k,auc")?;
    for p in curve {
        writeln!(w, "{},{}", p.k, p.auc)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub auc: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub threshold: f64,
    pub no_predicted_positives: bool,
    /// Oriented holdout AUC of every input column, by column id.
    pub predictor_aucs: BTreeMap<String, f64>,
    pub importances: BTreeMap<String, f64>,
    pub importance_entropy: Option<f64>,
    pub top_x: Option<TopX>,
    pub family_entropy: Option<f64>,
    pub lorenz: Option<Lorenz>,
    pub saturation: Vec<SaturationPoint>,
    pub k_star: Option<usize>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    fn brute(pos: &[f64], neg: &[f64]) -> f64 {
        let mut twice = 0u128;
        for &p in pos {
            for &q in neg {
                twice += if p > q { 2 } else if p == q { 1 } else { 0 };
            }
        }
        twice as f64 / (2 * pos.len() * neg.len()) as f64
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&[0.9, 0.3], &[0.5, 0.1]).unwrap(), 0.75);
        assert_eq!(auc(&[0.5], &[0.5]).unwrap(), 0.5);
        assert!(auc(&[], &[0.1]).is_err());
        assert!(auc(&[0.1], &[]).is_err());
    }

    #[test]
    fn auc_matches_brute_force() {
        let mut r = crate::rng::rng(1);
        for _ in 0..100 {
            let p = r.random_range(1..40);
            let q = r.random_range(1..40);
            // coarse values force ties
            let pos: Vec<f64> = (0..p).map(|_| r.random_range(0..10) as f64 / 10.0).collect();
            let neg: Vec<f64> = (0..q).map(|_| r.random_range(0..10) as f64 / 10.0).collect();
            assert_eq!(auc(&pos, &neg).unwrap(), brute(&pos, &neg));
        }
    }

    #[test]
    fn precision_recall_examples() {
        let s = [0.9, 0.8, 0.2, 0.1];
        let l = [true, true, false, false];
        let pr = precision_recall(&s, &l, 0.5).unwrap();
        assert_eq!((pr.precision, pr.recall, pr.f1), (1.0, 1.0, 1.0));
        let pr = precision_recall(&s, &l, 0.0).unwrap();
        assert_eq!((pr.recall, pr.precision), (1.0, 0.5));
        let pr = from_counts(3, 1, 2).unwrap();
        assert_eq!((pr.precision, pr.recall), (0.75, 0.6));
        let pr = precision_recall(&s, &l, 2.0).unwrap();
        assert!(pr.no_predicted_positives);
        assert_eq!(pr.precision, 0.0);
        assert!(precision_recall(&s, &[false; 4], 0.5).is_err());
    }

    #[test]
    fn entropy_values() {
        for (f, h) in [(203, 7.66), (42, 5.39), (11, 3.46), (150, 7.23)] {
            assert!((importance_entropy(&vec![1.0; f]).unwrap() - h).abs() < 0.01);
        }
        assert_eq!(importance_entropy(&[0.0, 1.0, 0.0]).unwrap(), 0.0);
        assert!(importance_entropy(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn top_x_fits() {
        let mut v = vec![0.9 / 10.0; 10];
        v.extend(vec![0.1 / 90.0; 90]);
        assert_eq!(fit_top_x(&v).unwrap().count, 10);
        let u = fit_top_x(&vec![1.0; 100]).unwrap();
        assert_eq!(u.percent, 90.0);
        let mut one = vec![0.0; 50];
        one[3] = 1.0;
        assert_eq!(fit_top_x(&one).unwrap().count, 1);
    }

    #[test]
    fn family_entropy_values() {
        let groups = [Some(0), Some(0), Some(1), Some(2)];
        let h = family_entropy(&[0.2, 0.133333333333, 0.333333333333, 0.333333333334], &groups).unwrap();
        assert!((h - 1.58).abs() < 0.01);
        assert_eq!(family_entropy(&[0.5, 0.5, 0.0, 0.0], &groups).unwrap(), 0.0);
        assert!(family_entropy(&[1.0, 1.0], &[Some(0), None]).is_err());
    }

    #[test]
    fn lorenz_and_gini() {
        let l = lorenz_gini(&[1.0; 8]).unwrap();
        assert!(l.gini.abs() < 1e-12);
        for (x, y) in &l.points {
            assert!((x - y).abs() < 1e-12);
        }
        let mut one = vec![0.0; 5];
        one[2] = 3.0;
        assert!((lorenz_gini(&one).unwrap().gini - 0.8).abs() < 1e-12);
        let mut r = crate::rng::rng(4);
        for _ in 0..50 {
            let v: Vec<f64> = (0..r.random_range(2..30)).map(|_| r.random::<f64>()).collect();
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let mad: f64 = v.iter().flat_map(|a| v.iter().map(move |b| (a - b).abs())).sum();
            let g = mad / (2.0 * n * n * mean);
            assert!((lorenz_gini(&v).unwrap().gini - g).abs() < 1e-9);
        }
    }

    #[test]
    fn k_star_and_orientation() {
        let curve = [
            SaturationPoint { k: 1, auc: 0.6 },
            SaturationPoint { k: 2, auc: 0.86 },
            SaturationPoint { k: 5, auc: 0.9 },
        ];
        assert_eq!(k_star(&curve, 0.9), Some(2));
        let labels = [true, true, false, false];
        let good = vec![0.9, 0.8, 0.1, 0.2];
        let flipped = vec![0.1, 0.2, 0.9, 0.8];
        let a = oriented_column_aucs(&[good.clone(), flipped.clone()], &labels, &[good, flipped], &labels).unwrap();
        assert_eq!(a, vec![1.0, 1.0]);
        assert_eq!(histogram(&[0.0, 0.55, 1.0], 10), vec![1, 0, 0, 0, 0, 1, 0, 0, 0, 1]);
    }

    #[test]
    fn pooled_entropy_averages_networks() {
        let h = pooled_importance_entropy(&[vec![1.0, 0.0], vec![0.0, 3.0]]).unwrap();
        assert!((h - 1.0).abs() < 1e-12);
        let one = pooled_importance_entropy(&[vec![0.2, 0.3, 0.5]]).unwrap();
        assert_eq!(one, importance_entropy(&[0.2, 0.3, 0.5]).unwrap());
        assert!(pooled_importance_entropy(&[]).is_err());
        assert!(pooled_importance_entropy(&[vec![1.0], vec![1.0, 1.0]]).is_err());
    }
}
