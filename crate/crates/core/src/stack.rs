//! Level-1 learner: a random forest over predictor columns, tuned by
//! stratified cross-validation on the training pairs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{Column, Family, PairFeatureTable};
use crate::forest::{train_forest_rows, Forest, ForestParams};
use crate::holdout::kfold;
use crate::metrics::{auc_labeled, best_f1_threshold};
use crate::rng;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    F1,
    Auc,
}

/// Family presets, named by their family codes.
pub const PRESETS: [&str; 7] = ["T", "M", "E", "TM", "TE", "ME", "TME"];

pub fn parse_families(code: &str) -> Result<Vec<Family>> {
    let mut fams = Vec::new();
    for c in code.chars() {
        let f = Family::from_code(c).ok_or_else(|| Error::InvalidSpec(format!("unknown family code {c:?} in {code:?}")))?;
        if !fams.contains(&f) {
            fams.push(f);
        }
    }
    if fams.is_empty() {
        return Err(Error::InvalidSpec("empty family set".into()));
    }
    fams.sort();
    Ok(fams)
}

pub fn family_code(fams: &[Family]) -> String {
    let mut f = fams.to_vec();
    f.sort();
    f.dedup();
    f.into_iter().map(Family::code).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StackConfig {
    pub folds: usize,
    pub trees: usize,
    pub depths: Vec<Option<usize>>,
    pub min_leaf: Vec<usize>,
    pub bins: usize,
}

impl Default for StackConfig {
    fn default() -> Self {
        StackConfig {
            folds: 5,
            trees: 100,
            depths: vec![Some(4), Some(8), None],
            min_leaf: vec![1, 5],
            bins: 64,
        }
    }
}

impl StackConfig {
    pub fn grid(&self) -> Vec<ForestParams> {
        let mut g = Vec::new();
        for &d in &self.depths {
            for &l in &self.min_leaf {
                g.push(ForestParams {
                    trees: self.trees,
                    max_depth: d,
                    min_leaf: l,
                    mtry: None,
                    bootstrap: true,
                    bins: self.bins,
                });
            }
        }
        g
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackedModel {
    pub version: u32,
    pub families: Vec<Family>,
    /// Columns the forest was trained on, in order.
    pub columns: Vec<Column>,
    pub objective: Objective,
    pub forest: Forest,
    pub threshold: f64,
    /// Normalized Gini importance per column, aligned with `columns`.
    pub importances: Vec<f64>,
    /// Objective value of the chosen parameters on pooled validation folds.
    pub cv_score: f64,
    pub seed: u64,
}

/// Columns of `table` that belong to `families`, in table order.
pub fn family_columns(table: &PairFeatureTable, families: &[Family]) -> Vec<usize> {
    (0..table.cols()).filter(|&c| families.contains(&table.columns[c].family)).collect()
}

/// Seed of the final refit; the saturation curve reuses it.
pub fn final_seed(seed: u64) -> u64 {
    rng::derive(seed, 0xF1)
}

/// Cross-validate the parameter grid on `table` (restricted to `families`),
/// then refit the best parameters on every row.
pub fn train_stack(
    table: &PairFeatureTable,
    labels: &[bool],
    families: &[Family],
    objective: Objective,
    cfg: &StackConfig,
    seed: u64,
) -> Result<StackedModel> {
    if labels.len() != table.rows() {
        return Err(Error::ColumnMismatch(format!("{} labels for {} rows", labels.len(), table.rows())));
    }
    let cols = family_columns(table, families);
    if cols.is_empty() {
        return Err(Error::Empty("columns for the requested families"));
    }
    let sub = table.select(&cols);
    let folds = kfold(labels, cfg.folds, rng::derive(seed, 0xC0))?;
    let f = sub.cols();
    let x = sub.values();

    let mut best: Option<(f64, ForestParams, Vec<f64>, Vec<bool>)> = None;
    for (gi, params) in cfg.grid().into_iter().enumerate() {
        let mut pooled_scores = Vec::with_capacity(labels.len());
        let mut pooled_labels = Vec::with_capacity(labels.len());
        for (fi, (train, validate)) in folds.iter().enumerate() {
            let forest = train_forest_rows(x, f, labels, train, &params, rng::derive(seed, (gi * 64 + fi) as u64))?;
            pooled_scores.extend(forest.predict_rows(x, validate));
            pooled_labels.extend(validate.iter().map(|&r| labels[r]));
        }
        let score = match objective {
            Objective::Auc => auc_labeled(&pooled_scores, &pooled_labels)?,
            Objective::F1 => best_f1_threshold(&pooled_scores, &pooled_labels)?.1,
        };
        if best.as_ref().is_none_or(|b| score > b.0) {
            best = Some((score, params, pooled_scores, pooled_labels));
        }
    }
    let (cv_score, params, pooled_scores, pooled_labels) = best.ok_or(Error::Empty("parameter grid"))?;
    let (threshold, _) = best_f1_threshold(&pooled_scores, &pooled_labels)?;
    let all: Vec<usize> = (0..labels.len()).collect();
    let forest = train_forest_rows(x, f, labels, &all, &params, final_seed(seed))?;
    Ok(StackedModel {
        version: FORMAT_VERSION,
        families: families.to_vec(),
        columns: sub.columns.clone(),
        objective,
        importances: forest.importances.clone(),
        forest,
        threshold,
        cv_score,
        seed,
    })
}

impl StackedModel {
    /// Scores for every row of `table`, which must carry this model's
    /// columns (extra columns are ignored, missing ones are an error).
    pub fn predict_scores(&self, table: &PairFeatureTable) -> Result<Vec<f64>> {
        let ids: Vec<String> = self.columns.iter().map(|c| c.id.clone()).collect();
        let sub = table.select_ids(&ids)?;
        if sub.columns != self.columns {
            return Err(Error::ColumnMismatch("column families differ from the trained model".into()));
        }
        self.forest.predict(sub.values())
    }

    pub fn gini_importances(&self) -> Vec<(String, f64)> {
        self.columns.iter().map(|c| c.id.clone()).zip(self.importances.iter().copied()).collect()
    }

    /// Indices of the top `k` columns by importance, returned in column order.
    pub fn top_columns(&self, k: usize) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.columns.len()).collect();
        order.sort_by(|&a, &b| self.importances[b].total_cmp(&self.importances[a]).then(a.cmp(&b)));
        let mut top: Vec<usize> = order.into_iter().take(k).collect();
        top.sort_unstable();
        top
    }

    /// Refit the chosen forest parameters on the top `k` columns, with the
    /// seed of the final refit. At `k` equal to the column count this
    /// reproduces the model's own forest.
    pub fn refit_top(&self, table: &PairFeatureTable, labels: &[bool], k: usize) -> Result<(Vec<Column>, Forest)> {
        let ids: Vec<String> = self.top_columns(k).into_iter().map(|c| self.columns[c].id.clone()).collect();
        let sub = table.select_ids(&ids)?;
        let all: Vec<usize> = (0..labels.len()).collect();
        let forest = train_forest_rows(sub.values(), sub.cols(), labels, &all, &self.forest.params, final_seed(self.seed))?;
        Ok((sub.columns, forest))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: StackedModel = serde_json::from_str(s)?;
        if m.version != FORMAT_VERSION {
            return Err(Error::InvalidSpec(format!("stack format version {} (expected {FORMAT_VERSION})", m.version)));
        }
        Ok(m)
    }
}

/// Each column votes for its top `q` share of rows; the score is the vote
/// count. Rows tied at a column's cut are taken in row order.
pub fn majority_vote(columns: &[Vec<f64>], q: f64) -> Result<Vec<f64>> {
    let first = columns.first().ok_or(Error::Empty("vote columns"))?;
    let n = first.len();
    if columns.iter().any(|c| c.len() != n) {
        return Err(Error::ColumnMismatch("vote columns differ in length".into()));
    }
    let take = ((q.clamp(0.0, 1.0) * n as f64).round() as usize).min(n);
    let mut votes = vec![0.0; n];
    let mut order: Vec<usize> = Vec::with_capacity(n);
    for col in columns {
        order.clear();
        order.extend(0..n);
        order.sort_by(|&a, &b| col[b].total_cmp(&col[a]).then(a.cmp(&b)));
        for &r in &order[..take] {
            votes[r] += 1.0;
        }
    }
    Ok(votes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    fn toy_table(n: usize, seed: u64) -> (PairFeatureTable, Vec<bool>) {
        let mut r = rng::rng(seed);
        let mut values = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..n {
            let y = r.random::<f64>() < 0.2;
            let signal = if y { 1.0 } else { 0.0 } + 0.6 * r.random::<f64>();
            values.extend([signal, r.random(), r.random(), r.random()]);
            labels.push(y);
        }
        let columns = vec![
            Column::new("S", Family::Topological),
            Column::new("N1", Family::Topological),
            Column::new("N2", Family::Model),
            Column::new("N3", Family::Embedding),
        ];
        let pairs = (0..n).map(|i| (i, i + 1)).collect();
        (PairFeatureTable::new(pairs, columns, values).unwrap(), labels)
    }

    fn small() -> StackConfig {
        StackConfig { trees: 15, ..StackConfig::default() }
    }

    #[test]
    fn presets_parse() {
        let all: Vec<Vec<Family>> = PRESETS.iter().map(|p| parse_families(p).unwrap()).collect();
        assert_eq!(all.len(), 7);
        assert_eq!(all[3], vec![Family::Topological, Family::Model]);
        assert_eq!(family_code(&all[6]), "TME");
        assert!(parse_families("X").is_err());
    }

    #[test]
    fn mask_selects_family_columns() {
        let (t, y) = toy_table(200, 1);
        let m = train_stack(&t, &y, &[Family::Topological], Objective::F1, &small(), 3).unwrap();
        assert_eq!(m.columns.len(), 2);
        let m = train_stack(&t, &y, &[Family::Topological, Family::Model], Objective::Auc, &small(), 3).unwrap();
        assert_eq!(m.columns.len(), 3);
        assert!((m.importances.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(m.importances[0] > m.importances[1]);
        assert!((0.0..=1.0).contains(&m.threshold));
    }

    #[test]
    fn predictions_are_bounded_and_row_equivariant() {
        let (t, y) = toy_table(200, 2);
        let m = train_stack(&t, &y, &[Family::Topological, Family::Model], Objective::F1, &small(), 5).unwrap();
        let s = m.predict_scores(&t).unwrap();
        assert!(s.iter().all(|v| (0.0..=1.0).contains(v)));
        let rev: Vec<usize> = (0..t.rows()).rev().collect();
        let s_rev = m.predict_scores(&t.select_rows(&rev)).unwrap();
        for (a, b) in rev.iter().zip(&s_rev) {
            assert_eq!(s[*a], *b);
        }
        let same = PairFeatureTable::new(vec![(0, 1); 3], t.columns.clone(), t.row(0).repeat(3)).unwrap();
        let s = m.predict_scores(&same).unwrap();
        assert!(s[0] == s[1] && s[1] == s[2]);
        let missing = t.select(&[0]);
        assert!(matches!(m.predict_scores(&missing), Err(Error::ColumnMismatch(_))));
    }

    #[test]
    fn refit_with_all_columns_reproduces_forest() {
        let (t, y) = toy_table(150, 4);
        let m = train_stack(&t, &y, &[Family::Topological, Family::Model], Objective::Auc, &small(), 8).unwrap();
        let (_, f) = m.refit_top(&t, &y, 3).unwrap();
        assert_eq!(f, m.forest);
        let back = StackedModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn vote_semantics() {
        let c = vec![0.1, 0.9, 0.5, 0.7];
        assert_eq!(majority_vote(std::slice::from_ref(&c), 0.5).unwrap(), vec![0.0, 1.0, 0.0, 1.0]);
        assert_eq!(majority_vote(&[c.clone(), c.clone()], 0.5).unwrap(), vec![0.0, 2.0, 0.0, 2.0]);
        assert!(majority_vote(&[], 0.5).is_err());
    }
}
