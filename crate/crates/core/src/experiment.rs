//! End-to-end experiments: holdout, level-0 tables, stacks, individual
//! predictors, majority vote, and the optimal-AUC gap on synthetic cells.
//!
//! Cells (network x seed) run on the worker pool and are merged in
//! canonical order, so output bytes do not depend on the worker count.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::embed::{embedding_table, EmbedConfig};
use crate::error::{Error, Result};
use crate::features::{Family, PairFeatureTable, TopoConfig, TopoContext};
use crate::graph::Graph;
use crate::holdout::{build_training_instance, sample_holdout, test_candidates, HoldoutSplit};
use crate::metrics::{self, EvalReport, SaturationPoint};
use crate::model::ModelFits;
use crate::oracle::{optimal_auc_exact, optimal_auc_mc, DEFAULT_SAMPLES};
use crate::stack::{family_code, majority_vote, parse_families, train_stack, Objective, StackConfig, StackedModel};
use crate::synth::{builtin_suite, find_spec, generate, PlantedGraph, SyntheticSpec};
use crate::{par, rng};

pub const RESULTS_HEADER: &str = "network,seed,method,auc,precision,recall,f1,oracle_auc,gap";
pub const NETWORKS_HEADER: &str = "network,kind,n,m,domain";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSpec {
    pub path: PathBuf,
    /// Defaults to the file stem.
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub domain: Option<String>,
}

/// `"builtin"`, a list of builtin row names, or explicit specs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SuiteSelection {
    Builtin(String),
    Names(Vec<String>),
    Specs(Vec<SyntheticSpec>),
}

impl SuiteSelection {
    pub fn resolve(&self) -> Result<Vec<SyntheticSpec>> {
        match self {
            SuiteSelection::Builtin(s) if s == "builtin" => Ok(builtin_suite()),
            SuiteSelection::Builtin(s) => Err(Error::Config(format!(
                "synthetic_suite must be \"builtin\", a list of row names, or a list of specs (got {s:?})"
            ))),
            SuiteSelection::Names(names) => names
                .iter()
                .map(|n| find_spec(n).ok_or_else(|| Error::Config(format!("unknown synthetic row {n:?}"))))
                .collect(),
            SuiteSelection::Specs(specs) => {
                for s in specs {
                    s.validate()?;
                }
                Ok(specs.clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub inputs: Vec<InputSpec>,
    #[serde(default)]
    pub synthetic_suite: Option<SuiteSelection>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_alpha")]
    pub alpha_prime: f64,
    pub seeds: Vec<u64>,
    /// Column ids reported as individual methods; `["all"]` selects every column.
    #[serde(default)]
    pub predictors: Vec<String>,
    /// Family presets such as `"TM"`.
    #[serde(default = "default_stacks")]
    pub stacks: Vec<String>,
    /// Report a majority vote over the model-based columns.
    #[serde(default)]
    pub majority_vote: bool,
    #[serde(default = "default_objective")]
    pub objective: Objective,
    pub output_dir: PathBuf,
    /// Uniform subsample size for training negatives; `None` keeps every non-edge.
    #[serde(default)]
    pub negative_cap: Option<usize>,
    #[serde(default = "default_samples")]
    pub oracle_samples: usize,
    /// Sub-stack sizes for the saturation curve of the first stack; the full
    /// column count is always added.
    #[serde(default)]
    pub saturation_ks: Vec<usize>,
    /// Worker threads; 0 uses the global pool.
    #[serde(default)]
    pub workers: usize,
    #[serde(default)]
    pub topo: TopoConfig,
    #[serde(default)]
    pub embed: EmbedConfig,
    #[serde(default)]
    pub stack: StackConfig,
}

fn default_alpha() -> f64 {
    0.8
}
fn default_stacks() -> Vec<String> {
    vec!["TM".into()]
}
fn default_objective() -> Objective {
    Objective::F1
}
fn default_samples() -> usize {
    DEFAULT_SAMPLES
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.inputs.is_empty() && self.synthetic_suite.is_none() {
            return Err(Error::Config("give at least one of inputs or synthetic_suite".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must list at least one seed".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha = {} must lie in (0, 1)", self.alpha)));
        }
        if !(self.alpha_prime > 0.0 && self.alpha_prime < 1.0) {
            return Err(Error::Config(format!("alpha_prime = {} must lie in (0, 1)", self.alpha_prime)));
        }
        for s in &self.stacks {
            parse_families(s).map_err(|e| Error::Config(format!("stacks: {e}")))?;
        }
        if self.stack.folds < 2 || self.stack.trees == 0 || self.stack.depths.is_empty() || self.stack.min_leaf.is_empty() {
            return Err(Error::Config("stack needs folds >= 2, trees >= 1 and a non-empty grid".into()));
        }
        if self.oracle_samples == 0 {
            return Err(Error::Config("oracle_samples must be positive".into()));
        }
        self.embed.validate().map_err(|e| Error::Config(format!("embed: {e}")))?;
        if let Some(s) = &self.synthetic_suite {
            s.resolve()?;
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let s = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(s.as_bytes()))
    }

    pub fn families_needed(&self) -> Vec<Family> {
        let mut f: Vec<Family> = self.stacks.iter().flat_map(|s| parse_families(s).unwrap_or_default()).collect();
        f.push(Family::Topological);
        f.push(Family::Model);
        if self.predictors.iter().any(|p| p.starts_with("EMB-")) {
            f.push(Family::Embedding);
        }
        f.sort();
        f.dedup();
        f
    }
}

/// A network ready for holdout: either loaded or generated.
#[derive(Debug, Clone)]
pub struct Network {
    pub name: String,
    pub domain: Option<String>,
    pub graph: Graph,
    pub planted: Option<PlantedGraph>,
}

/// Level-0 tables for one holdout split.
#[derive(Debug, Clone)]
pub struct PreparedCell {
    pub split: HoldoutSplit,
    pub train: PairFeatureTable,
    pub train_labels: Vec<bool>,
    pub test: PairFeatureTable,
    pub test_labels: Vec<bool>,
}

impl PreparedCell {
    /// Expected share of held-out edges among the test candidates.
    pub fn prevalence(&self) -> f64 {
        let pos = self.test_labels.iter().filter(|&&l| l).count();
        let m_obs = self.split.observed.edge_count() as f64;
        let expected = m_obs * (1.0 - self.split.alpha) / self.split.alpha;
        if self.test_labels.is_empty() {
            0.0
        } else if self.split.alpha < 1.0 {
            (expected / self.test_labels.len() as f64).clamp(0.0, 1.0)
        } else {
            pos as f64 / self.test_labels.len() as f64
        }
    }
}

/// Level-0 table for `pairs` on `g`, for the requested families.
pub fn feature_table(
    g: &Graph,
    pairs: &[crate::graph::Pair],
    families: &[Family],
    topo: &TopoConfig,
    embed: &EmbedConfig,
    seed: u64,
) -> Result<PairFeatureTable> {
    let mut parts = Vec::new();
    if families.contains(&Family::Topological) {
        parts.push(TopoContext::new(g, topo, rng::derive(seed, 11))?.table(pairs)?);
    }
    if families.contains(&Family::Model) {
        parts.push(ModelFits::fit(g, rng::derive(seed, 12)).table(g, pairs)?);
    }
    if families.contains(&Family::Embedding) {
        parts.push(embedding_table(g, pairs, embed, rng::derive(seed, 13))?);
    }
    let refs: Vec<&PairFeatureTable> = parts.iter().collect();
    PairFeatureTable::hstack(&refs)
}

/// Holdout at `alpha`, training pairs at `alpha_prime`, and level-0 tables:
/// training rows on the doubly reduced graph, test rows (every non-edge of
/// the observed graph) on the observed graph.
pub fn prepare_cell(graph: &Graph, cfg: &ExperimentConfig, families: &[Family], seed: u64) -> Result<PreparedCell> {
    let split = sample_holdout(graph, cfg.alpha, rng::derive(seed, 1))?;
    if split.holdout_edges.is_empty() {
        return Err(Error::TooSmall("holdout is empty; the graph has too few edges for this alpha".into()));
    }
    let lp = build_training_instance(&split, cfg.alpha_prime, rng::derive(seed, 2), cfg.negative_cap)?;
    let train = feature_table(&lp.feature_graph, &lp.pairs, families, &cfg.topo, &cfg.embed, rng::derive(seed, 3))?;
    let (pairs, test_labels) = test_candidates(&split);
    let test = feature_table(&split.observed, &pairs, families, &cfg.topo, &cfg.embed, rng::derive(seed, 4))?;
    Ok(PreparedCell {
        split,
        train,
        train_labels: lp.labels,
        test,
        test_labels,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub network: String,
    pub seed: u64,
    pub method: String,
    pub auc: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub oracle_auc: Option<f64>,
    pub gap: Option<f64>,
}

impl ResultRow {
    pub fn csv_line(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.network,
            self.seed,
            self.method,
            self.auc,
            self.precision,
            self.recall,
            self.f1,
            opt(self.oracle_auc),
            opt(self.gap)
        )
    }

    pub fn parse(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            return Err(Error::Config(format!("results row has {} fields, expected 9: {line}", f.len())));
        }
        let num = |s: &str| -> Result<f64> { s.parse::<f64>().map_err(|_| Error::Config(format!("bad number {s:?} in results row"))) };
        let opt = |s: &str| -> Result<Option<f64>> { if s.is_empty() { Ok(None) } else { num(s).map(Some) } };
        Ok(ResultRow {
            network: f[0].to_string(),
            seed: f[1].parse().map_err(|_| Error::Config(format!("bad seed {:?}", f[1])))?,
            method: f[2].to_string(),
            auc: num(f[3])?,
            precision: num(f[4])?,
            recall: num(f[5])?,
            f1: num(f[6])?,
            oracle_auc: opt(f[7])?,
            gap: opt(f[8])?,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CellReport {
    pub network: String,
    pub seed: u64,
    pub cell_seed: u64,
    pub n: usize,
    pub m: usize,
    pub holdout_edges: usize,
    pub training_rows: usize,
    pub test_rows: usize,
    pub columns: Vec<String>,
    pub oracle_auc: Option<f64>,
    pub oracle_stderr: Option<f64>,
    pub oracle_method: Option<String>,
    pub reports: Vec<EvalReport>,
    pub warnings: Vec<String>,
}

#[derive(Debug)]
pub struct CellOutcome {
    pub rows: Vec<ResultRow>,
    pub report: CellReport,
}

fn stack_report(
    model: &StackedModel,
    cell: &PreparedCell,
    saturation_ks: &[usize],
    method: String,
) -> Result<(EvalReport, Vec<f64>)> {
    let scores = model.predict_scores(&cell.test)?;
    let auc = metrics::auc_labeled(&scores, &cell.test_labels)?;
    let pr = metrics::precision_recall(&scores, &cell.test_labels, model.threshold)?;
    let imp = model.importances.clone();
    let groups: Vec<Option<Family>> = model.columns.iter().map(|c| Some(c.family)).collect();
    let mut saturation = Vec::new();
    if !saturation_ks.is_empty() {
        saturation = saturation_curve(model, cell, saturation_ks)?;
    }
    let k_star = if saturation.is_empty() { None } else { metrics::k_star(&saturation, auc) };
    let report = EvalReport {
        method,
        auc,
        precision: pr.precision,
        recall: pr.recall,
        f1: pr.f1,
        threshold: model.threshold,
        no_predicted_positives: pr.no_predicted_positives,
        predictor_aucs: BTreeMap::new(),
        importances: model.gini_importances().into_iter().collect(),
        importance_entropy: metrics::importance_entropy(&imp).ok(),
        top_x: metrics::fit_top_x(&imp).ok(),
        family_entropy: metrics::family_entropy(&imp, &groups).ok(),
        lorenz: metrics::lorenz_gini(&imp).ok(),
        saturation,
        k_star,
    };
    Ok((report, scores))
}

/// Holdout AUC of the top-`k` importance sub-stacks, refit with the chosen
/// forest parameters and seed. The full column count is always included.
pub fn saturation_curve(model: &StackedModel, cell: &PreparedCell, ks: &[usize]) -> Result<Vec<SaturationPoint>> {
    let f = model.columns.len();
    let mut ks: Vec<usize> = ks.iter().copied().filter(|&k| k >= 1 && k <= f).collect();
    ks.push(f);
    ks.sort_unstable();
    ks.dedup();
    ks.iter()
        .map(|&k| {
            let (cols, forest) = model.refit_top(&cell.train, &cell.train_labels, k)?;
            let ids: Vec<String> = cols.iter().map(|c| c.id.clone()).collect();
            let sub = cell.test.select_ids(&ids)?;
            let scores = forest.predict(sub.values())?;
            Ok(SaturationPoint {
                k,
                auc: metrics::auc_labeled(&scores, &cell.test_labels)?,
            })
        })
        .collect()
}

/// Precision and recall when the top `q` share of rows is called positive.
fn top_share_pr(scores: &[f64], labels: &[bool], q: f64) -> Result<metrics::PrecisionRecall> {
    let take = ((q * scores.len() as f64).round() as usize).clamp(1, scores.len());
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let tp = order[..take].iter().filter(|&&r| labels[r]).count();
    let pos = labels.iter().filter(|&&l| l).count();
    metrics::from_counts(tp, take - tp, pos - tp)
}

fn oracle_for(planted: &PlantedGraph, split: &HoldoutSplit, samples: usize, seed: u64) -> Result<(f64, Option<f64>, String)> {
    match optimal_auc_exact(&planted.spec) {
        Ok(v) => Ok((v, None, "closed-form".into())),
        Err(Error::NoClosedForm(_)) => {
            let est = optimal_auc_mc(planted, split, samples, seed)?;
            Ok((est.auc, Some(est.stderr), "monte-carlo".into()))
        }
        Err(e) => Err(e),
    }
}

/// One (network, seed) cell.
pub fn run_cell(net: &Network, seed: u64, cfg: &ExperimentConfig) -> Result<CellOutcome> {
    let cell_seed = rng::derive(seed, rng::tag(&net.name));
    let families = cfg.families_needed();
    let cell = prepare_cell(&net.graph, cfg, &families, cell_seed)?;
    let mut warnings = Vec::new();
    if let Some(p) = &net.planted {
        warnings.extend(p.warnings.iter().cloned());
    }

    let (oracle, oracle_stderr, oracle_method) = match &net.planted {
        Some(p) => {
            let (v, se, how) = oracle_for(p, &cell.split, cfg.oracle_samples, rng::derive(cell_seed, 9))?;
            (Some(v), se, Some(how))
        }
        None => (None, None, None),
    };
    let gap = |auc: f64| oracle.map(|o| o - auc);

    let mut rows = Vec::new();
    let mut reports = Vec::new();

    // individual columns, oriented by their training AUC
    let train_cols: Vec<Vec<f64>> = (0..cell.train.cols()).map(|c| cell.train.column(c)).collect();
    let test_cols: Vec<Vec<f64>> = (0..cell.test.cols()).map(|c| cell.test.column(c)).collect();
    let col_aucs = metrics::oriented_column_aucs(&train_cols, &cell.train_labels, &test_cols, &cell.test_labels)?;
    let predictor_aucs: BTreeMap<String, f64> =
        cell.test.columns.iter().map(|c| c.id.clone()).zip(col_aucs.iter().copied()).collect();
    let q = cell.prevalence();
    let all_predictors = cfg.predictors.iter().any(|p| p == "all");
    for (c, col) in cell.test.columns.iter().enumerate() {
        if !(all_predictors || cfg.predictors.contains(&col.id)) {
            continue;
        }
        let flip = metrics::auc_labeled(&train_cols[c], &cell.train_labels)? < 0.5;
        let s: Vec<f64> = if flip { test_cols[c].iter().map(|v| -v).collect() } else { test_cols[c].clone() };
        let pr = top_share_pr(&s, &cell.test_labels, q)?;
        rows.push(ResultRow {
            network: net.name.clone(),
            seed,
            method: format!("pred:{}", col.id),
            auc: col_aucs[c],
            precision: pr.precision,
            recall: pr.recall,
            f1: pr.f1,
            oracle_auc: oracle,
            gap: gap(col_aucs[c]),
        });
    }

    if cfg.majority_vote {
        let cols: Vec<Vec<f64>> = (0..cell.test.cols())
            .filter(|&c| cell.test.columns[c].family == Family::Model)
            .map(|c| test_cols[c].clone())
            .collect();
        let votes = majority_vote(&cols, q)?;
        let auc = metrics::auc_labeled(&votes, &cell.test_labels)?;
        let pr = metrics::precision_recall(&votes, &cell.test_labels, (cols.len() as f64 / 2.0).max(1.0))?;
        rows.push(ResultRow {
            network: net.name.clone(),
            seed,
            method: "vote:M".into(),
            auc,
            precision: pr.precision,
            recall: pr.recall,
            f1: pr.f1,
            oracle_auc: oracle,
            gap: gap(auc),
        });
    }

    for (si, preset) in cfg.stacks.iter().enumerate() {
        let fams = parse_families(preset)?;
        let method = format!("stack:{}", family_code(&fams));
        let model = train_stack(&cell.train, &cell.train_labels, &fams, cfg.objective, &cfg.stack, rng::derive(cell_seed, 20 + si as u64))?;
        let ks: &[usize] = if si == 0 { &cfg.saturation_ks } else { &[] };
        let (mut report, _) = stack_report(&model, &cell, ks, method.clone())?;
        report.predictor_aucs = predictor_aucs
            .iter()
            .filter(|(id, _)| model.columns.iter().any(|c| &c.id == *id))
            .map(|(k, v)| (k.clone(), *v))
            .collect();
        rows.push(ResultRow {
            network: net.name.clone(),
            seed,
            method,
            auc: report.auc,
            precision: report.precision,
            recall: report.recall,
            f1: report.f1,
            oracle_auc: oracle,
            gap: gap(report.auc),
        });
        reports.push(report);
    }

    Ok(CellOutcome {
        rows,
        report: CellReport {
            network: net.name.clone(),
            seed,
            cell_seed,
            n: net.graph.node_count(),
            m: net.graph.edge_count(),
            holdout_edges: cell.split.holdout_edges.len(),
            training_rows: cell.train.rows(),
            test_rows: cell.test.rows(),
            columns: cell.test.columns.iter().map(|c| c.id.clone()).collect(),
            oracle_auc: oracle,
            oracle_stderr,
            oracle_method,
            reports,
            warnings,
        },
    })
}

/// Networks named by the config: inputs first, then synthetic rows
/// generated with `derive(seed, tag(name))` per seed.
pub fn load_inputs(cfg: &ExperimentConfig) -> Result<Vec<Network>> {
    let mut out = Vec::new();
    for input in &cfg.inputs {
        let (graph, _) = Graph::read_edge_list_file(&input.path)?;
        let name = input.name.clone().unwrap_or_else(|| {
            input.path.file_stem().and_then(|s| s.to_str()).unwrap_or("network").to_string()
        });
        out.push(Network {
            name,
            domain: input.domain.clone(),
            graph,
            planted: None,
        });
    }
    Ok(out)
}

/// Planted graph for a synthetic row at a given experiment seed.
pub fn synthetic_network(spec: &SyntheticSpec, seed: u64) -> Result<Network> {
    let planted = generate(spec, rng::derive(seed, rng::tag(&spec.name)))?;
    Ok(Network {
        name: spec.name.clone(),
        domain: Some("synthetic".into()),
        graph: planted.graph.clone(),
        planted: Some(planted),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub seeds: Vec<u64>,
    pub parallel_feature: bool,
    pub nondeterministic_embedding: bool,
    /// Every predictor column used, in table order.
    pub columns: Vec<String>,
    pub cells: usize,
    pub failures: Vec<String>,
}

#[derive(Debug)]
pub struct ExperimentOutput {
    pub dir: PathBuf,
    pub rows: Vec<ResultRow>,
    pub cells: Vec<CellReport>,
    pub failures: Vec<String>,
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Run every (network, seed) cell and write `results.csv`, `networks.csv`,
/// `manifest.json` and one JSON report per cell into `output_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let real = load_inputs(cfg)?;
    let specs = match &cfg.synthetic_suite {
        Some(s) => s.resolve()?,
        None => Vec::new(),
    };
    // (real network index | synthetic spec index, seed)
    enum Job<'a> {
        Real(&'a Network, u64),
        Synthetic(&'a SyntheticSpec, u64),
    }
    let mut jobs = Vec::new();
    for net in &real {
        for &s in &cfg.seeds {
            jobs.push(Job::Real(net, s));
        }
    }
    for spec in &specs {
        for &s in &cfg.seeds {
            jobs.push(Job::Synthetic(spec, s));
        }
    }

    // (network, seed, domain, n, m, outcome)
    type JobResult = (String, u64, Option<String>, usize, usize, Result<CellOutcome>);
    let results: Vec<JobResult> = par::with_workers(cfg.workers, || {
        par::map_slice(&jobs, |job| match job {
            Job::Real(net, s) => (
                net.name.clone(),
                *s,
                net.domain.clone(),
                net.graph.node_count(),
                net.graph.edge_count(),
                run_cell(net, *s, cfg),
            ),
            Job::Synthetic(spec, s) => match synthetic_network(spec, *s) {
                Ok(net) => (
                    net.name.clone(),
                    *s,
                    net.domain.clone(),
                    net.graph.node_count(),
                    net.graph.edge_count(),
                    run_cell(&net, *s, cfg),
                ),
                Err(e) => (spec.name.clone(), *s, Some("synthetic".into()), spec.n, 0, Err(e)),
            },
        })
    });

    let dir = cfg.output_dir.clone();
    let cells_dir = dir.join("cells");
    std::fs::create_dir_all(&cells_dir).map_err(|e| Error::io(&cells_dir, e))?;

    let mut rows = Vec::new();
    let mut cells = Vec::new();
    let mut failures = Vec::new();
    let mut networks: BTreeMap<String, (bool, usize, usize, Option<String>)> = BTreeMap::new();
    let mut columns: Vec<String> = Vec::new();
    for (name, seed, domain, n, m, res) in results {
        let synthetic = specs.iter().any(|s| s.name == name) && domain.as_deref() == Some("synthetic");
        networks.entry(name.clone()).or_insert((synthetic, n, m, domain));
        match res {
            Ok(out) => {
                if columns.is_empty() {
                    columns = out.report.columns.clone();
                }
                rows.extend(out.rows);
                cells.push(out.report);
            }
            Err(e) => failures.push(format!("{name} seed {seed}: {e}")),
        }
    }
    rows.sort_by(|a, b| (&a.network, a.seed, &a.method).cmp(&(&b.network, b.seed, &b.method)));
    cells.sort_by(|a, b| (&a.network, a.seed).cmp(&(&b.network, b.seed)));

    let mut csv = String::from(RESULTS_HEADER);
    csv.push('\n');
    for r in &rows {
        csv.push_str(&r.csv_line());
        csv.push('\n');
    }
    write_file(&dir.join("results.csv"), &csv)?;

    let mut net_csv = String::from(NETWORKS_HEADER);
    net_csv.push('\n');
    for (name, (synthetic, n, m, domain)) in &networks {
        let kind = if *synthetic { "synthetic" } else { "real" };
        net_csv.push_str(&format!("{name},{kind},{n},{m},{}\n", domain.clone().unwrap_or_default()));
    }
    write_file(&dir.join("networks.csv"), &net_csv)?;

    for c in &cells {
        let path = cells_dir.join(format!("{}__s{}.json", c.network, c.seed));
        write_file(&path, &(serde_json::to_string_pretty(c)? + "\n"))?;
        for r in &c.reports {
            if !r.saturation.is_empty() {
                let mut buf = Vec::new();
                metrics::write_saturation_csv(&r.saturation, &mut buf).map_err(|e| Error::io(&path, e))?;
                let p = cells_dir.join(format!("{}__s{}__{}__saturation.csv", c.network, c.seed, r.method.replace(':', "-")));
                write_file(&p, &String::from_utf8_lossy(&buf))?;
            }
            if let Some(l) = &r.lorenz {
                let mut buf = Vec::new();
                metrics::write_lorenz_csv(l, &mut buf).map_err(|e| Error::io(&path, e))?;
                let p = cells_dir.join(format!("{}__s{}__{}__lorenz.csv", c.network, c.seed, r.method.replace(':', "-")));
                write_file(&p, &String::from_utf8_lossy(&buf))?;
            }
        }
    }

    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config_hash: cfg.hash(),
        config: cfg.clone(),
        seeds: cfg.seeds.clone(),
        parallel_feature: par::parallel_enabled(),
        nondeterministic_embedding: cfg.embed.racy_parallel && par::parallel_enabled(),
        columns,
        cells: cells.len(),
        failures: failures.clone(),
    };
    write_file(&dir.join("manifest.json"), &(serde_json::to_string_pretty(&manifest)? + "\n"))?;
    Ok(ExperimentOutput {
        dir,
        rows,
        cells,
        failures,
    })
}

pub fn read_results(dir: &Path) -> Result<Vec<ResultRow>> {
    let path = dir.join("results.csv");
    let s = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let mut lines = s.lines();
    match lines.next() {
        Some(h) if h == RESULTS_HEADER => {}
        other => {
            return Err(Error::Config(format!(
                "{}: incompatible results schema (header {:?})",
                path.display(),
                other.unwrap_or("")
            )))
        }
    }
    lines.filter(|l| !l.is_empty()).map(ResultRow::parse).collect()
}

/// `name -> (m, domain)` from `networks.csv`.
pub fn read_networks(dir: &Path) -> Result<BTreeMap<String, (usize, Option<String>)>> {
    let path = dir.join("networks.csv");
    let s = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let mut lines = s.lines();
    if lines.next() != Some(NETWORKS_HEADER) {
        return Err(Error::Config(format!("{}: incompatible networks schema", path.display())));
    }
    let mut out = BTreeMap::new();
    for l in lines.filter(|l| !l.is_empty()) {
        let f: Vec<&str> = l.split(',').collect();
        if f.len() != 5 {
            return Err(Error::Config(format!("{}: bad row {l:?}", path.display())));
        }
        let m = f[3].parse().map_err(|_| Error::Config(format!("bad edge count in {l:?}")))?;
        let domain = if f[4].is_empty() { None } else { Some(f[4].to_string()) };
        out.insert(f[0].to_string(), (m, domain));
    }
    Ok(out)
}

pub fn size_bucket(m: usize) -> &'static str {
    if m < 200 {
        "m<200"
    } else if m <= 1000 {
        "200<=m<=1000"
    } else {
        "m>1000"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub method: String,
    pub group: String,
    pub count: usize,
    pub auc_mean: f64,
    pub auc_std: f64,
    pub auc_stderr: f64,
    pub gap_mean: Option<f64>,
    pub gap_count: usize,
}

/// Gap of the topological-and-model stack on the synthetic suite with the
/// full predictor set, for side-by-side reporting.
pub const REFERENCE_GAP_TM: f64 = 0.049;

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 {
        v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Mean and spread of AUC (and gap) per method, over all rows, per size
/// bucket and per domain tag.
pub fn summarize(dirs: &[PathBuf]) -> Result<Vec<SummaryRow>> {
    if dirs.is_empty() {
        return Err(Error::Empty("report directories"));
    }
    let mut groups: BTreeMap<(String, String), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for d in dirs {
        let rows = read_results(d)?;
        let nets = read_networks(d)?;
        for r in rows {
            let (m, domain) = nets
                .get(&r.network)
                .cloned()
                .ok_or_else(|| Error::Config(format!("{}: network {} missing from networks.csv", d.display(), r.network)))?;
            let mut keys = vec!["all".to_string(), format!("size:{}", size_bucket(m))];
            if let Some(dm) = domain {
                keys.push(format!("domain:{dm}"));
            }
            for k in keys {
                let e = groups.entry((r.method.clone(), k)).or_default();
                e.0.push(r.auc);
                if let Some(g) = r.gap {
                    e.1.push(g);
                }
            }
        }
    }
    Ok(groups
        .into_iter()
        .map(|((method, group), (aucs, gaps))| {
            let (mean, std) = mean_std(&aucs);
            SummaryRow {
                method,
                group,
                count: aucs.len(),
                auc_mean: mean,
                auc_std: std,
                auc_stderr: std / (aucs.len() as f64).sqrt(),
                gap_mean: if gaps.is_empty() { None } else { Some(mean_std(&gaps).0) },
                gap_count: gaps.len(),
            }
        })
        .collect())
}

pub fn write_summary<W: Write>(rows: &[SummaryRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "method,group,count,auc_mean,auc_std,auc_stderr,gap_mean,gap_count,reference_gap")?;
    for r in rows {
        let reference = if r.method == "stack:TM" && r.group == "domain:synthetic" {
            REFERENCE_GAP_TM.to_string()
        } else {
            String::new()
        };
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.method,
            r.group,
            r.count,
            r.auc_mean,
            r.auc_std,
            r.auc_stderr,
            r.gap_mean.map(|g| g.to_string()).unwrap_or_default(),
            r.gap_count,
            reference
        )?;
    }
    Ok(())
}

/// Mean AUC per method and edge-count bucket.
pub fn write_size_table<W: Write>(rows: &[SummaryRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "method,bucket,count,auc_mean,auc_stderr")?;
    for r in rows.iter().filter(|r| r.group.starts_with("size:")) {
        writeln!(w, "{},{},{},{},{}", r.method, &r.group[5..], r.count, r.auc_mean, r.auc_stderr)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(net: &str, method: &str, auc: f64, gap: Option<f64>) -> ResultRow {
        ResultRow {
            network: net.into(),
            seed: 0,
            method: method.into(),
            auc,
            precision: 0.5,
            recall: 0.25,
            f1: 1.0 / 3.0,
            oracle_auc: gap.map(|g| auc + g),
            gap,
        }
    }

    fn write_dir(dir: &Path, rows: &[ResultRow], nets: &[(&str, usize, &str)]) {
        let mut s = format!("{RESULTS_HEADER}\n");
        for r in rows {
            s += &r.csv_line();
            s.push('\n');
        }
        std::fs::write(dir.join("results.csv"), s).unwrap();
        let mut s = format!("{NETWORKS_HEADER}\n");
        for (name, m, domain) in nets {
            s += &format!("{name},real,10,{m},{domain}\n");
        }
        std::fs::write(dir.join("networks.csv"), s).unwrap();
    }

    #[test]
    fn result_rows_round_trip() {
        for r in [row("a", "stack:TM", 0.8125, None), row("b", "pred:JC", 0.6, Some(0.1))] {
            assert_eq!(ResultRow::parse(&r.csv_line()).unwrap(), r);
        }
        assert!(ResultRow::parse("a,1,x").is_err());
    }

    #[test]
    fn defaults_when_omitted() {
        let c = ExperimentConfig::from_json(r#"{"synthetic_suite": "builtin", "seeds": [1], "output_dir": "o"}"#).unwrap();
        assert_eq!(c.alpha, 0.8);
        assert_eq!(c.alpha_prime, 0.8);
        assert_eq!(c.negative_cap, None);
        assert_eq!(c.stacks, vec!["TM".to_string()]);
        assert_eq!(c.families_needed(), vec![Family::Topological, Family::Model]);
        assert_eq!(c.hash().len(), 64);
    }

    #[test]
    fn rejects_bad_configs() {
        for s in [
            r#"{"seeds": [1], "output_dir": "o"}"#,
            r#"{"synthetic_suite": "builtin", "seeds": [], "output_dir": "o"}"#,
            r#"{"synthetic_suite": "builtin", "seeds": [1], "output_dir": "o", "alpha": 1.5}"#,
            r#"{"synthetic_suite": "builtin", "seeds": [1], "output_dir": "o", "stacks": ["TX"]}"#,
            r#"{"synthetic_suite": ["no-such-row"], "seeds": [1], "output_dir": "o"}"#,
        ] {
            assert_eq!(ExperimentConfig::from_json(s).unwrap_err().category(), "config", "{s}");
        }
    }

    #[test]
    fn summary_means_across_reports() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        write_dir(a.path(), &[row("x", "stack:TM", 0.8, None)], &[("x", 150, "social")]);
        write_dir(b.path(), &[row("y", "stack:TM", 0.9, Some(0.05))], &[("y", 1500, "synthetic")]);
        let rows = summarize(&[a.path().to_path_buf(), b.path().to_path_buf()]).unwrap();
        let get = |g: &str| rows.iter().find(|r| r.group == g).unwrap();
        assert!((get("all").auc_mean - 0.85).abs() < 1e-12);
        assert_eq!(get("all").count, 2);
        assert_eq!(get("size:m<200").count, 1);
        assert_eq!(get("size:m>1000").count, 1);
        assert_eq!(get("domain:synthetic").gap_mean, Some(0.05));

        let mut out = Vec::new();
        write_summary(&rows, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.lines().any(|l| l.starts_with("stack:TM,domain:synthetic") && l.ends_with(",0.049")));
    }

    #[test]
    fn size_buckets_partition_edge_counts() {
        assert_eq!(size_bucket(199), "m<200");
        assert_eq!(size_bucket(200), "200<=m<=1000");
        assert_eq!(size_bucket(1000), "200<=m<=1000");
        assert_eq!(size_bucket(1001), "m>1000");
    }

    #[test]
    fn schema_mismatch_is_an_error() {
        let d = tempfile::tempdir().unwrap();
        std::fs::write(d.path().join("results.csv"), "network,auc\n").unwrap();
        assert!(read_results(d.path()).is_err());
    }
}
