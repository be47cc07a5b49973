use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use linkstack::experiment::{
    feature_table, prepare_cell, run_experiment, saturation_curve, summarize, write_size_table, write_summary,
    ExperimentConfig,
};
use linkstack::features::Family;
use linkstack::holdout::HoldoutSplit;
use linkstack::metrics::{self, write_saturation_csv, EvalReport};
use linkstack::oracle::{optimal_auc_exact, optimal_auc_mc_at, DEFAULT_SAMPLES};
use linkstack::stack::{parse_families, train_stack, Objective, StackedModel};
use linkstack::synth::{builtin_suite, find_spec, generate, SyntheticSpec};
use linkstack::{rng, Error, Graph};

#[derive(Parser)]
#[command(name = "linkstack", version, about = "Stacked link prediction with optimal-AUC bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate planted synthetic networks.
    Generate(GenerateArgs),
    /// Level-0 feature table for every non-edge of a graph.
    Features(FeaturesArgs),
    /// Hold out edges, train a stacked model, save it.
    Stack(StackArgs),
    /// Score a saved model on an observed graph and its held-out edges.
    Evaluate(EvaluateArgs),
    /// Optimal AUC of a synthetic spec.
    Oracle(OracleArgs),
    /// AUC of top-k importance sub-stacks.
    Saturate(SaturateArgs),
    /// Run a JSON-configured experiment.
    Experiment(ExperimentArgs),
    /// Aggregate one or more experiment directories.
    Summarize(SummarizeArgs),
}

#[derive(Args)]
struct SpecArgs {
    /// Builtin row name, e.g. low-poisson-k4.
    #[arg(long, conflicts_with = "spec_file")]
    spec: Option<String>,
    /// JSON file holding one spec.
    #[arg(long)]
    spec_file: Option<PathBuf>,
}

impl SpecArgs {
    fn resolve(&self) -> anyhow::Result<SyntheticSpec> {
        match (&self.spec, &self.spec_file) {
            (Some(name), _) => find_spec(name).ok_or_else(|| Error::Config(format!("unknown synthetic row {name:?}")).into()),
            (None, Some(p)) => {
                let s = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                let spec: SyntheticSpec = serde_json::from_str(&s).map_err(|e| Error::Config(e.to_string()))?;
                spec.validate()?;
                Ok(spec)
            }
            (None, None) => Err(Error::Config("give --spec or --spec-file".into()).into()),
        }
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    spec: SpecArgs,
    /// Generate every builtin row.
    #[arg(long, conflicts_with_all = ["spec", "spec_file"])]
    all: bool,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct HoldoutArgs {
    #[arg(long, default_value_t = 0.8)]
    alpha: f64,
    #[arg(long, default_value_t = 0.8)]
    alpha_prime: f64,
    /// Subsample training negatives to at most this many.
    #[arg(long)]
    negative_cap: Option<usize>,
    /// Trees per forest, in cross-validation and the final fit.
    #[arg(long, default_value_t = 100)]
    trees: usize,
    /// Family codes, e.g. TM.
    #[arg(long, default_value = "TM")]
    families: String,
}

impl HoldoutArgs {
    fn config(&self) -> anyhow::Result<ExperimentConfig> {
        let cfg = ExperimentConfig::from_json(
            &serde_json::json!({
                "synthetic_suite": [],
                "seeds": [0],
                "output_dir": "",
                "stack": {"trees": self.trees},
                "alpha": self.alpha,
                "alpha_prime": self.alpha_prime,
                "negative_cap": self.negative_cap,
                "stacks": [self.families],
            })
            .to_string(),
        )?;
        parse_families(&self.families)?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct FeaturesArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, default_value = "TME")]
    families: String,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct StackArgs {
    #[arg(long)]
    graph: PathBuf,
    #[command(flatten)]
    holdout: HoldoutArgs,
    #[arg(long, value_enum, default_value_t = ObjectiveArg::F1)]
    objective: ObjectiveArg,
    #[arg(long)]
    seed: u64,
    /// Output directory: model.json, observed.edges, holdout.edges.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum ObjectiveArg {
    F1,
    Auc,
}

impl From<ObjectiveArg> for Objective {
    fn from(o: ObjectiveArg) -> Self {
        match o {
            ObjectiveArg::F1 => Objective::F1,
            ObjectiveArg::Auc => Objective::Auc,
        }
    }
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    /// Observed graph the model is applied to.
    #[arg(long)]
    observed: PathBuf,
    /// Held-out edges, as an edge list with the same node tokens.
    #[arg(long)]
    holdout: PathBuf,
    #[arg(long)]
    seed: u64,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    samples: usize,
    #[arg(long, default_value_t = 0.8)]
    alpha: f64,
}

#[derive(Args)]
struct SaturateArgs {
    #[arg(long)]
    graph: PathBuf,
    #[command(flatten)]
    holdout: HoldoutArgs,
    /// Comma-separated sub-stack sizes.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6,7,8,9,10,11,12,13,14,15")]
    ks: Vec<usize>,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    /// Replaces the config's seed list; repeat for several seeds.
    #[arg(long)]
    seed: Vec<u64>,
    /// Overrides the config's worker count.
    #[arg(long)]
    workers: Option<usize>,
    /// Overrides the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SummarizeArgs {
    #[arg(required = true)]
    reports: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn read_graph(path: &Path) -> anyhow::Result<Graph> {
    let (g, report) = Graph::read_edge_list_file(path)?;
    if report.duplicates > 0 || report.self_loops > 0 {
        eprintln!(
            "{}: dropped {} duplicate edges and {} self-loops",
            path.display(),
            report.duplicates,
            report.self_loops
        );
    }
    Ok(g)
}

fn create(path: &Path) -> anyhow::Result<BufWriter<fs::File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    Ok(BufWriter::new(fs::File::create(path).map_err(|e| Error::io(path, e))?))
}

fn write_pairs(path: &Path, g: &Graph, pairs: &[(usize, usize)]) -> anyhow::Result<()> {
    use std::io::Write;
    let mut w = create(path)?;
    for &(i, j) in pairs {
        writeln!(w, "{} {}", g.label(i), g.label(j)).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Generate(a) => {
            let specs = if a.all { builtin_suite() } else { vec![a.spec.resolve()?] };
            for spec in specs {
                let pg = generate(&spec, rng::derive(a.seed, rng::tag(&spec.name)))?;
                pg.write(&a.out, &spec.name)?;
                for w in &pg.warnings {
                    eprintln!("{}: {w}", spec.name);
                }
                println!("{} n={} m={}", spec.name, pg.graph.node_count(), pg.graph.edge_count());
            }
        }
        Command::Features(a) => {
            let g = read_graph(&a.graph)?;
            let fams = parse_families(&a.families)?;
            let pairs: Vec<_> = g.non_edges().collect();
            let t = feature_table(&g, &pairs, &fams, &Default::default(), &Default::default(), a.seed)?;
            let mut w = create(&a.out)?;
            t.write_csv(Some(&g), &mut w).map_err(|e| Error::io(&a.out, e))?;
        }
        Command::Stack(a) => {
            let g = read_graph(&a.graph)?;
            let cfg = a.holdout.config()?;
            let fams = parse_families(&a.holdout.families)?;
            let cell = prepare_cell(&g, &cfg, &fams, a.seed)?;
            let model = train_stack(&cell.train, &cell.train_labels, &fams, a.objective.into(), &cfg.stack, rng::derive(a.seed, 20))?;
            fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
            let mp = a.out.join("model.json");
            fs::write(&mp, model.to_json()?).map_err(|e| Error::io(&mp, e))?;
            write_pairs(&a.out.join("observed.edges"), &g, cell.split.observed.edges())?;
            write_pairs(&a.out.join("holdout.edges"), &g, &cell.split.holdout_edges)?;
            println!("cv {:?} = {:.4}, threshold {:.2}", model.objective, model.cv_score, model.threshold);
        }
        Command::Evaluate(a) => {
            let s = fs::read_to_string(&a.model).map_err(|e| Error::io(&a.model, e))?;
            let model = StackedModel::from_json(&s)?;
            let observed = read_graph(&a.observed)?;
            let hs = fs::read_to_string(&a.holdout).map_err(|e| Error::io(&a.holdout, e))?;
            let index: std::collections::HashMap<String, usize> =
                (0..observed.node_count()).map(|i| (observed.label(i), i)).collect();
            let mut holdout = Vec::new();
            for (line_no, line) in hs.lines().enumerate() {
                let t: Vec<&str> = line.split_whitespace().collect();
                if t.is_empty() || t[0].starts_with('#') {
                    continue;
                }
                if t.len() != 2 {
                    return Err(Error::MalformedRecord { line: line_no + 1, found: t.len() }.into());
                }
                let (Some(&i), Some(&j)) = (index.get(t[0]), index.get(t[1])) else {
                    return Err(Error::Config(format!("holdout line {}: node not in the observed graph", line_no + 1)).into());
                };
                holdout.push(linkstack::graph::canonical(i, j));
            }
            holdout.sort_unstable();
            holdout.dedup();
            let split = HoldoutSplit { observed, holdout_edges: holdout, alpha: 0.8, seed: a.seed };
            let (pairs, labels) = linkstack::holdout::test_candidates(&split);
            let table = feature_table(&split.observed, &pairs, &model.families, &Default::default(), &Default::default(), rng::derive(a.seed, 4))?;
            let scores = model.predict_scores(&table)?;
            let auc = metrics::auc_labeled(&scores, &labels)?;
            let pr = metrics::precision_recall(&scores, &labels, model.threshold)?;
            let report = EvalReport {
                method: format!("stack:{}", linkstack::stack::family_code(&model.families)),
                auc,
                precision: pr.precision,
                recall: pr.recall,
                f1: pr.f1,
                threshold: model.threshold,
                no_predicted_positives: pr.no_predicted_positives,
                predictor_aucs: Default::default(),
                importances: model.gini_importances().into_iter().collect(),
                importance_entropy: metrics::importance_entropy(&model.importances).ok(),
                top_x: metrics::fit_top_x(&model.importances).ok(),
                family_entropy: metrics::family_entropy(
                    &model.importances,
                    &model.columns.iter().map(|c| Some(c.family)).collect::<Vec<Option<Family>>>(),
                )
                .ok(),
                lorenz: metrics::lorenz_gini(&model.importances).ok(),
                saturation: vec![],
                k_star: None,
            };
            let json = serde_json::to_string_pretty(&report)?;
            match a.out {
                Some(p) => fs::write(&p, json + "\n").map_err(|e| Error::io(&p, e))?,
                None => println!("{json}"),
            }
        }
        Command::Oracle(a) => {
            let spec = a.spec.resolve()?;
            match optimal_auc_exact(&spec) {
                Ok(v) => println!("{} closed-form {v}", spec.name),
                Err(Error::NoClosedForm(why)) => println!("{} closed-form unavailable ({why})", spec.name),
                Err(e) => return Err(e.into()),
            }
            let pg = generate(&spec, rng::derive(a.seed, rng::tag(&spec.name)))?;
            let est = optimal_auc_mc_at(&pg, a.alpha, a.samples, rng::derive(a.seed, 9))?;
            println!("{} monte-carlo {} +/- {} ({} samples)", spec.name, est.auc, est.stderr, est.samples);
        }
        Command::Saturate(a) => {
            let g = read_graph(&a.graph)?;
            let cfg = a.holdout.config()?;
            let fams = parse_families(&a.holdout.families)?;
            let cell = prepare_cell(&g, &cfg, &fams, a.seed)?;
            let model = train_stack(&cell.train, &cell.train_labels, &fams, Objective::F1, &cfg.stack, rng::derive(a.seed, 20))?;
            let curve = saturation_curve(&model, &cell, &a.ks)?;
            let full = curve.last().map(|p| p.auc).unwrap_or(0.0);
            let mut w = create(&a.out)?;
            write_saturation_csv(&curve, &mut w).map_err(|e| Error::io(&a.out, e))?;
            match metrics::k_star(&curve, full) {
                Some(k) => println!("k* = {k} (full AUC {full:.4})"),
                None => println!("no sub-stack reaches 95% of the full AUC {full:.4}"),
            }
        }
        Command::Experiment(a) => {
            let mut cfg = ExperimentConfig::load(&a.config)?;
            if !a.seed.is_empty() {
                cfg.seeds = a.seed;
            }
            if let Some(w) = a.workers {
                cfg.workers = w;
            }
            if let Some(o) = a.out {
                cfg.output_dir = o;
            }
            let out = run_experiment(&cfg)?;
            for f in &out.failures {
                eprintln!("cell failed: {f}");
            }
            println!("{} rows, {} cells -> {}", out.rows.len(), out.cells.len(), out.dir.display());
            if !out.failures.is_empty() {
                return Err(Error::Config(format!("{} cells failed", out.failures.len())).into());
            }
        }
        Command::Summarize(a) => {
            let rows = summarize(&a.reports)?;
            fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
            let p = a.out.join("summary.csv");
            write_summary(&rows, create(&p)?).map_err(|e| Error::io(&p, e))?;
            let p = a.out.join("auc_by_size.csv");
            write_size_table(&rows, create(&p)?).map_err(|e| Error::io(&p, e))?;
            println!("{} summary rows -> {}", rows.len(), a.out.display());
        }
    }
    Ok(())
}

fn exit_code(category: &str) -> u8 {
    match category {
        "input" => 2,
        "config" => 3,
        "insufficient-edges" => 4,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let category = e.downcast_ref::<Error>().map(Error::category).unwrap_or("runtime");
            eprintln!("error [{category}]: {e}");
            ExitCode::from(exit_code(category))
        }
    }
}
