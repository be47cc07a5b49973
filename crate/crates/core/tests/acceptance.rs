//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
//!
//! The synthetic-suite criteria share one experiment run whose outputs are
//! kept under the cargo target tmp dir for inspection.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use linkstack::experiment::{run_experiment, synthetic_network, ExperimentConfig, ExperimentOutput};
use linkstack::metrics::{auc, family_entropy, importance_entropy, lorenz_gini};
use linkstack::model::{fit_sbm_mdl, SbmVariant};
use linkstack::oracle::{optimal_auc_mc_at, DEFAULT_SAMPLES};
use linkstack::rng;
use linkstack::synth::{builtin_suite, find_spec, generate, GenModel, Region, SyntheticSpec};
use rand::Rng;

const SUITE_SEEDS: [u64; 3] = [0, 1, 2];

struct Outcome {
    pass: bool,
    detail: String,
}

fn out_dir(name: &str) -> PathBuf {
    let p = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance").join(name);
    let _ = std::fs::remove_dir_all(&p);
    p
}

fn data(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name).display().to_string()
}

fn config(v: serde_json::Value) -> ExperimentConfig {
    ExperimentConfig::from_json(&v.to_string()).expect("acceptance config")
}

fn method_means(out: &ExperimentOutput) -> BTreeMap<String, f64> {
    let mut acc: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for r in &out.rows {
        let e = acc.entry(r.method.clone()).or_default();
        e.0 += r.auc;
        e.1 += 1;
    }
    acc.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect()
}

fn oracle_agreement() -> Outcome {
    let mut rows: Vec<SyntheticSpec> = [2, 4, 16, 32]
        .iter()
        .map(|k| find_spec(&format!("low-poisson-k{k}")).unwrap())
        .collect();
    rows.push(SyntheticSpec {
        name: "low-poisson-k8".into(),
        region: Region::Low,
        k: 8,
        n: 512,
        model: GenModel::Sbm { p_in: 0.12, p_out: 0.0003 },
    });
    let mut pass = true;
    let mut parts = Vec::new();
    for spec in rows {
        let t = Instant::now();
        let k = spec.k as f64;
        let want = (2.0 * k - 1.0) / (2.0 * k);
        let pg = generate(&spec, rng::derive(0, rng::tag(&spec.name))).unwrap();
        let est = optimal_auc_mc_at(&pg, 0.8, DEFAULT_SAMPLES, 1).unwrap();
        let dt = t.elapsed();
        let ok = (est.auc - want).abs() <= 0.02 && dt < Duration::from_secs(60);
        pass &= ok;
        parts.push(format!("k={} mc={:.4} exact={:.4} {:.1}s", spec.k, est.auc, want, dt.as_secs_f64()));
    }
    Outcome { pass, detail: parts.join("; ") }
}

fn chance_floor() -> Outcome {
    let cfg = config(serde_json::json!({
        "synthetic_suite": ["low-poisson-k1"],
        "seeds": (0..10).collect::<Vec<u64>>(),
        "output_dir": out_dir("er"),
        "predictors": ["all"],
        "stacks": ["T", "M", "E", "TM", "TE", "ME", "TME"],
        "majority_vote": true,
        "negative_cap": 4000,
        "oracle_samples": 10000,
    }));
    let out = run_experiment(&cfg).unwrap();
    let means = method_means(&out);
    let worst = means
        .iter()
        .max_by(|a, b| (a.1 - 0.5).abs().total_cmp(&(b.1 - 0.5).abs()))
        .unwrap();
    Outcome {
        pass: out.failures.is_empty() && means.values().all(|m| (m - 0.5).abs() <= 0.05),
        detail: format!(
            "{} methods over 10 seeds, furthest from 0.5 is {} at {:.4}; {} failed cells",
            means.len(),
            worst.0,
            worst.1,
            out.failures.len()
        ),
    }
}

fn auc_exactness() -> Outcome {
    let mut r = rng::rng(2024);
    let mut mismatches = 0;
    for _ in 0..100 {
        let np = r.random_range(1..200);
        let nn = r.random_range(1..200);
        let levels = r.random_range(2..50) as f64;
        let mut draw = |n| (0..n).map(|_| (r.random::<f64>() * levels).floor()).collect::<Vec<f64>>();
        let pos = draw(np);
        let neg = draw(nn);
        let mut twice = 0u64;
        for &p in &pos {
            for &q in &neg {
                twice += if p > q { 2 } else if p == q { 1 } else { 0 };
            }
        }
        let brute = twice as f64 / (2 * np * nn) as f64;
        if auc(&pos, &neg).unwrap() != brute {
            mismatches += 1;
        }
    }
    Outcome {
        pass: mismatches == 0,
        detail: format!("{mismatches} mismatches on 100 tied score vectors"),
    }
}

struct Suite {
    out: ExperimentOutput,
    elapsed: Duration,
}

fn run_suite() -> Suite {
    let cfg = config(serde_json::json!({
        "synthetic_suite": "builtin",
        "seeds": SUITE_SEEDS,
        "output_dir": out_dir("suite"),
        "predictors": ["all"],
        "stacks": ["TM"],
        "negative_cap": 10000,
        "saturation_ks": (1..=15).collect::<Vec<usize>>(),
    }));
    let t = Instant::now();
    let out = run_experiment(&cfg).unwrap();
    Suite { out, elapsed: t.elapsed() }
}

fn suite_stacking(s: &Suite) -> Outcome {
    let tm: Vec<_> = s.out.rows.iter().filter(|r| r.method == "stack:TM").collect();
    let mean = tm.iter().map(|r| r.auc).sum::<f64>() / tm.len() as f64;
    let gaps: Vec<f64> = tm.iter().filter_map(|r| r.gap).collect();
    let gap = gaps.iter().sum::<f64>() / gaps.len() as f64;
    let expected = 45 * SUITE_SEEDS.len();
    let pass = tm.len() == expected
        && gaps.len() == expected
        && (0.73..=0.93).contains(&mean)
        && gap <= 0.12
        && s.elapsed < Duration::from_secs(2 * 3600);
    Outcome {
        pass,
        detail: format!(
            "{} cells, mean AUC {mean:.4}, mean gap {gap:.4}, {:.0} min",
            tm.len(),
            s.elapsed.as_secs_f64() / 60.0
        ),
    }
}

fn stacking_dominance(s: &Suite) -> Outcome {
    let means = method_means(&s.out);
    let tm = means["stack:TM"];
    let (best, best_auc) = means
        .iter()
        .filter(|(k, _)| k.starts_with("pred:"))
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    Outcome {
        pass: tm >= best_auc - 0.02,
        detail: format!("stack:TM {tm:.4} vs best single {best} {best_auc:.4}"),
    }
}

fn partition_recovery() -> Outcome {
    let mut hits = 0;
    let mut total = 0;
    let mut misses = Vec::new();
    for spec in builtin_suite().iter().filter(|s| s.region == Region::Low) {
        for &seed in &SUITE_SEEDS {
            let net = synthetic_network(spec, seed).unwrap();
            let fit = fit_sbm_mdl(&net.graph, SbmVariant::DcSbm, seed);
            total += 1;
            if fit.partition.k() == spec.k {
                hits += 1;
            } else {
                misses.push(format!("{} s{seed}: {}", spec.name, fit.partition.k()));
            }
        }
    }
    Outcome {
        pass: hits * 5 >= total * 4,
        detail: format!("{hits}/{total} recovered; misses [{}]", misses.join(", ")),
    }
}

fn saturation(s: &Suite) -> Outcome {
    let ks: Vec<Option<usize>> = s.out.cells.iter().map(|c| c.reports.iter().find(|r| r.method == "stack:TM").and_then(|r| r.k_star)).collect();
    let ok = ks.iter().filter(|k| k.is_some_and(|k| k <= 15)).count();
    let mut hist: BTreeMap<usize, usize> = BTreeMap::new();
    for k in ks.iter().flatten() {
        *hist.entry(*k).or_default() += 1;
    }
    Outcome {
        pass: !ks.is_empty() && ok * 5 >= ks.len() * 4,
        detail: format!("k* <= 15 on {ok}/{} instances; k* counts {hist:?}", ks.len()),
    }
}

fn golden_analytics() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (n, want) in [(203, 7.66), (42, 5.39), (11, 3.46), (150, 7.23)] {
        let h = importance_entropy(&vec![1.0 / n as f64; n]).unwrap();
        pass &= (h - want).abs() <= 0.01;
        parts.push(format!("H({n})={h:.3}"));
    }
    let g = lorenz_gini(&[0.25; 4]).unwrap().gini;
    pass &= g.abs() < 1e-12;
    parts.push(format!("gini={g}"));
    let groups: Vec<Option<u8>> = (0..9).map(|i| Some(i % 3)).collect();
    let f = family_entropy(&[1.0 / 9.0; 9], &groups).unwrap();
    pass &= (f - 1.58).abs() <= 0.01;
    parts.push(format!("family={f:.3}"));
    Outcome { pass, detail: parts.join(" ") }
}

fn determinism() -> Outcome {
    let run = |workers: usize| {
        let dir = out_dir(&format!("det-w{workers}"));
        run_experiment(&config(serde_json::json!({
            "inputs": [{"path": data("karate.edges"), "domain": "social"}],
            "synthetic_suite": ["moderate-weibull-k2", "low-poisson-k4"],
            "seeds": [5, 6],
            "output_dir": dir,
            "predictors": ["all"],
            "stacks": ["TM", "TME"],
            "majority_vote": true,
            "negative_cap": 3000,
            "oracle_samples": 20000,
            "saturation_ks": [1, 4],
            "workers": workers,
        })))
        .unwrap();
        std::fs::read(dir.join("results.csv")).unwrap()
    };
    let a = run(1);
    let b = run(8);
    Outcome {
        pass: a == b,
        detail: format!("results.csv {} bytes at 1 worker, {} at 8, identical: {}", a.len(), b.len(), a == b),
    }
}

fn karate_smoke() -> Outcome {
    let out = run_experiment(&config(serde_json::json!({
        "inputs": [{"path": data("karate.edges"), "domain": "social"}],
        "seeds": (0..20).collect::<Vec<u64>>(),
        "output_dir": out_dir("karate"),
        "predictors": ["JC"],
        "stacks": ["TM"],
    })))
    .unwrap();
    let means = method_means(&out);
    let tm = means["stack:TM"];
    let jc = means["pred:JC"];
    Outcome {
        pass: out.failures.is_empty() && tm > 0.6 && tm > jc,
        detail: format!("stack:TM {tm:.4}, Jaccard {jc:.4} over 20 seeds"),
    }
}

fn main() {
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut report = |n: usize, name: &'static str, o: Outcome| {
        println!("criterion {n:>2} {} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((n, name, o));
    };
    report(1, "oracle closed form vs monte carlo", oracle_agreement());
    report(2, "chance floor on ER", chance_floor());
    report(3, "AUC exactness", auc_exactness());
    let suite = run_suite();
    report(4, "synthetic suite stacking", suite_stacking(&suite));
    report(5, "stacking dominance", stacking_dominance(&suite));
    report(6, "planted partition recovery", partition_recovery());
    report(7, "saturation", saturation(&suite));
    report(8, "analytics golden values", golden_analytics());
    report(9, "determinism across worker counts", determinism());
    report(10, "karate smoke", karate_smoke());
    let failed: Vec<_> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!("{}/{} criteria pass", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        println!("failing: {failed:?}");
        std::process::exit(1);
    }
}
