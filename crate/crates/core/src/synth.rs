//! Synthetic networks with a planted partition: ER, SBM, and their
//! degree-corrected variants, plus the built-in 45-spec suite.

use std::io::Write;
use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::model::Partition;
use crate::rng;

/// Expected fraction of multi-edge mass lost to collapsing above which a
/// warning is recorded.
pub const MULTI_EDGE_WARNING: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DegreeDist {
    /// Poisson with mean `c`, conditioned on degree >= 1.
    Poisson { c: f64 },
    /// `f(r) ~ r^(beta-1) exp(-lambda r^beta)`.
    Weibull { lambda: f64, beta: f64 },
    /// `f(r) ~ r^(-exponent)`.
    PowerLaw { exponent: f64 },
}

impl DegreeDist {
    pub fn name(&self) -> &'static str {
        match self {
            DegreeDist::Poisson { .. } => "poisson",
            DegreeDist::Weibull { .. } => "weibull",
            DegreeDist::PowerLaw { .. } => "power_law",
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            DegreeDist::Poisson { c } => c > 0.0 && c.is_finite(),
            DegreeDist::Weibull { lambda, beta } => lambda > 0.0 && beta > 0.0 && lambda.is_finite() && beta.is_finite(),
            DegreeDist::PowerLaw { exponent } => exponent.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidSpec(format!("non-normalizable degree distribution {self:?}")))
        }
    }

    /// Normalized probabilities for degrees `1..=r_max` (index 0 is degree 1).
    pub fn pmf(&self, r_max: usize) -> Result<Vec<f64>> {
        self.validate()?;
        let r_max = r_max.max(1);
        let weights: Vec<f64> = (1..=r_max)
            .map(|r| {
                let r = r as f64;
                match *self {
                    DegreeDist::Poisson { c } => (r * c.ln() - c - libm::lgamma(r + 1.0)).exp(),
                    DegreeDist::Weibull { lambda, beta } => r.powf(beta - 1.0) * (-lambda * r.powf(beta)).exp(),
                    DegreeDist::PowerLaw { exponent } => r.powf(-exponent),
                }
            })
            .collect();
        let total: f64 = weights.iter().sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::InvalidSpec(format!("non-normalizable degree distribution {self:?}")));
        }
        Ok(weights.into_iter().map(|w| w / total).collect())
    }
}

/// Largest degree in the discretized support: the structural cutoff,
/// i.e. the fixed point of `r = sqrt(n * mean(r))` starting from `n - 1`.
/// Keeps the expected number of multi-edges between two hubs near one.
pub fn degree_support(dist: &DegreeDist, n: usize) -> Result<usize> {
    let top = n.saturating_sub(1).max(1);
    let mut r = top;
    for _ in 0..100 {
        let pmf = dist.pmf(r)?;
        let mean: f64 = pmf.iter().enumerate().map(|(i, p)| (i + 1) as f64 * p).sum();
        let next = ((n as f64 * mean).sqrt().floor() as usize).clamp(1, top);
        if next == r {
            break;
        }
        r = next;
    }
    Ok(r)
}

/// `n` degrees from `dist` on `1..=r_max` by inverse-CDF sampling.
pub fn sample_degree_sequence(dist: &DegreeDist, n: usize, r_max: usize, seed: u64) -> Result<Vec<usize>> {
    if n == 0 {
        return Err(Error::OutOfRange {
            name: "n",
            value: 0.0,
            range: ">= 1",
        });
    }
    let pmf = dist.pmf(r_max)?;
    let mut cdf = Vec::with_capacity(pmf.len());
    let mut acc = 0.0;
    for p in pmf {
        acc += p;
        cdf.push(acc);
    }
    let mut r = rng::stream(seed, 50);
    Ok((0..n)
        .map(|_| {
            let u = r.random::<f64>() * acc;
            cdf.partition_point(|&c| c <= u).min(cdf.len() - 1) + 1
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GenModel {
    Er { p: f64 },
    Sbm { p_in: f64, p_out: f64 },
    /// `omega` is informational; the generator always uses twice the
    /// sampled edge count.
    DcEr {
        degrees: DegreeDist,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        omega: Option<f64>,
    },
    DcSbm { degrees: DegreeDist, epsilon: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Low,
    Moderate,
    High,
    Custom,
}

impl Region {
    pub fn name(self) -> &'static str {
        match self {
            Region::Low => "low",
            Region::Moderate => "moderate",
            Region::High => "high",
            Region::Custom => "custom",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub name: String,
    pub region: Region,
    pub k: usize,
    pub n: usize,
    pub model: GenModel,
}

impl SyntheticSpec {
    pub fn degree_family(&self) -> &'static str {
        match &self.model {
            GenModel::Er { .. } | GenModel::Sbm { .. } => "poisson",
            GenModel::DcEr { degrees, .. } | GenModel::DcSbm { degrees, .. } => degrees.name(),
        }
    }

    /// `m_out / m_in`; for the SBM this is `(k - 1) p_out / p_in`.
    pub fn epsilon(&self) -> f64 {
        match self.model {
            GenModel::Er { .. } | GenModel::DcEr { .. } => 0.0,
            GenModel::Sbm { p_in, p_out } => (self.k as f64 - 1.0) * p_out / p_in,
            GenModel::DcSbm { epsilon, .. } => epsilon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(format!("{}: {msg}", self.name)));
        if self.n < 2 {
            return bad(format!("n = {} (need >= 2)", self.n));
        }
        if self.k == 0 || self.k > self.n {
            return bad(format!("k = {} outside 1..=n", self.k));
        }
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        match self.model {
            GenModel::Er { p } if !prob(p) => bad(format!("p = {p} outside [0, 1]")),
            GenModel::Er { .. } if self.k != 1 => bad("ER needs k = 1".into()),
            GenModel::Sbm { p_in, p_out } if !prob(p_in) || !prob(p_out) => {
                bad(format!("p_in = {p_in}, p_out = {p_out} outside [0, 1]"))
            }
            GenModel::DcEr { .. } if self.k != 1 => bad("DC-ER needs k = 1".into()),
            GenModel::DcEr { degrees, .. } => degrees.validate(),
            GenModel::DcSbm { epsilon, .. } if !(epsilon >= 0.0 && epsilon.is_finite()) => {
                bad(format!("epsilon = {epsilon} must be >= 0"))
            }
            GenModel::DcSbm { degrees, .. } => degrees.validate(),
            _ => Ok(()),
        }
    }
}

/// A generated graph together with everything needed to score pairs by
/// the planted model.
#[derive(Debug, Clone)]
pub struct PlantedGraph {
    pub spec: SyntheticSpec,
    pub seed: u64,
    pub graph: Graph,
    /// Planted type of each node, in `0..k`.
    pub types: Vec<usize>,
    pub partition: Partition,
    /// Target degree sequence (degree-corrected models only).
    pub degrees: Vec<usize>,
    /// Per-type target degree sums.
    pub type_degrees: Vec<f64>,
    /// k x k planted rates: edge probabilities (ER/SBM) or `omega_rs` (DC).
    pub block_rates: Vec<f64>,
    /// Expected fraction of Poisson edge mass lost by collapsing multi-edges.
    pub multi_edge_fraction: f64,
    pub warnings: Vec<String>,
}

impl PlantedGraph {
    pub fn is_degree_corrected(&self) -> bool {
        matches!(self.spec.model, GenModel::DcEr { .. } | GenModel::DcSbm { .. })
    }

    /// The planted model's score for pair `(i, j)`: edge probability for
    /// ER/SBM, Poisson rate `lambda_rs(d_i, d_j)` for the DC models.
    pub fn planted_score(&self, i: usize, j: usize) -> f64 {
        let k = self.spec.k;
        let (r, s) = (self.types[i], self.types[j]);
        let w = self.block_rates[r * k + s];
        if !self.is_degree_corrected() {
            return w;
        }
        let (dr, ds) = (self.type_degrees[r], self.type_degrees[s]);
        if dr == 0.0 || ds == 0.0 {
            return 0.0;
        }
        (self.degrees[i] as f64 / dr) * (self.degrees[j] as f64 / ds) * w
    }

    /// Edge list, `node,community` partition CSV, and a JSON manifest.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let edges = dir.join(format!("{stem}.edges"));
        let parts = dir.join(format!("{stem}.partition.csv"));
        let manifest = dir.join(format!("{stem}.json"));
        let f = std::fs::File::create(&edges).map_err(|e| Error::io(&edges, e))?;
        self.graph
            .write_edge_list(std::io::BufWriter::new(f))
            .map_err(|e| Error::io(&edges, e))?;
        let mut f = std::io::BufWriter::new(std::fs::File::create(&parts).map_err(|e| Error::io(&parts, e))?);
        writeln!(f, "node,community").map_err(|e| Error::io(&parts, e))?;
        for (i, t) in self.types.iter().enumerate() {
            writeln!(f, "{},{}", self.graph.label(i), t).map_err(|e| Error::io(&parts, e))?;
        }
        f.flush().map_err(|e| Error::io(&parts, e))?;
        let doc = serde_json::json!({
            "spec": self.spec,
            "seed": self.seed,
            "n": self.graph.node_count(),
            "m": self.graph.edge_count(),
            "edges_file": edges.file_name().and_then(|s| s.to_str()),
            "partition_file": parts.file_name().and_then(|s| s.to_str()),
            "multi_edge_fraction": self.multi_edge_fraction,
            "warnings": self.warnings,
            "content_hash": self.graph.content_hash(),
        });
        std::fs::write(&manifest, serde_json::to_string_pretty(&doc)? + "\n").map_err(|e| Error::io(&manifest, e))
    }
}

pub fn generate(spec: &SyntheticSpec, seed: u64) -> Result<PlantedGraph> {
    spec.validate()?;
    let (n, k) = (spec.n, spec.k);
    let mut r = rng::stream(seed, 51);
    let types: Vec<usize> = (0..n).map(|_| if k == 1 { 0 } else { r.random_range(0..k) }).collect();

    let (degrees, type_degrees, block_rates) = match spec.model {
        GenModel::Er { p } => (vec![], vec![], vec![p]),
        GenModel::Sbm { p_in, p_out } => {
            let rates = (0..k * k).map(|x| if x / k == x % k { p_in } else { p_out }).collect();
            (vec![], vec![], rates)
        }
        GenModel::DcEr { degrees, .. } | GenModel::DcSbm { degrees, .. } => {
            let d = sample_degree_sequence(&degrees, n, degree_support(&degrees, n)?, rng::derive(seed, 52))?;
            let mut td = vec![0.0; k];
            for (i, &t) in types.iter().enumerate() {
                td[t] += d[i] as f64;
            }
            let m = d.iter().sum::<usize>() as f64 / 2.0;
            let rates = if k == 1 {
                vec![2.0 * m]
            } else {
                let eps = spec.epsilon();
                let m_in = m / (1.0 + eps);
                let m_out = eps * m_in;
                let pairs = (k * (k - 1) / 2) as f64;
                (0..k * k)
                    .map(|x| if x / k == x % k { 2.0 * m_in / k as f64 } else { m_out / pairs })
                    .collect()
            };
            (d, td, rates)
        }
    };

    let mut planted = PlantedGraph {
        spec: spec.clone(),
        seed,
        graph: Graph::from_edges(n, std::iter::empty())?,
        partition: Partition::single_block(&Graph::from_edges(n, std::iter::empty())?),
        types,
        degrees,
        type_degrees,
        block_rates,
        multi_edge_fraction: 0.0,
        warnings: vec![],
    };

    let dc = planted.is_degree_corrected();
    let mut edges = Vec::new();
    let (mut rate_sum, mut kept_sum) = (0.0, 0.0);
    for i in 0..n {
        for j in i + 1..n {
            let score = planted.planted_score(i, j);
            let p = if dc {
                let kept = -(-score).exp_m1();
                rate_sum += score;
                kept_sum += kept;
                kept
            } else {
                score
            };
            if p > 0.0 && r.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    if dc && rate_sum > 0.0 {
        planted.multi_edge_fraction = 1.0 - kept_sum / rate_sum;
        if planted.multi_edge_fraction > MULTI_EDGE_WARNING {
            planted.warnings.push(format!(
                "{}: expected {:.1}% of edge mass collapsed as multi-edges",
                spec.name,
                100.0 * planted.multi_edge_fraction
            ));
        }
    }
    planted.graph = Graph::from_edges(n, edges)?;
    planted.partition = Partition::from_assignment(&planted.graph, &planted.types)?;
    Ok(planted)
}

fn row(region: Region, k: usize, n: usize, model: GenModel) -> SyntheticSpec {
    let family = match &model {
        GenModel::Er { .. } | GenModel::Sbm { .. } => "poisson",
        GenModel::DcEr { degrees, .. } | GenModel::DcSbm { degrees, .. } => degrees.name(),
    };
    SyntheticSpec {
        name: format!("{}-{}-k{}", region.name(), family.replace('_', ""), k),
        region,
        k,
        n,
        model,
    }
}

fn weibull(lambda: f64, beta: f64) -> DegreeDist {
    DegreeDist::Weibull { lambda, beta }
}

fn power(exponent: f64) -> DegreeDist {
    DegreeDist::PowerLaw { exponent }
}

/// The 45 parameterizations: 3 regions x {Poisson, Weibull, power law} x
/// k in {1, 2, 4, 16, 32}.
pub fn builtin_suite() -> Vec<SyntheticSpec> {
    use GenModel::*;
    use Region::*;
    let er = |p| Er { p };
    let sbm = |p_in, p_out| Sbm { p_in, p_out };
    let dcer = |degrees, omega| DcEr { degrees, omega: Some(omega) };
    let dcsbm = |degrees, epsilon| DcSbm { degrees, epsilon };
    vec![
        row(Low, 1, 505, er(0.008)),
        row(Low, 2, 512, sbm(0.03, 0.0003)),
        row(Low, 4, 512, sbm(0.06, 0.0003)),
        row(Low, 16, 512, sbm(0.25, 0.0003)),
        row(Low, 32, 512, sbm(0.49, 0.0003)),
        row(Low, 1, 497, dcer(weibull(1.0, 0.5), 2350.0)),
        row(Low, 2, 520, dcsbm(weibull(1.0, 0.4), 0.002)),
        row(Low, 4, 604, dcsbm(weibull(1.0, 0.4), 0.002)),
        row(Low, 16, 773, dcsbm(weibull(1.0, 0.4), 0.04)),
        row(Low, 32, 939, dcsbm(weibull(1.0, 0.15), 0.0005)),
        row(Low, 1, 507, dcer(power(1.6), 5436.0)),
        row(Low, 2, 511, dcsbm(power(1.7), 0.0003)),
        row(Low, 4, 511, dcsbm(power(1.8), 0.002)),
        row(Low, 16, 983, dcsbm(power(1.6), 0.0015)),
        row(Low, 32, 1029, dcsbm(power(1.41), 0.0015)),
        row(Moderate, 1, 511, er(0.016)),
        row(Moderate, 2, 512, sbm(0.03, 0.005)),
        row(Moderate, 4, 512, sbm(0.04, 0.006)),
        row(Moderate, 16, 512, sbm(0.16, 0.006)),
        row(Moderate, 32, 511, sbm(0.31, 0.006)),
        row(Moderate, 1, 510, dcer(weibull(1.0, 0.7), 1424.0)),
        row(Moderate, 2, 501, dcsbm(weibull(1.0, 0.4), 0.06)),
        row(Moderate, 4, 593, dcsbm(weibull(1.0, 0.4), 0.08)),
        row(Moderate, 16, 589, dcsbm(weibull(1.0, 0.4), 0.2)),
        row(Moderate, 32, 640, dcsbm(weibull(1.0, 0.22), 0.05)),
        row(Moderate, 1, 545, dcer(power(1.9), 1428.0)),
        row(Moderate, 2, 506, dcsbm(power(1.7), 0.05)),
        row(Moderate, 4, 540, dcsbm(power(1.8), 0.05)),
        row(Moderate, 16, 655, dcsbm(power(1.7), 0.01)),
        row(Moderate, 32, 702, dcsbm(power(1.41), 0.01)),
        row(High, 1, 512, er(0.03)),
        row(High, 2, 512, sbm(0.025, 0.006)),
        row(High, 4, 512, sbm(0.04, 0.007)),
        row(High, 16, 512, sbm(0.14, 0.007)),
        row(High, 32, 512, sbm(0.27, 0.007)),
        row(High, 1, 489, dcer(weibull(1.0, 0.9), 1216.0)),
        row(High, 2, 506, dcsbm(weibull(1.0, 0.4), 0.2)),
        row(High, 4, 590, dcsbm(weibull(1.0, 0.4), 0.32)),
        row(High, 16, 600, dcsbm(weibull(1.0, 0.4), 0.5)),
        row(High, 32, 631, dcsbm(weibull(1.0, 0.22), 0.13)),
        row(High, 1, 514, dcer(power(2.2), 1722.0)),
        row(High, 2, 536, dcsbm(power(1.7), 0.08)),
        row(High, 4, 526, dcsbm(power(1.8), 0.14)),
        row(High, 16, 626, dcsbm(power(1.7), 0.1)),
        row(High, 32, 673, dcsbm(power(1.5), 0.05)),
    ]
}

pub fn find_spec(name: &str) -> Option<SyntheticSpec> {
    builtin_suite().into_iter().find(|s| s.name == name)
}
