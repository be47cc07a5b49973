//! Optimal link-prediction AUC for synthetic networks: closed forms where
//! they exist, Monte Carlo against the planted model otherwise.

use rand::Rng as _;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::holdout::{sample_holdout, HoldoutSplit};
use crate::synth::{GenModel, PlantedGraph, SyntheticSpec};
use crate::{par, rng};

pub const DEFAULT_SAMPLES: usize = 100_000;
/// Largest `epsilon` for which an SBM counts as deeply detectable.
pub const DDR_EPSILON: f64 = 0.05;
const CHUNK: usize = 10_000;

/// ER: 1/2. SBM with `epsilon <= DDR_EPSILON`: `(2k - 1) / (2k)`.
pub fn optimal_auc_exact(spec: &SyntheticSpec) -> Result<f64> {
    match spec.model {
        GenModel::Er { .. } => Ok(0.5),
        GenModel::Sbm { .. } if spec.k == 1 => Ok(0.5),
        GenModel::Sbm { .. } if spec.epsilon() <= DDR_EPSILON => {
            let k = spec.k as f64;
            Ok((2.0 * k - 1.0) / (2.0 * k))
        }
        GenModel::Sbm { .. } => Err(Error::NoClosedForm(format!(
            "{}: epsilon = {:.3} is outside the deep detectable regime",
            spec.name,
            spec.epsilon()
        ))),
        GenModel::DcEr { .. } | GenModel::DcSbm { .. } => Err(Error::NoClosedForm(format!(
            "{}: degree-corrected models have no closed form",
            spec.name
        ))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub auc: f64,
    pub stderr: f64,
    pub samples: usize,
}

/// Compares planted scores of uniformly drawn held-out edges against
/// uniformly drawn non-edges of the full graph; ties count one half.
pub fn optimal_auc_mc(planted: &PlantedGraph, split: &HoldoutSplit, samples: usize, seed: u64) -> Result<McEstimate> {
    let g = &planted.graph;
    let y = &split.holdout_edges;
    if y.is_empty() {
        return Err(Error::Empty("holdout edge set"));
    }
    if g.non_edge_count() == 0 {
        return Err(Error::Empty("non-edge set"));
    }
    if samples == 0 {
        return Err(Error::OutOfRange {
            name: "samples",
            value: 0.0,
            range: ">= 1",
        });
    }
    let n = g.node_count();
    let chunks = samples.div_ceil(CHUNK);
    // (wins, ties) per chunk; integer counts keep the reduction order-free
    let counts = par::map_range(chunks, |c| {
        let mut r = rng::stream(seed, 1000 + c as u64);
        let len = CHUNK.min(samples - c * CHUNK);
        let (mut wins, mut ties) = (0u64, 0u64);
        for _ in 0..len {
            let (a, b) = y[r.random_range(0..y.len())];
            let (i, j) = loop {
                let i = r.random_range(0..n);
                let j = r.random_range(0..n);
                if i != j && !g.has_edge(i, j) {
                    break (i, j);
                }
            };
            let (te, tne) = (planted.planted_score(a, b), planted.planted_score(i, j));
            if te > tne {
                wins += 1;
            } else if te == tne {
                ties += 1;
            }
        }
        (wins, ties)
    });
    let (wins, ties) = counts.iter().fold((0u64, 0u64), |a, b| (a.0 + b.0, a.1 + b.1));
    let s = samples as f64;
    let auc = (wins as f64 + 0.5 * ties as f64) / s;
    // outcomes are 0, 1/2 or 1
    let second = (wins as f64 + 0.25 * ties as f64) / s;
    let var = (second - auc * auc).max(0.0);
    Ok(McEstimate {
        auc,
        stderr: (var / s).sqrt(),
        samples,
    })
}

/// Draws its own holdout at rate `alpha` from the planted graph.
pub fn optimal_auc_mc_at(planted: &PlantedGraph, alpha: f64, samples: usize, seed: u64) -> Result<McEstimate> {
    let split = sample_holdout(&planted.graph, alpha, rng::derive(seed, 60))?;
    optimal_auc_mc(planted, &split, samples, seed)
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleReport<'a> {
    pub auc: f64,
    pub stderr: f64,
    pub samples: usize,
    pub spec: &'a SyntheticSpec,
    pub seed: u64,
}
