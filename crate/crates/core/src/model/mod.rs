//! Model-based predictors: fit a community model to the observed graph,
//! then score pairs from the fitted parameters.

pub mod modularity;
pub mod partition;
pub mod sbm;
pub mod spectral;

pub use modularity::{fit_modularity, score_modularity};
pub use partition::Partition;
pub use sbm::{description_length, fit_sbm_mdl, fit_sbm_mdl_from, score_sbm, spectral_starts, SbmFit, SbmVariant};
pub use spectral::{fit_spectral_nb, BetheSpectrum, SpectralFit};

use crate::error::Result;
use crate::features::{Column, Family, PairFeatureTable};
use crate::graph::{Graph, Pair};
use crate::{par, rng};

pub const COLUMN_IDS: [&str; 4] = ["Q", "MDL-SBM", "MDL-DCSBM", "S-NB"];

pub fn columns() -> Vec<Column> {
    COLUMN_IDS.iter().map(|id| Column::new(*id, Family::Model)).collect()
}

/// The four fitted partitions, in column order.
#[derive(Debug, Clone)]
pub struct ModelFits {
    pub modularity: Partition,
    pub sbm: SbmFit,
    pub dcsbm: SbmFit,
    pub spectral: SpectralFit,
}

enum Fitted {
    Q(Partition),
    Sbm(SbmFit),
}

impl ModelFits {
    /// The Bethe-Hessian spectrum is computed once and shared: it gives
    /// the S-NB partition and warm starts for both MDL fits, which then
    /// run concurrently.
    pub fn fit(g: &Graph, seed: u64) -> Self {
        let spectrum = BetheSpectrum::compute(g, sbm::SPECTRAL_EXTRA);
        let spectral = SpectralFit {
            partition: spectrum.partition(g, spectrum.k_estimate, rng::derive(seed, 103)),
            k_estimate: spectrum.k_estimate,
            r: spectrum.r,
        };
        let starts = spectral_starts(g, &spectrum, rng::derive(seed, 104));
        let mut fits = par::map_range(3, |m| {
            let s = rng::derive(seed, 100 + m as u64);
            match m {
                0 => Fitted::Q(fit_modularity(g, s)),
                1 => Fitted::Sbm(fit_sbm_mdl_from(g, SbmVariant::Sbm, &starts, s)),
                _ => Fitted::Sbm(fit_sbm_mdl_from(g, SbmVariant::DcSbm, &starts, s)),
            }
        })
        .into_iter();
        let (Some(Fitted::Q(q)), Some(Fitted::Sbm(sbm)), Some(Fitted::Sbm(dcsbm))) = (fits.next(), fits.next(), fits.next())
        else {
            unreachable!("fits come back in order")
        };
        ModelFits {
            modularity: q,
            sbm,
            dcsbm,
            spectral,
        }
    }

    pub fn table(&self, g: &Graph, pairs: &[Pair]) -> Result<PairFeatureTable> {
        let cols = [
            score_modularity(&self.modularity, pairs),
            score_sbm(g, &self.sbm.partition, SbmVariant::Sbm, pairs),
            score_sbm(g, &self.dcsbm.partition, SbmVariant::DcSbm, pairs),
            score_sbm(g, &self.spectral.partition, SbmVariant::DcSbm, pairs),
        ];
        let mut values = Vec::with_capacity(pairs.len() * cols.len());
        for r in 0..pairs.len() {
            values.extend(cols.iter().map(|c| c[r]));
        }
        PairFeatureTable::new(pairs.to_vec(), columns(), values)
    }
}

pub fn model_table(g: &Graph, pairs: &[Pair], seed: u64) -> Result<PairFeatureTable> {
    ModelFits::fit(g, seed).table(g, pairs)
}
