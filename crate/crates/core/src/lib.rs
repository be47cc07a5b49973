//! Stacked link prediction for simple undirected networks.
//!
//! Level-0 predictors come in three families (topological, model-based and
//! embedding-based); a random forest stacks them. Synthetic networks with a
//! planted partition come with Monte-Carlo and closed-form optimal-AUC
//! bounds, so the gap between a predictor and the best achievable accuracy
//! can be measured directly.

pub mod embed;
pub mod error;
pub mod experiment;
pub mod forest;
pub mod features;
pub mod graph;
pub mod holdout;
pub mod metrics;
pub mod model;
pub mod par;
pub mod oracle;
pub mod rng;
pub mod stack;
pub mod synth;

pub use error::{Error, Result};
pub use graph::{Graph, Pair};
