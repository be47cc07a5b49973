//! Level-0 predictor columns.

pub mod centrality;
pub mod lowrank;
pub mod table;
pub mod topo;

pub use table::{Column, Family, PairFeatureTable};
pub use lowrank::{low_rank_approx, LowRank};
pub use topo::{global_features, node_features, pairwise_scores, topological_table, GlobalFeatures, TopoConfig, TopoContext};
