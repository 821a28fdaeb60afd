//! Multilayer interbank exposure networks and two contagion frameworks on
//! top of them: DebtRank in a credit and a liquidity calibration, and a
//! micro-structural agent-based cascade with roll-over decisions, fire sales
//! and endogenous prices.
//!
//! Module map:
//! - [`network`]: node sets, exposure layers, projection and flattening
//! - [`ingest`]: CSV bundles and the synthetic core–periphery generator
//! - [`topology`]: degree profiles, centralities, kernel density curves
//! - [`debtrank`]: propagation weights, the recursion, sweeps
//! - [`abm`]: the agent-based cascade model

pub mod abm;
pub mod debtrank;
pub mod holdings;
pub mod ingest;
pub mod network;
pub mod topology;

pub use holdings::HoldingsTable;
pub use network::{
    build_layer, flatten, project_overlap, symmetrize, BalanceSheetVector, ExposureMatrix,
    MultiLayerNetwork, NetworkError, NodeSet,
};
