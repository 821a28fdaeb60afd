//! DebtRank systemic importance in two calibrations.
//!
//! *Credit*: `w_ij = min(1, exposure_ij / eq_i)`, the fraction of `i`'s
//! capital lost if `j` defaults.
//! *Liquidity*: `w_ij = min(1, funding_ji / liq_i)` with
//! `liq_i = cash_i - β · deposits_i`, the fraction of `i`'s liquidity buffer
//! drained if `j` stops rolling over the funding it provides to `i`.
//!
//! Non-positive buffers map any positive exposure to the maximal weight 1.

mod engine;
mod sweep;

pub use engine::{run_debtrank, run_debtrank_at, DebtRankRun, DebtRankWorkspace};
pub use sweep::{
    debtrank_sweep, debtrank_sweep_layers, superposition_experiment, SuperpositionRow, SweepRow,
};

use std::sync::Arc;

use thiserror::Error;

use crate::network::{BalanceSheetVector, ExposureMatrix, NetworkError, NodeSet};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DebtRankError {
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("liquidity buffer scaler {0} outside [0, 1]")]
    BetaOutOfRange(f64),
    #[error("layer `{0}` has no positive weight")]
    EmptyLayer(String),
    #[error("unknown seed node `{0}`")]
    UnknownSeed(String),
    #[error("weights and economic values cover different node sets")]
    NodeSetMismatch,
    #[error("the liquidity calibration needs a buffer scaler")]
    MissingBeta,
    #[error(transparent)]
    Network(#[from] NetworkError),
}

pub type Result<T, E = DebtRankError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Calibration {
    Credit,
    Liquidity,
}

impl Calibration {
    pub fn as_str(self) -> &'static str {
        match self {
            Calibration::Credit => "credit",
            Calibration::Liquidity => "liquidity",
        }
    }

    /// Layers the calibration is applied to by default.
    pub fn default_layers(self) -> [&'static str; 2] {
        use crate::network::{CS, LTC, STC, STF};
        match self {
            Calibration::Credit => [LTC, CS],
            Calibration::Liquidity => [STC, STF],
        }
    }
}

impl std::str::FromStr for Calibration {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "credit" => Ok(Calibration::Credit),
            "liquidity" => Ok(Calibration::Liquidity),
            other => Err(format!("unknown calibration `{other}`")),
        }
    }
}

/// When a node counts as distressed and starts propagating.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum DistressTrigger {
    /// Any positive distress level (`h > 0`).
    #[default]
    AnyDistress,
    /// Only full default (`h = 1`).
    FullDefault,
}

impl DistressTrigger {
    #[inline]
    pub fn fires(self, h: f64) -> bool {
        match self {
            DistressTrigger::AnyDistress => h > 0.0,
            DistressTrigger::FullDefault => h >= 1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DistressTrigger::AnyDistress => "any-distress",
            DistressTrigger::FullDefault => "full-default",
        }
    }
}

impl std::str::FromStr for DistressTrigger {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "any-distress" => Ok(DistressTrigger::AnyDistress),
            "full-default" => Ok(DistressTrigger::FullDefault),
            other => Err(format!("unknown DebtRank mode `{other}`")),
        }
    }
}

/// Propagation-ready weight matrix with entries in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationWeights {
    nodes: Arc<NodeSet>,
    w: Vec<f64>,
    pub calibration: Calibration,
    pub source_layers: Vec<String>,
    pub beta: Option<f64>,
}

impl PropagationWeights {
    pub fn nodes(&self) -> &Arc<NodeSet> {
        &self.nodes
    }

    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.w[i * self.n() + j]
    }

    pub fn matrix(&self) -> &[f64] {
        &self.w
    }
}

/// `liq_i = cash_i - β · deposits_i`; may be non-positive.
#[derive(Debug, Clone, PartialEq)]
pub struct LiquidityBuffers {
    pub liq: Vec<f64>,
    pub beta: f64,
}

/// Relative economic value of each node, summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct EconomicValueVector {
    pub v: Vec<f64>,
}

#[inline]
fn capped_ratio(exposure: f64, buffer: f64) -> f64 {
    if exposure <= 0.0 {
        0.0
    } else if buffer <= 0.0 {
        1.0
    } else {
        (exposure / buffer).min(1.0)
    }
}

pub fn credit_weights(layer: &ExposureMatrix, eq: &[f64]) -> Result<PropagationWeights> {
    let n = layer.n();
    if eq.len() != n {
        return Err(DebtRankError::LengthMismatch {
            expected: n,
            actual: eq.len(),
        });
    }
    let mut w = vec![0.0; n * n];
    for i in 0..n {
        for (j, &x) in layer.row(i).iter().enumerate() {
            w[i * n + j] = capped_ratio(x, eq[i]);
        }
    }
    Ok(PropagationWeights {
        nodes: layer.nodes().clone(),
        w,
        calibration: Calibration::Credit,
        source_layers: vec![layer.layer_id().to_string()],
        beta: None,
    })
}

pub fn liquidity_buffers(bs: &BalanceSheetVector, beta: f64) -> Result<LiquidityBuffers> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(DebtRankError::BetaOutOfRange(beta));
    }
    if bs.deposits.len() != bs.cash.len() {
        return Err(DebtRankError::LengthMismatch {
            expected: bs.cash.len(),
            actual: bs.deposits.len(),
        });
    }
    let liq = bs
        .cash
        .iter()
        .zip(&bs.deposits)
        .map(|(c, d)| c - beta * d)
        .collect();
    Ok(LiquidityBuffers { liq, beta })
}

/// Note the transpose: the funding `j` provides to `i` (`layer[j][i]`)
/// drives `i`'s shortfall when `j` defaults.
pub fn liquidity_weights(
    layer: &ExposureMatrix,
    liq: &LiquidityBuffers,
) -> Result<PropagationWeights> {
    let n = layer.n();
    if liq.liq.len() != n {
        return Err(DebtRankError::LengthMismatch {
            expected: n,
            actual: liq.liq.len(),
        });
    }
    let mut w = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            w[i * n + j] = capped_ratio(layer.get(j, i), liq.liq[i]);
        }
    }
    Ok(PropagationWeights {
        nodes: layer.nodes().clone(),
        w,
        calibration: Calibration::Liquidity,
        source_layers: vec![layer.layer_id().to_string()],
        beta: Some(liq.beta),
    })
}

/// `v_i = Σ_j w_ij / Σ_ij w_ij`.
pub fn economic_value(layer: &ExposureMatrix) -> Result<EconomicValueVector> {
    let total = layer.total_weight();
    if !(total > 0.0) {
        return Err(DebtRankError::EmptyLayer(layer.layer_id().to_string()));
    }
    let v = (0..layer.n()).map(|i| layer.row_sum(i) / total).collect();
    Ok(EconomicValueVector { v })
}
