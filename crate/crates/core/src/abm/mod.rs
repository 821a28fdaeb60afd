//! Agent-based cascade model on the short-term, long-term and securities
//! markets.
//!
//! A cascade starts from one defaulted bank and runs in cycles. Each cycle
//! books the losses from the previous cycle's defaults, marks constraint
//! violators as distressed, solves the roll-over fixed point (which fraction
//! of short-term claims every creditor refuses to renew), clears the
//! short-term market together with the fire sales it triggers, settles cash
//! and claims, and finally defaults every bank that could not pay or still
//! violates a constraint.
//!
//! Capital constraint: `γ_i = eq_i / (w_b R_i + Σ_μ s_iμ w_μ p_μ + C_te_i)
//! >= γ̄`, where `R_i` is the interbank risk-asset base. Liquidity
//! constraint: `c_i >= β (d_i + b_s_i + h_l_i)`.
//!
//! By default the risk-asset base is `l_l + l_s + u_a + h_a` and the
//! short-term claims that can be withdrawn are `l = l_s + h_a`. With
//! [`AbmParams::strict_paper_formulas`] every formula uses its verbatim
//! variant instead: `l_l + l_s + u_a` in the capital ratio, `l = l_s + u_a`
//! in the roll-over map and `l_l + l_s + h_a` in the capital sell-off.

mod cascade;
mod market;
mod rollover;
mod state;

pub use cascade::{
    book_defaults, run_cascade, run_cascade_at, sweep_markers, systemic_sweep, CascadeResult,
    CycleLog, SweepMarker,
};
pub use market::{
    fire_sale_clearing, fire_sale_clearing_traced, impacted_prices, price_update, sell_off,
    ClearingOutcome, SellOff,
};
pub use rollover::{rollover_fixed_point, rollover_map, RolloverOutcome};
pub use state::{AbmState, BankBalanceSheet, Status};

use thiserror::Error;

use crate::network::NetworkError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AbmError {
    #[error("{stage} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        stage: &'static str,
        iterations: usize,
        residual: f64,
    },
    #[error("cycle {cycle}: {source}")]
    InCycle {
        cycle: usize,
        #[source]
        source: Box<AbmError>,
    },
    #[error("unknown seed node `{0}`")]
    UnknownSeed(String),
    #[error("invalid parameter {name}: {reason}")]
    InvalidParam { name: &'static str, reason: String },
    #[error(transparent)]
    Network(#[from] NetworkError),
}

pub type Result<T, E = AbmError> = std::result::Result<T, E>;

/// How price impact is normalised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum PriceMode {
    /// Sales are measured against the initial float.
    Static,
    /// Sales are measured against the float left before the sale round,
    /// so repeated sales compound.
    #[default]
    Dynamic,
}

impl PriceMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PriceMode::Static => "static",
            PriceMode::Dynamic => "dynamic",
        }
    }
}

impl std::str::FromStr for PriceMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "static" => Ok(PriceMode::Static),
            "dynamic" => Ok(PriceMode::Dynamic),
            other => Err(format!("unknown price mode `{other}`")),
        }
    }
}

/// A parameter given either once for all banks or per bank.
#[derive(Debug, Clone, PartialEq)]
pub enum NodeParam {
    Uniform(f64),
    PerNode(Vec<f64>),
}

impl NodeParam {
    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        match self {
            NodeParam::Uniform(x) => *x,
            NodeParam::PerNode(v) => v[i],
        }
    }

    fn check(&self, name: &'static str, n: usize) -> Result<()> {
        let bad = |reason: String| Err(AbmError::InvalidParam { name, reason });
        match self {
            NodeParam::Uniform(x) if !(x.is_finite() && *x >= 0.0) => {
                bad(format!("{x} must be finite and non-negative"))
            }
            NodeParam::PerNode(v) if v.len() != n => {
                bad(format!("expected {n} values, got {}", v.len()))
            }
            NodeParam::PerNode(v) if v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) => {
                bad("values must be finite and non-negative".into())
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AbmParams {
    /// Risk weight of interbank assets.
    pub w_b: NodeParam,
    /// Liquidity buffer scaler.
    pub beta: f64,
    /// Minimum capital ratio.
    pub gamma_bar: f64,
    /// Risk-weighted assets outside the model.
    pub c_te: NodeParam,
    pub price_mode: PriceMode,
    /// Relative tolerance of both fixed-point iterations.
    pub fp_tol: f64,
    pub fp_max_iter: usize,
    /// Absolute slack on the capital ratio in the end-of-cycle test.
    pub constraint_tol: f64,
    pub strict_paper_formulas: bool,
}

impl Default for AbmParams {
    fn default() -> Self {
        Self {
            w_b: NodeParam::Uniform(0.2),
            beta: 0.05,
            gamma_bar: 0.10,
            c_te: NodeParam::Uniform(0.0),
            price_mode: PriceMode::Dynamic,
            fp_tol: 1e-10,
            fp_max_iter: 10_000,
            constraint_tol: 1e-9,
            strict_paper_formulas: false,
        }
    }
}

impl AbmParams {
    /// `γ̄ = 0` is accepted: it switches the capital constraint off except
    /// for negative equity.
    pub fn validate(&self, n: usize) -> Result<()> {
        let bad = |name, reason: String| Err(AbmError::InvalidParam { name, reason });
        if !(0.0..=1.0).contains(&self.beta) {
            return bad("beta", format!("{} outside [0, 1]", self.beta));
        }
        if !(0.0..1.0).contains(&self.gamma_bar) {
            return bad("gamma_bar", format!("{} outside [0, 1)", self.gamma_bar));
        }
        if !(self.fp_tol > 0.0 && self.fp_tol.is_finite()) {
            return bad("fp_tol", format!("{} must be positive", self.fp_tol));
        }
        if self.fp_max_iter == 0 {
            return bad("fp_max_iter", "must be at least 1".into());
        }
        if !(self.constraint_tol >= 0.0) {
            return bad(
                "constraint_tol",
                format!("{} is negative", self.constraint_tol),
            );
        }
        self.w_b.check("w_b", n)?;
        self.c_te.check("c_te", n)
    }
}

/// Capital ratio of every bank; `+∞` when a bank holds no risk assets.
pub fn capital_ratio(state: &AbmState, params: &AbmParams) -> Vec<f64> {
    let rw = state.holdings.risk_weighted_values();
    (0..state.n())
        .map(|i| {
            let s = &state.sheets[i];
            let denom = params.w_b.get(i) * s.risk_base(params.strict_paper_formulas)
                + rw[i]
                + params.c_te.get(i);
            if denom > 0.0 {
                s.eq / denom
            } else {
                f64::INFINITY
            }
        })
        .collect()
}

/// `c_i < β (d_i + b_s_i + h_l_i)` per bank.
pub fn liquidity_violation(state: &AbmState, params: &AbmParams) -> Vec<bool> {
    state
        .sheets
        .iter()
        .map(|s| s.c < params.beta * s.short_liabilities())
        .collect()
}
