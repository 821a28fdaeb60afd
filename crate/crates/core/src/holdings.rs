//! Bank × security holdings with prices and per-security market parameters.

use std::sync::Arc;

use crate::network::{NetworkError, NodeSet, Result};

/// Default price-impact coefficient per security.
pub const DEFAULT_ALPHA: f64 = 0.2;
/// Default risk weight per security.
pub const DEFAULT_SECURITY_RISK_WEIGHT: f64 = 0.1;

/// Issuer-level holdings matrix `S` (n × m, row-major) and price vector `P`.
///
/// `initial` keeps the quantities at construction time; sales only ever
/// reduce `quantities`, so `quantities <= initial` elementwise.
#[derive(Debug, Clone, PartialEq)]
pub struct HoldingsTable {
    nodes: Arc<NodeSet>,
    security_ids: Vec<String>,
    quantities: Vec<f64>,
    initial: Vec<f64>,
    prices: Vec<f64>,
    alpha: Vec<f64>,
    risk_weights: Vec<f64>,
}

impl HoldingsTable {
    pub fn new(
        nodes: Arc<NodeSet>,
        security_ids: Vec<String>,
        quantities: Vec<f64>,
        prices: Vec<f64>,
    ) -> Result<Self> {
        let n = nodes.len();
        let m = security_ids.len();
        if quantities.len() != n * m {
            return Err(NetworkError::LengthMismatch {
                expected: n * m,
                actual: quantities.len(),
            });
        }
        if prices.len() != m {
            return Err(NetworkError::LengthMismatch {
                expected: m,
                actual: prices.len(),
            });
        }
        for (mu, &p) in prices.iter().enumerate() {
            if !p.is_finite() || p <= 0.0 {
                return Err(NetworkError::NonPositivePrice(security_ids[mu].clone()));
            }
        }
        for (k, &q) in quantities.iter().enumerate() {
            if !q.is_finite() || q < 0.0 {
                return Err(NetworkError::InvalidMatrix {
                    layer: "holdings".into(),
                    reason: format!(
                        "quantity {q} of `{}` held by `{}`",
                        security_ids[k % m],
                        nodes.id(k / m)
                    ),
                });
            }
        }
        Ok(Self {
            nodes,
            initial: quantities.clone(),
            quantities,
            prices,
            alpha: vec![DEFAULT_ALPHA; m],
            risk_weights: vec![DEFAULT_SECURITY_RISK_WEIGHT; m],
            security_ids,
        })
    }

    pub(crate) fn with_nodes(self, nodes: Arc<NodeSet>) -> Self {
        Self { nodes, ..self }
    }

    /// Sets uniform market narrowness and risk weight for every security.
    pub fn set_uniform_market_params(&mut self, alpha: f64, risk_weight: f64) {
        self.alpha.iter_mut().for_each(|a| *a = alpha);
        self.risk_weights.iter_mut().for_each(|w| *w = risk_weight);
    }

    pub fn set_alpha(&mut self, alpha: Vec<f64>) -> Result<()> {
        if alpha.len() != self.securities() {
            return Err(NetworkError::LengthMismatch {
                expected: self.securities(),
                actual: alpha.len(),
            });
        }
        self.alpha = alpha;
        Ok(())
    }

    pub fn set_risk_weights(&mut self, risk_weights: Vec<f64>) -> Result<()> {
        if risk_weights.len() != self.securities() {
            return Err(NetworkError::LengthMismatch {
                expected: self.securities(),
                actual: risk_weights.len(),
            });
        }
        self.risk_weights = risk_weights;
        Ok(())
    }

    pub fn nodes(&self) -> &Arc<NodeSet> {
        &self.nodes
    }

    pub fn banks(&self) -> usize {
        self.nodes.len()
    }

    pub fn securities(&self) -> usize {
        self.security_ids.len()
    }

    pub fn security_ids(&self) -> &[String] {
        &self.security_ids
    }

    pub fn security_position(&self, id: &str) -> Option<usize> {
        self.security_ids.iter().position(|s| s == id)
    }

    pub fn quantities(&self) -> &[f64] {
        &self.quantities
    }

    pub fn initial_quantities(&self) -> &[f64] {
        &self.initial
    }

    #[inline]
    pub fn quantity(&self, i: usize, mu: usize) -> f64 {
        self.quantities[i * self.securities() + mu]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let m = self.securities();
        &self.quantities[i * m..(i + 1) * m]
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn risk_weights(&self) -> &[f64] {
        &self.risk_weights
    }

    /// Market value of each bank's portfolio, `E = S P`.
    pub fn market_values(&self) -> Vec<f64> {
        (0..self.banks())
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(&self.prices)
                    .map(|(s, p)| s * p)
                    .sum()
            })
            .collect()
    }

    /// Risk-weighted market value of each bank's portfolio, `S (w^s · P)`.
    pub fn risk_weighted_values(&self) -> Vec<f64> {
        (0..self.banks())
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(&self.prices)
                    .zip(&self.risk_weights)
                    .map(|((s, p), w)| s * w * p)
                    .sum()
            })
            .collect()
    }

    /// Column sums of the current quantities.
    pub fn float(&self) -> Vec<f64> {
        column_sums(&self.quantities, self.securities())
    }

    /// Column sums of the initial quantities.
    pub fn initial_float(&self) -> Vec<f64> {
        column_sums(&self.initial, self.securities())
    }

    /// Replaces quantities and prices after a sale round. The caller keeps
    /// the `0 <= quantities <= initial` and `prices > 0` invariants.
    pub(crate) fn set_market(&mut self, quantities: Vec<f64>, prices: Vec<f64>) {
        debug_assert_eq!(quantities.len(), self.quantities.len());
        debug_assert_eq!(prices.len(), self.prices.len());
        self.quantities = quantities;
        self.prices = prices;
    }
}

pub(crate) fn column_sums(matrix: &[f64], m: usize) -> Vec<f64> {
    let mut out = vec![0.0; m];
    if m == 0 {
        return out;
    }
    for row in matrix.chunks_exact(m) {
        for (acc, x) in out.iter_mut().zip(row) {
            *acc += x;
        }
    }
    out
}
