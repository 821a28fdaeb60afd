use std::sync::Arc;

use super::{AbmError, Result};
use crate::holdings::HoldingsTable;
use crate::network::{MultiLayerNetwork, NodeSet, CS, LTC, STC, STF};

/// Simplified balance sheet of one bank, all stocks in EUR.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BankBalanceSheet {
    /// Cash.
    pub c: f64,
    /// External securities at market value; kept equal to `Σ_μ s_μ p_μ`.
    pub e: f64,
    /// Cross-securities held.
    pub u_a: f64,
    /// Cross-securities issued.
    pub u_l: f64,
    /// Long-term loans.
    pub l_l: f64,
    /// Long-term borrowings.
    pub b_l: f64,
    /// Short-term loans.
    pub l_s: f64,
    /// Short-term borrowings.
    pub b_s: f64,
    /// Repurchase agreements, asset side.
    pub h_a: f64,
    /// Short-term funding, liability side.
    pub h_l: f64,
    pub o_a: f64,
    pub o_l: f64,
    /// Deposits.
    pub d: f64,
    pub eq: f64,
}

impl BankBalanceSheet {
    /// Interbank assets carrying the interbank risk weight.
    #[inline]
    pub fn risk_base(&self, strict: bool) -> f64 {
        if strict {
            self.l_l + self.l_s + self.u_a
        } else {
            self.l_l + self.l_s + self.u_a + self.h_a
        }
    }

    /// Interbank assets left after the capital sell-off accounting.
    #[inline]
    pub fn sell_off_base(&self, strict: bool) -> f64 {
        if strict {
            self.l_l + self.l_s + self.h_a
        } else {
            self.risk_base(false)
        }
    }

    /// Short-term claims that can be withdrawn, `l`.
    #[inline]
    pub fn withdrawable(&self, strict: bool) -> f64 {
        let l = if strict {
            self.l_s + self.u_a
        } else {
            self.l_s + self.h_a
        };
        l.max(0.0)
    }

    /// `d + b_s + h_l`.
    #[inline]
    pub fn short_liabilities(&self) -> f64 {
        self.d + self.b_s + self.h_l
    }

    /// Scales the withdrawable claims by `keep`.
    fn shrink_withdrawable(&mut self, keep: f64, strict: bool) {
        self.l_s *= keep;
        if strict {
            self.u_a *= keep;
        } else {
            self.h_a *= keep;
        }
    }
}

/// Bank status; only ever moves upward during a cascade.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum Status {
    #[default]
    Normal = 0,
    Distress = 1,
    Default = 2,
}

/// Mutable state of one cascade.
///
/// Exposure matrices are dense row-major `n × n`; entry `[i][j]` is `i`'s
/// claim on `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct AbmState {
    pub nodes: Arc<NodeSet>,
    pub sheets: Vec<BankBalanceSheet>,
    pub holdings: HoldingsTable,
    pub phi: Vec<Status>,
    pub w_ltc: Vec<f64>,
    pub w_cs: Vec<f64>,
    pub w_stc: Vec<f64>,
    pub w_stf: Vec<f64>,
    pub cycle: usize,
    /// Portfolio frozen; set exactly for defaulted banks.
    pub frozen: Vec<bool>,
}

impl AbmState {
    /// Builds the initial state. External securities are recomputed from the
    /// holdings at current prices; a network without holdings has an empty
    /// securities market.
    pub fn from_network(net: &MultiLayerNetwork) -> Result<Self> {
        let holdings = match net.holdings() {
            Some(h) => h.clone(),
            None => HoldingsTable::new(net.nodes().clone(), vec![], vec![], vec![])?,
        };
        let bs = net.balance_sheets();
        let sheets = (0..net.n())
            .map(|i| BankBalanceSheet {
                c: bs.cash[i],
                e: bs.ext_securities[i],
                u_a: bs.cross_holdings_a[i],
                u_l: bs.cross_issued_l[i],
                l_l: bs.loans_lt[i],
                b_l: bs.borrow_lt[i],
                l_s: bs.loans_st[i],
                b_s: bs.borrow_st[i],
                h_a: bs.repo_a[i],
                h_l: bs.repo_l[i],
                o_a: bs.other_a[i],
                o_l: bs.other_l[i],
                d: bs.deposits[i],
                eq: bs.eq[i],
            })
            .collect();
        let dense = |name| net.layer(name).map(|m| m.weights().to_vec());
        Self::new(
            net.nodes().clone(),
            sheets,
            holdings,
            [dense(LTC)?, dense(CS)?, dense(STC)?, dense(STF)?],
        )
    }

    /// `layers` holds the `ltc`, `cs`, `stc` and `stf` matrices in that order.
    pub fn new(
        nodes: Arc<NodeSet>,
        mut sheets: Vec<BankBalanceSheet>,
        holdings: HoldingsTable,
        layers: [Vec<f64>; 4],
    ) -> Result<Self> {
        let n = nodes.len();
        let bad = |reason: String| {
            Err(AbmError::InvalidParam {
                name: "state",
                reason,
            })
        };
        if sheets.len() != n || holdings.banks() != n {
            return bad(format!("{n} nodes but {} balance sheets", sheets.len()));
        }
        if layers.iter().any(|w| w.len() != n * n) {
            return bad(format!("exposure matrices must be {n} x {n}"));
        }
        let e = holdings.market_values();
        for (s, e) in sheets.iter_mut().zip(e) {
            s.e = e;
        }
        let [w_ltc, w_cs, w_stc, w_stf] = layers;
        Ok(Self {
            nodes,
            sheets,
            holdings,
            phi: vec![Status::Normal; n],
            w_ltc,
            w_cs,
            w_stc,
            w_stf,
            cycle: 0,
            frozen: vec![false; n],
        })
    }

    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_defaulted(&self, i: usize) -> bool {
        self.phi[i] == Status::Default
    }

    /// Marks `i` as defaulted and freezes its portfolio.
    pub fn set_default(&mut self, i: usize) {
        self.phi[i] = Status::Default;
        self.frozen[i] = true;
    }

    /// Short-term debt matrix: entry `[i][j]` is what `i` owes `j` in the
    /// short-term credit and funding markets.
    pub fn short_term_debt(&self) -> Vec<f64> {
        let n = self.n();
        let mut debt = vec![0.0; n * n];
        for j in 0..n {
            for i in 0..n {
                debt[i * n + j] = self.w_stc[j * n + i] + self.w_stf[j * n + i];
            }
        }
        debt
    }

    pub(crate) fn shrink_withdrawable(&mut self, i: usize, keep: f64, strict: bool) {
        self.sheets[i].shrink_withdrawable(keep, strict);
    }

    /// Recomputes `e` from the holdings.
    pub(crate) fn refresh_security_values(&mut self) {
        for (s, e) in self.sheets.iter_mut().zip(self.holdings.market_values()) {
            s.e = e;
        }
    }
}
