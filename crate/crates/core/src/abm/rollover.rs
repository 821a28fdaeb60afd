use super::{AbmError, AbmParams, AbmState, Result};

/// Least fixed point of the roll-over map.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloverOutcome {
    /// Fraction of each bank's short-term claims not rolled over.
    pub f: Vec<f64>,
    /// Short-term debt each bank is called to repay, `p̄_i = Σ_j debt_ij f_j`.
    pub p_bar: Vec<f64>,
    /// Withdrawals made to restore the liquidity constraint.
    pub r_liq: Vec<f64>,
    /// Withdrawals made to restore the capital constraint.
    pub r_cap: Vec<f64>,
    pub iterations: usize,
    /// `‖Φ(f) - f‖_∞` at the returned `f`.
    pub residual: f64,
}

/// Per-bank inputs of the roll-over map, fixed within one cycle.
pub(crate) struct RolloverProblem {
    n: usize,
    /// `debt[i][j]`: what `i` owes `j` short-term.
    pub(crate) debt: Vec<f64>,
    l: Vec<f64>,
    short_liab: Vec<f64>,
    cash: Vec<f64>,
    /// Capital-restoring target for `r_liq + r_cap` before clamping.
    cap_target: Vec<f64>,
    cap_active: Vec<bool>,
    active: Vec<bool>,
    beta: f64,
}

impl RolloverProblem {
    pub(crate) fn new(state: &AbmState, params: &AbmParams) -> Self {
        let n = state.n();
        let strict = params.strict_paper_formulas;
        let rw = state.holdings.risk_weighted_values();
        let mut cap_target = vec![0.0; n];
        let mut cap_active = vec![false; n];
        for i in 0..n {
            let s = &state.sheets[i];
            let gw = params.gamma_bar * params.w_b.get(i);
            if gw > 0.0 {
                // Solves eq / (w_b (R - r) + RW_sec + C_te) = γ̄ for r = r_liq + r_cap.
                cap_target[i] = (params.gamma_bar * (params.c_te.get(i) + rw[i])
                    + gw * s.risk_base(strict)
                    - s.eq)
                    / gw;
                cap_active[i] = true;
            }
        }
        Self {
            n,
            debt: state.short_term_debt(),
            l: state
                .sheets
                .iter()
                .map(|s| s.withdrawable(strict))
                .collect(),
            short_liab: state.sheets.iter().map(|s| s.short_liabilities()).collect(),
            cash: state.sheets.iter().map(|s| s.c).collect(),
            cap_target,
            cap_active,
            active: state.frozen.iter().map(|&fz| !fz).collect(),
            beta: params.beta,
        }
    }

    pub(crate) fn calls(&self, f: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = vec![0.0; n];
        for (i, xi) in x.iter_mut().enumerate() {
            let row = &self.debt[i * n..(i + 1) * n];
            *xi = row.iter().zip(f).map(|(d, fj)| d * fj).sum();
        }
        x
    }

    /// `(r_liq_i, r_cap_i)` given the calls `x_i` on bank `i`.
    fn withdrawals(&self, i: usize, x: f64) -> (f64, f64) {
        let l = self.l[i];
        let r_liq = (self.beta * (self.short_liab[i] - x) - self.cash[i]).clamp(0.0, l);
        let r_cap = if self.cap_active[i] {
            (self.cap_target[i] - r_liq).clamp(0.0, l - r_liq)
        } else {
            0.0
        };
        (r_liq, r_cap)
    }

    pub(crate) fn map(&self, f: &[f64]) -> Vec<f64> {
        let x = self.calls(f);
        (0..self.n)
            .map(|i| {
                if !self.active[i] {
                    return 0.0;
                }
                let (r_liq, r_cap) = self.withdrawals(i, x[i]);
                let c_buf = self.cash[i] - self.beta * (self.short_liab[i] - x[i]);
                let need = r_liq + r_cap + (x[i] - c_buf).max(0.0);
                let l = self.l[i];
                if l > 0.0 {
                    (need / l).min(1.0)
                } else if need > 0.0 {
                    1.0
                } else {
                    0.0
                }
            })
            .collect()
    }

    pub(crate) fn solve(&self, tol: f64, max_iter: usize) -> Result<RolloverOutcome> {
        let mut f = vec![0.0; self.n];
        let mut residual = f64::INFINITY;
        for k in 1..=max_iter {
            let next = self.map(&f);
            residual = sup_dist(&next, &f);
            f = next;
            if residual < tol {
                return Ok(self.outcome(f, k));
            }
        }
        Err(AbmError::NoConvergence {
            stage: "roll-over fixed point",
            iterations: max_iter,
            residual,
        })
    }

    fn outcome(&self, f: Vec<f64>, iterations: usize) -> RolloverOutcome {
        let residual = sup_dist(&self.map(&f), &f);
        let p_bar = self.calls(&f);
        let (r_liq, r_cap) = (0..self.n)
            .map(|i| {
                if self.active[i] {
                    self.withdrawals(i, p_bar[i])
                } else {
                    (0.0, 0.0)
                }
            })
            .unzip();
        RolloverOutcome {
            f,
            p_bar,
            r_liq,
            r_cap,
            iterations,
            residual,
        }
    }
}

pub(crate) fn sup_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// One application of the roll-over map `Φ` to `f`.
pub fn rollover_map(state: &AbmState, params: &AbmParams, f: &[f64]) -> Vec<f64> {
    RolloverProblem::new(state, params).map(f)
}

/// Iterates `Φ` upward from `f = 0` until the sup-norm change drops below
/// `fp_tol`. For `β <= 1/2` the map is monotone and the limit is its least
/// fixed point.
pub fn rollover_fixed_point(state: &AbmState, params: &AbmParams) -> Result<RolloverOutcome> {
    RolloverProblem::new(state, params).solve(params.fp_tol, params.fp_max_iter)
}
