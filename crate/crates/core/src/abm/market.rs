use super::rollover::{sup_dist, RolloverOutcome};
use super::{AbmError, AbmParams, AbmState, PriceMode, Result};
use crate::holdings::{column_sums, HoldingsTable};

/// Securities sold by every bank for given repayments and prices.
#[derive(Debug, Clone, PartialEq)]
pub struct SellOff {
    /// Quantities sold, `n × m` row-major; `0 <= z <= s`.
    pub z: Vec<f64>,
    /// Sale proceeds per bank at the prices the sale was sized with.
    pub liquidity_raised: Vec<f64>,
    /// EUR needed to meet short-term repayments.
    pub need_interbank: Vec<f64>,
    /// EUR needed to restore the liquidity buffer.
    pub need_liquidity: Vec<f64>,
    /// EUR of sales needed to restore the capital ratio.
    pub need_capital: Vec<f64>,
}

/// Result of clearing the short-term market together with fire sales.
#[derive(Debug, Clone, PartialEq)]
pub struct ClearingOutcome {
    /// Clearing vector, `0 <= p <= p̄`.
    pub p: Vec<f64>,
    pub p_bar: Vec<f64>,
    /// Cumulative quantities sold this cycle, `n × m`.
    pub z: Vec<f64>,
    pub prices: Vec<f64>,
    pub iterations: usize,
    /// Sup-norm change of `p` in the last iteration.
    pub residual: f64,
    /// Components where the clearing map exceeded the previous iterate and
    /// was capped by it, summed over iterations.
    pub capped_increases: usize,
    /// Every iterate of `p`, starting with `p̄`; only filled when traced.
    pub history: Vec<Vec<f64>>,
}

/// `p'_μ = p_μ exp(-α_μ sold_μ / float_μ)`; a zero float leaves the price
/// unchanged.
pub fn impacted_prices(prices: &[f64], alpha: &[f64], sold: &[f64], float: &[f64]) -> Vec<f64> {
    prices
        .iter()
        .zip(alpha)
        .zip(sold.iter().zip(float))
        .map(|((&p, &a), (&z, &s))| {
            let delta = if s > 0.0 { z / s } else { 0.0 };
            p * (-a * delta).exp()
        })
        .collect()
}

/// Applies one sale round `z` (`n × m`) to the holdings and returns the new
/// prices.
pub fn price_update(holdings: &mut HoldingsTable, z: &[f64], mode: PriceMode) -> Vec<f64> {
    let m = holdings.securities();
    let float = match mode {
        PriceMode::Static => holdings.initial_float(),
        PriceMode::Dynamic => holdings.float(),
    };
    let sold = column_sums(z, m);
    let prices = impacted_prices(holdings.prices(), holdings.alpha(), &sold, &float);
    let quantities = holdings
        .quantities()
        .iter()
        .zip(z)
        .map(|(s, z)| (s - z).max(0.0))
        .collect();
    holdings.set_market(quantities, prices.clone());
    prices
}

/// Inputs of the clearing problem, fixed within one cycle.
struct ClearingProblem<'a> {
    n: usize,
    m: usize,
    holdings: &'a HoldingsTable,
    float: Vec<f64>,
    debt: Vec<f64>,
    f: Vec<f64>,
    p_bar: Vec<f64>,
    cash: Vec<f64>,
    c_buf: Vec<f64>,
    need_liquidity: Vec<f64>,
    eq: Vec<f64>,
    /// Interbank risk assets left after withdrawals.
    interbank_left: Vec<f64>,
    w_b: Vec<f64>,
    c_te: Vec<f64>,
    gamma_bar: f64,
    active: Vec<bool>,
}

impl<'a> ClearingProblem<'a> {
    fn new(state: &'a AbmState, params: &AbmParams, roll: &RolloverOutcome) -> Self {
        let n = state.n();
        let holdings = &state.holdings;
        let strict = params.strict_paper_formulas;
        let float = match params.price_mode {
            PriceMode::Static => holdings.initial_float(),
            PriceMode::Dynamic => holdings.float(),
        };
        let sheets = &state.sheets;
        let c_buf = (0..n)
            .map(|i| sheets[i].c - params.beta * (sheets[i].short_liabilities() - roll.p_bar[i]))
            .collect();
        let need_liquidity = (0..n)
            .map(|i| {
                (params.beta * (sheets[i].short_liabilities() - roll.p_bar[i]) - sheets[i].c)
                    .max(0.0)
            })
            .collect();
        let interbank_left = (0..n)
            .map(|i| (sheets[i].sell_off_base(strict) - roll.r_liq[i] - roll.r_cap[i]).max(0.0))
            .collect();
        Self {
            n,
            m: holdings.securities(),
            holdings,
            float,
            debt: state.short_term_debt(),
            f: roll.f.clone(),
            p_bar: roll.p_bar.clone(),
            cash: sheets.iter().map(|s| s.c).collect(),
            c_buf,
            need_liquidity,
            eq: sheets.iter().map(|s| s.eq).collect(),
            interbank_left,
            w_b: (0..n).map(|i| params.w_b.get(i)).collect(),
            c_te: (0..n).map(|i| params.c_te.get(i)).collect(),
            gamma_bar: params.gamma_bar,
            active: state.frozen.iter().map(|&fz| !fz).collect(),
        }
    }

    /// Payments each bank receives, `(Π^T p)_j = f_j Σ_i debt_ij p_i / p̄_i`.
    fn incoming(&self, p: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut inc = vec![0.0; n];
        for i in 0..n {
            if self.p_bar[i] <= 0.0 {
                continue;
            }
            let ratio = p[i] / self.p_bar[i];
            let row = &self.debt[i * n..(i + 1) * n];
            for (j, &d) in row.iter().enumerate() {
                if d > 0.0 {
                    inc[j] += d * self.f[j] * ratio;
                }
            }
        }
        inc
    }

    fn sell_off(&self, p: &[f64], prices: &[f64]) -> SellOff {
        let (n, m) = (self.n, self.m);
        let start = self.holdings.prices();
        let w_s = self.holdings.risk_weights();
        let incoming = self.incoming(p);
        let mut out = SellOff {
            z: vec![0.0; n * m],
            liquidity_raised: vec![0.0; n],
            need_interbank: vec![0.0; n],
            need_liquidity: vec![0.0; n],
            need_capital: vec![0.0; n],
        };
        let mut eta = vec![0.0; m];
        let mut left = vec![0.0; m];
        for i in 0..n {
            if !self.active[i] {
                continue;
            }
            let s = self.holdings.row(i);
            let need_ib = (self.p_bar[i] - (self.c_buf[i] + incoming[i])).max(0.0);
            let need_liq = self.need_liquidity[i];
            out.need_interbank[i] = need_ib;
            out.need_liquidity[i] = need_liq;
            let mut loss = 0.0;
            let mut rw_total = 0.0;
            let mut value = 0.0;
            for mu in 0..m {
                loss += s[mu] * (start[mu] - prices[mu]);
                eta[mu] = s[mu] * w_s[mu] * prices[mu];
                rw_total += eta[mu];
                value += s[mu] * prices[mu];
            }
            if value <= 0.0 {
                continue;
            }
            if rw_total > 0.0 {
                eta.iter_mut().for_each(|x| *x /= rw_total);
            } else {
                for mu in 0..m {
                    eta[mu] = s[mu] * prices[mu] / value;
                }
            }
            left.copy_from_slice(s);
            let z = &mut out.z[i * m..(i + 1) * m];
            let sell = |eur: f64, z: &mut [f64], left: &mut [f64]| {
                if eur <= 0.0 {
                    return;
                }
                for mu in 0..m {
                    let q = (eur * eta[mu] / prices[mu]).min(left[mu]);
                    z[mu] += q;
                    left[mu] -= q;
                }
            };
            sell(need_ib, z, &mut left);
            sell(need_liq, z, &mut left);
            if self.gamma_bar > 0.0 {
                let eq_marked = self.eq[i] - loss;
                let rw_left: f64 = (0..m).map(|mu| left[mu] * w_s[mu] * prices[mu]).sum();
                let rw_need = (self.w_b[i] * self.interbank_left[i] + rw_left + self.c_te[i]
                    - eq_marked / self.gamma_bar)
                    .max(0.0);
                let eff_w: f64 = (0..m).map(|mu| eta[mu] * w_s[mu]).sum();
                if rw_need > 0.0 && eff_w > 0.0 {
                    out.need_capital[i] = rw_need / eff_w;
                    sell(rw_need / eff_w, z, &mut left);
                }
            }
            for (q, &held) in z.iter_mut().zip(s) {
                *q = q.min(held);
            }
            out.liquidity_raised[i] = z.iter().zip(prices).map(|(q, p)| q * p).sum();
        }
        out
    }

    /// Prices consistent with the sales they induce at fixed `p`: sales are
    /// resized at the impacted prices until the prices settle. `z` holds the
    /// cumulative sales and only grows.
    fn market_prices(
        &self,
        p: &[f64],
        prices: &[f64],
        z: &mut [f64],
        tol: f64,
        max_iter: usize,
    ) -> Result<Vec<f64>> {
        let start = self.holdings.prices();
        let alpha = self.holdings.alpha();
        let mut prices = prices.to_vec();
        let mut change = f64::INFINITY;
        for _ in 0..max_iter {
            let so = self.sell_off(p, &prices);
            for (acc, q) in z.iter_mut().zip(&so.z) {
                *acc = acc.max(*q);
            }
            let next = impacted_prices(start, alpha, &column_sums(z, self.m), &self.float);
            change = next
                .iter()
                .zip(&prices)
                .zip(start)
                .map(|((a, b), s)| (a - b).abs() / s)
                .fold(0.0, f64::max);
            prices = next;
            if change < tol {
                return Ok(prices);
            }
        }
        Err(AbmError::NoConvergence {
            stage: "fire-sale prices",
            iterations: max_iter,
            residual: change,
        })
    }

    fn solve(&self, mode_tol: f64, max_iter: usize, trace: bool) -> Result<ClearingOutcome> {
        let (n, m) = (self.n, self.m);
        let start = self.holdings.prices();
        let scale = 1.0 + self.p_bar.iter().cloned().fold(0.0, f64::max);
        let mut p = self.p_bar.clone();
        let mut prices = start.to_vec();
        let mut z = vec![0.0; n * m];
        let mut history = Vec::new();
        if trace {
            history.push(p.clone());
        }
        let mut capped = 0;
        let mut residual = f64::INFINITY;
        for k in 1..=max_iter {
            let z_prev = z.clone();
            let new_prices = self.market_prices(&p, &prices, &mut z, mode_tol, max_iter)?;
            let dz = z
                .iter()
                .zip(&z_prev)
                .map(|(a, b)| a - b)
                .fold(0.0, f64::max);
            let incoming = self.incoming(&p);
            let mut next = vec![0.0; n];
            for i in 0..n {
                let proceeds: f64 = z[i * m..(i + 1) * m]
                    .iter()
                    .zip(&new_prices)
                    .map(|(q, p)| q * p)
                    .sum();
                let xi = (self.cash[i] + incoming[i] + proceeds).min(self.p_bar[i]);
                if xi > p[i] + mode_tol * scale {
                    capped += 1;
                }
                next[i] = xi.min(p[i]).max(0.0);
            }
            residual = sup_dist(&next, &p);
            let dp = new_prices
                .iter()
                .zip(&prices)
                .zip(start)
                .map(|((a, b), s)| (a - b).abs() / s)
                .fold(0.0, f64::max);
            p = next;
            prices = new_prices;
            if trace {
                history.push(p.clone());
            }
            let dz_value = dz * start.iter().cloned().fold(0.0, f64::max);
            if residual < mode_tol * scale && dp < mode_tol && dz_value < mode_tol * scale {
                return Ok(ClearingOutcome {
                    p,
                    p_bar: self.p_bar.clone(),
                    z,
                    prices,
                    iterations: k,
                    residual,
                    capped_increases: capped,
                    history,
                });
            }
        }
        Err(AbmError::NoConvergence {
            stage: "fire-sale clearing",
            iterations: max_iter,
            residual,
        })
    }
}

/// Sell-off at a given clearing vector `p` and price vector, with the
/// state's holdings and the cycle's roll-over outcome.
pub fn sell_off(
    state: &AbmState,
    params: &AbmParams,
    roll: &RolloverOutcome,
    p: &[f64],
    prices: &[f64],
) -> SellOff {
    ClearingProblem::new(state, params, roll).sell_off(p, prices)
}

/// Greatest clearing vector of the short-term market, found by
/// fictitious-default iteration from `p = p̄`. Each round sizes the fire
/// sales for the current repayments at the prices those sales produce and
/// evaluates `ξ(p) = min{c + Π^T p + Z P, p̄}`.
/// Iterates are kept non-increasing by taking `min{p, ξ(p)}`.
pub fn fire_sale_clearing(
    state: &AbmState,
    params: &AbmParams,
    roll: &RolloverOutcome,
) -> Result<ClearingOutcome> {
    ClearingProblem::new(state, params, roll).solve(params.fp_tol, params.fp_max_iter, false)
}

/// Same as [`fire_sale_clearing`] but records every iterate of `p`.
pub fn fire_sale_clearing_traced(
    state: &AbmState,
    params: &AbmParams,
    roll: &RolloverOutcome,
) -> Result<ClearingOutcome> {
    ClearingProblem::new(state, params, roll).solve(params.fp_tol, params.fp_max_iter, true)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::abm::BankBalanceSheet;
    use crate::network::NodeSet;

    fn one_security_state(sheets: Vec<BankBalanceSheet>, s: Vec<f64>, price: f64) -> AbmState {
        let n = sheets.len();
        let nodes = Arc::new(NodeSet::new((0..n).map(|i| format!("b{i}"))).unwrap());
        let holdings = HoldingsTable::new(nodes.clone(), vec!["x".into()], s, vec![price]).unwrap();
        let z = || vec![0.0; n * n];
        AbmState::new(nodes, sheets, holdings, [z(), z(), z(), z()]).unwrap()
    }

    fn roll(p_bar: Vec<f64>) -> RolloverOutcome {
        let n = p_bar.len();
        RolloverOutcome {
            f: vec![0.0; n],
            p_bar,
            r_liq: vec![0.0; n],
            r_cap: vec![0.0; n],
            iterations: 1,
            residual: 0.0,
        }
    }

    fn rich() -> BankBalanceSheet {
        BankBalanceSheet {
            eq: 1e6,
            ..Default::default()
        }
    }

    #[test]
    fn no_needs_no_sales() {
        let st = one_security_state(vec![rich()], vec![100.0], 10.0);
        let params = AbmParams {
            beta: 0.0,
            ..Default::default()
        };
        let so = sell_off(&st, &params, &roll(vec![0.0]), &[0.0], &[10.0]);
        assert_eq!(so.z, vec![0.0]);
    }

    #[test]
    fn need_of_100_at_price_10_sells_10_units() {
        let st = one_security_state(vec![rich()], vec![1000.0], 10.0);
        let params = AbmParams {
            beta: 0.0,
            ..Default::default()
        };
        let so = sell_off(&st, &params, &roll(vec![100.0]), &[100.0], &[10.0]);
        assert_eq!(so.z, vec![10.0]);
        assert_eq!(so.liquidity_raised, vec![100.0]);
    }

    #[test]
    fn sale_is_capped_by_holdings() {
        let st = one_security_state(vec![rich()], vec![5.0], 10.0);
        let params = AbmParams {
            beta: 0.0,
            ..Default::default()
        };
        let so = sell_off(&st, &params, &roll(vec![100.0]), &[100.0], &[10.0]);
        assert_eq!(so.z, vec![5.0]);
        assert_eq!(so.liquidity_raised, vec![50.0]);
    }

    #[test]
    fn full_float_static_sale_gives_exp_minus_alpha() {
        let st = one_security_state(vec![rich(), rich()], vec![3.0, 7.0], 10.0);
        let mut h = st.holdings.clone();
        let prices = price_update(&mut h, &[3.0, 7.0], PriceMode::Static);
        assert!((prices[0] - 10.0 * (-0.2f64).exp()).abs() < 1e-12);
        assert_eq!(h.float(), vec![0.0]);
        let mut h = st.holdings.clone();
        assert_eq!(
            price_update(&mut h, &[0.0, 0.0], PriceMode::Dynamic),
            vec![10.0]
        );
    }

    #[test]
    fn cash_rich_banks_pay_in_full() {
        let mut a = rich();
        a.c = 500.0;
        let st = one_security_state(vec![a], vec![10.0], 10.0);
        let params = AbmParams {
            beta: 0.0,
            ..Default::default()
        };
        let out = fire_sale_clearing(&st, &params, &roll(vec![100.0])).unwrap();
        assert_eq!(out.p, vec![100.0]);
        assert_eq!(out.z, vec![0.0]);
        assert_eq!(out.prices, vec![10.0]);
    }

    #[test]
    fn insolvent_bank_without_portfolio_pays_its_cash() {
        let mut a = rich();
        a.c = 30.0;
        let st = one_security_state(vec![a], vec![0.0], 10.0);
        let params = AbmParams {
            beta: 0.0,
            ..Default::default()
        };
        let out = fire_sale_clearing(&st, &params, &roll(vec![100.0])).unwrap();
        assert_eq!(out.p, vec![30.0]);
    }
}
