use rayon::prelude::*;

use super::market::{fire_sale_clearing, ClearingOutcome};
use super::rollover::{rollover_fixed_point, RolloverOutcome};
use super::{capital_ratio, liquidity_violation, AbmError, AbmParams, AbmState, Result, Status};
use crate::network::MultiLayerNetwork;

/// Summary of one cascade cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleLog {
    pub cycle: usize,
    /// Banks that defaulted in this cycle (the seed in cycle 1).
    pub new_defaults: Vec<String>,
    /// Defaults so far, seed included.
    pub cumulative_defaults: usize,
    pub defaulted_capital_fraction: f64,
    /// Banks in distress at the end of the cycle.
    pub distressed: usize,
    /// Initial-float-weighted price level relative to the start of the cascade.
    pub price_index: f64,
    /// Market value of this cycle's fire sales at clearing prices.
    pub sold_value: f64,
    /// Short-term repayments made by debtors.
    pub paid_total: f64,
    /// Short-term repayments received by creditors.
    pub received_total: f64,
    pub rollover_iterations: usize,
    pub clearing_iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeResult {
    pub seed_node: String,
    pub beta: f64,
    /// Defaults excluding the seed.
    pub additional_defaults: usize,
    /// Initial equity of all defaulted banks (seed included) over the
    /// initial equity of all banks.
    pub defaulted_capital_fraction: f64,
    pub cycles: usize,
    /// Defaulted banks in order of default, seed first.
    pub defaulted: Vec<String>,
    pub per_cycle_log: Vec<CycleLog>,
}

/// Report metadata of a sweep seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepMarker {
    pub node: String,
    /// Country prefix plus index, e.g. `DE001`.
    pub label: String,
    pub country: Option<String>,
    pub total_assets: f64,
}

/// Writes off every surviving creditor's claims on the banks in `defaulted`
/// and removes the defaulted banks from all four exposure matrices.
///
/// No debt is recovered: long-term, cross-security and outstanding
/// short-term claims are all lost in full.
pub fn book_defaults(state: &mut AbmState, defaulted: &[usize]) {
    let n = state.n();
    for &j in defaulted {
        for i in 0..n {
            if i == j || state.is_defaulted(i) {
                continue;
            }
            let k = i * n + j;
            let (ltc, cs, stc, stf) = (
                state.w_ltc[k],
                state.w_cs[k],
                state.w_stc[k],
                state.w_stf[k],
            );
            if ltc + cs + stc + stf == 0.0 {
                continue;
            }
            let s = &mut state.sheets[i];
            s.eq -= ltc + cs + stc + stf;
            s.l_l = (s.l_l - ltc).max(0.0);
            s.u_a = (s.u_a - cs).max(0.0);
            s.l_s = (s.l_s - stc).max(0.0);
            s.h_a = (s.h_a - stf).max(0.0);
        }
        for w in [
            &mut state.w_ltc,
            &mut state.w_cs,
            &mut state.w_stc,
            &mut state.w_stf,
        ] {
            w[j * n..(j + 1) * n].iter_mut().for_each(|x| *x = 0.0);
            for i in 0..n {
                w[i * n + j] = 0.0;
            }
        }
    }
}

struct Settlement {
    paid: f64,
    received: f64,
    sold_value: f64,
}

/// Moves cash and claims after clearing. Creditors receive their share of
/// every debtor's payment, recover withdrawn claims on banks outside the
/// network at par and lose the unpaid part of network claims. Debtors pay
/// `p` and cut their short-term liabilities by the same amount. Sellers
/// receive proceeds at clearing prices, every holder marks its portfolio
/// to market, and withdrawn claims leave the books.
fn settle(
    state: &mut AbmState,
    params: &AbmParams,
    roll: &RolloverOutcome,
    clr: &ClearingOutcome,
) -> Settlement {
    let n = state.n();
    let m = state.holdings.securities();
    let strict = params.strict_paper_formulas;
    let f = &roll.f;
    let ratio: Vec<f64> = (0..n)
        .map(|i| {
            if clr.p_bar[i] > 0.0 {
                clr.p[i] / clr.p_bar[i]
            } else {
                0.0
            }
        })
        .collect();

    let mut incoming = vec![0.0; n];
    let mut claims = vec![0.0; n];
    let mut called_stc = vec![0.0; n];
    let mut called_stf = vec![0.0; n];
    for j in 0..n {
        for i in 0..n {
            let (stc, stf) = (state.w_stc[j * n + i], state.w_stf[j * n + i]);
            if stc + stf == 0.0 {
                continue;
            }
            claims[j] += stc + stf;
            incoming[j] += (stc + stf) * f[j] * ratio[i];
            called_stc[i] += stc * f[j];
            called_stf[i] += stf * f[j];
        }
    }

    let start = state.holdings.prices().to_vec();
    let mut sold_value = 0.0;
    for i in 0..n {
        let s = state.holdings.row(i);
        let z = &clr.z[i * m..(i + 1) * m];
        let mut proceeds = 0.0;
        let mut mtm = 0.0;
        for mu in 0..m {
            proceeds += z[mu] * clr.prices[mu];
            mtm += s[mu] * (start[mu] - clr.prices[mu]);
        }
        sold_value += proceeds;
        let l = state.sheets[i].withdrawable(strict);
        let outside = f[i] * (l - claims[i]).max(0.0);
        let loss = (f[i] * claims[i] - incoming[i]).max(0.0);
        let sheet = &mut state.sheets[i];
        sheet.c += incoming[i] + outside + proceeds - clr.p[i];
        sheet.eq -= loss + mtm;
        sheet.b_s = (sheet.b_s - called_stc[i] * ratio[i]).max(0.0);
        sheet.h_l = (sheet.h_l - called_stf[i] * ratio[i]).max(0.0);
        state.shrink_withdrawable(i, 1.0 - f[i], strict);
        if f[i] > 0.0 {
            let keep = 1.0 - f[i];
            for w in [&mut state.w_stc, &mut state.w_stf] {
                w[i * n..(i + 1) * n].iter_mut().for_each(|x| *x *= keep);
            }
        }
    }

    let quantities = state
        .holdings
        .quantities()
        .iter()
        .zip(&clr.z)
        .map(|(s, z)| (s - z).max(0.0))
        .collect();
    state.holdings.set_market(quantities, clr.prices.clone());
    state.refresh_security_values();
    Settlement {
        paid: clr.p.iter().sum(),
        received: incoming.iter().sum(),
        sold_value,
    }
}

fn violates_capital(gamma: f64, eq: f64, params: &AbmParams) -> bool {
    eq < 0.0 || (params.gamma_bar > 0.0 && gamma < params.gamma_bar - params.constraint_tol)
}

/// Marks constraint violators as distressed.
fn mark_distress(state: &mut AbmState, params: &AbmParams) {
    let gamma = capital_ratio(state, params);
    let liq = liquidity_violation(state, params);
    for i in 0..state.n() {
        if state.phi[i] == Status::Normal
            && (violates_capital(gamma[i], state.sheets[i].eq, params) || liq[i])
        {
            state.phi[i] = Status::Distress;
        }
    }
}

/// Banks that could not repay in full or still violate a constraint.
fn end_of_cycle_defaults(
    state: &AbmState,
    params: &AbmParams,
    clr: &ClearingOutcome,
) -> Vec<usize> {
    let gamma = capital_ratio(state, params);
    (0..state.n())
        .filter(|&i| {
            if state.is_defaulted(i) {
                return false;
            }
            let s = &state.sheets[i];
            let unpaid = clr.p[i] < clr.p_bar[i] - params.fp_tol * (1.0 + clr.p_bar[i]);
            let required = params.beta * s.short_liabilities();
            let illiquid = s.c < required - params.constraint_tol * (1.0 + required);
            unpaid || illiquid || violates_capital(gamma[i], s.eq, params)
        })
        .collect()
}

fn price_index(state: &AbmState, initial_prices: &[f64]) -> f64 {
    let weights = state.holdings.initial_float();
    let base: f64 = weights.iter().zip(initial_prices).map(|(w, p)| w * p).sum();
    if base <= 0.0 {
        return 1.0;
    }
    let now: f64 = weights
        .iter()
        .zip(state.holdings.prices())
        .map(|(w, p)| w * p)
        .sum();
    now / base
}

pub fn run_cascade(
    net: &MultiLayerNetwork,
    seed_node: &str,
    params: &AbmParams,
) -> Result<CascadeResult> {
    let seed = net
        .nodes()
        .position(seed_node)
        .ok_or_else(|| AbmError::UnknownSeed(seed_node.to_string()))?;
    run_cascade_at(net, seed, params)
}

/// Runs a cascade started by the exogenous default of bank `seed`: its cash
/// and equity are wiped out and its portfolio frozen.
pub fn run_cascade_at(
    net: &MultiLayerNetwork,
    seed: usize,
    params: &AbmParams,
) -> Result<CascadeResult> {
    let n = net.n();
    if seed >= n {
        return Err(AbmError::UnknownSeed(seed.to_string()));
    }
    params.validate(n)?;
    let mut state = AbmState::from_network(net)?;
    let eq0: Vec<f64> = state.sheets.iter().map(|s| s.eq).collect();
    let total_eq: f64 = eq0.iter().sum();
    let initial_prices = state.holdings.prices().to_vec();

    state.sheets[seed].c = 0.0;
    state.sheets[seed].eq = 0.0;
    state.set_default(seed);
    let mut defaulted = vec![seed];
    let mut pending = vec![seed];
    let mut log = Vec::new();
    let fraction = |defaulted: &[usize]| {
        if total_eq > 0.0 {
            (defaulted.iter().map(|&i| eq0[i]).sum::<f64>() / total_eq).clamp(0.0, 1.0)
        } else {
            0.0
        }
    };

    loop {
        state.cycle += 1;
        let cycle = state.cycle;
        let in_cycle = |e: AbmError| AbmError::InCycle {
            cycle,
            source: Box::new(e),
        };
        if cycle > 1 {
            book_defaults(&mut state, &pending);
        }
        mark_distress(&mut state, params);
        let roll = rollover_fixed_point(&state, params).map_err(in_cycle)?;
        let clr = fire_sale_clearing(&state, params, &roll).map_err(in_cycle)?;
        let settled = settle(&mut state, params, &roll, &clr);
        let mut new = end_of_cycle_defaults(&state, params, &clr);
        for &i in &new {
            state.set_default(i);
        }
        defaulted.extend_from_slice(&new);
        if cycle == 1 {
            new.insert(0, seed);
        }
        log.push(CycleLog {
            cycle,
            new_defaults: new.iter().map(|&i| state.nodes.id(i).to_string()).collect(),
            cumulative_defaults: defaulted.len(),
            defaulted_capital_fraction: fraction(&defaulted),
            distressed: state.phi.iter().filter(|&&s| s == Status::Distress).count(),
            price_index: price_index(&state, &initial_prices),
            sold_value: settled.sold_value,
            paid_total: settled.paid,
            received_total: settled.received,
            rollover_iterations: roll.iterations,
            clearing_iterations: clr.iterations,
        });
        if new.is_empty() || defaulted.len() == n {
            break;
        }
        pending = new;
    }

    Ok(CascadeResult {
        seed_node: net.nodes().id(seed).to_string(),
        beta: params.beta,
        additional_defaults: defaulted.len() - 1,
        defaulted_capital_fraction: fraction(&defaulted),
        cycles: state.cycle,
        defaulted: defaulted
            .iter()
            .map(|&i| net.nodes().id(i).to_string())
            .collect(),
        per_cycle_log: log,
    })
}

/// One cascade per seed per β, ordered by β and then by node. Runs in
/// parallel; the output does not depend on the schedule.
pub fn systemic_sweep(
    net: &MultiLayerNetwork,
    params: &AbmParams,
    beta_grid: &[f64],
) -> Result<Vec<CascadeResult>> {
    let n = net.n();
    let jobs: Vec<(f64, usize)> = beta_grid
        .iter()
        .flat_map(|&b| (0..n).map(move |i| (b, i)))
        .collect();
    let results: Vec<Result<CascadeResult>> = jobs
        .par_iter()
        .map(|&(beta, seed)| {
            let params = AbmParams {
                beta,
                ..params.clone()
            };
            run_cascade_at(net, seed, &params)
        })
        .collect();
    results.into_iter().collect()
}

pub fn sweep_markers(net: &MultiLayerNetwork) -> Vec<SweepMarker> {
    let nodes = net.nodes();
    (0..net.n())
        .map(|i| SweepMarker {
            node: nodes.id(i).to_string(),
            label: nodes.report_label(i),
            country: nodes.country(i).map(str::to_string),
            total_assets: net.balance_sheets().total_assets[i],
        })
        .collect()
}
