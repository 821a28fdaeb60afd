//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Run with `cargo test -p interbank --test acceptance`.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use interbank::abm::{
    fire_sale_clearing_traced, price_update, rollover_fixed_point, rollover_map, run_cascade,
    systemic_sweep, AbmParams, AbmState, BankBalanceSheet, PriceMode, RolloverOutcome,
};
use interbank::debtrank::{
    credit_weights, economic_value, liquidity_buffers, liquidity_weights,
    superposition_experiment, Calibration, DebtRankWorkspace, DistressTrigger,
};
use interbank::ingest::{generate_synthetic, load_network, manifest_path, write_network, SyntheticConfig};
use interbank::network::{CS, EXT, LTC, STC, STF};
use interbank::topology::{centralities, kde_density, pagerank, DistanceMode, DEFAULT_GRID_POINTS};
use interbank::{
    flatten, project_overlap, symmetrize, BalanceSheetVector, ExposureMatrix, HoldingsTable,
    MultiLayerNetwork, NodeSet,
};

// Pinned tolerances.
const OVERLAP_BUDGET: Duration = Duration::from_millis(1);
const EXHAUSTIVE_BUDGET: Duration = Duration::from_secs(60);
const SWEEP_BUDGET: Duration = Duration::from_secs(60);
const FIXED_POINT_TOL: f64 = 1e-10;
const FIXED_POINT_MAX_ITER: usize = 10_000;
const ROLLOVER_GRID_STEP: f64 = 0.01;
const RING_GRID_STEPS: usize = 200;
const RING_MATCH_TOL: f64 = 1e-8;
const PRICE_FACTOR_TOL: f64 = 1e-12;
const PAGERANK_SUM_TOL: f64 = 1e-9;
const PAGERANK_ORACLE_TOL: f64 = 1e-10;
const KDE_INTEGRAL_TOL: f64 = 1e-3;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

struct Suite {
    failed: usize,
    total: usize,
}

impl Suite {
    fn run(&mut self, id: usize, name: &str, budget: Option<Duration>, f: impl FnOnce() -> Outcome) {
        self.total += 1;
        let t0 = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let elapsed = t0.elapsed();
        let result = match (result, budget) {
            (Ok(_), Some(b)) if elapsed > b => Err(format!("took {elapsed:.2?}, budget {b:?}")),
            (r, _) => r,
        };
        let (tag, detail) = match &result {
            Ok(d) => ("PASS", d.as_str()),
            Err(d) => ("FAIL", d.as_str()),
        };
        if result.is_err() {
            self.failed += 1;
        }
        println!("[{tag}] {id:>2} {name} ({elapsed:.2?}): {detail}");
    }
}

fn node_set(n: usize) -> Arc<NodeSet> {
    Arc::new(NodeSet::new((0..n).map(|i| format!("n{i}"))).unwrap())
}

fn synthetic(seed: u64) -> MultiLayerNetwork {
    generate_synthetic(&SyntheticConfig::with_seed(seed)).unwrap()
}

// ---------------------------------------------------------------------------
// 1

fn overlap_worked_example() -> Outcome {
    let nodes = Arc::new(NodeSet::new(["A", "B"]).unwrap());
    let h = HoldingsTable::new(nodes, vec!["X".into()], vec![5.0, 3.0], vec![100.0]).unwrap();
    let ext = project_overlap(&h).map_err(|e| e.to_string())?;
    ensure(ext.get(0, 1) == 300.0 && ext.get(1, 0) == 300.0, || {
        format!("w_AB = {}, w_BA = {}", ext.get(0, 1), ext.get(1, 0))
    })?;
    ensure(!ext.is_directed(), || "overlap layer must be undirected".into())?;
    Ok("w_AB = w_BA = 300".into())
}

// ---------------------------------------------------------------------------
// 2

const EXHAUSTIVE_WEIGHTS: [f64; 4] = [0.0, 0.3, 0.7, 1.5];

/// Straight-line DebtRank with unit equity: `W = min(w, 1)`,
/// `v_i = Σ_j w_ij / Σ_ij w_ij`.
fn debtrank_oracle(w: &[f64; 16], seed: usize, full_default: bool) -> f64 {
    let n = 4;
    let total: f64 = w.iter().sum();
    let mut h = [0.0f64; 4];
    let mut d = [false; 4];
    let mut inactive = [false; 4];
    h[seed] = 1.0;
    d[seed] = true;
    loop {
        let mut next = [0.0f64; 4];
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                if d[j] {
                    let wij = if w[i * n + j] > 0.0 { w[i * n + j].min(1.0) } else { 0.0 };
                    acc += wij * h[j];
                }
            }
            next[i] = (h[i] + acc).min(1.0);
        }
        h = next;
        let mut any = false;
        for i in 0..n {
            inactive[i] = inactive[i] || d[i];
            let fires = if full_default { h[i] >= 1.0 } else { h[i] > 0.0 };
            d[i] = fires && !inactive[i];
            any |= d[i];
        }
        if !any {
            break;
        }
    }
    (0..n)
        .map(|j| {
            let v = w[j * n..(j + 1) * n].iter().sum::<f64>() / total;
            (h[j] - if j == seed { 1.0 } else { 0.0 }) * v
        })
        .sum()
}

fn exhaustive_debtrank() -> Outcome {
    let n = 4;
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect();
    let nodes = node_set(n);
    let graphs = 4u32.pow(pairs.len() as u32);
    let modes = [
        (DistressTrigger::AnyDistress, false),
        (DistressTrigger::FullDefault, true),
    ];
    let (mismatches, runs) = (1..graphs)
        .into_par_iter()
        .map_init(DebtRankWorkspace::default, |ws, code| {
            let mut w = [0.0f64; 16];
            let mut c = code;
            for &(i, j) in &pairs {
                w[i * n + j] = EXHAUSTIVE_WEIGHTS[(c % 4) as usize];
                c /= 4;
            }
            let layer = ExposureMatrix::from_dense(LTC, nodes.clone(), w.to_vec(), true).unwrap();
            let pw = credit_weights(&layer, &[1.0; 4]).unwrap();
            let v = economic_value(&layer).unwrap();
            let mut bad = 0u64;
            for seed in 0..n {
                for (mode, full) in modes {
                    let engine = ws.score(&pw, &v, seed, mode);
                    if engine.to_bits() != debtrank_oracle(&w, seed, full).to_bits() {
                        bad += 1;
                    }
                }
            }
            (bad, (n * modes.len()) as u64)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    ensure(mismatches == 0, || format!("{mismatches} of {runs} runs differ"))?;
    Ok(format!("{} graphs, {runs} runs bit-identical", graphs - 1))
}

// ---------------------------------------------------------------------------
// 3

fn liquidity_beta_monotone() -> Outcome {
    let betas = [0.05, 0.1, 0.2];
    let mut checked = 0usize;
    let mut strict = 0usize;
    for seed in 0..20 {
        let net = synthetic(seed);
        for name in [STC, STF] {
            let layer = net.layer(name).unwrap();
            let v = economic_value(layer).unwrap();
            let mut prev: Option<Vec<f64>> = None;
            for &beta in &betas {
                let buf = liquidity_buffers(net.balance_sheets(), beta).unwrap();
                let pw = liquidity_weights(layer, &buf).unwrap();
                let mut ws = DebtRankWorkspace::default();
                let dr: Vec<f64> = (0..net.n())
                    .map(|s| ws.score(&pw, &v, s, DistressTrigger::AnyDistress))
                    .collect();
                if let Some(p) = &prev {
                    for (i, (a, b)) in p.iter().zip(&dr).enumerate() {
                        ensure(b >= a, || {
                            format!("seed {seed} layer {name} node {i} beta {beta}: {b} < {a}")
                        })?;
                        checked += 1;
                        strict += (b > a) as usize;
                    }
                }
                prev = Some(dr);
            }
        }
    }
    Ok(format!("{checked} node pairs non-decreasing, {strict} strictly increasing"))
}

// ---------------------------------------------------------------------------
// 4

fn superposition_empty_layer() -> Outcome {
    let base = synthetic(7);
    let nodes = base.nodes().clone();
    let mut net = MultiLayerNetwork::new(nodes.clone(), base.balance_sheets().clone()).unwrap();
    net.add_layer(base.layer(LTC).unwrap().clone()).unwrap();
    net.add_layer(base.layer(STC).unwrap().clone()).unwrap();
    net.add_layer(ExposureMatrix::zeros(CS, nodes.clone(), true)).unwrap();
    net.add_layer(ExposureMatrix::zeros(STF, nodes, true)).unwrap();
    let cases = [
        ((LTC, CS), Calibration::Credit, None),
        ((STC, STF), Calibration::Liquidity, Some(0.1)),
    ];
    let mut rows = 0;
    for (pair, cal, beta) in cases {
        let out = superposition_experiment(&net, pair, cal, beta, DistressTrigger::AnyDistress)
            .map_err(|e| e.to_string())?;
        for r in &out {
            ensure(r.dr_aggregated.to_bits() == r.dr_linear_sum.to_bits(), || {
                format!("{:?} node {}: {} vs {}", pair, r.node, r.dr_aggregated, r.dr_linear_sum)
            })?;
        }
        rows += out.len();
    }
    Ok(format!("{rows} rows with aggregated == linear sum"))
}

// ---------------------------------------------------------------------------
// 5

fn stressed_state(seed: u64) -> (AbmState, AbmParams) {
    let net = synthetic(1000 + seed);
    let mut state = AbmState::from_network(&net).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for s in &mut state.sheets {
        s.c *= rng.random_range(0.0..0.5);
        s.eq *= rng.random_range(0.3..1.0);
    }
    let failed = rng.random_range(0..state.n());
    state.set_default(failed);
    let params = AbmParams {
        beta: rng.random_range(0.05..0.5),
        ..AbmParams::default()
    };
    (state, params)
}

/// 4-bank chain A → B → C → D of short-term claims.
fn rollover_chain() -> (AbmState, AbmParams) {
    let nodes = Arc::new(NodeSet::new(["A", "B", "C", "D"]).unwrap());
    let big = 1e6;
    let sheet = |c, d, l_s, b_s| BankBalanceSheet {
        c,
        d,
        l_s,
        b_s,
        eq: big,
        ..Default::default()
    };
    let sheets = vec![
        sheet(10.0, 200.0, 100.0, 0.0),
        sheet(10.0, 0.0, 60.0, 100.0),
        sheet(5.5, 0.0, 40.0, 60.0),
        sheet(100.0, 0.0, 0.0, 40.0),
    ];
    let mut stc = vec![0.0; 16];
    stc[1] = 100.0;
    stc[4 + 2] = 60.0;
    stc[2 * 4 + 3] = 40.0;
    let holdings = HoldingsTable::new(nodes.clone(), vec![], vec![], vec![]).unwrap();
    let z = vec![0.0; 16];
    let state = AbmState::new(nodes, sheets, holdings, [z.clone(), z.clone(), stc, z]).unwrap();
    let params = AbmParams {
        beta: 0.1,
        ..AbmParams::default()
    };
    (state, params)
}

/// The roll-over map written out from its definition for the chain.
fn chain_phi(f: &[f64; 4]) -> [f64; 4] {
    let beta = 0.1;
    let cash = [10.0, 10.0, 5.5, 100.0];
    let short_liab = [200.0, 100.0, 60.0, 40.0];
    let l = [100.0, 60.0, 40.0, 0.0];
    let calls = [0.0, 100.0 * f[0], 60.0 * f[1], 40.0 * f[2]];
    let mut out = [0.0; 4];
    for i in 0..4 {
        let r_liq = (beta * (short_liab[i] - calls[i]) - cash[i]).max(0.0).min(l[i]);
        let c_buf = cash[i] - beta * (short_liab[i] - calls[i]);
        let need = r_liq + (calls[i] - c_buf).max(0.0);
        out[i] = if l[i] > 0.0 {
            (need / l[i]).min(1.0)
        } else if need > 0.0 {
            1.0
        } else {
            0.0
        };
    }
    out
}

/// Least fixed point as the componentwise infimum of the grid points `g`
/// with `Φ(g) <= g`.
fn chain_grid_oracle() -> [f64; 4] {
    let k = (1.0 / ROLLOVER_GRID_STEP).round() as usize;
    let g = |a: usize| a as f64 * ROLLOVER_GRID_STEP;
    (0..=k)
        .into_par_iter()
        .map(|a| {
            let mut inf = [1.0f64; 4];
            for b in 0..=k {
                for c in 0..=k {
                    for d in 0..=k {
                        let f = [g(a), g(b), g(c), g(d)];
                        let phi = chain_phi(&f);
                        if phi.iter().zip(&f).all(|(p, x)| p <= x) {
                            for i in 0..4 {
                                inf[i] = inf[i].min(f[i]);
                            }
                        }
                    }
                }
            }
            inf
        })
        .reduce(
            || [1.0; 4],
            |x, y| [x[0].min(y[0]), x[1].min(y[1]), x[2].min(y[2]), x[3].min(y[3])],
        )
}

fn rollover_fixed_point_criterion() -> Outcome {
    let mut active_total = 0usize;
    let mut max_iter = 0usize;
    for seed in 0..50 {
        let (state, params) = stressed_state(seed);
        let mut f = vec![0.0; state.n()];
        let mut converged = false;
        for k in 1..=FIXED_POINT_MAX_ITER {
            let next = rollover_map(&state, &params, &f);
            for (i, (a, b)) in f.iter().zip(&next).enumerate() {
                ensure(b >= a, || format!("instance {seed}: iterate {k} decreased at bank {i}"))?;
            }
            let change = f.iter().zip(&next).map(|(a, b)| b - a).fold(0.0, f64::max);
            f = next;
            if change < FIXED_POINT_TOL {
                converged = true;
                break;
            }
        }
        ensure(converged, || format!("instance {seed}: manual iteration did not converge"))?;
        let out = rollover_fixed_point(&state, &params).map_err(|e| format!("instance {seed}: {e}"))?;
        ensure(out.residual < FIXED_POINT_TOL, || {
            format!("instance {seed}: residual {}", out.residual)
        })?;
        max_iter = max_iter.max(out.iterations);
        active_total += out.f.iter().filter(|&&x| x > 0.0).count();
    }

    let (state, params) = rollover_chain();
    let out = rollover_fixed_point(&state, &params).map_err(|e| e.to_string())?;
    let expected = [0.2, 0.3, 0.4175, 0.0];
    for i in 0..4 {
        ensure((out.f[i] - expected[i]).abs() < 1e-12, || {
            format!("chain f = {:?}, expected {expected:?}", out.f)
        })?;
    }
    let grid = chain_grid_oracle();
    for i in 0..4 {
        ensure(grid[i] >= out.f[i] - 1e-12 && grid[i] - out.f[i] <= ROLLOVER_GRID_STEP + 1e-12, || {
            format!("chain f = {:?}, grid oracle {grid:?}", out.f)
        })?;
    }
    Ok(format!(
        "50 stressed instances monotone, {active_total} withdrawing banks, max {max_iter} iterations; chain f = {:?}",
        out.f
    ))
}

// ---------------------------------------------------------------------------
// 6

fn no_withdrawals(state: &AbmState, f: Vec<f64>) -> RolloverOutcome {
    let n = state.n();
    let debt = state.short_term_debt();
    let p_bar = (0..n)
        .map(|i| (0..n).map(|j| debt[i * n + j] * f[j]).sum())
        .collect();
    RolloverOutcome {
        f,
        p_bar,
        r_liq: vec![0.0; n],
        r_cap: vec![0.0; n],
        iterations: 0,
        residual: 0.0,
    }
}

fn random_market(seed: u64) -> (AbmState, AbmParams, RolloverOutcome) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(3..10);
    let m = rng.random_range(1..5);
    let nodes = node_set(n);
    let mut stc = vec![0.0; n * n];
    let mut stf = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.random_bool(0.4) {
                stc[i * n + j] = rng.random_range(1.0..100.0);
            }
            if i != j && rng.random_bool(0.2) {
                stf[i * n + j] = rng.random_range(1.0..50.0);
            }
        }
    }
    let q: Vec<f64> = (0..n * m)
        .map(|_| if rng.random_bool(0.6) { rng.random_range(0.0..10.0) } else { 0.0 })
        .collect();
    let prices: Vec<f64> = (0..m).map(|_| rng.random_range(5.0..20.0)).collect();
    let holdings = HoldingsTable::new(nodes.clone(), (0..m).map(|k| format!("s{k}")).collect(), q, prices)
        .unwrap();
    let sheets = (0..n)
        .map(|i| BankBalanceSheet {
            c: rng.random_range(0.0..60.0),
            d: rng.random_range(0.0..100.0),
            l_s: stc[i * n..(i + 1) * n].iter().sum(),
            h_a: stf[i * n..(i + 1) * n].iter().sum(),
            b_s: (0..n).map(|j| stc[j * n + i]).sum(),
            h_l: (0..n).map(|j| stf[j * n + i]).sum(),
            eq: rng.random_range(0.0..200.0),
            ..Default::default()
        })
        .collect();
    let z = vec![0.0; n * n];
    let state = AbmState::new(nodes, sheets, holdings, [z.clone(), z, stc, stf]).unwrap();
    let params = AbmParams {
        beta: rng.random_range(0.0..0.3),
        price_mode: if rng.random_bool(0.5) { PriceMode::Static } else { PriceMode::Dynamic },
        ..AbmParams::default()
    };
    let f = (0..n)
        .map(|_| if rng.random_bool(0.3) { 1.0 } else { rng.random_range(0.0..1.0) })
        .collect();
    let roll = no_withdrawals(&state, f);
    (state, params, roll)
}

/// Ring A → B → C → A of short-term debt with one security.
struct Ring {
    debt: [[f64; 3]; 3],
    cash: [f64; 3],
    held: [f64; 3],
    price: f64,
    alpha: f64,
}

const RING: Ring = Ring {
    // debt[i][j]: what i owes j.
    debt: [[0.0, 100.0, 0.0], [0.0, 0.0, 80.0], [30.0, 0.0, 0.0]],
    cash: [10.0, 5.0, 20.0],
    held: [3.0, 3.0, 3.0],
    price: 10.0,
    alpha: 0.5,
};

impl Ring {
    fn p_bar(&self) -> [f64; 3] {
        [0, 1, 2].map(|i| self.debt[i].iter().sum())
    }

    fn state(&self) -> (AbmState, AbmParams, RolloverOutcome) {
        let nodes = Arc::new(NodeSet::new(["A", "B", "C"]).unwrap());
        let mut stc = vec![0.0; 9];
        for i in 0..3 {
            for j in 0..3 {
                stc[j * 3 + i] = self.debt[i][j];
            }
        }
        let mut holdings =
            HoldingsTable::new(nodes.clone(), vec!["X".into()], self.held.to_vec(), vec![self.price]).unwrap();
        holdings.set_uniform_market_params(self.alpha, 0.1);
        let sheets = (0..3)
            .map(|i| BankBalanceSheet {
                c: self.cash[i],
                b_s: self.debt[i].iter().sum(),
                l_s: (0..3).map(|k| self.debt[k][i]).sum(),
                eq: 1e6,
                ..Default::default()
            })
            .collect();
        let z = vec![0.0; 9];
        let state = AbmState::new(nodes, sheets, holdings, [z.clone(), z.clone(), stc, z]).unwrap();
        let params = AbmParams {
            beta: 0.0,
            ..AbmParams::default()
        };
        let roll = no_withdrawals(&state, vec![1.0; 3]);
        (state, params, roll)
    }

    /// `ξ(p)` with fire-sale prices solved by an inner fixed point.
    fn xi(&self, p: &[f64; 3]) -> [f64; 3] {
        let p_bar = self.p_bar();
        let float: f64 = self.held.iter().sum();
        let mut incoming = [0.0; 3];
        for i in 0..3 {
            for j in 0..3 {
                incoming[j] += self.debt[i][j] * p[i] / p_bar[i];
            }
        }
        let need: [f64; 3] = [0, 1, 2].map(|i| (p_bar[i] - self.cash[i] - incoming[i]).max(0.0));
        let sales = |price: f64| [0, 1, 2].map(|i| (need[i] / price).min(self.held[i]));
        let mut price = self.price;
        for _ in 0..10_000 {
            let sold: f64 = sales(price).iter().sum();
            let next = self.price * (-self.alpha * sold / float).exp();
            let done = (next - price).abs() < 1e-15 * self.price;
            price = next;
            if done {
                break;
            }
        }
        let z = sales(price);
        [0, 1, 2].map(|i| (self.cash[i] + incoming[i] + z[i] * price).min(p_bar[i]))
    }

    /// Greatest clearing vector: supremum of the grid points with
    /// `p <= ξ(p)`, refined by damped substitution.
    fn oracle(&self) -> ([f64; 3], [f64; 3]) {
        let p_bar = self.p_bar();
        let k = RING_GRID_STEPS;
        let at = |i: usize, a: usize| p_bar[i] * a as f64 / k as f64;
        let sup = (0..=k)
            .into_par_iter()
            .map(|a| {
                let mut sup = [0.0f64; 3];
                for b in 0..=k {
                    for c in 0..=k {
                        let p = [at(0, a), at(1, b), at(2, c)];
                        let x = self.xi(&p);
                        if (0..3).all(|i| x[i] >= p[i]) {
                            for i in 0..3 {
                                sup[i] = sup[i].max(p[i]);
                            }
                        }
                    }
                }
                sup
            })
            .reduce(
                || [0.0; 3],
                |x, y| [x[0].max(y[0]), x[1].max(y[1]), x[2].max(y[2])],
            );
        let mut p = sup;
        for _ in 0..100_000 {
            let x = self.xi(&p);
            let next = [0, 1, 2].map(|i| p[i] + 0.5 * (x[i] - p[i]));
            let change = (0..3).map(|i| (next[i] - p[i]).abs()).fold(0.0, f64::max);
            p = next;
            if change < 1e-14 {
                break;
            }
        }
        (sup, p)
    }
}

fn clearing_criterion() -> Outcome {
    let mut capped = 0usize;
    let mut selling = 0usize;
    for seed in 0..50 {
        let (state, params, roll) = random_market(seed);
        let out = fire_sale_clearing_traced(&state, &params, &roll).map_err(|e| format!("instance {seed}: {e}"))?;
        for (k, w) in out.history.windows(2).enumerate() {
            for i in 0..state.n() {
                ensure(w[1][i] <= w[0][i], || format!("instance {seed}: p increased at iterate {k} bank {i}"))?;
            }
        }
        for i in 0..state.n() {
            ensure(out.p[i] >= 0.0 && out.p[i] <= out.p_bar[i], || {
                format!("instance {seed}: p_{i} = {} outside [0, {}]", out.p[i], out.p_bar[i])
            })?;
        }
        for (mu, (&now, &start)) in out.prices.iter().zip(state.holdings.prices()).enumerate() {
            ensure(now <= start && now > 0.0, || format!("instance {seed}: price {mu} {start} -> {now}"))?;
        }
        for (k, (&z, &s)) in out.z.iter().zip(state.holdings.quantities()).enumerate() {
            ensure(z >= 0.0 && z <= s, || format!("instance {seed}: z[{k}] = {z} > s = {s}"))?;
        }
        capped += out.capped_increases;
        selling += out.z.iter().any(|&z| z > 0.0) as usize;
    }

    let (state, params, roll) = RING.state();
    let out = fire_sale_clearing_traced(&state, &params, &roll).map_err(|e| e.to_string())?;
    let (sup, oracle) = RING.oracle();
    let p_bar = RING.p_bar();
    for i in 0..3 {
        ensure(sup[i] <= oracle[i] + 1e-12 && oracle[i] - sup[i] <= p_bar[i] / RING_GRID_STEPS as f64 + 1e-9, || {
            format!("refinement left the grid cell: sup {sup:?}, refined {oracle:?}")
        })?;
        ensure((out.p[i] - oracle[i]).abs() < RING_MATCH_TOL, || {
            format!("ring p = {:?}, oracle {oracle:?}", out.p)
        })?;
    }
    ensure(out.z.iter().any(|&z| z > 0.0 && z < 3.0), || "ring has no partial sale".into())?;
    Ok(format!(
        "50 instances ({selling} with sales, {capped} capped increases); ring p = [{:.6}, {:.6}, {:.6}]",
        out.p[0], out.p[1], out.p[2]
    ))
}

// ---------------------------------------------------------------------------
// 7

fn price_law() -> Outcome {
    let nodes = node_set(2);
    let mut h = HoldingsTable::new(nodes, vec!["X".into()], vec![3.0, 7.0], vec![10.0]).unwrap();
    let p = price_update(&mut h, &[3.0, 7.0], PriceMode::Static);
    let factor = p[0] / 10.0;
    ensure((factor - (-0.2f64).exp()).abs() < PRICE_FACTOR_TOL, || {
        format!("factor {factor}, expected {}", (-0.2f64).exp())
    })?;

    let mut strictly_lower = 0usize;
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (n, m) = (5, 3);
        let q: Vec<f64> = (0..n * m).map(|_| rng.random_range(1.0..20.0)).collect();
        let prices: Vec<f64> = (0..m).map(|_| rng.random_range(5.0..50.0)).collect();
        let base = HoldingsTable::new(node_set(n), (0..m).map(|k| format!("s{k}")).collect(), q, prices).unwrap();
        let mut stat = base.clone();
        let mut dynm = base;
        for _ in 0..rng.random_range(1..8) {
            let z: Vec<f64> = stat
                .quantities()
                .iter()
                .map(|s| s * rng.random_range(0.0..0.3))
                .collect();
            price_update(&mut stat, &z, PriceMode::Static);
            price_update(&mut dynm, &z, PriceMode::Dynamic);
        }
        for mu in 0..m {
            let (d, s) = (dynm.prices()[mu], stat.prices()[mu]);
            ensure(d <= s, || format!("path {seed} security {mu}: dynamic {d} > static {s}"))?;
            strictly_lower += (d < s) as usize;
        }
    }
    Ok(format!("factor e^-0.2; dynamic <= static on 100 paths, {strictly_lower} of 300 strictly lower"))
}

// ---------------------------------------------------------------------------
// 8

fn golden_chain_network() -> MultiLayerNetwork {
    let nodes = Arc::new(NodeSet::new(["A", "B", "C"]).unwrap());
    let mut bs = BalanceSheetVector::zeros(3);
    bs.eq = vec![40.0, 50.0, 100.0];
    bs.cash = vec![100.0; 3];
    bs.deposits = vec![200.0; 3];
    bs.loans_lt = vec![0.0, 60.0, 30.0];
    bs.total_assets = vec![300.0, 360.0, 330.0];
    let mut net = MultiLayerNetwork::new(nodes.clone(), bs).unwrap();
    let mut ltc = vec![0.0; 9];
    ltc[3] = 60.0;
    ltc[2 * 3 + 1] = 30.0;
    net.add_layer(ExposureMatrix::from_dense(LTC, nodes.clone(), ltc, true).unwrap()).unwrap();
    for name in [CS, STC, STF] {
        net.add_layer(ExposureMatrix::zeros(name, nodes.clone(), true)).unwrap();
    }
    net
}

fn golden_chain() -> Outcome {
    let net = golden_chain_network();
    let params = AbmParams::default();
    let r = run_cascade(&net, "A", &params).map_err(|e| e.to_string())?;
    ensure(r.additional_defaults == 1 && r.cycles == 3, || {
        format!("seed A: {} additional defaults in {} cycles", r.additional_defaults, r.cycles)
    })?;
    ensure(r.defaulted == ["A", "B"], || format!("defaulted {:?}", r.defaulted))?;
    ensure((r.defaulted_capital_fraction - 90.0 / 190.0).abs() < 1e-15, || {
        format!("fraction {}", r.defaulted_capital_fraction)
    })?;
    let iso = run_cascade(&net, "C", &params).map_err(|e| e.to_string())?;
    ensure(iso.additional_defaults == 0 && iso.cycles == 2, || {
        format!("seed C: {} additional defaults in {} cycles", iso.additional_defaults, iso.cycles)
    })?;
    ensure((iso.defaulted_capital_fraction - 100.0 / 190.0).abs() < 1e-15, || {
        format!("seed C fraction {}", iso.defaulted_capital_fraction)
    })?;
    Ok("A: B defaults in cycle 2, fraction 90/190; C: no contagion".into())
}

// ---------------------------------------------------------------------------
// 9

fn sweep_csv(net: &MultiLayerNetwork) -> String {
    let rows = systemic_sweep(net, &AbmParams::default(), &[0.05, 0.1, 0.2]).unwrap();
    let mut out = String::from("seed_node,beta,additional_defaults,defaulted_capital_fraction,cycles\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.seed_node, r.beta, r.additional_defaults, r.defaulted_capital_fraction, r.cycles
        ));
    }
    out
}

fn sweep_criterion() -> Outcome {
    let net = synthetic(1);
    ensure(net.n() == 114 && net.holdings().map(|h| h.securities()) == Some(500), || {
        "unexpected synthetic size".into()
    })?;
    let t0 = Instant::now();
    let first = sweep_csv(&net);
    let one_run = t0.elapsed();
    let second = sweep_csv(&net);
    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| sweep_csv(&net));
    ensure(first == second, || "two runs differ".into())?;
    ensure(first == single, || "single-threaded run differs".into())?;
    ensure(one_run <= SWEEP_BUDGET, || format!("one sweep took {one_run:?}"))?;
    Ok(format!(
        "{} rows, one sweep {one_run:.2?}, byte-identical across runs and pools",
        first.lines().count() - 1
    ))
}

// ---------------------------------------------------------------------------
// 10

/// Solves `(I - d Mᵀ) x = (1 - d)/n` by Gaussian elimination, with dangling
/// rows of `M` uniform.
fn pagerank_oracle(w: &[f64], n: usize, d: f64) -> Vec<f64> {
    let mut a = vec![vec![0.0; n + 1]; n];
    for i in 0..n {
        let out: f64 = w[i * n..(i + 1) * n].iter().sum();
        for j in 0..n {
            let m_ij = if out > 0.0 { w[i * n + j] / out } else { 1.0 / n as f64 };
            a[j][i] -= d * m_ij;
        }
    }
    for (j, row) in a.iter_mut().enumerate() {
        row[j] += 1.0;
        row[n] = (1.0 - d) / n as f64;
    }
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .unwrap();
        a.swap(col, piv);
        for r in 0..n {
            if r != col {
                let k = a[r][col] / a[col][col];
                for c in col..=n {
                    a[r][c] -= k * a[col][c];
                }
            }
        }
    }
    (0..n).map(|i| a[i][n] / a[i][i]).collect()
}

fn topology_criterion() -> Outcome {
    let n = 10;
    let mut worst = 0.0f64;
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w = vec![0.0; n * n];
        for i in 0..n {
            if rng.random_bool(0.2) {
                continue;
            }
            for j in 0..n {
                if i != j && rng.random_bool(0.3) {
                    w[i * n + j] = rng.random_range(0.5..10.0);
                }
            }
        }
        let layer = ExposureMatrix::from_dense(LTC, node_set(n), w.clone(), true).unwrap();
        let pr = pagerank(&layer, 0.85).map_err(|e| e.to_string())?;
        let sum: f64 = pr.iter().sum();
        ensure((sum - 1.0).abs() < PAGERANK_SUM_TOL, || format!("instance {seed}: sum {sum}"))?;
        let oracle = pagerank_oracle(&w, n, 0.85);
        for (a, b) in pr.iter().zip(&oracle) {
            worst = worst.max((a - b).abs());
        }
    }
    ensure(worst < PAGERANK_ORACLE_TOL, || format!("max PageRank deviation {worst:e}"))?;

    let net = synthetic(3);
    let mut min_integral = f64::INFINITY;
    let mut max_integral = 0.0f64;
    for name in [LTC, STC, CS, STF, EXT] {
        let t = centralities(net.layer(name).unwrap(), 0.85, DistanceMode::InverseWeight)
            .map_err(|e| e.to_string())?;
        for samples in [&t.pagerank, &t.betweenness, &t.closeness] {
            let curve = kde_density(samples, DEFAULT_GRID_POINTS).map_err(|e| e.to_string())?;
            let integral = curve.integral();
            ensure((integral - 1.0).abs() < KDE_INTEGRAL_TOL, || {
                format!("layer {name}: KDE integral {integral}")
            })?;
            min_integral = min_integral.min(integral);
            max_integral = max_integral.max(integral);
        }
    }

    let layers: Vec<&ExposureMatrix> = net.layers().collect();
    let flat = flatten(&layers).map_err(|e| e.to_string())?;
    let expected: f64 = layers
        .iter()
        .map(|l| {
            if l.is_directed() {
                l.total_weight()
            } else {
                symmetrize(l).unwrap().total_weight()
            }
        })
        .sum();
    ensure(flat.matrix.total_weight() == expected, || {
        format!("flat total {} vs {expected}", flat.matrix.total_weight())
    })?;
    Ok(format!(
        "PageRank max deviation {worst:.1e}; KDE integrals in [{min_integral:.6}, {max_integral:.6}]; flat total {expected}"
    ))
}

// ---------------------------------------------------------------------------
// 11

fn round_trip() -> Outcome {
    for seed in 0..20u64 {
        let cfg = SyntheticConfig {
            n: 5 + (seed as usize * 7) % 40,
            m: 3 + (seed as usize * 13) % 50,
            ..SyntheticConfig::with_seed(seed)
        };
        let net = generate_synthetic(&cfg).map_err(|e| e.to_string())?;
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        write_network(&net, dir.path()).map_err(|e| e.to_string())?;
        let back = load_network(&manifest_path(dir.path())).map_err(|e| e.to_string())?;
        let fail = |what: &str| format!("network {seed}: {what} differs");
        ensure(back.nodes() == net.nodes(), || fail("node set"))?;
        ensure(back.layer_names() == net.layer_names(), || fail("layer list"))?;
        for l in net.layers() {
            let b = back.layer(l.layer_id()).unwrap();
            let same = b.is_directed() == l.is_directed()
                && b.weights().iter().zip(l.weights()).all(|(x, y)| x.to_bits() == y.to_bits());
            ensure(same, || fail(l.layer_id()))?;
        }
        let bits = |v: &BalanceSheetVector| -> Vec<u64> {
            v.columns().iter().flat_map(|c| c.iter().map(|x| x.to_bits())).collect()
        };
        ensure(bits(back.balance_sheets()) == bits(net.balance_sheets()), || fail("balance sheets"))?;
        let (h0, h1) = (net.holdings().unwrap(), back.holdings().unwrap());
        let qbits = |h: &HoldingsTable| -> Vec<u64> {
            h.quantities().iter().chain(h.prices()).map(|x| x.to_bits()).collect()
        };
        ensure(h0.security_ids() == h1.security_ids() && qbits(h0) == qbits(h1), || fail("holdings"))?;
    }
    Ok("20 networks bit-identical after write and reload".into())
}

fn main() {
    let secs = Duration::from_secs;
    let mut suite = Suite { failed: 0, total: 0 };
    suite.run(1, "overlap projection worked example", Some(OVERLAP_BUDGET), overlap_worked_example);
    suite.run(2, "exhaustive 4-node DebtRank vs recursion", Some(EXHAUSTIVE_BUDGET), exhaustive_debtrank);
    suite.run(3, "liquidity DebtRank non-decreasing in beta", Some(secs(120)), liquidity_beta_monotone);
    suite.run(4, "superposition with an empty layer", Some(secs(10)), superposition_empty_layer);
    suite.run(5, "roll-over fixed point", Some(secs(120)), rollover_fixed_point_criterion);
    suite.run(6, "fire-sale clearing", Some(secs(120)), clearing_criterion);
    suite.run(7, "price impact law", Some(secs(10)), price_law);
    suite.run(8, "golden cascade", Some(secs(1)), golden_chain);
    suite.run(9, "systemic sweep determinism and runtime", None, sweep_criterion);
    suite.run(10, "PageRank, KDE and flattening", Some(secs(30)), topology_criterion);
    suite.run(11, "bundle round trip", Some(secs(30)), round_trip);
    println!("{} of {} criteria passed", suite.total - suite.failed, suite.total);
    if suite.failed > 0 {
        std::process::exit(1);
    }
}
