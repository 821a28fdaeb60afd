use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};

use super::{IngestError, Result};
use crate::holdings::HoldingsTable;
use crate::network::{
    project_overlap, BalanceSheetVector, ExposureMatrix, MultiLayerNetwork, NodeSet, CS, LTC, STC,
    STF,
};

const COUNTRIES: [&str; 10] = ["DE", "FR", "IT", "ES", "NL", "BE", "AT", "FI", "IE", "PT"];

/// Block edge probabilities and lognormal weight parameters of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerSpec {
    pub name: String,
    pub core_core: f64,
    pub core_periphery: f64,
    pub periphery_periphery: f64,
    /// Mean of the log weight.
    pub weight_mu: f64,
    /// Standard deviation of the log weight.
    pub weight_sigma: f64,
}

impl LayerSpec {
    pub fn new(name: &str, probs: [f64; 3], weight_mu: f64, weight_sigma: f64) -> Self {
        Self {
            name: name.to_string(),
            core_core: probs[0],
            core_periphery: probs[1],
            periphery_periphery: probs[2],
            weight_mu,
            weight_sigma,
        }
    }
}

/// Parameters of the core/periphery block model.
///
/// Every ordered pair gets an edge with probability
/// `min(1, p_block · a_i · a_j)`, where `a` is a lognormal activity with
/// median 1 and log-sd `activity_sigma`. Weights are lognormal and rounded up
/// to whole EUR.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub n: usize,
    pub core_fraction: f64,
    pub activity_sigma: f64,
    pub layers: Vec<LayerSpec>,
    /// Number of securities.
    pub m: usize,
    /// Probability that a periphery bank holds a given security; core banks
    /// hold with three times this probability (capped at 1).
    pub holdings_density: f64,
    /// Mean and log-sd of holding quantities.
    pub quantity_mu: f64,
    pub quantity_sigma: f64,
    /// Prices are uniform on this range, rounded to whole EUR.
    pub price_range: (f64, f64),
    /// Equity as a fraction of interbank plus securities assets, before a
    /// uniform ±25% perturbation.
    pub equity_ratio: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n: 114,
            core_fraction: 0.2,
            activity_sigma: 0.5,
            layers: vec![
                LayerSpec::new(LTC, [0.6, 0.15, 0.02], 3.5, 1.3),
                LayerSpec::new(STC, [0.5, 0.10, 0.01], 3.0, 1.3),
                LayerSpec::new(CS, [0.4, 0.10, 0.02], 3.0, 1.2),
                LayerSpec::new(STF, [0.5, 0.08, 0.01], 3.0, 1.3),
            ],
            m: 500,
            holdings_density: 0.05,
            quantity_mu: 1.0,
            quantity_sigma: 1.0,
            price_range: (5.0, 50.0),
            equity_ratio: 0.12,
            seed: 1,
        }
    }
}

impl SyntheticConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field, reason: String| Err(IngestError::InvalidConfig { field, reason });
        let prob = |x: f64| (0.0..=1.0).contains(&x);
        if self.n < 2 {
            return bad("n", format!("{} < 2", self.n));
        }
        if !(self.core_fraction > 0.0 && self.core_fraction < 1.0) {
            return bad(
                "core_fraction",
                format!("{} outside (0, 1)", self.core_fraction),
            );
        }
        if self.m < 1 {
            return bad("m", "at least one security is needed".into());
        }
        if !prob(self.holdings_density) {
            return bad(
                "holdings_density",
                format!("{} outside [0, 1]", self.holdings_density),
            );
        }
        for l in &self.layers {
            if ![l.core_core, l.core_periphery, l.periphery_periphery]
                .into_iter()
                .all(prob)
            {
                return bad(
                    "layers",
                    format!("edge probabilities of `{}` outside [0, 1]", l.name),
                );
            }
            if !(l.weight_sigma >= 0.0 && l.weight_mu.is_finite() && l.weight_sigma.is_finite()) {
                return bad(
                    "layers",
                    format!("invalid weight parameters for `{}`", l.name),
                );
            }
        }
        let mut names: Vec<&str> = self.layers.iter().map(|l| l.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return bad("layers", "duplicate layer name".into());
        }
        if !(self.activity_sigma >= 0.0 && self.activity_sigma.is_finite()) {
            return bad(
                "activity_sigma",
                format!("{} is invalid", self.activity_sigma),
            );
        }
        if !(self.quantity_sigma >= 0.0 && self.quantity_mu.is_finite()) {
            return bad("quantity_sigma", "invalid quantity parameters".into());
        }
        let (lo, hi) = self.price_range;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return bad(
                "price_range",
                format!("({lo}, {hi}) must satisfy 0 < lo <= hi"),
            );
        }
        if !(self.equity_ratio > 0.0 && self.equity_ratio.is_finite()) {
            return bad(
                "equity_ratio",
                format!("{} must be positive", self.equity_ratio),
            );
        }
        Ok(())
    }

    /// Number of core banks; the first `core_size` nodes form the core.
    pub fn core_size(&self) -> usize {
        ((self.core_fraction * self.n as f64).round() as usize).clamp(1, self.n - 1)
    }
}

fn lognormal(mu: f64, sigma: f64) -> LogNormal<f64> {
    LogNormal::new(mu, sigma).expect("parameters are validated")
}

/// Generates a network with the configured layers, holdings, prices, the
/// projected `ext` layer and consistent balance sheets. A pure function of
/// `cfg`.
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<MultiLayerNetwork> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.n;
    let core = cfg.core_size();

    let width = n.to_string().len().max(3);
    let ids: Vec<String> = (0..n).map(|i| format!("bank{:0width$}", i + 1)).collect();
    let countries: Vec<Option<String>> = (0..n)
        .map(|_| Some(COUNTRIES[rng.random_range(0..COUNTRIES.len())].to_string()))
        .collect();
    let nodes = Arc::new(NodeSet::with_countries(ids, countries)?);

    let activity_dist = lognormal(0.0, cfg.activity_sigma);
    let activity: Vec<f64> = (0..n).map(|_| activity_dist.sample(&mut rng)).collect();

    let mut layers = Vec::with_capacity(cfg.layers.len());
    for spec in &cfg.layers {
        let weight = lognormal(spec.weight_mu, spec.weight_sigma);
        let mut w = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let p_block = match (i < core, j < core) {
                    (true, true) => spec.core_core,
                    (false, false) => spec.periphery_periphery,
                    _ => spec.core_periphery,
                };
                let p = (p_block * activity[i] * activity[j]).min(1.0);
                if rng.random::<f64>() < p {
                    w[i * n + j] = weight.sample(&mut rng).ceil();
                }
            }
        }
        layers.push(ExposureMatrix::from_dense(
            &spec.name,
            nodes.clone(),
            w,
            true,
        )?);
    }

    let m = cfg.m;
    let width = m.to_string().len().max(3);
    let security_ids: Vec<String> = (0..m).map(|k| format!("sec{:0width$}", k + 1)).collect();
    let (lo, hi) = cfg.price_range;
    let prices: Vec<f64> = (0..m)
        .map(|_| {
            let p: f64 = if hi > lo {
                rng.random_range(lo..hi)
            } else {
                lo
            };
            p.round().max(1.0)
        })
        .collect();
    let qty = lognormal(cfg.quantity_mu, cfg.quantity_sigma);
    let mut quantities = vec![0.0; n * m];
    for i in 0..n {
        let density = if i < core {
            (3.0 * cfg.holdings_density).min(1.0)
        } else {
            cfg.holdings_density
        };
        for mu in 0..m {
            if rng.random::<f64>() < density {
                quantities[i * m + mu] = qty.sample(&mut rng).ceil();
            }
        }
    }
    let holdings = HoldingsTable::new(nodes.clone(), security_ids, quantities, prices)?;

    let bs = balance_sheets(cfg, &layers, &holdings, &mut rng);
    let mut net = MultiLayerNetwork::new(nodes, bs)?;
    for layer in layers {
        net.add_layer(layer)?;
    }
    net.add_layer(project_overlap(&holdings)?)?;
    net.set_holdings(holdings)?;
    Ok(net)
}

/// Balance sheets consistent with the generated exposures: interbank claims
/// and liabilities are the row and column sums of the layers, securities
/// the portfolio value, and the remaining items balance the sheet.
fn balance_sheets(
    cfg: &SyntheticConfig,
    layers: &[ExposureMatrix],
    holdings: &HoldingsTable,
    rng: &mut ChaCha8Rng,
) -> BalanceSheetVector {
    let n = cfg.n;
    let mut bs = BalanceSheetVector::zeros(n);
    let by_name = |name: &str, i: usize, claims: bool| -> f64 {
        layers
            .iter()
            .find(|l| l.layer_id() == name)
            .map_or(0.0, |l| if claims { l.row_sum(i) } else { l.col_sum(i) })
    };
    let securities = holdings.market_values();
    for i in 0..n {
        bs.loans_lt[i] = by_name(LTC, i, true);
        bs.borrow_lt[i] = by_name(LTC, i, false);
        bs.loans_st[i] = by_name(STC, i, true);
        bs.borrow_st[i] = by_name(STC, i, false);
        bs.cross_holdings_a[i] = by_name(CS, i, true);
        bs.cross_issued_l[i] = by_name(CS, i, false);
        bs.repo_a[i] = by_name(STF, i, true);
        bs.repo_l[i] = by_name(STF, i, false);
        bs.ext_securities[i] = securities[i];

        let interbank = bs.loans_lt[i] + bs.loans_st[i] + bs.cross_holdings_a[i] + bs.repo_a[i];
        let core_assets = interbank + securities[i];
        let borrowed = bs.borrow_lt[i] + bs.borrow_st[i] + bs.cross_issued_l[i] + bs.repo_l[i];
        bs.eq[i] = cfg.equity_ratio * core_assets.max(1.0) * rng.random_range(0.75..1.25);
        bs.other_a[i] = core_assets.max(1.0) * rng.random_range(0.5..1.5);
        bs.deposits[i] = (core_assets + bs.other_a[i]) * rng.random_range(0.3..0.6);
        bs.cash[i] = bs.deposits[i] * rng.random_range(0.04..0.25);
        let mut total = bs.cash[i] + core_assets + bs.other_a[i];
        let other_l = total - bs.deposits[i] - borrowed - bs.eq[i];
        if other_l < 0.0 {
            bs.other_a[i] -= other_l;
            total -= other_l;
        } else {
            bs.other_l[i] = other_l;
        }
        bs.total_assets[i] = total;
    }
    bs
}
