use rayon::prelude::*;

use super::{
    credit_weights, economic_value, liquidity_buffers, liquidity_weights, Calibration,
    DebtRankError, DebtRankWorkspace, DistressTrigger, EconomicValueVector, LiquidityBuffers,
    PropagationWeights, Result,
};
use crate::network::{flatten, ExposureMatrix, MultiLayerNetwork};

/// One row of a sweep table.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub node: String,
    pub layer: String,
    /// Buffer scaler; `None` for the credit calibration.
    pub beta: Option<f64>,
    pub mode: DistressTrigger,
    pub dr: f64,
}

/// One row of the superposition table.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperpositionRow {
    pub node: String,
    pub dr_aggregated: f64,
    pub dr_linear_sum: f64,
    /// 1-based rank by the mean of both columns (1 = most systemic).
    pub avg_rank: usize,
}

fn weights_for(
    layer: &ExposureMatrix,
    net: &MultiLayerNetwork,
    calibration: Calibration,
    buffers: Option<&LiquidityBuffers>,
) -> Result<PropagationWeights> {
    match calibration {
        Calibration::Credit => credit_weights(layer, &net.balance_sheets().eq),
        Calibration::Liquidity => {
            liquidity_weights(layer, buffers.ok_or(DebtRankError::MissingBeta)?)
        }
    }
}

/// DebtRank of every node as seed; zeros when the layer carries no weight.
fn all_seeds(
    layer: &ExposureMatrix,
    weights: &PropagationWeights,
    mode: DistressTrigger,
) -> Result<Vec<f64>> {
    let n = layer.n();
    if layer.is_empty() {
        return Ok(vec![0.0; n]);
    }
    let v = economic_value(layer)?;
    Ok(scores(weights, &v, mode))
}

fn scores(
    weights: &PropagationWeights,
    v: &EconomicValueVector,
    mode: DistressTrigger,
) -> Vec<f64> {
    (0..weights.n())
        .into_par_iter()
        .map_init(DebtRankWorkspace::default, |ws, seed| {
            ws.score(weights, v, seed, mode)
        })
        .collect()
}

/// Sweep over the calibration's default layers (`ltc`, `cs` for credit;
/// `stc`, `stf` for liquidity).
pub fn debtrank_sweep(
    net: &MultiLayerNetwork,
    calibration: Calibration,
    betas: &[f64],
    mode: DistressTrigger,
) -> Result<Vec<SweepRow>> {
    debtrank_sweep_layers(net, calibration, &calibration.default_layers(), betas, mode)
}

/// One DebtRank run per node per layer (per β for liquidity). Rows are
/// ordered by layer, then β, then node.
pub fn debtrank_sweep_layers(
    net: &MultiLayerNetwork,
    calibration: Calibration,
    layers: &[&str],
    betas: &[f64],
    mode: DistressTrigger,
) -> Result<Vec<SweepRow>> {
    let layers: Vec<&ExposureMatrix> = layers
        .iter()
        .map(|name| net.layer(name))
        .collect::<Result<_, _>>()?;
    let beta_grid: Vec<Option<f64>> = match calibration {
        Calibration::Credit => vec![None],
        Calibration::Liquidity => {
            if betas.is_empty() {
                return Err(DebtRankError::MissingBeta);
            }
            betas.iter().map(|&b| Some(b)).collect()
        }
    };
    let mut rows = Vec::new();
    for layer in layers {
        for &beta in &beta_grid {
            let buffers = beta
                .map(|b| liquidity_buffers(net.balance_sheets(), b))
                .transpose()?;
            let weights = weights_for(layer, net, calibration, buffers.as_ref())?;
            let dr = all_seeds(layer, &weights, mode)?;
            rows.extend(dr.into_iter().enumerate().map(|(i, dr)| SweepRow {
                node: net.nodes().id(i).to_string(),
                layer: layer.layer_id().to_string(),
                beta,
                mode,
                dr,
            }));
        }
    }
    Ok(rows)
}

/// Compares DebtRank on the edgewise sum of two layers against the sum of
/// the per-layer DebtRank values.
///
/// Buffers come from the balance sheet once and are shared by both methods.
/// The aggregated run uses the summed layer's economic values, each
/// per-layer run its own.
pub fn superposition_experiment(
    net: &MultiLayerNetwork,
    pair: (&str, &str),
    calibration: Calibration,
    beta: Option<f64>,
    mode: DistressTrigger,
) -> Result<Vec<SuperpositionRow>> {
    let a = net.layer(pair.0)?;
    let b = net.layer(pair.1)?;
    let buffers = match calibration {
        Calibration::Credit => None,
        Calibration::Liquidity => Some(liquidity_buffers(
            net.balance_sheets(),
            beta.ok_or(DebtRankError::MissingBeta)?,
        )?),
    };
    let combined = flatten(&[a, b])?
        .matrix
        .renamed(format!("{}+{}", pair.0, pair.1));

    let per_layer = |layer: &ExposureMatrix| -> Result<Vec<f64>> {
        let w = weights_for(layer, net, calibration, buffers.as_ref())?;
        all_seeds(layer, &w, mode)
    };
    let aggregated = per_layer(&combined)?;
    let dr_a = per_layer(a)?;
    let dr_b = per_layer(b)?;

    let n = net.n();
    let linear: Vec<f64> = dr_a.iter().zip(&dr_b).map(|(x, y)| x + y).collect();
    let avg: Vec<f64> = aggregated
        .iter()
        .zip(&linear)
        .map(|(x, y)| 0.5 * (x + y))
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| avg[j].total_cmp(&avg[i]).then(i.cmp(&j)));
    let mut rank = vec![0; n];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r + 1;
    }
    Ok((0..n)
        .map(|i| SuperpositionRow {
            node: net.nodes().id(i).to_string(),
            dr_aggregated: aggregated[i],
            dr_linear_sum: linear[i],
            avg_rank: rank[i],
        })
        .collect())
}
