use anyhow::{bail, Context, Result};
use interbank::abm::{sweep_markers, systemic_sweep};
use interbank::debtrank::{debtrank_sweep_layers, superposition_experiment, Calibration, SweepRow};
use interbank::ingest::{generate_synthetic, load_network, write_network, MANIFEST_FILE};
use interbank::network::{FLAT, LAYER_ORDER};
use interbank::topology::{centralities, degree_profile, kde_density, median, DEFAULT_GRID_POINTS};
use interbank::{ExposureMatrix, MultiLayerNetwork};
use serde::Serialize;

use crate::config::{Analysis, ScenarioConfig, Source};
use crate::output::{Csv, OutputTree};
use crate::svg::{layer_color, Chart, Series};

pub fn load(cfg: &ScenarioConfig) -> Result<MultiLayerNetwork> {
    let mut net = match &cfg.source {
        Source::Bundle(path) => {
            load_network(path).with_context(|| format!("loading bundle {}", path.display()))?
        }
        Source::Synthetic(s) => generate_synthetic(s)?,
    };
    if let Some(h) = net.holdings_mut() {
        h.set_uniform_market_params(cfg.alpha, cfg.w_s);
    }
    Ok(net)
}

#[derive(Serialize)]
struct LayerSummary {
    name: String,
    directed: bool,
    edges: usize,
    total_weight: f64,
}

#[derive(Serialize)]
struct NetworkSummary {
    nodes: usize,
    layers: Vec<LayerSummary>,
    securities: usize,
    total_equity: f64,
    total_assets: f64,
}

fn summary(net: &MultiLayerNetwork) -> NetworkSummary {
    let bs = net.balance_sheets();
    NetworkSummary {
        nodes: net.n(),
        layers: ordered_layers(net)
            .into_iter()
            .map(|l| LayerSummary {
                name: l.layer_id().to_string(),
                directed: l.is_directed(),
                edges: l.edge_count(),
                total_weight: l.total_weight(),
            })
            .collect(),
        securities: net.holdings().map_or(0, |h| h.securities()),
        total_equity: bs.eq.iter().sum(),
        total_assets: bs.total_assets.iter().sum(),
    }
}

/// Layers in the canonical order, then any others by name.
fn ordered_layers(net: &MultiLayerNetwork) -> Vec<&ExposureMatrix> {
    let mut names: Vec<String> = LAYER_ORDER
        .iter()
        .filter(|n| net.has_layer(n))
        .map(|n| n.to_string())
        .collect();
    names.extend(
        net.layer_names()
            .into_iter()
            .filter(|n| !LAYER_ORDER.contains(&n.as_str())),
    );
    names.iter().map(|n| net.layer(n).expect("listed layer")).collect()
}

fn write_summary(net: &MultiLayerNetwork, out: &mut OutputTree) -> Result<()> {
    let mut text = serde_json::to_string_pretty(&summary(net))?;
    text.push('\n');
    out.write("summary.json", text)
}

pub fn validate(cfg: &ScenarioConfig, out: &mut OutputTree) -> Result<()> {
    let net = load(cfg)?;
    net.balance_sheets().validate(net.nodes())?;
    write_summary(&net, out)?;
    let s = summary(&net);
    println!("{} nodes, {} securities", s.nodes, s.securities);
    for l in &s.layers {
        println!("  {:<5} {:>6} edges  total {}", l.name, l.edges, l.total_weight);
    }
    Ok(())
}

pub fn generate(cfg: &ScenarioConfig, out: &mut OutputTree) -> Result<()> {
    let Source::Synthetic(s) = &cfg.source else {
        bail!("`generate` needs a synthetic source, not a bundle");
    };
    let net = generate_synthetic(s)?;
    let bundle = write_network(&net, out.root())?;
    out.record(MANIFEST_FILE);
    out.record(&bundle.nodes);
    out.record(&bundle.balance_sheets);
    for file in bundle.layers.values() {
        out.record(file);
    }
    for file in bundle.holdings.iter().chain(&bundle.prices) {
        out.record(file);
    }
    println!("generated {} banks, seed {}", net.n(), s.seed);
    Ok(())
}

fn f(x: f64) -> String {
    x.to_string()
}

pub fn topology(cfg: &ScenarioConfig, net: &MultiLayerNetwork, out: &mut OutputTree) -> Result<()> {
    let flat = net.flattened()?.matrix;
    let mut layers = ordered_layers(net);
    layers.push(&flat);
    let ids = net.nodes().ids();

    let mut degrees = Csv::new(&["node_id", "layer", "in_degree", "out_degree"]);
    let mut cent = Csv::new(&["node_id", "layer", "pagerank", "betweenness", "closeness"]);
    let mut medians = Csv::new(&["layer", "measure", "median"]);
    let measures = ["in_degree", "out_degree", "pagerank", "betweenness", "closeness"];
    let mut samples: Vec<Vec<(String, Vec<f64>)>> = vec![Vec::new(); measures.len()];

    for layer in &layers {
        let name = layer.layer_id().to_string();
        let deg = degree_profile(layer);
        let table = centralities(layer, cfg.damping, cfg.distance_mode)
            .with_context(|| format!("centralities of layer {name}"))?;
        for i in 0..net.n() {
            degrees.row([ids[i].clone(), name.clone(), deg.in_degree[i].to_string(), deg.out_degree[i].to_string()]);
            cent.row([
                ids[i].clone(),
                name.clone(),
                f(table.pagerank[i]),
                f(table.betweenness[i]),
                f(table.closeness[i]),
            ]);
        }
        let as_f64 = |v: &[usize]| v.iter().map(|&d| d as f64).collect::<Vec<_>>();
        let values = [
            as_f64(&deg.in_degree),
            as_f64(&deg.out_degree),
            table.pagerank,
            table.betweenness,
            table.closeness,
        ];
        for (k, v) in values.into_iter().enumerate() {
            medians.row([name.clone(), measures[k].to_string(), f(median(&v))]);
            samples[k].push((name.clone(), v));
        }
    }
    out.write("degrees.csv", degrees.finish())?;
    out.write("centralities.csv", cent.finish())?;
    out.write("medians.csv", medians.finish())?;

    for (k, measure) in measures.iter().enumerate() {
        let mut series = Vec::new();
        for (layer, v) in &samples[k] {
            match kde_density(v, DEFAULT_GRID_POINTS) {
                Ok(curve) => series.push(Series {
                    label: layer.clone(),
                    color: layer_color(layer),
                    xs: curve.xs,
                    ys: curve.ys,
                    marker: Some(median(v)),
                }),
                Err(e) => out.note(format!("{measure} density of layer {layer} skipped: {e}")),
            }
        }
        let chart = Chart {
            title: format!("{} distribution by layer", measure.replace('_', "-")),
            x_label: measure.replace('_', " "),
            y_label: "density".into(),
            series,
        };
        out.write(&format!("density_{measure}.svg"), chart.render())?;
    }
    println!("topology of {} layers including {FLAT}", layers.len());
    Ok(())
}

fn beta_field(beta: Option<f64>) -> String {
    beta.map(f).unwrap_or_default()
}

pub fn debtrank(cfg: &ScenarioConfig, net: &MultiLayerNetwork, out: &mut OutputTree) -> Result<()> {
    let mut rows: Vec<SweepRow> = Vec::new();
    let credit: Vec<&str> = cfg.credit_pair.iter().map(String::as_str).collect();
    let liquidity: Vec<&str> = cfg.liquidity_pair.iter().map(String::as_str).collect();
    rows.extend(debtrank_sweep_layers(net, Calibration::Credit, &credit, &[], cfg.debtrank_mode)?);
    rows.extend(debtrank_sweep_layers(
        net,
        Calibration::Liquidity,
        &liquidity,
        &cfg.betas,
        cfg.debtrank_mode,
    )?);
    let mut csv = Csv::new(&["node_id", "layer", "beta", "mode", "dr"]);
    for r in &rows {
        csv.row([r.node.clone(), r.layer.clone(), beta_field(r.beta), r.mode.as_str().to_string(), f(r.dr)]);
    }
    out.write("debtrank.csv", csv.finish())?;
    println!("{} DebtRank rows", rows.len());
    Ok(())
}

pub fn superpose(cfg: &ScenarioConfig, net: &MultiLayerNetwork, out: &mut OutputTree) -> Result<()> {
    let mut runs: Vec<(String, (&str, &str), Calibration, Option<f64>)> = vec![(
        "superposition_credit.csv".into(),
        (&cfg.credit_pair[0], &cfg.credit_pair[1]),
        Calibration::Credit,
        None,
    )];
    for &b in &cfg.betas {
        runs.push((
            format!("superposition_liquidity_beta_{b}.csv"),
            (&cfg.liquidity_pair[0], &cfg.liquidity_pair[1]),
            Calibration::Liquidity,
            Some(b),
        ));
    }
    for (file, pair, calibration, beta) in runs {
        let rows = superposition_experiment(net, pair, calibration, beta, cfg.debtrank_mode)?;
        let mut csv = Csv::new(&["node_id", "dr_aggregated", "dr_linear_sum", "avg_rank"]);
        for r in rows {
            csv.row([r.node, f(r.dr_aggregated), f(r.dr_linear_sum), r.avg_rank.to_string()]);
        }
        out.write(&file, csv.finish())?;
    }
    println!("superposition for {} and {} beta values", cfg.credit_pair.join("+"), cfg.betas.len());
    Ok(())
}

pub fn abm(cfg: &ScenarioConfig, net: &MultiLayerNetwork, out: &mut OutputTree) -> Result<()> {
    let results = systemic_sweep(net, &cfg.abm_params(), &cfg.betas)?;
    let mut sweep = Csv::new(&[
        "seed_node",
        "beta",
        "additional_defaults",
        "defaulted_capital_fraction",
        "cycles",
    ]);
    let mut cycles = Csv::new(&[
        "seed_node",
        "beta",
        "cycle",
        "new_defaults",
        "cumulative_defaults",
        "defaulted_capital_fraction",
        "distressed",
        "price_index",
        "sold_value",
        "paid_total",
        "received_total",
        "rollover_iterations",
        "clearing_iterations",
    ]);
    for r in &results {
        sweep.row([
            r.seed_node.clone(),
            f(r.beta),
            r.additional_defaults.to_string(),
            f(r.defaulted_capital_fraction),
            r.cycles.to_string(),
        ]);
        for c in &r.per_cycle_log {
            cycles.row([
                r.seed_node.clone(),
                f(r.beta),
                c.cycle.to_string(),
                c.new_defaults.join(";"),
                c.cumulative_defaults.to_string(),
                f(c.defaulted_capital_fraction),
                c.distressed.to_string(),
                f(c.price_index),
                f(c.sold_value),
                f(c.paid_total),
                f(c.received_total),
                c.rollover_iterations.to_string(),
                c.clearing_iterations.to_string(),
            ]);
        }
    }
    let mut markers = Csv::new(&["node_id", "label", "country", "total_assets"]);
    for m in sweep_markers(net) {
        markers.row([m.node, m.label, m.country.unwrap_or_default(), f(m.total_assets)]);
    }
    out.write("abm_sweep.csv", sweep.finish())?;
    out.write("abm_cycles.csv", cycles.finish())?;
    out.write("abm_markers.csv", markers.finish())?;
    for &b in &cfg.betas {
        let rs: Vec<_> = results.iter().filter(|r| r.beta == b).collect();
        let worst = rs.iter().map(|r| r.additional_defaults).max().unwrap_or(0);
        let mean = rs.iter().map(|r| r.additional_defaults).sum::<usize>() as f64 / rs.len().max(1) as f64;
        println!("beta {b}: mean additional defaults {mean:.3}, max {worst}");
    }
    Ok(())
}

pub fn report(cfg: &ScenarioConfig, out: &mut OutputTree) -> Result<()> {
    let net = load(cfg)?;
    write_summary(&net, out)?;
    let mut analyses = cfg.analyses.clone();
    analyses.sort();
    analyses.dedup();
    for a in analyses {
        match a {
            Analysis::Topology => topology(cfg, &net, out)?,
            Analysis::Debtrank => debtrank(cfg, &net, out)?,
            Analysis::Superpose => superpose(cfg, &net, out)?,
            Analysis::Abm => abm(cfg, &net, out)?,
        }
    }
    Ok(())
}
