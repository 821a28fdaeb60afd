//! Network bundles on disk and a seeded synthetic generator.
//!
//! A bundle is a directory of CSV files described by `manifest.json`:
//!
//! ```json
//! {
//!   "format_version": "1",
//!   "nodes": "nodes.csv",
//!   "balance_sheets": "balance_sheets.csv",
//!   "layers": { "ltc": "layer_ltc.csv", "stc": "layer_stc.csv" },
//!   "holdings": "holdings.csv",
//!   "prices": "prices.csv"
//! }
//! ```
//!
//! Paths are relative to the manifest. `holdings` and `prices` are optional
//! but come as a pair; when present the `ext` layer is projected from them
//! and must not also be listed under `layers`. Every layer except `ext` is
//! directed; undirected edges are written once with `src < dst`.

mod synthetic;

pub use synthetic::{generate_synthetic, LayerSpec, SyntheticConfig};

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::holdings::HoldingsTable;
use crate::network::{
    build_layer, project_overlap, BalanceSheetVector, MultiLayerNetwork, NetworkError, NodeSet,
    BALANCE_SHEET_COLUMNS, EXT,
};

pub const FORMAT_VERSION: &str = "1";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{file}:{line}: {message}")]
    Parse {
        file: String,
        line: u64,
        message: String,
    },
    #[error("cannot access {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("file `{0}` listed in the manifest does not exist")]
    MissingFile(String),
    #[error("the ext layer is given both as an edge file and through holdings")]
    BothExtSourcesProvided,
    #[error("invalid synthetic config field `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },
    #[error(transparent)]
    Network(#[from] NetworkError),
}

pub type Result<T, E = IngestError> = std::result::Result<T, E>;

/// Contents of `manifest.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkBundle {
    pub format_version: String,
    pub nodes: String,
    pub balance_sheets: String,
    pub layers: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub holdings: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prices: Option<String>,
}

impl NetworkBundle {
    pub fn read(manifest: &Path) -> Result<Self> {
        let text = fs::read_to_string(manifest).map_err(|e| io_err(manifest, e))?;
        let bundle: NetworkBundle =
            serde_json::from_str(&text).map_err(|e| IngestError::Manifest(e.to_string()))?;
        if bundle.format_version != FORMAT_VERSION {
            return Err(IngestError::Manifest(format!(
                "unsupported format_version `{}`",
                bundle.format_version
            )));
        }
        if bundle.holdings.is_some() != bundle.prices.is_some() {
            return Err(IngestError::Manifest(
                "holdings and prices must be given together".into(),
            ));
        }
        if bundle.holdings.is_some() && bundle.layers.contains_key(EXT) {
            return Err(IngestError::BothExtSourcesProvided);
        }
        Ok(bundle)
    }

    fn files(&self) -> impl Iterator<Item = &String> {
        [&self.nodes, &self.balance_sheets]
            .into_iter()
            .chain(self.layers.values())
            .chain(self.holdings.iter())
            .chain(self.prices.iter())
    }
}

fn io_err(path: &Path, source: std::io::Error) -> IngestError {
    IngestError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn is_directed(layer: &str) -> bool {
    layer != EXT
}

/// Reads a headed CSV file and hands every record with its line number to
/// `row`. Checks the header against `columns`.
fn read_csv(
    path: &Path,
    columns: &[&str],
    mut row: impl FnMut(&csv::StringRecord, u64) -> Result<()>,
) -> Result<()> {
    let file = path.display().to_string();
    let parse = |line: u64, message: String| IngestError::Parse {
        file: file.clone(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| parse(0, e.to_string()))?;
    let header = reader.headers().map_err(|e| parse(1, e.to_string()))?;
    if header.iter().ne(columns.iter().copied()) {
        return Err(parse(1, format!("expected header `{}`", columns.join(","))));
    }
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        row(&record, line)?;
    }
    Ok(())
}

fn parse_f64(path: &Path, line: u64, column: &str, text: &str) -> Result<f64> {
    text.parse::<f64>().map_err(|_| IngestError::Parse {
        file: path.display().to_string(),
        line,
        message: format!("{column}: `{text}` is not a number"),
    })
}

fn read_nodes(path: &Path) -> Result<NodeSet> {
    let mut ids = Vec::new();
    let mut countries = Vec::new();
    read_csv(path, &["node_id", "country"], |r, _| {
        ids.push(r[0].to_string());
        countries.push(Some(&r[1]).filter(|c| !c.is_empty()).map(str::to_string));
        Ok(())
    })?;
    Ok(NodeSet::with_countries(ids, countries)?)
}

fn read_balance_sheets(path: &Path, nodes: &NodeSet) -> Result<BalanceSheetVector> {
    let n = nodes.len();
    let mut bs = BalanceSheetVector::zeros(n);
    let mut seen = vec![false; n];
    let mut header = vec!["node_id"];
    header.extend(BALANCE_SHEET_COLUMNS);
    let mut last_line = 1;
    read_csv(path, &header, |r, line| {
        last_line = line;
        let i = nodes.require(&r[0])?;
        if seen[i] {
            return Err(NetworkError::DuplicateNode(r[0].to_string()).into());
        }
        seen[i] = true;
        for (k, col) in bs.columns_mut().into_iter().enumerate() {
            col[i] = parse_f64(path, line, BALANCE_SHEET_COLUMNS[k], &r[k + 1])?;
        }
        Ok(())
    })?;
    if let Some(i) = seen.iter().position(|s| !s) {
        return Err(IngestError::Parse {
            file: path.display().to_string(),
            line: last_line + 1,
            message: format!("missing balance-sheet row for node `{}`", nodes.id(i)),
        });
    }
    Ok(bs)
}

fn read_edges(path: &Path) -> Result<Vec<(String, String, f64)>> {
    let mut edges = Vec::new();
    read_csv(path, &["src", "dst", "weight_eur"], |r, line| {
        edges.push((
            r[0].to_string(),
            r[1].to_string(),
            parse_f64(path, line, "weight_eur", &r[2])?,
        ));
        Ok(())
    })?;
    Ok(edges)
}

fn read_holdings(holdings: &Path, prices: &Path, nodes: Arc<NodeSet>) -> Result<HoldingsTable> {
    let mut ids = Vec::new();
    let mut price = Vec::new();
    let mut position = BTreeMap::new();
    read_csv(prices, &["issuer_id", "price_eur"], |r, line| {
        if position.insert(r[0].to_string(), ids.len()).is_some() {
            return Err(IngestError::Parse {
                file: prices.display().to_string(),
                line,
                message: format!("duplicate issuer `{}`", &r[0]),
            });
        }
        ids.push(r[0].to_string());
        price.push(parse_f64(prices, line, "price_eur", &r[1])?);
        Ok(())
    })?;
    let m = ids.len();
    let mut quantities = vec![0.0; nodes.len() * m];
    read_csv(
        holdings,
        &["node_id", "issuer_id", "quantity"],
        |r, line| {
            let i = nodes.require(&r[0])?;
            let mu = *position.get(&r[1]).ok_or_else(|| IngestError::Parse {
                file: holdings.display().to_string(),
                line,
                message: format!("issuer `{}` has no price", &r[1]),
            })?;
            quantities[i * m + mu] += parse_f64(holdings, line, "quantity", &r[2])?;
            Ok(())
        },
    )?;
    Ok(HoldingsTable::new(nodes, ids, quantities, price)?)
}

/// Loads the bundle described by the manifest at `manifest`.
pub fn load_network(manifest: &Path) -> Result<MultiLayerNetwork> {
    let bundle = NetworkBundle::read(manifest)?;
    let dir = manifest.parent().unwrap_or(Path::new("."));
    load_bundle(&bundle, dir)
}

/// Loads `bundle` with file paths resolved against `dir`.
pub fn load_bundle(bundle: &NetworkBundle, dir: &Path) -> Result<MultiLayerNetwork> {
    let resolve = |f: &str| dir.join(f);
    for f in bundle.files() {
        if !resolve(f).is_file() {
            return Err(IngestError::MissingFile(resolve(f).display().to_string()));
        }
    }
    let nodes = Arc::new(read_nodes(&resolve(&bundle.nodes))?);
    let bs = read_balance_sheets(&resolve(&bundle.balance_sheets), &nodes)?;
    let mut net = MultiLayerNetwork::new(nodes.clone(), bs)?;
    for (name, file) in &bundle.layers {
        let edges = read_edges(&resolve(file))?;
        let (layer, _) = build_layer(&edges, nodes.clone(), name, is_directed(name))?;
        net.add_layer(layer)?;
    }
    if let (Some(h), Some(p)) = (&bundle.holdings, &bundle.prices) {
        let holdings = read_holdings(&resolve(h), &resolve(p), nodes)?;
        net.add_layer(project_overlap(&holdings)?)?;
        net.set_holdings(holdings)?;
    }
    Ok(net)
}

fn write_csv(path: &Path, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    w.write_record(header).map_err(|e| csv_io(path, e))?;
    for r in rows {
        w.write_record(&r).map_err(|e| csv_io(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn csv_io(path: &Path, e: csv::Error) -> IngestError {
    io_err(path, std::io::Error::other(e.to_string()))
}

/// Writes `net` as a canonical bundle into `dir` (created if needed) and
/// returns its manifest. Output is byte-identical for equal networks.
///
/// With holdings attached, the `ext` layer is not written: it is projected
/// again on load.
pub fn write_network(net: &MultiLayerNetwork, dir: &Path) -> Result<NetworkBundle> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let nodes = net.nodes();
    let bundle = NetworkBundle {
        format_version: FORMAT_VERSION.into(),
        nodes: "nodes.csv".into(),
        balance_sheets: "balance_sheets.csv".into(),
        layers: net
            .layers()
            .filter(|l| !(net.holdings().is_some() && l.layer_id() == EXT))
            .map(|l| {
                (
                    l.layer_id().to_string(),
                    format!("layer_{}.csv", l.layer_id()),
                )
            })
            .collect(),
        holdings: net.holdings().map(|_| "holdings.csv".into()),
        prices: net.holdings().map(|_| "prices.csv".into()),
    };

    let rows = (0..nodes.len())
        .map(|i| {
            vec![
                nodes.id(i).to_string(),
                nodes.country(i).unwrap_or("").to_string(),
            ]
        })
        .collect();
    write_csv(&dir.join(&bundle.nodes), &["node_id", "country"], rows)?;

    let bs = net.balance_sheets();
    let rows = (0..nodes.len())
        .map(|i| {
            std::iter::once(nodes.id(i).to_string())
                .chain(bs.row(i).iter().map(|x| x.to_string()))
                .collect()
        })
        .collect();
    let mut header = vec!["node_id"];
    header.extend(BALANCE_SHEET_COLUMNS);
    write_csv(&dir.join(&bundle.balance_sheets), &header, rows)?;

    for (name, file) in &bundle.layers {
        let layer = net.layer(name)?;
        let rows = layer
            .edges()
            .into_iter()
            .map(|(i, j, w)| {
                vec![
                    nodes.id(i).to_string(),
                    nodes.id(j).to_string(),
                    w.to_string(),
                ]
            })
            .collect();
        write_csv(&dir.join(file), &["src", "dst", "weight_eur"], rows)?;
    }

    if let Some(h) = net.holdings() {
        let rows = h
            .security_ids()
            .iter()
            .zip(h.prices())
            .map(|(id, p)| vec![id.clone(), p.to_string()])
            .collect();
        write_csv(&dir.join("prices.csv"), &["issuer_id", "price_eur"], rows)?;
        let mut rows = Vec::new();
        for i in 0..nodes.len() {
            for (mu, &q) in h.row(i).iter().enumerate() {
                if q != 0.0 {
                    rows.push(vec![
                        nodes.id(i).to_string(),
                        h.security_ids()[mu].clone(),
                        q.to_string(),
                    ]);
                }
            }
        }
        write_csv(
            &dir.join("holdings.csv"),
            &["node_id", "issuer_id", "quantity"],
            rows,
        )?;
    }

    let manifest =
        serde_json::to_string_pretty(&bundle).map_err(|e| IngestError::Manifest(e.to_string()))?;
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, manifest + "\n").map_err(|e| io_err(&path, e))?;
    Ok(bundle)
}

/// Path of the manifest inside a bundle directory.
pub fn manifest_path(dir: &Path) -> PathBuf {
    dir.join(MANIFEST_FILE)
}
