//! Multilayer exposure networks on a shared node set.
//!
//! Every layer is a dense `n × n` matrix of non-negative EUR weights where
//! `w[i][j]` is the exposure of node `i` towards node `j` (flow of funds
//! from `i` to `j`). Self-loops are never stored: intra-group exposures are
//! dropped at construction time.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::holdings::HoldingsTable;

/// Long-term credit layer.
pub const LTC: &str = "ltc";
/// Short-term credit layer.
pub const STC: &str = "stc";
/// Cross-securities layer (equity and debt issued by other banks).
pub const CS: &str = "cs";
/// Short-term funding (repo) layer.
pub const STF: &str = "stf";
/// Projected external-securities (overlapping portfolio) layer.
pub const EXT: &str = "ext";
/// Edgewise sum of every layer.
pub const FLAT: &str = "flat";

/// Canonical layer order used for reports.
pub const LAYER_ORDER: [&str; 5] = [LTC, STC, CS, STF, EXT];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("duplicate node `{0}`")]
    DuplicateNode(String),
    #[error("node identifiers must be non-empty")]
    EmptyNodeId,
    #[error("a node set needs at least one node")]
    EmptyNodeSet,
    #[error("negative weight {weight} on edge {src} -> {dst}")]
    NegativeWeight {
        src: String,
        dst: String,
        weight: f64,
    },
    #[error("non-finite weight on edge {src} -> {dst}")]
    NonFiniteWeight { src: String, dst: String },
    #[error("security `{0}` has a non-positive price")]
    NonPositivePrice(String),
    #[error("layer `{0}` is already directed")]
    AlreadyDirected(String),
    #[error("layers do not share the same node set")]
    NodeSetMismatch,
    #[error("layer `{0}` is missing")]
    MissingLayer(String),
    #[error("layer `{0}` defined twice")]
    DuplicateLayer(String),
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("invalid matrix for layer `{layer}`: {reason}")]
    InvalidMatrix { layer: String, reason: String },
    #[error("invalid balance sheet for `{node}`: {reason}")]
    InvalidBalanceSheet { node: String, reason: String },
}

pub type Result<T, E = NetworkError> = std::result::Result<T, E>;

/// Ordered set of opaque node identifiers (banking groups).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeSet {
    ids: Vec<String>,
    countries: Vec<Option<String>>,
    index: HashMap<String, usize>,
}

impl NodeSet {
    pub fn new<I, S>(ids: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let ids: Vec<String> = ids.into_iter().map(Into::into).collect();
        let countries = vec![None; ids.len()];
        Self::with_countries(ids, countries)
    }

    pub fn with_countries(ids: Vec<String>, countries: Vec<Option<String>>) -> Result<Self> {
        if ids.is_empty() {
            return Err(NetworkError::EmptyNodeSet);
        }
        if countries.len() != ids.len() {
            return Err(NetworkError::LengthMismatch {
                expected: ids.len(),
                actual: countries.len(),
            });
        }
        let mut index = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if id.is_empty() {
                return Err(NetworkError::EmptyNodeId);
            }
            if index.insert(id.clone(), i).is_some() {
                return Err(NetworkError::DuplicateNode(id.clone()));
            }
        }
        Ok(Self {
            ids,
            countries,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn id(&self, i: usize) -> &str {
        &self.ids[i]
    }

    pub fn country(&self, i: usize) -> Option<&str> {
        self.countries[i].as_deref()
    }

    pub fn countries(&self) -> &[Option<String>] {
        &self.countries
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn require(&self, id: &str) -> Result<usize> {
        self.position(id)
            .ok_or_else(|| NetworkError::UnknownNode(id.to_string()))
    }

    /// Anonymised report label: country prefix plus a zero-padded ordinal,
    /// or the raw identifier when no country is known.
    pub fn report_label(&self, i: usize) -> String {
        match self.country(i) {
            Some(c) => format!("{c}{:03}", i + 1),
            None => self.ids[i].clone(),
        }
    }
}

/// Weighted adjacency matrix of one layer.
#[derive(Clone, PartialEq)]
pub struct ExposureMatrix {
    layer_id: String,
    nodes: Arc<NodeSet>,
    w: Vec<f64>,
    directed: bool,
}

impl fmt::Debug for ExposureMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExposureMatrix")
            .field("layer_id", &self.layer_id)
            .field("n", &self.n())
            .field("directed", &self.directed)
            .field("edges", &self.edge_count())
            .finish()
    }
}

/// Side information produced while building a layer from an edge list.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BuildDiagnostics {
    pub edges_read: usize,
    pub self_loops_dropped: usize,
}

impl ExposureMatrix {
    /// All-zero layer.
    pub fn zeros(layer_id: impl Into<String>, nodes: Arc<NodeSet>, directed: bool) -> Self {
        let n = nodes.len();
        Self {
            layer_id: layer_id.into(),
            nodes,
            w: vec![0.0; n * n],
            directed,
        }
    }

    /// Wraps a row-major dense matrix after checking every layer invariant.
    pub fn from_dense(
        layer_id: impl Into<String>,
        nodes: Arc<NodeSet>,
        w: Vec<f64>,
        directed: bool,
    ) -> Result<Self> {
        let layer_id = layer_id.into();
        let n = nodes.len();
        if w.len() != n * n {
            return Err(NetworkError::LengthMismatch {
                expected: n * n,
                actual: w.len(),
            });
        }
        let invalid = |reason: String| NetworkError::InvalidMatrix {
            layer: layer_id.clone(),
            reason,
        };
        for i in 0..n {
            for j in 0..n {
                let x = w[i * n + j];
                if !x.is_finite() {
                    return Err(invalid(format!("non-finite entry at ({i},{j})")));
                }
                if x < 0.0 {
                    return Err(invalid(format!("negative entry at ({i},{j})")));
                }
                if i == j && x != 0.0 {
                    return Err(invalid(format!("self-loop at {i}")));
                }
                if !directed && x != w[j * n + i] {
                    return Err(invalid(format!("asymmetric entry at ({i},{j})")));
                }
            }
        }
        Ok(Self {
            layer_id,
            nodes,
            w,
            directed,
        })
    }

    pub fn layer_id(&self) -> &str {
        &self.layer_id
    }

    pub fn nodes(&self) -> &Arc<NodeSet> {
        &self.nodes
    }

    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.w[i * self.n() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.n();
        &self.w[i * n..(i + 1) * n]
    }

    /// Row-major weights.
    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn into_weights(self) -> Vec<f64> {
        self.w
    }

    pub fn total_weight(&self) -> f64 {
        self.w.iter().sum()
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.row(i).iter().sum()
    }

    pub fn col_sum(&self, j: usize) -> f64 {
        let n = self.n();
        (0..n).map(|i| self.w[i * n + j]).sum()
    }

    /// Number of positive entries (each undirected edge counts twice).
    pub fn edge_count(&self) -> usize {
        self.w.iter().filter(|&&x| x > 0.0).count()
    }

    pub fn is_empty(&self) -> bool {
        self.w.iter().all(|&x| x == 0.0)
    }

    pub fn same_nodes(&self, other: &ExposureMatrix) -> bool {
        Arc::ptr_eq(&self.nodes, &other.nodes) || *self.nodes == *other.nodes
    }

    /// Non-zero entries as `(src, dst, weight)`, sorted by source then
    /// destination. Undirected layers report each pair once with `src < dst`.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let n = self.n();
        let mut out = Vec::new();
        for i in 0..n {
            let start = if self.directed { 0 } else { i + 1 };
            for j in start..n {
                let x = self.w[i * n + j];
                if x != 0.0 {
                    out.push((i, j, x));
                }
            }
        }
        out
    }

    /// Returns a copy with a different layer name.
    pub fn renamed(&self, layer_id: impl Into<String>) -> Self {
        Self {
            layer_id: layer_id.into(),
            ..self.clone()
        }
    }

    /// Multiplies every weight by `factor` (> 0).
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            w: self.w.iter().map(|x| x * factor).collect(),
            ..self.clone()
        }
    }
}

/// Builds one layer from an edge list.
///
/// Duplicate pairs are summed and self-loops are dropped (counted in the
/// returned diagnostics). For undirected layers `(a, b)` and `(b, a)` feed the
/// same unordered pair.
pub fn build_layer(
    edges: &[(String, String, f64)],
    nodes: Arc<NodeSet>,
    layer_id: &str,
    directed: bool,
) -> Result<(ExposureMatrix, BuildDiagnostics)> {
    let n = nodes.len();
    let mut w = vec![0.0; n * n];
    let mut diag = BuildDiagnostics::default();
    for (src, dst, weight) in edges {
        diag.edges_read += 1;
        let i = nodes.require(src)?;
        let j = nodes.require(dst)?;
        if !weight.is_finite() {
            return Err(NetworkError::NonFiniteWeight {
                src: src.clone(),
                dst: dst.clone(),
            });
        }
        if *weight < 0.0 {
            return Err(NetworkError::NegativeWeight {
                src: src.clone(),
                dst: dst.clone(),
                weight: *weight,
            });
        }
        if i == j {
            diag.self_loops_dropped += 1;
            continue;
        }
        w[i * n + j] += weight;
        if !directed {
            w[j * n + i] = w[i * n + j];
        }
    }
    let m = ExposureMatrix::from_dense(layer_id, nodes, w, directed)?;
    Ok((m, diag))
}

/// Projects security holdings onto the bank node set: the weight between `i`
/// and `j` is the market value of their common positions,
/// `Σ_μ min(s_iμ, s_jμ) · p_μ`.
pub fn project_overlap(holdings: &HoldingsTable) -> Result<ExposureMatrix> {
    for (mu, &p) in holdings.prices().iter().enumerate() {
        if !(p > 0.0) || !p.is_finite() {
            return Err(NetworkError::NonPositivePrice(
                holdings.security_ids()[mu].clone(),
            ));
        }
    }
    let nodes = holdings.nodes().clone();
    let n = nodes.len();
    let m = holdings.securities();
    let prices = holdings.prices();
    let mut w = vec![0.0; n * n];
    for i in 0..n {
        let si = holdings.row(i);
        for j in (i + 1)..n {
            let sj = holdings.row(j);
            let mut acc = 0.0;
            for mu in 0..m {
                let q = si[mu].min(sj[mu]);
                if q > 0.0 {
                    acc += q * prices[mu];
                }
            }
            w[i * n + j] = acc;
            w[j * n + i] = acc;
        }
    }
    ExposureMatrix::from_dense(EXT, nodes, w, false)
}

/// Turns an undirected layer into a directed one with both orientations.
pub fn symmetrize(undirected: &ExposureMatrix) -> Result<ExposureMatrix> {
    if undirected.directed {
        return Err(NetworkError::AlreadyDirected(undirected.layer_id.clone()));
    }
    // Undirected layers are stored symmetric, so only the flag changes.
    Ok(ExposureMatrix {
        directed: true,
        ..undirected.clone()
    })
}

/// Result of [`flatten`].
#[derive(Debug, Clone)]
pub struct Flattened {
    pub matrix: ExposureMatrix,
    /// Undirected inputs that were expanded into symmetric directed edges.
    pub symmetrized: Vec<String>,
}

/// Edgewise sum of all layers.
///
/// Inputs are summed in layer-name order so the result does not depend on the
/// order of the slice.
pub fn flatten(layers: &[&ExposureMatrix]) -> Result<Flattened> {
    let first = layers.first().ok_or(NetworkError::EmptyNodeSet)?;
    if layers.iter().any(|l| !l.same_nodes(first)) {
        return Err(NetworkError::NodeSetMismatch);
    }
    let mut ordered: Vec<&ExposureMatrix> = layers.to_vec();
    ordered.sort_by(|a, b| a.layer_id.cmp(&b.layer_id));

    let nodes = first.nodes.clone();
    let n = nodes.len();
    let mut w = vec![0.0; n * n];
    let mut symmetrized = Vec::new();
    for layer in ordered {
        let directed;
        let layer = if layer.directed {
            layer
        } else {
            directed = symmetrize(layer)?;
            symmetrized.push(layer.layer_id.clone());
            &directed
        };
        for (acc, x) in w.iter_mut().zip(&layer.w) {
            *acc += x;
        }
    }
    Ok(Flattened {
        matrix: ExposureMatrix::from_dense(FLAT, nodes, w, true)?,
        symmetrized,
    })
}

/// Per-node balance-sheet items (EUR), one vector per item.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BalanceSheetVector {
    pub eq: Vec<f64>,
    pub total_assets: Vec<f64>,
    pub cash: Vec<f64>,
    pub deposits: Vec<f64>,
    pub ext_securities: Vec<f64>,
    pub cross_holdings_a: Vec<f64>,
    pub cross_issued_l: Vec<f64>,
    pub loans_lt: Vec<f64>,
    pub borrow_lt: Vec<f64>,
    pub loans_st: Vec<f64>,
    pub borrow_st: Vec<f64>,
    pub repo_a: Vec<f64>,
    pub repo_l: Vec<f64>,
    pub other_a: Vec<f64>,
    pub other_l: Vec<f64>,
}

/// Column names of `balance_sheets.csv`, in file order (after `node_id`).
pub const BALANCE_SHEET_COLUMNS: [&str; 15] = [
    "eq",
    "total_assets",
    "cash",
    "deposits",
    "ext_securities",
    "cross_holdings_a",
    "cross_issued_l",
    "loans_lt",
    "borrow_lt",
    "loans_st",
    "borrow_st",
    "repo_a",
    "repo_l",
    "other_a",
    "other_l",
];

impl BalanceSheetVector {
    pub fn zeros(n: usize) -> Self {
        let z = vec![0.0; n];
        Self {
            eq: z.clone(),
            total_assets: z.clone(),
            cash: z.clone(),
            deposits: z.clone(),
            ext_securities: z.clone(),
            cross_holdings_a: z.clone(),
            cross_issued_l: z.clone(),
            loans_lt: z.clone(),
            borrow_lt: z.clone(),
            loans_st: z.clone(),
            borrow_st: z.clone(),
            repo_a: z.clone(),
            repo_l: z.clone(),
            other_a: z.clone(),
            other_l: z,
        }
    }

    pub fn len(&self) -> usize {
        self.eq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eq.is_empty()
    }

    pub fn columns(&self) -> [&Vec<f64>; 15] {
        [
            &self.eq,
            &self.total_assets,
            &self.cash,
            &self.deposits,
            &self.ext_securities,
            &self.cross_holdings_a,
            &self.cross_issued_l,
            &self.loans_lt,
            &self.borrow_lt,
            &self.loans_st,
            &self.borrow_st,
            &self.repo_a,
            &self.repo_l,
            &self.other_a,
            &self.other_l,
        ]
    }

    pub fn columns_mut(&mut self) -> [&mut Vec<f64>; 15] {
        [
            &mut self.eq,
            &mut self.total_assets,
            &mut self.cash,
            &mut self.deposits,
            &mut self.ext_securities,
            &mut self.cross_holdings_a,
            &mut self.cross_issued_l,
            &mut self.loans_lt,
            &mut self.borrow_lt,
            &mut self.loans_st,
            &mut self.borrow_st,
            &mut self.repo_a,
            &mut self.repo_l,
            &mut self.other_a,
            &mut self.other_l,
        ]
    }

    /// Row `i` in [`BALANCE_SHEET_COLUMNS`] order.
    pub fn row(&self, i: usize) -> [f64; 15] {
        self.columns().map(|c| c[i])
    }

    pub fn validate(&self, nodes: &NodeSet) -> Result<()> {
        let n = nodes.len();
        for col in self.columns() {
            if col.len() != n {
                return Err(NetworkError::LengthMismatch {
                    expected: n,
                    actual: col.len(),
                });
            }
        }
        for (name, col) in BALANCE_SHEET_COLUMNS.iter().zip(self.columns()) {
            for (i, &x) in col.iter().enumerate() {
                if !x.is_finite() || x < 0.0 {
                    return Err(NetworkError::InvalidBalanceSheet {
                        node: nodes.id(i).to_string(),
                        reason: format!("{name} = {x} must be finite and non-negative"),
                    });
                }
            }
        }
        Ok(())
    }
}

/// A family of layers sharing one node set, with balance-sheet enrichment.
#[derive(Debug, Clone)]
pub struct MultiLayerNetwork {
    nodes: Arc<NodeSet>,
    layers: BTreeMap<String, ExposureMatrix>,
    balance_sheets: BalanceSheetVector,
    holdings: Option<HoldingsTable>,
}

impl MultiLayerNetwork {
    pub fn new(nodes: Arc<NodeSet>, balance_sheets: BalanceSheetVector) -> Result<Self> {
        balance_sheets.validate(&nodes)?;
        Ok(Self {
            nodes,
            layers: BTreeMap::new(),
            balance_sheets,
            holdings: None,
        })
    }

    pub fn nodes(&self) -> &Arc<NodeSet> {
        &self.nodes
    }

    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    pub fn add_layer(&mut self, layer: ExposureMatrix) -> Result<()> {
        if *layer.nodes != *self.nodes {
            return Err(NetworkError::NodeSetMismatch);
        }
        if self.layers.contains_key(layer.layer_id()) {
            return Err(NetworkError::DuplicateLayer(layer.layer_id().to_string()));
        }
        // Re-point at the shared node set so every layer holds the same Arc.
        let layer = ExposureMatrix {
            nodes: self.nodes.clone(),
            ..layer
        };
        self.layers.insert(layer.layer_id.clone(), layer);
        Ok(())
    }

    /// Attaches a holdings table; does not touch the `ext` layer.
    pub fn set_holdings(&mut self, holdings: HoldingsTable) -> Result<()> {
        if **holdings.nodes() != *self.nodes {
            return Err(NetworkError::NodeSetMismatch);
        }
        self.holdings = Some(holdings.with_nodes(self.nodes.clone()));
        Ok(())
    }

    pub fn layer(&self, name: &str) -> Result<&ExposureMatrix> {
        self.layers
            .get(name)
            .ok_or_else(|| NetworkError::MissingLayer(name.to_string()))
    }

    pub fn has_layer(&self, name: &str) -> bool {
        self.layers.contains_key(name)
    }

    /// Layers in name order.
    pub fn layers(&self) -> impl Iterator<Item = &ExposureMatrix> {
        self.layers.values()
    }

    pub fn layer_names(&self) -> Vec<String> {
        self.layers.keys().cloned().collect()
    }

    pub fn balance_sheets(&self) -> &BalanceSheetVector {
        &self.balance_sheets
    }

    pub fn holdings(&self) -> Option<&HoldingsTable> {
        self.holdings.as_ref()
    }

    pub fn holdings_mut(&mut self) -> Option<&mut HoldingsTable> {
        self.holdings.as_mut()
    }

    /// The flattened layer over every stored layer.
    pub fn flattened(&self) -> Result<Flattened> {
        let layers: Vec<&ExposureMatrix> = self.layers.values().collect();
        flatten(&layers)
    }
}
