//! Layer-aware structural diagnostics: degree profiles, centralities and
//! Gaussian kernel density curves of their distributions.

mod centrality;
mod kde;

pub use centrality::{centralities, pagerank, CentralityTable, DistanceMode, Medians};
pub use kde::{kde_density, scott_bandwidth, DensityCurve, DEFAULT_GRID_POINTS, GRID_HALF_WIDTH};

use thiserror::Error;

use crate::network::ExposureMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopologyError {
    #[error("damping factor {0} must lie in (0, 1)")]
    InvalidDamping(f64),
    #[error("PageRank did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("density estimation needs at least two samples, got {0}")]
    TooFewSamples(usize),
    #[error("all samples are equal; the density is degenerate")]
    DegenerateSample,
    #[error("samples must be finite")]
    NonFiniteSample,
    #[error("a density grid needs at least two points, got {0}")]
    InvalidGrid(usize),
}

/// In- and out-degree of every node in one layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegreeProfile {
    pub layer_id: String,
    pub in_degree: Vec<usize>,
    pub out_degree: Vec<usize>,
}

impl DegreeProfile {
    pub fn edge_count(&self) -> usize {
        self.out_degree.iter().sum()
    }
}

/// Counts non-zero off-diagonal entries per row (out) and per column (in).
pub fn degree_profile(layer: &ExposureMatrix) -> DegreeProfile {
    let n = layer.n();
    let mut in_degree = vec![0; n];
    let mut out_degree = vec![0; n];
    for i in 0..n {
        for (j, &w) in layer.row(i).iter().enumerate() {
            if i != j && w > 0.0 {
                out_degree[i] += 1;
                in_degree[j] += 1;
            }
        }
    }
    DegreeProfile {
        layer_id: layer.layer_id().to_string(),
        in_degree,
        out_degree,
    }
}

/// Median of a sample (mean of the two central values for even lengths).
/// Returns 0 for an empty slice.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::network::{NodeSet, LTC};

    #[test]
    fn star_graph_degrees() {
        let n = 5;
        let nodes = Arc::new(NodeSet::new((0..n).map(|i| format!("n{i}"))).unwrap());
        let mut w = vec![0.0; n * n];
        for j in 1..n {
            w[j] = 1.0;
        }
        let m = ExposureMatrix::from_dense(LTC, nodes, w, true).unwrap();
        let p = degree_profile(&m);
        assert_eq!(p.out_degree, vec![4, 0, 0, 0, 0]);
        assert_eq!(p.in_degree, vec![0, 1, 1, 1, 1]);
        assert_eq!(p.edge_count(), 4);
    }

    #[test]
    fn empty_layer_has_zero_degrees() {
        let nodes = Arc::new(NodeSet::new(["a", "b", "c"]).unwrap());
        let p = degree_profile(&ExposureMatrix::zeros(LTC, nodes, true));
        assert_eq!(p.in_degree, vec![0; 3]);
        assert_eq!(p.out_degree, vec![0; 3]);
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(median(&[]), 0.0);
    }
}
