use std::f64::consts::PI;

use super::TopologyError;

pub const DEFAULT_GRID_POINTS: usize = 256;
/// Half-width of the evaluation grid beyond the sample range, in bandwidths.
pub const GRID_HALF_WIDTH: f64 = 4.0;

/// Gaussian kernel density evaluated on a regular grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityCurve {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub bandwidth: f64,
}

impl DensityCurve {
    /// Trapezoidal integral of the curve over its grid.
    pub fn integral(&self) -> f64 {
        self.xs
            .windows(2)
            .zip(self.ys.windows(2))
            .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
            .sum()
    }

    /// Grid point with the highest density.
    pub fn mode(&self) -> f64 {
        let (k, _) = self
            .ys
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (k, &y)| {
                if y > best.1 {
                    (k, y)
                } else {
                    best
                }
            });
        self.xs[k]
    }
}

/// Scott's rule bandwidth for a one-dimensional sample:
/// `σ̂ · k^(-1/5)` with the unbiased sample standard deviation.
pub fn scott_bandwidth(samples: &[f64]) -> f64 {
    let k = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / k;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
    var.sqrt() * k.powf(-0.2)
}

pub fn kde_density(samples: &[f64], grid_points: usize) -> Result<DensityCurve, TopologyError> {
    if samples.len() < 2 {
        return Err(TopologyError::TooFewSamples(samples.len()));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(TopologyError::NonFiniteSample);
    }
    if grid_points < 2 {
        return Err(TopologyError::InvalidGrid(grid_points));
    }
    let lo = samples.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return Err(TopologyError::DegenerateSample);
    }
    let h = scott_bandwidth(samples);
    if !(h > 0.0) {
        return Err(TopologyError::DegenerateSample);
    }

    let start = lo - GRID_HALF_WIDTH * h;
    let end = hi + GRID_HALF_WIDTH * h;
    let step = (end - start) / (grid_points - 1) as f64;
    let norm = 1.0 / (samples.len() as f64 * h * (2.0 * PI).sqrt());
    let xs: Vec<f64> = (0..grid_points).map(|k| start + step * k as f64).collect();
    let ys = xs
        .iter()
        .map(|&x| {
            norm * samples
                .iter()
                .map(|&s| {
                    let u = (x - s) / h;
                    (-0.5 * u * u).exp()
                })
                .sum::<f64>()
        })
        .collect();
    Ok(DensityCurve {
        xs,
        ys,
        bandwidth: h,
    })
}
