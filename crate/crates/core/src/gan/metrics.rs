use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::MixtureSpec;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    /// Modes holding at least 1% of the samples within the threshold.
    pub covered: usize,
    /// Fraction of samples within the threshold of any mean.
    pub high_quality_fraction: f64,
}

pub fn mode_coverage(samples: &Array2<f64>, spec: &MixtureSpec, threshold: f64) -> Result<Coverage> {
    if !(threshold > 0.0) {
        return Err(Error::InvalidConfig(format!("threshold must be positive, got {threshold}")));
    }
    if samples.ncols() != 2 {
        return Err(Error::ShapeMismatch(format!("expected 2-D samples, got {}", samples.ncols())));
    }
    let means = spec.means();
    let mut counts = vec![0usize; means.len()];
    let mut near = 0usize;
    let t2 = threshold * threshold;
    for r in samples.rows() {
        let (best, d2) = means
            .iter()
            .enumerate()
            .map(|(i, m)| (i, (r[0] - m[0]).powi(2) + (r[1] - m[1]).powi(2)))
            .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        if d2 <= t2 {
            counts[best] += 1;
            near += 1;
        }
    }
    let n = samples.nrows();
    let min_count = 0.01 * n as f64;
    Ok(Coverage {
        covered: counts.iter().filter(|&&c| c > 0 && c as f64 >= min_count).count(),
        high_quality_fraction: if n == 0 { 0.0 } else { near as f64 / n as f64 },
    })
}

/// Axis-aligned box `[x_min, x_max] × [y_min, y_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl BoundingBox {
    pub fn square(half: f64) -> Self {
        Self {
            x_min: -half,
            x_max: half,
            y_min: -half,
            y_max: half,
        }
    }
}

/// Gaussian KDE at the centres of an `m × m` grid, row `i` along `y`,
/// normalised so that `sum · cell area = 1`.
pub fn kde_grid(samples: &Array2<f64>, bandwidth: f64, m: usize, bbox: BoundingBox) -> Result<Array2<f64>> {
    if !(bandwidth > 0.0) {
        return Err(Error::InvalidConfig(format!("bandwidth must be positive, got {bandwidth}")));
    }
    if m == 0 || samples.ncols() != 2 || !(bbox.x_max > bbox.x_min && bbox.y_max > bbox.y_min) {
        return Err(Error::InvalidConfig("kde grid needs m > 0, 2-D samples and a non-empty box".into()));
    }
    let dx = (bbox.x_max - bbox.x_min) / m as f64;
    let dy = (bbox.y_max - bbox.y_min) / m as f64;
    let inv = 1.0 / (2.0 * bandwidth * bandwidth);
    let mut grid = Array2::zeros((m, m));
    for ((i, j), v) in grid.indexed_iter_mut() {
        let y = bbox.y_min + (i as f64 + 0.5) * dy;
        let x = bbox.x_min + (j as f64 + 0.5) * dx;
        *v = samples
            .rows()
            .into_iter()
            .map(|r| (-((x - r[0]).powi(2) + (y - r[1]).powi(2)) * inv).exp())
            .sum::<f64>();
    }
    let total = grid.sum() * dx * dy;
    if total > 0.0 {
        grid /= total;
    }
    Ok(grid)
}
