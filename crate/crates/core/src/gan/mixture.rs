use std::f64::consts::PI;

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Equal-weight Gaussian components with means on a circle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub k: usize,
    pub radius: f64,
    pub component_std: f64,
}

impl Default for MixtureSpec {
    fn default() -> Self {
        Self {
            k: 8,
            radius: 2.0,
            component_std: 0.04,
        }
    }
}

impl MixtureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig("mixture needs at least one component".into()));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::InvalidConfig(format!("radius must be positive, got {}", self.radius)));
        }
        if !(self.component_std >= 0.0 && self.component_std.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "component std must be >= 0, got {}",
                self.component_std
            )));
        }
        Ok(())
    }

    pub fn means(&self) -> Vec<[f64; 2]> {
        (0..self.k)
            .map(|i| {
                let a = 2.0 * PI * i as f64 / self.k as f64;
                [self.radius * a.cos(), self.radius * a.sin()]
            })
            .collect()
    }

    /// Default coverage radius, three component standard deviations.
    pub fn default_threshold(&self) -> f64 {
        3.0 * self.component_std
    }
}

/// `n` draws: a uniform component, then isotropic noise around its mean.
pub fn sample_mixture<R: Rng>(spec: &MixtureSpec, n: usize, rng: &mut R) -> Array2<f64> {
    let means = spec.means();
    let mut out = Array2::zeros((n, 2));
    for mut row in out.rows_mut() {
        let m = means[rng.random_range(0..spec.k)];
        for c in 0..2 {
            let z: f64 = StandardNormal.sample(rng);
            row[c] = m[c] + spec.component_std * z;
        }
    }
    out
}

/// Standard normal latent draws.
pub fn sample_latent<R: Rng>(n: usize, dim: usize, rng: &mut R) -> Array2<f64> {
    Array2::from_shape_simple_fn((n, dim), || StandardNormal.sample(rng))
}
