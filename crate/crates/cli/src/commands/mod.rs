pub mod epsilon;
pub mod flow;
pub mod perturb;
pub mod spectrum;
pub mod train;

use wgf_core::spectral::log_grid;
use wgf_core::{parse_kernel, Direction, KernelSpec};

use crate::error::CliError;

/// Parses an inline kernel, naming its source in the error.
pub fn kernel(src: &str, what: &str) -> Result<KernelSpec, CliError> {
    parse_kernel(src).map_err(|e| CliError::Config(format!("{what} `{src}`: {e}")))
}

pub fn direction(src: &str) -> Result<Direction, CliError> {
    src.parse().map_err(|e: wgf_core::Error| CliError::Config(e.to_string()))
}

/// Log-spaced `ξ` grid; all three bounds default to `0.05 .. 50`, 512 points.
pub fn xi_grid(min: Option<f64>, max: Option<f64>, points: Option<usize>) -> Result<Vec<f64>, CliError> {
    let (lo, hi, n) = (min.unwrap_or(0.05), max.unwrap_or(50.0), points.unwrap_or(512));
    if !(lo > 0.0 && hi > lo && hi.is_finite()) || n < 2 {
        return Err(CliError::Config(format!(
            "xi grid needs 0 < xi_min < xi_max and at least 2 points, got [{lo}, {hi}] x {n}"
        )));
    }
    Ok(log_grid(lo, hi, n))
}

/// Error unless `v` is finite and strictly positive.
pub fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(CliError::Config(format!("{name} must be positive and finite, got {v}")))
    }
}

pub fn nonzero(name: &str, v: usize) -> Result<usize, CliError> {
    if v == 0 {
        Err(CliError::Config(format!("{name} must be at least 1")))
    } else {
        Ok(v)
    }
}
