//! Linearised perturbation dynamics on a periodic 1-D grid.
//!
//! A perturbation `v` of a constant background `C₀` obeys, to first order,
//! `v̂ₖ′ = ωₖ v̂ₖ` with `ωₖ = ∓2C₀ (2πνₖ)² λₖ`, where `λₖ` are the grid
//! convolution eigenvalues from [`oracle_ft`] and `νₖ = k/L`. The simulator
//! applies explicit Euler mode by mode, `v̂ₖ ← v̂ₖ (1 + dt ωₖ)`.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::spectral::{oracle_ft, Direction, PeriodicGrid};

/// Modes with `|ω|` below this fraction of the largest rate are unresolved.
const RESOLVED_FRACTION: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPerturbation {
    pub grid: PeriodicGrid,
    /// Perturbation values at the nodes, in wrapped order (see [`PeriodicGrid::node`]).
    pub values: Vec<f64>,
    pub background_c0: f64,
    pub kernel: KernelSpec,
}

impl GridPerturbation {
    pub fn new(kernel: KernelSpec, grid: PeriodicGrid, background_c0: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.points {
            return Err(Error::ShapeMismatch(format!(
                "{} perturbation values for {} grid points",
                values.len(),
                grid.points
            )));
        }
        if !(background_c0 >= 0.0 && background_c0.is_finite()) {
            return Err(Error::InvalidConfig(format!("background must be >= 0, got {background_c0}")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("perturbation values"));
        }
        kernel.validate()?;
        Ok(Self {
            grid,
            values,
            background_c0,
            kernel,
        })
    }

    /// `amplitude · cos(2π k x / L)`.
    pub fn single_mode(kernel: KernelSpec, grid: PeriodicGrid, c0: f64, mode: usize, amplitude: f64) -> Result<Self> {
        if mode > grid.points / 2 {
            return Err(Error::InvalidConfig(format!("mode {mode} above Nyquist {}", grid.points / 2)));
        }
        let values = (0..grid.points)
            .map(|j| amplitude * (2.0 * PI * (mode * j) as f64 / grid.points as f64).cos())
            .collect();
        Self::new(kernel, grid, c0, values)
    }

    /// Uniform noise in `[−amplitude, amplitude]`, exciting every mode.
    pub fn seeded_noise(kernel: KernelSpec, grid: PeriodicGrid, c0: f64, amplitude: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..grid.points)
            .map(|_| amplitude * rng.random_range(-1.0..=1.0))
            .collect();
        Self::new(kernel, grid, c0, values)
    }
}

/// Per-mode amplitudes `|v̂ₖ|` for `k = 0..=M/2` at every step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeHistory {
    pub direction: Direction,
    pub dt: f64,
    /// Cycle frequency `k / L` of each recorded mode.
    pub xi: Vec<f64>,
    /// `ωₖ` from the grid spectrum.
    pub predicted: Vec<f64>,
    /// `amplitudes[n][k]` after `n` steps.
    pub amplitudes: Vec<Vec<f64>>,
    /// Mean of the perturbation, the `ξ = 0` mode.
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeFit {
    pub mode: usize,
    pub xi: f64,
    pub predicted: f64,
    /// Log-linear regression slope of `|v̂ₖ|` against time.
    pub raw_slope: f64,
    /// `(e^{slope·dt} − 1) / dt`, the rate undone from the Euler factor.
    pub measured: f64,
    pub rel_err: f64,
    /// Excited, above the rate floor, and with `|ω| dt < 1`.
    pub resolved: bool,
}

impl ModeHistory {
    pub fn steps(&self) -> usize {
        self.amplitudes.len().saturating_sub(1)
    }

    /// Fitted exponent of every mode `k ≥ 1`.
    pub fn fit(&self) -> Vec<ModeFit> {
        let max_rate = self.predicted.iter().fold(0.0f64, |m, w| m.max(w.abs()));
        (1..self.xi.len())
            .map(|k| {
                let series: Vec<f64> = self
                    .amplitudes
                    .iter()
                    .map(|a| a[k])
                    .take_while(|a| *a > 1e-280 && a.is_finite())
                    .collect();
                let raw_slope = if series.len() >= 2 {
                    log_slope(&series, self.dt)
                } else {
                    f64::NAN
                };
                let measured = (raw_slope * self.dt).exp_m1() / self.dt;
                let predicted = self.predicted[k];
                let rel_err = (measured - predicted).abs() / predicted.abs();
                let resolved = series.len() >= 2
                    && predicted.abs() >= RESOLVED_FRACTION * max_rate
                    && predicted.abs() * self.dt < 1.0;
                ModeFit {
                    mode: k,
                    xi: self.xi[k],
                    predicted,
                    raw_slope,
                    measured,
                    rel_err,
                    resolved,
                }
            })
            .collect()
    }
}

fn log_slope(series: &[f64], dt: f64) -> f64 {
    let n = series.len() as f64;
    let tm = (n - 1.0) / 2.0 * dt;
    let ym = series.iter().map(|a| a.ln()).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, a) in series.iter().enumerate() {
        let t = i as f64 * dt - tm;
        sxy += t * (a.ln() - ym);
        sxx += t * t;
    }
    sxy / sxx
}

/// Columns `mode,xi,predicted,measured,raw_slope,rel_err,resolved`.
pub fn fits_to_csv(fits: &[ModeFit]) -> String {
    let mut out = String::from("mode,xi,predicted,measured,raw_slope,rel_err,resolved\n");
    for f in fits {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            f.mode, f.xi, f.predicted, f.measured, f.raw_slope, f.rel_err, f.resolved
        );
    }
    out
}

/// Runs `steps` explicit Euler steps of the linearised flow.
pub fn linearized_sim(p: &GridPerturbation, direction: Direction, dt: f64, steps: usize) -> Result<ModeHistory> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidConfig(format!("dt must be positive, got {dt}")));
    }
    let spectrum = oracle_ft(&p.kernel, p.grid)?;
    let half = p.grid.points / 2;
    let xi: Vec<f64> = (0..=half).map(|k| p.grid.frequency(k)).collect();
    let predicted: Vec<f64> = xi
        .iter()
        .zip(&spectrum.eigenvalues)
        .map(|(nu, lam)| direction.sign() * 2.0 * p.background_c0 * (2.0 * PI * nu).powi(2) * lam)
        .collect();
    if let Some(w) = predicted.iter().find(|w| **w * dt <= -2.0) {
        return Err(Error::InvalidConfig(format!(
            "dt = {dt} exceeds the explicit stability bound 2/|omega| = {}",
            -2.0 / w
        )));
    }

    let mut coeffs: Vec<Complex<f64>> = p.values.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(p.grid.points).process(&mut coeffs);
    coeffs.truncate(half + 1);
    let mean = coeffs[0].re / p.grid.points as f64;

    let factors: Vec<f64> = predicted.iter().map(|w| 1.0 + dt * w).collect();
    let mut amplitudes = Vec::with_capacity(steps + 1);
    amplitudes.push(coeffs.iter().map(|c| c.norm()).collect::<Vec<_>>());
    for _ in 0..steps {
        for (c, f) in coeffs.iter_mut().zip(&factors) {
            *c *= *f;
        }
        amplitudes.push(coeffs.iter().map(|c| c.norm()).collect());
    }
    Ok(ModeHistory {
        direction,
        dt,
        xi,
        predicted,
        amplitudes,
        mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> PeriodicGrid {
        PeriodicGrid::new(20.0, 1024).unwrap()
    }

    #[test]
    fn single_mode_decays_at_predicted_rate() {
        let k = KernelSpec::gaussian(1.0);
        let p = GridPerturbation::single_mode(k.clone(), grid(), 1.0, 8, 1e-3).unwrap();
        let gen = linearized_sim(&p, Direction::Generator, 1e-3, 200).unwrap();
        let fits = gen.fit();
        let f = &fits[7];
        assert_eq!(f.mode, 8);
        assert!(f.resolved && f.predicted < 0.0);
        assert!(f.rel_err < 1e-10, "{f:?}");
        // only the excited mode carries energy
        assert!(fits.iter().filter(|f| f.mode != 8).all(|f| gen.amplitudes[0][f.mode] < 1e-12));

        let disc = linearized_sim(&p, Direction::Discriminator, 1e-3, 200).unwrap();
        let g = &disc.fit()[7];
        assert_eq!(g.predicted, -f.predicted);
        assert!(g.measured > 0.0 && g.rel_err < 1e-10);
    }

    #[test]
    fn mean_mode_is_constant() {
        let k = KernelSpec::gaussian(2.0);
        let mut p = GridPerturbation::seeded_noise(k, PeriodicGrid::new(40.0, 1024).unwrap(), 0.5, 1e-2, 3).unwrap();
        p.values.iter_mut().for_each(|v| *v += 0.25);
        let h = linearized_sim(&p, Direction::Discriminator, 1e-2, 50).unwrap();
        assert!((h.mean - p.values.iter().sum::<f64>() / 1024.0).abs() < 1e-15);
        assert!(h.amplitudes.iter().all(|a| a[0] == h.amplitudes[0][0]));
    }

    #[test]
    fn rejects_unstable_step_and_bad_input() {
        let k = KernelSpec::gaussian(1.0);
        let p = GridPerturbation::seeded_noise(k.clone(), grid(), 1.0, 1.0, 0).unwrap();
        assert!(linearized_sim(&p, Direction::Generator, 10.0, 5).is_err());
        assert!(linearized_sim(&p, Direction::Generator, 0.0, 5).is_err());
        assert!(GridPerturbation::new(k.clone(), grid(), 1.0, vec![0.0; 10]).is_err());
        assert!(GridPerturbation::single_mode(k, grid(), 1.0, 600, 1.0).is_err());
    }

    #[test]
    fn csv_header() {
        let k = KernelSpec::gaussian(1.0);
        let p = GridPerturbation::single_mode(k, grid(), 1.0, 2, 1.0).unwrap();
        let h = linearized_sim(&p, Direction::Generator, 1e-3, 3).unwrap();
        let csv = fits_to_csv(&h.fit());
        assert!(csv.starts_with("mode,xi,predicted,measured,raw_slope,rel_err,resolved\n1,"));
        assert_eq!(csv.lines().count(), 1 + 512);
    }
}
