//! Discrete spectrum of the periodic grid convolution operator.
//!
//! On a periodic domain of length `L` the convolution `e * v` only sees the
//! periodisation `Σₙ e(x + nL)` of the kernel. Sampling that periodisation on
//! `M` equispaced nodes gives a symmetric circulant matrix whose eigenvalues
//! (times the cell width `h`) are returned here. Image sums of slowly
//! decaying profiles are regularised by second differences
//! `e(x + nL) + e(x − nL) − 2e(nL)`, which shifts only the mean mode.

use std::f64::consts::PI;

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{EvalOptions, KernelSpec, Weighted};

/// Image sums stop once a term falls below this fraction of the profile scale.
const IMAGE_TOL: f64 = 1e-17;
const MAX_IMAGES: usize = 2000;

/// Periodic 1-D grid: `points` nodes on `[−half_width, half_width)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodicGrid {
    pub half_width: f64,
    pub points: usize,
}

impl PeriodicGrid {
    pub fn new(half_width: f64, points: usize) -> Result<Self> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidConfig(format!("half width must be positive, got {half_width}")));
        }
        if points < 4 || !points.is_power_of_two() {
            return Err(Error::InvalidConfig(format!(
                "grid points must be a power of two >= 4, got {points}"
            )));
        }
        Ok(Self { half_width, points })
    }

    /// Default grid for a kernel: 40 length scales wide, 4096 nodes.
    pub fn for_kernel(k: &KernelSpec) -> Self {
        let scale = k.length_scale().unwrap_or(1.0);
        Self {
            half_width: 20.0 * scale,
            points: 4096,
        }
    }

    pub fn length(&self) -> f64 {
        2.0 * self.half_width
    }

    pub fn spacing(&self) -> f64 {
        self.length() / self.points as f64
    }

    /// Node coordinate in wrapped order: `0, h, …, (M/2)h, −(M/2 − 1)h, …, −h`.
    pub fn node(&self, j: usize) -> f64 {
        let h = self.spacing();
        if j <= self.points / 2 {
            j as f64 * h
        } else {
            (j as f64 - self.points as f64) * h
        }
    }

    /// Cycle frequency `k / L` of mode `k` (wrapped to be signed).
    pub fn frequency(&self, k: usize) -> f64 {
        let signed = if k <= self.points / 2 {
            k as f64
        } else {
            k as f64 - self.points as f64
        };
        signed / self.length()
    }
}

/// Eigenvalues of the grid convolution operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpectrum {
    pub grid: PeriodicGrid,
    /// `h · DFT(sampled periodised kernel)` for every mode `k = 0..M`.
    pub eigenvalues: Vec<f64>,
}

impl GridSpectrum {
    /// Non-negative modes `k = 0..=M/2` as `(cycle frequency, value)`.
    pub fn modes(&self) -> Vec<(f64, f64)> {
        (0..=self.grid.points / 2)
            .map(|k| (self.grid.frequency(k), self.eigenvalues[k]))
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Values below `rel · max|λ|` are treated as numerically zero.
    pub fn noise_floor(&self, rel: f64) -> f64 {
        rel * self.max_abs()
    }

    /// Interpolation in cycle frequency over the non-negative modes.
    /// `None` outside `[1/L, M/(2L)]`.
    pub fn interpolate(&self, xi_cycle: f64) -> Option<f64> {
        let pos = xi_cycle * self.grid.length();
        let half = self.grid.points / 2;
        if !(pos >= 1.0) || pos > half as f64 {
            return None;
        }
        let lo = pos.floor() as usize;
        let hi = (lo + 1).min(half);
        let t = pos - lo as f64;
        let (a, b) = (self.eigenvalues[lo], self.eigenvalues[hi]);
        if a * b > 0.0 {
            // geometric between same-sign neighbours, the spectra decay fast
            Some(a.signum() * ((1.0 - t) * a.abs().ln() + t * b.abs().ln()).exp())
        } else {
            Some((1.0 - t) * a + t * b)
        }
    }
}

/// Grid spectrum of `k` on `grid` (the independent sign oracle).
///
/// The grid is one-dimensional, so an unset elastic exponent resolves to
/// `n − 1 = 0`, the logarithmic member of the family.
pub fn oracle_ft(k: &KernelSpec, grid: PeriodicGrid) -> Result<GridSpectrum> {
    k.validate()?;
    let h = grid.spacing();
    if let Some(scale) = k.min_length_scale() {
        let cells = scale / h;
        if cells < 4.0 {
            return Err(Error::GridTooCoarse {
                length_scale: scale,
                cells,
            });
        }
    }
    let m = grid.points;
    let half = m / 2;
    let mut samples = vec![0.0; m];
    for j in 0..=half {
        let v = periodised(k, grid.node(j).abs(), grid.length())?;
        samples[j] = v;
        if j > 0 && j < half {
            samples[m - j] = v;
        }
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("oracle sampling"));
    }

    let mut buf: Vec<Complex<f64>> = samples.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);
    let mut eigenvalues: Vec<f64> = buf.iter().map(|c| c.re * h).collect();
    // exact symmetry of the circulant: pair k with M − k
    for kk in 1..half {
        let avg = 0.5 * (eigenvalues[kk] + eigenvalues[m - kk]);
        eigenvalues[kk] = avg;
        eigenvalues[m - kk] = avg;
    }
    Ok(GridSpectrum { grid, eigenvalues })
}

fn periodised(k: &KernelSpec, x: f64, length: f64) -> Result<f64> {
    let profile = |r: f64| k.radial_profile_with(r, 1, EvalOptions::default());
    match k {
        KernelSpec::Sum { terms } => {
            let mut acc = 0.0;
            for Weighted { weight, kernel } in terms {
                acc += weight * periodised(kernel, x, length)?;
            }
            Ok(acc)
        }
        KernelSpec::Stabilized {
            base,
            stabilizer,
            epsilon,
        } => Ok(periodised(base, x, length)? - epsilon * periodised(stabilizer, x, length)?),
        // images of −|x| are affine on the cell and only move the mean mode
        KernelSpec::Cramer { .. } => profile(x),
        KernelSpec::Elastic { exponent } if KernelSpec::elastic_exponent(*exponent, 1) == 0.0 => {
            // Σₙ −ln|x + nL| regularised = −ln|(L/π) sin(πx/L)|
            let r = x.max(EvalOptions::default().r_min);
            Ok(-((length / PI) * (PI * r / length).sin()).abs().ln())
        }
        KernelSpec::GaussianRbf { .. } | KernelSpec::RescaledGaussian { .. } => {
            let mut acc = profile(x)?;
            let scale = profile(0.0)?.abs();
            for n in 1..=MAX_IMAGES {
                let shift = n as f64 * length;
                let term = profile(shift + x)? + profile(shift - x)?;
                acc += term;
                if term.abs() <= IMAGE_TOL * scale {
                    break;
                }
            }
            Ok(acc)
        }
        _ => {
            let mut acc = profile(x)?;
            let scale = profile(0.5 * length)?.abs().max(f64::MIN_POSITIVE);
            for n in 1..=MAX_IMAGES {
                let shift = n as f64 * length;
                let term = profile(shift + x)? + profile(shift - x)? - 2.0 * profile(shift)?;
                acc += term;
                if term.abs() <= IMAGE_TOL * scale {
                    break;
                }
            }
            Ok(acc)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct O(M²) cosine sum, no FFT and no image sums. Valid for kernels
    /// that are negligible at the domain edge.
    fn direct_spectrum(k: &KernelSpec, grid: PeriodicGrid) -> Vec<f64> {
        let m = grid.points;
        let h = grid.spacing();
        (0..=m / 2)
            .map(|kk| {
                (0..m)
                    .map(|j| {
                        let x = grid.node(j);
                        k.radial_profile(x.abs(), 1).unwrap()
                            * (2.0 * PI * (kk * j) as f64 / m as f64).cos()
                    })
                    .sum::<f64>()
                    * h
            })
            .collect()
    }

    #[test]
    fn gaussian_spectrum_positive_and_matches_direct_sum() {
        let k = KernelSpec::gaussian(1.0);
        let grid = PeriodicGrid::new(20.0, 4096).unwrap();
        let s = oracle_ft(&k, grid).unwrap();
        let floor = s.noise_floor(1e-9);
        assert!(s.modes().iter().filter(|(_, v)| v.abs() > floor).all(|(_, v)| *v > 0.0));

        let small = PeriodicGrid::new(10.0, 256).unwrap();
        let fast = oracle_ft(&k, small).unwrap();
        let slow = direct_spectrum(&k, small);
        for (a, b) in fast.modes().iter().zip(&slow) {
            assert!((a.1 - b).abs() < 1e-12, "{} vs {}", a.1, b);
        }
    }

    #[test]
    fn stabilized_gaussian_pair_is_negative_away_from_zero() {
        let k = KernelSpec::stabilized(
            KernelSpec::rescaled_gaussian(4.0),
            KernelSpec::rescaled_gaussian(1.0),
            1.5,
        );
        let s = oracle_ft(&k, PeriodicGrid::for_kernel(&k)).unwrap();
        let floor = s.noise_floor(1e-9);
        let modes = s.modes();
        assert!(modes[1..].iter().filter(|(_, v)| v.abs() > floor).all(|(_, v)| *v < 0.0));
        assert!(modes[1].1 < 0.0);
    }

    #[test]
    fn rational_quadratic_spectra_are_positive() {
        // (1 + r²/2α)^(−α) is a scale mixture of Gaussians, so its transform
        // is positive; the periodised oracle must not invent sign changes.
        for alpha in [0.5, 1.0, 2.0, 3.0] {
            let k = KernelSpec::rational_quadratic(alpha);
            let s = oracle_ft(&k, PeriodicGrid::for_kernel(&k)).unwrap();
            let floor = s.noise_floor(1e-9);
            let bad: Vec<_> = s.modes()[1..]
                .iter()
                .filter(|(_, v)| v.abs() > floor && *v < 0.0)
                .cloned()
                .collect();
            assert!(bad.is_empty(), "alpha {alpha}: {:?}", &bad[..bad.len().min(5)]);
        }
    }

    #[test]
    fn cramer_triangle_wave_spectrum() {
        // −|x| periodised is a triangle wave: odd modes 4/(L b²)·L, even modes zero.
        let grid = PeriodicGrid::new(20.0, 1024).unwrap();
        let s = oracle_ft(&KernelSpec::cramer(), grid).unwrap();
        let floor = s.noise_floor(1e-9);
        let l = grid.length();
        for (kk, (_, v)) in s.modes().iter().enumerate().skip(1).take(20) {
            if kk % 2 == 0 {
                assert!(v.abs() < floor, "{kk}: {v}");
            } else {
                let b = 2.0 * PI * kk as f64 / l;
                let continuous = 4.0 / (b * b);
                assert!(*v > 0.0);
                assert!((v - continuous).abs() / continuous < 1e-2, "{kk}: {v} vs {continuous}");
            }
        }
    }

    #[test]
    fn logarithmic_elastic_spectrum_is_positive() {
        let k = KernelSpec::elastic();
        let s = oracle_ft(&k, PeriodicGrid::for_kernel(&k)).unwrap();
        assert!(s.modes()[1..].iter().all(|(_, v)| *v > 0.0));
        // continuous transform of −ln|x| is 1/(2|ξ|)
        let (xi, v) = s.modes()[3];
        assert!((v - 0.5 / xi).abs() / (0.5 / xi) < 0.3);
    }

    #[test]
    fn coarse_grid_rejected() {
        let k = KernelSpec::gaussian(0.01);
        let err = oracle_ft(&k, PeriodicGrid::new(20.0, 4096).unwrap()).unwrap_err();
        assert!(matches!(err, Error::GridTooCoarse { .. }));
        assert!(PeriodicGrid::new(20.0, 1000).is_err());
    }
}
