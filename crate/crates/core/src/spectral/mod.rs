//! Fourier-space linear stability of particle flows.
//!
//! A small density perturbation `v` around a locally constant background
//! `C₀` evolves mode by mode as `v̂(ξ, t) ∝ exp(ω(ξ) t)` with
//! `ω(ξ) = ∓C (2π)² |ξ|² F(e)(ξ)`: minus for the generator (descent), plus
//! for the discriminator (ascent). The sign of the transform therefore
//! decides which direction is stable.
//!
//! [`analytic_ft`] returns closed forms in the tabulated frequency variable.
//! [`oracle_ft`] computes the exact spectrum of the discretised operator and
//! is the arbiter whenever the two disagree in sign. [`Convention`] maps
//! between the two frequency and amplitude scales.

mod bessel;
mod oracle;
mod report;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{KernelSpec, Weighted};

pub use bessel::bessel_k0;
pub use oracle::{oracle_ft, GridSpectrum, PeriodicGrid};
pub use report::{reference_rows, ReferenceRow, RowCheck, SpectrumReport, SpectrumSummary};

/// Relative noise floor below which oracle values count as zero.
pub const ORACLE_NOISE_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Descent on the energy.
    Generator,
    /// Ascent on the energy.
    Discriminator,
}

impl Direction {
    /// `−1` for descent, `+1` for ascent.
    pub fn sign(self) -> f64 {
        match self {
            Self::Generator => -1.0,
            Self::Discriminator => 1.0,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Self::Generator => Self::Discriminator,
            Self::Discriminator => Self::Generator,
        }
    }
}

impl std::str::FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "generator" | "gen" | "g" => Ok(Self::Generator),
            "discriminator" | "disc" | "d" => Ok(Self::Discriminator),
            other => Err(Error::InvalidConfig(format!("unknown direction `{other}`"))),
        }
    }
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Generator => "generator",
            Self::Discriminator => "discriminator",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// Every mode decays.
    Stable,
    /// Every mode grows.
    Unstable,
    /// The sign of the growth rate depends on the mode.
    MixedByMode,
    /// No mode is distinguishable from zero.
    NeutrallyStable,
}

impl Verdict {
    pub fn is_stable(self) -> bool {
        self == Self::Stable
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Stable => "stable",
            Self::Unstable => "unstable",
            Self::MixedByMode => "mixed_by_mode",
            Self::NeutrallyStable => "neutrally_stable",
        })
    }
}

/// `(generator, discriminator)` verdicts from transform values. Values with
/// magnitude at or below `floor` are ignored.
pub fn verdict_from_values<I: IntoIterator<Item = f64>>(values: I, floor: f64) -> (Verdict, Verdict) {
    let (mut pos, mut neg) = (false, false);
    for v in values {
        if v > floor {
            pos = true;
        } else if v < -floor {
            neg = true;
        }
    }
    match (pos, neg) {
        (true, false) => (Verdict::Stable, Verdict::Unstable),
        (false, true) => (Verdict::Unstable, Verdict::Stable),
        (true, true) => (Verdict::MixedByMode, Verdict::MixedByMode),
        (false, false) => (Verdict::NeutrallyStable, Verdict::NeutrallyStable),
    }
}

/// Closed-form transform of the radial part of `k` at mode magnitude `xi`
/// in ambient dimension `dim`.
///
/// The rational-quadratic entries for α ∈ {1, 2, 3} carry the decaying
/// factor `e^{−|ξ|}`; the printed `e^{+|ξ|}` is not the transform of an
/// integrable profile. The sign pattern of each entry is unchanged by this.
pub fn analytic_ft(k: &KernelSpec, xi: f64, dim: usize) -> Result<f64> {
    if !(xi >= 0.0) || !xi.is_finite() {
        return Err(Error::InvalidConfig(format!("mode magnitude must be finite and >= 0, got {xi}")));
    }
    if dim == 0 {
        return Err(Error::InvalidConfig("dimension must be positive".into()));
    }
    Ok(match k {
        KernelSpec::GaussianRbf { sigma } => sigma * (-sigma * sigma * xi * xi / 4.0).exp(),
        KernelSpec::RescaledGaussian { sigma } => (-sigma * sigma * xi * xi / 4.0).exp(),
        KernelSpec::RationalQuadratic { alpha } => rq_entry(*alpha, xi)?,
        KernelSpec::RescaledRq { alpha } => alpha * rq_entry(*alpha, xi)?,
        KernelSpec::Cramer { .. } => {
            if xi == 0.0 {
                return Err(Error::ModeAtZero);
            }
            cramer_constant(dim) / xi.powi(dim as i32 + 1)
        }
        KernelSpec::Elastic { exponent } => {
            let p = KernelSpec::elastic_exponent(*exponent, dim);
            if p != (dim - 1) as f64 {
                return Err(Error::UnsupportedKernel(format!(
                    "elastic exponent {p} in dimension {dim} (only n - 1 is tabulated)"
                )));
            }
            if xi == 0.0 {
                return Err(Error::ModeAtZero);
            }
            1.0 / xi
        }
        KernelSpec::Sum { terms } => {
            let mut acc = 0.0;
            for Weighted { weight, kernel } in terms {
                acc += weight * analytic_ft(kernel, xi, dim)?;
            }
            acc
        }
        KernelSpec::Stabilized {
            base,
            stabilizer,
            epsilon,
        } => analytic_ft(base, xi, dim)? - epsilon * analytic_ft(stabilizer, xi, dim)?,
    })
}

fn rq_entry(alpha: f64, xi: f64) -> Result<f64> {
    let decay = (-xi).exp();
    if alpha == 0.5 {
        if xi == 0.0 {
            return Err(Error::ModeAtZero);
        }
        Ok(bessel_k0(xi)? / alpha)
    } else if alpha == 1.0 {
        Ok(decay / alpha)
    } else if alpha == 2.0 {
        Ok((8.0 - xi) * decay / alpha)
    } else if alpha == 3.0 {
        Ok(3.0 / (4.0 * alpha) * (xi * xi - 3.0 * xi + 3.0) * decay)
    } else {
        Err(Error::UnsupportedAlpha(alpha))
    }
}

/// `Cₙ = Γ((n+1)/2) / (2 π^{(n+3)/2})`, the transform constant of `−‖x‖`.
pub fn cramer_constant(dim: usize) -> f64 {
    gamma_half(dim + 1) / (2.0 * PI.powf((dim as f64 + 3.0) / 2.0))
}

/// `Γ(m / 2)` for a positive integer `m`.
fn gamma_half(m: usize) -> f64 {
    let (mut acc, mut x) = if m % 2 == 0 { (1.0, 1.0) } else { (PI.sqrt(), 0.5) };
    while x < m as f64 / 2.0 {
        acc *= x;
        x += 1.0;
    }
    acc
}

/// `∓C (2π)² |ξ|² F(e)(ξ)`.
pub fn growth_rate(k: &KernelSpec, direction: Direction, c: f64, xi: f64, dim: usize) -> Result<f64> {
    if !(c >= 0.0) {
        return Err(Error::InvalidConfig(format!("background constant must be >= 0, got {c}")));
    }
    if c == 0.0 {
        return Ok(0.0);
    }
    let ft = analytic_ft(k, xi, dim)?;
    Ok(growth_from_ft(direction, c, xi, ft))
}

#[inline]
pub fn growth_from_ft(direction: Direction, c: f64, xi: f64, ft: f64) -> f64 {
    direction.sign() * c * (2.0 * PI * xi).powi(2) * ft
}

/// Verdicts from the sign of [`analytic_ft`] on `xi_grid`.
pub fn stability_verdict(k: &KernelSpec, xi_grid: &[f64], dim: usize) -> Result<(Verdict, Verdict)> {
    check_grid(xi_grid)?;
    let values = xi_grid
        .iter()
        .map(|&xi| analytic_ft(k, xi, dim))
        .collect::<Result<Vec<_>>>()?;
    Ok(verdict_from_values(values, 0.0))
}

fn check_grid(xi_grid: &[f64]) -> Result<()> {
    if xi_grid.is_empty() {
        return Err(Error::InvalidConfig("empty mode grid".into()));
    }
    if let Some(bad) = xi_grid.iter().find(|x| !(**x > 0.0 && x.is_finite())) {
        return Err(Error::InvalidConfig(format!("mode grid entries must be positive, got {bad}")));
    }
    Ok(())
}

/// `n` logarithmically spaced points on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            let mut g: Vec<f64> = (0..n)
                .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
                .collect();
            g[0] = lo;
            g[n - 1] = hi;
            g
        }
    }
}

/// 512 log-spaced modes on `[0.05, 50]`.
pub fn default_xi_grid() -> Vec<f64> {
    log_grid(0.05, 50.0, 512)
}

/// Zero crossings of [`analytic_ft`] between consecutive grid points,
/// refined by bisection.
pub fn sign_changes(k: &KernelSpec, xi_grid: &[f64], dim: usize) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for w in xi_grid.windows(2) {
        let (mut a, mut b) = (w[0], w[1]);
        let mut fa = analytic_ft(k, a, dim)?;
        let fb = analytic_ft(k, b, dim)?;
        if fa == 0.0 || fa.signum() == fb.signum() {
            continue;
        }
        for _ in 0..100 {
            let m = 0.5 * (a + b);
            let fm = analytic_ft(k, m, dim)?;
            if fm.signum() == fa.signum() {
                a = m;
                fa = fm;
            } else {
                b = m;
            }
            if b - a <= 1e-12 * b {
                break;
            }
        }
        out.push(0.5 * (a + b));
    }
    Ok(out)
}

/// Result of [`minimal_epsilon`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilizerSolution {
    /// `sup_ξ F(base)(ξ) / F(s)(ξ)` over the grid.
    pub epsilon_min: f64,
    /// Mode at which the supremum is attained.
    pub argmax_xi: f64,
    pub certified_grid: Vec<f64>,
    /// `ε` at which `margin` was evaluated, just above `epsilon_min`.
    pub certified_epsilon: f64,
    /// `min_ξ −F(base − ε s)(ξ)` at `certified_epsilon`.
    pub margin: f64,
}

/// Smallest `ε` making `F(base − ε s) < 0` on `xi_grid`.
pub fn minimal_epsilon(
    base: &KernelSpec,
    stabilizer: &KernelSpec,
    xi_grid: &[f64],
    dim: usize,
) -> Result<StabilizerSolution> {
    check_grid(xi_grid)?;
    let mut pairs = Vec::with_capacity(xi_grid.len());
    let (mut epsilon_min, mut argmax_xi) = (f64::NEG_INFINITY, xi_grid[0]);
    for &xi in xi_grid {
        let fs = analytic_ft(stabilizer, xi, dim)?;
        if !(fs > 0.0) {
            return Err(Error::StabilizerInvalid { xi });
        }
        let fb = analytic_ft(base, xi, dim)?;
        let ratio = fb / fs;
        if ratio > epsilon_min {
            epsilon_min = ratio;
            argmax_xi = xi;
        }
        pairs.push((fb, fs));
    }
    let certified_epsilon = epsilon_min + 1e-6 * epsilon_min.abs();
    let margin = pairs
        .iter()
        .map(|(fb, fs)| certified_epsilon * fs - fb)
        .fold(f64::INFINITY, f64::min);
    Ok(StabilizerSolution {
        epsilon_min,
        argmax_xi,
        certified_grid: xi_grid.to_vec(),
        certified_epsilon,
        margin,
    })
}

/// Map between the oracle's cycle frequency and the tabulated closed forms.
///
/// The tabulated Gaussian entry `σ e^{−σ²ξ²/4}` equals the cycle-convention
/// transform `√(2π) σ e^{−2π²σ²ν²}` when `ξ = 2√2 π ν`. The frequency factor
/// is fixed by that identity; the amplitude is fitted once against the
/// oracle on the unit Gaussian and reused for every other kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Convention {
    /// Oracle value ≈ `amplitude · analytic_ft(frequency · ν)`.
    pub amplitude: f64,
    /// Tabulated `ξ` per unit cycle frequency `ν`.
    pub frequency: f64,
}

impl Convention {
    pub const FREQUENCY: f64 = 2.0 * std::f64::consts::SQRT_2 * PI;

    /// Least-squares amplitude on the unit Gaussian, default grid.
    pub fn calibrate() -> Result<Self> {
        let k = KernelSpec::gaussian(1.0);
        let spectrum = oracle_ft(&k, PeriodicGrid::for_kernel(&k))?;
        let floor = spectrum.max_abs() * 1e-6;
        let (mut num, mut den) = (0.0, 0.0);
        for (nu, o) in spectrum.modes() {
            if o > floor {
                let a = analytic_ft(&k, Self::FREQUENCY * nu, 1)?;
                num += o * a;
                den += a * a;
            }
        }
        Ok(Self {
            amplitude: num / den,
            frequency: Self::FREQUENCY,
        })
    }

    pub fn table_xi(&self, nu: f64) -> f64 {
        self.frequency * nu
    }

    pub fn cycle_xi(&self, xi: f64) -> f64 {
        xi / self.frequency
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn table_entries() {
        assert_eq!(analytic_ft(&KernelSpec::gaussian(2.0), 0.0, 1).unwrap(), 2.0);
        assert_eq!(analytic_ft(&KernelSpec::elastic(), 2.0, 1).unwrap(), 0.5);
        assert_eq!(analytic_ft(&KernelSpec::elastic_with_exponent(1.0), 2.0, 2).unwrap(), 0.5);
        assert!(matches!(
            analytic_ft(&KernelSpec::elastic_with_exponent(1.0), 2.0, 1),
            Err(Error::UnsupportedKernel(_))
        ));
        assert!(matches!(analytic_ft(&KernelSpec::elastic(), 0.0, 3), Err(Error::ModeAtZero)));
        assert!(matches!(
            analytic_ft(&KernelSpec::rational_quadratic(1.5), 1.0, 1),
            Err(Error::UnsupportedAlpha(_))
        ));
        assert_relative_eq!(
            analytic_ft(&KernelSpec::rational_quadratic(0.5), 1.0, 1).unwrap(),
            2.0 * 0.421_024_438_240_708_34,
            max_relative = 1e-13
        );
        let a2 = KernelSpec::rational_quadratic(2.0);
        assert!(analytic_ft(&a2, 7.9, 1).unwrap() > 0.0);
        assert!(analytic_ft(&a2, 8.1, 1).unwrap() < 0.0);
        assert_relative_eq!(cramer_constant(1), 1.0 / (2.0 * PI * PI), max_relative = 1e-15);
        // Γ(2)/(2π^{5/2}) in 3-D
        assert_relative_eq!(cramer_constant(3), 1.0 / (2.0 * PI.powf(3.0)), max_relative = 1e-15);
    }

    #[test]
    fn composite_transforms_are_linear() {
        let b = KernelSpec::rescaled_gaussian(4.0);
        let s = KernelSpec::rescaled_gaussian(1.0);
        let k = KernelSpec::stabilized(b.clone(), s.clone(), 1.5);
        for xi in [0.1, 1.0, 3.0] {
            let want = analytic_ft(&b, xi, 2).unwrap() - 1.5 * analytic_ft(&s, xi, 2).unwrap();
            assert_eq!(analytic_ft(&k, xi, 2).unwrap(), want);
        }
    }

    #[test]
    fn growth_rates() {
        let g = KernelSpec::gaussian(1.0);
        let want = (2.0 * PI).powi(2) * (-0.25f64).exp();
        let got = growth_rate(&g, Direction::Discriminator, 1.0, 1.0, 1).unwrap();
        assert_relative_eq!(got, want, max_relative = 1e-15);
        assert!((got - 30.74).abs() < 0.01);
        assert_eq!(growth_rate(&g, Direction::Generator, 1.0, 1.0, 1).unwrap(), -got);
        assert_eq!(growth_rate(&g, Direction::Generator, 0.0, 1.0, 1).unwrap(), 0.0);
        for sigma in [0.5, 1.0, 3.0] {
            for xi in [0.01, 0.5, 2.0] {
                let r = growth_rate(&KernelSpec::gaussian(sigma), Direction::Generator, 2.0, xi, 1).unwrap();
                assert!(r < 0.0);
            }
        }
    }

    #[test]
    fn tabulated_verdicts() {
        let grid = default_xi_grid();
        use Verdict::*;
        for sigma in [0.5, 1.0, 4.0] {
            assert_eq!(
                stability_verdict(&KernelSpec::gaussian(sigma), &grid, 1).unwrap(),
                (Stable, Unstable)
            );
        }
        assert_eq!(stability_verdict(&KernelSpec::elastic(), &grid, 1).unwrap(), (Stable, Unstable));
        assert_eq!(
            stability_verdict(&KernelSpec::rational_quadratic(2.0), &grid, 1).unwrap(),
            (MixedByMode, MixedByMode)
        );
        assert_eq!(
            stability_verdict(&KernelSpec::rational_quadratic(3.0), &grid, 1).unwrap(),
            (Stable, Unstable)
        );
        let flips = sign_changes(&KernelSpec::rational_quadratic(2.0), &grid, 1).unwrap();
        assert_eq!(flips.len(), 1);
        assert_relative_eq!(flips[0], 8.0, max_relative = 1e-10);
        assert!(stability_verdict(&KernelSpec::cramer(), &[], 1).is_err());
        assert!(stability_verdict(&KernelSpec::cramer(), &[0.0, 1.0], 1).is_err());
    }

    #[test]
    fn verdict_rule() {
        use Verdict::*;
        assert_eq!(verdict_from_values([1.0, 2.0], 0.0), (Stable, Unstable));
        assert_eq!(verdict_from_values([-1.0, -2.0], 0.0), (Unstable, Stable));
        assert_eq!(verdict_from_values([-1.0, 2.0], 0.0), (MixedByMode, MixedByMode));
        assert_eq!(verdict_from_values([1e-12, -1e-12], 1e-9), (NeutrallyStable, NeutrallyStable));
        assert_eq!(verdict_from_values([1.0, 0.0], 0.0), (Stable, Unstable));
    }

    #[test]
    fn minimal_epsilon_cases() {
        let b = KernelSpec::rescaled_gaussian(4.0);
        let s = KernelSpec::rescaled_gaussian(1.0);
        let sol = minimal_epsilon(&b, &s, &log_grid(1e-3, 20.0, 400), 1).unwrap();
        assert!(sol.epsilon_min < 1.0 && sol.epsilon_min > 0.9999);
        assert!(sol.margin > 0.0);
        assert_eq!(sol.argmax_xi, 1e-3);

        let same = minimal_epsilon(&s, &s, &default_xi_grid(), 1).unwrap();
        assert_eq!(same.epsilon_min, 1.0);

        let rq = minimal_epsilon(
            &KernelSpec::rescaled_rq(0.5),
            &KernelSpec::rescaled_rq(1.0),
            &log_grid(0.5, 20.0, 200),
            1,
        )
        .unwrap();
        // K₀(ξ)e^{ξ} decreases, so the supremum sits on the first grid point
        assert_eq!(rq.argmax_xi, 0.5);
        assert_relative_eq!(rq.epsilon_min, bessel_k0(0.5).unwrap() * 0.5f64.exp(), max_relative = 1e-14);
        assert!((rq.epsilon_min - 1.524).abs() < 1e-3);

        let err = minimal_epsilon(&b, &KernelSpec::rational_quadratic(2.0), &default_xi_grid(), 1);
        assert!(matches!(err, Err(Error::StabilizerInvalid { .. })));
    }

    #[test]
    fn convention_fits_unit_gaussian() {
        let c = Convention::calibrate().unwrap();
        assert_relative_eq!(c.amplitude, (2.0 * PI).sqrt(), max_relative = 1e-6);
    }

    #[test]
    fn calibrated_gaussian_values_match_oracle_modes() {
        let conv = Convention::calibrate().unwrap();
        for sigma in [1.0, 2.0, 4.0] {
            let k = KernelSpec::gaussian(sigma);
            let spectrum = oracle_ft(&k, PeriodicGrid::for_kernel(&k)).unwrap();
            let floor = spectrum.max_abs() * 1e-9;
            let mut checked = 0;
            for (nu, o) in spectrum.modes().into_iter().skip(1) {
                if o > floor {
                    let a = conv.amplitude * analytic_ft(&k, conv.table_xi(nu), 1).unwrap();
                    assert!((a - o).abs() / o < 1e-3, "sigma {sigma}, nu {nu}: {a} vs {o}");
                    checked += 1;
                }
            }
            assert!(checked > 20);
        }
    }

    #[test]
    fn log_grid_endpoints() {
        let g = default_xi_grid();
        assert_eq!(g.len(), 512);
        assert_relative_eq!(g[0], 0.05, max_relative = 1e-14);
        assert_relative_eq!(g[511], 50.0, max_relative = 1e-14);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }
}
