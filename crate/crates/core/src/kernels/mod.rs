//! Pair potentials `e(x, y)` used by particle-based distances.
//!
//! Every variant except [`KernelSpec::Cramer`] is a function of the separation
//! `r = ‖x − y‖` only. Cramér additionally depends on the distance of each
//! point to an anchor `z₀`; those anchor terms cancel in the three-term
//! energy, so its radial part is `−r`.
//!
//! Gradients are closed form. Finite differences only appear in tests.

mod grammar;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use grammar::parse_kernel;

/// Default separation floor below which singular profiles are clamped.
pub const DEFAULT_R_MIN: f64 = 1e-12;

/// A weighted member of a [`KernelSpec::Sum`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Weighted {
    pub weight: f64,
    pub kernel: KernelSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    /// `exp(−r² / 2σ²)`
    GaussianRbf { sigma: f64 },
    /// `(1 + r² / 2α)^(−α)`
    RationalQuadratic { alpha: f64 },
    /// `‖x − z₀‖ + ‖y − z₀‖ − ‖x − y‖`; `z0 = None` is the origin.
    Cramer {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        z0: Option<Vec<f64>>,
    },
    /// `1 / r^p`, with `p = n − 1` for ambient dimension `n` when unset.
    /// `p = 0` is the logarithmic member `−ln r` of the family.
    Elastic {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        exponent: Option<f64>,
    },
    /// `(1/σ) exp(−r² / 2σ²)`
    RescaledGaussian { sigma: f64 },
    /// `α (1 + r² / 2α)^(−α)`
    RescaledRq { alpha: f64 },
    Sum { terms: Vec<Weighted> },
    /// `base − ε · stabilizer`
    Stabilized {
        base: Box<KernelSpec>,
        stabilizer: Box<KernelSpec>,
        epsilon: f64,
    },
}

/// How singular profiles behave when two points (nearly) coincide.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub r_min: f64,
    /// Report [`Error::SingularPair`] instead of clamping.
    pub strict: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            r_min: DEFAULT_R_MIN,
            strict: false,
        }
    }
}

impl EvalOptions {
    pub fn strict() -> Self {
        Self {
            strict: true,
            ..Self::default()
        }
    }
}

/// Value and gradient of a pair potential at one pair of points.
#[derive(Debug, Clone, PartialEq)]
pub struct PairEnergy {
    pub value: f64,
    pub grad_x: Vec<f64>,
}

impl KernelSpec {
    pub fn gaussian(sigma: f64) -> Self {
        Self::GaussianRbf { sigma }
    }

    pub fn rational_quadratic(alpha: f64) -> Self {
        Self::RationalQuadratic { alpha }
    }

    pub fn cramer() -> Self {
        Self::Cramer { z0: None }
    }

    pub fn elastic() -> Self {
        Self::Elastic { exponent: None }
    }

    pub fn elastic_with_exponent(exponent: f64) -> Self {
        Self::Elastic {
            exponent: Some(exponent),
        }
    }

    pub fn rescaled_gaussian(sigma: f64) -> Self {
        Self::RescaledGaussian { sigma }
    }

    pub fn rescaled_rq(alpha: f64) -> Self {
        Self::RescaledRq { alpha }
    }

    /// Equal-weight sum.
    pub fn sum<I: IntoIterator<Item = KernelSpec>>(kernels: I) -> Self {
        Self::Sum {
            terms: kernels
                .into_iter()
                .map(|kernel| Weighted {
                    weight: 1.0,
                    kernel,
                })
                .collect(),
        }
    }

    pub fn weighted_sum<I: IntoIterator<Item = (f64, KernelSpec)>>(terms: I) -> Self {
        Self::Sum {
            terms: terms
                .into_iter()
                .map(|(weight, kernel)| Weighted { weight, kernel })
                .collect(),
        }
    }

    pub fn stabilized(base: KernelSpec, stabilizer: KernelSpec, epsilon: f64) -> Self {
        Self::Stabilized {
            base: Box::new(base),
            stabilizer: Box::new(stabilizer),
            epsilon,
        }
    }

    /// Checks every parameter constraint recursively.
    pub fn validate(&self) -> Result<()> {
        fn positive(name: &str, v: f64) -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidKernel(format!("{name} must be positive and finite, got {v}")))
            }
        }
        match self {
            Self::GaussianRbf { sigma } | Self::RescaledGaussian { sigma } => positive("sigma", *sigma),
            Self::RationalQuadratic { alpha } | Self::RescaledRq { alpha } => positive("alpha", *alpha),
            Self::Cramer { z0 } => match z0 {
                Some(z) if z.iter().any(|c| !c.is_finite()) => {
                    Err(Error::InvalidKernel("cramer anchor must be finite".into()))
                }
                _ => Ok(()),
            },
            Self::Elastic { exponent } => match exponent {
                Some(p) if !(p.is_finite() && *p >= 0.0) => Err(Error::InvalidKernel(format!(
                    "elastic exponent must be non-negative, got {p}"
                ))),
                _ => Ok(()),
            },
            Self::Sum { terms } => {
                if terms.is_empty() {
                    return Err(Error::InvalidKernel("sum needs at least one term".into()));
                }
                for t in terms {
                    positive("weight", t.weight)?;
                    t.kernel.validate()?;
                }
                Ok(())
            }
            Self::Stabilized {
                base,
                stabilizer,
                epsilon,
            } => {
                // epsilon = 0 is allowed as the degenerate stabilizer.
                if !(epsilon.is_finite() && *epsilon >= 0.0) {
                    return Err(Error::InvalidKernel(format!(
                        "epsilon must be non-negative, got {epsilon}"
                    )));
                }
                base.validate()?;
                stabilizer.validate()
            }
        }
    }

    /// Whether the profile diverges as `r → 0`.
    pub fn is_singular(&self) -> bool {
        match self {
            Self::Elastic { .. } => true,
            Self::Sum { terms } => terms.iter().any(|t| t.kernel.is_singular()),
            Self::Stabilized {
                base, stabilizer, ..
            } => base.is_singular() || stabilizer.is_singular(),
            _ => false,
        }
    }

    /// Whether `eval` depends on `‖x − y‖` alone (everything but Cramér).
    pub fn is_radial(&self) -> bool {
        match self {
            Self::Cramer { .. } => false,
            Self::Sum { terms } => terms.iter().all(|t| t.kernel.is_radial()),
            Self::Stabilized {
                base, stabilizer, ..
            } => base.is_radial() && stabilizer.is_radial(),
            _ => true,
        }
    }

    /// `(e, de/d(r²))` at squared separation `r2` for radial kernels, so a
    /// batch of pairs can share one distance computation.
    pub fn profile_r2(&self, r2: f64, dim: usize, opts: EvalOptions) -> Result<(f64, f64)> {
        match self {
            Self::Cramer { .. } => Err(Error::InvalidKernel("cramer is not a function of r alone".into())),
            Self::Sum { terms } => {
                let (mut e, mut s) = (0.0, 0.0);
                for t in terms {
                    let (te, ts) = t.kernel.profile_r2(r2, dim, opts)?;
                    e += t.weight * te;
                    s += t.weight * ts;
                }
                Ok((e, s))
            }
            Self::Stabilized {
                base,
                stabilizer,
                epsilon,
            } => {
                let (be, bs) = base.profile_r2(r2, dim, opts)?;
                let (se, ss) = stabilizer.profile_r2(r2, dim, opts)?;
                Ok((be - epsilon * se, bs - epsilon * ss))
            }
            _ => self.radial_r2(r2, dim, opts),
        }
    }

    /// Largest intrinsic length scale, `None` for scale-free profiles.
    pub fn length_scale(&self) -> Option<f64> {
        self.length_scales().into_iter().reduce(f64::max)
    }

    /// Smallest intrinsic length scale, `None` for scale-free profiles.
    pub fn min_length_scale(&self) -> Option<f64> {
        self.length_scales().into_iter().reduce(f64::min)
    }

    fn length_scales(&self) -> Vec<f64> {
        match self {
            Self::GaussianRbf { sigma } | Self::RescaledGaussian { sigma } => vec![*sigma],
            // half-height separation of (1 + r²/2α)^(−α) is of order √(2α)
            Self::RationalQuadratic { alpha } | Self::RescaledRq { alpha } => vec![(2.0 * alpha).sqrt()],
            Self::Cramer { .. } | Self::Elastic { .. } => vec![],
            Self::Sum { terms } => terms.iter().flat_map(|t| t.kernel.length_scales()).collect(),
            Self::Stabilized {
                base, stabilizer, ..
            } => {
                let mut v = base.length_scales();
                v.extend(stabilizer.length_scales());
                v
            }
        }
    }

    /// Resolves the default elastic exponent `n − 1` against dimension `dim`.
    pub fn elastic_exponent(exponent: Option<f64>, dim: usize) -> f64 {
        exponent.unwrap_or_else(|| dim.saturating_sub(1) as f64)
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.eval_with(x, y, EvalOptions::default())
    }

    pub fn eval_with(&self, x: &[f64], y: &[f64], opts: EvalOptions) -> Result<f64> {
        debug_assert_eq!(x.len(), y.len());
        let v = match self {
            Self::Cramer { z0 } => {
                let dx = anchor_distance(x, z0.as_deref());
                let dy = anchor_distance(y, z0.as_deref());
                dx + dy - dist2(x, y).sqrt()
            }
            Self::Sum { terms } => {
                let mut acc = 0.0;
                for t in terms {
                    acc += t.weight * t.kernel.eval_with(x, y, opts)?;
                }
                acc
            }
            Self::Stabilized {
                base,
                stabilizer,
                epsilon,
            } => base.eval_with(x, y, opts)? - epsilon * stabilizer.eval_with(x, y, opts)?,
            _ => self.radial_r2(dist2(x, y), x.len(), opts)?.0,
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite("kernel evaluation"))
        }
    }

    /// `∇ₓ e(x, y)`.
    pub fn grad(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; x.len()];
        self.add_grad(x, y, 1.0, EvalOptions::default(), &mut out)?;
        Ok(out)
    }

    pub fn pair_energy(&self, x: &[f64], y: &[f64]) -> Result<PairEnergy> {
        Ok(PairEnergy {
            value: self.eval(x, y)?,
            grad_x: self.grad(x, y)?,
        })
    }

    /// Accumulates `scale · ∇ₓ e(x, y)` into `out`.
    pub fn add_grad(
        &self,
        x: &[f64],
        y: &[f64],
        scale: f64,
        opts: EvalOptions,
        out: &mut [f64],
    ) -> Result<()> {
        debug_assert_eq!(x.len(), out.len());
        match self {
            Self::Cramer { z0 } => {
                // x − z₀ over its norm, zero where the unit vector is undefined
                match z0 {
                    Some(z) => add_unit(x, z, scale, out),
                    None => {
                        let r = anchor_distance(x, None);
                        if r > 0.0 {
                            for (o, a) in out.iter_mut().zip(x) {
                                *o += scale * a / r;
                            }
                        }
                    }
                }
                add_unit(x, y, -scale, out);
            }
            Self::Sum { terms } => {
                for t in terms {
                    t.kernel.add_grad(x, y, scale * t.weight, opts, out)?;
                }
            }
            Self::Stabilized {
                base,
                stabilizer,
                epsilon,
            } => {
                base.add_grad(x, y, scale, opts, out)?;
                stabilizer.add_grad(x, y, -scale * epsilon, opts, out)?;
            }
            _ => {
                let (_, slope) = self.radial_r2(dist2(x, y), x.len(), opts)?;
                let c = 2.0 * scale * slope;
                if !c.is_finite() {
                    return Err(Error::NonFinite("kernel gradient"));
                }
                for ((o, a), b) in out.iter_mut().zip(x).zip(y) {
                    *o += c * (a - b);
                }
            }
        }
        Ok(())
    }

    /// Radial profile `e(r)`; Cramér contributes its radial part `−r`.
    pub fn radial_profile(&self, r: f64, dim: usize) -> Result<f64> {
        self.radial_profile_with(r, dim, EvalOptions::default())
    }

    pub fn radial_profile_with(&self, r: f64, dim: usize, opts: EvalOptions) -> Result<f64> {
        if !(r >= 0.0) {
            return Err(Error::InvalidKernel(format!("radius must be non-negative, got {r}")));
        }
        let v = match self {
            Self::Sum { terms } => {
                let mut acc = 0.0;
                for t in terms {
                    acc += t.weight * t.kernel.radial_profile_with(r, dim, opts)?;
                }
                acc
            }
            Self::Stabilized {
                base,
                stabilizer,
                epsilon,
            } => {
                base.radial_profile_with(r, dim, opts)?
                    - epsilon * stabilizer.radial_profile_with(r, dim, opts)?
            }
            _ => self.radial_r2(r * r, dim, opts)?.0,
        };
        Ok(v)
    }

    /// Leaf profiles as functions of `r²`: `(e, de/d(r²))`.
    fn radial_r2(&self, r2: f64, dim: usize, opts: EvalOptions) -> Result<(f64, f64)> {
        Ok(match self {
            Self::GaussianRbf { sigma } => {
                let s2 = sigma * sigma;
                let e = (-r2 / (2.0 * s2)).exp();
                (e, -e / (2.0 * s2))
            }
            Self::RescaledGaussian { sigma } => {
                let s2 = sigma * sigma;
                let e = (-r2 / (2.0 * s2)).exp() / sigma;
                (e, -e / (2.0 * s2))
            }
            Self::RationalQuadratic { alpha } => {
                let base = 1.0 + r2 / (2.0 * alpha);
                let e = base.powf(-alpha);
                (e, -0.5 * e / base)
            }
            Self::RescaledRq { alpha } => {
                let base = 1.0 + r2 / (2.0 * alpha);
                let e = alpha * base.powf(-alpha);
                (e, -0.5 * e / base)
            }
            Self::Cramer { .. } => {
                let r = r2.sqrt();
                (-r, if r > 0.0 { -0.5 / r } else { 0.0 })
            }
            Self::Elastic { exponent } => {
                let p = Self::elastic_exponent(*exponent, dim);
                let floor2 = opts.r_min * opts.r_min;
                let r2 = if r2 < floor2 {
                    if opts.strict {
                        return Err(Error::SingularPair {
                            separation: r2.sqrt(),
                            floor: opts.r_min,
                        });
                    }
                    floor2
                } else {
                    r2
                };
                if p == 0.0 {
                    (-0.5 * r2.ln(), -0.5 / r2)
                } else {
                    let e = r2.powf(-0.5 * p);
                    (e, -0.5 * p * e / r2)
                }
            }
            Self::Sum { .. } | Self::Stabilized { .. } => unreachable!("composite kernels recurse"),
        })
    }
}

impl std::fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        grammar::write_kernel(self, f)
    }
}

impl std::str::FromStr for KernelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_kernel(s)
    }
}

#[inline]
pub(crate) fn dist2(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

fn anchor_distance(x: &[f64], z0: Option<&[f64]>) -> f64 {
    match z0 {
        Some(z) => dist2(x, z).sqrt(),
        None => x.iter().map(|a| a * a).sum::<f64>().sqrt(),
    }
}

fn add_unit(x: &[f64], y: &[f64], scale: f64, out: &mut [f64]) {
    let r = dist2(x, y).sqrt();
    if r > 0.0 {
        for ((o, a), b) in out.iter_mut().zip(x).zip(y) {
            *o += scale * (a - b) / r;
        }
    }
}
