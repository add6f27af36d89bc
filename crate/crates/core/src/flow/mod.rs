//! Particle dynamics of the generator and discriminator flows.
//!
//! Generated points move with velocity `−∇ δE/δp_g`, i.e.
//! `2·mean_real ∇e(Xᵢ, y) − 2·mean_{gen, j≠i} ∇e(Xᵢ, Xⱼ)` in the generator
//! direction, which equals `−N_g ∇_{Xᵢ} E` for the U-statistic energy. The
//! discriminator direction is the exact negation. Real points never move.

mod linearized;

use std::fmt::Write as _;

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{EvalOptions, KernelSpec};
use crate::spectral::Direction;

pub use linearized::{fits_to_csv, linearized_sim, GridPerturbation, ModeFit, ModeHistory};

/// Coordinates beyond this magnitude mark a run as diverged.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

/// Real and generated point clouds, one point per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleSystem {
    pub real_points: Array2<f64>,
    pub gen_points: Array2<f64>,
}

impl ParticleSystem {
    pub fn new(real_points: Array2<f64>, gen_points: Array2<f64>) -> Result<Self> {
        if real_points.nrows() == 0 || gen_points.nrows() == 0 {
            return Err(Error::ShapeMismatch("both clouds need at least one point".into()));
        }
        if real_points.ncols() != gen_points.ncols() || real_points.ncols() == 0 {
            return Err(Error::ShapeMismatch(format!(
                "real points have {} columns, generated points {}",
                real_points.ncols(),
                gen_points.ncols()
            )));
        }
        if real_points.iter().chain(gen_points.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("particle coordinates"));
        }
        Ok(Self {
            real_points: real_points.as_standard_layout().into_owned(),
            gen_points: gen_points.as_standard_layout().into_owned(),
        })
    }

    pub fn dim(&self) -> usize {
        self.real_points.ncols()
    }
}

/// How the cross term pairs real and generated points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossPairs {
    /// Every real point against every generated point.
    #[default]
    All,
    /// Skip index-matched pairs `(xᵢ, yᵢ)`; needs equal cloud sizes. With
    /// this convention identical clouds have exactly zero distance.
    ExcludeMatched,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyOptions {
    pub cross: CrossPairs,
    pub eval: EvalOptions,
}

fn row(a: &Array2<f64>, i: usize) -> &[f64] {
    let d = a.ncols();
    &a.as_slice().expect("standard layout")[i * d..(i + 1) * d]
}

/// Mean of `e(aᵢ, bⱼ)` over pairs, skipping `i = j` when `skip_diagonal`.
fn pair_mean(k: &KernelSpec, a: &Array2<f64>, b: &Array2<f64>, skip_diagonal: bool, opts: EvalOptions) -> Result<f64> {
    let mut acc = 0.0;
    let mut count = 0usize;
    for i in 0..a.nrows() {
        let x = row(a, i);
        for j in 0..b.nrows() {
            if skip_diagonal && i == j {
                continue;
            }
            acc += k.eval_with(x, row(b, j), opts)?;
            count += 1;
        }
    }
    Ok(if count == 0 { 0.0 } else { acc / count as f64 })
}

/// `−2·E e(x, y) + E e(x, x′) + E e(y, y′)` with diagonal-free self terms.
pub fn empirical_distance(sys: &ParticleSystem, k: &KernelSpec) -> Result<f64> {
    empirical_distance_with(sys, k, EnergyOptions::default())
}

pub fn empirical_distance_with(sys: &ParticleSystem, k: &KernelSpec, opts: EnergyOptions) -> Result<f64> {
    let matched = match opts.cross {
        CrossPairs::All => false,
        CrossPairs::ExcludeMatched => {
            if sys.real_points.nrows() != sys.gen_points.nrows() {
                return Err(Error::ShapeMismatch("matched-pair exclusion needs equal cloud sizes".into()));
            }
            true
        }
    };
    let cross = pair_mean(k, &sys.real_points, &sys.gen_points, matched, opts.eval)?;
    let real = pair_mean(k, &sys.real_points, &sys.real_points, true, opts.eval)?;
    let gen = pair_mean(k, &sys.gen_points, &sys.gen_points, true, opts.eval)?;
    Ok(-2.0 * cross + real + gen)
}

/// Velocity of generated point `i`.
pub fn force_on(sys: &ParticleSystem, k: &KernelSpec, direction: Direction, i: usize) -> Result<Vec<f64>> {
    if i >= sys.gen_points.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "index {i} out of range for {} generated points",
            sys.gen_points.nrows()
        )));
    }
    let mut out = vec![0.0; sys.dim()];
    accumulate_force(&sys.real_points, &sys.gen_points, k, direction, i, EvalOptions::default(), &mut out)?;
    Ok(out)
}

fn accumulate_force(
    real: &Array2<f64>,
    gen: &Array2<f64>,
    k: &KernelSpec,
    direction: Direction,
    i: usize,
    opts: EvalOptions,
    out: &mut [f64],
) -> Result<()> {
    // generator: +2 mean_real ∇e − 2 mean_gen ∇e
    let s = -direction.sign();
    let x = row(gen, i);
    let wr = 2.0 * s / real.nrows() as f64;
    for j in 0..real.nrows() {
        k.add_grad(x, row(real, j), wr, opts, out)?;
    }
    let ng = gen.nrows();
    if ng > 1 {
        let wg = -2.0 * s / (ng - 1) as f64;
        for j in (0..ng).filter(|&j| j != i) {
            k.add_grad(x, row(gen, j), wg, opts, out)?;
        }
    }
    Ok(())
}

/// Velocities of every generated point, one per row.
pub fn forces(sys: &ParticleSystem, k: &KernelSpec, direction: Direction) -> Result<Array2<f64>> {
    let (n, d) = sys.gen_points.dim();
    let mut out = Array2::zeros((n, d));
    {
        let buf = out.as_slice_mut().expect("standard layout");
        for i in 0..n {
            accumulate_force(
                &sys.real_points,
                &sys.gen_points,
                k,
                direction,
                i,
                EvalOptions::default(),
                &mut buf[i * d..(i + 1) * d],
            )?;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    pub kernel: KernelSpec,
    pub direction: Direction,
    pub dt: f64,
    pub steps: usize,
    pub record_every: usize,
}

impl FlowConfig {
    /// `dt = 10⁻²·ℓ²` for kernel length scale `ℓ` (1 when scale-free).
    pub fn new(kernel: KernelSpec, direction: Direction, steps: usize) -> Self {
        let l = kernel.length_scale().unwrap_or(1.0);
        Self {
            kernel,
            direction,
            dt: 1e-2 * l * l,
            steps,
            record_every: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        if !(self.dt.is_finite() && self.dt >= 0.0) {
            return Err(Error::InvalidConfig(format!("dt must be finite and >= 0, got {}", self.dt)));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidConfig("record_every must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub step: usize,
    pub t: f64,
    pub gen_points: Array2<f64>,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub snapshots: Vec<Snapshot>,
    /// First step at which a coordinate left the divergence threshold.
    pub diverged_at: Option<usize>,
}

impl Trajectory {
    pub fn diverged(&self) -> bool {
        self.diverged_at.is_some()
    }

    pub fn energies(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.energy).collect()
    }

    pub fn final_energy(&self) -> f64 {
        self.snapshots.last().map_or(f64::NAN, |s| s.energy)
    }

    /// Largest increase between consecutive recorded energies.
    pub fn max_increase(&self) -> f64 {
        self.snapshots
            .windows(2)
            .map(|w| w[1].energy - w[0].energy)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest decrease between consecutive recorded energies.
    pub fn max_decrease(&self) -> f64 {
        self.snapshots
            .windows(2)
            .map(|w| w[0].energy - w[1].energy)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Columns `step,t,point,x0..x{d-1},energy`, one row per point per snapshot.
    pub fn to_csv(&self) -> String {
        let d = self.snapshots.first().map_or(0, |s| s.gen_points.ncols());
        let mut out = String::from("step,t,point");
        for c in 0..d {
            let _ = write!(out, ",x{c}");
        }
        out.push_str(",energy\n");
        for s in &self.snapshots {
            for (i, p) in s.gen_points.rows().into_iter().enumerate() {
                let _ = write!(out, "{},{},{}", s.step, s.t, i);
                for v in p {
                    let _ = write!(out, ",{v}");
                }
                let _ = writeln!(out, ",{}", s.energy);
            }
        }
        out
    }

    /// Columns `step,t,energy`.
    pub fn energy_csv(&self) -> String {
        let mut out = String::from("step,t,energy\n");
        for s in &self.snapshots {
            let _ = writeln!(out, "{},{},{}", s.step, s.t, s.energy);
        }
        out
    }
}

/// Synchronous explicit Euler on the generated cloud.
///
/// Stops early, keeping what was recorded, once any coordinate exceeds
/// [`DIVERGENCE_THRESHOLD`] or the energy stops being finite.
pub fn simulate(sys: &ParticleSystem, cfg: &FlowConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let mut state = sys.clone();
    let record = |state: &ParticleSystem, step: usize| -> Result<Snapshot> {
        let energy = match empirical_distance(state, &cfg.kernel) {
            Ok(e) => e,
            Err(Error::NonFinite(_)) => f64::NAN,
            Err(e) => return Err(e),
        };
        Ok(Snapshot {
            step,
            t: step as f64 * cfg.dt,
            gen_points: state.gen_points.clone(),
            energy,
        })
    };
    let mut snapshots = vec![record(&state, 0)?];
    let mut diverged_at = None;
    for step in 1..=cfg.steps {
        let f = match forces(&state, &cfg.kernel, cfg.direction) {
            Ok(f) => f,
            Err(Error::NonFinite(_)) => {
                diverged_at = Some(step);
                break;
            }
            Err(e) => return Err(e),
        };
        state.gen_points.scaled_add(cfg.dt, &f);
        let blown = state
            .gen_points
            .iter()
            .any(|v| !v.is_finite() || v.abs() > DIVERGENCE_THRESHOLD);
        if blown || step % cfg.record_every == 0 || step == cfg.steps {
            let snap = record(&state, step)?;
            let bad = !snap.energy.is_finite();
            snapshots.push(snap);
            if blown || bad {
                diverged_at = Some(step);
                break;
            }
        }
    }
    Ok(Trajectory {
        snapshots,
        diverged_at,
    })
}

/// Mean pairwise distance of the rows of `points`.
pub fn mean_pairwise_distance(points: &Array2<f64>) -> f64 {
    let n = points.nrows();
    if n < 2 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            acc += distance(points.row(i), points.row(j));
        }
    }
    acc / (n * (n - 1) / 2) as f64
}

fn distance(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
