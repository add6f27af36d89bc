//! `wgf perturb`: linearised mode growth on a periodic 1-D grid.
//!
//! Files: `modes.csv` (`mode,xi,predicted,measured,raw_slope,rel_err,resolved`)
//! and `summary.json`.

use serde::Serialize;
use wgf_core::flow::{fits_to_csv, linearized_sim, GridPerturbation, ModeFit};
use wgf_core::spectral::{oracle_ft, PeriodicGrid};
use wgf_core::Direction;

use super::{direction, kernel, nonzero, positive};
use crate::error::CliError;
use crate::output::RunOutput;
use crate::Context;

/// `|ω| dt` below which the fitted rate is compared to the prediction.
pub const ACCURATE_STEP: f64 = 0.1;

#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long)]
    pub kernel: Option<String>,
    #[arg(long)]
    pub direction: Option<String>,
    /// Background density.
    #[arg(long)]
    pub c0: Option<f64>,
    /// Euler step [default: 0.05 / max |omega|].
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    /// Initial perturbation amplitude.
    #[arg(long)]
    pub amplitude: Option<f64>,
    /// Excite one Fourier mode instead of seeded noise.
    #[arg(long)]
    pub mode: Option<usize>,
    /// Grid nodes, a power of two [default: 4096].
    #[arg(long)]
    pub points: Option<usize>,
    /// Grid half width [default: 20 × kernel length scale].
    #[arg(long)]
    pub half_width: Option<f64>,
}

#[derive(Debug, Serialize)]
struct Resolved {
    kernel: String,
    direction: Direction,
    c0: f64,
    dt: f64,
    steps: usize,
    amplitude: f64,
    mode: Option<usize>,
    points: usize,
    half_width: f64,
}

#[derive(Debug, Serialize)]
struct Summary {
    resolved_modes: usize,
    growing: usize,
    decaying: usize,
    /// Largest relative error over resolved modes with `|ω| dt < 0.1`.
    max_rel_err: Option<f64>,
    accurate_modes: usize,
    lowest_resolved: Option<ModeFit>,
    omega_max: f64,
}

pub fn run(ctx: &Context, a: Args) -> Result<(), CliError> {
    let f = &ctx.file.perturb;
    let src = a.kernel.or_else(|| f.kernel.clone()).unwrap_or_else(|| "gaussian:sigma=1".into());
    let k = kernel(&src, "kernel")?;
    let dir = direction(a.direction.as_deref().or(f.direction.as_deref()).unwrap_or("generator"))?;
    let c0 = positive("c0", a.c0.or(f.c0).unwrap_or(1.0))?;
    let steps = nonzero("steps", a.steps.or(f.steps).unwrap_or(200))?;
    let amplitude = positive("amplitude", a.amplitude.or(f.amplitude).unwrap_or(1e-3))?;
    let mode = a.mode.or(f.mode);
    let default_grid = PeriodicGrid::for_kernel(&k);
    let grid = PeriodicGrid::new(
        a.half_width.or(f.half_width).unwrap_or(default_grid.half_width),
        a.points.or(f.points).unwrap_or(default_grid.points),
    )?;

    let p = match mode {
        Some(m) => GridPerturbation::single_mode(k.clone(), grid, c0, m, amplitude)?,
        None => GridPerturbation::seeded_noise(k.clone(), grid, c0, amplitude, ctx.seed)?,
    };
    let spectrum = oracle_ft(&k, grid)?;
    let two_pi = 2.0 * std::f64::consts::PI;
    let omega_max = spectrum
        .modes()
        .iter()
        .map(|&(nu, lam)| (two_pi * nu).powi(2) * 2.0 * c0 * lam.abs())
        .fold(0.0f64, f64::max);
    let dt = match a.dt.or(f.dt) {
        Some(dt) => positive("dt", dt)?,
        None if omega_max > 0.0 => 0.05 / omega_max,
        None => return Err(CliError::Config("kernel spectrum is zero; pass --dt explicitly".into())),
    };
    let resolved = Resolved {
        kernel: k.to_string(),
        direction: dir,
        c0,
        dt,
        steps,
        amplitude,
        mode,
        points: grid.points,
        half_width: grid.half_width,
    };

    let mut out = RunOutput::create(&ctx.out_dir)?;
    let fits = linearized_sim(&p, dir, dt, steps)?.fit();
    let res: Vec<&ModeFit> = fits.iter().filter(|f| f.resolved).collect();
    let accurate: Vec<&&ModeFit> = res.iter().filter(|f| f.predicted.abs() * dt < ACCURATE_STEP).collect();
    let summary = Summary {
        resolved_modes: res.len(),
        growing: res.iter().filter(|f| f.measured > 0.0).count(),
        decaying: res.iter().filter(|f| f.measured < 0.0).count(),
        max_rel_err: accurate.iter().map(|f| f.rel_err).reduce(f64::max),
        accurate_modes: accurate.len(),
        lowest_resolved: res.first().map(|f| (*f).clone()),
        omega_max,
    };
    println!(
        "{} resolved modes: {} growing, {} decaying; max rel err {}",
        summary.resolved_modes,
        summary.growing,
        summary.decaying,
        summary.max_rel_err.map_or("n/a".into(), |e| format!("{e:.3e}"))
    );
    if let Some(m) = &summary.lowest_resolved {
        println!("lowest resolved mode {} (xi = {:.4}): measured {:.6e}", m.mode, m.xi, m.measured);
    }
    out.write("modes.csv", &fits_to_csv(&fits))?;
    out.write_json("summary.json", &summary)?;
    out.finish("perturb", ctx.seed, &resolved)?;
    Ok(())
}
