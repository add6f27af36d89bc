//! `wgf flow`: generated points flowing against a sample of the ring.
//!
//! Real points are drawn from the eight-mode mixture, generated points
//! uniformly from `[-1, 1]²`. Files: `trajectory.csv`
//! (`step,t,point,x0,x1,energy`), `energy.csv` (`step,t,energy`),
//! `summary.json`, `energy.svg`, and with `--frames` `start.svg`/`end.svg`.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use wgf_core::flow::{simulate, FlowConfig, ParticleSystem};
use wgf_core::gan::{sample_mixture, MixtureSpec};
use wgf_core::Direction;

use super::{direction, kernel, nonzero};
use crate::error::CliError;
use crate::output::RunOutput;
use crate::{svg, Context};

/// Relative per-step slack on the monotonicity check.
pub const MONOTONE_SLACK: f64 = 1e-6;

#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long)]
    pub kernel: Option<String>,
    /// `generator` (descent) or `discriminator` (ascent).
    #[arg(long)]
    pub direction: Option<String>,
    /// Euler step, must be positive [default: 0.01 × length scale²].
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub record_every: Option<usize>,
    #[arg(long)]
    pub n_real: Option<usize>,
    #[arg(long)]
    pub n_gen: Option<usize>,
    /// Also write start/end scatter plots.
    #[arg(long)]
    pub frames: bool,
}

#[derive(Debug, Serialize)]
struct Resolved {
    kernel: String,
    direction: Direction,
    dt: f64,
    steps: usize,
    record_every: usize,
    n_real: usize,
    n_gen: usize,
    frames: bool,
}

#[derive(Debug, Serialize)]
struct Summary {
    direction: Direction,
    initial_energy: f64,
    final_energy: f64,
    max_increase: f64,
    max_decrease: f64,
    /// Energy never moved against the flow direction by more than the slack.
    monotone: bool,
    slack: f64,
    /// Discriminator runs: energy grew overall or the run diverged.
    growth: bool,
    diverged_at: Option<usize>,
    snapshots: usize,
}

pub fn run(ctx: &Context, a: Args) -> Result<(), CliError> {
    let f = &ctx.file.flow;
    let src = a.kernel.or_else(|| f.kernel.clone()).unwrap_or_else(|| "gaussian:sigma=1".into());
    let k = kernel(&src, "kernel")?;
    let dir = direction(a.direction.as_deref().or(f.direction.as_deref()).unwrap_or("generator"))?;
    let mut cfg = FlowConfig::new(k, dir, a.steps.or(f.steps).unwrap_or(1000));
    if let Some(dt) = a.dt.or(f.dt) {
        cfg.dt = dt;
    }
    // a zero step is legal for the library but useless as a run
    if !(cfg.dt.is_finite() && cfg.dt > 0.0) {
        return Err(CliError::Config(format!("--dt must be positive and finite, got {}", cfg.dt)));
    }
    cfg.record_every = nonzero("record_every", a.record_every.or(f.record_every).unwrap_or(1))?;
    let n_real = nonzero("n_real", a.n_real.or(f.n_real).unwrap_or(200))?;
    let n_gen = nonzero("n_gen", a.n_gen.or(f.n_gen).unwrap_or(200))?;
    let frames = a.frames || f.frames.unwrap_or(false);
    let resolved = Resolved {
        kernel: cfg.kernel.to_string(),
        direction: dir,
        dt: cfg.dt,
        steps: cfg.steps,
        record_every: cfg.record_every,
        n_real,
        n_gen,
        frames,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let real = sample_mixture(&MixtureSpec::default(), n_real, &mut rng);
    let gen = Array2::from_shape_fn((n_gen, 2), |_| rng.random_range(-1.0..1.0));
    let sys = ParticleSystem::new(real.clone(), gen)?;
    let mut out = RunOutput::create(&ctx.out_dir)?;
    let traj = simulate(&sys, &cfg)?;

    let energies = traj.energies();
    let e0 = energies[0];
    let slack = MONOTONE_SLACK * e0.abs().max(f64::MIN_POSITIVE);
    let against = match dir {
        Direction::Generator => traj.max_increase(),
        Direction::Discriminator => traj.max_decrease(),
    };
    let summary = Summary {
        direction: dir,
        initial_energy: e0,
        final_energy: traj.final_energy(),
        max_increase: traj.max_increase(),
        max_decrease: traj.max_decrease(),
        monotone: !(against > slack),
        slack,
        growth: traj.diverged() || traj.final_energy() > e0,
        diverged_at: traj.diverged_at,
        snapshots: traj.snapshots.len(),
    };
    println!(
        "{dir}: energy {:.6e} -> {:.6e}, monotone {}, diverged {}",
        summary.initial_energy,
        summary.final_energy,
        summary.monotone,
        traj.diverged_at.map_or("no".to_string(), |s| format!("at step {s}"))
    );

    out.write("trajectory.csv", &traj.to_csv())?;
    out.write("energy.csv", &traj.energy_csv())?;
    out.write_json("summary.json", &summary)?;
    let t: Vec<f64> = traj.snapshots.iter().map(|s| s.t).collect();
    out.write("energy.svg", &svg::lines("energy", &t, &[(&energies, "black")]))?;
    if frames {
        let first = &traj.snapshots[0].gen_points;
        let last = &traj.snapshots[traj.snapshots.len() - 1].gen_points;
        let bbox = svg::fit_box([&real, first]);
        for (name, pts) in [("start.svg", first), ("end.svg", last)] {
            out.write(name, &svg::scatter(name, &[(&real, "blue"), (pts, "red")], bbox))?;
        }
    }
    out.finish("flow", ctx.seed, &resolved)?;
    Ok(())
}
