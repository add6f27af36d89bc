//! `wgf train`: the feature-space GAN on the eight-mode ring.
//!
//! Files: `metrics.csv`
//! (`epoch,loss_g,loss_d,feature_distance,mode_coverage,high_quality_fraction`),
//! `run.json`, `generator.json`, `discriminator.json`, `kde.svg`
//! (generated density), `kde_data.svg`, `scatter.svg` (data blue, generated
//! red) and `coverage.svg`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use wgf_core::gan::{kde_grid, sample_mixture, train, BoundingBox, MixtureSpec, Stabilizer, TrainConfig};

use super::{kernel, nonzero, positive};
use crate::error::CliError;
use crate::output::RunOutput;
use crate::{svg, Context};

/// Trailing window for the oscillation indicator.
pub const OSCILLATION_WINDOW: usize = 100;
const PLOT_POINTS: usize = 2000;
const KDE_BANDWIDTH: f64 = 0.1;
const KDE_CELLS: usize = 120;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// `stabilized` or `unstabilized`.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Stabilizer weight; 0 disables the stabilizer, a positive value enables it.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Loss kernel.
    #[arg(long)]
    pub kernel: Option<String>,
    /// Stabilizer kernel.
    #[arg(long)]
    pub stabilizer: Option<String>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub beta1: Option<f64>,
    #[arg(long)]
    pub beta2: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub n_critic: Option<usize>,
    #[arg(long)]
    pub eval_points: Option<usize>,
}

#[derive(Debug, Serialize)]
struct Indicators {
    final_mode_coverage: Option<usize>,
    final_high_quality_fraction: Option<f64>,
    /// Mean |change| of the feature distance over the trailing window.
    oscillation_amplitude: f64,
    oscillation_window: usize,
    diverged_at: Option<usize>,
}

pub fn resolve(ctx: &Context, a: Args) -> Result<TrainConfig, CliError> {
    let f = &ctx.file.train;
    let preset = a.preset.or_else(|| f.preset.clone()).unwrap_or_else(|| "stabilized".into());
    let mut cfg = match preset.as_str() {
        "stabilized" => TrainConfig::stabilized(ctx.seed),
        "unstabilized" => TrainConfig::unstabilized(ctx.seed),
        other => {
            return Err(CliError::Config(format!(
                "unknown preset `{other}` (expected stabilized or unstabilized)"
            )))
        }
    };
    if let Some(e) = a.epochs.or(f.epochs) {
        cfg.epochs = nonzero("epochs", e)?;
    }
    if let Some(src) = a.kernel.as_deref().or(f.kernel.as_deref()) {
        cfg.kernel = kernel(src, "loss kernel")?;
    }
    let stab_kernel = match a.stabilizer.as_deref().or(f.stabilizer.as_deref()) {
        Some(src) => Some(kernel(src, "stabilizer kernel")?),
        None => None,
    };
    match a.epsilon.or(f.epsilon) {
        Some(e) if e == 0.0 => cfg.stabilizer = None,
        Some(e) => {
            let epsilon = positive("epsilon", e)?;
            let kernel = stab_kernel
                .or_else(|| cfg.stabilizer.as_ref().map(|s| s.kernel.clone()))
                .unwrap_or_else(TrainConfig::stabilizer_kernel);
            cfg.stabilizer = Some(Stabilizer { kernel, epsilon });
        }
        None => {
            if let (Some(k), Some(st)) = (stab_kernel, cfg.stabilizer.as_mut()) {
                st.kernel = k;
            }
        }
    }
    if let Some(lr) = a.lr.or(f.lr) {
        cfg.lr = lr;
    }
    if let Some(b) = a.beta1.or(f.beta1) {
        cfg.betas.0 = b;
    }
    if let Some(b) = a.beta2.or(f.beta2) {
        cfg.betas.1 = b;
    }
    if let Some(b) = a.batch_size.or(f.batch_size) {
        cfg.batch_size = b;
    }
    if let Some(n) = a.n_critic.or(f.n_critic) {
        cfg.n_critic = n;
    }
    if let Some(n) = a.eval_points.or(f.eval_points) {
        cfg.eval_points = n;
        cfg.distance_points = cfg.distance_points.min(n);
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(ctx: &Context, a: Args) -> Result<(), CliError> {
    let cfg = resolve(ctx, a)?;
    let spec = MixtureSpec::default();
    let mut out = RunOutput::create(&ctx.out_dir)?;
    let run = train(&cfg, &spec)?;

    let last = run.last();
    let ind = Indicators {
        final_mode_coverage: last.map(|r| r.mode_coverage),
        final_high_quality_fraction: last.map(|r| r.high_quality_fraction),
        oscillation_amplitude: run.oscillation_amplitude(OSCILLATION_WINDOW),
        oscillation_window: OSCILLATION_WINDOW,
        diverged_at: run.diverged_at,
    };
    match last {
        Some(r) => println!(
            "epoch {}: coverage {}/{}, high quality {:.3}, feature distance {:.4e}, oscillation {:.3e}",
            r.epoch, r.mode_coverage, spec.k, r.high_quality_fraction, r.feature_distance, ind.oscillation_amplitude
        ),
        None => println!("no epoch completed"),
    }
    if let Some(e) = run.diverged_at {
        println!("diverged at epoch {e}");
    }
    if let Some(rep) = &run.epsilon_report {
        println!("stabilizer epsilon_min on the mode grid: {:.6}", rep.epsilon_min);
    }

    let mut header = run.header_json();
    header["indicators"] = serde_json::to_value(&ind).expect("serializable indicators");
    out.write("metrics.csv", &run.to_csv())?;
    out.write_json("run.json", &header)?;
    out.write_json("generator.json", &run.generator.to_checkpoint())?;
    out.write_json("discriminator.json", &run.discriminator.to_checkpoint())?;

    let bbox = BoundingBox::square(3.0);
    let data = sample_mixture(&spec, PLOT_POINTS, &mut ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed));
    let gen = run.sample(PLOT_POINTS, cfg.seed ^ 0x9e4)?;
    if gen.iter().all(|v| v.is_finite()) {
        let kde = kde_grid(&gen, KDE_BANDWIDTH, KDE_CELLS, bbox)?;
        out.write("kde.svg", &svg::heatmap("generated density", &kde, bbox))?;
    }
    let kde = kde_grid(&data, KDE_BANDWIDTH, KDE_CELLS, bbox)?;
    out.write("kde_data.svg", &svg::heatmap("data density", &kde, bbox))?;
    out.write("scatter.svg", &svg::scatter("data and samples", &[(&data, "blue"), (&gen, "red")], bbox))?;
    let epochs: Vec<f64> = run.records.iter().map(|r| r.epoch as f64).collect();
    let cov: Vec<f64> = run.records.iter().map(|r| r.mode_coverage as f64).collect();
    out.write("coverage.svg", &svg::lines("mode coverage", &epochs, &[(&cov, "black")]))?;

    out.finish("train", ctx.seed, &cfg)?;
    Ok(())
}
