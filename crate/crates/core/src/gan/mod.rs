//! Adversarial training with particle-distance losses on a Gaussian-mixture ring.

mod energy;
mod metrics;
mod mixture;

use ndarray::{s, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::CrossPairs;
use crate::kernels::KernelSpec;
use crate::nn::{AdamState, Gradients, Mlp};
use crate::spectral::{log_grid, minimal_epsilon, StabilizerSolution};

pub use energy::{feature_energies, feature_energy, EnergyGrads};
pub use metrics::{kde_grid, mode_coverage, BoundingBox, Coverage};
pub use mixture::{sample_latent, sample_mixture, MixtureSpec};

/// Loss value, parameter gradients of the trained network, and the
/// gradient with respect to the generator outputs.
#[derive(Debug, Clone)]
pub struct LossOutput {
    pub value: f64,
    pub grads: Gradients,
    pub output_grad: Array2<f64>,
}

/// `−2·mean e_D(x, G(z)) + mean_{j≠j′} e_D(G(z), G(z′))`, gradients for `G`.
pub fn loss_g(d: &Mlp, g: &Mlp, data: &Array2<f64>, latent: &Array2<f64>, k: &KernelSpec) -> Result<LossOutput> {
    let (y, g_cache) = g.forward_cached(latent)?;
    let fx = d.forward(data)?;
    let (fy, d_cache) = d.forward_cached(&y)?;
    let e = feature_energy(k, &fx, &fy, CrossPairs::All, false)?;
    let (_, dy) = d.backward(&d_cache, &e.d_gen)?;
    let (grads, _) = g.backward(&g_cache, &dy)?;
    Ok(LossOutput {
        value: e.value,
        grads,
        output_grad: dy,
    })
}

/// Full three-term energy in `D`'s feature space, gradients for `D`.
pub fn loss_d(d: &Mlp, g: &Mlp, data: &Array2<f64>, latent: &Array2<f64>, k: &KernelSpec) -> Result<LossOutput> {
    loss_d_with(d, g, data, latent, k, CrossPairs::All)
}

pub fn loss_d_with(
    d: &Mlp,
    g: &Mlp,
    data: &Array2<f64>,
    latent: &Array2<f64>,
    k: &KernelSpec,
    cross: CrossPairs,
) -> Result<LossOutput> {
    let y = g.forward(latent)?;
    loss_d_on_samples(d, data, &y, k, cross)
}

fn loss_d_on_samples(d: &Mlp, data: &Array2<f64>, y: &Array2<f64>, k: &KernelSpec, cross: CrossPairs) -> Result<LossOutput> {
    Ok(loss_d_multi(d, data, y, &[k], cross)?.remove(0))
}

/// One `D` loss per kernel from shared forward passes and pair distances.
fn loss_d_multi(
    d: &Mlp,
    data: &Array2<f64>,
    y: &Array2<f64>,
    kernels: &[&KernelSpec],
    cross: CrossPairs,
) -> Result<Vec<LossOutput>> {
    let (fx, cx) = d.forward_cached(data)?;
    let (fy, cy) = d.forward_cached(y)?;
    feature_energies(kernels, &fx, &fy, cross, true)?
        .into_iter()
        .map(|e| {
            let (mut grads, _) = d.backward(&cx, &e.d_real)?;
            let (gy, dy) = d.backward(&cy, &e.d_gen)?;
            grads.add_assign(&gy);
            Ok(LossOutput {
                value: e.value,
                grads,
                output_grad: dy,
            })
        })
        .collect()
}

/// `loss_D(k) − ε·loss_D(s)`, evaluated as two passes.
pub fn loss_d_stabilized(
    d: &Mlp,
    g: &Mlp,
    data: &Array2<f64>,
    latent: &Array2<f64>,
    k: &KernelSpec,
    s: &KernelSpec,
    epsilon: f64,
) -> Result<LossOutput> {
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidConfig(format!("epsilon must be >= 0, got {epsilon}")));
    }
    let y = g.forward(latent)?;
    if epsilon == 0.0 {
        return loss_d_on_samples(d, data, &y, k, CrossPairs::All);
    }
    let mut both = loss_d_multi(d, data, &y, &[k, s], CrossPairs::All)?;
    let stab = both.pop().unwrap();
    let mut base = both.pop().unwrap();
    base.value -= epsilon * stab.value;
    base.grads.scaled_add(-epsilon, &stab.grads);
    base.output_grad.scaled_add(-epsilon, &stab.output_grad);
    Ok(base)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stabilizer {
    pub kernel: KernelSpec,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub kernel: KernelSpec,
    pub stabilizer: Option<Stabilizer>,
    pub lr: f64,
    pub betas: (f64, f64),
    /// One epoch is `n_critic` discriminator steps then one generator step.
    pub epochs: usize,
    pub batch_size: usize,
    pub n_critic: usize,
    pub latent_dim: usize,
    pub feature_dim: usize,
    pub hidden: Vec<usize>,
    pub leaky_slope: f64,
    pub eval_points: usize,
    /// Subsample of the evaluation draw used for the feature-space distance.
    pub distance_points: usize,
    pub seed: u64,
}

impl TrainConfig {
    pub fn loss_kernel() -> KernelSpec {
        KernelSpec::sum([4.0, 8.0, 16.0].map(KernelSpec::rescaled_gaussian))
    }

    pub fn stabilizer_kernel() -> KernelSpec {
        KernelSpec::sum([1.0, std::f64::consts::SQRT_2, 2.0].map(KernelSpec::rescaled_gaussian))
    }

    pub fn stabilized(seed: u64) -> Self {
        Self {
            stabilizer: Some(Stabilizer {
                kernel: Self::stabilizer_kernel(),
                epsilon: 1.0,
            }),
            ..Self::unstabilized(seed)
        }
    }

    pub fn unstabilized(seed: u64) -> Self {
        Self {
            kernel: Self::loss_kernel(),
            stabilizer: None,
            lr: 5e-3,
            betas: (0.5, 0.9),
            epochs: 3000,
            batch_size: 256,
            n_critic: 1,
            latent_dim: 2,
            feature_dim: 16,
            hidden: vec![100, 50],
            leaky_slope: 0.2,
            eval_points: 2000,
            distance_points: 256,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        self.kernel.validate()?;
        if let Some(st) = &self.stabilizer {
            st.kernel.validate()?;
            if !(st.epsilon > 0.0 && st.epsilon.is_finite()) {
                return bad(format!("stabilizer epsilon must be positive, got {}", st.epsilon));
            }
        }
        if self.epochs == 0 || self.batch_size == 0 || self.n_critic == 0 || self.latent_dim == 0 || self.feature_dim == 0 {
            return bad("epochs, batch_size, n_critic, latent_dim and feature_dim must be >= 1".into());
        }
        if self.eval_points == 0 || self.distance_points == 0 || self.distance_points > self.eval_points {
            return bad("need 1 <= distance_points <= eval_points".into());
        }
        if self.hidden.contains(&0) {
            return bad("hidden widths must be positive".into());
        }
        // AdamState::new checks lr and betas
        AdamState::new(0, self.lr, self.betas.0, self.betas.1).map(|_| ())
    }

    fn dims(&self, input: usize, output: usize) -> Vec<usize> {
        let mut v = vec![input];
        v.extend(&self.hidden);
        v.push(output);
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss_g: f64,
    pub loss_d: f64,
    pub feature_distance: f64,
    pub mode_coverage: usize,
    pub high_quality_fraction: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainRun {
    pub config: TrainConfig,
    pub mixture: MixtureSpec,
    pub records: Vec<EpochRecord>,
    /// Epoch at which a loss first became non-finite.
    pub diverged_at: Option<usize>,
    pub generator: Mlp,
    pub discriminator: Mlp,
    /// `sup F(k)/F(s)` for the stabilizer, when one is configured.
    pub epsilon_report: Option<StabilizerSolution>,
}

pub const METRICS_HEADER: &str = "epoch,loss_g,loss_d,feature_distance,mode_coverage,high_quality_fraction";

impl TrainRun {
    pub fn diverged(&self) -> bool {
        self.diverged_at.is_some()
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(METRICS_HEADER);
        s.push('\n');
        for r in &self.records {
            s.push_str(&format!(
                "{},{:e},{:e},{:e},{},{:e}\n",
                r.epoch, r.loss_g, r.loss_d, r.feature_distance, r.mode_coverage, r.high_quality_fraction
            ));
        }
        s
    }

    /// Config, mixture, outcome and stabilizer report, without per-epoch data.
    pub fn header_json(&self) -> serde_json::Value {
        serde_json::json!({
            "config": self.config,
            "mixture": self.mixture,
            "epochs_recorded": self.records.len(),
            "diverged_at": self.diverged_at,
            "epsilon_report": self.epsilon_report,
            "final": self.last(),
        })
    }

    /// Mean absolute epoch-to-epoch change of the feature distance over the
    /// trailing `window` records.
    pub fn oscillation_amplitude(&self, window: usize) -> f64 {
        let tail = &self.records[self.records.len().saturating_sub(window + 1)..];
        if tail.len() < 2 {
            return 0.0;
        }
        tail.windows(2)
            .map(|w| (w[1].feature_distance - w[0].feature_distance).abs())
            .sum::<f64>()
            / (tail.len() - 1) as f64
    }

    /// Generator samples for a fixed latent draw.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Array2<f64>> {
        let z = sample_latent(n, self.config.latent_dim, &mut ChaCha8Rng::seed_from_u64(seed));
        self.generator.forward(&z)
    }
}

/// Fixed evaluation draw shared by every epoch.
struct EvalSet {
    data: Array2<f64>,
    latent: Array2<f64>,
}

fn evaluate(
    d: &Mlp,
    g: &Mlp,
    eval: &EvalSet,
    cfg: &TrainConfig,
    spec: &MixtureSpec,
) -> Result<(f64, Coverage)> {
    let y = g.forward(&eval.latent)?;
    let cov = mode_coverage(&y, spec, spec.default_threshold())?;
    let n = cfg.distance_points;
    let fx = d.forward(&eval.data.slice(s![..n, ..]).to_owned())?;
    let fy = d.forward(&y.slice(s![..n, ..]).to_owned())?;
    let dist = if y.iter().all(|v| v.is_finite()) {
        feature_energy(&cfg.kernel, &fx, &fy, CrossPairs::All, true).map_or(f64::NAN, |e| e.value)
    } else {
        f64::NAN
    };
    Ok((dist, cov))
}

pub fn train(cfg: &TrainConfig, spec: &MixtureSpec) -> Result<TrainRun> {
    cfg.validate()?;
    spec.validate()?;
    let mut master = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut d = Mlp::new(&cfg.dims(2, cfg.feature_dim), cfg.leaky_slope, &mut master)?;
    let mut g = Mlp::new(&cfg.dims(cfg.latent_dim, 2), cfg.leaky_slope, &mut master)?;
    let mut eval_rng = ChaCha8Rng::seed_from_u64(master.random());
    let mut rng = ChaCha8Rng::seed_from_u64(master.random());
    let eval = EvalSet {
        data: sample_mixture(spec, cfg.eval_points, &mut eval_rng),
        latent: sample_latent(cfg.eval_points, cfg.latent_dim, &mut eval_rng),
    };
    let mut opt_d = AdamState::new(d.num_params(), cfg.lr, cfg.betas.0, cfg.betas.1)?;
    let mut opt_g = AdamState::new(g.num_params(), cfg.lr, cfg.betas.0, cfg.betas.1)?;

    let epsilon_report = match &cfg.stabilizer {
        Some(st) => Some(minimal_epsilon(&cfg.kernel, &st.kernel, &log_grid(0.05, 50.0, 512), 1)?),
        None => None,
    };

    let mut records = Vec::with_capacity(cfg.epochs);
    let mut diverged_at = None;
    for epoch in 0..cfg.epochs {
        let mut ld = f64::NAN;
        for _ in 0..cfg.n_critic {
            let x = sample_mixture(spec, cfg.batch_size, &mut rng);
            let z = sample_latent(cfg.batch_size, cfg.latent_dim, &mut rng);
            let out = match &cfg.stabilizer {
                Some(st) => loss_d_stabilized(&d, &g, &x, &z, &cfg.kernel, &st.kernel, st.epsilon),
                None => loss_d(&d, &g, &x, &z, &cfg.kernel),
            };
            ld = out.as_ref().map_or(f64::NAN, |o| o.value);
            match out {
                Ok(o) if o.value.is_finite() => d.adam_step(&mut opt_d, &o.grads, true)?,
                Ok(_) | Err(Error::NonFinite(_)) => break,
                Err(e) => return Err(e),
            }
        }
        let mut lg = f64::NAN;
        if ld.is_finite() {
            let x = sample_mixture(spec, cfg.batch_size, &mut rng);
            let z = sample_latent(cfg.batch_size, cfg.latent_dim, &mut rng);
            match loss_g(&d, &g, &x, &z, &cfg.kernel) {
                Ok(o) => {
                    lg = o.value;
                    if lg.is_finite() {
                        g.adam_step(&mut opt_g, &o.grads, false)?;
                    }
                }
                Err(Error::NonFinite(_)) => {}
                Err(e) => return Err(e),
            }
        }
        let (feature_distance, cov) = evaluate(&d, &g, &eval, cfg, spec)?;
        records.push(EpochRecord {
            epoch,
            loss_g: lg,
            loss_d: ld,
            feature_distance,
            mode_coverage: cov.covered,
            high_quality_fraction: cov.high_quality_fraction,
        });
        if !(ld.is_finite() && lg.is_finite()) {
            diverged_at = Some(epoch);
            break;
        }
    }
    Ok(TrainRun {
        config: cfg.clone(),
        mixture: *spec,
        records,
        diverged_at,
        generator: g,
        discriminator: d,
        epsilon_report,
    })
}
