//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.
//!
//! `cargo test --release -p wgf-cli --test acceptance -- 1 3` runs a subset.

use std::fmt::Write as _;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use wgf_core::flow::{fits_to_csv, linearized_sim, mean_pairwise_distance, simulate, FlowConfig, GridPerturbation, ParticleSystem};
use wgf_core::gan::{sample_mixture, train, MixtureSpec, TrainConfig, TrainRun};
use wgf_core::nn::Mlp;
use wgf_core::spectral::{default_xi_grid, minimal_epsilon, oracle_ft, PeriodicGrid};
use wgf_core::{Direction, KernelSpec};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

struct Outcome {
    pass: bool,
    detail: String,
    /// Metric CSV whose bytes must repeat on rerun.
    csv: String,
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed())
}

fn line(id: u32, name: &str, pass: Option<bool>, detail: &str, took: Duration) {
    let status = match pass {
        Some(true) => "PASS",
        Some(false) => "FAIL",
        None => "EXCLUDED",
    };
    println!("criterion {id} {status}: {name} [{:.1} s] {detail}", took.as_secs_f64());
}

// 1 ------------------------------------------------------------------------

fn table_verdicts() -> (bool, String) {
    let dir = tempfile::TempDir::new().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_wgf"))
        .args(["--out-dir", dir.path().to_str().unwrap(), "spectrum", "--table"])
        .output()
        .unwrap();
    if !out.status.success() {
        return (false, format!("wgf exited with {:?}", out.status.code()));
    }
    let rows: Vec<Value> =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("table.json")).unwrap()).unwrap();
    let mut detail = String::new();
    let mut pass = rows.len() == 7;
    for r in &rows {
        let reproduced = r["reproduced"].as_bool().unwrap();
        let flagged = r["discrepancy"].as_bool().unwrap();
        let oracle_ok = r["oracle_matches_reference"].as_bool().unwrap();
        // a contradicted row must be flagged and show the oracle pattern
        let shows_oracle = oracle_ok || (flagged && r["oracle"].is_array());
        pass &= reproduced && shows_oracle;
        let _ = write!(
            detail,
            "{}={}{} ",
            r["name"].as_str().unwrap(),
            if reproduced { "ok" } else { "MISMATCH" },
            if flagged { "(flagged)" } else { "" }
        );
    }
    (pass, detail)
}

// 2 ------------------------------------------------------------------------

fn growth_rates() -> Outcome {
    let c0 = 1.0;
    let mut csv = String::new();
    let (mut pass, mut checked, mut worst) = (true, 0, 0.0f64);
    for k in [
        KernelSpec::gaussian(1.0),
        KernelSpec::gaussian(2.0),
        KernelSpec::gaussian(4.0),
        KernelSpec::elastic(),
    ] {
        let grid = PeriodicGrid::for_kernel(&k);
        let modes = oracle_ft(&k, grid).unwrap().modes();
        let omega_max = modes
            .iter()
            .map(|&(nu, lam)| (TWO_PI * nu).powi(2) * 2.0 * c0 * lam.abs())
            .fold(0.0f64, f64::max);
        let dt = 0.05 / omega_max;
        let p = GridPerturbation::seeded_noise(k.clone(), grid, c0, 1e-3, 9).unwrap();
        for dir in [Direction::Generator, Direction::Discriminator] {
            let fits = linearized_sim(&p, dir, dt, 200).unwrap().fit();
            let mut here = 0;
            for f in &fits {
                let (nu, lam) = modes[f.mode];
                let want = dir.sign() * 2.0 * c0 * (TWO_PI * nu).powi(2) * lam;
                pass &= (f.predicted - want).abs() <= 1e-12 * want.abs().max(1e-300);
                if f.resolved && f.predicted.abs() * dt < 0.1 {
                    pass &= f.rel_err < 1e-3;
                    worst = worst.max(f.rel_err);
                    here += 1;
                }
            }
            pass &= here > 10;
            checked += here;
            let _ = writeln!(csv, "# {k} {dir}");
            csv.push_str(&fits_to_csv(&fits));
        }
    }
    Outcome {
        pass,
        detail: format!("{checked} modes checked, max rel err {worst:.2e} (< 1e-3)"),
        csv,
    }
}

// 3 ------------------------------------------------------------------------

fn stabilization_threshold() -> Outcome {
    let (base, s) = (KernelSpec::rescaled_gaussian(4.0), KernelSpec::rescaled_gaussian(1.0));
    let grid = default_xi_grid();
    let sol = minimal_epsilon(&base, &s, &grid, 1).unwrap();
    let eps_ok = (0.95..=1.0).contains(&sol.epsilon_min) && grid[0] <= 0.05;

    let run = |eps: f64| {
        let k = KernelSpec::stabilized(base.clone(), s.clone(), eps);
        let pg = PeriodicGrid::for_kernel(&k);
        let spectrum = oracle_ft(&k, pg).unwrap();
        let omega_max = spectrum
            .modes()
            .iter()
            .map(|&(nu, lam)| (TWO_PI * nu).powi(2) * 2.0 * lam.abs())
            .fold(0.0f64, f64::max);
        let p = GridPerturbation::seeded_noise(k, pg, 1.0, 1e-3, 0).unwrap();
        let dt = 0.05 / omega_max;
        let hist = linearized_sim(&p, Direction::Discriminator, dt, 200).unwrap();
        (hist.fit(), hist, spectrum, dt)
    };

    let (fits_hi, hist_hi, spec_hi, dt) = run(1.5);
    let floor = spec_hi.noise_floor(1e-9);
    let modes = spec_hi.modes();
    let last = hist_hi.amplitudes.last().unwrap();
    let mut all_decay = true;
    for (k, (&a0, &a1)) in hist_hi.amplitudes[0].iter().zip(last).enumerate().skip(1) {
        all_decay &= if modes[k].1.abs() > floor {
            a1 < a0
        } else {
            // below the floor the eigenvalue is rounding noise of either sign;
            // allow the growth a floor-sized eigenvalue could produce
            let w = 2.0 * (TWO_PI * modes[k].0).powi(2) * floor;
            a1 <= a0 * (1.0 + w * dt).powi(200)
        };
    }
    all_decay &= fits_hi.iter().filter(|f| f.resolved).all(|f| f.measured < 0.0);

    let (fits_lo, ..) = run(0.5);
    let lowest = fits_lo.iter().find(|f| f.resolved).unwrap();
    let lowest_grows = lowest.measured > 0.0;

    let mut csv = format!("epsilon_min,{}\n", sol.epsilon_min);
    csv.push_str(&fits_to_csv(&fits_hi));
    csv.push_str(&fits_to_csv(&fits_lo));
    Outcome {
        pass: eps_ok && all_decay && lowest_grows,
        detail: format!(
            "epsilon_min {:.4} in [0.95, 1]: {eps_ok}; eps 1.5 all modes decay: {all_decay}; eps 0.5 lowest resolved mode (xi {:.4}) rate {:.3e}",
            sol.epsilon_min, lowest.xi, lowest.measured
        ),
        csv,
    }
}

// 4 ------------------------------------------------------------------------

/// Relative per-step slack on monotonicity.
const STEP_SLACK: f64 = 1e-9;

fn descent_ascent() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let real = sample_mixture(&MixtureSpec::default(), 200, &mut rng);
    let gen = Array2::from_shape_fn((200, 2), |_| rng.random_range(-1.0..1.0));
    let sys = ParticleSystem::new(real, gen).unwrap();
    let run = |dir| {
        let mut cfg = FlowConfig::new(KernelSpec::gaussian(1.0), dir, 2000);
        cfg.dt = 1e-2;
        simulate(&sys, &cfg).unwrap()
    };
    let g = run(Direction::Generator);
    let d = run(Direction::Discriminator);
    let slack = STEP_SLACK * g.energies()[0].abs();
    let g_ok = !g.diverged() && g.max_increase() <= slack;
    let d_ok = d.diverged() || d.max_decrease() <= slack;
    Outcome {
        pass: g_ok && d_ok,
        detail: format!(
            "generator max rise {:.2e} (slack {slack:.1e}), energy {:.4e} -> {:.4e}; discriminator max drop {:.2e}, diverged {}",
            g.max_increase(),
            g.energies()[0],
            g.final_energy(),
            d.max_decrease(),
            d.diverged()
        ),
        csv: g.energy_csv() + &d.energy_csv(),
    }
}

// 5 ------------------------------------------------------------------------

const PROBES: usize = 100;

fn kernel_probes(k: &KernelSpec, seed: u64, csv: &mut String) -> (usize, f64) {
    let h = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut n, mut worst) = (0, 0.0f64);
    while n < PROBES {
        let d = rng.random_range(1..=4);
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let y: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let r = x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let rx = x.iter().map(|a| a * a).sum::<f64>().sqrt();
        if r < 0.2 || (matches!(k, KernelSpec::Cramer { .. }) && rx < 0.2) {
            continue;
        }
        let g = k.grad(&x, &y).unwrap();
        let fd: Vec<f64> = (0..d)
            .map(|c| {
                let (mut xp, mut xm) = (x.clone(), x.clone());
                xp[c] += h;
                xm[c] -= h;
                (k.eval(&xp, &y).unwrap() - k.eval(&xm, &y).unwrap()) / (2.0 * h)
            })
            .collect();
        let err = g.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm = g.iter().map(|a| a * a).sum::<f64>().sqrt();
        let rel = err / norm.max(1e-3);
        worst = worst.max(rel);
        let _ = writeln!(csv, "{k},{n},{rel:e}");
        n += 1;
    }
    (n, worst)
}

/// Parameter and input probes of `L = Σ c⊙y + ½Σy²`, skipping stencils that
/// straddle a LeakyReLU kink.
fn mlp_probes(dims: &[usize], seed: u64, csv: &mut String) -> (usize, usize, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-5;
    let (mut n, mut kinks, mut worst) = (0, 0, 0.0f64);
    while n < PROBES {
        let mut m = Mlp::new(dims, 0.2, &mut rng).unwrap();
        let p0: Vec<f64> = m.params().iter().map(|v| v + rng.random_range(-0.1..0.1)).collect();
        m.set_params(&p0).unwrap();
        let x = Array2::from_shape_fn((3, dims[0]), |_| rng.random_range(-2.0..2.0));
        let c = Array2::from_shape_fn((3, dims[dims.len() - 1]), |_| rng.random_range(-1.0..1.0));
        let loss = |m: &Mlp, x: &Array2<f64>| {
            let y = m.forward(x).unwrap();
            (&c * &y).sum() + 0.5 * y.mapv(|v| v * v).sum()
        };
        let (y, cache) = m.forward_cached(&x).unwrap();
        let (grads, input_grad) = m.backward(&cache, &(&c + &y)).unwrap();
        let an = grads.flatten();
        let scale = an.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let f0 = loss(&m, &x);
        let central = |up: f64, down: f64| {
            let (fwd, bwd) = ((up - f0) / h, (f0 - down) / h);
            ((fwd - bwd).abs() <= 1e-3 * fwd.abs().max(bwd.abs()).max(1e-3)).then(|| (up - down) / (2.0 * h))
        };
        let mut record = |what: &str, fd: Option<f64>, a: f64, floor: f64| match fd {
            None => kinks += 1,
            Some(fd) => {
                let rel = (fd - a).abs() / a.abs().max(floor);
                worst = worst.max(rel);
                let _ = writeln!(csv, "{dims:?},{what},{rel:e}");
                n += 1;
            }
        };
        for _ in 0..20 {
            let i = rng.random_range(0..p0.len());
            let mut p = p0.clone();
            p[i] += h;
            m.set_params(&p).unwrap();
            let up = loss(&m, &x);
            p[i] = p0[i] - h;
            m.set_params(&p).unwrap();
            let down = loss(&m, &x);
            m.set_params(&p0).unwrap();
            record(&format!("param {i}"), central(up, down), an[i], 1e-3 * scale);
        }
        let (r, col) = (rng.random_range(0..3), rng.random_range(0..dims[0]));
        let (mut xp, mut xm) = (x.clone(), x.clone());
        xp[[r, col]] += h;
        xm[[r, col]] -= h;
        record("input", central(loss(&m, &xp), loss(&m, &xm)), input_grad[[r, col]], 1e-3);
    }
    (n, kinks, worst)
}

fn gradient_exactness() -> Outcome {
    let mut csv = String::new();
    let mut pass = true;
    let mut kernel_worst = 0.0f64;
    let variants = [
        KernelSpec::gaussian(1.3),
        KernelSpec::rational_quadratic(0.5),
        KernelSpec::rational_quadratic(2.0),
        KernelSpec::cramer(),
        KernelSpec::elastic(),
        KernelSpec::elastic_with_exponent(2.5),
        KernelSpec::rescaled_gaussian(4.0),
        KernelSpec::rescaled_rq(1.0),
        TrainConfig::loss_kernel(),
        KernelSpec::stabilized(TrainConfig::loss_kernel(), TrainConfig::stabilizer_kernel(), 1.0),
    ];
    for (i, k) in variants.iter().enumerate() {
        let (n, worst) = kernel_probes(k, 100 + i as u64, &mut csv);
        pass &= n >= PROBES && worst < 1e-5;
        kernel_worst = kernel_worst.max(worst);
    }
    let mut mlp = String::new();
    for (i, dims) in [[2usize, 100, 50, 2], [2, 100, 50, 16]].iter().enumerate() {
        let (n, kinks, worst) = mlp_probes(dims, 200 + i as u64, &mut csv);
        pass &= n >= PROBES && worst < 1e-5;
        let _ = write!(mlp, "{dims:?}: {n} probes, {kinks} kink skips, max {worst:.1e}; ");
    }
    Outcome {
        pass,
        detail: format!(
            "{} kernels x {PROBES} probes, max rel err {kernel_worst:.1e}; {mlp}",
            variants.len()
        ),
        csv,
    }
}

// 6 ------------------------------------------------------------------------

const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];
/// Relative oscillation of the feature distance above which a run counts as unstable.
const OSCILLATION_LIMIT: f64 = 0.05;

struct GanSummary {
    seed: u64,
    coverage: usize,
    hq: f64,
    oscillation: f64,
    distance: f64,
    feature_spread: f64,
    diverged: bool,
}

fn summarize(run: &TrainRun, seed: u64) -> GanSummary {
    let last = run.last().copied();
    let data = sample_mixture(&run.mixture, 500, &mut ChaCha8Rng::seed_from_u64(77));
    let feats = run.discriminator.forward(&data).unwrap();
    GanSummary {
        seed,
        coverage: last.map_or(0, |r| r.mode_coverage),
        hq: last.map_or(0.0, |r| r.high_quality_fraction),
        oscillation: run.oscillation_amplitude(100),
        distance: last.map_or(f64::NAN, |r| r.feature_distance),
        feature_spread: mean_pairwise_distance(&feats),
        diverged: run.diverged(),
    }
}

fn meets(s: &GanSummary) -> bool {
    s.coverage == 8 && s.hq >= 0.75
}

/// Oscillation counts relative to the distance level it oscillates around.
fn unstable(s: &GanSummary) -> bool {
    s.diverged || !(s.oscillation <= OSCILLATION_LIMIT * s.distance.abs())
}

fn describe(tag: &str, runs: &[GanSummary]) -> String {
    let mut s = format!("{tag}: ");
    for r in runs {
        let _ = write!(
            s,
            "seed {} cov {} hq {:.2} osc/dist {:.2} spread {:.2e}; ",
            r.seed,
            r.coverage,
            r.hq,
            r.oscillation / r.distance.abs(),
            r.feature_spread
        );
    }
    s
}

fn gan_experiment() -> (Outcome, Vec<(String, String)>) {
    let spec = MixtureSpec::default();
    let mut first = Vec::new();
    let mut go = |cfg: TrainConfig| {
        let seed = cfg.seed;
        let run = train(&cfg, &spec).unwrap();
        if seed == SEEDS[0] {
            first.push((format!("{:?}", cfg.stabilizer.is_some()), run.to_csv()));
        }
        summarize(&run, seed)
    };
    let stab: Vec<GanSummary> = SEEDS.iter().map(|&s| go(TrainConfig::stabilized(s))).collect();
    let unstab: Vec<GanSummary> = SEEDS.iter().map(|&s| go(TrainConfig::unstabilized(s))).collect();
    let stab_ok = stab.iter().filter(|s| meets(s)).count();
    let unstab_bad = unstab.iter().filter(|s| !meets(s) || unstable(s)).count();
    let pass = stab_ok >= 3 && unstab_bad >= 3;
    let detail = format!(
        "stabilized meets thresholds in {stab_ok}/5 (need 3); unstabilized fails or unstable in {unstab_bad}/5 (need 3) | {} | {}",
        describe("stabilized", &stab),
        describe("unstabilized", &unstab)
    );
    let csv = first.iter().map(|(_, c)| c.as_str()).collect::<String>();
    (Outcome { pass, detail, csv }, first)
}

// 8 ------------------------------------------------------------------------

fn main() -> ExitCode {
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let on = |id: u32| wanted.is_empty() || wanted.contains(&id);
    let mut results: Vec<bool> = Vec::new();
    let mut csvs: Vec<(u32, String)> = Vec::new();
    let mut gan_first: Vec<(String, String)> = Vec::new();
    let report = |results: &mut Vec<bool>, id: u32, name: &str, pass: bool, detail: &str, took: Duration| {
        line(id, name, Some(pass), detail, took);
        results.push(pass);
    };

    if on(1) {
        let ((pass, detail), took) = timed(table_verdicts);
        report(&mut results, 1, "reference verdict table", pass && took < Duration::from_secs(10), &detail, took);
    }
    let staged: [(u32, &str, Option<u64>, fn() -> Outcome); 4] = [
        (2, "growth-rate oracle match", Some(60), growth_rates),
        (3, "stabilization threshold", Some(60), stabilization_threshold),
        (4, "descent/ascent dichotomy", Some(120), descent_ascent),
        (5, "gradient exactness", None, gradient_exactness),
    ];
    for (id, name, limit, f) in staged {
        if on(id) {
            let (o, took) = timed(f);
            let in_time = limit.is_none_or(|s| took < Duration::from_secs(s));
            report(&mut results, id, name, o.pass && in_time, &o.detail, took);
            csvs.push((id, o.csv));
        }
    }
    if on(6) {
        let ((o, first), took) = timed(gan_experiment);
        let pass = o.pass && took < Duration::from_secs(1800);
        report(&mut results, 6, "Gaussian-mixture experiment", pass, &o.detail, took);
        gan_first = first;
    }
    if on(7) {
        line(
            7,
            "CIFAR-10 Inception Score / FID",
            None,
            "not reproducible at desk scale; substituted by criteria 1-6",
            Duration::ZERO,
        );
    }
    if on(8) {
        let ((pass, detail), took) = timed(|| {
            let mut same = Vec::new();
            for (id, _, _, f) in staged {
                let first = match csvs.iter().find(|(i, _)| *i == id) {
                    Some((_, c)) => c.clone(),
                    None => f().csv,
                };
                same.push((id, f().csv == first));
            }
            // one seed of each configuration at full length
            let spec = MixtureSpec::default();
            for cfg in [TrainConfig::stabilized(SEEDS[0]), TrainConfig::unstabilized(SEEDS[0])] {
                let key = format!("{:?}", cfg.stabilizer.is_some());
                let first = match gan_first.iter().find(|(k, _)| *k == key) {
                    Some((_, c)) => c.clone(),
                    None => train(&cfg, &spec).unwrap().to_csv(),
                };
                same.push((6, train(&cfg, &spec).unwrap().to_csv() == first));
            }
            let pass = same.iter().all(|s| s.1);
            let detail = same
                .iter()
                .map(|(id, ok)| format!("{id}:{}", if *ok { "identical" } else { "DIFFERS" }))
                .collect::<Vec<_>>()
                .join(" ");
            (pass, detail)
        });
        report(&mut results, 8, "bitwise determinism of metric CSVs", pass, &detail, took);
    }

    let failed = results.iter().filter(|p| !**p).count();
    println!("{} passed, {failed} failed, criterion 7 excluded", results.len() - failed);
    if failed > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
