//! Config file schema.
//!
//! One TOML file, every key optional. Command-line flags override it.
//!
//! ```toml
//! seed = 7                   # shared by every command
//! out_dir = "runs/exp1"      # exact output directory
//!
//! [spectrum]
//! kernel = "rq:alpha=2"      # inline kernel grammar, see below
//! table = false              # reference table instead of a single kernel
//! dim = 1
//! c = 1.0
//! xi_min = 0.01
//! xi_max = 50.0
//! xi_points = 512
//!
//! [flow]
//! kernel = "gaussian:sigma=1"
//! direction = "generator"    # or "discriminator"
//! dt = 0.01
//! steps = 1000
//! record_every = 10
//! n_real = 200
//! n_gen = 200
//! frames = true              # start/end scatter SVGs
//!
//! [perturb]
//! kernel = "gaussian:sigma=1"
//! direction = "generator"
//! c0 = 1.0
//! dt = 0.001                 # default 0.05 / max |omega|
//! steps = 200
//! amplitude = 0.001
//! mode = 3                   # single Fourier mode instead of seeded noise
//! points = 1024
//! half_width = 20.0
//!
//! [train]
//! preset = "stabilized"      # or "unstabilized"
//! epochs = 3000
//! epsilon = 1.0
//! kernel = "sum[rgauss:sigma=4;rgauss:sigma=8;rgauss:sigma=16]"
//! stabilizer = "sum[rgauss:sigma=1;rgauss:sigma=1.4142135623730951;rgauss:sigma=2]"
//! lr = 0.005
//! beta1 = 0.5
//! beta2 = 0.9
//! batch_size = 256
//! n_critic = 1
//! eval_points = 2000
//!
//! [epsilon]
//! base = "rgauss:sigma=4"
//! stabilizer = "rgauss:sigma=1"
//! dim = 1
//! xi_min = 0.05
//! xi_max = 50.0
//! xi_points = 512
//! ```
//!
//! Kernel grammar: `name:key=val,key=val` with leaves `gaussian` (sigma),
//! `rq` (alpha), `cramer` (z0 as `a|b|..`), `elastic` (exponent), `rgauss`
//! (sigma), `rrq` (alpha); combinators `sum[w*k1;k2;..]` and
//! `stab[base;s;eps]`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Default, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub spectrum: SpectrumSection,
    #[serde(default)]
    pub flow: FlowSection,
    #[serde(default)]
    pub perturb: PerturbSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub epsilon: EpsilonSection,
}

#[derive(Debug, Default, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSection {
    pub kernel: Option<String>,
    pub table: Option<bool>,
    pub dim: Option<usize>,
    pub c: Option<f64>,
    pub xi_min: Option<f64>,
    pub xi_max: Option<f64>,
    pub xi_points: Option<usize>,
}

#[derive(Debug, Default, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSection {
    pub kernel: Option<String>,
    pub direction: Option<String>,
    pub dt: Option<f64>,
    pub steps: Option<usize>,
    pub record_every: Option<usize>,
    pub n_real: Option<usize>,
    pub n_gen: Option<usize>,
    pub frames: Option<bool>,
}

#[derive(Debug, Default, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbSection {
    pub kernel: Option<String>,
    pub direction: Option<String>,
    pub c0: Option<f64>,
    pub dt: Option<f64>,
    pub steps: Option<usize>,
    pub amplitude: Option<f64>,
    pub mode: Option<usize>,
    pub points: Option<usize>,
    pub half_width: Option<f64>,
}

#[derive(Debug, Default, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub preset: Option<String>,
    pub epochs: Option<usize>,
    pub epsilon: Option<f64>,
    pub kernel: Option<String>,
    pub stabilizer: Option<String>,
    pub lr: Option<f64>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub batch_size: Option<usize>,
    pub n_critic: Option<usize>,
    pub eval_points: Option<usize>,
}

#[derive(Debug, Default, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct EpsilonSection {
    pub base: Option<String>,
    pub stabilizer: Option<String>,
    pub dim: Option<usize>,
    pub xi_min: Option<f64>,
    pub xi_max: Option<f64>,
    pub xi_points: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|m| CliError::Config(format!("{}: {m}", path.display())))
    }

    /// toml's messages carry the line, column and offending key.
    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn documented_example_parses() {
        let doc: String = include_str!("config.rs")
            .lines()
            .skip_while(|l| !l.starts_with("//! ```toml"))
            .skip(1)
            .take_while(|l| !l.starts_with("//! ```"))
            .map(|l| l.trim_start_matches("//!").trim_start_matches(' '))
            .collect::<Vec<_>>()
            .join("\n");
        let cfg = FileConfig::parse(&doc).unwrap();
        assert_eq!(cfg.seed, Some(7));
        assert_eq!(cfg.perturb.mode, Some(3));
        for k in [&cfg.spectrum.kernel, &cfg.flow.kernel, &cfg.train.kernel, &cfg.train.stabilizer] {
            wgf_core::parse_kernel(k.as_deref().unwrap()).unwrap();
        }
    }

    #[test]
    fn unknown_field_reports_line() {
        let err = FileConfig::parse("seed = 1\n[flow]\nstepz = 3\n").unwrap_err();
        assert!(err.contains("stepz"), "{err}");
        assert!(err.contains("line 3"), "{err}");
    }

    #[test]
    fn wrong_type_is_rejected() {
        assert!(FileConfig::parse("[train]\nepochs = \"many\"\n").is_err());
    }
}
