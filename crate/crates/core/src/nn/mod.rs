//! Fully connected networks with exact reverse-mode gradients.

mod adam;

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use adam::AdamState;

pub const CHECKPOINT_FORMAT: &str = "wgf-mlp";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputActivation {
    #[default]
    Linear,
    Tanh,
}

/// Affine layers with LeakyReLU between them. Weights are stored
/// `fan_in × fan_out` so a batch maps as `X W + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layer_dims: Vec<usize>,
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
    pub slope: f64,
    pub output: OutputActivation,
    pub use_bias: bool,
}

/// Activations saved by [`Mlp::forward_cached`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input to each layer.
    inputs: Vec<Array2<f64>>,
    /// Pre-activation of each layer.
    pre: Vec<Array2<f64>>,
}

/// Parameter gradients, shaped like the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Gradients {
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }

    /// `self += alpha · other`.
    pub fn scaled_add(&mut self, alpha: f64, other: &Gradients) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            a.scaled_add(alpha, b);
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            a.scaled_add(alpha, b);
        }
    }

    /// `self += other`.
    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += b;
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            *a += b;
        }
    }
}

impl Mlp {
    /// Uniform `±1/√fan_in` weights, zero biases.
    pub fn new<R: Rng>(layer_dims: &[usize], slope: f64, rng: &mut R) -> Result<Self> {
        if layer_dims.len() < 2 || layer_dims.contains(&0) {
            return Err(Error::ShapeMismatch(format!("invalid layer dims {layer_dims:?}")));
        }
        if !(slope > 0.0 && slope < 1.0) {
            return Err(Error::InvalidConfig(format!("LeakyReLU slope must be in (0, 1), got {slope}")));
        }
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in layer_dims.windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            weights.push(Array2::from_shape_fn((w[0], w[1]), |_| rng.random_range(-bound..bound)));
            biases.push(Array1::zeros(w[1]));
        }
        Ok(Self {
            layer_dims: layer_dims.to_vec(),
            weights,
            biases,
            slope,
            output: OutputActivation::Linear,
            use_bias: true,
        })
    }

    pub fn seeded(layer_dims: &[usize], slope: f64, seed: u64) -> Result<Self> {
        Self::new(layer_dims, slope, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    /// A single square linear layer initialised to the identity.
    pub fn identity(dim: usize) -> Self {
        Self {
            layer_dims: vec![dim, dim],
            weights: vec![Array2::eye(dim)],
            biases: vec![Array1::zeros(dim)],
            slope: 0.2,
            output: OutputActivation::Linear,
            use_bias: true,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().expect("at least two layer dims")
    }

    pub fn num_params(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>() + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    pub fn forward(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        Ok(self.forward_cached(x)?.0)
    }

    pub fn forward_cached(&self, x: &Array2<f64>) -> Result<(Array2<f64>, ForwardCache)> {
        if x.ncols() != self.input_dim() {
            return Err(Error::ShapeMismatch(format!(
                "input has {} columns, model expects {}",
                x.ncols(),
                self.input_dim()
            )));
        }
        let last = self.weights.len() - 1;
        let mut inputs = Vec::with_capacity(self.weights.len());
        let mut pre = Vec::with_capacity(self.weights.len());
        let mut a = x.to_owned();
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = a.dot(w);
            if self.use_bias {
                z += b;
            }
            let out = if l < last {
                z.mapv(|v| if v >= 0.0 { v } else { self.slope * v })
            } else {
                match self.output {
                    OutputActivation::Linear => z.clone(),
                    OutputActivation::Tanh => z.mapv(f64::tanh),
                }
            };
            inputs.push(a);
            pre.push(z);
            a = out;
        }
        Ok((a, ForwardCache { inputs, pre }))
    }

    /// Reverse pass for `upstream = ∂L/∂output`; returns parameter and input gradients.
    pub fn backward(&self, cache: &ForwardCache, upstream: &Array2<f64>) -> Result<(Gradients, Array2<f64>)> {
        let last = self.weights.len() - 1;
        let out_shape = cache.pre[last].dim();
        if upstream.dim() != out_shape {
            return Err(Error::ShapeMismatch(format!(
                "upstream gradient {:?} does not match output {:?}",
                upstream.dim(),
                out_shape
            )));
        }
        let mut gw = vec![Array2::zeros((0, 0)); self.weights.len()];
        let mut gb = vec![Array1::zeros(0); self.weights.len()];
        let mut delta = match self.output {
            OutputActivation::Linear => upstream.to_owned(),
            OutputActivation::Tanh => {
                let mut d = upstream.to_owned();
                d.zip_mut_with(&cache.pre[last], |g, z| *g *= 1.0 - z.tanh().powi(2));
                d
            }
        };
        for l in (0..=last).rev() {
            gw[l] = cache.inputs[l].t().dot(&delta);
            gb[l] = if self.use_bias {
                delta.sum_axis(Axis(0))
            } else {
                Array1::zeros(delta.ncols())
            };
            let mut down = delta.dot(&self.weights[l].t());
            if l > 0 {
                // LeakyReLU derivative, slope 1 at exactly zero
                down.zip_mut_with(&cache.pre[l - 1], |g, z| {
                    if *z < 0.0 {
                        *g *= self.slope
                    }
                });
            }
            delta = down;
        }
        Ok((Gradients { weights: gw, biases: gb }, delta))
    }

    /// Parameters in layer order, each weight matrix row-major then its bias.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(Error::ShapeMismatch(format!(
                "{} parameters for a model with {}",
                params.len(),
                self.num_params()
            )));
        }
        let mut it = params.iter();
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            w.iter_mut().chain(b.iter_mut()).for_each(|p| *p = *it.next().unwrap());
        }
        Ok(())
    }

    /// One Adam update of every parameter.
    pub fn adam_step(&mut self, state: &mut AdamState, grads: &Gradients, maximize: bool) -> Result<()> {
        let mut p = self.params();
        let g = grads.flatten();
        state.step(&mut p, &g, maximize)?;
        if !self.use_bias {
            // keep frozen biases at their value
            let mut offset = 0;
            for (w, b) in self.weights.iter().zip(&self.biases) {
                offset += w.len();
                p[offset..offset + b.len()].copy_from_slice(b.as_slice().expect("contiguous bias"));
                offset += b.len();
            }
        }
        self.set_params(&p)
    }

    pub fn to_checkpoint(&self) -> serde_json::Value {
        serde_json::json!({
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "layer_dims": self.layer_dims,
            "slope": self.slope,
            "output": self.output,
            "use_bias": self.use_bias,
            "params": self.params(),
        })
    }

    pub fn from_checkpoint(v: &serde_json::Value) -> Result<Self> {
        #[derive(Deserialize)]
        struct Raw {
            format: String,
            version: u32,
            layer_dims: Vec<usize>,
            slope: f64,
            output: OutputActivation,
            use_bias: bool,
            params: Vec<f64>,
        }
        let raw: Raw = serde_json::from_value(v.clone()).map_err(|e| Error::InvalidConfig(format!("checkpoint: {e}")))?;
        if raw.format != CHECKPOINT_FORMAT || raw.version != CHECKPOINT_VERSION {
            return Err(Error::InvalidConfig(format!(
                "unsupported checkpoint {} v{}",
                raw.format, raw.version
            )));
        }
        let mut m = Self::seeded(&raw.layer_dims, raw.slope, 0)?;
        m.output = raw.output;
        m.use_bias = raw.use_bias;
        m.set_params(&raw.params)?;
        Ok(m)
    }
}
