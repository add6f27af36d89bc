//! Particle-based probability distances and their Wasserstein gradient flows.
//!
//! * [`kernels`]: pair potentials `e(x, y)` and their closed-form gradients.
//! * [`spectral`]: Fourier transforms, growth rates, stability verdicts and
//!   a discrete-spectrum oracle.
//! * [`flow`]: particle dynamics and the linearised perturbation simulator.
//! * [`nn`]: a small MLP with exact gradients and Adam.
//! * [`gan`]: adversarial training on a Gaussian-mixture ring.

pub mod error;
pub mod kernels;
pub mod spectral;
pub mod flow;
pub mod nn;
pub mod gan;

pub use error::{Error, Result};
pub use kernels::{parse_kernel, EvalOptions, KernelSpec, PairEnergy};
pub use spectral::{Direction, SpectrumReport, StabilizerSolution, Verdict};
