//! Shared fixtures for the criterion benches.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wgf_core::flow::ParticleSystem;
use wgf_core::gan::{sample_latent, sample_mixture, MixtureSpec};
use wgf_core::nn::Mlp;

/// `n` ring samples against `n` points uniform in `[-1, 1]²`.
pub fn ring_system(n: usize, seed: u64) -> ParticleSystem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let real = sample_mixture(&MixtureSpec::default(), n, &mut rng);
    let gen = Array2::from_shape_fn((n, 2), |_| rng.random_range(-1.0..1.0));
    ParticleSystem::new(real, gen).unwrap()
}

/// Discriminator 2→100→50→16 and generator 2→100→50→2.
pub fn nets(seed: u64) -> (Mlp, Mlp) {
    (
        Mlp::seeded(&[2, 100, 50, 16], 0.2, seed).unwrap(),
        Mlp::seeded(&[2, 100, 50, 2], 0.2, seed + 1).unwrap(),
    )
}

/// A data batch and a latent batch of size `b`.
pub fn batch(b: usize, seed: u64) -> (Array2<f64>, Array2<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (sample_mixture(&MixtureSpec::default(), b, &mut rng), sample_latent(b, 2, &mut rng))
}

/// Random points in `[-2, 2]^d`.
pub fn cloud(n: usize, d: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((n, d), |_| rng.random_range(-2.0..2.0))
}
