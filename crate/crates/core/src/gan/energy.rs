//! Three-term energy between two feature batches, with gradients.

use ndarray::{Array1, Array2, Axis};

use crate::error::{Error, Result};
use crate::flow::CrossPairs;
use crate::kernels::{EvalOptions, KernelSpec};

/// Energy value and its gradient with respect to every row of each batch.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyGrads {
    pub value: f64,
    pub d_real: Array2<f64>,
    pub d_gen: Array2<f64>,
}

/// `−2·mean e(r, g) + mean_{i≠i′} e(r, r′) + mean_{j≠j′} e(g, g′)`.
///
/// `with_real_self = false` drops the real self term, which does not depend
/// on the generator.
pub fn feature_energy(
    k: &KernelSpec,
    real: &Array2<f64>,
    gen: &Array2<f64>,
    cross: CrossPairs,
    with_real_self: bool,
) -> Result<EnergyGrads> {
    Ok(feature_energies(&[k], real, gen, cross, with_real_self)?.remove(0))
}

/// [`feature_energy`] for several kernels sharing one set of pair
/// distances. Each result is bitwise what a single-kernel call returns.
pub fn feature_energies(
    kernels: &[&KernelSpec],
    real: &Array2<f64>,
    gen: &Array2<f64>,
    cross: CrossPairs,
    with_real_self: bool,
) -> Result<Vec<EnergyGrads>> {
    if real.ncols() != gen.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "feature widths differ: {} vs {}",
            real.ncols(),
            gen.ncols()
        )));
    }
    let matched = match cross {
        CrossPairs::All => false,
        CrossPairs::ExcludeMatched if real.nrows() == gen.nrows() => true,
        CrossPairs::ExcludeMatched => {
            return Err(Error::ShapeMismatch("matched-pair exclusion needs equal batch sizes".into()))
        }
    };
    let cross_blocks = pair_blocks(kernels, real, gen, matched, false)?;
    let gen_blocks = pair_blocks(kernels, gen, gen, true, true)?;
    let real_blocks = if with_real_self {
        Some(pair_blocks(kernels, real, real, true, true)?)
    } else {
        None
    };
    let mut out = Vec::with_capacity(kernels.len());
    for (i, (c, mut d_real, mut d_gen)) in cross_blocks.into_iter().enumerate() {
        let mut value = -2.0 * c;
        d_real *= -2.0;
        d_gen *= -2.0;
        let (gs, ga, gb) = &gen_blocks[i];
        value += gs;
        d_gen += ga;
        d_gen += gb;
        if let Some(rb) = &real_blocks {
            let (rs, ra, rb) = &rb[i];
            value += rs;
            d_real += ra;
            d_real += rb;
        }
        out.push(EnergyGrads { value, d_real, d_gen });
    }
    Ok(out)
}

/// Sum-of-Gaussians form `Σ amp·exp(−a r²)`, when the kernel has one.
fn gaussian_terms(k: &KernelSpec, scale: f64, out: &mut Vec<(f64, f64)>) -> bool {
    match k {
        KernelSpec::GaussianRbf { sigma } => {
            out.push((scale, 0.5 / (sigma * sigma)));
            true
        }
        KernelSpec::RescaledGaussian { sigma } => {
            out.push((scale / sigma, 0.5 / (sigma * sigma)));
            true
        }
        KernelSpec::Sum { terms } => terms.iter().all(|t| gaussian_terms(&t.kernel, scale * t.weight, out)),
        KernelSpec::Stabilized {
            base,
            stabilizer,
            epsilon,
        } => gaussian_terms(base, scale, out) && gaussian_terms(stabilizer, -scale * epsilon, out),
        _ => false,
    }
}

enum Profile<'a> {
    Gaussians(Vec<(f64, f64)>),
    Radial(&'a KernelSpec),
}

impl Profile<'_> {
    #[inline]
    fn at(&self, r2: f64, dim: usize) -> Result<(f64, f64)> {
        match self {
            Profile::Gaussians(terms) => {
                let (mut e, mut s) = (0.0, 0.0);
                for &(amp, a) in terms {
                    let v = amp * (-a * r2).exp();
                    e += v;
                    s -= a * v;
                }
                Ok((e, s))
            }
            Profile::Radial(k) => k.profile_r2(r2, dim, EvalOptions::default()),
        }
    }
}

/// Per kernel: mean of `e(aᵢ, bⱼ)` over pairs and its gradients with
/// respect to the rows of `a` and of `b`. `symmetric` promises `a == b`.
pub(crate) fn pair_blocks(
    kernels: &[&KernelSpec],
    a: &Array2<f64>,
    b: &Array2<f64>,
    skip_diagonal: bool,
    symmetric: bool,
) -> Result<Vec<(f64, Array2<f64>, Array2<f64>)>> {
    let (na, d) = a.dim();
    let nb = b.nrows();
    let count = na * nb - if skip_diagonal { na.min(nb) } else { 0 };
    if count == 0 {
        return Ok(kernels
            .iter()
            .map(|_| (0.0, Array2::zeros((na, d)), Array2::zeros((nb, d))))
            .collect());
    }
    let w = 1.0 / count as f64;
    let a_s = a.as_standard_layout();
    let b_s = b.as_standard_layout();
    let (a_s, b_s) = (a_s.as_slice().unwrap(), b_s.as_slice().unwrap());

    let mut r2: Option<Array2<f64>> = None;
    let mut out = Vec::with_capacity(kernels.len());
    for &k in kernels {
        if !k.is_radial() {
            out.push(generic_block(k, a_s, b_s, na, nb, d, skip_diagonal, w)?);
            continue;
        }
        let r2 = r2.get_or_insert_with(|| squared_distances(a_s, b_s, na, nb, d, symmetric));
        let mut terms = Vec::new();
        let profile = if gaussian_terms(k, 1.0, &mut terms) {
            Profile::Gaussians(terms)
        } else {
            Profile::Radial(k)
        };
        // slopes s = de/d(r²); ∇_a e = 2 s (a − b)
        let mut s = Array2::<f64>::zeros((na, nb));
        let mut total = 0.0;
        if symmetric {
            // mirrored values, summed in the same order as the general loop
            let mut e = Array2::<f64>::zeros((na, nb));
            for i in 0..na {
                for j in i + 1..nb {
                    let (v, slope) = profile.at(r2[[i, j]], d)?;
                    e[[i, j]] = v;
                    e[[j, i]] = v;
                    s[[i, j]] = slope;
                    s[[j, i]] = slope;
                }
            }
            for i in 0..na {
                for j in 0..nb {
                    if !(skip_diagonal && i == j) {
                        total += if i == j { profile.at(0.0, d)?.0 } else { e[[i, j]] };
                    }
                }
            }
        } else {
            for i in 0..na {
                for j in 0..nb {
                    if skip_diagonal && i == j {
                        continue;
                    }
                    let (e, slope) = profile.at(r2[[i, j]], d)?;
                    total += e;
                    s[[i, j]] = slope;
                }
            }
        }
        let rows: Array1<f64> = s.sum_axis(Axis(1));
        let ga = (a * &rows.insert_axis(Axis(1)) - s.dot(b)) * (2.0 * w);
        let gb = if symmetric {
            ga.clone()
        } else {
            let cols: Array1<f64> = s.sum_axis(Axis(0));
            (b * &cols.insert_axis(Axis(1)) - s.t().dot(a)) * (2.0 * w)
        };
        out.push((finite_mean(total, w)?, ga, gb));
    }
    Ok(out)
}

fn squared_distances(a: &[f64], b: &[f64], na: usize, nb: usize, d: usize, symmetric: bool) -> Array2<f64> {
    let mut r2 = Array2::zeros((na, nb));
    for i in 0..na {
        let ai = &a[i * d..(i + 1) * d];
        let from = if symmetric { i + 1 } else { 0 };
        for j in from..nb {
            let bj = &b[j * d..(j + 1) * d];
            let v: f64 = ai.iter().zip(bj).map(|(x, y)| (x - y) * (x - y)).sum();
            r2[[i, j]] = v;
            if symmetric {
                r2[[j, i]] = v;
            }
        }
    }
    r2
}

#[allow(clippy::too_many_arguments)]
fn generic_block(
    k: &KernelSpec,
    a: &[f64],
    b: &[f64],
    na: usize,
    nb: usize,
    d: usize,
    skip_diagonal: bool,
    w: f64,
) -> Result<(f64, Array2<f64>, Array2<f64>)> {
    let opts = EvalOptions::default();
    let mut ga = Array2::zeros((na, d));
    let mut gb = Array2::zeros((nb, d));
    let (ga_s, gb_s) = (ga.as_slice_mut().unwrap(), gb.as_slice_mut().unwrap());
    let mut total = 0.0;
    for i in 0..na {
        let ai = &a[i * d..(i + 1) * d];
        for j in 0..nb {
            if skip_diagonal && i == j {
                continue;
            }
            let bj = &b[j * d..(j + 1) * d];
            total += k.eval_with(ai, bj, opts)?;
            k.add_grad(ai, bj, w, opts, &mut ga_s[i * d..(i + 1) * d])?;
            k.add_grad(bj, ai, w, opts, &mut gb_s[j * d..(j + 1) * d])?;
        }
    }
    Ok((finite_mean(total, w)?, ga, gb))
}

fn finite_mean(total: f64, w: f64) -> Result<f64> {
    let mean = total * w;
    if mean.is_finite() {
        Ok(mean)
    } else {
        Err(Error::NonFinite("feature energy"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, d: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((n, d), |_| rng.random_range(-2.0..2.0))
    }

    fn naive(k: &KernelSpec, a: &Array2<f64>, b: &Array2<f64>, skip: bool) -> f64 {
        let mut acc = 0.0;
        let mut n = 0;
        for i in 0..a.nrows() {
            for j in 0..b.nrows() {
                if skip && i == j {
                    continue;
                }
                acc += k.eval(a.row(i).as_slice().unwrap(), b.row(j).as_slice().unwrap()).unwrap();
                n += 1;
            }
        }
        acc / n as f64
    }

    #[test]
    fn matches_double_loop_and_finite_differences() {
        let kernels = [
            KernelSpec::sum([KernelSpec::gaussian(1.0), KernelSpec::gaussian(2.5)]),
            KernelSpec::stabilized(KernelSpec::rescaled_gaussian(2.0), KernelSpec::rational_quadratic(1.0), 0.7),
            KernelSpec::cramer(),
        ];
        let r = random(6, 3, 1);
        let g = random(5, 3, 2);
        for k in &kernels {
            let out = feature_energy(k, &r, &g, CrossPairs::All, true).unwrap();
            let want = -2.0 * naive(k, &r, &g, false) + naive(k, &r, &r, true) + naive(k, &g, &g, true);
            assert!((out.value - want).abs() <= 1e-12 * want.abs().max(1e-300), "{k}: {} vs {want}", out.value);

            let h = 1e-5;
            for (which, grad) in [(0, &out.d_real), (1, &out.d_gen)] {
                for idx in [(0, 0), (2, 1), (4, 2)] {
                    let bump = |delta: f64| {
                        let (mut r2, mut g2) = (r.clone(), g.clone());
                        if which == 0 {
                            r2[idx] += delta;
                        } else {
                            g2[idx] += delta;
                        }
                        feature_energy(k, &r2, &g2, CrossPairs::All, true).unwrap().value
                    };
                    let fd = (bump(h) - bump(-h)) / (2.0 * h);
                    let an = grad[idx];
                    assert!((fd - an).abs() <= 1e-6 * an.abs().max(1e-3), "{k} {which} {idx:?}: {fd} vs {an}");
                }
            }
        }
    }

    #[test]
    fn identical_batches_with_matched_exclusion() {
        let x = random(7, 4, 3);
        let k = KernelSpec::sum([KernelSpec::gaussian(1.0), KernelSpec::gaussian(4.0)]);
        let out = feature_energy(&k, &x, &x, CrossPairs::ExcludeMatched, true).unwrap();
        assert_eq!(out.value, 0.0);
        assert!(feature_energy(&k, &x, &random(3, 4, 0), CrossPairs::ExcludeMatched, true).is_err());
    }

    #[test]
    fn single_pair_has_no_self_terms() {
        let r = Array2::from_elem((1, 2), 0.0);
        let g = Array2::from_elem((1, 2), 1.0);
        let k = KernelSpec::gaussian(1.0);
        let out = feature_energy(&k, &r, &g, CrossPairs::All, true).unwrap();
        assert_eq!(out.value, -2.0 * (-1.0f64).exp());
    }
}
