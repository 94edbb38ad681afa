//! Shrinkage kernel smoothing of static parameters.
//!
//! Each draw is pulled towards the ensemble mean and jittered:
//! `theta <- a * theta + (1 - a) * mean + e`, `e ~ N(0, (1 - a^2) V)`,
//! which keeps the ensemble mean and covariance in expectation.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::params::Transform;
use crate::rng::{stream, Component, StreamRng};

/// Weighted mean and covariance of the rows of `x`.
pub fn moments(x: &[Vec<f64>], weights: Option<&[f64]>) -> (DVector<f64>, DMatrix<f64>) {
    let p = x.first().map_or(0, Vec::len);
    let n = x.len();
    let w = |r: usize| weights.map_or(1.0 / n as f64, |w| w[r]);
    let mut mean = DVector::zeros(p);
    for (r, row) in x.iter().enumerate() {
        for j in 0..p {
            mean[j] += w(r) * row[j];
        }
    }
    let mut cov = DMatrix::zeros(p, p);
    for (r, row) in x.iter().enumerate() {
        for i in 0..p {
            let di = row[i] - mean[i];
            for j in 0..=i {
                cov[(i, j)] += w(r) * di * (row[j] - mean[j]);
            }
        }
    }
    for i in 0..p {
        for j in 0..i {
            cov[(j, i)] = cov[(i, j)];
        }
    }
    (mean, cov)
}

/// Factor `V` for jitter. Falls back to the diagonal when `V` is not
/// positive definite; a variance at rounding level is a singular-covariance
/// error.
fn factor(mean: &DVector<f64>, cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let p = cov.nrows();
    for i in 0..p {
        if !(cov[(i, i)] > 1e-24 * (1.0 + mean[i] * mean[i])) {
            return Err(Error::SingularCovariance(format!(
                "parameter component {i} has zero ensemble variance"
            )));
        }
    }
    match cov.clone().cholesky() {
        Some(c) => Ok(c.l()),
        None => Ok(DMatrix::from_diagonal(&cov.diagonal().map(f64::sqrt))),
    }
}

/// Kernel-smooth an ensemble of parameter vectors. Draw `r` uses the stream
/// `(seed, Kernel, step, r)`, so output does not depend on thread layout.
pub fn kernel_smooth_params(
    thetas: &[Vec<f64>],
    weights: Option<&[f64]>,
    shrinkage: f64,
    seed: u64,
    step: u64,
) -> Result<Vec<Vec<f64>>> {
    if !(shrinkage > 0.0 && shrinkage <= 1.0) {
        return Err(Error::Config(format!("kernel shrinkage {shrinkage} outside (0, 1]")));
    }
    smooth_with(thetas, weights, shrinkage, &|r| stream(seed, Component::Kernel, step, r as u64))
}

pub(crate) fn smooth_with(
    thetas: &[Vec<f64>],
    weights: Option<&[f64]>,
    shrinkage: f64,
    rng_for: &(dyn Fn(usize) -> StreamRng + Sync),
) -> Result<Vec<Vec<f64>>> {
    if shrinkage == 1.0 || thetas.is_empty() {
        return Ok(thetas.to_vec());
    }
    let (mean, cov) = moments(thetas, weights);
    let l = factor(&mean, &cov)?;
    let h = (1.0 - shrinkage * shrinkage).sqrt();
    let p = mean.len();
    Ok(thetas
        .iter()
        .enumerate()
        .map(|(r, row)| {
            let mut rng = rng_for(r);
            let z = DVector::from_iterator(p, (0..p).map(|_| rng.sample::<f64, _>(StandardNormal)));
            let e = &l * z;
            (0..p).map(|j| shrinkage * row[j] + (1.0 - shrinkage) * mean[j] + h * e[j]).collect()
        })
        .collect())
}

/// Kernel-smooth on the unconstrained scale of each parameter. Components
/// with a fixed transform are left alone.
pub fn kernel_smooth_transformed(
    thetas: &[Vec<f64>],
    weights: Option<&[f64]>,
    transforms: &[Transform],
    shrinkage: f64,
    seed: u64,
    step: u64,
) -> Result<Vec<Vec<f64>>> {
    smooth_transformed_with(thetas, weights, transforms, shrinkage, &|r| {
        stream(seed, Component::Kernel, step, r as u64)
    })
}

pub(crate) fn smooth_transformed_with(
    thetas: &[Vec<f64>],
    weights: Option<&[f64]>,
    transforms: &[Transform],
    shrinkage: f64,
    rng_for: &(dyn Fn(usize) -> StreamRng + Sync),
) -> Result<Vec<Vec<f64>>> {
    let free: Vec<usize> = (0..transforms.len()).filter(|&j| transforms[j] != Transform::Fixed).collect();
    if free.is_empty() {
        return Ok(thetas.to_vec());
    }
    let z: Vec<Vec<f64>> = thetas
        .iter()
        .map(|t| free.iter().map(|&j| transforms[j].to_unconstrained(t[j])).collect())
        .collect();
    if !(shrinkage > 0.0 && shrinkage <= 1.0) {
        return Err(Error::Config(format!("kernel shrinkage {shrinkage} outside (0, 1]")));
    }
    let z = smooth_with(&z, weights, shrinkage, rng_for)?;
    Ok(thetas
        .iter()
        .zip(z)
        .map(|(t, zr)| {
            let mut out = t.clone();
            for (k, &j) in free.iter().enumerate() {
                out[j] = transforms[j].from_unconstrained(zr[k]);
            }
            out
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ensemble(n: usize) -> Vec<Vec<f64>> {
        let mut rng = stream(5, Component::Prior, 0, 0);
        (0..n)
            .map(|_| {
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                vec![1.0 + a, 2.0 + 0.5 * a + 0.3 * b]
            })
            .collect()
    }

    #[test]
    fn no_shrinkage_is_identity() {
        let x = ensemble(50);
        assert_eq!(kernel_smooth_params(&x, None, 1.0, 1, 0).unwrap(), x);
    }

    #[test]
    fn point_mass_is_singular() {
        let x = vec![vec![0.3, 1.0]; 10];
        assert!(matches!(kernel_smooth_params(&x, None, 0.98, 1, 0), Err(Error::SingularCovariance(_))));
    }

    #[test]
    fn collinear_falls_back_to_diagonal() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        let y = kernel_smooth_params(&x, None, 0.9, 1, 0).unwrap();
        assert_eq!(y.len(), 20);
        assert!(y.iter().all(|r| r.iter().all(|v| v.is_finite())));
    }

    #[test]
    fn fixed_components_untouched() {
        let x: Vec<Vec<f64>> = (0..30).map(|i| vec![0.5, 0.1 + 0.02 * i as f64]).collect();
        let t = [Transform::Fixed, Transform::Logit { lower: 0.0, upper: 1.0 }];
        let y = kernel_smooth_transformed(&x, None, &t, 0.95, 3, 1).unwrap();
        assert!(y.iter().all(|r| r[0] == 0.5 && r[1] > 0.0 && r[1] < 1.0));
    }

    #[test]
    fn moments_roughly_kept() {
        let x = ensemble(20_000);
        let y = kernel_smooth_params(&x, None, 0.9, 2, 0).unwrap();
        let (m0, c0) = moments(&x, None);
        let (m1, c1) = moments(&y, None);
        assert!((m0 - m1).norm() < 0.05);
        assert!((&c0 - c1).norm() / c0.norm() < 0.1);
    }
}
