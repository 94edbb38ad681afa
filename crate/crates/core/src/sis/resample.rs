//! Ancestor selection from normalized weights.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResamplingScheme {
    Multinomial,
    Systematic,
    #[default]
    Residual,
}

impl std::str::FromStr for ResamplingScheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "multinomial" => Ok(ResamplingScheme::Multinomial),
            "systematic" => Ok(ResamplingScheme::Systematic),
            "residual" => Ok(ResamplingScheme::Residual),
            other => Err(Error::Config(format!("unknown resampling scheme `{other}`"))),
        }
    }
}

fn check(weights: &[f64]) -> Result<f64> {
    if weights.is_empty() {
        return Err(Error::Domain("cannot resample an empty weight vector".into()));
    }
    let mut total = 0.0;
    for &w in weights {
        if !(w >= 0.0 && w.is_finite()) {
            return Err(Error::Domain(format!("invalid weight {w}")));
        }
        total += w;
    }
    if !(total > 0.0) {
        return Err(Error::Domain("weights sum to zero".into()));
    }
    Ok(total)
}

/// Walk sorted points in `[0, total)` through the cumulative weights.
fn invert_sorted(weights: &[f64], points: impl Iterator<Item = f64>, out: &mut Vec<usize>) {
    let mut i = 0;
    let mut cum = weights[0];
    let last = weights.len() - 1;
    for u in points {
        while u >= cum && i < last {
            i += 1;
            cum += weights[i];
        }
        out.push(i);
    }
}

fn multinomial<R: Rng + ?Sized>(weights: &[f64], total: f64, n: usize, rng: &mut R, out: &mut Vec<usize>) {
    // sorted uniforms via normalized exponential spacings
    let mut acc = 0.0;
    let mut gaps: Vec<f64> = (0..=n)
        .map(|_| {
            let u: f64 = rng.random();
            -(1.0 - u).ln()
        })
        .collect();
    let sum: f64 = gaps.iter().sum();
    for g in gaps.iter_mut().take(n) {
        acc += *g;
        *g = acc / sum * total;
    }
    invert_sorted(weights, gaps[..n].iter().copied(), out);
}

/// Draw `n` ancestor indices with `E[copies of i] = n * w_i / sum(w)`.
/// Indices come back in ascending order.
pub fn resample<R: Rng + ?Sized>(weights: &[f64], n: usize, scheme: ResamplingScheme, rng: &mut R) -> Result<Vec<usize>> {
    let total = check(weights)?;
    let mut out = Vec::with_capacity(n);
    if n == 0 {
        return Ok(out);
    }
    match scheme {
        ResamplingScheme::Multinomial => multinomial(weights, total, n, rng, &mut out),
        ResamplingScheme::Systematic => {
            let step = total / n as f64;
            let u0: f64 = rng.random::<f64>() * step;
            invert_sorted(weights, (0..n).map(|k| u0 + k as f64 * step), &mut out);
        }
        ResamplingScheme::Residual => {
            let mut residual = Vec::with_capacity(weights.len());
            for (i, &w) in weights.iter().enumerate() {
                let expected = n as f64 * w / total;
                let copies = expected.floor() as usize;
                out.extend(std::iter::repeat_n(i, copies));
                residual.push(expected - copies as f64);
            }
            let left = n - out.len().min(n);
            out.truncate(n);
            if left > 0 {
                let rtotal: f64 = residual.iter().sum();
                if rtotal > 0.0 {
                    let mut extra = Vec::with_capacity(left);
                    multinomial(&residual, rtotal, left, rng, &mut extra);
                    out.extend(extra);
                } else {
                    // rounding left a gap with no residual mass
                    let mut extra = Vec::with_capacity(left);
                    multinomial(weights, total, left, rng, &mut extra);
                    out.extend(extra);
                }
                out.sort_unstable();
            }
        }
    }
    Ok(out)
}

/// Effective sample size `1 / sum(w^2)` of normalized weights.
pub fn effective_sample_size(normalized: &[f64]) -> f64 {
    1.0 / normalized.iter().map(|w| w * w).sum::<f64>()
}

/// Normalize log weights with log-sum-exp. Returns the normalized weights
/// and `log(sum(exp(log_weights)))`; the log sum is `-inf` when every
/// weight is zero, in which case the weights are left uniform.
pub fn normalize_log_weights(log_weights: &[f64]) -> (Vec<f64>, f64) {
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        let n = log_weights.len();
        return (vec![1.0 / n as f64; n], f64::NEG_INFINITY);
    }
    let mut w: Vec<f64> = log_weights.iter().map(|&l| (l - max).exp()).collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    (w, max + s.ln())
}

/// `log(sum(exp(x)))` over a subset.
pub fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Component};
    use proptest::prelude::*;

    const ALL: [ResamplingScheme; 3] =
        [ResamplingScheme::Multinomial, ResamplingScheme::Systematic, ResamplingScheme::Residual];

    #[test]
    fn uniform_systematic_selects_each_once() {
        let mut rng = stream(1, Component::Resample, 0, 0);
        let a = resample(&[0.25; 4], 4, ResamplingScheme::Systematic, &mut rng).unwrap();
        assert_eq!(a, vec![0, 1, 2, 3]);
    }

    #[test]
    fn residual_exact_split() {
        let mut rng = stream(1, Component::Resample, 0, 0);
        let a = resample(&[0.75, 0.25], 4, ResamplingScheme::Residual, &mut rng).unwrap();
        assert_eq!(a, vec![0, 0, 0, 1]);
    }

    #[test]
    fn point_mass_weights() {
        for s in ALL {
            let mut rng = stream(2, Component::Resample, 0, 0);
            let a = resample(&[1.0, 0.0, 0.0, 0.0], 4, s, &mut rng).unwrap();
            assert_eq!(a, vec![0; 4]);
        }
    }

    #[test]
    fn bad_weights() {
        let mut rng = stream(2, Component::Resample, 0, 0);
        assert!(resample(&[0.0, 0.0], 2, ResamplingScheme::Systematic, &mut rng).is_err());
        assert!(resample(&[f64::NAN, 1.0], 2, ResamplingScheme::Systematic, &mut rng).is_err());
        assert!(resample(&[], 2, ResamplingScheme::Systematic, &mut rng).is_err());
    }

    #[test]
    fn log_weight_normalization() {
        let (w, ls) = normalize_log_weights(&[-1000.0, -1000.0 + 2f64.ln()]);
        assert!((w[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((ls - (-1000.0 + 3f64.ln())).abs() < 1e-9);
        let (w, ls) = normalize_log_weights(&[f64::NEG_INFINITY; 3]);
        assert_eq!(ls, f64::NEG_INFINITY);
        assert_eq!(w, vec![1.0 / 3.0; 3]);
        assert_eq!(effective_sample_size(&[0.25; 4]), 4.0);
    }

    proptest! {
        #[test]
        fn counts_and_support(ws in prop::collection::vec(0.0f64..1.0, 1..12), n in 1usize..50, seed in 0u64..1000) {
            prop_assume!(ws.iter().sum::<f64>() > 1e-6);
            for s in ALL {
                let mut rng = stream(seed, Component::Resample, 0, 0);
                let a = resample(&ws, n, s, &mut rng).unwrap();
                prop_assert_eq!(a.len(), n);
                prop_assert!(a.windows(2).all(|p| p[0] <= p[1]));
                prop_assert!(a.iter().all(|&i| ws[i] > 0.0));
            }
        }

        #[test]
        fn normalized_weights_sum_to_one(ls in prop::collection::vec(-800.0f64..800.0, 1..40)) {
            let (w, _) = normalize_log_weights(&ls);
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let ess = effective_sample_size(&w);
            prop_assert!(ess >= 1.0 - 1e-12 && ess <= ls.len() as f64 + 1e-9);
        }
    }
}
