//! Parameter priors and the transforms used when jittering parameters.

use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Prior {
    PointMass { value: f64 },
    Uniform { lower: f64, upper: f64 },
    Normal { mean: f64, sd: f64 },
    LogNormal { mu: f64, sigma: f64 },
    Beta { alpha: f64, beta: f64 },
    Gamma { shape: f64, scale: f64 },
    InverseGamma { shape: f64, scale: f64 },
}

/// Map between a parameter's support and the real line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Transform {
    Fixed,
    Identity,
    Log,
    Logit { lower: f64, upper: f64 },
}

const EDGE: f64 = 1e-12;

impl Transform {
    pub fn to_unconstrained(self, x: f64) -> f64 {
        match self {
            Transform::Fixed | Transform::Identity => x,
            Transform::Log => x.max(f64::MIN_POSITIVE).ln(),
            Transform::Logit { lower, upper } => {
                let p = ((x - lower) / (upper - lower)).clamp(EDGE, 1.0 - EDGE);
                (p / (1.0 - p)).ln()
            }
        }
    }

    pub fn from_unconstrained(self, z: f64) -> f64 {
        match self {
            Transform::Fixed | Transform::Identity => z,
            Transform::Log => z.exp(),
            Transform::Logit { lower, upper } => lower + (upper - lower) * inv_logit(z),
        }
    }
}

pub fn inv_logit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

impl Prior {
    pub fn validate(&self, name: &str) -> Result<()> {
        let bad = |why: &str| Err(Error::Config(format!("prior for `{name}`: {why}")));
        let pos = |v: f64| v.is_finite() && v > 0.0;
        match *self {
            Prior::PointMass { value } if !value.is_finite() => bad("value must be finite"),
            Prior::Uniform { lower, upper } if !(lower.is_finite() && upper.is_finite() && lower < upper) => {
                bad("need finite lower < upper")
            }
            Prior::Normal { mean, sd } if !(mean.is_finite() && pos(sd)) => bad("need sd > 0"),
            Prior::LogNormal { mu, sigma } if !(mu.is_finite() && pos(sigma)) => bad("need sigma > 0"),
            Prior::Beta { alpha, beta } if !(pos(alpha) && pos(beta)) => bad("need alpha, beta > 0"),
            Prior::Gamma { shape, scale } | Prior::InverseGamma { shape, scale }
                if !(pos(shape) && pos(scale)) =>
            {
                bad("need shape, scale > 0")
            }
            _ => Ok(()),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Prior::PointMass { value } => value,
            Prior::Uniform { lower, upper } => rng.random_range(lower..upper),
            Prior::Normal { mean, sd } => Normal::new(mean, sd).expect("validated").sample(rng),
            Prior::LogNormal { mu, sigma } => LogNormal::new(mu, sigma).expect("validated").sample(rng),
            Prior::Beta { alpha, beta } => Beta::new(alpha, beta).expect("validated").sample(rng),
            Prior::Gamma { shape, scale } => Gamma::new(shape, scale).expect("validated").sample(rng),
            Prior::InverseGamma { shape, scale } => {
                1.0 / Gamma::new(shape, 1.0 / scale).expect("validated").sample(rng)
            }
        }
    }

    pub fn is_fixed(&self) -> bool {
        matches!(self, Prior::PointMass { .. })
    }

    pub fn transform(&self) -> Transform {
        match *self {
            Prior::PointMass { .. } => Transform::Fixed,
            Prior::Normal { .. } => Transform::Identity,
            Prior::LogNormal { .. } | Prior::Gamma { .. } | Prior::InverseGamma { .. } => Transform::Log,
            Prior::Uniform { lower, upper } => Transform::Logit { lower, upper },
            Prior::Beta { .. } => Transform::Logit { lower: 0.0, upper: 1.0 },
        }
    }

    /// Inverse-gamma prior on a variance whose estimate `estimate` is
    /// itself uncertain with `df` degrees of freedom, matched by moments:
    /// mean `estimate`, variance `2 estimate^2 / df`.
    pub fn inverse_gamma_from_estimate(estimate: f64, df: f64) -> Result<Prior> {
        if !(estimate > 0.0 && df > 0.0) {
            return Err(Error::Domain(format!(
                "variance estimate {estimate} with df {df} cannot define a prior"
            )));
        }
        let shape = 2.0 + df / 2.0;
        Ok(Prior::InverseGamma { shape, scale: estimate * (shape - 1.0) })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub prior: Prior,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Component};

    #[test]
    fn transforms_invert() {
        for t in [
            Transform::Identity,
            Transform::Log,
            Transform::Logit { lower: 0.0, upper: 3.0 },
        ] {
            for x in [0.1, 0.5, 1.7, 2.9] {
                let back = t.from_unconstrained(t.to_unconstrained(x));
                assert!((back - x).abs() < 1e-12, "{t:?} {x} {back}");
            }
        }
    }

    #[test]
    fn inverse_gamma_moments() {
        let p = Prior::inverse_gamma_from_estimate(4.0, 10.0).unwrap();
        let Prior::InverseGamma { shape, scale } = p else { panic!() };
        let mean = scale / (shape - 1.0);
        let var = scale * scale / ((shape - 1.0).powi(2) * (shape - 2.0));
        assert!((mean - 4.0).abs() < 1e-12);
        assert!((var - 2.0 * 16.0 / 10.0).abs() < 1e-12);
    }

    #[test]
    fn samples_stay_in_support() {
        let mut rng = stream(1, Component::Prior, 0, 0);
        let priors = [
            Prior::Uniform { lower: 0.2, upper: 0.4 },
            Prior::Beta { alpha: 2.0, beta: 3.0 },
            Prior::Gamma { shape: 2.0, scale: 1.5 },
            Prior::InverseGamma { shape: 3.0, scale: 2.0 },
        ];
        for p in &priors {
            for _ in 0..1000 {
                let x = p.sample(&mut rng);
                let back = p.transform().from_unconstrained(p.transform().to_unconstrained(x));
                assert!((back - x).abs() < 1e-9 * x.abs().max(1.0));
            }
        }
        assert!(Prior::Normal { mean: 0.0, sd: 0.0 }.validate("x").is_err());
        assert!(Prior::Uniform { lower: 1.0, upper: 1.0 }.validate("x").is_err());
    }
}
