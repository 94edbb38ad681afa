//! Vital-rate models: constants, parameters, covariate links, density
//! dependence and random effects.
//!
//! A [`RateModel`] is the declarative form read from a model file. Models
//! are compiled against the parameter list and schema into a
//! [`CompiledRate`] so the per-particle hot path does no name lookups.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::covariates::Covariates;
use crate::error::{Error, Result};
use crate::params::inv_logit;
use crate::schema::{CellFilter, StateSchema};

/// A coefficient: either a literal number or the name of a model parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Coef {
    Value(f64),
    Param(String),
}

impl Coef {
    pub fn param(name: &str) -> Self {
        Coef::Param(name.to_string())
    }

    pub(crate) fn compile(&self, params: &[String]) -> Result<CoefIx> {
        match self {
            Coef::Value(v) => Ok(CoefIx::Value(*v)),
            Coef::Param(name) => params
                .iter()
                .position(|p| p == name)
                .map(CoefIx::Param)
                .ok_or_else(|| Error::Config(format!("unknown parameter `{name}`"))),
        }
    }
}

impl From<f64> for Coef {
    fn from(v: f64) -> Self {
        Coef::Value(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum CoefIx {
    Value(f64),
    Param(usize),
}

impl CoefIx {
    #[inline]
    pub(crate) fn get(self, theta: &[f64]) -> f64 {
        match self {
            CoefIx::Value(v) => v,
            CoefIx::Param(i) => theta[i],
        }
    }

    fn param(self) -> Option<usize> {
        match self {
            CoefIx::Param(i) => Some(i),
            CoefIx::Value(_) => None,
        }
    }
}

/// One linear-predictor term: `coef * covariate`, or `coef` alone when no
/// covariate is named (intercept).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coef: Coef,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariate: Option<String>,
}

impl Term {
    pub fn intercept(coef: impl Into<Coef>) -> Self {
        Term { coef: coef.into(), covariate: None }
    }

    pub fn covariate(coef: impl Into<Coef>, name: &str) -> Self {
        Term { coef: coef.into(), covariate: Some(name.to_string()) }
    }
}

impl From<&str> for Coef {
    fn from(s: &str) -> Self {
        Coef::Param(s.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Link {
    Identity,
    #[default]
    Logit,
    Log,
}

impl Link {
    pub fn inverse(self, eta: f64) -> f64 {
        match self {
            Link::Identity => eta,
            Link::Logit => inv_logit(eta),
            Link::Log => eta.exp(),
        }
    }

    /// Derivative of the inverse link at `eta`.
    pub fn inverse_derivative(self, eta: f64) -> f64 {
        match self {
            Link::Identity => 1.0,
            Link::Logit => {
                let p = inv_logit(eta);
                p * (1.0 - p)
            }
            Link::Log => eta.exp(),
        }
    }
}

/// Which counts a density-dependent rate reads.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DensitySummary {
    /// 0 reads the start-of-year state n_{t-1}; k > 0 reads the
    /// intermediate state after the k-th process of the current year.
    #[serde(default)]
    pub stage: usize,
    #[serde(default, skip_serializing_if = "CellFilter::is_all")]
    pub cells: CellFilter,
    /// Restrict the sum to cells sharing the evaluated cell's level on this
    /// axis (e.g. `region` for per-region density).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum RateModel {
    Constant {
        value: f64,
    },
    Parameter {
        name: String,
    },
    /// inverse-logit of a linear predictor.
    Logistic {
        terms: Vec<Term>,
    },
    /// exp of a linear predictor.
    LogLinear {
        terms: Vec<Term>,
    },
    /// `link^-1(mean + e_t)` with `e_t ~ N(0, sd^2)` drawn once per year,
    /// i.i.d. or AR(1) with coefficient `ar1` (stationary marginal sd).
    RandomEffect {
        #[serde(default)]
        link: Link,
        mean: Coef,
        sd: Coef,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ar1: Option<Coef>,
    },
    /// `link^-1(base + slope * count / capacity)`.
    DensityDependent {
        #[serde(default)]
        link: Link,
        base: Coef,
        slope: Coef,
        capacity: Coef,
        #[serde(default)]
        summary: DensitySummary,
    },
}

/// Allowed range of a resolved rate, fixed by the process that uses it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateRange {
    Probability,
    NonNegative,
}

pub fn check_range(value: f64, range: RateRange, what: &str) -> Result<f64> {
    let ok = match range {
        RateRange::Probability => (0.0..=1.0).contains(&value),
        RateRange::NonNegative => value >= 0.0 && value.is_finite(),
    };
    if ok {
        Ok(value)
    } else {
        Err(Error::Domain(format!("{what} = {value} outside {range:?} range")))
    }
}

/// Everything a rate may read when it is resolved for one cell and year.
#[derive(Debug, Clone, Copy)]
pub struct RateContext<'a> {
    pub theta: &'a [f64],
    pub year: i32,
    pub covariates: &'a Covariates,
    pub schema: &'a StateSchema,
    /// `stages[0]` is n_{t-1}; `stages[k]` the state after process k.
    pub stages: &'a [Vec<f64>],
    pub cell: Option<usize>,
}

impl RateContext<'_> {
    fn region(&self) -> Option<&str> {
        let cell = self.cell?;
        let axis = self.schema.axis_index("region")?;
        Some(self.schema.level_name(cell, axis))
    }
}

/// Year-level random-effect draws carried by one simulated trajectory.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EnvState {
    year: Option<i32>,
    current: Vec<Option<f64>>,
    last: Vec<Option<f64>>,
}

impl EnvState {
    fn deviation<R: Rng + ?Sized>(
        &mut self,
        index: usize,
        year: i32,
        sd: f64,
        rho: Option<f64>,
        rng: &mut R,
    ) -> f64 {
        if self.year != Some(year) {
            let consecutive = self.year == Some(year - 1);
            self.last = std::mem::take(&mut self.current);
            if !consecutive {
                self.last.clear();
            }
            self.year = Some(year);
        }
        if self.current.len() <= index {
            self.current.resize(index + 1, None);
        }
        if let Some(d) = self.current[index] {
            return d;
        }
        let eps: f64 = StandardNormal.sample(rng);
        let d = match (self.last.get(index).copied().flatten(), rho) {
            (Some(prev), Some(r)) => r * prev + sd * (1.0 - r * r).sqrt() * eps,
            _ => sd * eps,
        };
        self.current[index] = Some(d);
        d
    }
}

#[derive(Debug, Clone)]
enum Form {
    Constant(f64),
    Param(usize),
    Linear { link: Link, terms: Vec<(CoefIx, Option<String>)> },
    Random { link: Link, mean: CoefIx, sd: CoefIx, ar1: Option<CoefIx> },
    Density { link: Link, base: CoefIx, slope: CoefIx, capacity: CoefIx, stage: usize, mask: Vec<bool>, per: Option<usize> },
}

/// A rate model bound to a parameter list and schema.
#[derive(Debug, Clone)]
pub struct CompiledRate {
    index: usize,
    form: Form,
}

impl RateModel {
    pub fn constant(value: f64) -> Self {
        RateModel::Constant { value }
    }

    pub fn parameter(name: &str) -> Self {
        RateModel::Parameter { name: name.to_string() }
    }

    pub fn compile(&self, index: usize, params: &[String], schema: &StateSchema) -> Result<CompiledRate> {
        let terms = |ts: &[Term]| -> Result<Vec<(CoefIx, Option<String>)>> {
            ts.iter().map(|t| Ok((t.coef.compile(params)?, t.covariate.clone()))).collect()
        };
        let form = match self {
            RateModel::Constant { value } => Form::Constant(*value),
            RateModel::Parameter { name } => match Coef::Param(name.clone()).compile(params)? {
                CoefIx::Param(i) => Form::Param(i),
                CoefIx::Value(_) => unreachable!(),
            },
            RateModel::Logistic { terms: ts } => Form::Linear { link: Link::Logit, terms: terms(ts)? },
            RateModel::LogLinear { terms: ts } => Form::Linear { link: Link::Log, terms: terms(ts)? },
            RateModel::RandomEffect { link, mean, sd, ar1 } => Form::Random {
                link: *link,
                mean: mean.compile(params)?,
                sd: sd.compile(params)?,
                ar1: ar1.as_ref().map(|c| c.compile(params)).transpose()?,
            },
            RateModel::DensityDependent { link, base, slope, capacity, summary } => Form::Density {
                link: *link,
                base: base.compile(params)?,
                slope: slope.compile(params)?,
                capacity: capacity.compile(params)?,
                stage: summary.stage,
                mask: summary.cells.mask(schema)?,
                per: summary.per.as_deref().map(|a| schema.require_axis(a)).transpose()?,
            },
        };
        Ok(CompiledRate { index, form })
    }

    /// Covariate names referenced by this rate.
    pub fn covariates(&self) -> Vec<&str> {
        match self {
            RateModel::Logistic { terms } | RateModel::LogLinear { terms } => {
                terms.iter().filter_map(|t| t.covariate.as_deref()).collect()
            }
            _ => Vec::new(),
        }
    }

    pub fn density_stage(&self) -> Option<usize> {
        match self {
            RateModel::DensityDependent { summary, .. } => Some(summary.stage),
            _ => None,
        }
    }

    pub fn is_random(&self) -> bool {
        matches!(self, RateModel::RandomEffect { .. })
    }
}

impl CompiledRate {
    fn density_count(&self, stage: usize, mask: &[bool], per: Option<usize>, ctx: &RateContext) -> Result<f64> {
        let state = ctx.stages.get(stage).ok_or_else(|| {
            Error::Config(format!("density summary reads stage {stage}, which is not available yet"))
        })?;
        let level = match per {
            Some(axis) => {
                let cell = ctx.cell.ok_or_else(|| {
                    Error::Config("per-level density summary needs a cell context".into())
                })?;
                Some((axis, ctx.schema.level_of(cell, axis)))
            }
            None => None,
        };
        Ok(state
            .iter()
            .enumerate()
            .filter(|&(c, _)| mask[c] && level.is_none_or(|(a, l)| ctx.schema.level_of(c, a) == l))
            .map(|(_, v)| v)
            .sum())
    }

    fn linear_predictor(terms: &[(CoefIx, Option<String>)], ctx: &RateContext) -> Result<f64> {
        let mut eta = 0.0;
        for (coef, cov) in terms {
            let x = match cov {
                Some(name) => ctx.covariates.get(name, ctx.year, ctx.region())?,
                None => 1.0,
            };
            eta += coef.get(ctx.theta) * x;
        }
        Ok(eta)
    }

    /// Resolve the rate, drawing a year-level random effect if needed.
    pub fn evaluate<R: Rng + ?Sized>(&self, ctx: &RateContext, env: &mut EnvState, rng: &mut R) -> Result<f64> {
        match &self.form {
            Form::Random { link, mean, sd, ar1 } => {
                let sd = sd.get(ctx.theta);
                if !(sd >= 0.0) {
                    return Err(Error::Domain(format!("random-effect sd {sd} is negative")));
                }
                let rho = ar1.map(|c| c.get(ctx.theta));
                if let Some(r) = rho {
                    if !(-1.0..=1.0).contains(&r) {
                        return Err(Error::Domain(format!("AR(1) coefficient {r} outside [-1, 1]")));
                    }
                }
                let dev = env.deviation(self.index, ctx.year, sd, rho, rng);
                Ok(link.inverse(mean.get(ctx.theta) + dev))
            }
            _ => self.expected(ctx),
        }
    }

    /// Resolve a rate that has no random component.
    pub fn expected(&self, ctx: &RateContext) -> Result<f64> {
        match &self.form {
            Form::Constant(v) => Ok(*v),
            Form::Param(i) => Ok(ctx.theta[*i]),
            Form::Linear { link, terms } => Ok(link.inverse(Self::linear_predictor(terms, ctx)?)),
            Form::Density { link, base, slope, capacity, stage, mask, per } => {
                let cap = capacity.get(ctx.theta);
                if !(cap > 0.0) {
                    return Err(Error::Domain(format!("carrying capacity {cap} must be positive")));
                }
                let count = self.density_count(*stage, mask, *per, ctx)?;
                Ok(link.inverse(base.get(ctx.theta) + slope.get(ctx.theta) * count / cap))
            }
            Form::Random { .. } => Err(Error::Unsupported(
                "random-effect rates have no fixed value; they need a random stream".into(),
            )),
        }
    }

    /// Like [`expected`](Self::expected), but random effects sit at their
    /// median `link^-1(mean)` instead of erroring.
    pub fn central(&self, ctx: &RateContext) -> Result<f64> {
        match &self.form {
            Form::Random { link, mean, .. } => Ok(link.inverse(mean.get(ctx.theta))),
            _ => self.expected(ctx),
        }
    }

    /// Gradient of the rate with respect to every model parameter.
    pub fn gradient(&self, ctx: &RateContext) -> Result<Vec<f64>> {
        let mut g = vec![0.0; ctx.theta.len()];
        match &self.form {
            Form::Constant(_) => {}
            Form::Param(i) => g[*i] = 1.0,
            Form::Linear { link, terms } => {
                let eta = Self::linear_predictor(terms, ctx)?;
                let d = link.inverse_derivative(eta);
                for (coef, cov) in terms {
                    if let Some(i) = coef.param() {
                        let x = match cov {
                            Some(name) => ctx.covariates.get(name, ctx.year, ctx.region())?,
                            None => 1.0,
                        };
                        g[i] += d * x;
                    }
                }
            }
            Form::Density { link, base, slope, capacity, stage, mask, per } => {
                let cap = capacity.get(ctx.theta);
                let count = self.density_count(*stage, mask, *per, ctx)?;
                let b = slope.get(ctx.theta);
                let d = link.inverse_derivative(base.get(ctx.theta) + b * count / cap);
                if let Some(i) = base.param() {
                    g[i] += d;
                }
                if let Some(i) = slope.param() {
                    g[i] += d * count / cap;
                }
                if let Some(i) = capacity.param() {
                    g[i] -= d * b * count / (cap * cap);
                }
            }
            Form::Random { .. } => {
                return Err(Error::Unsupported("random-effect draws are not differentiable".into()))
            }
        }
        Ok(g)
    }
}

/// Resolve one rate model directly from its declarative form.
pub fn resolve_rate<R: Rng + ?Sized>(
    rate: &RateModel,
    params: &[String],
    ctx: &RateContext,
    env: &mut EnvState,
    rng: &mut R,
) -> Result<f64> {
    rate.compile(0, params, ctx.schema)?.evaluate(ctx, env, rng)
}

/// Gradient of a rate with respect to the parameters named in `params`.
pub fn rate_jacobian(rate: &RateModel, params: &[String], ctx: &RateContext) -> Result<Vec<f64>> {
    rate.compile(0, params, ctx.schema)?.gradient(ctx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Component};
    use crate::schema::Axis;
    use proptest::prelude::*;

    fn schema() -> StateSchema {
        StateSchema::new(vec![Axis::new("region", &["a", "b"]), Axis::new("age", &["0", "1"])]).unwrap()
    }

    fn eval(rate: &RateModel, params: &[&str], theta: &[f64], cov: &Covariates, stages: &[Vec<f64>], cell: Option<usize>) -> Result<f64> {
        let s = schema();
        let names: Vec<String> = params.iter().map(|p| p.to_string()).collect();
        let ctx = RateContext { theta, year: 2000, covariates: cov, schema: &s, stages, cell };
        let mut rng = stream(0, Component::Propagate, 0, 0);
        resolve_rate(rate, &names, &ctx, &mut EnvState::default(), &mut rng)
    }

    #[test]
    fn constant_and_intercept_only_logistic() {
        let cov = Covariates::new();
        assert_eq!(eval(&RateModel::constant(0.8), &[], &[], &cov, &[], None).unwrap(), 0.8);
        let zero = RateModel::Logistic { terms: vec![Term::intercept(0.0)] };
        assert_eq!(eval(&zero, &[], &[], &cov, &[], None).unwrap(), 0.5);
    }

    #[test]
    fn logistic_with_covariate() {
        let mut cov = Covariates::new();
        cov.insert("x", 2000, None, 2.0);
        let rate = RateModel::Logistic {
            terms: vec![Term::intercept("b0"), Term::covariate("b1", "x")],
        };
        let p = eval(&rate, &["b0", "b1"], &[1.0, -0.5], &cov, &[], None).unwrap();
        assert!((p - 0.5).abs() < 1e-15);
        let missing = RateModel::Logistic { terms: vec![Term::covariate(1.0, "y")] };
        assert!(matches!(eval(&missing, &[], &[], &cov, &[], None), Err(Error::Data(_))));
    }

    #[test]
    fn regional_covariate_uses_cell_region() {
        let mut cov = Covariates::new();
        cov.insert("x", 2000, Some("a"), 0.0);
        cov.insert("x", 2000, Some("b"), 10.0);
        let rate = RateModel::LogLinear { terms: vec![Term::covariate(0.1, "x")] };
        assert_eq!(eval(&rate, &[], &[], &cov, &[], Some(1)).unwrap(), 1.0);
        assert!((eval(&rate, &[], &[], &cov, &[], Some(2)).unwrap() - 1f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn density_dependent_per_region() {
        let cov = Covariates::new();
        let rate = RateModel::DensityDependent {
            link: Link::Logit,
            base: Coef::Value(0.0),
            slope: Coef::Value(-1.0),
            capacity: Coef::Value(10.0),
            summary: DensitySummary { stage: 0, cells: CellFilter::on("age", &["0"]), per: Some("region".into()) },
        };
        let stages = vec![vec![10.0, 99.0, 0.0, 99.0]];
        let a = eval(&rate, &[], &[], &cov, &stages, Some(1)).unwrap();
        let b = eval(&rate, &[], &[], &cov, &stages, Some(3)).unwrap();
        assert!((a - inv_logit(-1.0)).abs() < 1e-15);
        assert!((b - 0.5).abs() < 1e-15);
        assert!(eval(&rate, &[], &[], &cov, &[], Some(1)).is_err());
    }

    #[test]
    fn analytic_gradients() {
        let s = schema();
        let cov = Covariates::new();
        let params = vec!["b0".to_string()];
        let ctx = RateContext { theta: &[0.0], year: 2000, covariates: &cov, schema: &s, stages: &[], cell: None };
        let c = rate_jacobian(&RateModel::constant(0.3), &params, &ctx).unwrap();
        assert_eq!(c, vec![0.0]);
        let l = rate_jacobian(&RateModel::Logistic { terms: vec![Term::intercept("b0")] }, &params, &ctx).unwrap();
        assert!((l[0] - 0.25).abs() < 1e-15);
        let e = rate_jacobian(&RateModel::LogLinear { terms: vec![Term::intercept("b0")] }, &params, &ctx).unwrap();
        assert!((e[0] - 1.0).abs() < 1e-15);
        let re = RateModel::RandomEffect { link: Link::Logit, mean: "b0".into(), sd: 0.1.into(), ar1: None };
        assert!(matches!(rate_jacobian(&re, &params, &ctx), Err(Error::Unsupported(_))));
    }

    #[test]
    fn random_effect_shares_draw_within_year() {
        let s = schema();
        let cov = Covariates::new();
        let re = RateModel::RandomEffect { link: Link::Log, mean: 0.0.into(), sd: 1.0.into(), ar1: Some(0.9.into()) };
        let c = re.compile(0, &[], &s).unwrap();
        let mut env = EnvState::default();
        let mut rng = stream(3, Component::Propagate, 0, 0);
        let ctx = |year| RateContext { theta: &[], year, covariates: &cov, schema: &s, stages: &[], cell: None };
        let a = c.evaluate(&ctx(1), &mut env, &mut rng).unwrap();
        let b = c.evaluate(&ctx(1), &mut env, &mut rng).unwrap();
        let d = c.evaluate(&ctx(2), &mut env, &mut rng).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, d);
    }

    #[test]
    fn random_effect_with_vanishing_sd_matches_constant() {
        let s = schema();
        let cov = Covariates::new();
        let re = RateModel::RandomEffect { link: Link::Logit, mean: 0.4.into(), sd: 1e-9.into(), ar1: None };
        let c = re.compile(0, &[], &s).unwrap();
        let mut rng = stream(4, Component::Propagate, 0, 0);
        let mut sum = 0.0;
        for y in 0..1000 {
            let ctx = RateContext { theta: &[], year: y, covariates: &cov, schema: &s, stages: &[], cell: None };
            sum += c.evaluate(&ctx, &mut EnvState::default(), &mut rng).unwrap();
        }
        assert!((sum / 1000.0 - inv_logit(0.4)).abs() < 1e-8);
    }

    fn fd_check(rate: &RateModel, names: &[String], theta: &[f64], stages: &[Vec<f64>], cov: &Covariates) {
        let s = schema();
        let ctx = RateContext { theta, year: 2000, covariates: cov, schema: &s, stages, cell: Some(1) };
        let g = rate_jacobian(rate, names, &ctx).unwrap();
        let h = 1e-6;
        for i in 0..theta.len() {
            let mut up = theta.to_vec();
            let mut dn = theta.to_vec();
            up[i] += h;
            dn[i] -= h;
            let f = |t: &[f64]| {
                let c = RateContext { theta: t, ..ctx };
                rate.compile(0, names, &s).unwrap().expected(&c).unwrap()
            };
            let fd = (f(&up) - f(&dn)) / (2.0 * h);
            let scale = fd.abs().max(g[i].abs()).max(1e-3);
            assert!((fd - g[i]).abs() / scale < 1e-4, "param {i}: fd {fd} analytic {}", g[i]);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn jacobian_matches_central_differences(
            b0 in -3.0..3.0f64, b1 in -2.0..2.0f64, x in -2.0..2.0f64,
            cap in 5.0..50.0f64, n0 in 0.0..40.0f64,
        ) {
            let mut cov = Covariates::new();
            cov.insert("x", 2000, None, x);
            let names: Vec<String> = ["b0", "b1", "cap"].iter().map(|s| s.to_string()).collect();
            let theta = [b0, b1, cap];
            let logistic = RateModel::Logistic { terms: vec![Term::intercept("b0"), Term::covariate("b1", "x")] };
            let loglin = RateModel::LogLinear { terms: vec![Term::intercept("b0"), Term::covariate("b1", "x")] };
            let dens = RateModel::DensityDependent {
                link: Link::Logit, base: "b0".into(), slope: "b1".into(), capacity: "cap".into(),
                summary: DensitySummary { stage: 0, cells: CellFilter::all(), per: Some("region".into()) },
            };
            let stages = vec![vec![n0, 3.0, 7.0, 1.0]];
            fd_check(&logistic, &names, &theta, &stages, &cov);
            fd_check(&loglin, &names, &theta, &stages, &cov);
            fd_check(&dens, &names, &theta, &stages, &cov);
        }

        #[test]
        fn logistic_rates_are_probabilities(b0 in -30.0..30.0f64, b1 in -30.0..30.0f64, x in -5.0..5.0f64) {
            let mut cov = Covariates::new();
            cov.insert("x", 2000, None, x);
            let rate = RateModel::Logistic { terms: vec![Term::intercept("b0"), Term::covariate("b1", "x")] };
            let p = eval(&rate, &["b0", "b1"], &[b0, b1], &cov, &[], None).unwrap();
            prop_assert!(check_range(p, RateRange::Probability, "p").is_ok());
            let ll = RateModel::LogLinear { terms: vec![Term::intercept("b0")] };
            let l = eval(&ll, &["b0", "b1"], &[b0, b1], &cov, &[], None).unwrap();
            prop_assert!(l > 0.0);
        }
    }
}
