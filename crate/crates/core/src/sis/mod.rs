//! Sequential importance sampling over one or more state-space models.
//!
//! Particles carry a model index, a parameter draw and a state. Each year
//! they are propagated through their model, weighted by the observation
//! likelihood and, when the effective sample size drops, resampled and
//! their parameters kernel-smoothed. Per-model marginal likelihoods give
//! posterior model probabilities.
//!
//! Propagation and weighting run on a rayon pool. Every random draw comes
//! from a stream keyed by `(seed, component, year, particle)` and every
//! reduction runs in particle order, so results are identical for any
//! worker count.

mod kernel;
mod population;
mod resample;
mod summary;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use kernel::{kernel_smooth_params, kernel_smooth_transformed, moments};
pub use population::PopulationSsm;
pub use resample::{effective_sample_size, log_sum_exp, normalize_log_weights, resample, ResamplingScheme};
pub use summary::{column_summary, summarize, weighted_quantile, YearSummary};

use crate::error::{Error, Result};
use crate::params::Transform;
use crate::rates::EnvState;
use crate::rng::{stream, Component, StreamRng};

/// Environment variable that overrides the worker count.
pub const WORKERS_ENV: &str = "POPKIT_WORKERS";

/// A state-space model the engine can filter.
pub trait StateSpaceModel: Sync {
    fn name(&self) -> &str;
    /// Number of annual steps T.
    fn steps(&self) -> u32;
    /// Calendar year of step `t` (t = 0 is the initial state).
    fn year(&self, t: u32) -> i32;
    fn cell_labels(&self) -> Vec<String>;
    fn param_names(&self) -> &[String];
    fn transforms(&self) -> &[Transform];
    /// Draw `(theta, n_0)` from the prior.
    fn sample_prior(&self, rng: &mut StreamRng) -> Result<(Vec<f64>, Vec<f64>)>;
    fn propagate(&self, theta: &[f64], state: &[f64], env: &mut EnvState, t: u32, rng: &mut StreamRng) -> Result<Vec<f64>>;
    /// Deterministic look-ahead used by the auxiliary filter.
    fn expected_next(&self, theta: &[f64], state: &[f64], t: u32) -> Result<Vec<f64>>;
    /// Whether step `t` carries any observation.
    fn observed(&self, t: u32) -> bool;
    /// Log observation density at step `t` (0 when nothing is observed).
    fn log_likelihood(&self, theta: &[f64], state: &[f64], t: u32) -> Result<f64>;
    /// Fail early if step `t` cannot be propagated (e.g. missing covariates).
    fn check_step(&self, _t: u32) -> Result<()> {
        Ok(())
    }
    fn free_params(&self) -> usize {
        self.transforms().iter().filter(|t| **t != Transform::Fixed).count()
    }
}

fn half() -> f64 {
    0.5
}

fn default_shrinkage() -> Option<f64> {
    Some(0.98)
}

fn default_particles() -> usize {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    #[serde(default = "default_particles")]
    pub particles: usize,
    #[serde(default)]
    pub resampling: ResamplingScheme,
    /// Resample when ESS < fraction * R. A value of 1 or more resamples
    /// at every observed step (plain bootstrap filter).
    #[serde(default = "half")]
    pub ess_threshold: f64,
    /// Shrinkage `a` for parameter kernel smoothing; `None` disables it.
    #[serde(default = "default_shrinkage")]
    pub kernel_shrinkage: Option<f64>,
    #[serde(default)]
    pub auxiliary: bool,
    #[serde(default)]
    pub seed: u64,
    /// Keep ancestry so smoothed summaries can be traced back from T.
    #[serde(default)]
    pub smoothing: bool,
    /// Worker threads; not part of the result, so never serialized.
    #[serde(default, skip_serializing)]
    pub workers: Option<usize>,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            particles: default_particles(),
            resampling: ResamplingScheme::default(),
            ess_threshold: half(),
            kernel_shrinkage: default_shrinkage(),
            auxiliary: false,
            seed: 0,
            smoothing: false,
            workers: None,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.particles == 0 {
            return Err(Error::Config("particles must be at least 1".into()));
        }
        if !(self.ess_threshold >= 0.0) {
            return Err(Error::Config(format!("ess_threshold {} must be nonnegative", self.ess_threshold)));
        }
        if let Some(a) = self.kernel_shrinkage {
            if !(a > 0.0 && a <= 1.0) {
                return Err(Error::Config(format!("kernel_shrinkage {a} outside (0, 1]")));
            }
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        Ok(())
    }

    /// Worker count: the environment override, then the config, then the
    /// number of available cores.
    pub fn effective_workers(&self) -> Result<usize> {
        if let Ok(v) = std::env::var(WORKERS_ENV) {
            return match v.trim().parse::<usize>() {
                Ok(n) if n > 0 => Ok(n),
                _ => Err(Error::Config(format!("{WORKERS_ENV}=`{v}` is not a positive integer"))),
            };
        }
        Ok(self.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())))
    }
}

#[derive(Debug, Clone)]
pub struct Particle {
    pub model: usize,
    pub theta: Vec<f64>,
    pub state: Vec<f64>,
    pub env: EnvState,
    /// Observation log-likelihood accumulated along the particle's lineage.
    pub log_lik: f64,
}

/// Ancestry kept for smoothing: `states[t]` is the flattened particle set
/// stored at step t, `parents[t][r]` the index at step t-1 it came from.
#[derive(Debug, Clone, Default)]
struct History {
    states: Vec<Vec<f64>>,
    parents: Vec<Vec<usize>>,
}

/// The weighted particle set after the last step.
#[derive(Debug, Clone)]
pub struct Ensemble {
    pub particles: Vec<Particle>,
    pub log_weights: Vec<f64>,
    pub t: u32,
}

impl Ensemble {
    pub fn weights(&self) -> Vec<f64> {
        normalize_log_weights(&self.log_weights).0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub year: i32,
    pub t: u32,
    pub observed: bool,
    pub ess: f64,
    pub log_increment: f64,
    pub unique_ancestors: usize,
    pub resampled: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub model: String,
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEvidence {
    pub model: String,
    pub prior_weight: f64,
    pub log_marginal_likelihood: f64,
    pub posterior_probability: f64,
    /// Largest lineage log-likelihood among the final particles.
    pub max_log_likelihood: f64,
    pub free_params: usize,
    /// Approximate: `-2 * max_log_likelihood + 2 * free_params`. The max is
    /// over surviving particles, not a proper maximization.
    pub aic_approx: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub models: Vec<String>,
    pub cells: Vec<String>,
    pub years: Vec<i32>,
    pub filtered: Vec<YearSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smoothed: Option<Vec<YearSummary>>,
    pub parameters: Vec<ParamSummary>,
    pub diagnostics: Vec<StepDiagnostics>,
    pub log_marginal_likelihood: f64,
    pub evidence: Vec<ModelEvidence>,
    #[serde(skip)]
    pub ensemble: Option<Ensemble>,
}

fn pool(config: &FilterConfig) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(config.effective_workers()?)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

/// Collect per-particle results in index order, reporting the lowest-index
/// failure so errors are as deterministic as values.
fn in_order<T>(results: Vec<Result<T>>) -> Result<Vec<T>> {
    results.into_iter().collect()
}

struct Run<'a> {
    models: &'a [&'a dyn StateSpaceModel],
    config: &'a FilterConfig,
    d: usize,
}

impl Run<'_> {
    fn init(&self, prior_weights: &[f64]) -> Result<Vec<Particle>> {
        let seed = self.config.seed;
        let cum: Vec<f64> = prior_weights
            .iter()
            .scan(0.0, |acc, w| {
                *acc += w;
                Some(*acc)
            })
            .collect();
        let total = *cum.last().expect("at least one model");
        let results: Vec<Result<Particle>> = (0..self.config.particles)
            .into_par_iter()
            .map(|r| {
                let mut rng = stream(seed, Component::Prior, 0, r as u64);
                let u = rng.random::<f64>() * total;
                let model = cum
                    .iter()
                    .position(|&c| u < c)
                    .or_else(|| prior_weights.iter().rposition(|&w| w > 0.0))
                    .expect("some model has positive weight");
                let (theta, state) = self.models[model].sample_prior(&mut rng)?;
                if state.len() != self.d {
                    return Err(Error::Schema(format!("initial state has {} cells, expected {}", state.len(), self.d)));
                }
                Ok(Particle { model, theta, state, env: EnvState::default(), log_lik: 0.0 })
            })
            .collect();
        in_order(results)
    }

    fn propagate(&self, particles: &mut [Particle], t: u32, component: Component) -> Result<Vec<f64>> {
        let seed = self.config.seed;
        let results: Vec<Result<f64>> = particles
            .par_iter_mut()
            .enumerate()
            .map(|(r, p)| {
                let model = self.models[p.model];
                let mut rng = stream(seed, component, t as u64, r as u64);
                p.state = model.propagate(&p.theta, &p.state, &mut p.env, t, &mut rng)?;
                let ll = if component == Component::Propagate && model.observed(t) {
                    model.log_likelihood(&p.theta, &p.state, t)?
                } else {
                    0.0
                };
                if ll.is_nan() {
                    return Err(Error::Domain(format!("observation log-likelihood is NaN in year {}", model.year(t))));
                }
                Ok(ll)
            })
            .collect();
        in_order(results)
    }

    fn kernel(&self, particles: &mut [Particle], t: u32) -> Result<()> {
        let Some(a) = self.config.kernel_shrinkage else { return Ok(()) };
        if a >= 1.0 {
            return Ok(());
        }
        for (m, model) in self.models.iter().enumerate() {
            let idx: Vec<usize> = (0..particles.len()).filter(|&r| particles[r].model == m).collect();
            if idx.len() < 2 {
                continue;
            }
            let thetas: Vec<Vec<f64>> = idx.iter().map(|&r| particles[r].theta.clone()).collect();
            let seed = self.config.seed;
            let smoothed = kernel::smooth_transformed_with(&thetas, None, model.transforms(), a, &|k| {
                stream(seed, Component::Kernel, t as u64, idx[k] as u64)
            });
            match smoothed {
                Ok(s) => {
                    for (k, &r) in idx.iter().enumerate() {
                        particles[r].theta = s[k].clone();
                    }
                }
                // every draw identical: nothing to jitter around
                Err(Error::SingularCovariance(_)) => {}
                Err(e) => return Err(e),
            }
        }
        Ok(())
    }
}

/// Restrict `log_sum_exp` to particles of model `m`.
fn lse_model(particles: &[Particle], values: &[f64], m: usize) -> f64 {
    log_sum_exp(particles.iter().zip(values).filter(|(p, _)| p.model == m).map(|(_, v)| *v))
}

fn unique(ancestors: &[usize]) -> usize {
    // ancestors are sorted
    ancestors.windows(2).filter(|w| w[0] != w[1]).count() + usize::from(!ancestors.is_empty())
}

/// Fit `models` (with prior model weights) by sequential importance
/// sampling. All models must share the cell layout and the year range.
pub fn run_filter(models: &[&dyn StateSpaceModel], prior_weights: &[f64], config: &FilterConfig) -> Result<FitResult> {
    run_filter_with(models, prior_weights, config, &mut |_, _, _| {})
}

/// Observer called with the filtered ensemble and its normalized weights.
pub type Observer<'o> = dyn FnMut(u32, &[Particle], &[f64]) + Send + 'o;

/// [`run_filter`], showing the weighted ensemble to `observer` after the
/// update of every year (t = 0 included) and before any resampling.
pub fn run_filter_with(
    models: &[&dyn StateSpaceModel],
    prior_weights: &[f64],
    config: &FilterConfig,
    observer: &mut Observer<'_>,
) -> Result<FitResult> {
    config.validate()?;
    if models.is_empty() || models.len() != prior_weights.len() {
        return Err(Error::Config("need one prior weight per model".into()));
    }
    if prior_weights.iter().any(|w| !(*w >= 0.0)) || (prior_weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Config("model prior weights must be nonnegative and sum to 1".into()));
    }
    let cells = models[0].cell_labels();
    let steps = models[0].steps();
    for m in &models[1..] {
        if m.cell_labels() != cells || m.steps() != steps || (0..=steps).any(|t| m.year(t) != models[0].year(t)) {
            return Err(Error::Config(format!("model `{}` does not share cells and years with `{}`", m.name(), models[0].name())));
        }
    }
    let pool = pool(config)?;
    pool.install(|| filter_inner(models, prior_weights, config, cells, observer))
}

fn filter_inner(
    models: &[&dyn StateSpaceModel],
    prior_weights: &[f64],
    config: &FilterConfig,
    cells: Vec<String>,
    observer: &mut Observer<'_>,
) -> Result<FitResult> {
    let run = Run { models, config, d: cells.len() };
    let r_total = config.particles;
    let steps = models[0].steps();
    let year = |t: u32| models[0].year(t);
    let nm = models.len();

    let mut particles = run.init(prior_weights)?;
    let mut log_w = vec![0.0; r_total];
    let mut log_ml = vec![0.0; nm];
    let mut total_log_ml = 0.0;
    let mut history = config.smoothing.then(History::default);
    let flatten = |ps: &[Particle]| ps.iter().flat_map(|p| p.state.iter().copied()).collect::<Vec<f64>>();
    if let Some(h) = history.as_mut() {
        h.states.push(flatten(&particles));
        h.parents.push(Vec::new());
    }
    let uniform = vec![1.0 / r_total as f64; r_total];
    let mut filtered = vec![summarize(year(0), 0, run.d, |r| &particles[r].state, &uniform)];
    observer(0, &particles, &uniform);
    let mut diagnostics = Vec::new();

    for t in 1..=steps {
        let observed = models.iter().any(|m| m.observed(t));
        let mut parents: Vec<usize> = (0..r_total).collect();
        let mut resampled = false;
        let mut increment = 0.0;

        let mut done = false;
        if config.auxiliary && observed {
            // first stage: score the expected next state of each particle
            let look: Vec<Result<f64>> = particles
                .par_iter()
                .map(|p| {
                    let m = models[p.model];
                    let mu = m.expected_next(&p.theta, &p.state, t)?;
                    let g = m.log_likelihood(&p.theta, &mu, t)?;
                    Ok(if g.is_nan() { f64::NEG_INFINITY } else { g })
                })
                .collect();
            let g = in_order(look)?;
            let first: Vec<f64> = log_w.iter().zip(&g).map(|(w, g)| w + g).collect();
            if log_sum_exp(first.iter().copied()) > f64::NEG_INFINITY {
                let stage1: Vec<f64> = (0..nm)
                    .map(|m| lse_model(&particles, &first, m) - lse_model(&particles, &log_w, m))
                    .collect();
                let overall1 = log_sum_exp(first.iter().copied()) - log_sum_exp(log_w.iter().copied());
                let (w1, _) = normalize_log_weights(&first);
                let mut rng = stream(config.seed, Component::Resample, t as u64, 0);
                let ancestors = resample(&w1, r_total, config.resampling, &mut rng)?;
                let mut next: Vec<Particle> = ancestors.iter().map(|&a| particles[a].clone()).collect();
                run.kernel(&mut next, t)?;
                let ll = run.propagate(&mut next, t, Component::Propagate)?;
                let second: Vec<f64> = ancestors.iter().zip(&ll).map(|(&a, l)| l - g[a]).collect();
                if log_sum_exp(second.iter().copied()) == f64::NEG_INFINITY {
                    return Err(Error::Degeneracy { year: year(t) });
                }
                for (p, l) in next.iter_mut().zip(&ll) {
                    p.log_lik += l;
                }
                for m in 0..nm {
                    let count = next.iter().filter(|p| p.model == m).count();
                    log_ml[m] += if count == 0 {
                        f64::NEG_INFINITY
                    } else {
                        stage1[m] + lse_model(&next, &second, m) - (count as f64).ln()
                    };
                }
                increment = overall1 + log_sum_exp(second.iter().copied()) - (r_total as f64).ln();
                particles = next;
                log_w = second;
                parents = ancestors;
                resampled = true;
                done = true;
            }
        }

        if !done {
            let ll = run.propagate(&mut particles, t, Component::Propagate)?;
            if observed {
                let updated: Vec<f64> = log_w.iter().zip(&ll).map(|(w, l)| w + l).collect();
                if log_sum_exp(updated.iter().copied()) == f64::NEG_INFINITY {
                    return Err(Error::Degeneracy { year: year(t) });
                }
                for m in 0..nm {
                    log_ml[m] += lse_model(&particles, &updated, m) - lse_model(&particles, &log_w, m);
                }
                increment = log_sum_exp(updated.iter().copied()) - log_sum_exp(log_w.iter().copied());
                for (p, l) in particles.iter_mut().zip(&ll) {
                    p.log_lik += l;
                }
                log_w = updated;
            }
        }
        total_log_ml += increment;

        let (w, _) = normalize_log_weights(&log_w);
        let ess = effective_sample_size(&w);
        filtered.push(summarize(year(t), t, run.d, |r| &particles[r].state, &w));
        observer(t, &particles, &w);

        let trigger = config.ess_threshold >= 1.0 || ess < config.ess_threshold * r_total as f64;
        if !done && observed && t < steps && trigger {
            let mut rng = stream(config.seed, Component::Resample, t as u64, 0);
            let ancestors = resample(&w, r_total, config.resampling, &mut rng)?;
            particles = ancestors.iter().map(|&a| particles[a].clone()).collect();
            run.kernel(&mut particles, t)?;
            log_w = vec![0.0; r_total];
            // stored set at t is post-resampling; its parents are the
            // propagated particles, which share indices with step t-1
            parents = ancestors;
            resampled = true;
        }
        if let Some(h) = history.as_mut() {
            h.states.push(flatten(&particles));
            h.parents.push(parents.clone());
        }
        diagnostics.push(StepDiagnostics {
            year: year(t),
            t,
            observed,
            ess,
            log_increment: increment,
            unique_ancestors: if resampled { unique(&parents) } else { r_total },
            resampled,
        });
    }

    let w = normalize_log_weights(&log_w).0;
    let smoothed = history.map(|h| smooth(&h, &w, run.d, steps, &year));
    let evidence = evidence(models, prior_weights, &particles, &log_ml);
    let parameters = param_summaries(models, &particles, &w);
    Ok(FitResult {
        models: models.iter().map(|m| m.name().to_string()).collect(),
        cells,
        years: (0..=steps).map(year).collect(),
        filtered,
        smoothed,
        parameters,
        diagnostics,
        log_marginal_likelihood: total_log_ml,
        evidence,
        ensemble: Some(Ensemble { particles, log_weights: log_w, t: steps }),
    })
}

fn smooth(h: &History, w: &[f64], d: usize, steps: u32, year: &dyn Fn(u32) -> i32) -> Vec<YearSummary> {
    let r_total = w.len();
    let mut idx: Vec<usize> = (0..r_total).collect();
    let mut out = Vec::with_capacity(steps as usize + 1);
    for t in (0..=steps).rev() {
        let states = &h.states[t as usize];
        out.push(summarize(year(t), t, d, |r| &states[idx[r] * d..(idx[r] + 1) * d], w));
        if t > 0 {
            let parents = &h.parents[t as usize];
            idx.iter_mut().for_each(|i| *i = parents[*i]);
        }
    }
    out.reverse();
    out
}

fn evidence(models: &[&dyn StateSpaceModel], prior: &[f64], particles: &[Particle], log_ml: &[f64]) -> Vec<ModelEvidence> {
    let log_post: Vec<f64> = (0..models.len())
        .map(|m| if prior[m] > 0.0 { prior[m].ln() + log_ml[m] } else { f64::NEG_INFINITY })
        .map(|v| if v.is_nan() { f64::NEG_INFINITY } else { v })
        .collect();
    let (post, norm) = normalize_log_weights(&log_post);
    models
        .iter()
        .enumerate()
        .map(|(m, model)| {
            let max_ll = particles.iter().filter(|p| p.model == m).map(|p| p.log_lik).fold(f64::NEG_INFINITY, f64::max);
            let k = model.free_params();
            ModelEvidence {
                model: model.name().to_string(),
                prior_weight: prior[m],
                log_marginal_likelihood: if prior[m] > 0.0 && !log_ml[m].is_nan() { log_ml[m] } else { f64::NEG_INFINITY },
                posterior_probability: if norm == f64::NEG_INFINITY { f64::NAN } else { post[m] },
                max_log_likelihood: max_ll,
                free_params: k,
                aic_approx: -2.0 * max_ll + 2.0 * k as f64,
            }
        })
        .collect()
}

fn param_summaries(models: &[&dyn StateSpaceModel], particles: &[Particle], w: &[f64]) -> Vec<ParamSummary> {
    let mut out = Vec::new();
    for (m, model) in models.iter().enumerate() {
        let idx: Vec<usize> = (0..particles.len()).filter(|&r| particles[r].model == m).collect();
        let wm: Vec<f64> = idx.iter().map(|&r| w[r]).collect();
        let total: f64 = wm.iter().sum();
        if idx.is_empty() || !(total > 0.0) {
            continue;
        }
        for (j, name) in model.param_names().iter().enumerate() {
            let (mean, lower, upper) = column_summary(idx.iter().map(|&r| particles[r].theta[j]), &wm);
            let var = idx.iter().zip(&wm).map(|(&r, wr)| wr * (particles[r].theta[j] - mean).powi(2)).sum::<f64>() / total;
            out.push(ParamSummary { model: model.name().to_string(), name: name.clone(), mean, sd: var.sqrt(), lower, upper });
        }
    }
    out
}

/// Propagate the posterior ensemble of `fit` to step `until` without
/// reweighting. `models` supply the dynamics (with any scenario
/// covariates); the first summary is the posterior at T itself.
pub fn predict(fit: &FitResult, models: &[&dyn StateSpaceModel], until: u32, seed: u64, workers: Option<usize>) -> Result<Vec<YearSummary>> {
    let ens = fit.ensemble.as_ref().ok_or_else(|| Error::State("fit result carries no ensemble".into()))?;
    if models.len() != fit.models.len() {
        return Err(Error::Config("prediction needs the same models as the fit".into()));
    }
    if until < ens.t {
        return Err(Error::Config(format!("prediction horizon {until} precedes the last fitted step {}", ens.t)));
    }
    for t in ens.t + 1..=until {
        for m in models {
            m.check_step(t)?;
        }
    }
    let config = FilterConfig { particles: ens.particles.len(), seed, workers, kernel_shrinkage: None, ..FilterConfig::default() };
    let d = fit.cells.len();
    let w = ens.weights();
    let year = |t: u32| models[0].year(t);
    let pool = pool(&config)?;
    pool.install(|| {
        let run = Run { models, config: &config, d };
        let mut particles = ens.particles.clone();
        let mut out = vec![summarize(year(ens.t), ens.t, d, |r| &particles[r].state, &w)];
        for t in ens.t + 1..=until {
            run.propagate(&mut particles, t, Component::Predict)?;
            out.push(summarize(year(t), t, d, |r| &particles[r].state, &w));
        }
        Ok(out)
    })
}

#[cfg(test)]
mod tests;
