use crate::covariates::Covariates;
use crate::error::{Error, Result};
use crate::model::PopulationModel;
use crate::observation::{ObservationSeries, YearObservation};
use crate::params::Transform;
use crate::rates::EnvState;
use crate::rng::StreamRng;
use crate::sis::StateSpaceModel;

/// A population model bound to its covariates and observed series.
#[derive(Debug, Clone)]
pub struct PopulationSsm {
    model: PopulationModel,
    covariates: Covariates,
    /// Indexed by step; entry 0 is never observed.
    obs: Vec<Option<YearObservation>>,
    labels: Vec<String>,
}

impl PopulationSsm {
    pub fn new(model: PopulationModel, covariates: Covariates, data: Option<&ObservationSeries>) -> Result<Self> {
        let steps = model.horizon().years;
        let years: Vec<i32> = (1..=steps).map(|t| model.year_of(t)).collect();
        model.check_covariates(&covariates, &years)?;
        let mut obs = vec![None; steps as usize + 1];
        if let Some(data) = data {
            let om = model
                .config()
                .observation
                .as_ref()
                .ok_or_else(|| Error::Config(format!("model `{}` has no observation model but data were given", model.name())))?;
            let names = om.series_names();
            for s in &data.series {
                if !names.contains(s) {
                    return Err(Error::Data(format!("data series `{s}` is not in the observation model")));
                }
            }
            for &y in &data.years {
                if !years.contains(&y) {
                    return Err(Error::Data(format!(
                        "data year {y} is outside the model horizon {}..={}",
                        model.year_of(1),
                        model.year_of(steps)
                    )));
                }
            }
            for t in 1..=steps {
                let y = data.aligned(model.year_of(t), &names);
                if !y.is_empty() {
                    obs[t as usize] = Some(y);
                }
            }
        }
        let labels = model.schema().cell_labels();
        Ok(PopulationSsm { model, covariates, obs, labels })
    }

    pub fn model(&self) -> &PopulationModel {
        &self.model
    }

    pub fn covariates(&self) -> &Covariates {
        &self.covariates
    }

    pub fn observation_at(&self, t: u32) -> Option<&YearObservation> {
        self.obs.get(t as usize).and_then(Option::as_ref)
    }

    /// Same model and data with covariates replaced or extended.
    pub fn with_scenario(&self, overrides: &Covariates) -> PopulationSsm {
        PopulationSsm { covariates: self.covariates.merged(overrides), ..self.clone() }
    }
}

impl StateSpaceModel for PopulationSsm {
    fn name(&self) -> &str {
        self.model.name()
    }

    fn steps(&self) -> u32 {
        self.model.horizon().years
    }

    fn year(&self, t: u32) -> i32 {
        self.model.year_of(t)
    }

    fn cell_labels(&self) -> Vec<String> {
        self.labels.clone()
    }

    fn param_names(&self) -> &[String] {
        self.model.param_names()
    }

    fn transforms(&self) -> &[Transform] {
        self.model.transforms()
    }

    fn sample_prior(&self, rng: &mut StreamRng) -> Result<(Vec<f64>, Vec<f64>)> {
        let theta = self.model.sample_theta(rng);
        let n0 = self.model.sample_initial(&theta, rng)?;
        Ok((theta, n0.values))
    }

    fn propagate(&self, theta: &[f64], state: &[f64], env: &mut EnvState, t: u32, rng: &mut StreamRng) -> Result<Vec<f64>> {
        let mut stages = self.model.advance(state, theta, t, &self.covariates, env, rng)?;
        Ok(stages.pop().expect("at least one stage"))
    }

    fn expected_next(&self, theta: &[f64], state: &[f64], t: u32) -> Result<Vec<f64>> {
        self.model.expected_next(state, theta, t, &self.covariates)
    }

    fn observed(&self, t: u32) -> bool {
        self.observation_at(t).is_some()
    }

    fn log_likelihood(&self, theta: &[f64], state: &[f64], t: u32) -> Result<f64> {
        match (self.observation_at(t), self.model.observation()) {
            (Some(y), Some(om)) => om.log_likelihood(y, state, theta),
            _ => Ok(0.0),
        }
    }

    fn check_step(&self, t: u32) -> Result<()> {
        self.model.check_covariates(&self.covariates, &[self.model.year_of(t)])
    }
}
