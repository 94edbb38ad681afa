//! Population models: an ordered pipeline of processes applied each year,
//! plus priors on parameters and on the initial state.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::covariates::Covariates;
use crate::error::{Error, Result};
use crate::observation::{CompiledObservation, ObservationModel};
use crate::params::{ParamSpec, Prior, Transform};
use crate::process::{
    apply_structure, density_distance_matrix, structure_matrix, ProcessKind, ProcessSpec, ProcessStructure,
    ProjectionMatrix, RateRef, RealUpdate, ResolvedRates, Transfer,
};
use crate::rates::{Coef, CoefIx, CompiledRate, EnvState, RateContext, RateModel};
use crate::schema::{CellFilter, StateSchema};
use crate::state::{StateMode, StateVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Horizon {
    /// Calendar year of the initial state n_0.
    pub start_year: i32,
    /// Number of annual steps T.
    pub years: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum InitDist {
    Fixed { value: Coef },
    Poisson { mean: Coef },
    UniformInt { lower: u64, upper: u64 },
    /// Rounded and floored at zero in integer mode.
    Normal { mean: Coef, sd: Coef },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialSpec {
    #[serde(default, skip_serializing_if = "CellFilter::is_all")]
    pub cells: CellFilter,
    pub dist: InitDist,
}

/// Declarative model definition as stored in a model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub name: String,
    #[serde(default)]
    pub mode: StateMode,
    #[serde(default)]
    pub real_update: RealUpdate,
    pub horizon: Horizon,
    pub schema: StateSchema,
    #[serde(default)]
    pub params: Vec<ParamSpec>,
    #[serde(default)]
    pub rates: BTreeMap<String, RateModel>,
    pub processes: Vec<ProcessSpec>,
    #[serde(default)]
    pub initial: Vec<InitialSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observation: Option<ObservationModel>,
}

impl ModelConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Replace the prior of an existing parameter, or declare a new one.
    pub fn with_prior(mut self, name: &str, prior: Prior) -> Self {
        match self.params.iter_mut().find(|p| p.name == name) {
            Some(p) => p.prior = prior,
            None => self.params.push(ParamSpec { name: name.to_string(), prior }),
        }
        self
    }

    pub fn with_horizon(mut self, start_year: i32, years: u32) -> Self {
        self.horizon = Horizon { start_year, years };
        self
    }

    pub fn with_initial(mut self, initial: Vec<InitialSpec>) -> Self {
        self.initial = initial;
        self
    }

    pub fn with_observation(mut self, observation: ObservationModel) -> Self {
        self.observation = Some(observation);
        self
    }

    pub fn with_mode(mut self, mode: StateMode) -> Self {
        self.mode = mode;
        self
    }

    /// Mark every process deterministic and switch to real mode, so the
    /// state follows the expectation matrix exactly.
    pub fn deterministic(mut self) -> Self {
        self.mode = StateMode::Real;
        for p in &mut self.processes {
            match p {
                ProcessSpec::Aging { .. } => {}
                ProcessSpec::Survival { stochastic, .. }
                | ProcessSpec::Harvest { stochastic, .. }
                | ProcessSpec::Growth { stochastic, .. }
                | ProcessSpec::Movement { stochastic, .. }
                | ProcessSpec::Birth { stochastic, .. }
                | ProcessSpec::SexAssignment { stochastic, .. } => *stochastic = false,
            }
        }
        self
    }
}

impl InitialSpec {
    pub fn fixed(cells: CellFilter, value: f64) -> Self {
        InitialSpec { cells, dist: InitDist::Fixed { value: Coef::Value(value) } }
    }
}

/// One arrow of a life-cycle graph: individuals in `from` contribute to
/// `to` through `process`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LifeCycleEdge {
    pub from: String,
    pub to: String,
    pub process: &'static str,
    pub stochastic: bool,
}

#[derive(Debug, Clone, Copy)]
enum Slot {
    Value(f64),
    Rate(usize),
}

#[derive(Debug, Clone)]
enum CompiledTransfer {
    Symmetric(Slot),
    Matrix(Vec<Vec<Slot>>),
    DensityDistance {
        distances: Vec<Vec<f64>>,
        capacity: Vec<CoefIx>,
        decay: CoefIx,
        weight: CoefIx,
        fidelity: CoefIx,
        stage: usize,
        mask: Vec<bool>,
    },
}

#[derive(Debug, Clone)]
struct CompiledProcess {
    structure: ProcessStructure,
    slots: Vec<Option<Slot>>,
    transfer: Option<CompiledTransfer>,
}

#[derive(Debug, Clone)]
enum CompiledInit {
    Fixed(CoefIx),
    Poisson(CoefIx),
    UniformInt(u64, u64),
    Normal(CoefIx, CoefIx),
}

/// How rates without a fixed value are handled when resolving.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Resolve {
    /// Draw random effects from the stream.
    Draw,
    /// Random effects are an error.
    Expected,
    /// Random effects sit at their median (`link^-1(mean)`).
    Central,
}

/// A validated, compiled population model.
#[derive(Debug, Clone)]
pub struct PopulationModel {
    config: ModelConfig,
    params: Vec<String>,
    transforms: Vec<Transform>,
    rate_names: Vec<String>,
    rates: Vec<CompiledRate>,
    processes: Vec<CompiledProcess>,
    initial: Vec<(Vec<usize>, CompiledInit)>,
    observation: Option<CompiledObservation>,
    covariates: Vec<String>,
    random_rates: bool,
    density_rates: bool,
}

impl PopulationModel {
    pub fn new(config: ModelConfig) -> Result<Self> {
        let schema = &config.schema;
        schema.validate()?;
        if config.processes.is_empty() {
            return Err(Error::Config(format!("model `{}` has no processes", config.name)));
        }
        let mut params = Vec::new();
        for p in &config.params {
            if params.contains(&p.name) {
                return Err(Error::Config(format!("parameter `{}` declared twice", p.name)));
            }
            p.prior.validate(&p.name)?;
            params.push(p.name.clone());
        }
        let transforms = config.params.iter().map(|p| p.prior.transform()).collect();
        let rate_names: Vec<String> = config.rates.keys().cloned().collect();
        let rates = config
            .rates
            .values()
            .enumerate()
            .map(|(i, r)| r.compile(i, &params, schema))
            .collect::<Result<Vec<_>>>()?;

        let slot = |r: &RateRef| -> Result<Slot> {
            match r {
                RateRef::Value(v) => Ok(Slot::Value(*v)),
                RateRef::Rate(name) => rate_names
                    .iter()
                    .position(|n| n == name)
                    .map(Slot::Rate)
                    .ok_or_else(|| Error::Config(format!("process references unknown rate `{name}`"))),
            }
        };

        let mut processes = Vec::new();
        for (k, spec) in config.processes.iter().enumerate() {
            let structure = ProcessStructure::new(spec, schema)?;
            let bindings = spec.bindings();
            let per_cell = crate::process::binding_per_cell(bindings, schema)?;
            let slots = per_cell
                .iter()
                .map(|b| b.map(|i| slot(&bindings[i].rate)).transpose())
                .collect::<Result<Vec<_>>>()?;
            for b in bindings {
                if let RateRef::Rate(name) = &b.rate {
                    let stage = config.rates[name].density_stage().unwrap_or(0);
                    if stage > k {
                        return Err(Error::Config(format!(
                            "rate `{name}` reads stage {stage} but is used by process {}",
                            k + 1
                        )));
                    }
                }
            }
            let transfer = match spec {
                ProcessSpec::Movement { transfer, .. } => Some(match transfer {
                    Transfer::Symmetric { rate } => CompiledTransfer::Symmetric(slot(rate)?),
                    Transfer::Matrix { rates: m } => CompiledTransfer::Matrix(
                        m.iter().map(|row| row.iter().map(&slot).collect::<Result<Vec<_>>>()).collect::<Result<_>>()?,
                    ),
                    Transfer::DensityDistance(dd) => {
                        if dd.stage > k {
                            return Err(Error::Config(format!(
                                "movement reads stage {} but is process {}",
                                dd.stage,
                                k + 1
                            )));
                        }
                        for (i, row) in dd.distances.iter().enumerate() {
                            for (j, &x) in row.iter().enumerate() {
                                if !(x >= 0.0) || x != dd.distances[j][i] || (i == j && x != 0.0) {
                                    return Err(Error::Config(
                                        "distance matrix must be symmetric, nonnegative, zero on the diagonal".into(),
                                    ));
                                }
                            }
                        }
                        CompiledTransfer::DensityDistance {
                            distances: dd.distances.clone(),
                            capacity: dd.capacity.iter().map(|c| c.compile(&params)).collect::<Result<_>>()?,
                            decay: dd.decay.compile(&params)?,
                            weight: dd.density_weight.compile(&params)?,
                            fidelity: dd.fidelity.compile(&params)?,
                            stage: dd.stage,
                            mask: dd.density_cells.mask(schema)?,
                        }
                    }
                }),
                _ => None,
            };
            processes.push(CompiledProcess { structure, slots, transfer });
        }

        let mut initial = Vec::new();
        for spec in &config.initial {
            let dist = match &spec.dist {
                InitDist::Fixed { value } => CompiledInit::Fixed(value.compile(&params)?),
                InitDist::Poisson { mean } => CompiledInit::Poisson(mean.compile(&params)?),
                InitDist::UniformInt { lower, upper } => {
                    if lower > upper {
                        return Err(Error::Config("initial uniform_int needs lower <= upper".into()));
                    }
                    CompiledInit::UniformInt(*lower, *upper)
                }
                InitDist::Normal { mean, sd } => CompiledInit::Normal(mean.compile(&params)?, sd.compile(&params)?),
            };
            initial.push((spec.cells.cells(schema)?, dist));
        }

        let observation = config.observation.as_ref().map(|o| o.compile(schema, &params)).transpose()?;
        let mut covariates: Vec<String> = config.rates.values().flat_map(|r| r.covariates()).map(str::to_string).collect();
        covariates.sort();
        covariates.dedup();
        let random_rates = config.rates.values().any(RateModel::is_random);
        let density_rates = config.rates.values().any(|r| r.density_stage().is_some())
            || processes.iter().any(|p| matches!(p.transfer, Some(CompiledTransfer::DensityDistance { .. })));
        Ok(PopulationModel {
            config,
            params,
            transforms,
            rate_names,
            rates,
            processes,
            initial,
            observation,
            covariates,
            random_rates,
            density_rates,
        })
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        PopulationModel::new(ModelConfig::from_toml(text)?)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn name(&self) -> &str {
        &self.config.name
    }

    pub fn schema(&self) -> &StateSchema {
        &self.config.schema
    }

    pub fn mode(&self) -> StateMode {
        self.config.mode
    }

    pub fn horizon(&self) -> Horizon {
        self.config.horizon
    }

    pub fn year_of(&self, t: u32) -> i32 {
        self.config.horizon.start_year + t as i32
    }

    pub fn param_names(&self) -> &[String] {
        &self.params
    }

    pub fn rate_names(&self) -> &[String] {
        &self.rate_names
    }

    pub fn transforms(&self) -> &[Transform] {
        &self.transforms
    }

    /// Number of processes K applied each year.
    pub fn process_count(&self) -> usize {
        self.processes.len()
    }

    pub fn observation(&self) -> Option<&CompiledObservation> {
        self.observation.as_ref()
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariates
    }

    pub fn has_random_rates(&self) -> bool {
        self.random_rates
    }

    /// Number of parameters with a non-degenerate prior.
    pub fn free_param_count(&self) -> usize {
        self.config.params.iter().filter(|p| !p.prior.is_fixed()).count()
    }

    pub fn regions(&self) -> Vec<String> {
        match self.schema().axis_index("region") {
            Some(a) => self.schema().axes[a].levels.clone(),
            None => Vec::new(),
        }
    }

    /// Every covariate the model reads must cover every year in `years`.
    pub fn check_covariates(&self, covariates: &Covariates, years: &[i32]) -> Result<()> {
        let regions = self.regions();
        for name in &self.covariates {
            covariates.check_coverage(name, years, &regions)?;
        }
        Ok(())
    }

    pub fn sample_theta<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.config.params.iter().map(|p| p.prior.sample(rng)).collect()
    }

    /// Parameter vector with each prior at a point value (point masses and
    /// the supplied overrides); errors when a free parameter is not given.
    pub fn theta_from(&self, values: &BTreeMap<String, f64>) -> Result<Vec<f64>> {
        self.config
            .params
            .iter()
            .map(|p| match (values.get(&p.name), &p.prior) {
                (Some(v), _) => Ok(*v),
                (None, Prior::PointMass { value }) => Ok(*value),
                (None, _) => Err(Error::Config(format!("no value for parameter `{}`", p.name))),
            })
            .collect()
    }

    pub fn sample_initial<R: Rng + ?Sized>(&self, theta: &[f64], rng: &mut R) -> Result<StateVector> {
        let mut values = vec![0.0; self.schema().len()];
        let integer = self.mode() == StateMode::Integer;
        for (cells, dist) in &self.initial {
            for &c in cells {
                values[c] = match dist {
                    CompiledInit::Fixed(v) => v.get(theta),
                    CompiledInit::Poisson(m) => {
                        let m = m.get(theta);
                        if !(m >= 0.0) {
                            return Err(Error::Config(format!("initial Poisson mean {m} is negative")));
                        }
                        if m == 0.0 {
                            0.0
                        } else {
                            Poisson::new(m).map_err(|e| Error::Config(e.to_string()))?.sample(rng)
                        }
                    }
                    CompiledInit::UniformInt(lo, hi) => rng.random_range(*lo..=*hi) as f64,
                    CompiledInit::Normal(m, s) => {
                        let z: f64 = StandardNormal.sample(rng);
                        let x = (m.get(theta) + s.get(theta) * z).max(0.0);
                        if integer {
                            x.round()
                        } else {
                            x
                        }
                    }
                };
            }
        }
        let sv = StateVector::new(self.schema(), values, self.mode())
            .map_err(|e| Error::Config(format!("initial-state prior: {e}")))?;
        Ok(sv)
    }

    fn context<'a>(&'a self, theta: &'a [f64], t: u32, covariates: &'a Covariates, stages: &'a [Vec<f64>]) -> RateContext<'a> {
        RateContext { theta, year: self.year_of(t), covariates, schema: self.schema(), stages, cell: None }
    }

    fn eval_slot<R: Rng + ?Sized>(
        &self,
        slot: Slot,
        ctx: &RateContext,
        how: Resolve,
        env: &mut EnvState,
        rng: &mut R,
    ) -> Result<f64> {
        match slot {
            Slot::Value(v) => Ok(v),
            Slot::Rate(i) => {
                let rate = &self.rates[i];
                match how {
                    Resolve::Draw => rate.evaluate(ctx, env, rng),
                    Resolve::Expected => rate.expected(ctx),
                    Resolve::Central => rate.central(ctx),
                }
            }
        }
    }

    fn resolve<R: Rng + ?Sized>(
        &self,
        k: usize,
        theta: &[f64],
        t: u32,
        covariates: &Covariates,
        stages: &[Vec<f64>],
        how: Resolve,
        env: &mut EnvState,
        rng: &mut R,
    ) -> Result<ResolvedRates> {
        let p = &self.processes[k];
        let d = self.schema().len();
        let base = self.context(theta, t, covariates, stages);
        let mut rates = ResolvedRates::uniform(p.structure.kind, d, None);
        for (c, slot) in p.slots.iter().enumerate() {
            if let Some(slot) = slot {
                let ctx = RateContext { cell: Some(c), ..base };
                rates.per_cell[c] = self.eval_slot(*slot, &ctx, how, env, rng)?;
            }
        }
        if let Some(transfer) = &p.transfer {
            let axis = p.structure.axis.expect("movement axis");
            let levels = self.schema().axes[axis].levels.len();
            let matrix = match transfer {
                CompiledTransfer::Symmetric(slot) => {
                    let mu = self.eval_slot(*slot, &base, how, env, rng)?;
                    let off = if levels > 1 { mu / (levels - 1) as f64 } else { 0.0 };
                    (0..levels)
                        .map(|i| (0..levels).map(|j| if i == j { if levels > 1 { 1.0 - mu } else { 1.0 } } else { off }).collect())
                        .collect()
                }
                CompiledTransfer::Matrix(m) => m
                    .iter()
                    .map(|row| row.iter().map(|s| self.eval_slot(*s, &base, how, env, rng)).collect::<Result<Vec<_>>>())
                    .collect::<Result<Vec<_>>>()?,
                CompiledTransfer::DensityDistance { distances, capacity, decay, weight, fidelity, stage, mask } => {
                    let state = stages.get(*stage).ok_or_else(|| Error::Config(format!("movement reads unavailable stage {stage}")))?;
                    let mut counts = vec![0.0; levels];
                    for (c, &n) in state.iter().enumerate() {
                        if mask[c] {
                            counts[self.schema().level_of(c, axis)] += n;
                        }
                    }
                    let caps: Vec<f64> = capacity.iter().map(|c| c.get(theta)).collect();
                    if caps.iter().any(|&c| !(c > 0.0)) {
                        return Err(Error::Domain("regional capacities must be positive".into()));
                    }
                    density_distance_matrix(&counts, &caps, distances, decay.get(theta), weight.get(theta), fidelity.get(theta))
                }
            };
            rates.transfer = Some(matrix);
        }
        rates.validate(p.structure.kind, d)?;
        Ok(rates)
    }

    /// Rates of process `k` (0-based) for year step `t`, given the stages
    /// computed so far this year (`stages[0]` = n_{t-1}).
    pub fn resolve_process<R: Rng + ?Sized>(
        &self,
        k: usize,
        theta: &[f64],
        t: u32,
        covariates: &Covariates,
        stages: &[Vec<f64>],
        env: &mut EnvState,
        rng: &mut R,
    ) -> Result<ResolvedRates> {
        self.resolve(k, theta, t, covariates, stages, Resolve::Draw, env, rng)
    }

    /// Rates of process `k` when they depend on nothing but parameters,
    /// year and covariates.
    pub fn fixed_rates(&self, k: usize, theta: &[f64], t: u32, covariates: &Covariates) -> Result<ResolvedRates> {
        if self.density_rates {
            return Err(Error::Unsupported("density-dependent rates vary with the state".into()));
        }
        if self.random_rates {
            return Err(Error::Unsupported("random-effect rates have no fixed value".into()));
        }
        let stages = vec![vec![0.0; self.schema().len()]];
        self.resolve(k, theta, t, covariates, &stages, Resolve::Expected, &mut EnvState::default(), &mut ZeroRng)
    }

    /// Run all K processes on `prev`, returning every stage of the year:
    /// `stages[0] = n_{t-1}`, `stages[k] = u_{k,t}`, `stages[K] = n_t`.
    pub fn advance<R: Rng + ?Sized>(
        &self,
        prev: &[f64],
        theta: &[f64],
        t: u32,
        covariates: &Covariates,
        env: &mut EnvState,
        rng: &mut R,
    ) -> Result<Vec<Vec<f64>>> {
        let mut stages = Vec::with_capacity(self.processes.len() + 1);
        stages.push(prev.to_vec());
        for (k, p) in self.processes.iter().enumerate() {
            let rates = self.resolve(k, theta, t, covariates, &stages, Resolve::Draw, env, rng)?;
            let next = apply_structure(&p.structure, self.schema(), &stages[k], self.mode(), self.config.real_update, &rates, rng)?;
            stages.push(next);
        }
        Ok(stages)
    }

    /// One trajectory `n_0 .. n_T` under `theta`, starting from a draw of
    /// the initial-state prior.
    pub fn simulate<R: Rng + ?Sized>(&self, theta: &[f64], covariates: &Covariates, rng: &mut R) -> Result<Vec<Vec<f64>>> {
        let mut path = vec![self.sample_initial(theta, rng)?.values];
        let mut env = EnvState::default();
        for t in 1..=self.horizon().years {
            let mut stages = self.advance(path.last().expect("n_0"), theta, t, covariates, &mut env, rng)?;
            path.push(stages.pop().expect("stages"));
        }
        Ok(path)
    }

    /// One year of the state equation: apply the K processes in order.
    /// Returns n_t and the intermediate states u_{1,t} .. u_{K-1,t}.
    pub fn compose_annual<R: Rng + ?Sized>(
        &self,
        prev: &StateVector,
        theta: &[f64],
        t: u32,
        covariates: &Covariates,
        env: &mut EnvState,
        rng: &mut R,
    ) -> Result<(StateVector, Vec<StateVector>)> {
        prev.check(self.schema())?;
        let mut stages = self.advance(&prev.values, theta, t, covariates, env, rng)?;
        let last = stages.pop().expect("at least one process");
        let mode = prev.mode;
        let intermediates = stages
            .into_iter()
            .enumerate()
            .skip(1)
            .map(|(k, values)| StateVector { values, mode, t, stage: k })
            .collect();
        Ok((StateVector { values: last, mode, t, stage: 0 }, intermediates))
    }

    fn process_matrices(
        &self,
        theta: &[f64],
        t: u32,
        covariates: &Covariates,
        state: Option<&[f64]>,
        how: Resolve,
    ) -> Result<(Vec<ProjectionMatrix>, Vec<Vec<f64>>)> {
        let d = self.schema().len();
        if state.is_none() && self.density_rates {
            return Err(Error::Unsupported(
                "density-dependent rates need a state to hold them at".into(),
            ));
        }
        let mut stages = vec![state.map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; d])];
        let mut mats = Vec::with_capacity(self.processes.len());
        let mut env = EnvState::default();
        for (k, p) in self.processes.iter().enumerate() {
            let rates = self.resolve(k, theta, t, covariates, &stages, how, &mut env, &mut ZeroRng)?;
            let m = ProjectionMatrix {
                matrix: structure_matrix(&p.structure, self.schema(), &rates),
                provenance: vec![p.structure.kind.name().to_string()],
            };
            stages.push(m.apply(&stages[k]));
            mats.push(m);
        }
        Ok((mats, stages))
    }

    /// Expectation matrix of process `k` with density-dependent rates held
    /// at the expected stages reached from `state`.
    pub fn expectation_matrix(
        &self,
        k: usize,
        theta: &[f64],
        t: u32,
        covariates: &Covariates,
        state: Option<&[f64]>,
    ) -> Result<ProjectionMatrix> {
        if k >= self.processes.len() {
            return Err(Error::Config(format!("model has no process {k}")));
        }
        let (mut mats, _) = self.process_matrices(theta, t, covariates, state, Resolve::Expected)?;
        Ok(mats.swap_remove(k))
    }

    /// Ordered product P_t = P_{K,t} ... P_{1,t}.
    pub fn leslie_product(
        &self,
        theta: &[f64],
        t: u32,
        covariates: &Covariates,
        state_for_density: Option<&[f64]>,
    ) -> Result<ProjectionMatrix> {
        let (mats, _) = self.process_matrices(theta, t, covariates, state_for_density, Resolve::Expected)?;
        let d = self.schema().len();
        Ok(mats.iter().fold(ProjectionMatrix::identity(d), |acc, m| m.after(&acc)))
    }

    /// Deterministic look-ahead: the state reached by replacing every draw
    /// with its expectation (random effects at their median).
    pub fn expected_next(&self, prev: &[f64], theta: &[f64], t: u32, covariates: &Covariates) -> Result<Vec<f64>> {
        let (_, mut stages) = self.process_matrices(theta, t, covariates, Some(prev), Resolve::Central)?;
        Ok(stages.pop().expect("stages"))
    }

    /// Arrows of the life-cycle graph implied by the process list, in
    /// process order.
    pub fn life_cycle_edges(&self) -> Vec<LifeCycleEdge> {
        let schema = self.schema();
        let mut edges = Vec::new();
        let mut push = |from: usize, to: usize, p: &CompiledProcess| {
            let e = LifeCycleEdge {
                from: schema.cell_label(from),
                to: schema.cell_label(to),
                process: p.structure.kind.name(),
                stochastic: p.structure.stochastic,
            };
            if !edges.contains(&e) {
                edges.push(e);
            }
        };
        for p in &self.processes {
            let s = &p.structure;
            for c in 0..schema.len() {
                if !s.active[c] {
                    continue;
                }
                match s.kind {
                    ProcessKind::Survival | ProcessKind::Harvest => push(c, c, p),
                    ProcessKind::Movement => {
                        let a = s.axis.expect("movement axis");
                        for l in 0..schema.axes[a].levels.len() {
                            push(c, schema.with_level(c, a, l), p);
                        }
                    }
                    _ => push(c, s.dest[c], p),
                }
            }
        }
        edges
    }

    pub fn kind_of(&self, k: usize) -> ProcessKind {
        self.processes[k].structure.kind
    }

    pub fn structure(&self, k: usize) -> &ProcessStructure {
        &self.processes[k].structure
    }
}

/// An RNG that always yields zero; used where a code path needs an RNG but
/// no randomness may be consumed.
struct ZeroRng;

impl rand::RngCore for ZeroRng {
    fn next_u32(&mut self) -> u32 {
        0
    }
    fn next_u64(&mut self) -> u64 {
        0
    }
    fn fill_bytes(&mut self, dst: &mut [u8]) {
        dst.fill(0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{two_age, two_region, two_stage};
    use crate::rates::DensitySummary;
    use crate::rng::{stream, Component};

    fn real(config: ModelConfig) -> PopulationModel {
        PopulationModel::new(config.with_mode(StateMode::Real).deterministic()).unwrap()
    }

    #[test]
    fn deterministic_year_matches_product() {
        let m = real(two_age(0.5, 0.8, 1.2));
        let theta = m.theta_from(&BTreeMap::new()).unwrap();
        let prev = StateVector::new(m.schema(), vec![10.0, 20.0], StateMode::Real).unwrap();
        let mut rng = stream(1, Component::Simulate, 0, 0);
        let (next, mid) = m.compose_annual(&prev, &theta, 1, &Covariates::new(), &mut EnvState::default(), &mut rng).unwrap();
        assert!((next.values[0] - (0.6 * 10.0 + 0.96 * 20.0)).abs() < 1e-9);
        assert!((next.values[1] - (0.5 * 10.0 + 0.8 * 20.0)).abs() < 1e-9);
        assert_eq!(mid.len(), 2);
        assert_eq!(mid[0].values, vec![5.0, 16.0]);
        assert_eq!(mid[1].values, vec![0.0, 21.0]);
    }

    #[test]
    fn two_stage_year_applies_product() {
        let m = real(two_stage(0.5, 0.8, 1.2, 0.3));
        let theta = m.theta_from(&BTreeMap::new()).unwrap();
        let prev = StateVector::new(m.schema(), vec![100.0, 50.0], StateMode::Real).unwrap();
        let mut rng = stream(1, Component::Simulate, 0, 0);
        let (next, _) = m.compose_annual(&prev, &theta, 1, &Covariates::new(), &mut EnvState::default(), &mut rng).unwrap();
        assert!((next.values[0] - (53.0 + 48.0)).abs() < 1e-9);
        assert!((next.values[1] - (15.0 + 40.0)).abs() < 1e-9);
    }

    #[test]
    fn extinction_is_absorbing() {
        let m = PopulationModel::new(two_region(0.5, 0.8, 1.2, 0.1)).unwrap();
        let theta = m.theta_from(&BTreeMap::new()).unwrap();
        let zero = StateVector::zeros(m.schema(), StateMode::Integer);
        for i in 0..20 {
            let mut rng = stream(3, Component::Simulate, 1, i);
            let (next, _) = m.compose_annual(&zero, &theta, 1, &Covariates::new(), &mut EnvState::default(), &mut rng).unwrap();
            assert_eq!(next.values, vec![0.0; 4]);
        }
    }

    #[test]
    fn toml_round_trip() {
        let config = two_region(0.5, 0.8, 1.2, 0.1).with_prior("mu", Prior::Beta { alpha: 2.0, beta: 8.0 });
        let text = config.to_toml().unwrap();
        let back = ModelConfig::from_toml(&text).unwrap();
        assert_eq!(back, config);
        assert_eq!(back.to_toml().unwrap(), text);
    }

    #[test]
    fn unknown_rate_is_config_error() {
        let mut config = two_age(0.5, 0.8, 1.2);
        config.rates.remove("lambda");
        assert!(matches!(PopulationModel::new(config), Err(Error::Config(_))));
    }

    fn with_density(stage: usize) -> ModelConfig {
        let mut config = two_age(0.5, 0.8, 1.2);
        config.rates.insert(
            "phi0".into(),
            RateModel::DensityDependent {
                link: crate::rates::Link::Logit,
                base: Coef::Value(1.0),
                slope: Coef::Value(-2.0),
                capacity: Coef::Value(100.0),
                summary: DensitySummary { stage, cells: CellFilter::all(), per: None },
            },
        );
        config
    }

    #[test]
    fn density_stage_must_be_available() {
        assert!(PopulationModel::new(with_density(0)).is_ok());
        assert!(matches!(PopulationModel::new(with_density(1)), Err(Error::Config(_))));
    }

    #[test]
    fn density_needs_state_for_matrix() {
        let m = PopulationModel::new(with_density(0)).unwrap();
        let theta = m.theta_from(&BTreeMap::new()).unwrap();
        let cov = Covariates::new();
        assert!(matches!(m.leslie_product(&theta, 1, &cov, None), Err(Error::Unsupported(_))));
        let p = m.leslie_product(&theta, 1, &cov, Some(&[50.0, 50.0])).unwrap();
        let phi0 = crate::params::inv_logit(1.0 - 2.0);
        assert!((p.matrix[(1, 0)] - phi0).abs() < 1e-12);
    }

    #[test]
    fn initial_priors() {
        let config = two_age(0.5, 0.8, 1.2).with_initial(vec![
            InitialSpec { cells: CellFilter::all(), dist: InitDist::UniformInt { lower: 3, upper: 5 } },
            InitialSpec::fixed(CellFilter::on("age", &["1"]), 7.0),
        ]);
        let m = PopulationModel::new(config).unwrap();
        for i in 0..50 {
            let n = m.sample_initial(&[0.5, 0.8, 1.2], &mut stream(9, Component::Prior, 0, i)).unwrap();
            assert!((3.0..=5.0).contains(&n.values[0]));
            assert_eq!(n.values[1], 7.0);
        }
    }
}
