//! Grey-seal metapopulation example: females in seven age classes across
//! four regions, with the yearly order survival, aging, movement of
//! recruiting five-year-olds, then births to mature (6+) females.
//!
//! Adult survival is driven either by regional pup production in the
//! previous year or by an index of salmon-farming activity. Movement
//! weights destinations by distance and by the density of breeders
//! (ages 5 and 6+) after aging, relative to regional capacity.
//!
//! All shipped series are synthetic.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::covariates::Covariates;
use crate::error::{Error, Result};
use crate::model::{Horizon, InitDist, InitialSpec, ModelConfig, PopulationModel};
use crate::observation::{ErrorFamily, ObservationModel, ObservationSeries, SeriesSpec, VarianceSpec};
use crate::params::{ParamSpec, Prior};
use crate::process::{density_distance_matrix, DensityDistance, ProcessSpec, RateBinding, RealUpdate, Transfer};
use crate::rates::{Coef, DensitySummary, Link, RateModel, Term};
use crate::rng::{stream, Component};
use crate::schema::{Axis, CellFilter, StateSchema};
use crate::sis::{run_filter, FilterConfig, PopulationSsm};
use crate::state::StateMode;

pub const REGIONS: [&str; 4] = ["north_sea", "inner_hebrides", "outer_hebrides", "orkneys"];
pub const AGES: [&str; 7] = ["0", "1", "2", "3", "4", "5", "6+"];
/// n_0 is 1983; pups are observed 1984..=2002.
pub const START_YEAR: i32 = 1983;
pub const YEARS: u32 = 19;

const DISTANCES_CSV: &str = include_str!("../data/seal/distances.csv");
const SALMON_CSV: &str = include_str!("../data/seal/salmon_production.csv");
const STAFF_CSV: &str = include_str!("../data/seal/staff_numbers.csv");
const PUPS_CSV: &str = include_str!("../data/seal/pup_production.csv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SealVariant {
    /// Adult survival falls with last year's regional pup production.
    Density,
    /// Adult survival driven by regional salmon production.
    SalmonProduction,
    /// Adult survival driven by salmon-farm staff numbers.
    StaffNumbers,
}

impl SealVariant {
    pub const ALL: [SealVariant; 3] = [SealVariant::Density, SealVariant::SalmonProduction, SealVariant::StaffNumbers];

    pub fn name(self) -> &'static str {
        match self {
            SealVariant::Density => "density",
            SealVariant::SalmonProduction => "salmon-production",
            SealVariant::StaffNumbers => "staff-numbers",
        }
    }

    /// Covariate stream the variant reads, if any.
    pub fn covariate(self) -> Option<&'static str> {
        match self {
            SealVariant::Density => None,
            SealVariant::SalmonProduction => Some("salmon_production"),
            SealVariant::StaffNumbers => Some("staff_numbers"),
        }
    }
}

impl fmt::Display for SealVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SealVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SealVariant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown seal variant `{s}` (density, salmon-production, staff-numbers)")))
    }
}

/// Distances between regions (in 100 km) and covariate streams.
#[derive(Debug, Clone, PartialEq)]
pub struct SealInputs {
    pub distances: Vec<Vec<f64>>,
    pub covariates: Covariates,
}

impl SealInputs {
    /// The bundled synthetic inputs.
    pub fn shipped() -> Result<SealInputs> {
        let mut covariates = Covariates::from_csv(SALMON_CSV.as_bytes())?;
        covariates = covariates.merged(&Covariates::from_csv(STAFF_CSV.as_bytes())?);
        Ok(SealInputs { distances: distances_from_csv(DISTANCES_CSV.as_bytes())?, covariates })
    }

    pub fn validate(&self) -> Result<()> {
        check_distances(&self.distances)
    }
}

/// Bundled synthetic pup-production series (one per region).
pub fn shipped_pup_data() -> Result<ObservationSeries> {
    ObservationSeries::from_csv(PUPS_CSV.as_bytes())
}

/// Square CSV with a `region` column followed by one column per region.
pub fn distances_from_csv<R: std::io::Read>(reader: R) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().skip(1).map(str::to_string).collect();
    if header != REGIONS {
        return Err(Error::Data(format!("distance columns must be {}", REGIONS.join(", "))));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.get(0) != REGIONS.get(i).copied() {
            return Err(Error::Data(format!("distance row {} must be `{}`", i + 1, REGIONS.get(i).unwrap_or(&"?"))));
        }
        let row = rec
            .iter()
            .skip(1)
            .map(|v| v.parse::<f64>().map_err(|_| Error::Data(format!("bad distance `{v}`"))))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    check_distances(&rows)?;
    Ok(rows)
}

fn check_distances(d: &[Vec<f64>]) -> Result<()> {
    let n = REGIONS.len();
    if d.len() != n || d.iter().any(|r| r.len() != n) {
        return Err(Error::Config(format!("distance matrix must be {n}x{n}")));
    }
    for i in 0..n {
        if d[i][i] != 0.0 {
            return Err(Error::Config("distance matrix needs a zero diagonal".into()));
        }
        for j in 0..n {
            if !(d[i][j] >= 0.0) || d[i][j] != d[j][i] {
                return Err(Error::Config("distance matrix must be symmetric and nonnegative".into()));
            }
        }
    }
    Ok(())
}

/// Parameter values; the model's parameters are named after the fields.
/// `adult_base` and `effect` are on the logit scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SealParams {
    pub pup_survival: f64,
    pub adult_base: f64,
    /// Covariate coefficient, or the slope on pups / capacity.
    pub effect: f64,
    /// Female pups per female aged 6+.
    pub birth_rate: f64,
    pub density_weight: f64,
    pub decay: f64,
    pub fidelity: f64,
    /// Pup capacity per region (density variant).
    pub pup_capacity: [f64; 4],
    /// Breeder capacity per region (movement).
    pub breeder_capacity: [f64; 4],
    /// Female pups per region in 1983, used to set the initial state.
    pub initial_pups: [f64; 4],
}

impl SealParams {
    /// Defaults with a clear survival signal for `variant`.
    pub fn for_variant(variant: SealVariant) -> SealParams {
        let base = SealParams {
            pup_survival: 0.6,
            adult_base: 2.75,
            effect: -0.6,
            birth_rate: 0.45,
            density_weight: 1.0,
            decay: 1.0,
            fidelity: 2.0,
            pup_capacity: [1500.0, 2500.0, 6000.0, 8000.0],
            breeder_capacity: [3500.0, 6000.0, 14000.0, 18000.0],
            initial_pups: [500.0, 900.0, 4000.0, 2500.0],
        };
        match variant {
            SealVariant::Density => SealParams { adult_base: 3.5, effect: -2.0, ..base },
            _ => base,
        }
    }

    fn values(&self) -> [(&'static str, f64); 7] {
        [
            ("pup_survival", self.pup_survival),
            ("adult_base", self.adult_base),
            ("effect", self.effect),
            ("birth_rate", self.birth_rate),
            ("density_weight", self.density_weight),
            ("decay", self.decay),
            ("fidelity", self.fidelity),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pup_survival > 0.0 && self.pup_survival < 1.0) {
            return Err(Error::Domain(format!("pup survival {} outside (0, 1)", self.pup_survival)));
        }
        if !(self.birth_rate >= 0.0) {
            return Err(Error::Domain("birth rate must be nonnegative".into()));
        }
        let caps = self.pup_capacity.iter().chain(&self.breeder_capacity);
        if caps.clone().any(|c| !(*c > 0.0)) || self.initial_pups.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::Domain("capacities must be positive and initial pups nonnegative".into()));
        }
        if [self.adult_base, self.effect, self.density_weight, self.fidelity].iter().any(|v| !v.is_finite())
            || self.decay.is_nan()
        {
            return Err(Error::Domain("seal coefficients must be finite".into()));
        }
        Ok(())
    }
}

/// Priors used when fitting: adult survival intercept and effect are
/// free, everything else sits at the supplied values.
pub fn default_fit_priors(params: &SealParams) -> BTreeMap<String, Prior> {
    let mut p = BTreeMap::new();
    p.insert("adult_base".to_string(), Prior::Normal { mean: 3.0, sd: 0.75 });
    p.insert("effect".to_string(), Prior::Normal { mean: 0.0, sd: 1.5 });
    p.insert("pup_survival".to_string(), Prior::Beta { alpha: 60.0 * params.pup_survival, beta: 60.0 * (1.0 - params.pup_survival) });
    p
}

fn region(r: &str) -> CellFilter {
    CellFilter::on("region", &[r])
}

/// Model configuration with point-mass priors at `params`.
pub fn seal_config(variant: SealVariant, inputs: &SealInputs, params: &SealParams) -> Result<ModelConfig> {
    inputs.validate()?;
    params.validate()?;
    if let Some(name) = variant.covariate() {
        if !inputs.covariates.streams.contains_key(name) {
            return Err(Error::Config(format!("variant `{variant}` needs covariate `{name}`")));
        }
    }
    let schema = StateSchema::new(vec![Axis::new("region", &REGIONS), Axis::new("age", &AGES)])?;
    let adults = CellFilter::on("age", &AGES[1..]);
    let mut rates = BTreeMap::new();
    rates.insert("pup_survival".to_string(), RateModel::Parameter { name: "pup_survival".into() });
    rates.insert("birth_rate".to_string(), RateModel::Parameter { name: "birth_rate".into() });
    let mut survival = vec![RateBinding::on(CellFilter::on("age", &["0"]), "pup_survival")];
    match variant.covariate() {
        Some(cov) => {
            rates.insert(
                "adult_survival".into(),
                RateModel::Logistic { terms: vec![Term::intercept("adult_base"), Term::covariate("effect", cov)] },
            );
            survival.push(RateBinding::on(adults.clone(), "adult_survival"));
        }
        None => {
            for (i, r) in REGIONS.iter().enumerate() {
                let name = format!("adult_survival_{r}");
                rates.insert(
                    name.clone(),
                    RateModel::DensityDependent {
                        link: Link::Logit,
                        base: "adult_base".into(),
                        slope: "effect".into(),
                        capacity: Coef::Value(params.pup_capacity[i]),
                        summary: DensitySummary { stage: 0, cells: CellFilter::on("age", &["0"]), per: Some("region".into()) },
                    },
                );
                survival.push(RateBinding::on(adults.clone().and("region", &[r]), name.as_str()));
            }
        }
    }
    let movement = ProcessSpec::Movement {
        stochastic: true,
        axis: "region".into(),
        cells: CellFilter::on("age", &["5"]),
        transfer: Transfer::DensityDistance(DensityDistance {
            distances: inputs.distances.clone(),
            capacity: params.breeder_capacity.iter().map(|&c| Coef::Value(c)).collect(),
            decay: "decay".into(),
            density_weight: "density_weight".into(),
            fidelity: "fidelity".into(),
            stage: 2,
            density_cells: CellFilter::on("age", &["5", "6+"]),
        }),
    };
    let processes = vec![
        ProcessSpec::survival(survival),
        ProcessSpec::aging("age"),
        movement,
        ProcessSpec::birth(&[("age", "0")], vec![RateBinding::on(CellFilter::on("age", &["6+"]), "birth_rate")]),
    ];
    let observation = ObservationModel {
        series: REGIONS
            .iter()
            .map(|r| SeriesSpec { name: r.to_string(), cells: region(r).and("age", &["0"]), scale: Coef::Value(1.0) })
            .collect(),
        family: ErrorFamily::Normal { variance: VarianceSpec::Data },
    };
    Ok(ModelConfig {
        name: format!("seal-{variant}"),
        mode: StateMode::Integer,
        real_update: RealUpdate::Expectation,
        horizon: Horizon { start_year: START_YEAR, years: YEARS },
        schema,
        params: params
            .values()
            .iter()
            .map(|&(name, value)| ParamSpec { name: name.into(), prior: Prior::PointMass { value } })
            .collect(),
        rates,
        processes,
        initial: initial_state(params),
        observation: Some(observation),
    })
}

/// Poisson initial counts around a stable-age structure scaled to the
/// 1983 pups of each region.
fn initial_state(params: &SealParams) -> Vec<InitialSpec> {
    let s_adult = crate::params::inv_logit(params.adult_base);
    let growth: f64 = 1.05;
    let mut out = Vec::new();
    for (i, r) in REGIONS.iter().enumerate() {
        let pups = params.initial_pups[i];
        for (a, age) in AGES.iter().enumerate() {
            let mean = match a {
                0 => pups,
                6 => pups / params.birth_rate.max(1e-9),
                _ => pups * params.pup_survival * s_adult.powi(a as i32 - 1) / growth.powi(a as i32),
            };
            out.push(InitialSpec { cells: region(r).and("age", &[age]), dist: InitDist::Poisson { mean: Coef::Value(mean.round()) } });
        }
    }
    out
}

pub fn build_seal_model(variant: SealVariant, inputs: &SealInputs, params: &SealParams) -> Result<PopulationModel> {
    PopulationModel::new(seal_config(variant, inputs, params)?)
}

/// Add deliberate killing of seals aged 1+ at the given annual rate per
/// region (fraction removed), applied right after natural survival.
pub fn with_culling(mut config: ModelConfig, rates: &[(String, f64)]) -> Result<ModelConfig> {
    let mut bindings = Vec::new();
    for (r, rate) in rates {
        if !REGIONS.contains(&r.as_str()) {
            return Err(Error::Config(format!("unknown region `{r}`")));
        }
        bindings.push(RateBinding::on(CellFilter::on("age", &AGES[1..]).and("region", &[r]), *rate));
    }
    let at = 1;
    for p in &mut config.processes {
        if let ProcessSpec::Movement { transfer: Transfer::DensityDistance(dd), .. } = p {
            if dd.stage >= at {
                dd.stage += 1;
            }
        }
    }
    for rate in config.rates.values_mut() {
        if let RateModel::DensityDependent { summary, .. } = rate {
            if summary.stage >= at {
                summary.stage += 1;
            }
        }
    }
    config.processes.insert(at, ProcessSpec::Harvest { stochastic: true, rates: bindings });
    Ok(config)
}

/// Row-stochastic 4x4 movement matrix from breeder counts per region.
pub fn movement_matrix(
    counts: &[f64],
    distances: &[Vec<f64>],
    capacity: &[f64],
    decay: f64,
    density_weight: f64,
    fidelity: f64,
) -> Result<Vec<Vec<f64>>> {
    check_distances(distances)?;
    if counts.len() != REGIONS.len() || capacity.len() != REGIONS.len() {
        return Err(Error::Config("need one count and one capacity per region".into()));
    }
    if counts.iter().any(|c| !(*c >= 0.0)) || capacity.iter().any(|c| !(*c > 0.0)) {
        return Err(Error::Domain("counts must be nonnegative and capacities positive".into()));
    }
    if decay.is_nan() || !density_weight.is_finite() || !fidelity.is_finite() {
        return Err(Error::Domain("movement coefficients must be finite".into()));
    }
    Ok(density_distance_matrix(counts, capacity, distances, decay, density_weight, fidelity))
}

/// Simulated truth and pup observations with coefficient of variation `cv`.
#[derive(Debug, Clone)]
pub struct SealSimulation {
    /// States for t = 0..T.
    pub states: Vec<Vec<f64>>,
    pub data: ObservationSeries,
}

pub fn simulate_pups(model: &PopulationModel, covariates: &Covariates, cv: f64, seed: u64) -> Result<SealSimulation> {
    if !(cv >= 0.0) {
        return Err(Error::Config(format!("coefficient of variation {cv} must be nonnegative")));
    }
    let theta = model.sample_theta(&mut stream(seed, Component::Prior, 0, 0));
    let states = model.simulate(&theta, covariates, &mut stream(seed, Component::Simulate, 0, 0))?;
    let om = model.observation().ok_or_else(|| Error::Config("seal model has no observation model".into()))?;
    let names = model.config().observation.as_ref().map(ObservationModel::series_names).unwrap_or_default();
    let mut rng = stream(seed, Component::Observe, 0, 0);
    let mut data = ObservationSeries::new(names);
    for (t, n) in states.iter().enumerate().skip(1) {
        let pups = om.aggregate(n);
        let mut values = Vec::with_capacity(pups.len());
        let mut variances = Vec::with_capacity(pups.len());
        for &p in &pups {
            // floor on the sd keeps empty regions observable
            let sd = cv * p.max(10.0);
            let z: f64 = rng.sample(rand_distr::StandardNormal);
            values.push(Some((p + sd * z).max(0.0).round()));
            variances.push(Some((sd * sd).round()));
        }
        data.push(model.year_of(t as u32), values, variances)?;
    }
    Ok(SealSimulation { states, data })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariantScore {
    pub variant: SealVariant,
    pub log_marginal_likelihood: Option<f64>,
    pub aic_approx: Option<f64>,
    /// Posterior probability with equal prior weights over the variants
    /// that fitted.
    pub posterior_probability: Option<f64>,
    pub failure: Option<String>,
}

/// Variants best first by marginal likelihood; failed fits last.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub ranking: Vec<VariantScore>,
}

impl Comparison {
    pub fn best(&self) -> Option<SealVariant> {
        self.ranking.first().filter(|s| s.failure.is_none()).map(|s| s.variant)
    }
}

/// Fit each variant to the same data and rank them.
pub fn compare_variants(
    data: &ObservationSeries,
    variants: &[SealVariant],
    inputs: &SealInputs,
    params: &SealParams,
    priors: &BTreeMap<String, Prior>,
    config: &FilterConfig,
) -> Result<Comparison> {
    if variants.is_empty() {
        return Err(Error::Config("no variants to compare".into()));
    }
    let mut scores = Vec::new();
    for &v in variants {
        let mut c = seal_config(v, inputs, params)?;
        for (name, prior) in priors {
            c = c.with_prior(name, prior.clone());
        }
        let ssm = PopulationSsm::new(PopulationModel::new(c)?, inputs.covariates.clone(), Some(data))?;
        let score = match run_filter(&[&ssm], &[1.0], config) {
            Ok(fit) => VariantScore {
                variant: v,
                log_marginal_likelihood: Some(fit.log_marginal_likelihood),
                aic_approx: Some(fit.evidence[0].aic_approx),
                posterior_probability: None,
                failure: None,
            },
            Err(e @ (Error::Degeneracy { .. } | Error::Domain(_) | Error::State(_))) => VariantScore {
                variant: v,
                log_marginal_likelihood: None,
                aic_approx: None,
                posterior_probability: None,
                failure: Some(e.to_string()),
            },
            Err(e) => return Err(e),
        };
        scores.push(score);
    }
    let lml: Vec<f64> = scores.iter().map(|s| s.log_marginal_likelihood.unwrap_or(f64::NEG_INFINITY)).collect();
    if lml.iter().any(|v| v.is_finite()) {
        let (post, _) = crate::sis::normalize_log_weights(&lml);
        for (s, p) in scores.iter_mut().zip(post) {
            if s.failure.is_none() {
                s.posterior_probability = Some(p);
            }
        }
    }
    scores.sort_by(|a, b| {
        let key = |s: &VariantScore| s.log_marginal_likelihood.unwrap_or(f64::NEG_INFINITY);
        key(b).total_cmp(&key(a)).then(a.variant.cmp(&b.variant))
    });
    Ok(Comparison { ranking: scores })
}
