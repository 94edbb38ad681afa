//! Run manifests, output documents and plot-ready CSV.
//!
//! A manifest names the command, the model files, data, covariates, the
//! engine settings and the seed. Every output document embeds the tool
//! version, the seed, the resolved manifest and the model configurations,
//! so a run can be repeated from its own output.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::covariates::Covariates;
use crate::error::{Error, Result};
use crate::model::{ModelConfig, PopulationModel};
use crate::observation::ObservationSeries;
use crate::oracle::enumerate_filter;
use crate::rng::{stream, Component};
use crate::sis::{predict, run_filter, FilterConfig, FitResult, PopulationSsm, StateSpaceModel, YearSummary};

pub const TOOL: &str = "popkit";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Simulate,
    #[default]
    Fit,
    Smooth,
    Predict,
    Compare,
    Oracle,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Fit => "fit",
            Command::Smooth => "smooth",
            Command::Predict => "predict",
            Command::Compare => "compare",
            Command::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSettings {
    /// Per-observation variance given to series whose error variance is
    /// read from the data.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variance: Option<f64>,
    /// Alternative to `variance`: variance = (cv * expected count)^2.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cv: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictSettings {
    /// Years to project past the last fitted year.
    pub years: u32,
    /// Extra covariate files for the projected years.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scenario: Vec<PathBuf>,
}

fn default_bound() -> u64 {
    30
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSettings {
    /// Largest count enumerated in any cell.
    #[serde(default = "default_bound")]
    pub bound: u64,
    /// Parameter values; missing ones are drawn from the prior.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub theta: BTreeMap<String, f64>,
}

impl Default for OracleSettings {
    fn default() -> Self {
        OracleSettings { bound: default_bound(), theta: BTreeMap::new() }
    }
}

/// Everything one run needs. Relative paths are taken from the manifest's
/// directory when loaded with [`RunManifest::load`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    /// The CLI subcommand replaces this; `popkit run` uses it as is.
    #[serde(default)]
    pub command: Command,
    pub models: Vec<PathBuf>,
    /// Prior model probabilities; equal when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior_weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub covariates: Vec<PathBuf>,
    pub output: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub engine: FilterConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateSettings>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predict: Option<PredictSettings>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleSettings>,
}

impl RunManifest {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("manifest: {e}")))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("manifest: {e}")))
    }

    /// Read a manifest file and resolve its paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read manifest {}: {e}", path.display())))?;
        let mut m = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        m.resolve_paths(base);
        Ok(m)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        self.models.iter_mut().for_each(fix);
        self.covariates.iter_mut().for_each(fix);
        if let Some(d) = self.data.as_mut() {
            fix(d);
        }
        if let Some(p) = self.predict.as_mut() {
            p.scenario.iter_mut().for_each(fix);
        }
        fix(&mut self.output);
    }

    /// Checks that do not need the models: inputs exist, weights fit.
    pub fn validate(&self) -> Result<()> {
        if self.models.is_empty() {
            return Err(Error::Config("manifest lists no models".into()));
        }
        for p in &self.models {
            if !p.is_file() {
                return Err(Error::Config(format!("model file {} does not exist", p.display())));
            }
        }
        let scenario = self.predict.iter().flat_map(|p| &p.scenario);
        for p in self.data.iter().chain(&self.covariates).chain(scenario) {
            if !p.is_file() {
                return Err(Error::Data(format!("input file {} does not exist", p.display())));
            }
        }
        if let Some(w) = &self.prior_weights {
            if w.len() != self.models.len() {
                return Err(Error::Config("prior_weights needs one entry per model".into()));
            }
        }
        let needs_data = matches!(self.command, Command::Fit | Command::Smooth | Command::Predict | Command::Compare);
        if needs_data && self.data.is_none() {
            return Err(Error::Config(format!("`{}` needs a data file", self.command.name())));
        }
        if self.command == Command::Predict && self.predict.is_none() {
            return Err(Error::Config("`predict` needs a [predict] section".into()));
        }
        if matches!(self.command, Command::Simulate | Command::Oracle) && self.models.len() != 1 {
            return Err(Error::Config(format!("`{}` takes exactly one model", self.command.name())));
        }
        self.engine.validate()
    }

    /// Engine settings with the manifest seed applied.
    pub fn engine_config(&self) -> FilterConfig {
        FilterConfig { seed: self.seed, ..self.engine.clone() }
    }
}

/// Header shared by every output document.
#[derive(Debug, Clone, Serialize)]
pub struct OutputDocument<'a, T: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub seed: u64,
    pub manifest: &'a RunManifest,
    pub models: Vec<&'a ModelConfig>,
    pub result: T,
}

impl<'a, T: Serialize> OutputDocument<'a, T> {
    pub fn new(manifest: &'a RunManifest, models: &'a [PopulationModel], result: T) -> Self {
        OutputDocument {
            tool: TOOL,
            version: VERSION,
            command: manifest.command.name(),
            seed: manifest.seed,
            manifest,
            models: models.iter().map(PopulationModel::config).collect(),
            result,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| Error::Config(format!("cannot serialize output: {e}")))?;
        s.push('\n');
        Ok(s)
    }
}

fn csv_bytes(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Long format `year,cell,mean,q2.5,q97.5`.
pub fn summary_csv(summaries: &[YearSummary], cells: &[String]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["year", "cell", "mean", "q2.5", "q97.5"])?;
    for s in summaries {
        for (i, cell) in cells.iter().enumerate() {
            w.write_record([s.year.to_string(), cell.clone(), s.mean[i].to_string(), s.lower[i].to_string(), s.upper[i].to_string()])?;
        }
    }
    csv_bytes(w)
}

pub fn diagnostics_csv(fit: &FitResult) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["year", "observed", "ess", "log_increment", "unique_ancestors", "resampled"])?;
    for d in &fit.diagnostics {
        w.write_record([
            d.year.to_string(),
            d.observed.to_string(),
            d.ess.to_string(),
            d.log_increment.to_string(),
            d.unique_ancestors.to_string(),
            d.resampled.to_string(),
        ])?;
    }
    csv_bytes(w)
}

pub fn parameters_csv(fit: &FitResult) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["model", "parameter", "mean", "sd", "q2.5", "q97.5"])?;
    for p in &fit.parameters {
        w.write_record([p.model.clone(), p.name.clone(), p.mean.to_string(), p.sd.to_string(), p.lower.to_string(), p.upper.to_string()])?;
    }
    csv_bytes(w)
}

pub fn evidence_csv(fit: &FitResult) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["model", "prior_weight", "log_marginal_likelihood", "posterior_probability", "aic_approx"])?;
    for e in &fit.evidence {
        w.write_record([
            e.model.clone(),
            e.prior_weight.to_string(),
            e.log_marginal_likelihood.to_string(),
            e.posterior_probability.to_string(),
            e.aic_approx.to_string(),
        ])?;
    }
    csv_bytes(w)
}

/// Long format `year,cell,value` for a trajectory starting at `start_year`.
pub fn trajectory_csv(states: &[Vec<f64>], cells: &[String], start_year: i32) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["year", "cell", "value"])?;
    for (t, s) in states.iter().enumerate() {
        for (cell, v) in cells.iter().zip(s) {
            w.write_record([(start_year + t as i32).to_string(), cell.clone(), v.to_string()])?;
        }
    }
    csv_bytes(w)
}

/// Files written by one run, in write order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOutput {
    pub files: Vec<PathBuf>,
}

impl RunOutput {
    fn write(&mut self, dir: &Path, name: &str, contents: &str) -> Result<()> {
        let path = dir.join(name);
        fs::write(&path, contents)?;
        self.files.push(path);
        Ok(())
    }
}

fn load_model(path: &Path) -> Result<PopulationModel> {
    let text = fs::read_to_string(path)?;
    PopulationModel::from_toml(&text).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn load_covariates(paths: &[PathBuf]) -> Result<Covariates> {
    let mut cov = Covariates::new();
    for p in paths {
        cov = cov.merged(&Covariates::from_csv(fs::File::open(p)?)?);
    }
    Ok(cov)
}

fn load_data(path: &Path) -> Result<ObservationSeries> {
    ObservationSeries::from_csv(fs::File::open(path)?)
}

#[derive(Debug, Clone, Serialize)]
struct SimulationResult<'a> {
    theta: BTreeMap<&'a str, f64>,
    states: &'a [Vec<f64>],
}

#[derive(Debug, Clone, Serialize)]
struct PredictionResult<'a> {
    fit: &'a FitResult,
    predicted: &'a [YearSummary],
}

#[derive(Debug, Clone, Serialize)]
struct OracleYear {
    year: i32,
    mean: Vec<f64>,
    support: Vec<Vec<u64>>,
    probabilities: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
struct OracleResult<'a> {
    theta: BTreeMap<&'a str, f64>,
    lost_mass: f64,
    log_evidence: f64,
    filtered: Vec<OracleYear>,
}

/// Run the manifest's command and write its outputs.
pub fn execute(manifest: &RunManifest) -> Result<RunOutput> {
    manifest.validate()?;
    let models: Vec<PopulationModel> = manifest.models.iter().map(|p| load_model(p)).collect::<Result<_>>()?;
    let covariates = load_covariates(&manifest.covariates)?;
    let data = manifest.data.as_deref().map(load_data).transpose()?;
    fs::create_dir_all(&manifest.output)?;
    let out_dir = manifest.output.as_path();
    let mut out = RunOutput::default();
    let cells = models[0].schema().cell_labels();
    match manifest.command {
        Command::Simulate => {
            let model = &models[0];
            let settings = manifest.simulate.clone().unwrap_or_default();
            let theta = model.sample_theta(&mut stream(manifest.seed, Component::Prior, 0, 0));
            let states = model.simulate(&theta, &covariates, &mut stream(manifest.seed, Component::Simulate, 0, 0))?;
            out.write(out_dir, "truth.csv", &trajectory_csv(&states, &cells, model.horizon().start_year)?)?;
            if let (Some(om), Some(spec)) = (model.observation(), model.config().observation.as_ref()) {
                let mut rng = stream(manifest.seed, Component::Observe, 0, 0);
                let mut series = ObservationSeries::new(spec.series_names());
                for (t, n) in states.iter().enumerate().skip(1) {
                    let variances: Vec<Option<f64>> = om
                        .aggregate(n)
                        .iter()
                        .map(|a| settings.variance.or(settings.cv.map(|cv| (cv * a).powi(2))))
                        .collect();
                    let y = om.simulate(n, &theta, &variances, &mut rng)?;
                    series.push(model.year_of(t as u32), y.into_iter().map(Some).collect(), variances)?;
                }
                out.write(out_dir, "observations.csv", &series.to_csv()?)?;
            }
            let names = model.param_names().iter().map(String::as_str).zip(theta.iter().copied()).collect();
            let doc = OutputDocument::new(manifest, &models, SimulationResult { theta: names, states: &states });
            out.write(out_dir, "simulation.json", &doc.to_json()?)?;
        }
        Command::Fit | Command::Smooth | Command::Compare | Command::Predict => {
            let ssms: Vec<PopulationSsm> = models
                .iter()
                .map(|m| PopulationSsm::new(m.clone(), covariates.clone(), data.as_ref()))
                .collect::<Result<_>>()?;
            let refs: Vec<&dyn StateSpaceModel> = ssms.iter().map(|s| s as &dyn StateSpaceModel).collect();
            let weights = manifest.prior_weights.clone().unwrap_or_else(|| vec![1.0 / models.len() as f64; models.len()]);
            let mut config = manifest.engine_config();
            if manifest.command == Command::Smooth {
                config.smoothing = true;
            }
            let fit = run_filter(&refs, &weights, &config)?;
            out.write(out_dir, "filtered.csv", &summary_csv(&fit.filtered, &fit.cells)?)?;
            if let Some(s) = &fit.smoothed {
                out.write(out_dir, "smoothed.csv", &summary_csv(s, &fit.cells)?)?;
            }
            out.write(out_dir, "diagnostics.csv", &diagnostics_csv(&fit)?)?;
            out.write(out_dir, "parameters.csv", &parameters_csv(&fit)?)?;
            out.write(out_dir, "models.csv", &evidence_csv(&fit)?)?;
            if manifest.command == Command::Predict {
                let settings = manifest.predict.as_ref().expect("validated");
                let scenario = load_covariates(&settings.scenario)?;
                let future: Vec<PopulationSsm> = ssms.iter().map(|s| s.with_scenario(&scenario)).collect();
                let frefs: Vec<&dyn StateSpaceModel> = future.iter().map(|s| s as &dyn StateSpaceModel).collect();
                let until = models[0].horizon().years + settings.years;
                let pred = predict(&fit, &frefs, until, manifest.seed, config.workers)?;
                out.write(out_dir, "predicted.csv", &summary_csv(&pred, &fit.cells)?)?;
                let doc = OutputDocument::new(manifest, &models, PredictionResult { fit: &fit, predicted: &pred });
                out.write(out_dir, "predict.json", &doc.to_json()?)?;
            } else {
                let doc = OutputDocument::new(manifest, &models, &fit);
                out.write(out_dir, &format!("{}.json", manifest.command.name()), &doc.to_json()?)?;
            }
        }
        Command::Oracle => {
            let model = &models[0];
            let settings = manifest.oracle.clone().unwrap_or_default();
            let mut theta = model.sample_theta(&mut stream(manifest.seed, Component::Prior, 0, 0));
            for (name, v) in &settings.theta {
                let i = model
                    .param_names()
                    .iter()
                    .position(|n| n == name)
                    .ok_or_else(|| Error::Config(format!("oracle theta names unknown parameter `{name}`")))?;
                theta[i] = *v;
            }
            let ssm = PopulationSsm::new(model.clone(), covariates, data.as_ref())?;
            let r = enumerate_filter(&ssm, &theta, settings.bound)?;
            let filtered: Vec<OracleYear> = r
                .filtered
                .iter()
                .enumerate()
                .map(|(t, d)| OracleYear {
                    year: model.year_of(t as u32),
                    mean: d.mean(),
                    support: d.support.clone(),
                    probabilities: d.probabilities.clone(),
                })
                .collect();
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["year", "cell", "mean"])?;
            for s in &filtered {
                for (i, c) in cells.iter().enumerate() {
                    w.write_record([s.year.to_string(), c.clone(), s.mean[i].to_string()])?;
                }
            }
            out.write(out_dir, "oracle.csv", &csv_bytes(w)?)?;
            let names = model.param_names().iter().map(String::as_str).zip(theta.iter().copied()).collect();
            let doc = OutputDocument::new(
                manifest,
                &models,
                OracleResult { theta: names, lost_mass: r.lost_mass, log_evidence: r.log_evidence, filtered },
            );
            out.write(out_dir, "oracle.json", &doc.to_json()?)?;
        }
    }
    Ok(out)
}

/// Advice printed with a degeneracy error.
pub const DEGENERACY_HINT: &str =
    "every particle had zero likelihood; try more particles, wider priors or a larger observation variance";

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trip() {
        let text = r#"
command = "fit"
models = ["a.toml", "b.toml"]
prior_weights = [0.25, 0.75]
data = "pups.csv"
output = "out"
seed = 11

[engine]
particles = 500
resampling = "systematic"
ess_threshold = 0.3
auxiliary = true
"#;
        let m = RunManifest::from_toml(text).unwrap();
        assert_eq!(m.engine.particles, 500);
        let again = RunManifest::from_toml(&m.to_toml().unwrap()).unwrap();
        assert_eq!(m, again);
    }

    #[test]
    fn unknown_manifest_field_is_config_error() {
        let err = RunManifest::from_toml("command = \"fit\"\nmodels = []\noutput = \"o\"\nparticels = 3\n");
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn missing_inputs() {
        let dir = tempfile::tempdir().unwrap();
        let model = dir.path().join("m.toml");
        fs::write(&model, crate::catalog::two_age(0.5, 0.8, 1.2).to_toml().unwrap()).unwrap();
        let mut m = RunManifest::from_toml("command = \"fit\"\nmodels = [\"m.toml\"]\noutput = \"o\"\ndata = \"nope.csv\"\n").unwrap();
        m.resolve_paths(dir.path());
        assert!(matches!(m.validate(), Err(Error::Data(_))));
        m.models = vec![dir.path().join("absent.toml")];
        assert!(matches!(m.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn summary_csv_layout() {
        let s = YearSummary { year: 2001, t: 1, mean: vec![1.5, 2.0], lower: vec![1.0, 1.0], upper: vec![2.0, 3.0] };
        let csv = summary_csv(&[s], &["a".into(), "b".into()]).unwrap();
        assert_eq!(csv, "year,cell,mean,q2.5,q97.5\n2001,a,1.5,1,2\n2001,b,2,1,3\n");
    }
}
