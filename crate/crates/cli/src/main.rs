use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use popkit::covariates::Covariates;
use popkit::io::{self, Command, RunManifest, DEGENERACY_HINT};
use popkit::model::{ModelConfig, PopulationModel};
use popkit::observation::ObservationSeries;
use popkit::seal::{self, SealInputs, SealParams, SealVariant};
use popkit::sis::{self, FilterConfig, PopulationSsm, ResamplingScheme, StateSpaceModel};
use popkit::{Error, Result};

#[derive(Parser)]
#[command(name = "popkit", version, about = "Stochastic matrix population models fitted by sequential importance sampling")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run whatever command the manifest names.
    Run(RunArgs),
    /// Simulate a trajectory and observations from one model.
    Simulate(RunArgs),
    /// Filter the data and report posterior summaries.
    Fit(RunArgs),
    /// Fit with ancestry kept, reporting smoothed summaries as well.
    Smooth(RunArgs),
    /// Fit, then project the posterior forward.
    Predict(RunArgs),
    /// Fit several models jointly and report their probabilities.
    Compare(RunArgs),
    /// Exact enumeration filter for a small integer model.
    Oracle(RunArgs),
    /// Validate a model file and print it in canonical form.
    Model {
        path: PathBuf,
    },
    /// The grey-seal example.
    #[command(subcommand)]
    Seal(SealCmd),
}

#[derive(Args)]
struct RunArgs {
    manifest: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    particles: Option<usize>,
    /// Worker threads (the POPKIT_WORKERS variable wins when set).
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct SealEngine {
    #[arg(long, default_value_t = 10_000)]
    particles: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, default_value = "residual")]
    resampling: String,
    #[arg(long, default_value_t = 0.5)]
    ess_threshold: f64,
    /// Kernel shrinkage; 1 turns parameter jitter off.
    #[arg(long, default_value_t = 0.98)]
    shrinkage: f64,
    #[arg(long)]
    auxiliary: bool,
    #[arg(long, default_value = "seal-output")]
    output: PathBuf,
}

impl SealEngine {
    fn config(&self, smoothing: bool) -> Result<FilterConfig> {
        let c = FilterConfig {
            particles: self.particles,
            resampling: self.resampling.parse::<ResamplingScheme>()?,
            ess_threshold: self.ess_threshold,
            kernel_shrinkage: Some(self.shrinkage),
            auxiliary: self.auxiliary,
            seed: self.seed,
            smoothing,
            workers: self.workers,
        };
        c.validate()?;
        Ok(c)
    }
}

#[derive(Subcommand)]
enum SealCmd {
    /// Fit one survival variant to pup production (shipped synthetic data
    /// unless --data is given).
    Fit {
        #[arg(long, default_value = "salmon-production")]
        variant: String,
        #[arg(long)]
        data: Option<PathBuf>,
        #[command(flatten)]
        engine: SealEngine,
    },
    /// Simulate pup production from one variant.
    Simulate {
        #[arg(long, default_value = "salmon-production")]
        variant: String,
        #[arg(long, default_value_t = 0.05)]
        cv: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "seal-output")]
        output: PathBuf,
    },
    /// Fit every variant and rank them.
    Compare {
        #[arg(long, value_delimiter = ',', default_value = "density,salmon-production,staff-numbers")]
        variants: Vec<String>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[command(flatten)]
        engine: SealEngine,
    },
    /// Fit, then project with optional culling and scenario covariates.
    Predict {
        #[arg(long, default_value = "salmon-production")]
        variant: String,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        years: u32,
        /// Covariate CSV for the projected years.
        #[arg(long)]
        scenario: Vec<PathBuf>,
        /// Annual fraction of seals aged 1+ killed, e.g. outer_hebrides=0.05.
        #[arg(long)]
        cull: Vec<String>,
        #[command(flatten)]
        engine: SealEngine,
    },
}

fn run_manifest(args: &RunArgs, command: Option<Command>) -> Result<()> {
    let mut m = RunManifest::load(&args.manifest)?;
    if let Some(c) = command {
        m.command = c;
    }
    if let Some(s) = args.seed {
        m.seed = s;
    }
    if let Some(r) = args.particles {
        m.engine.particles = r;
    }
    if args.workers.is_some() {
        m.engine.workers = args.workers;
    }
    if let Some(o) = &args.output {
        m.output = o.clone();
    }
    let out = io::execute(&m)?;
    for f in out.files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

#[derive(Serialize)]
struct SealDocument<'a, T: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    seed: u64,
    engine: Option<&'a FilterConfig>,
    params: &'a SealParams,
    models: Vec<&'a ModelConfig>,
    result: T,
}

impl<T: Serialize> SealDocument<'_, T> {
    fn write(&self, dir: &Path, name: &str) -> Result<()> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))?;
        s.push('\n');
        write_file(dir, name, &s)
    }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn seal_data(path: Option<&Path>) -> Result<ObservationSeries> {
    match path {
        Some(p) => ObservationSeries::from_csv(fs::File::open(p)?),
        None => seal::shipped_pup_data(),
    }
}

fn seal_model(variant: SealVariant, inputs: &SealInputs, params: &SealParams) -> Result<ModelConfig> {
    let mut c = seal::seal_config(variant, inputs, params)?;
    for (name, prior) in seal::default_fit_priors(params) {
        c = c.with_prior(&name, prior);
    }
    Ok(c)
}

fn parse_cull(items: &[String]) -> Result<Vec<(String, f64)>> {
    items
        .iter()
        .map(|s| {
            let (r, v) = s.split_once('=').ok_or_else(|| Error::Config(format!("cull `{s}` is not region=rate")))?;
            let v: f64 = v.parse().map_err(|_| Error::Config(format!("cull rate `{v}` is not a number")))?;
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("cull rate {v} outside [0, 1]")));
            }
            Ok((r.to_string(), v))
        })
        .collect()
}

fn run_seal(cmd: &SealCmd) -> Result<()> {
    let inputs = SealInputs::shipped()?;
    match cmd {
        SealCmd::Simulate { variant, cv, seed, output } => {
            let variant: SealVariant = variant.parse()?;
            let params = SealParams::for_variant(variant);
            let model = seal::build_seal_model(variant, &inputs, &params)?;
            let sim = seal::simulate_pups(&model, &inputs.covariates, *cv, *seed)?;
            write_file(output, "pup_production.csv", &sim.data.to_csv()?)?;
            let cells = model.schema().cell_labels();
            write_file(output, "truth.csv", &io::trajectory_csv(&sim.states, &cells, seal::START_YEAR)?)?;
            let doc = SealDocument {
                tool: io::TOOL,
                version: io::VERSION,
                command: "seal simulate",
                seed: *seed,
                engine: None,
                params: &params,
                models: vec![model.config()],
                result: serde_json::json!({ "variant": variant, "cv": cv }),
            };
            doc.write(output, "simulation.json")
        }
        SealCmd::Fit { variant, data, engine } => {
            let variant: SealVariant = variant.parse()?;
            let params = SealParams::for_variant(SealVariant::SalmonProduction);
            let data = seal_data(data.as_deref())?;
            let model = PopulationModel::new(seal_model(variant, &inputs, &params)?)?;
            let ssm = PopulationSsm::new(model, inputs.covariates.clone(), Some(&data))?;
            let config = engine.config(true)?;
            let fit = sis::run_filter(&[&ssm], &[1.0], &config)?;
            write_file(&engine.output, "filtered.csv", &io::summary_csv(&fit.filtered, &fit.cells)?)?;
            if let Some(s) = &fit.smoothed {
                write_file(&engine.output, "smoothed.csv", &io::summary_csv(s, &fit.cells)?)?;
            }
            write_file(&engine.output, "parameters.csv", &io::parameters_csv(&fit)?)?;
            write_file(&engine.output, "diagnostics.csv", &io::diagnostics_csv(&fit)?)?;
            let doc = SealDocument {
                tool: io::TOOL,
                version: io::VERSION,
                command: "seal fit",
                seed: engine.seed,
                engine: Some(&config),
                params: &params,
                models: vec![ssm.model().config()],
                result: &fit,
            };
            doc.write(&engine.output, "fit.json")
        }
        SealCmd::Compare { variants, data, engine } => {
            let variants: Vec<SealVariant> = variants.iter().map(|v| v.parse()).collect::<Result<_>>()?;
            let params = SealParams::for_variant(SealVariant::SalmonProduction);
            let data = seal_data(data.as_deref())?;
            let config = engine.config(false)?;
            let cmp = seal::compare_variants(&data, &variants, &inputs, &params, &seal::default_fit_priors(&params), &config)?;
            for s in &cmp.ranking {
                match (&s.log_marginal_likelihood, &s.failure) {
                    (Some(l), _) => println!("{:<18} log ML {:>12.3}  AIC~ {:>12.3}", s.variant.name(), l, s.aic_approx.unwrap_or(f64::NAN)),
                    (None, Some(f)) => println!("{:<18} failed: {f}", s.variant.name()),
                    _ => {}
                }
            }
            let configs: Vec<ModelConfig> =
                variants.iter().map(|&v| seal_model(v, &inputs, &params)).collect::<Result<_>>()?;
            let doc = SealDocument {
                tool: io::TOOL,
                version: io::VERSION,
                command: "seal compare",
                seed: engine.seed,
                engine: Some(&config),
                params: &params,
                models: configs.iter().collect(),
                result: &cmp,
            };
            doc.write(&engine.output, "compare.json")
        }
        SealCmd::Predict { variant, data, years, scenario, cull, engine } => {
            let variant: SealVariant = variant.parse()?;
            let params = SealParams::for_variant(SealVariant::SalmonProduction);
            let data = seal_data(data.as_deref())?;
            let config = engine.config(false)?;
            let base = seal_model(variant, &inputs, &params)?;
            let ssm = PopulationSsm::new(PopulationModel::new(base.clone())?, inputs.covariates.clone(), Some(&data))?;
            let fit = sis::run_filter(&[&ssm], &[1.0], &config)?;
            let mut extra = Covariates::new();
            for p in scenario {
                extra = extra.merged(&Covariates::from_csv(fs::File::open(p)?)?);
            }
            let culled = seal::with_culling(base, &parse_cull(cull)?)?;
            let future = PopulationSsm::new(PopulationModel::new(culled)?, inputs.covariates.clone(), Some(&data))?.with_scenario(&extra);
            let models: [&dyn StateSpaceModel; 1] = [&future];
            let pred = sis::predict(&fit, &models, seal::YEARS + years, engine.seed, engine.workers)?;
            write_file(&engine.output, "filtered.csv", &io::summary_csv(&fit.filtered, &fit.cells)?)?;
            write_file(&engine.output, "predicted.csv", &io::summary_csv(&pred, &fit.cells)?)?;
            let doc = SealDocument {
                tool: io::TOOL,
                version: io::VERSION,
                command: "seal predict",
                seed: engine.seed,
                engine: Some(&config),
                params: &params,
                models: vec![ssm.model().config(), future.model().config()],
                result: serde_json::json!({ "fit": &fit, "predicted": &pred }),
            };
            doc.write(&engine.output, "predict.json")
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Cmd::Run(a) => run_manifest(&a, None),
        Cmd::Simulate(a) => run_manifest(&a, Some(Command::Simulate)),
        Cmd::Fit(a) => run_manifest(&a, Some(Command::Fit)),
        Cmd::Smooth(a) => run_manifest(&a, Some(Command::Smooth)),
        Cmd::Predict(a) => run_manifest(&a, Some(Command::Predict)),
        Cmd::Compare(a) => run_manifest(&a, Some(Command::Compare)),
        Cmd::Oracle(a) => run_manifest(&a, Some(Command::Oracle)),
        Cmd::Model { path } => {
            let text = fs::read_to_string(&path)?;
            let model = PopulationModel::from_toml(&text)?;
            print!("{}", model.config().to_toml()?);
            Ok(())
        }
        Cmd::Seal(s) => run_seal(&s),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("popkit: {e}");
            if matches!(e, Error::Degeneracy { .. }) {
                eprintln!("hint: {DEGENERACY_HINT}");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
