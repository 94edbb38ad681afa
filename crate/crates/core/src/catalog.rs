//! Small reference models: two age classes (survival, aging, births),
//! two growth stages, and two age classes in two linked regions.
//!
//! Every parameter starts as a point mass; swap priors in with
//! [`ModelConfig::with_prior`].

use std::collections::BTreeMap;

use crate::model::{Horizon, InitialSpec, ModelConfig};
use crate::params::{ParamSpec, Prior};
use crate::process::{ProcessSpec, RateBinding, RateRef, RealUpdate, Transfer};
use crate::rates::RateModel;
use crate::schema::{Axis, CellFilter, StateSchema};
use crate::state::StateMode;

fn point(name: &str, value: f64) -> ParamSpec {
    ParamSpec { name: name.to_string(), prior: Prior::PointMass { value } }
}

fn rates(names: &[&str]) -> BTreeMap<String, RateModel> {
    names.iter().map(|n| (n.to_string(), RateModel::parameter(n))).collect()
}

fn base(name: &str, schema: StateSchema, params: Vec<ParamSpec>, processes: Vec<ProcessSpec>) -> ModelConfig {
    let names: Vec<&str> = params.iter().map(|p| p.name.as_str()).collect();
    ModelConfig {
        name: name.to_string(),
        mode: StateMode::Integer,
        real_update: RealUpdate::Expectation,
        horizon: Horizon { start_year: 0, years: 10 },
        rates: rates(&names),
        schema,
        params,
        processes,
        initial: vec![InitialSpec::fixed(CellFilter::all(), 10.0)],
        observation: None,
    }
}

fn survival_by(axis: &str, levels: &[(&str, &str)]) -> ProcessSpec {
    ProcessSpec::survival(
        levels.iter().map(|(l, r)| RateBinding::on(CellFilter::on(axis, &[l]), RateRef::from(*r))).collect(),
    )
}

/// Ages {0, 1}; P = B A S with rates `phi0`, `phi1`, `lambda`.
pub fn two_age(phi0: f64, phi1: f64, lambda: f64) -> ModelConfig {
    let schema = StateSchema { axes: vec![Axis::new("age", &["0", "1"])] };
    base(
        "two-age",
        schema,
        vec![point("phi0", phi0), point("phi1", phi1), point("lambda", lambda)],
        vec![
            survival_by("age", &[("0", "phi0"), ("1", "phi1")]),
            ProcessSpec::aging("age"),
            ProcessSpec::birth(&[("age", "0")], vec![RateBinding::on(CellFilter::on("age", &["1"]), "lambda")]),
        ],
    )
}

/// Stages {1, 2}; P = B G S with growth probability `pi`.
pub fn two_stage(phi0: f64, phi1: f64, lambda: f64, pi: f64) -> ModelConfig {
    let schema = StateSchema { axes: vec![Axis::new("stage", &["1", "2"])] };
    base(
        "two-stage",
        schema,
        vec![point("phi0", phi0), point("phi1", phi1), point("lambda", lambda), point("pi", pi)],
        vec![
            survival_by("stage", &[("1", "phi0"), ("2", "phi1")]),
            ProcessSpec::Growth {
                stochastic: true,
                axis: "stage".into(),
                rates: vec![RateBinding::on(CellFilter::on("stage", &["1"]), "pi")],
            },
            ProcessSpec::birth(&[("stage", "1")], vec![RateBinding::on(CellFilter::on("stage", &["2"]), "lambda")]),
        ],
    )
}

/// Regions {1, 2} by ages {0, 1}; P = B A M S with movement rate `mu`.
/// Cells are ordered (n01, n11, n02, n12).
pub fn two_region(phi0: f64, phi1: f64, lambda: f64, mu: f64) -> ModelConfig {
    let schema = StateSchema { axes: vec![Axis::new("region", &["1", "2"]), Axis::new("age", &["0", "1"])] };
    base(
        "two-region",
        schema,
        vec![point("phi0", phi0), point("phi1", phi1), point("lambda", lambda), point("mu", mu)],
        vec![
            survival_by("age", &[("0", "phi0"), ("1", "phi1")]),
            ProcessSpec::Movement {
                stochastic: true,
                axis: "region".into(),
                cells: CellFilter::all(),
                transfer: Transfer::Symmetric { rate: "mu".into() },
            },
            ProcessSpec::aging("age"),
            ProcessSpec::birth(&[("age", "0")], vec![RateBinding::on(CellFilter::on("age", &["1"]), "lambda")]),
        ],
    )
}
