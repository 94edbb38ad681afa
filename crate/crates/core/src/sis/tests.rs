use nalgebra::{DMatrix, DVector};

use super::*;
use crate::catalog::two_age;
use crate::covariates::Covariates;
use crate::model::{ModelConfig, PopulationModel};
use crate::observation::{ErrorFamily, ObservationModel, ObservationSeries, SeriesSpec, VarianceSpec};
use crate::oracle::{kalman_filter, LinearGaussian};
use crate::params::Prior;
use crate::rates::Coef;
use crate::schema::CellFilter;

fn total_count(variance: f64) -> ObservationModel {
    ObservationModel {
        series: vec![SeriesSpec { name: "total".into(), cells: CellFilter::all(), scale: Coef::Value(1.0) }],
        family: ErrorFamily::Normal { variance: VarianceSpec::Fixed { values: vec![Coef::Value(variance)] } },
    }
}

fn series(values: &[f64]) -> ObservationSeries {
    let mut s = ObservationSeries::new(vec!["total".into()]);
    for (i, &v) in values.iter().enumerate() {
        s.push(i as i32 + 1, vec![Some(v)], vec![None]).unwrap();
    }
    s
}

fn ssm(config: ModelConfig, data: Option<&ObservationSeries>) -> PopulationSsm {
    PopulationSsm::new(PopulationModel::new(config).unwrap(), Covariates::new(), data).unwrap()
}

fn uncertain(config: ModelConfig) -> ModelConfig {
    config
        .with_prior("phi0", Prior::Beta { alpha: 5.0, beta: 5.0 })
        .with_prior("lambda", Prior::Uniform { lower: 0.5, upper: 1.5 })
}

fn cfg(particles: usize, seed: u64) -> FilterConfig {
    FilterConfig { particles, seed, ..FilterConfig::default() }
}

#[test]
fn unobserved_run_keeps_full_ess() {
    let m = ssm(uncertain(two_age(0.5, 0.8, 1.2)).with_horizon(0, 5), None);
    let fit = run_filter(&[&m], &[1.0], &cfg(500, 1)).unwrap();
    assert_eq!(fit.filtered.len(), 6);
    for d in &fit.diagnostics {
        assert!((d.ess - 500.0).abs() < 1e-9);
        assert!(!d.resampled && !d.observed);
    }
    assert_eq!(fit.log_marginal_likelihood, 0.0);
}

#[test]
fn impossible_observation_is_degeneracy_with_year() {
    let config = two_age(0.5, 0.8, 1.2).with_horizon(2000, 3).with_observation(ObservationModel {
        series: vec![SeriesSpec { name: "total".into(), cells: CellFilter::all(), scale: Coef::Value(1.0) }],
        family: ErrorFamily::BinomialCount { p: Coef::Value(1.0) },
    });
    let mut data = ObservationSeries::new(vec!["total".into()]);
    data.push(2002, vec![Some(1e6)], vec![None]).unwrap();
    let m = ssm(config, Some(&data));
    let err = run_filter(&[&m], &[1.0], &cfg(200, 2)).unwrap_err();
    assert!(matches!(err, Error::Degeneracy { year: 2002 }), "{err}");
}

#[test]
fn vague_observations_barely_move_weights() {
    let config = two_age(0.5, 0.8, 1.2).with_horizon(0, 4).with_observation(total_count(1e12));
    let m = ssm(config, Some(&series(&[40.0, 45.0, 50.0, 55.0])));
    let fit = run_filter(&[&m], &[1.0], &cfg(1000, 3)).unwrap();
    for d in &fit.diagnostics {
        assert!(d.ess > 0.99 * 1000.0, "{d:?}");
    }
}

fn observed_model() -> PopulationSsm {
    let config = uncertain(two_age(0.5, 0.8, 1.2)).with_horizon(0, 6).with_observation(total_count(25.0));
    ssm(config, Some(&series(&[38.0, 52.0, 60.0, 80.0, 95.0, 120.0])))
}

#[test]
fn identical_output_for_any_worker_count() {
    let m = observed_model();
    let fit = |w: usize| {
        let c = FilterConfig { workers: Some(w), smoothing: true, ..cfg(800, 9) };
        serde_json::to_string(&run_filter(&[&m], &[1.0], &c).unwrap()).unwrap()
    };
    assert_eq!(fit(1), fit(4));
}

#[test]
fn smoothed_final_year_equals_filtered() {
    let m = observed_model();
    let c = FilterConfig { smoothing: true, ..cfg(600, 4) };
    let fit = run_filter(&[&m], &[1.0], &c).unwrap();
    let s = fit.smoothed.as_ref().unwrap();
    assert_eq!(s.len(), fit.filtered.len());
    assert_eq!(s.last(), fit.filtered.last());
    assert!(fit.diagnostics.iter().any(|d| d.resampled));
}

#[test]
fn zero_prior_weight_model_gets_no_particles() {
    let a = observed_model();
    let b = observed_model();
    let fit = run_filter(&[&a, &b], &[1.0, 0.0], &cfg(300, 5)).unwrap();
    assert_eq!(fit.evidence[0].posterior_probability, 1.0);
    assert_eq!(fit.evidence[1].posterior_probability, 0.0);
    assert!(fit.ensemble.unwrap().particles.iter().all(|p| p.model == 0));
}

#[test]
fn identical_models_split_evenly() {
    let a = observed_model();
    let b = observed_model();
    let r = 4000;
    let fit = run_filter(&[&a, &b], &[0.5, 0.5], &cfg(r, 6)).unwrap();
    let p = fit.evidence[0].posterior_probability;
    assert!((p - 0.5).abs() < 0.15, "{p}");
    let total: f64 = fit.evidence.iter().map(|e| e.posterior_probability).sum();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn single_model_has_probability_one() {
    let m = observed_model();
    let fit = run_filter(&[&m], &[1.0], &cfg(200, 7)).unwrap();
    assert_eq!(fit.evidence[0].posterior_probability, 1.0);
    assert!(fit.log_marginal_likelihood.is_finite());
    assert!((fit.evidence[0].log_marginal_likelihood - fit.log_marginal_likelihood).abs() < 1e-9);
}

#[test]
fn prediction_starts_at_posterior_and_follows_matrix() {
    let m = ssm(two_age(0.5, 0.8, 1.2).deterministic().with_horizon(0, 2), None);
    let fit = run_filter(&[&m], &[1.0], &cfg(50, 8)).unwrap();
    let longer = ssm(two_age(0.5, 0.8, 1.2).deterministic().with_horizon(0, 5), None);
    let pred = predict(&fit, &[&longer], 5, 1, None).unwrap();
    assert_eq!(pred[0], fit.filtered[2]);
    let p = DMatrix::from_row_slice(2, 2, &[0.6, 0.96, 0.5, 0.8]);
    let mut n = DVector::from_vec(vec![10.0, 10.0]);
    for s in &pred {
        if s.t > 0 {
            let want = p.pow(s.t) * &n;
            assert!((s.mean[0] - want[0]).abs() < 1e-9 && (s.mean[1] - want[1]).abs() < 1e-9);
        }
    }
    n = p.pow(5) * n;
    assert!((pred[3].mean[1] - n[1]).abs() < 1e-9);
}

#[test]
fn prediction_before_fit_end_is_rejected() {
    let m = observed_model();
    let fit = run_filter(&[&m], &[1.0], &cfg(100, 1)).unwrap();
    assert!(matches!(predict(&fit, &[&m], 3, 1, None), Err(Error::Config(_))));
}

fn scalar_lg() -> LinearGaussian {
    let s = |v: f64| DMatrix::from_element(1, 1, v);
    LinearGaussian {
        name: "ar".into(),
        start_year: 0,
        transition: vec![s(0.9)],
        process_cov: vec![s(1.0)],
        observation: s(1.0),
        observation_cov: s(0.5),
        initial_mean: DVector::from_element(1, 2.0),
        initial_cov: s(1.0),
        data: [1.5, 0.7, 2.2, 3.0, 1.1].iter().map(|&v| Some(DVector::from_element(1, v))).collect(),
    }
}

#[test]
fn bootstrap_and_auxiliary_agree_with_kalman() {
    let lg = scalar_lg();
    let exact = kalman_filter(&lg).unwrap();
    for auxiliary in [false, true] {
        let c = FilterConfig { auxiliary, kernel_shrinkage: None, ..cfg(20_000, 11) };
        let fit = run_filter(&[&lg], &[1.0], &c).unwrap();
        for (s, b) in fit.filtered.iter().zip(&exact.beliefs) {
            assert!((s.mean[0] - b.mean[0]).abs() < 0.05, "aux={auxiliary} t={} {} vs {}", s.t, s.mean[0], b.mean[0]);
        }
        assert!((fit.log_marginal_likelihood - exact.log_likelihood).abs() < 0.05, "aux={auxiliary}");
    }
}

#[test]
fn particle_count_zero_is_config_error() {
    let m = observed_model();
    assert!(matches!(run_filter(&[&m], &[1.0], &cfg(0, 1)), Err(Error::Config(_))));
    assert!(matches!(run_filter(&[&m], &[0.7], &cfg(10, 1)), Err(Error::Config(_))));
}
