use std::collections::{BTreeMap, HashSet};

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use popkit::catalog::{two_age, two_region, two_stage};
use popkit::covariates::Covariates;
use popkit::model::{InitialSpec, ModelConfig, PopulationModel};
use popkit::observation::{ErrorFamily, ObservationModel, ObservationSeries, SeriesSpec, VarianceSpec};
use popkit::oracle::enumerate_filter;
use popkit::params::Prior;
use popkit::rates::{Coef, EnvState};
use popkit::schema::CellFilter;
use popkit::seal::{movement_matrix, seal_config, with_culling, SealInputs, SealParams, SealVariant};
use popkit::sis::{run_filter, run_filter_with, FilterConfig, Particle, PopulationSsm};

fn compiled(config: ModelConfig) -> (PopulationModel, Vec<f64>) {
    let m = PopulationModel::new(config).unwrap();
    let theta = m.theta_from(&BTreeMap::new()).unwrap();
    (m, theta)
}

fn total_series(variance: f64) -> ObservationModel {
    ObservationModel {
        series: vec![SeriesSpec { name: "total".into(), cells: CellFilter::all(), scale: Coef::Value(1.0) }],
        family: ErrorFamily::Normal { variance: VarianceSpec::Fixed { values: vec![Coef::Value(variance)] } },
    }
}

fn totals(values: &[f64]) -> ObservationSeries {
    let mut s = ObservationSeries::new(vec!["total".into()]);
    for (i, &v) in values.iter().enumerate() {
        s.push(i as i32 + 1, vec![Some(v)], vec![None]).unwrap();
    }
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn model_files_round_trip(f0 in 0.0..1.0f64, f1 in 0.0..1.0f64, l in 0.0..6.0f64, m in 0.0..1.0f64, years in 1u32..40) {
        for config in [two_age(f0, f1, l), two_stage(f0, f1, l, m), two_region(f0, f1, l, m)] {
            let config = config.with_horizon(1990, years).with_observation(total_series(4.0));
            let text = config.to_toml().unwrap();
            let back = ModelConfig::from_toml(&text).unwrap();
            prop_assert_eq!(&back, &config);
            prop_assert_eq!(back.to_toml().unwrap(), text);
        }
    }

    #[test]
    fn product_is_ordered_product_and_nonnegative(f0 in 0.0..1.0f64, f1 in 0.0..1.0f64, l in 0.0..6.0f64, m in 0.0..1.0f64) {
        let (model, theta) = compiled(two_region(f0, f1, l, m));
        let cov = Covariates::new();
        let p = model.leslie_product(&theta, 1, &cov, None).unwrap();
        let mut want = DMatrix::identity(4, 4);
        for k in 0..model.process_count() {
            want = model.expectation_matrix(k, &theta, 1, &cov, None).unwrap().matrix * want;
        }
        prop_assert!((&p.matrix - want).amax() < 1e-12);
        prop_assert!(p.matrix.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn integer_states_stay_integral(f0 in 0.0..1.0f64, f1 in 0.0..1.0f64, l in 0.0..4.0f64, m in 0.0..1.0f64,
                                    start in proptest::collection::vec(0u32..300, 4), seed in any::<u64>()) {
        let (model, theta) = compiled(two_region(f0, f1, l, m));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let prev: Vec<f64> = start.iter().map(|&v| v as f64).collect();
        let stages = model.advance(&prev, &theta, 1, &Covariates::new(), &mut EnvState::default(), &mut rng).unwrap();
        for s in &stages {
            prop_assert!(s.iter().all(|&v| v >= 0.0 && v.fract() == 0.0));
        }
        // survival never adds animals and movement keeps the total
        prop_assert!(stages[1].iter().zip(&prev).all(|(a, b)| a <= b));
        prop_assert_eq!(stages[2].iter().sum::<f64>(), stages[1].iter().sum::<f64>());
    }

    #[test]
    fn filter_weights_are_normalized(seed in any::<u64>(), noise in 1.0..400.0f64) {
        let config = two_age(0.5, 0.8, 1.2)
            .with_horizon(0, 5)
            .with_prior("phi0", Prior::Beta { alpha: 4.0, beta: 4.0 })
            .with_prior("lambda", Prior::Uniform { lower: 0.6, upper: 1.6 })
            .with_observation(total_series(noise));
        let ssm = PopulationSsm::new(PopulationModel::new(config).unwrap(), Covariates::new(), Some(&totals(&[30.0, 40.0, 45.0, 60.0, 70.0]))).unwrap();
        let mut bad = Vec::new();
        let mut observer = |t: u32, particles: &[Particle], w: &[f64]| {
            let s: f64 = w.iter().sum();
            if (s - 1.0).abs() > 1e-12 || w.len() != particles.len() {
                bad.push(t);
            }
        };
        let cfg = FilterConfig { particles: 300, seed, ..FilterConfig::default() };
        let fit = run_filter_with(&[&ssm], &[1.0], &cfg, &mut observer).unwrap();
        prop_assert!(bad.is_empty());
        for d in &fit.diagnostics {
            prop_assert!(d.ess >= 1.0 - 1e-9 && d.ess <= 300.0 + 1e-9);
            prop_assert!(d.unique_ancestors >= 1 && d.unique_ancestors <= 300);
        }
        for s in &fit.filtered {
            prop_assert!(s.lower.iter().zip(&s.upper).all(|(a, b)| a <= b));
        }
    }

    #[test]
    fn model_probabilities_sum_to_one(seed in any::<u64>(), w in 0.05..0.95f64) {
        let data = totals(&[30.0, 40.0, 45.0, 60.0]);
        let a = PopulationSsm::new(PopulationModel::new(two_age(0.5, 0.8, 1.2).with_horizon(0, 4).with_observation(total_series(50.0))).unwrap(), Covariates::new(), Some(&data)).unwrap();
        let b = PopulationSsm::new(PopulationModel::new(two_age(0.5, 0.8, 0.6).with_horizon(0, 4).with_observation(total_series(50.0))).unwrap(), Covariates::new(), Some(&data)).unwrap();
        let fit = run_filter(&[&a, &b], &[w, 1.0 - w], &FilterConfig { particles: 400, seed, ..FilterConfig::default() }).unwrap();
        let total: f64 = fit.evidence.iter().map(|e| e.posterior_probability).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn enumerated_distributions_are_proper(f0 in 0.05..0.95f64, f1 in 0.05..0.95f64, l in 0.0..0.8f64) {
        let config = two_age(f0, f1, l)
            .with_horizon(0, 3)
            .with_initial(vec![InitialSpec::fixed(CellFilter::all(), 2.0)]);
        let (model, theta) = compiled(config);
        let r = enumerate_filter(&PopulationSsm::new(model, Covariates::new(), None).unwrap(), &theta, 40).unwrap();
        for d in &r.filtered {
            prop_assert!((d.total() - 1.0).abs() < 1e-10);
            prop_assert!(d.probabilities.iter().all(|&p| p >= 0.0));
            prop_assert_eq!(d.support.iter().collect::<HashSet<_>>().len(), d.support.len());
        }
    }

    #[test]
    fn seal_movement_is_stochastic(counts in proptest::collection::vec(0.0..20_000.0f64, 4),
                                   decay in 0.0..3.0f64, weight in 0.0..2.0f64, fidelity in -1.0..4.0f64) {
        let inputs = SealInputs::shipped().unwrap();
        let cap = [1500.0, 2500.0, 6000.0, 8000.0];
        let m = movement_matrix(&counts, &inputs.distances, &cap, decay, weight, fidelity).unwrap();
        for row in &m {
            prop_assert!(row.iter().all(|&p| p > 0.0 && p < 1.0));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn long_run_growth_matches_dominant_eigenvalue() {
    let (model, theta) = compiled(two_age(0.5, 0.8, 1.2).deterministic().with_horizon(0, 60));
    let path = model.simulate(&theta, &Covariates::new(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let total = |t: usize| path[t].iter().sum::<f64>();
    // P = [[0.6, 0.96], [0.5, 0.8]] has eigenvalues 0 and 1.4
    assert!((total(60) / total(59) - 1.4).abs() < 1e-9);
}

#[test]
fn seal_configs_round_trip_and_have_28_cells() {
    let inputs = SealInputs::shipped().unwrap();
    for v in SealVariant::ALL {
        let config = seal_config(v, &inputs, &SealParams::for_variant(v)).unwrap();
        let culled = with_culling(config.clone(), &[("orkneys".into(), 0.1)]).unwrap();
        for c in [config, culled] {
            let back = ModelConfig::from_toml(&c.to_toml().unwrap()).unwrap();
            assert_eq!(back, c);
            let m = PopulationModel::new(back).unwrap();
            assert_eq!(m.schema().len(), 28);
        }
    }
}
