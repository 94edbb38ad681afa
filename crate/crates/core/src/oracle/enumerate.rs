use std::collections::HashMap;

use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::model::{InitDist, PopulationModel};
use crate::process::{apply_structure, ProcessKind, RealUpdate, ResolvedRates};
use crate::rates::Coef;
use crate::rng::{stream, Component};
use crate::sis::PopulationSsm;
use crate::state::StateMode;

/// Largest lost mass the oracle tolerates before refusing to answer.
pub const MAX_LOST_MASS: f64 = 1e-6;
/// Poisson pmfs are cut once this much mass is enumerated.
pub const POISSON_COVER: f64 = 1.0 - 1e-12;

/// A distribution over integer state vectors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnumeratedDistribution {
    /// Sorted, no duplicates.
    pub support: Vec<Vec<u64>>,
    pub probabilities: Vec<f64>,
}

impl EnumeratedDistribution {
    fn from_map(map: HashMap<Vec<u64>, f64>) -> Self {
        let mut entries: Vec<(Vec<u64>, f64)> = map.into_iter().filter(|(_, p)| *p > 0.0).collect();
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        let (support, probabilities) = entries.into_iter().unzip();
        EnumeratedDistribution { support, probabilities }
    }

    pub fn point(state: Vec<u64>) -> Self {
        EnumeratedDistribution { support: vec![state], probabilities: vec![1.0] }
    }

    pub fn total(&self) -> f64 {
        self.probabilities.iter().sum()
    }

    pub fn mean(&self) -> Vec<f64> {
        let d = self.support.first().map_or(0, Vec::len);
        let mut m = vec![0.0; d];
        for (s, p) in self.support.iter().zip(&self.probabilities) {
            for (mi, &v) in m.iter_mut().zip(s) {
                *mi += p * v as f64;
            }
        }
        m
    }

    pub fn probability_of(&self, state: &[u64]) -> f64 {
        self.support
            .binary_search_by(|s| s.as_slice().cmp(state))
            .map_or(0.0, |i| self.probabilities[i])
    }

    /// Total-variation distance to a weighted sample of (integer) states.
    pub fn total_variation<'a>(&self, states: impl Iterator<Item = &'a [f64]>, weights: &[f64]) -> f64 {
        let mut q: HashMap<Vec<u64>, f64> = HashMap::new();
        for (s, &w) in states.zip(weights) {
            *q.entry(s.iter().map(|&v| v.round() as u64).collect()).or_default() += w;
        }
        let total: f64 = q.values().sum();
        let mut tv = 0.0;
        for (s, &p) in self.support.iter().zip(&self.probabilities) {
            tv += (p - q.remove(s).unwrap_or(0.0) / total).abs();
        }
        tv += q.values().map(|w| w / total).sum::<f64>();
        tv / 2.0
    }

    fn normalized(mut self) -> (Self, f64) {
        let total = self.total();
        self.probabilities.iter_mut().for_each(|p| *p /= total);
        (self, total)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EnumerationResult {
    /// Filtered distributions for t = 0..T.
    pub filtered: Vec<EnumeratedDistribution>,
    /// Probability discarded because some cell exceeded the bound, summed
    /// over steps as a fraction of the mass reaching each step (an upper
    /// bound on the total discarded).
    pub lost_mass: f64,
    /// Poisson tail mass cut at [`POISSON_COVER`] (included in `lost_mass`).
    pub tail_mass: f64,
    /// `log p(y_1..y_T | theta)`, up to the lost mass.
    pub log_evidence: f64,
}

fn binomial_pmf(n: u64, p: f64) -> Vec<f64> {
    if p <= 0.0 || n == 0 {
        let mut v = vec![0.0; n as usize + 1];
        v[0] = 1.0;
        return v;
    }
    if p >= 1.0 {
        let mut v = vec![0.0; n as usize + 1];
        v[n as usize] = 1.0;
        return v;
    }
    let nf = n as f64;
    let ln_n = ln_gamma(nf + 1.0);
    (0..=n)
        .map(|k| {
            let kf = k as f64;
            (ln_n - ln_gamma(kf + 1.0) - ln_gamma(nf - kf + 1.0) + kf * p.ln() + (nf - kf) * (-p).ln_1p()).exp()
        })
        .collect()
}

/// Poisson pmf from 0 while the mass enumerated is below the cover and the
/// count stays at most `limit`. Returns the pmf and the mass not listed.
fn poisson_pmf(mean: f64, limit: u64) -> (Vec<f64>, f64) {
    if mean <= 0.0 {
        return (vec![1.0], 0.0);
    }
    let mut out = Vec::new();
    let mut cum = 0.0;
    let mut k = 0u64;
    while cum < POISSON_COVER && k <= limit {
        let p = (k as f64 * mean.ln() - mean - ln_gamma(k as f64 + 1.0)).exp();
        out.push(p);
        cum += p;
        k += 1;
    }
    (out, (1.0 - cum).max(0.0))
}

/// Expand every partial outcome by one independent random choice.
fn expand(outcomes: Vec<(Vec<i64>, f64)>, choice: impl Fn(&[i64]) -> Vec<(Vec<i64>, f64)>) -> Vec<(Vec<i64>, f64)> {
    outcomes
        .into_iter()
        .flat_map(|(s, p)| choice(&s).into_iter().map(move |(t, q)| (t, p * q)))
        .filter(|(_, p)| *p > 0.0)
        .collect()
}

/// Distribution of the process output for one input state. Returns the
/// outcomes within the bound and the probability lost beyond it (with the
/// Poisson tail part reported separately).
fn transition(
    model: &PopulationModel,
    k: usize,
    rates: &ResolvedRates,
    x: &[u64],
    bound: u64,
) -> Result<(Vec<(Vec<u64>, f64)>, f64, f64)> {
    let s = model.structure(k);
    let schema = model.schema();
    let d = x.len();
    let start: Vec<i64> = x.iter().map(|&v| v as i64).collect();
    if !s.stochastic {
        let xf: Vec<f64> = x.iter().map(|&v| v as f64).collect();
        let mut rng = stream(0, Component::Simulate, 0, 0);
        let out = apply_structure(s, schema, &xf, StateMode::Integer, RealUpdate::Expectation, rates, &mut rng)?;
        let out: Vec<u64> = out.iter().map(|&v| v as u64).collect();
        return Ok(if out.iter().all(|&v| v <= bound) { (vec![(out, 1.0)], 0.0, 0.0) } else { (Vec::new(), 1.0, 0.0) });
    }
    let r = &rates.per_cell;
    let mut outcomes = vec![(start, 1.0)];
    let mut tail = 0.0;
    match s.kind {
        ProcessKind::Survival | ProcessKind::Harvest => {
            for c in 0..d {
                let pmf = binomial_pmf(x[c], r[c]);
                let harvest = s.kind == ProcessKind::Harvest;
                outcomes = expand(outcomes, |st| {
                    pmf.iter()
                        .enumerate()
                        .map(|(kk, &q)| {
                            let mut t = st.to_vec();
                            t[c] = if harvest { x[c] as i64 - kk as i64 } else { kk as i64 };
                            (t, q)
                        })
                        .collect()
                });
            }
        }
        ProcessKind::Aging => unreachable!("aging is deterministic"),
        ProcessKind::Growth | ProcessKind::SexAssignment => {
            for c in (0..d).filter(|&c| s.active[c]) {
                let pmf = binomial_pmf(x[c], r[c]);
                let dest = s.dest[c];
                outcomes = expand(outcomes, |st| {
                    pmf.iter()
                        .enumerate()
                        .map(|(kk, &q)| {
                            let mut t = st.to_vec();
                            t[c] -= kk as i64;
                            t[dest] += kk as i64;
                            (t, q)
                        })
                        .collect()
                });
            }
        }
        ProcessKind::Movement => {
            let axis = s.axis.expect("movement axis");
            let row_of = |c: usize| &rates.transfer.as_ref().expect("transfer")[schema.level_of(c, axis)];
            for c in (0..d).filter(|&c| s.active[c] && x[c] > 0) {
                let row = row_of(c);
                let levels = row.len();
                // remove the movers, then place them level by level
                outcomes = outcomes
                    .into_iter()
                    .map(|(mut t, p)| {
                        t[c] -= x[c] as i64;
                        t.push(x[c] as i64);
                        (t, p)
                    })
                    .collect();
                let mut mass = 1.0;
                for (j, &pj) in row.iter().enumerate() {
                    let target = schema.with_level(c, axis, j);
                    let cond = if j == levels - 1 || mass <= 0.0 { 1.0 } else { (pj / mass).min(1.0) };
                    outcomes = expand(outcomes, |st| {
                        let remaining = st[d] as u64;
                        binomial_pmf(remaining, cond)
                            .into_iter()
                            .enumerate()
                            .map(|(kk, q)| {
                                let mut t = st.to_vec();
                                t[target] += kk as i64;
                                t[d] -= kk as i64;
                                (t, q)
                            })
                            .collect()
                    });
                    mass -= pj;
                }
                outcomes = outcomes
                    .into_iter()
                    .map(|(mut t, p)| {
                        t.pop();
                        (t, p)
                    })
                    .collect();
            }
        }
        ProcessKind::Birth => {
            let mut means = vec![0.0; d];
            for c in (0..d).filter(|&c| s.active[c]) {
                means[s.dest[c]] += r[c] * x[c] as f64;
            }
            for (b, &m) in means.iter().enumerate() {
                if m <= 0.0 {
                    continue;
                }
                let room = bound.saturating_sub(x[b]);
                let (pmf, cut) = poisson_pmf(m, room);
                let covered: f64 = pmf.iter().sum();
                if covered >= POISSON_COVER {
                    tail += cut;
                }
                outcomes = expand(outcomes, |st| {
                    pmf.iter()
                        .enumerate()
                        .map(|(kk, &q)| {
                            let mut t = st.to_vec();
                            t[b] += kk as i64;
                            (t, q)
                        })
                        .collect()
                });
                // the cut mass of this cell is lost for every partial outcome
            }
        }
    }
    let mut kept = Vec::with_capacity(outcomes.len());
    let mut inside = 0.0;
    for (t, p) in outcomes {
        if t.iter().all(|&v| v >= 0 && (v as u64) <= bound) {
            inside += p;
            kept.push((t.into_iter().map(|v| v as u64).collect(), p));
        }
    }
    Ok((kept, (1.0 - inside).max(0.0), tail))
}

/// Exact distribution of n_0 under the model's initial-state prior.
pub fn initial_distribution(model: &PopulationModel, theta: &[f64], bound: u64) -> Result<(EnumeratedDistribution, f64)> {
    let d = model.schema().len();
    let mut per_cell: Vec<Vec<(u64, f64)>> = vec![vec![(0, 1.0)]; d];
    let coef = |c: &Coef| -> Result<f64> {
        match c {
            Coef::Value(v) => Ok(*v),
            Coef::Param(name) => model
                .param_names()
                .iter()
                .position(|n| n == name)
                .map(|i| theta[i])
                .ok_or_else(|| Error::Config(format!("unknown parameter `{name}`"))),
        }
    };
    let mut lost = 0.0;
    for spec in &model.config().initial {
        let cells = spec.cells.cells(model.schema())?;
        let dist: Vec<(u64, f64)> = match &spec.dist {
            InitDist::Fixed { value } => {
                let v = coef(value)?;
                if v.fract() != 0.0 || v < 0.0 {
                    return Err(Error::State(format!("initial count {v} is not a nonnegative integer")));
                }
                vec![(v as u64, 1.0)]
            }
            InitDist::UniformInt { lower, upper } => {
                let n = (upper - lower + 1) as f64;
                (*lower..=*upper).map(|k| (k, 1.0 / n)).collect()
            }
            InitDist::Poisson { mean } => {
                let (pmf, cut) = poisson_pmf(coef(mean)?, bound);
                lost += cut;
                pmf.into_iter().enumerate().map(|(k, p)| (k as u64, p)).collect()
            }
            InitDist::Normal { .. } => {
                return Err(Error::Unsupported("enumeration needs a discrete initial-state prior".into()))
            }
        };
        for c in cells {
            per_cell[c] = dist.clone();
        }
    }
    let mut outcomes: Vec<(Vec<u64>, f64)> = vec![(Vec::new(), 1.0)];
    for cell in &per_cell {
        outcomes = outcomes
            .into_iter()
            .flat_map(|(s, p)| {
                cell.iter().map(move |&(k, q)| {
                    let mut t = s.clone();
                    t.push(k);
                    (t, p * q)
                })
            })
            .collect();
    }
    let mut map = HashMap::new();
    for (s, p) in outcomes {
        if s.iter().all(|&v| v <= bound) {
            *map.entry(s).or_insert(0.0) += p;
        }
    }
    let dist = EnumeratedDistribution::from_map(map);
    lost += (1.0 - dist.total()).max(0.0);
    Ok((dist.normalized().0, lost))
}

/// Exact filtered distributions g(n_t | y_1..y_t, theta) for an integer
/// model with at most a few cells, by summing over every intermediate
/// state. Every cell of every intermediate state is capped at `bound`.
pub fn enumerate_filter(ssm: &PopulationSsm, theta: &[f64], bound: u64) -> Result<EnumerationResult> {
    let model = ssm.model();
    if model.mode() != StateMode::Integer {
        return Err(Error::Unsupported("enumeration needs an integer-mode model".into()));
    }
    if model.schema().len() > 3 {
        return Err(Error::Unsupported(format!("enumeration is limited to 3 cells, model has {}", model.schema().len())));
    }
    let (mut dist, mut lost) = initial_distribution(model, theta, bound)?;
    let mut tail = 0.0;
    let mut log_evidence = 0.0;
    let mut filtered = vec![dist.clone()];
    for t in 1..=model.horizon().years {
        let mut mass = 1.0;
        for k in 0..model.process_count() {
            let rates = model.fixed_rates(k, theta, t, ssm.covariates())?;
            let mut next: HashMap<Vec<u64>, f64> = HashMap::new();
            for (x, &p) in dist.support.iter().zip(&dist.probabilities) {
                let (outs, lost_here, tail_here) = transition(model, k, &rates, x, bound)?;
                lost += p * mass * lost_here;
                tail += p * mass * tail_here;
                for (y, q) in outs {
                    *next.entry(y).or_insert(0.0) += p * q;
                }
            }
            let (d, total) = EnumeratedDistribution::from_map(next).normalized();
            mass *= total;
            dist = d;
        }
        if let (Some(y), Some(om)) = (ssm.observation_at(t), model.observation()) {
            let mut weighted = HashMap::new();
            for (x, &p) in dist.support.iter().zip(&dist.probabilities) {
                let xf: Vec<f64> = x.iter().map(|&v| v as f64).collect();
                let l = om.log_likelihood(y, &xf, theta)?.exp();
                weighted.insert(x.clone(), p * l);
            }
            let (d, total) = EnumeratedDistribution::from_map(weighted).normalized();
            if !(total > 0.0) {
                return Err(Error::Degeneracy { year: model.year_of(t) });
            }
            log_evidence += total.ln();
            dist = d;
        }
        filtered.push(dist.clone());
    }
    if lost > MAX_LOST_MASS {
        return Err(Error::OracleInvalid { lost });
    }
    Ok(EnumerationResult { filtered, lost_mass: lost, tail_mass: tail, log_evidence })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::two_age;
    use crate::covariates::Covariates;
    use crate::model::InitialSpec;
    use crate::observation::{ErrorFamily, ObservationModel, ObservationSeries, SeriesSpec};
    use crate::process::{ProcessSpec, RateBinding};
    use crate::schema::{Axis, CellFilter, StateSchema};

    fn ssm(config: crate::model::ModelConfig, data: Option<&ObservationSeries>) -> PopulationSsm {
        PopulationSsm::new(PopulationModel::new(config).unwrap(), Covariates::new(), data).unwrap()
    }

    fn survival_only(phi: f64, n0: f64) -> crate::model::ModelConfig {
        let mut c = two_age(phi, phi, 0.0).with_horizon(0, 1);
        c.schema = StateSchema { axes: vec![Axis::new("age", &["1"])] };
        c.processes = vec![ProcessSpec::survival(vec![RateBinding::all("phi0")])];
        c.initial = vec![InitialSpec::fixed(CellFilter::all(), n0)];
        c
    }

    #[test]
    fn binomial_survival_two_animals() {
        let r = enumerate_filter(&ssm(survival_only(0.5, 2.0), None), &[0.5, 0.5, 0.0], 10).unwrap();
        let d = &r.filtered[1];
        assert_eq!(d.support, vec![vec![0], vec![1], vec![2]]);
        for (p, want) in d.probabilities.iter().zip([0.25, 0.5, 0.25]) {
            assert!((p - want).abs() < 1e-15);
        }
        assert_eq!(r.lost_mass, 0.0);
    }

    #[test]
    fn deterministic_model_stays_a_point() {
        let config = two_age(1.0, 1.0, 0.0).with_horizon(0, 3);
        let r = enumerate_filter(&ssm(config, None), &[1.0, 1.0, 0.0], 30).unwrap();
        assert_eq!(r.filtered[3], EnumeratedDistribution::point(vec![0, 20]));
    }

    #[test]
    fn full_detection_pins_the_count() {
        let mut config = survival_only(0.6, 8.0);
        config.observation = Some(ObservationModel {
            series: vec![SeriesSpec { name: "count".into(), cells: CellFilter::all(), scale: Coef::Value(1.0) }],
            family: ErrorFamily::BinomialCount { p: Coef::Value(1.0) },
        });
        let mut data = ObservationSeries::new(vec!["count".into()]);
        data.push(1, vec![Some(5.0)], vec![None]).unwrap();
        let r = enumerate_filter(&ssm(config, Some(&data)), &[0.6, 0.6, 0.0], 10).unwrap();
        assert_eq!(r.filtered[1], EnumeratedDistribution::point(vec![5]));
        let want = binomial_pmf(8, 0.6)[5].ln();
        assert!((r.log_evidence - want).abs() < 1e-12);
    }

    #[test]
    fn probabilities_sum_to_one_and_bound_is_reported() {
        let config = two_age(0.7, 0.9, 1.5).with_horizon(0, 3).with_initial(vec![InitialSpec::fixed(CellFilter::all(), 2.0)]);
        let r = enumerate_filter(&ssm(config.clone(), None), &[0.7, 0.9, 1.5], 100).unwrap();
        for d in &r.filtered {
            assert!((d.total() - 1.0).abs() < 1e-10);
        }
        assert!(matches!(
            enumerate_filter(&ssm(config, None), &[0.7, 0.9, 1.5], 12),
            Err(Error::OracleInvalid { .. })
        ));
    }

    #[test]
    fn mean_matches_projection() {
        let config = two_age(0.5, 0.8, 1.2).with_horizon(0, 2).with_initial(vec![InitialSpec::fixed(CellFilter::all(), 3.0)]);
        let r = enumerate_filter(&ssm(config, None), &[0.5, 0.8, 1.2], 40).unwrap();
        // P = [[0.6, 0.96], [0.5, 0.8]]; P^2 (3, 3)
        let p1 = [0.6 * 3.0 + 0.96 * 3.0, 0.5 * 3.0 + 0.8 * 3.0];
        let p2 = [0.6 * p1[0] + 0.96 * p1[1], 0.5 * p1[0] + 0.8 * p1[1]];
        let m = r.filtered[2].mean();
        // error is the truncated tail at the bound times its counts
        assert!((m[0] - p2[0]).abs() < 40.0 * r.lost_mass + 1e-9, "{m:?}");
        assert!((m[1] - p2[1]).abs() < 40.0 * r.lost_mass + 1e-9, "{m:?}");
    }

    #[test]
    fn total_variation_of_exact_sample() {
        let d = EnumeratedDistribution { support: vec![vec![0], vec![1]], probabilities: vec![0.25, 0.75] };
        let states = [[0.0], [1.0], [2.0]];
        let tv = d.total_variation(states.iter().map(|s| s.as_slice()), &[0.25, 0.5, 0.25]);
        assert!((tv - 0.25).abs() < 1e-15);
    }
}
