//! Observation operators: aggregate state cells into observed series and
//! score observed values under a normal or binomial-count error model.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Read;

use rand::Rng;
use rand_distr::{Binomial, Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::rates::{Coef, CoefIx};
use crate::schema::{CellFilter, StateSchema};

fn one() -> Coef {
    Coef::Value(1.0)
}

fn is_one(c: &Coef) -> bool {
    *c == Coef::Value(1.0)
}

/// One observed series: the (scaled) sum of a group of cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "CellFilter::is_all")]
    pub cells: CellFilter,
    /// Multiplies the aggregated count (normal family only).
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub scale: Coef,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum VarianceSpec {
    /// One variance per series, or a single value shared by all series.
    Fixed { values: Vec<Coef> },
    /// Use the per-entry variance column of the data.
    Data,
    /// The data variance is an estimate with `df` degrees of freedom; the
    /// true variance gets a moment-matched inverse-gamma prior that is
    /// integrated out (Student-t marginal).
    DataWithPrior { df: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ErrorFamily {
    Normal { variance: VarianceSpec },
    /// Each animal in the aggregated count is seen with probability `p`.
    BinomialCount { p: Coef },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationModel {
    pub series: Vec<SeriesSpec>,
    pub family: ErrorFamily,
}

/// One year of data, already aligned to the model's series order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct YearObservation {
    pub values: Vec<Option<f64>>,
    pub variances: Vec<Option<f64>>,
}

impl YearObservation {
    pub fn complete(values: &[f64]) -> Self {
        YearObservation { values: values.iter().map(|&v| Some(v)).collect(), variances: vec![None; values.len()] }
    }

    pub fn missing(m: usize) -> Self {
        YearObservation { values: vec![None; m], variances: vec![None; m] }
    }

    pub fn is_empty(&self) -> bool {
        self.values.iter().all(Option::is_none)
    }
}

#[derive(Debug, Clone)]
enum CompiledFamily {
    Normal(CompiledVariance),
    Binomial(CoefIx),
}

#[derive(Debug, Clone)]
enum CompiledVariance {
    Fixed(Vec<CoefIx>),
    Data,
    DataWithPrior(f64),
}

/// An observation model bound to a schema and parameter list.
#[derive(Debug, Clone)]
pub struct CompiledObservation {
    rows: Vec<Vec<usize>>,
    scales: Vec<CoefIx>,
    family: CompiledFamily,
}

pub(crate) fn ln_choose(n: f64, k: f64) -> f64 {
    ln_gamma(n + 1.0) - ln_gamma(k + 1.0) - ln_gamma(n - k + 1.0)
}

impl ObservationModel {
    pub fn compile(&self, schema: &StateSchema, params: &[String]) -> Result<CompiledObservation> {
        if self.series.is_empty() {
            return Err(Error::Config("observation model has no series".into()));
        }
        let m = self.series.len();
        let rows = self.series.iter().map(|s| s.cells.cells(schema)).collect::<Result<Vec<_>>>()?;
        let scales = self.series.iter().map(|s| s.scale.compile(params)).collect::<Result<Vec<_>>>()?;
        let family = match &self.family {
            ErrorFamily::Normal { variance } => CompiledFamily::Normal(match variance {
                VarianceSpec::Fixed { values } => {
                    if values.len() != 1 && values.len() != m {
                        return Err(Error::Config(format!("{} variances for {m} series", values.len())));
                    }
                    let v = values.iter().map(|c| c.compile(params)).collect::<Result<Vec<_>>>()?;
                    for c in &v {
                        if let CoefIx::Value(x) = c {
                            if !(*x > 0.0) {
                                return Err(Error::Domain(format!("observation variance {x} must be positive")));
                            }
                        }
                    }
                    CompiledVariance::Fixed(v)
                }
                VarianceSpec::Data => CompiledVariance::Data,
                VarianceSpec::DataWithPrior { df } => {
                    if !(*df > 0.0) {
                        return Err(Error::Config(format!("variance prior df {df} must be positive")));
                    }
                    CompiledVariance::DataWithPrior(*df)
                }
            }),
            ErrorFamily::BinomialCount { p } => {
                let p = p.compile(params)?;
                if let CoefIx::Value(x) = p {
                    if !(x > 0.0 && x <= 1.0) {
                        return Err(Error::Domain(format!("detection probability {x} outside (0, 1]")));
                    }
                }
                CompiledFamily::Binomial(p)
            }
        };
        Ok(CompiledObservation { rows, scales, family })
    }

    pub fn series_names(&self) -> Vec<String> {
        self.series.iter().map(|s| s.name.clone()).collect()
    }
}

impl CompiledObservation {
    pub fn series_count(&self) -> usize {
        self.rows.len()
    }

    pub fn aggregate(&self, state: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|cells| cells.iter().map(|&c| state[c]).sum()).collect()
    }

    /// Expected observation `O_t n_t`.
    pub fn expected(&self, state: &[f64], theta: &[f64]) -> Result<Vec<f64>> {
        let agg = self.aggregate(state);
        Ok(match &self.family {
            CompiledFamily::Normal(_) => agg.iter().zip(&self.scales).map(|(a, s)| a * s.get(theta)).collect(),
            CompiledFamily::Binomial(p) => {
                let p = p.get(theta);
                agg.iter().map(|a| a * p).collect()
            }
        })
    }

    fn variance(&self, v: &[CoefIx], j: usize, theta: &[f64]) -> Result<f64> {
        let s2 = if v.len() == 1 { v[0].get(theta) } else { v[j].get(theta) };
        if !(s2 > 0.0) {
            return Err(Error::Domain(format!("observation variance {s2} for series {j} must be positive")));
        }
        Ok(s2)
    }

    fn data_variance(y: &YearObservation, j: usize) -> Result<f64> {
        let v = y.variances.get(j).copied().flatten().ok_or_else(|| {
            Error::Data(format!("series {j} needs a variance estimate in the data"))
        })?;
        if !(v > 0.0) {
            return Err(Error::Domain(format!("variance estimate {v} for series {j} must be positive")));
        }
        Ok(v)
    }

    /// `log f(y_t | n_t, theta)`, summed over non-missing series.
    pub fn log_likelihood(&self, y: &YearObservation, state: &[f64], theta: &[f64]) -> Result<f64> {
        if y.values.len() != self.rows.len() {
            return Err(Error::Data(format!("{} observed series for {} model series", y.values.len(), self.rows.len())));
        }
        let agg = self.aggregate(state);
        let mut total = 0.0;
        for (j, obs) in y.values.iter().enumerate() {
            let Some(obs) = *obs else { continue };
            if !obs.is_finite() {
                return Err(Error::Data(format!("series {j} value {obs} is not finite")));
            }
            total += match &self.family {
                CompiledFamily::Normal(var) => {
                    let mean = agg[j] * self.scales[j].get(theta);
                    let r = obs - mean;
                    match var {
                        CompiledVariance::Fixed(v) => {
                            let s2 = self.variance(v, j, theta)?;
                            -0.5 * (2.0 * PI * s2).ln() - r * r / (2.0 * s2)
                        }
                        CompiledVariance::Data => {
                            let s2 = Self::data_variance(y, j)?;
                            -0.5 * (2.0 * PI * s2).ln() - r * r / (2.0 * s2)
                        }
                        CompiledVariance::DataWithPrior(df) => {
                            let est = Self::data_variance(y, j)?;
                            let shape = 2.0 + df / 2.0;
                            let scale = est * (shape - 1.0);
                            let nu = 2.0 * shape;
                            let s2 = scale / shape;
                            ln_gamma((nu + 1.0) / 2.0) - ln_gamma(nu / 2.0) - 0.5 * (nu * PI * s2).ln()
                                - (nu + 1.0) / 2.0 * (1.0 + r * r / (nu * s2)).ln()
                        }
                    }
                }
                CompiledFamily::Binomial(p) => {
                    let p = p.get(theta);
                    if !(p > 0.0 && p <= 1.0) {
                        return Err(Error::Domain(format!("detection probability {p} outside (0, 1]")));
                    }
                    binomial_log_pmf(obs, agg[j], p)
                }
            };
        }
        Ok(total)
    }

    /// One draw of `y_t` given the state. `variances` supplies per-series
    /// estimates for data-driven variance specs.
    pub fn simulate<R: Rng + ?Sized>(&self, state: &[f64], theta: &[f64], variances: &[Option<f64>], rng: &mut R) -> Result<Vec<f64>> {
        let agg = self.aggregate(state);
        let mut out = Vec::with_capacity(agg.len());
        for (j, &a) in agg.iter().enumerate() {
            let y = match &self.family {
                CompiledFamily::Normal(var) => {
                    let mean = a * self.scales[j].get(theta);
                    let probe = YearObservation { values: vec![], variances: variances.to_vec() };
                    let s2 = match var {
                        CompiledVariance::Fixed(v) => self.variance(v, j, theta)?,
                        CompiledVariance::Data => Self::data_variance(&probe, j)?,
                        CompiledVariance::DataWithPrior(df) => {
                            let est = Self::data_variance(&probe, j)?;
                            let shape = 2.0 + df / 2.0;
                            let scale = est * (shape - 1.0);
                            1.0 / Gamma::new(shape, 1.0 / scale).map_err(|e| Error::Domain(e.to_string()))?.sample(rng)
                        }
                    };
                    let z: f64 = StandardNormal.sample(rng);
                    mean + s2.sqrt() * z
                }
                CompiledFamily::Binomial(p) => {
                    let p = p.get(theta);
                    if !(p > 0.0 && p <= 1.0) {
                        return Err(Error::Domain(format!("detection probability {p} outside (0, 1]")));
                    }
                    if p >= 1.0 {
                        a
                    } else {
                        Binomial::new(a.round() as u64, p).map_err(|e| Error::Domain(e.to_string()))?.sample(rng) as f64
                    }
                }
            };
            out.push(y);
        }
        Ok(out)
    }
}

/// `log P(Y = y)` for `Y ~ Binomial(n, p)`; `-inf` outside the support.
pub fn binomial_log_pmf(y: f64, n: f64, p: f64) -> f64 {
    if y < 0.0 || y > n || y.fract() != 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return if y == n { 0.0 } else { f64::NEG_INFINITY };
    }
    if p <= 0.0 {
        return if y == 0.0 { 0.0 } else { f64::NEG_INFINITY };
    }
    ln_choose(n, y) + y * p.ln() + (n - y) * (1.0 - p).ln()
}

/// Log-likelihood of one year directly from the declarative model.
pub fn log_likelihood(
    om: &ObservationModel,
    schema: &StateSchema,
    params: &[String],
    y: &YearObservation,
    state: &[f64],
    theta: &[f64],
) -> Result<f64> {
    if state.len() != schema.len() {
        return Err(Error::Schema(format!("state has {} cells, schema has {}", state.len(), schema.len())));
    }
    om.compile(schema, params)?.log_likelihood(y, state, theta)
}

pub fn simulate_observation<R: Rng + ?Sized>(
    om: &ObservationModel,
    schema: &StateSchema,
    params: &[String],
    state: &[f64],
    theta: &[f64],
    rng: &mut R,
) -> Result<Vec<f64>> {
    om.compile(schema, params)?.simulate(state, theta, &[], rng)
}

/// Observed time series, one row per year with possibly missing entries.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ObservationSeries {
    pub series: Vec<String>,
    /// Strictly increasing.
    pub years: Vec<i32>,
    /// `values[year][series]`.
    pub values: Vec<Vec<Option<f64>>>,
    pub variances: Vec<Vec<Option<f64>>>,
}

impl ObservationSeries {
    pub fn new(series: Vec<String>) -> Self {
        ObservationSeries { series, ..Default::default() }
    }

    /// Append a year; years must arrive in increasing order.
    pub fn push(&mut self, year: i32, values: Vec<Option<f64>>, variances: Vec<Option<f64>>) -> Result<()> {
        if self.years.last().is_some_and(|&last| year <= last) {
            return Err(Error::Data(format!("year {year} is not after {}", self.years.last().unwrap())));
        }
        if values.len() != self.series.len() || variances.len() != self.series.len() {
            return Err(Error::Data(format!("year {year} has the wrong number of series")));
        }
        self.years.push(year);
        self.values.push(values);
        self.variances.push(variances);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.years.len()
    }

    pub fn is_empty(&self) -> bool {
        self.years.is_empty()
    }

    /// The entries for `year`, reordered to `names`. Series absent from the
    /// data or years absent from the data come back missing.
    pub fn aligned(&self, year: i32, names: &[String]) -> YearObservation {
        let Ok(row) = self.years.binary_search(&year) else {
            return YearObservation::missing(names.len());
        };
        let mut out = YearObservation::missing(names.len());
        for (j, name) in names.iter().enumerate() {
            if let Some(k) = self.series.iter().position(|s| s == name) {
                out.values[j] = self.values[row][k];
                out.variances[j] = self.variances[row][k];
            }
        }
        out
    }

    /// Parse CSV with header `year,series,value[,variance]`. Rows may come
    /// in any order; absent (year, series) pairs are missing observations.
    pub fn from_csv<R: Read>(reader: R) -> Result<ObservationSeries> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.to_lowercase()).collect();
        let col = |n: &str| headers.iter().position(|h| h == n);
        let (yc, sc, vc) = match (col("year"), col("series"), col("value")) {
            (Some(y), Some(s), Some(v)) => (y, s, v),
            _ => return Err(Error::Data("observation CSV needs columns year, series, value".into())),
        };
        let varc = col("variance");
        let mut names: Vec<String> = Vec::new();
        let mut rows: BTreeMap<i32, BTreeMap<usize, (Option<f64>, Option<f64>)>> = BTreeMap::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let f = |i: usize| rec.get(i).unwrap_or("");
            let num = |s: &str, what: &str| -> Result<Option<f64>> {
                if s.is_empty() || s.eq_ignore_ascii_case("na") {
                    Ok(None)
                } else {
                    s.parse::<f64>().map(Some).map_err(|_| Error::Data(format!("row {}: bad {what} `{s}`", line + 2)))
                }
            };
            let year: i32 = f(yc).parse().map_err(|_| Error::Data(format!("row {}: bad year", line + 2)))?;
            let name = f(sc).to_string();
            let j = match names.iter().position(|n| *n == name) {
                Some(j) => j,
                None => {
                    names.push(name);
                    names.len() - 1
                }
            };
            let value = num(f(vc), "value")?;
            let variance = match varc {
                Some(c) => num(f(c), "variance")?,
                None => None,
            };
            if rows.entry(year).or_default().insert(j, (value, variance)).is_some() {
                return Err(Error::Data(format!("row {}: duplicate entry for {year}/{}", line + 2, names[j])));
            }
        }
        let mut out = ObservationSeries::new(names.clone());
        for (year, entries) in rows {
            let mut values = vec![None; names.len()];
            let mut variances = vec![None; names.len()];
            for (j, (v, s)) in entries {
                values[j] = v;
                variances[j] = s;
            }
            out.push(year, values, variances)?;
        }
        Ok(out)
    }

    pub fn to_csv(&self) -> Result<String> {
        let with_var = self.variances.iter().flatten().any(Option::is_some);
        let mut w = csv::Writer::from_writer(Vec::new());
        if with_var {
            w.write_record(["year", "series", "value", "variance"])?;
        } else {
            w.write_record(["year", "series", "value"])?;
        }
        for (i, year) in self.years.iter().enumerate() {
            for (j, name) in self.series.iter().enumerate() {
                let Some(v) = self.values[i][j] else { continue };
                if with_var {
                    let s = self.variances[i][j].map(|x| x.to_string()).unwrap_or_default();
                    w.write_record([year.to_string(), name.clone(), v.to_string(), s])?;
                } else {
                    w.write_record([year.to_string(), name.clone(), v.to_string()])?;
                }
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Component};
    use crate::schema::Axis;
    use proptest::prelude::*;

    fn model3_schema() -> StateSchema {
        StateSchema::new(vec![Axis::new("region", &["1", "2"]), Axis::new("age", &["0", "1"])]).unwrap()
    }

    fn by_region(family: ErrorFamily) -> ObservationModel {
        ObservationModel {
            series: vec![
                SeriesSpec { name: "r1".into(), cells: CellFilter::on("region", &["1"]), scale: one() },
                SeriesSpec { name: "r2".into(), cells: CellFilter::on("region", &["2"]), scale: one() },
            ],
            family,
        }
    }

    fn normal(var: f64) -> ErrorFamily {
        ErrorFamily::Normal { variance: VarianceSpec::Fixed { values: vec![Coef::Value(var)] } }
    }

    #[test]
    fn exact_normal_match() {
        let s = model3_schema();
        let om = by_region(normal(1.0));
        let n = [1.0, 2.0, 3.0, 4.0];
        let ll = log_likelihood(&om, &s, &[], &YearObservation::complete(&[3.0, 7.0]), &n, &[]).unwrap();
        assert!((ll + (2.0 * PI).ln()).abs() < 1e-14);
        let none = log_likelihood(&om, &s, &[], &YearObservation::missing(2), &n, &[]).unwrap();
        assert_eq!(none, 0.0);
    }

    #[test]
    fn binomial_edges() {
        let s = model3_schema();
        let om = by_region(ErrorFamily::BinomialCount { p: Coef::Value(1.0) });
        let n = [1.0, 2.0, 3.0, 4.0];
        let ll = log_likelihood(&om, &s, &[], &YearObservation::complete(&[3.0, 7.0]), &n, &[]).unwrap();
        assert_eq!(ll, 0.0);
        let om = by_region(ErrorFamily::BinomialCount { p: Coef::Value(0.5) });
        let over = log_likelihood(&om, &s, &[], &YearObservation::complete(&[4.0, 7.0]), &n, &[]).unwrap();
        assert_eq!(over, f64::NEG_INFINITY);
    }

    #[test]
    fn invalid_variance_is_domain_error() {
        let s = model3_schema();
        let om = by_region(normal(0.0));
        assert!(matches!(om.compile(&s, &[]), Err(Error::Domain(_))));
        let om = by_region(ErrorFamily::Normal { variance: VarianceSpec::Fixed { values: vec![Coef::param("s2")] } });
        let c = om.compile(&s, &["s2".to_string()]).unwrap();
        assert!(matches!(c.log_likelihood(&YearObservation::complete(&[1.0, 1.0]), &[0.0; 4], &[-1.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn degenerate_normal_simulation_and_model3_aggregation() {
        let s = model3_schema();
        let om = by_region(normal(1e-300));
        let mut rng = stream(1, Component::Observe, 0, 0);
        let y = simulate_observation(&om, &s, &[], &[1.0, 2.0, 3.0, 4.0], &[], &mut rng).unwrap();
        assert!((y[0] - 3.0).abs() < 1e-100 && (y[1] - 7.0).abs() < 1e-100);
    }

    #[test]
    fn binomial_simulation_mean() {
        let s = StateSchema::new(vec![Axis::new("age", &["0"])]).unwrap();
        let om = ObservationModel {
            series: vec![SeriesSpec { name: "all".into(), cells: CellFilter::all(), scale: one() }],
            family: ErrorFamily::BinomialCount { p: Coef::Value(0.5) },
        };
        let c = om.compile(&s, &[]).unwrap();
        let mut rng = stream(2, Component::Observe, 0, 0);
        let mean: f64 = (0..10_000).map(|_| c.simulate(&[1e6], &[], &[], &mut rng).unwrap()[0]).sum::<f64>() / 1e4;
        assert!((mean - 5e5).abs() / 5e5 < 0.005);
    }

    #[test]
    fn binomial_pmf_sums_to_one() {
        let s = StateSchema::new(vec![Axis::new("age", &["0", "1"])]).unwrap();
        let om = ObservationModel {
            series: vec![SeriesSpec { name: "all".into(), cells: CellFilter::all(), scale: one() }],
            family: ErrorFamily::BinomialCount { p: Coef::Value(0.37) },
        };
        let c = om.compile(&s, &[]).unwrap();
        for total in 0..=30 {
            let n = [total as f64 / 2.0, total as f64 - (total as f64 / 2.0)].map(f64::floor);
            let n = [n[0], total as f64 - n[0]];
            let sum: f64 = (0..=total)
                .map(|y| c.log_likelihood(&YearObservation::complete(&[y as f64]), &n, &[]).unwrap().exp())
                .sum();
            assert!((sum - 1.0).abs() < 1e-12, "total {total}: {sum}");
        }
    }

    #[test]
    fn student_t_marginal_is_a_density() {
        let s = StateSchema::new(vec![Axis::new("age", &["0"])]).unwrap();
        let om = ObservationModel {
            series: vec![SeriesSpec { name: "all".into(), cells: CellFilter::all(), scale: one() }],
            family: ErrorFamily::Normal { variance: VarianceSpec::DataWithPrior { df: 8.0 } },
        };
        let c = om.compile(&s, &[]).unwrap();
        let h = 0.01;
        let integral: f64 = (-40_000..40_000)
            .map(|i| {
                let y = 50.0 + i as f64 * h;
                let obs = YearObservation { values: vec![Some(y)], variances: vec![Some(4.0)] };
                c.log_likelihood(&obs, &[50.0], &[]).unwrap().exp() * h
            })
            .sum();
        assert!((integral - 1.0).abs() < 1e-3, "{integral}");
        let missing_var = YearObservation::complete(&[1.0]);
        assert!(matches!(c.log_likelihood(&missing_var, &[1.0], &[]), Err(Error::Data(_))));
    }

    #[test]
    fn csv_round_trip_with_missing() {
        let text = "year,series,value,variance\n2001,a,3.5,1\n2000,a,2,1\n2000,b,7,2\n2002,b,,\n";
        let obs = ObservationSeries::from_csv(text.as_bytes()).unwrap();
        assert_eq!(obs.years, vec![2000, 2001, 2002]);
        assert_eq!(obs.values[1], vec![Some(3.5), None]);
        let back = ObservationSeries::from_csv(obs.to_csv().unwrap().as_bytes()).unwrap();
        assert_eq!(back.values[..2], obs.values[..2]);
        let y = obs.aligned(2000, &["b".to_string(), "a".to_string(), "c".to_string()]);
        assert_eq!(y.values, vec![Some(7.0), Some(2.0), None]);
        assert!(ObservationSeries::from_csv("year,series,value\n1,a,1\n1,a,2\n".as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn normal_likelihood_finite_and_permutation_invariant(
            n in proptest::collection::vec(0.0..1000.0f64, 4),
            seed in 0u64..1000,
        ) {
            let s = model3_schema();
            let om = by_region(ErrorFamily::Normal { variance: VarianceSpec::Fixed { values: vec![Coef::Value(25.0), Coef::Value(4.0)] } });
            let c = om.compile(&s, &[]).unwrap();
            let mut rng = stream(seed, Component::Observe, 0, 0);
            let y = c.simulate(&n, &[], &[], &mut rng).unwrap();
            let ll = c.log_likelihood(&YearObservation::complete(&y), &n, &[]).unwrap();
            prop_assert!(ll.is_finite());
            let swapped = ObservationModel {
                series: vec![om.series[1].clone(), om.series[0].clone()],
                family: ErrorFamily::Normal { variance: VarianceSpec::Fixed { values: vec![Coef::Value(4.0), Coef::Value(25.0)] } },
            };
            let ll2 = log_likelihood(&swapped, &s, &[], &YearObservation::complete(&[y[1], y[0]]), &n, &[]).unwrap();
            prop_assert!((ll - ll2).abs() < 1e-12);
        }
    }
}
