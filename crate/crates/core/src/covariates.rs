//! Annual covariate streams, optionally resolved by region.

use std::collections::BTreeMap;
use std::io::Read;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CovariateStream {
    pub name: String,
    /// Keyed by `(year, region)`; `None` marks a value shared by all regions.
    pub values: BTreeMap<(i32, Option<String>), f64>,
}

impl CovariateStream {
    pub fn get(&self, year: i32, region: Option<&str>) -> Option<f64> {
        if let Some(r) = region {
            if let Some(v) = self.values.get(&(year, Some(r.to_string()))) {
                return Some(*v);
            }
        }
        self.values.get(&(year, None)).copied()
    }

    pub fn is_regional(&self) -> bool {
        self.values.keys().any(|(_, r)| r.is_some())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Covariates {
    pub streams: BTreeMap<String, CovariateStream>,
}

impl Covariates {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, year: i32, region: Option<&str>, value: f64) {
        self.streams
            .entry(name.to_string())
            .or_insert_with(|| CovariateStream { name: name.to_string(), values: BTreeMap::new() })
            .values
            .insert((year, region.map(str::to_string)), value);
    }

    pub fn get(&self, name: &str, year: i32, region: Option<&str>) -> Result<f64> {
        let stream = self
            .streams
            .get(name)
            .ok_or_else(|| Error::Data(format!("covariate `{name}` not supplied")))?;
        stream.get(year, region).ok_or_else(|| match region {
            Some(r) => Error::Data(format!("covariate `{name}` has no value for {year} in `{r}`")),
            None => Error::Data(format!("covariate `{name}` has no value for {year}")),
        })
    }

    /// Values from `overrides` replace or extend this set.
    pub fn merged(&self, overrides: &Covariates) -> Covariates {
        let mut out = self.clone();
        for (name, s) in &overrides.streams {
            for ((year, region), v) in &s.values {
                out.insert(name, *year, region.as_deref(), *v);
            }
        }
        out
    }

    /// Every year in `years` must resolve, for each region in `regions`
    /// when the stream is regional.
    pub fn check_coverage(&self, name: &str, years: &[i32], regions: &[String]) -> Result<()> {
        let stream = self
            .streams
            .get(name)
            .ok_or_else(|| Error::Data(format!("covariate `{name}` not supplied")))?;
        for &y in years {
            if stream.is_regional() && !regions.is_empty() {
                for r in regions {
                    self.get(name, y, Some(r))?;
                }
            } else {
                self.get(name, y, None)?;
            }
        }
        Ok(())
    }

    /// Parse CSV with header `year,[region,]name,value`.
    pub fn from_csv<R: Read>(reader: R) -> Result<Covariates> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.to_lowercase()).collect();
        let col = |n: &str| headers.iter().position(|h| h == n);
        let (year, name, value) = match (col("year"), col("name"), col("value")) {
            (Some(y), Some(n), Some(v)) => (y, n, v),
            _ => {
                return Err(Error::Data(
                    "covariate CSV needs columns year, name, value (region optional)".into(),
                ))
            }
        };
        let region = col("region");
        let mut out = Covariates::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let field = |i: usize| rec.get(i).unwrap_or("");
            let y: i32 = field(year)
                .parse()
                .map_err(|_| Error::Data(format!("covariate row {}: bad year", line + 2)))?;
            let v: f64 = field(value)
                .parse()
                .map_err(|_| Error::Data(format!("covariate row {}: bad value", line + 2)))?;
            let r = region.map(field).filter(|s| !s.is_empty());
            out.insert(field(name), y, r, v);
        }
        Ok(out)
    }

    pub fn to_csv(&self) -> Result<String> {
        let regional = self.streams.values().any(CovariateStream::is_regional);
        let mut w = csv::Writer::from_writer(Vec::new());
        if regional {
            w.write_record(["year", "region", "name", "value"])?;
        } else {
            w.write_record(["year", "name", "value"])?;
        }
        for s in self.streams.values() {
            for ((y, r), v) in &s.values {
                if regional {
                    w.write_record([y.to_string(), r.clone().unwrap_or_default(), s.name.clone(), v.to_string()])?;
                } else {
                    w.write_record([y.to_string(), s.name.clone(), v.to_string()])?;
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

    #[test]
    fn csv_regional_and_national() {
        let text = "year,region,name,value\n2000,north,salmon,1.5\n2000,,staff,3\n2001,north,salmon,2\n";
        let c = Covariates::from_csv(text.as_bytes()).unwrap();
        assert_eq!(c.get("salmon", 2000, Some("north")).unwrap(), 1.5);
        assert_eq!(c.get("staff", 2000, Some("north")).unwrap(), 3.0);
        assert!(c.get("salmon", 2002, Some("north")).is_err());
        assert!(c.get("salmon", 2000, Some("south")).is_err());
        assert!(c.get("rain", 2000, None).is_err());
        let again = Covariates::from_csv(c.to_csv().unwrap().as_bytes()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn coverage_check() {
        let c = Covariates::from_csv("year,name,value\n1,x,0\n2,x,1\n".as_bytes()).unwrap();
        assert!(c.check_coverage("x", &[1, 2], &[]).is_ok());
        assert!(matches!(c.check_coverage("x", &[1, 3], &[]), Err(Error::Data(_))));
    }
}
