use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schema::StateSchema;

/// Largest count representable exactly in integer mode.
pub const MAX_COUNT: f64 = 9_007_199_254_740_992.0;

/// Integer counts (demographic stochasticity) or real-valued abundance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StateMode {
    #[default]
    Integer,
    Real,
}

/// Counts per cell after process `stage` of year `t` (`stage == 0` is the
/// start-of-year state n_{t-1}).
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub values: Vec<f64>,
    pub mode: StateMode,
    pub t: u32,
    pub stage: usize,
}

impl StateVector {
    pub fn new(schema: &StateSchema, values: Vec<f64>, mode: StateMode) -> Result<Self> {
        let v = StateVector { values, mode, t: 0, stage: 0 };
        v.check(schema)?;
        Ok(v)
    }

    pub fn zeros(schema: &StateSchema, mode: StateMode) -> Self {
        StateVector { values: vec![0.0; schema.len()], mode, t: 0, stage: 0 }
    }

    pub fn at(mut self, t: u32, stage: usize) -> Self {
        self.t = t;
        self.stage = stage;
        self
    }

    pub fn check(&self, schema: &StateSchema) -> Result<()> {
        if self.values.len() != schema.len() {
            return Err(Error::Schema(format!(
                "state has {} cells, schema has {}",
                self.values.len(),
                schema.len()
            )));
        }
        check_values(&self.values, self.mode)
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub(crate) fn check_values(values: &[f64], mode: StateMode) -> Result<()> {
    for (i, &v) in values.iter().enumerate() {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::State(format!("cell {i} holds {v}")));
        }
        if mode == StateMode::Integer {
            if v.fract() != 0.0 {
                return Err(Error::State(format!("cell {i} holds non-integral {v}")));
            }
            if v > MAX_COUNT {
                return Err(Error::State(format!("cell {i} count {v} overflows")));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::Axis;

    #[test]
    fn validation() {
        let s = StateSchema::new(vec![Axis::new("age", &["0", "1"])]).unwrap();
        assert!(StateVector::new(&s, vec![1.0, 2.0], StateMode::Integer).is_ok());
        assert!(StateVector::new(&s, vec![1.5, 2.0], StateMode::Integer).is_err());
        assert!(StateVector::new(&s, vec![1.5, 2.0], StateMode::Real).is_ok());
        assert!(StateVector::new(&s, vec![-1.0, 2.0], StateMode::Real).is_err());
        assert!(StateVector::new(&s, vec![1.0], StateMode::Real).is_err());
        assert!(StateVector::new(&s, vec![1e17, 0.0], StateMode::Integer).is_err());
    }
}
