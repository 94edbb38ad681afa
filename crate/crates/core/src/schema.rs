//! State schemas: the categorical axes that classify individuals.
//!
//! Cells are ordered row-major over the axes in declaration order: the last
//! declared axis varies fastest. Every matrix and vector in the crate uses
//! this ordering.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One categorical axis (age, stage, region, sex, ...).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub levels: Vec<String>,
}

impl Axis {
    pub fn new(name: impl Into<String>, levels: &[&str]) -> Self {
        Axis {
            name: name.into(),
            levels: levels.iter().map(|s| s.to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSchema {
    pub axes: Vec<Axis>,
}

impl StateSchema {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        let schema = StateSchema { axes };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        if self.axes.is_empty() {
            return Err(Error::Schema("schema needs at least one axis".into()));
        }
        for (i, axis) in self.axes.iter().enumerate() {
            if axis.name.is_empty() {
                return Err(Error::Schema(format!("axis {i} has an empty name")));
            }
            if self.axes[..i].iter().any(|a| a.name == axis.name) {
                return Err(Error::Schema(format!("duplicate axis `{}`", axis.name)));
            }
            if axis.levels.is_empty() {
                return Err(Error::Schema(format!("axis `{}` has no levels", axis.name)));
            }
            for (j, level) in axis.levels.iter().enumerate() {
                if level.is_empty() {
                    return Err(Error::Schema(format!(
                        "axis `{}` level {j} is unlabeled",
                        axis.name
                    )));
                }
                if axis.levels[..j].contains(level) {
                    return Err(Error::Schema(format!(
                        "axis `{}` repeats level `{level}`",
                        axis.name
                    )));
                }
            }
        }
        Ok(())
    }

    /// Total number of cells (product of axis sizes).
    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.levels.len()).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn axis_index(&self, name: &str) -> Option<usize> {
        self.axes.iter().position(|a| a.name == name)
    }

    pub fn require_axis(&self, name: &str) -> Result<usize> {
        self.axis_index(name)
            .ok_or_else(|| Error::Schema(format!("unknown axis `{name}`")))
    }

    pub fn level_index(&self, axis: usize, level: &str) -> Result<usize> {
        self.axes[axis]
            .levels
            .iter()
            .position(|l| l == level)
            .ok_or_else(|| {
                Error::Schema(format!(
                    "axis `{}` has no level `{level}`",
                    self.axes[axis].name
                ))
            })
    }

    fn stride(&self, axis: usize) -> usize {
        self.axes[axis + 1..].iter().map(|a| a.levels.len()).product()
    }

    /// Per-axis level indices of a cell.
    pub fn coords(&self, cell: usize) -> Vec<usize> {
        let mut rem = cell;
        let mut out = vec![0; self.axes.len()];
        for i in (0..self.axes.len()).rev() {
            let n = self.axes[i].levels.len();
            out[i] = rem % n;
            rem /= n;
        }
        out
    }

    pub fn cell(&self, coords: &[usize]) -> usize {
        coords
            .iter()
            .zip(&self.axes)
            .fold(0, |acc, (&c, a)| acc * a.levels.len() + c)
    }

    pub fn level_of(&self, cell: usize, axis: usize) -> usize {
        (cell / self.stride(axis)) % self.axes[axis].levels.len()
    }

    pub fn level_name(&self, cell: usize, axis: usize) -> &str {
        &self.axes[axis].levels[self.level_of(cell, axis)]
    }

    /// The cell reached by changing one axis level and keeping the others.
    pub fn with_level(&self, cell: usize, axis: usize, level: usize) -> usize {
        let stride = self.stride(axis);
        let current = self.level_of(cell, axis);
        cell - current * stride + level * stride
    }

    /// Human-readable cell label, e.g. `region=north/age=0`.
    pub fn cell_label(&self, cell: usize) -> String {
        self.coords(cell)
            .iter()
            .zip(&self.axes)
            .map(|(&c, a)| format!("{}={}", a.name, a.levels[c]))
            .collect::<Vec<_>>()
            .join("/")
    }

    pub fn cell_labels(&self) -> Vec<String> {
        (0..self.len()).map(|c| self.cell_label(c)).collect()
    }
}

/// Selects cells by restricting axes to listed levels. An empty filter
/// selects every cell; unnamed axes are unrestricted.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CellFilter(pub BTreeMap<String, Vec<String>>);

impl CellFilter {
    pub fn all() -> Self {
        CellFilter::default()
    }

    pub fn on(axis: &str, levels: &[&str]) -> Self {
        let mut m = BTreeMap::new();
        m.insert(axis.to_string(), levels.iter().map(|s| s.to_string()).collect());
        CellFilter(m)
    }

    pub fn and(mut self, axis: &str, levels: &[&str]) -> Self {
        self.0
            .insert(axis.to_string(), levels.iter().map(|s| s.to_string()).collect());
        self
    }

    pub fn is_all(&self) -> bool {
        self.0.is_empty()
    }

    /// Boolean mask over schema cells.
    pub fn mask(&self, schema: &StateSchema) -> Result<Vec<bool>> {
        let mut allowed: Vec<Option<Vec<bool>>> = vec![None; schema.axes.len()];
        for (axis_name, levels) in &self.0 {
            let axis = schema.require_axis(axis_name)?;
            let mut keep = vec![false; schema.axes[axis].levels.len()];
            for level in levels {
                keep[schema.level_index(axis, level)?] = true;
            }
            allowed[axis] = Some(keep);
        }
        Ok((0..schema.len())
            .map(|cell| {
                schema.coords(cell).iter().enumerate().all(|(axis, &lvl)| {
                    allowed[axis].as_ref().is_none_or(|keep| keep[lvl])
                })
            })
            .collect())
    }

    pub fn cells(&self, schema: &StateSchema) -> Result<Vec<usize>> {
        Ok(self
            .mask(schema)?
            .into_iter()
            .enumerate()
            .filter_map(|(i, m)| m.then_some(i))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model3() -> StateSchema {
        StateSchema::new(vec![Axis::new("region", &["1", "2"]), Axis::new("age", &["0", "1"])])
            .unwrap()
    }

    #[test]
    fn row_major_order() {
        let s = model3();
        assert_eq!(s.len(), 4);
        assert_eq!(s.cell_label(0), "region=1/age=0");
        assert_eq!(s.cell_label(1), "region=1/age=1");
        assert_eq!(s.cell_label(2), "region=2/age=0");
        for c in 0..4 {
            assert_eq!(s.cell(&s.coords(c)), c);
        }
        assert_eq!(s.with_level(1, 0, 1), 3);
        assert_eq!(s.level_name(2, 0), "2");
    }

    #[test]
    fn filters() {
        let s = model3();
        assert_eq!(CellFilter::on("age", &["1"]).cells(&s).unwrap(), vec![1, 3]);
        assert_eq!(
            CellFilter::on("age", &["0"]).and("region", &["2"]).cells(&s).unwrap(),
            vec![2]
        );
        assert_eq!(CellFilter::all().cells(&s).unwrap().len(), 4);
        assert!(CellFilter::on("sex", &["f"]).cells(&s).is_err());
        assert!(CellFilter::on("age", &["9"]).cells(&s).is_err());
    }

    #[test]
    fn invalid_schemas() {
        assert!(StateSchema::new(vec![]).is_err());
        assert!(StateSchema::new(vec![Axis::new("a", &["x"]), Axis::new("a", &["y"])]).is_err());
        assert!(StateSchema::new(vec![Axis::new("a", &[])]).is_err());
        assert!(StateSchema::new(vec![Axis::new("a", &["x", "x"])]).is_err());
        assert!(StateSchema::new(vec![Axis::new("a", &[""])]).is_err());
    }
}
