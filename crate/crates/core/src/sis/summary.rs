//! Weighted summaries of particle ensembles.

use serde::{Deserialize, Serialize};

pub const LOWER: f64 = 0.025;
pub const UPPER: f64 = 0.975;

/// Per-cell posterior mean and 2.5 / 97.5 percentiles for one year.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YearSummary {
    pub year: i32,
    pub t: u32,
    pub mean: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Smallest value whose cumulative weight reaches `q`.
pub fn weighted_quantile(pairs: &mut [(f64, f64)], q: f64) -> f64 {
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    let target = q * total;
    let mut cum = 0.0;
    for &(x, w) in pairs.iter() {
        cum += w;
        if cum >= target && w > 0.0 {
            return x;
        }
    }
    pairs.iter().rev().find(|p| p.1 > 0.0).map_or(f64::NAN, |p| p.0)
}

/// Mean and the two band quantiles of one column.
pub fn column_summary(values: impl Iterator<Item = f64>, weights: &[f64]) -> (f64, f64, f64) {
    let mut pairs: Vec<(f64, f64)> = values.zip(weights.iter().copied()).collect();
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    let mean = pairs.iter().map(|p| p.0 * p.1).sum::<f64>() / total;
    let lo = weighted_quantile(&mut pairs, LOWER);
    let hi = weighted_quantile(&mut pairs, UPPER);
    (mean, lo, hi)
}

/// Summarize the rows `states[r]` (each of length `d`) under `weights`.
pub fn summarize<'a>(year: i32, t: u32, d: usize, states: impl Fn(usize) -> &'a [f64], weights: &[f64]) -> YearSummary {
    let mut s = YearSummary { year, t, mean: Vec::with_capacity(d), lower: Vec::with_capacity(d), upper: Vec::with_capacity(d) };
    for c in 0..d {
        let (m, lo, hi) = column_summary((0..weights.len()).map(|r| states(r)[c]), weights);
        s.mean.push(m);
        s.lower.push(lo);
        s.upper.push(hi);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_of_uniform_grid() {
        let vals: Vec<f64> = (1..=1000).map(f64::from).collect();
        let w = vec![1.0; 1000];
        let (m, lo, hi) = column_summary(vals.into_iter(), &w);
        assert_eq!(m, 500.5);
        assert_eq!(lo, 25.0);
        assert_eq!(hi, 975.0);
    }

    #[test]
    fn zero_weights_ignored() {
        let (m, lo, hi) = column_summary([1.0, 100.0, 3.0].into_iter(), &[0.5, 0.0, 0.5]);
        assert_eq!(m, 2.0);
        assert_eq!(lo, 1.0);
        assert_eq!(hi, 3.0);
    }
}
