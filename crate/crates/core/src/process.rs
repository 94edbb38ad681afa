//! Per-process operators.
//!
//! Each biological process (survival, aging, growth, movement, birth,
//! harvest, sex assignment) maps one state vector to the next. The
//! stochastic form draws binomial / multinomial / Poisson counts; the
//! expectation form is the linear map returned by [`expectation_matrix`].

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rates::{check_range, Coef, RateRange};
use crate::schema::{CellFilter, StateSchema};
use crate::state::{check_values, StateMode, StateVector, MAX_COUNT};

fn yes() -> bool {
    true
}

fn is_true(b: &bool) -> bool {
    *b
}

/// A literal rate value or the name of an entry in the model's rate table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RateRef {
    Value(f64),
    Rate(String),
}

impl From<&str> for RateRef {
    fn from(s: &str) -> Self {
        RateRef::Rate(s.to_string())
    }
}

impl From<f64> for RateRef {
    fn from(v: f64) -> Self {
        RateRef::Value(v)
    }
}

/// Binds a rate to a group of cells. Later bindings override earlier ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateBinding {
    #[serde(default, skip_serializing_if = "CellFilter::is_all")]
    pub cells: CellFilter,
    pub rate: RateRef,
}

impl RateBinding {
    pub fn all(rate: impl Into<RateRef>) -> Self {
        RateBinding { cells: CellFilter::all(), rate: rate.into() }
    }

    pub fn on(cells: CellFilter, rate: impl Into<RateRef>) -> Self {
        RateBinding { cells, rate: rate.into() }
    }
}

/// Destination probabilities for movement along an axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Transfer {
    /// Stay with probability `1 - rate`; otherwise spread evenly over the
    /// other levels.
    Symmetric { rate: RateRef },
    /// Full row-stochastic matrix, `rates[from][to]`.
    Matrix { rates: Vec<Vec<RateRef>> },
    /// Attractiveness-weighted movement, see [`density_distance_matrix`].
    DensityDistance(DensityDistance),
}

/// Movement driven by destination density and inter-site distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityDistance {
    pub distances: Vec<Vec<f64>>,
    pub capacity: Vec<Coef>,
    pub decay: Coef,
    pub density_weight: Coef,
    pub fidelity: Coef,
    /// State read for densities (0 = n_{t-1}, k = after process k).
    #[serde(default)]
    pub stage: usize,
    #[serde(default, skip_serializing_if = "CellFilter::is_all")]
    pub density_cells: CellFilter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProcessSpec {
    /// Per-cell binomial thinning by survival probability.
    Survival {
        #[serde(default = "yes", skip_serializing_if = "is_true")]
        stochastic: bool,
        rates: Vec<RateBinding>,
    },
    /// Per-cell binomial removal.
    Harvest {
        #[serde(default = "yes", skip_serializing_if = "is_true")]
        stochastic: bool,
        rates: Vec<RateBinding>,
    },
    /// Deterministic shift along `axis`. Without `map`, each level moves to
    /// the next and the last level absorbs.
    Aging {
        axis: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        map: Option<Vec<[String; 2]>>,
    },
    /// Binomial advance to the next level of `axis` with the bound probability.
    Growth {
        #[serde(default = "yes", skip_serializing_if = "is_true")]
        stochastic: bool,
        axis: String,
        rates: Vec<RateBinding>,
    },
    /// Multinomial reallocation of the selected cells across levels of `axis`.
    Movement {
        #[serde(default = "yes", skip_serializing_if = "is_true")]
        stochastic: bool,
        axis: String,
        #[serde(default, skip_serializing_if = "CellFilter::is_all")]
        cells: CellFilter,
        transfer: Transfer,
    },
    /// Poisson births from bound parent cells into the offspring cell
    /// (parent cell with the `offspring` axis levels substituted).
    Birth {
        #[serde(default = "yes", skip_serializing_if = "is_true")]
        stochastic: bool,
        offspring: BTreeMap<String, String>,
        rates: Vec<RateBinding>,
    },
    /// Binomial split of cells at level `from` of `axis` into level `to`.
    SexAssignment {
        #[serde(default = "yes", skip_serializing_if = "is_true")]
        stochastic: bool,
        axis: String,
        from: String,
        to: String,
        rates: Vec<RateBinding>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProcessKind {
    Survival,
    Harvest,
    Aging,
    Growth,
    Movement,
    Birth,
    SexAssignment,
}

impl ProcessKind {
    pub fn name(self) -> &'static str {
        match self {
            ProcessKind::Survival => "survival",
            ProcessKind::Harvest => "harvest",
            ProcessKind::Aging => "aging",
            ProcessKind::Growth => "growth",
            ProcessKind::Movement => "movement",
            ProcessKind::Birth => "birth",
            ProcessKind::SexAssignment => "sex_assignment",
        }
    }

    fn default_rate(self) -> f64 {
        match self {
            ProcessKind::Survival => 1.0,
            _ => 0.0,
        }
    }

    pub fn rate_range(self) -> RateRange {
        match self {
            ProcessKind::Birth => RateRange::NonNegative,
            _ => RateRange::Probability,
        }
    }
}

impl ProcessSpec {
    pub fn kind(&self) -> ProcessKind {
        match self {
            ProcessSpec::Survival { .. } => ProcessKind::Survival,
            ProcessSpec::Harvest { .. } => ProcessKind::Harvest,
            ProcessSpec::Aging { .. } => ProcessKind::Aging,
            ProcessSpec::Growth { .. } => ProcessKind::Growth,
            ProcessSpec::Movement { .. } => ProcessKind::Movement,
            ProcessSpec::Birth { .. } => ProcessKind::Birth,
            ProcessSpec::SexAssignment { .. } => ProcessKind::SexAssignment,
        }
    }

    pub fn is_stochastic(&self) -> bool {
        match self {
            ProcessSpec::Aging { .. } => false,
            ProcessSpec::Survival { stochastic, .. }
            | ProcessSpec::Harvest { stochastic, .. }
            | ProcessSpec::Growth { stochastic, .. }
            | ProcessSpec::Movement { stochastic, .. }
            | ProcessSpec::Birth { stochastic, .. }
            | ProcessSpec::SexAssignment { stochastic, .. } => *stochastic,
        }
    }

    pub fn bindings(&self) -> &[RateBinding] {
        match self {
            ProcessSpec::Survival { rates, .. }
            | ProcessSpec::Harvest { rates, .. }
            | ProcessSpec::Growth { rates, .. }
            | ProcessSpec::Birth { rates, .. }
            | ProcessSpec::SexAssignment { rates, .. } => rates,
            ProcessSpec::Aging { .. } | ProcessSpec::Movement { .. } => &[],
        }
    }

    pub fn survival(rates: Vec<RateBinding>) -> Self {
        ProcessSpec::Survival { stochastic: true, rates }
    }

    pub fn aging(axis: &str) -> Self {
        ProcessSpec::Aging { axis: axis.to_string(), map: None }
    }

    pub fn birth(offspring: &[(&str, &str)], rates: Vec<RateBinding>) -> Self {
        ProcessSpec::Birth {
            stochastic: true,
            offspring: offspring.iter().map(|(a, l)| (a.to_string(), l.to_string())).collect(),
            rates,
        }
    }
}

/// Structural data for a process, derived once from spec and schema.
#[derive(Debug, Clone)]
pub struct ProcessStructure {
    pub kind: ProcessKind,
    pub stochastic: bool,
    /// Target cell of each source cell (aging, growth, birth, sex
    /// assignment); identity for kinds without a structural map.
    pub dest: Vec<usize>,
    /// Cells the process acts on (movers, parents, cells able to advance).
    pub active: Vec<bool>,
    /// Axis along which movement happens.
    pub axis: Option<usize>,
}

impl ProcessStructure {
    pub fn new(spec: &ProcessSpec, schema: &StateSchema) -> Result<Self> {
        let d = schema.len();
        let kind = spec.kind();
        let identity: Vec<usize> = (0..d).collect();
        let (dest, active, axis) = match spec {
            ProcessSpec::Survival { .. } | ProcessSpec::Harvest { .. } => (identity, vec![true; d], None),
            ProcessSpec::Aging { axis, map } => {
                let a = schema.require_axis(axis)?;
                let n = schema.axes[a].levels.len();
                let level_map: Vec<usize> = match map {
                    None => (0..n).map(|l| (l + 1).min(n - 1)).collect(),
                    Some(pairs) => {
                        let mut m: Vec<Option<usize>> = vec![None; n];
                        for [from, to] in pairs {
                            let f = schema.level_index(a, from)?;
                            if m[f].is_some() {
                                return Err(Error::Config(format!("aging map lists level `{from}` twice")));
                            }
                            m[f] = Some(schema.level_index(a, to)?);
                        }
                        m.into_iter()
                            .enumerate()
                            .map(|(l, t)| {
                                t.ok_or_else(|| {
                                    Error::Config(format!(
                                        "aging map has no destination for level `{}`",
                                        schema.axes[a].levels[l]
                                    ))
                                })
                            })
                            .collect::<Result<_>>()?
                    }
                };
                let dest = (0..d).map(|c| schema.with_level(c, a, level_map[schema.level_of(c, a)])).collect();
                (dest, vec![true; d], Some(a))
            }
            ProcessSpec::Growth { axis, .. } => {
                let a = schema.require_axis(axis)?;
                let top = schema.axes[a].levels.len() - 1;
                let dest = (0..d).map(|c| schema.with_level(c, a, (schema.level_of(c, a) + 1).min(top))).collect();
                let active = (0..d).map(|c| schema.level_of(c, a) < top).collect();
                (dest, active, Some(a))
            }
            ProcessSpec::Movement { axis, cells, transfer, .. } => {
                let a = schema.require_axis(axis)?;
                let levels = schema.axes[a].levels.len();
                match transfer {
                    Transfer::Matrix { rates } => {
                        if rates.len() != levels || rates.iter().any(|r| r.len() != levels) {
                            return Err(Error::Config(format!("movement matrix must be {levels}x{levels}")));
                        }
                    }
                    Transfer::DensityDistance(dd) => {
                        if dd.distances.len() != levels
                            || dd.distances.iter().any(|r| r.len() != levels)
                            || dd.capacity.len() != levels
                        {
                            return Err(Error::Config(format!(
                                "density-distance movement needs {levels}x{levels} distances and {levels} capacities"
                            )));
                        }
                    }
                    Transfer::Symmetric { .. } => {}
                }
                (identity, cells.mask(schema)?, Some(a))
            }
            ProcessSpec::Birth { offspring, rates, .. } => {
                let mut subs = Vec::new();
                for (axis, level) in offspring {
                    let a = schema.require_axis(axis)?;
                    subs.push((a, schema.level_index(a, level)?));
                }
                let dest = (0..d)
                    .map(|c| subs.iter().fold(c, |cell, &(a, l)| schema.with_level(cell, a, l)))
                    .collect();
                (dest, bound_mask(rates, schema)?, None)
            }
            ProcessSpec::SexAssignment { axis, from, to, .. } => {
                let a = schema.require_axis(axis)?;
                let f = schema.level_index(a, from)?;
                let t = schema.level_index(a, to)?;
                let dest = (0..d).map(|c| if schema.level_of(c, a) == f { schema.with_level(c, a, t) } else { c }).collect();
                let active = (0..d).map(|c| schema.level_of(c, a) == f && f != t).collect();
                (dest, active, Some(a))
            }
        };
        Ok(ProcessStructure { kind, stochastic: spec.is_stochastic(), dest, active, axis })
    }
}

fn bound_mask(bindings: &[RateBinding], schema: &StateSchema) -> Result<Vec<bool>> {
    let mut mask = vec![false; schema.len()];
    for b in bindings {
        for (m, hit) in mask.iter_mut().zip(b.cells.mask(schema)?) {
            *m |= hit;
        }
    }
    Ok(mask)
}

/// For each cell, the binding (index into `bindings`) that applies to it.
pub(crate) fn binding_per_cell(bindings: &[RateBinding], schema: &StateSchema) -> Result<Vec<Option<usize>>> {
    let mut out = vec![None; schema.len()];
    for (i, b) in bindings.iter().enumerate() {
        for (slot, hit) in out.iter_mut().zip(b.cells.mask(schema)?) {
            if hit {
                *slot = Some(i);
            }
        }
    }
    Ok(out)
}

/// Rates of one process resolved for the current year and state.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedRates {
    /// One value per cell; cells without a binding carry the kind's
    /// neutral value (1 for survival, 0 otherwise).
    pub per_cell: Vec<f64>,
    /// Row-stochastic `transfer[from][to]` for movement.
    pub transfer: Option<Vec<Vec<f64>>>,
}

impl ResolvedRates {
    pub fn uniform(kind: ProcessKind, d: usize, value: Option<f64>) -> Self {
        ResolvedRates { per_cell: vec![value.unwrap_or(kind.default_rate()); d], transfer: None }
    }

    pub fn per_cell(values: Vec<f64>) -> Self {
        ResolvedRates { per_cell: values, transfer: None }
    }

    pub fn transfer(matrix: Vec<Vec<f64>>, d: usize) -> Self {
        ResolvedRates { per_cell: vec![0.0; d], transfer: Some(matrix) }
    }

    pub(crate) fn validate(&self, kind: ProcessKind, d: usize) -> Result<()> {
        if self.per_cell.len() != d {
            return Err(Error::Schema(format!("{} rates for {d} cells", self.per_cell.len())));
        }
        for (c, &r) in self.per_cell.iter().enumerate() {
            check_range(r, kind.rate_range(), &format!("{} rate of cell {c}", kind.name()))?;
        }
        if kind == ProcessKind::Movement {
            let t = self
                .transfer
                .as_ref()
                .ok_or_else(|| Error::Config("movement needs a transfer matrix".into()))?;
            for (i, row) in t.iter().enumerate() {
                for &p in row {
                    check_range(p, RateRange::Probability, &format!("movement probability from level {i}"))?;
                }
                let s: f64 = row.iter().sum();
                if (s - 1.0).abs() > 1e-9 {
                    return Err(Error::Domain(format!("movement row {i} sums to {s}")));
                }
            }
        }
        Ok(())
    }
}

/// How stochastic processes act on real-valued states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RealUpdate {
    /// Replace each draw by its expectation.
    #[default]
    Expectation,
    /// Normal draw with the matched mean and variance, clipped to the
    /// feasible range.
    Normal,
}

enum Draw {
    Sample,
    Mean,
    Gaussian,
}

fn draw_mode(structure: &ProcessStructure, mode: StateMode, real: RealUpdate) -> Draw {
    match (structure.stochastic, mode, real) {
        (false, _, _) => Draw::Mean,
        (true, StateMode::Integer, _) => Draw::Sample,
        (true, StateMode::Real, RealUpdate::Expectation) => Draw::Mean,
        (true, StateMode::Real, RealUpdate::Normal) => Draw::Gaussian,
    }
}

fn binomial<R: Rng + ?Sized>(n: f64, p: f64, how: &Draw, rng: &mut R) -> f64 {
    if n <= 0.0 || p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return n;
    }
    match how {
        Draw::Mean => n * p,
        Draw::Sample => Binomial::new(n as u64, p).expect("checked probability").sample(rng) as f64,
        Draw::Gaussian => {
            let z: f64 = StandardNormal.sample(rng);
            (n * p + (n * p * (1.0 - p)).sqrt() * z).clamp(0.0, n)
        }
    }
}

fn poisson<R: Rng + ?Sized>(mean: f64, how: &Draw, rng: &mut R) -> Result<f64> {
    if mean <= 0.0 {
        return Ok(0.0);
    }
    match how {
        Draw::Mean => Ok(mean),
        Draw::Sample => {
            if mean > MAX_COUNT {
                return Err(Error::State(format!("birth mean {mean} overflows integer counts")));
            }
            let x: f64 = Poisson::new(mean).map_err(|e| Error::State(e.to_string()))?.sample(rng);
            Ok(x)
        }
        Draw::Gaussian => {
            let z: f64 = StandardNormal.sample(rng);
            Ok((mean + mean.sqrt() * z).max(0.0))
        }
    }
}

/// Apply one process to `state` using precompiled structure.
pub fn apply_structure<R: Rng + ?Sized>(
    structure: &ProcessStructure,
    schema: &StateSchema,
    state: &[f64],
    mode: StateMode,
    real: RealUpdate,
    rates: &ResolvedRates,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let how = draw_mode(structure, mode, real);
    let r = &rates.per_cell;
    let mut out = state.to_vec();
    match structure.kind {
        ProcessKind::Survival => {
            for (c, o) in out.iter_mut().enumerate() {
                *o = binomial(state[c], r[c], &how, rng);
            }
        }
        ProcessKind::Harvest => {
            for (c, o) in out.iter_mut().enumerate() {
                *o = state[c] - binomial(state[c], r[c], &how, rng);
            }
        }
        ProcessKind::Aging => {
            out.iter_mut().for_each(|o| *o = 0.0);
            for (c, &n) in state.iter().enumerate() {
                out[structure.dest[c]] += n;
            }
        }
        ProcessKind::Growth | ProcessKind::SexAssignment => {
            for c in 0..state.len() {
                if structure.active[c] {
                    let k = binomial(state[c], r[c], &how, rng);
                    out[c] -= k;
                    out[structure.dest[c]] += k;
                }
            }
        }
        ProcessKind::Movement => {
            let axis = structure.axis.expect("movement has an axis");
            let t = rates.transfer.as_ref().expect("validated transfer");
            let levels = t.len();
            for c in 0..state.len() {
                if !structure.active[c] || state[c] <= 0.0 {
                    continue;
                }
                let row = &t[schema.level_of(c, axis)];
                out[c] -= state[c];
                // Sequential conditional binomials give an exact multinomial.
                let mut remaining = state[c];
                let mut mass = 1.0;
                for (j, &p) in row.iter().enumerate() {
                    let k = if j == levels - 1 || mass <= 0.0 {
                        remaining
                    } else {
                        binomial(remaining, (p / mass).min(1.0), &how, rng)
                    };
                    out[schema.with_level(c, axis, j)] += k;
                    remaining -= k;
                    mass -= p;
                    if remaining <= 0.0 {
                        break;
                    }
                }
            }
        }
        ProcessKind::Birth => {
            let mut means = vec![0.0; state.len()];
            for c in 0..state.len() {
                if structure.active[c] {
                    means[structure.dest[c]] += r[c] * state[c];
                }
            }
            for (b, &m) in means.iter().enumerate() {
                out[b] += poisson(m, &how, rng)?;
            }
        }
    }
    if mode == StateMode::Integer {
        if let Some(bad) = out.iter().find(|v| v.fract() != 0.0) {
            return Err(Error::State(format!(
                "deterministic {} produced non-integral count {bad} in integer mode",
                structure.kind.name()
            )));
        }
    }
    check_values(&out, mode)?;
    Ok(out)
}

/// Apply one process to a state vector.
pub fn apply_process<R: Rng + ?Sized>(
    spec: &ProcessSpec,
    schema: &StateSchema,
    state: &StateVector,
    rates: &ResolvedRates,
    real: RealUpdate,
    rng: &mut R,
) -> Result<StateVector> {
    state.check(schema)?;
    let structure = ProcessStructure::new(spec, schema)?;
    rates.validate(structure.kind, schema.len())?;
    let values = apply_structure(&structure, schema, &state.values, state.mode, real, rates, rng)?;
    Ok(StateVector { values, mode: state.mode, t: state.t, stage: state.stage + 1 })
}

/// Expected-value projection matrix, tagged with the processes it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionMatrix {
    pub matrix: DMatrix<f64>,
    pub provenance: Vec<String>,
}

impl ProjectionMatrix {
    pub fn identity(d: usize) -> Self {
        ProjectionMatrix { matrix: DMatrix::identity(d, d), provenance: Vec::new() }
    }

    /// `self` applied after `earlier`.
    pub fn after(&self, earlier: &ProjectionMatrix) -> ProjectionMatrix {
        let mut provenance = earlier.provenance.clone();
        provenance.extend(self.provenance.iter().cloned());
        ProjectionMatrix { matrix: &self.matrix * &earlier.matrix, provenance }
    }

    pub fn apply(&self, state: &[f64]) -> Vec<f64> {
        let v = nalgebra::DVector::from_column_slice(state);
        (&self.matrix * v).iter().copied().collect()
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

pub fn structure_matrix(structure: &ProcessStructure, schema: &StateSchema, rates: &ResolvedRates) -> DMatrix<f64> {
    let d = schema.len();
    let r = &rates.per_cell;
    let mut m = DMatrix::zeros(d, d);
    match structure.kind {
        ProcessKind::Survival => (0..d).for_each(|c| m[(c, c)] = r[c]),
        ProcessKind::Harvest => (0..d).for_each(|c| m[(c, c)] = 1.0 - r[c]),
        ProcessKind::Aging => (0..d).for_each(|c| m[(structure.dest[c], c)] += 1.0),
        ProcessKind::Growth | ProcessKind::SexAssignment => {
            for c in 0..d {
                if structure.active[c] {
                    m[(c, c)] += 1.0 - r[c];
                    m[(structure.dest[c], c)] += r[c];
                } else {
                    m[(c, c)] += 1.0;
                }
            }
        }
        ProcessKind::Movement => {
            let axis = structure.axis.expect("movement has an axis");
            let t = rates.transfer.as_ref().expect("validated transfer");
            for c in 0..d {
                if structure.active[c] {
                    for (j, &p) in t[schema.level_of(c, axis)].iter().enumerate() {
                        m[(schema.with_level(c, axis, j), c)] += p;
                    }
                } else {
                    m[(c, c)] = 1.0;
                }
            }
        }
        ProcessKind::Birth => {
            for c in 0..d {
                m[(c, c)] += 1.0;
                if structure.active[c] {
                    m[(structure.dest[c], c)] += r[c];
                }
            }
        }
    }
    m
}

/// The matrix M with `E[apply_process(state)] = M * state` for resolved rates.
pub fn expectation_matrix(spec: &ProcessSpec, schema: &StateSchema, rates: &ResolvedRates) -> Result<ProjectionMatrix> {
    let structure = ProcessStructure::new(spec, schema)?;
    rates.validate(structure.kind, schema.len())?;
    Ok(ProjectionMatrix {
        matrix: structure_matrix(&structure, schema, rates),
        provenance: vec![structure.kind.name().to_string()],
    })
}

/// Row-stochastic movement matrix from destination attractiveness
///
/// `a(i -> j) = exp(-decay * d_ij) * (capacity_j / max(count_j, eps))^density_weight * exp(fidelity * [i == j])`,
/// normalized per row. A row whose attractiveness is all zero (or not
/// finite) falls back to uniform.
pub fn density_distance_matrix(
    counts: &[f64],
    capacity: &[f64],
    distances: &[Vec<f64>],
    decay: f64,
    density_weight: f64,
    fidelity: f64,
) -> Vec<Vec<f64>> {
    const EPS: f64 = 1e-6;
    let l = counts.len();
    let log_pull: Vec<f64> = (0..l).map(|j| density_weight * (capacity[j] / counts[j].max(EPS)).ln()).collect();
    (0..l)
        .map(|i| {
            let logs: Vec<f64> = (0..l)
                .map(|j| {
                    let dist = if distances[i][j] == 0.0 { 0.0 } else { -decay * distances[i][j] };
                    let stay = if i == j { fidelity } else { 0.0 };
                    dist + log_pull[j] + stay
                })
                .collect();
            let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if !max.is_finite() {
                if max == f64::INFINITY {
                    let hits: Vec<bool> = logs.iter().map(|&x| x == f64::INFINITY).collect();
                    let n = hits.iter().filter(|&&h| h).count() as f64;
                    return hits.iter().map(|&h| if h { 1.0 / n } else { 0.0 }).collect();
                }
                return vec![1.0 / l as f64; l];
            }
            let w: Vec<f64> = logs.iter().map(|&x| (x - max).exp()).collect();
            let s: f64 = w.iter().sum();
            if !(s > 0.0 && s.is_finite()) {
                return vec![1.0 / l as f64; l];
            }
            w.iter().map(|x| x / s).collect()
        })
        .collect()
}
