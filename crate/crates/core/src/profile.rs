//! Population profiles, their plateau traces, and the parameter pair.
//!
//! A finite population is a step profile on the cell interval `(0, 1]`:
//! cluster `n` covers a half-open interval of length `lengths[n]` and every
//! cell in it carries the expression level `levels[n]`. Clusters are ordered
//! by cell label, so a well-formed profile has strictly increasing levels and
//! the last cluster at saturation (level 1).
//!
//! Cells are never enumerated; every integral over `(0, 1]` reduces to a
//! finite sum over clusters or plateaus.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{DefireError, Result};

/// Equality tolerance for invariant checks (normalization, contiguity).
pub const TOL: f64 = 1e-12;

/// Coupling `epsilon` and firing threshold `eta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub epsilon: f64,
    pub eta: f64,
}

impl Params {
    /// Checked constructor: `0 < eta < 1` and `0 < epsilon < 1/eta`.
    pub fn new(epsilon: f64, eta: f64) -> Result<Self> {
        let params = Self { epsilon, eta };
        params.check()?;
        Ok(params)
    }

    pub fn check(&self) -> Result<()> {
        if !(self.eta.is_finite() && self.eta > 0.0 && self.eta < 1.0) {
            return Err(DefireError::EtaOutOfRange(self.eta));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0 && self.epsilon * self.eta < 1.0) {
            return Err(DefireError::EpsilonOutOfRange {
                epsilon: self.epsilon,
                eta: self.eta,
            });
        }
        Ok(())
    }

    /// Diffusion weight `mu = epsilon * eta`, always in `(0, 1)` for valid parameters.
    pub fn mu(&self) -> f64 {
        self.epsilon * self.eta
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProfile {
    lengths: Vec<f64>,
    levels: Vec<f64>,
}

impl TryFrom<RawProfile> for StepProfile {
    type Error = DefireError;

    fn try_from(raw: RawProfile) -> Result<Self> {
        StepProfile::new(raw.lengths, raw.levels)
    }
}

/// Piecewise-constant, left-continuous population profile.
///
/// Construction only checks the shape (matching non-empty, finite lists).
/// Semantic assumptions are checked by [`validate_profile`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawProfile")]
pub struct StepProfile {
    lengths: Vec<f64>,
    levels: Vec<f64>,
}

impl StepProfile {
    pub fn new(lengths: Vec<f64>, levels: Vec<f64>) -> Result<Self> {
        if lengths.is_empty() {
            return Err(DefireError::MalformedProfile("no clusters".into()));
        }
        if lengths.len() != levels.len() {
            return Err(DefireError::MalformedProfile(format!(
                "{} lengths but {} levels",
                lengths.len(),
                levels.len()
            )));
        }
        if lengths.iter().chain(&levels).any(|v| !v.is_finite()) {
            return Err(DefireError::MalformedProfile("non-finite entry".into()));
        }
        Ok(Self { lengths, levels })
    }

    /// Fully synchronized population: one cluster at saturation.
    pub fn uniform() -> Self {
        Self {
            lengths: vec![1.0],
            levels: vec![1.0],
        }
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    /// Number of clusters.
    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Population mean `∫ u`.
    pub fn mean(&self) -> f64 {
        self.lengths
            .iter()
            .zip(&self.levels)
            .map(|(l, u)| l * u)
            .sum()
    }

    /// Right cell boundary of every cluster; the last one is pinned to 1.
    pub fn boundaries(&self) -> Vec<f64> {
        cumulative(&self.lengths)
    }

    pub(crate) fn from_parts_unchecked(lengths: Vec<f64>, levels: Vec<f64>) -> Self {
        debug_assert_eq!(lengths.len(), levels.len());
        Self { lengths, levels }
    }
}

/// Cumulative right endpoints; a final sum within [`TOL`] of 1 is snapped to 1.
pub(crate) fn cumulative(lengths: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out: Vec<f64> = lengths
        .iter()
        .map(|l| {
            acc += l;
            acc
        })
        .collect();
    if let Some(last) = out.last_mut() {
        if (*last - 1.0).abs() <= TOL {
            *last = 1.0;
        }
    }
    out
}

/// One violated modelling assumption.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    EtaOutOfRange { eta: f64 },
    EpsilonOutOfRange { epsilon: f64, eta: f64 },
    NonPositiveLength { cluster: usize, length: f64 },
    LengthsNotNormalized { total: f64 },
    LevelOutOfRange { cluster: usize, level: f64 },
    LevelsNotIncreasing { cluster: usize },
    TopLevelNotSaturated { level: f64 },
    RepressorAtThreshold { cluster: usize, repressor: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EtaOutOfRange { eta } => write!(f, "eta out of range ({eta})"),
            Violation::EpsilonOutOfRange { epsilon, eta } => {
                write!(
                    f,
                    "epsilon out of range (epsilon = {epsilon}, 1/eta = {})",
                    1.0 / eta
                )
            }
            Violation::NonPositiveLength { cluster, length } => {
                write!(f, "cluster {cluster} has non-positive length {length}")
            }
            Violation::LengthsNotNormalized { total } => {
                write!(f, "lengths sum to {total}, not 1")
            }
            Violation::LevelOutOfRange { cluster, level } => {
                write!(f, "cluster {cluster} level {level} outside (0, 1]")
            }
            Violation::LevelsNotIncreasing { cluster } => {
                write!(f, "levels not strictly increasing at cluster {cluster}")
            }
            Violation::TopLevelNotSaturated { level } => {
                write!(f, "last level is {level}, expected 1")
            }
            Violation::RepressorAtThreshold { cluster, repressor } => {
                write!(
                    f,
                    "Mu(0+0) ≤ η: repressor level {repressor} at cluster {cluster}"
                )
            }
        }
    }
}

/// Outcome of [`validate_profile`]; empty means every assumption holds.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            Err(DefireError::InvalidProfile(self))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Checks the profile and parameter assumptions the dynamics relies on.
///
/// Every violated assumption is listed. The repressor condition is only
/// evaluated when the parameters themselves are admissible.
pub fn validate_profile(profile: &StepProfile, params: &Params) -> ValidationReport {
    let mut violations = Vec::new();

    let params_ok = match params.check() {
        Ok(()) => true,
        Err(DefireError::EtaOutOfRange(eta)) => {
            violations.push(Violation::EtaOutOfRange { eta });
            false
        }
        Err(_) => {
            violations.push(Violation::EpsilonOutOfRange {
                epsilon: params.epsilon,
                eta: params.eta,
            });
            false
        }
    };

    for (cluster, &length) in profile.lengths.iter().enumerate() {
        if length <= 0.0 {
            violations.push(Violation::NonPositiveLength { cluster, length });
        }
    }
    let total: f64 = profile.lengths.iter().sum();
    if (total - 1.0).abs() > TOL {
        violations.push(Violation::LengthsNotNormalized { total });
    }
    for (cluster, &level) in profile.levels.iter().enumerate() {
        if !(level > 0.0 && level <= 1.0) {
            violations.push(Violation::LevelOutOfRange { cluster, level });
        }
    }
    for (cluster, pair) in profile.levels.windows(2).enumerate() {
        if pair[1] <= pair[0] {
            violations.push(Violation::LevelsNotIncreasing {
                cluster: cluster + 1,
            });
        }
    }
    let top = *profile.levels.last().expect("profiles are non-empty");
    if (top - 1.0).abs() > TOL {
        violations.push(Violation::TopLevelNotSaturated { level: top });
    }

    if params_ok {
        let mu = params.mu();
        let mean = profile.mean();
        for (cluster, &level) in profile.levels.iter().enumerate() {
            let repressor = (1.0 - mu) * level + mu * mean;
            if repressor <= params.eta {
                violations.push(Violation::RepressorAtThreshold { cluster, repressor });
            }
        }
    }

    ValidationReport { violations }
}

/// Cyclic relabelling: cluster `k` becomes the first cluster.
pub fn rotate_profile(profile: &StepProfile, k: usize) -> Result<StepProfile> {
    let count = profile.len();
    if k >= count {
        return Err(DefireError::RotationOutOfRange { k, count });
    }
    let mut lengths = profile.lengths.clone();
    let mut levels = profile.levels.clone();
    lengths.rotate_left(k);
    levels.rotate_left(k);
    Ok(StepProfile { lengths, levels })
}

/// `L¹` distance over `(0, 1]` after refining both partitions to their
/// merged boundary set.
pub fn l1_distance(p: &StepProfile, q: &StepProfile) -> Result<f64> {
    let left: f64 = p.lengths.iter().sum();
    let right: f64 = q.lengths.iter().sum();
    if (left - right).abs() > TOL {
        return Err(DefireError::PartitionMismatch { left, right });
    }
    let pb = p.boundaries();
    let qb = q.boundaries();
    let (mut i, mut j) = (0, 0);
    let mut start = 0.0;
    let mut total = 0.0;
    while i < pb.len() && j < qb.len() {
        let end = pb[i].min(qb[j]);
        total += (end - start) * (p.levels[i] - q.levels[j]).abs();
        start = end;
        // Boundaries closer than TOL are the same cut.
        if pb[i] <= end + TOL {
            i += 1;
        }
        if qb[j] <= end + TOL {
            j += 1;
        }
    }
    Ok(total)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTrace {
    plateaus: Vec<(f64, f64)>,
}

impl TryFrom<RawTrace> for Trace {
    type Error = DefireError;

    fn try_from(raw: RawTrace) -> Result<Self> {
        Trace::new(raw.plateaus)
    }
}

/// Lower trace of a non-decreasing profile, stored as its plateaus.
///
/// Each plateau `(a, b]` maps every cell in it to `a` (lower trace) or `b`
/// (upper trace). Cells outside all plateaus are fixed points of both.
/// A step profile yields plateaus that tile `(0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTrace")]
pub struct Trace {
    plateaus: Vec<(f64, f64)>,
}

impl Trace {
    pub fn new(plateaus: Vec<(f64, f64)>) -> Result<Self> {
        let mut prev_end = 0.0;
        for (i, &(a, b)) in plateaus.iter().enumerate() {
            if !(a.is_finite() && b.is_finite()) {
                return Err(DefireError::MalformedTrace(format!(
                    "plateau {i} is not finite"
                )));
            }
            if !(a >= 0.0 && a < b && b <= 1.0 + TOL) {
                return Err(DefireError::MalformedTrace(format!(
                    "plateau {i} = ({a}, {b}] is not a subinterval of (0, 1]"
                )));
            }
            if a < prev_end - TOL {
                return Err(DefireError::MalformedTrace(format!(
                    "plateau {i} overlaps or precedes its predecessor"
                )));
            }
            prev_end = b;
        }
        let mut plateaus = plateaus;
        if let Some(last) = plateaus.last_mut() {
            last.1 = last.1.min(1.0);
        }
        Ok(Self { plateaus })
    }

    /// Trace of the strictly increasing profile: no plateaus.
    pub fn identity() -> Self {
        Self {
            plateaus: Vec::new(),
        }
    }

    /// Plateaus tiling `(0, 1]` with the given lengths.
    pub fn from_lengths(lengths: &[f64]) -> Self {
        let ends = cumulative(lengths);
        let mut start = 0.0;
        let plateaus = ends
            .into_iter()
            .map(|end| {
                let p = (start, end);
                start = end;
                p
            })
            .collect();
        Self { plateaus }
    }

    pub fn plateaus(&self) -> &[(f64, f64)] {
        &self.plateaus
    }

    /// Index of the plateau `(a, b]` containing `x`.
    pub fn locate(&self, x: f64) -> Option<usize> {
        let idx = self.plateaus.partition_point(|&(_, b)| b < x);
        match self.plateaus.get(idx) {
            Some(&(a, _)) if a < x => Some(idx),
            _ => None,
        }
    }

    /// Index of the plateau `[a, b)` containing `x`, for right limits.
    fn locate_right(&self, x: f64) -> Option<usize> {
        let idx = self.plateaus.partition_point(|&(_, b)| b <= x);
        match self.plateaus.get(idx) {
            Some(&(a, _)) if a <= x => Some(idx),
            _ => None,
        }
    }

    pub fn lower(&self, x: f64) -> f64 {
        self.locate(x).map_or(x, |i| self.plateaus[i].0)
    }

    pub fn upper(&self, x: f64) -> f64 {
        self.locate(x).map_or(x, |i| self.plateaus[i].1)
    }

    /// `lower(x + 0)`.
    pub fn lower_right_limit(&self, x: f64) -> f64 {
        self.locate_right(x).map_or(x, |i| self.plateaus[i].0)
    }

    /// `upper(x + 0)`.
    pub fn upper_right_limit(&self, x: f64) -> f64 {
        self.locate_right(x).map_or(x, |i| self.plateaus[i].1)
    }

    /// `∫₀¹ lower(x) dx`.
    pub fn lower_integral(&self) -> f64 {
        let plateau: f64 = self.plateaus.iter().map(|&(a, b)| a * (b - a)).sum();
        plateau + self.free_integral()
    }

    /// `∫₀¹ upper(x) dx`.
    pub fn upper_integral(&self) -> f64 {
        let plateau: f64 = self.plateaus.iter().map(|&(a, b)| b * (b - a)).sum();
        plateau + self.free_integral()
    }

    /// `∫ x dx` over the cells outside every plateau.
    fn free_integral(&self) -> f64 {
        let mut total = 0.0;
        let mut prev = 0.0;
        for &(a, b) in &self.plateaus {
            if a > prev {
                total += 0.5 * (a * a - prev * prev);
            }
            prev = b;
        }
        if prev < 1.0 {
            total += 0.5 * (1.0 - prev * prev);
        }
        total
    }

    /// True when the plateaus tile `(0, 1]`, i.e. the trace of a step profile.
    pub fn is_partition(&self) -> bool {
        let mut prev = 0.0;
        for &(a, b) in &self.plateaus {
            if (a - prev).abs() > TOL {
                return false;
            }
            prev = b;
        }
        !self.plateaus.is_empty() && (prev - 1.0).abs() <= TOL
    }

    /// Plateau lengths, or `None` when the trace is not a partition.
    pub fn lengths(&self) -> Option<Vec<f64>> {
        self.is_partition()
            .then(|| self.plateaus.iter().map(|&(a, b)| b - a).collect())
    }

    /// Lower-trace value on each plateau.
    pub fn lower_values(&self) -> Vec<f64> {
        self.plateaus.iter().map(|&(a, _)| a).collect()
    }

    /// Upper-trace value on each plateau.
    pub fn upper_values(&self) -> Vec<f64> {
        self.plateaus.iter().map(|&(_, b)| b).collect()
    }
}

/// Traces of a step profile: every cluster is a plateau.
///
/// The returned value answers both lower and upper trace queries.
pub fn compute_traces(profile: &StepProfile) -> Trace {
    Trace::from_lengths(&profile.lengths)
}

/// `∫₀¹ lower(x) dx`, the quantity entering the period formulas.
pub fn trace_integral(trace: &Trace) -> f64 {
    trace.lower_integral()
}
