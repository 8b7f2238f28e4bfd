//! Linearization of the firing maps: companion matrices built from the
//! branch coefficient vectors, the ratio bound on their joint spectral
//! radius, random product sampling, and decay rates measured on simulations.

use rayon::prelude::*;
use serde::Serialize;

use crate::engine::{Branch, CycleResult};
use crate::error::{DefireError, Result};
use crate::profile::{l1_distance, Params, StepProfile};
use crate::rng::Lcg64;

/// Orbit distances below this are rounding noise and end the fitted series.
pub const DISTANCE_FLOOR: f64 = 1e-14;

/// Slack on the sampled ratio-bound comparison.
pub const SAMPLE_SLACK: f64 = 1e-9;

/// Dense row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(DefireError::InvalidArgument("ragged matrix rows".into()));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn mul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(DefireError::InvalidArgument(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    fn scale(&mut self, factor: f64) {
        for v in &mut self.data {
            *v *= factor;
        }
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Which firing-map branches may occur along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchSet {
    PlusOnly,
    Both,
}

impl BranchSet {
    /// Without grouping (`epsilon <= 1`) only the plus branch occurs.
    pub fn for_params(params: &Params) -> Self {
        if params.epsilon <= 1.0 {
            BranchSet::PlusOnly
        } else {
            BranchSet::Both
        }
    }

    fn branches(self) -> &'static [Branch] {
        match self {
            BranchSet::PlusOnly => &[Branch::Plus],
            BranchSet::Both => &[Branch::Plus, Branch::Minus],
        }
    }
}

/// Coefficient vector `a = (a_1, …, a_K)` of one firing map, `K = N - 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompanionSpec {
    pub coeffs: Vec<f64>,
    pub source: Branch,
    pub rotation: usize,
}

fn check_lengths(lengths: &[f64]) -> Result<()> {
    if lengths.len() < 2 {
        return Err(DefireError::TooFewClusters {
            required: 2,
            got: lengths.len(),
        });
    }
    if lengths.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
        return Err(DefireError::MalformedProfile(
            "cluster lengths must be positive".into(),
        ));
    }
    let total: f64 = lengths.iter().sum();
    if (total - 1.0).abs() > crate::profile::TOL {
        return Err(DefireError::MalformedProfile(format!(
            "cluster lengths sum to {total}, expected 1"
        )));
    }
    Ok(())
}

/// Plus and minus coefficient vectors for the lengths rotated left by
/// `rotation`, `ℓ'_n = ℓ_{n + rotation mod N}`:
///
/// ```text
/// a_n(+) = 1 - mu Σ_{m > n} ℓ'_m
/// a_n(-) = Σ_{m = 2}^{n + 1} ℓ'_m / (1 - ℓ'_1)        n = 1 … N - 1
/// ```
pub fn branch_coeffs(
    lengths: &[f64],
    params: &Params,
    rotation: usize,
) -> Result<(CompanionSpec, CompanionSpec)> {
    check_lengths(lengths)?;
    let n = lengths.len();
    if rotation >= n {
        return Err(DefireError::RotationOutOfRange {
            k: rotation,
            count: n,
        });
    }
    let mut l = lengths.to_vec();
    l.rotate_left(rotation);
    let mu = params.mu();

    let plus = (1..n)
        .map(|k| 1.0 - mu * l[k..].iter().sum::<f64>())
        .collect();
    let head = 1.0 - l[0];
    let minus = (1..n)
        .map(|k| l[1..=k].iter().sum::<f64>() / head)
        .collect();
    Ok((
        CompanionSpec {
            coeffs: plus,
            source: Branch::Plus,
            rotation,
        },
        CompanionSpec {
            coeffs: minus,
            source: Branch::Minus,
            rotation,
        },
    ))
}

/// Every coefficient vector over all rotations and the selected branches.
pub fn companion_family(
    lengths: &[f64],
    params: &Params,
    branches: BranchSet,
) -> Result<Vec<CompanionSpec>> {
    let mut family = Vec::new();
    for j in 0..lengths.len() {
        let (plus, minus) = branch_coeffs(lengths, params, j)?;
        for branch in branches.branches() {
            family.push(match branch {
                Branch::Plus => plus.clone(),
                Branch::Minus => minus.clone(),
            });
        }
    }
    Ok(family)
}

/// Superdiagonal of ones with last row `-a`.
pub fn companion_matrix(spec: &CompanionSpec) -> Result<Matrix> {
    let k = spec.coeffs.len();
    if k == 0 {
        return Err(DefireError::InvalidArgument(
            "empty coefficient vector".into(),
        ));
    }
    let mut m = Matrix::zeros(k, k);
    for i in 0..k - 1 {
        m[(i, i + 1)] = 1.0;
    }
    for (j, a) in spec.coeffs.iter().enumerate() {
        m[(k - 1, j)] = -a;
    }
    Ok(m)
}

const SQUARINGS: u32 = 60;

/// Largest eigenvalue modulus as the Gelfand limit `‖mᵖ‖^(1/p)`.
///
/// The power is built by repeated squaring up to `p = 2⁶⁰`, renormalizing
/// after every step and accumulating the scale in log space, so the
/// polynomial prefactor of non-normal or defective matrices is flattened to
/// rounding level without overflow.
pub fn spectral_radius(m: &Matrix) -> Result<f64> {
    if !m.is_square() {
        return Err(DefireError::InvalidArgument(format!(
            "spectral radius of a non-square {}x{} matrix",
            m.rows(),
            m.cols()
        )));
    }
    if m.rows() == 0 {
        return Ok(0.0);
    }
    let mut b = m.clone();
    let norm = b.norm_inf();
    if norm == 0.0 {
        return Ok(0.0);
    }
    b.scale(1.0 / norm);
    // ‖mᵖ‖ = exp(log_norm) · ‖b‖ with ‖b‖ = 1 after normalization
    let mut log_norm = norm.ln();
    let mut p = 1.0_f64;
    for _ in 0..SQUARINGS {
        b = b.mul(&b)?;
        let c = b.norm_inf();
        if c == 0.0 {
            return Ok(0.0);
        }
        b.scale(1.0 / c);
        log_norm = 2.0 * log_norm + c.ln();
        p *= 2.0;
    }
    Ok((log_norm / p).exp())
}

/// Ratio bound on the joint spectral radius of the companion family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioBound {
    pub bound: f64,
    /// Set when the bound is at least 1 and so proves nothing.
    pub flagged: bool,
}

/// `max a_k / a_{k+1}` with `a_{K+1} = 1`, for one coefficient vector.
pub fn coeff_ratio(spec: &CompanionSpec) -> f64 {
    let a = &spec.coeffs;
    (0..a.len())
        .map(|k| a[k] / a.get(k + 1).copied().unwrap_or(1.0))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Maximum coefficient ratio over every rotation and the selected branches.
pub fn jsr_ratio_bound(
    lengths: &[f64],
    params: &Params,
    branches: BranchSet,
) -> Result<RatioBound> {
    let bound = companion_family(lengths, params, branches)?
        .iter()
        .map(coeff_ratio)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(RatioBound {
        bound,
        flagged: bound >= 1.0,
    })
}

/// `SpecRad(A_{w_k} ⋯ A_{w_1})^(1/k)` for each of `trials` random words.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductSamples {
    pub k: usize,
    pub values: Vec<f64>,
    pub bound: RatioBound,
}

impl ProductSamples {
    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Product of the family matrices picked by `word`, applied left to right.
pub fn word_product(matrices: &[Matrix], word: &[usize]) -> Result<Matrix> {
    let n = matrices
        .first()
        .ok_or_else(|| DefireError::InvalidArgument("empty matrix family".into()))?
        .rows();
    word.iter()
        .try_fold(Matrix::identity(n), |acc, &i| matrices[i].mul(&acc))
}

/// Samples uniform random words of length `k` over the companion family.
/// Trial `t` draws from its own generator seeded with `seed + t`. Fails if
/// any sample exceeds the ratio bound by more than [`SAMPLE_SLACK`].
pub fn sample_product_radius(
    lengths: &[f64],
    params: &Params,
    branches: BranchSet,
    k: usize,
    trials: usize,
    seed: u64,
) -> Result<ProductSamples> {
    if k == 0 {
        return Err(DefireError::InvalidArgument(
            "word length must be at least 1".into(),
        ));
    }
    if trials == 0 {
        return Err(DefireError::InvalidArgument(
            "at least one trial is required".into(),
        ));
    }
    let family = companion_family(lengths, params, branches)?;
    let bound = jsr_ratio_bound(lengths, params, branches)?;
    let matrices: Vec<Matrix> = family.iter().map(companion_matrix).collect::<Result<_>>()?;

    let values = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = Lcg64::new(seed.wrapping_add(t as u64));
            let word: Vec<usize> = (0..k).map(|_| rng.index(matrices.len())).collect();
            let product = word_product(&matrices, &word)?;
            Ok(spectral_radius(&product)?.powf(1.0 / k as f64))
        })
        .collect::<Result<Vec<f64>>>()?;

    if let Some(&worst) = values.iter().find(|&&v| v > bound.bound + SAMPLE_SLACK) {
        return Err(DefireError::RatioBoundExceeded {
            value: worst,
            bound: bound.bound,
        });
    }
    Ok(ProductSamples { k, values, bound })
}

/// Summary of the linear contraction analysis for one set of lengths.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractionEstimate {
    pub ratio_bound: f64,
    pub flagged: bool,
    /// `(k, max over trials of SpecRad^(1/k))`.
    pub samples: Vec<(usize, f64)>,
    pub empirical_rho: Option<f64>,
}

/// Ratio bound plus the sampled maximum for every word length in `ks`.
pub fn estimate_contraction(
    lengths: &[f64],
    params: &Params,
    branches: BranchSet,
    ks: &[usize],
    trials: usize,
    seed: u64,
) -> Result<ContractionEstimate> {
    let bound = jsr_ratio_bound(lengths, params, branches)?;
    let samples = ks
        .iter()
        .map(|&k| {
            let s = sample_product_radius(lengths, params, branches, k, trials, seed)?;
            Ok((k, s.max()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ContractionEstimate {
        ratio_bound: bound.bound,
        flagged: bound.flagged,
        samples,
        empirical_rho: None,
    })
}

/// Geometric decay rate of the distance to a reference orbit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmpiricalRate {
    /// Distance factor per full cycle.
    pub per_cycle: f64,
    /// Distance factor per firing, the scale of a single companion matrix.
    pub per_firing: f64,
    /// Number of cycles in the fit.
    pub points: usize,
}

/// Fits `log ‖u_k - reference‖₁` against the cycle index over the tail half
/// of the series. The series stops at the first distance below
/// [`DISTANCE_FLOOR`].
pub fn empirical_contraction(
    results: &[CycleResult],
    reference: &StepProfile,
) -> Result<EmpiricalRate> {
    if reference.len() < 2 {
        return Err(DefireError::TooFewClusters {
            required: 2,
            got: reference.len(),
        });
    }
    if results.len() < 5 {
        return Err(DefireError::InsufficientData {
            points: results.len(),
        });
    }
    let mut series = Vec::with_capacity(results.len());
    for cycle in results {
        let d = l1_distance(&cycle.post_profile, reference)?;
        if d < DISTANCE_FLOOR {
            break;
        }
        series.push((cycle.cycle_index as f64, d.ln(), cycle.firing_times.len()));
    }
    let tail = &series[series.len() / 2..];
    if tail.len() < 3 {
        return Err(DefireError::InsufficientData { points: tail.len() });
    }

    let n = tail.len() as f64;
    let mean_x = tail.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = tail.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = tail.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let sxx: f64 = tail.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    let slope = sxy / sxx;
    let firings = tail.iter().map(|p| p.2 as f64).sum::<f64>() / n;
    Ok(EmpiricalRate {
        per_cycle: slope.exp(),
        per_firing: (slope / firings).exp(),
        points: tail.len(),
    })
}
