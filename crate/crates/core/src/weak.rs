//! Weak-coupling analysis.
//!
//! While every cluster fires before reaching zero, the first firing times
//! `T` solve the affine equation `(I - L) T = rhs` with
//!
//! ```text
//! rhs(x) = (1 - mu) u(x) - eta + mu (u_tr(x) + ∫_{u_tr(x)}¹ u)
//! L v(x) = mu ∫₀^{u_tr(x)} v
//! ```
//!
//! `‖L‖ ≤ mu < 1`, so the Neumann iteration converges. On a step profile `L`
//! is strictly lower triangular and the iteration terminates after at most
//! `N` corrections.

use serde::Serialize;

use crate::engine::{full_cycle, simulate, Branch, CycleResult};
use crate::error::{DefireError, Result};
use crate::profile::{l1_distance, validate_profile, Params, StepProfile, Trace, TOL};

/// First firing time of every cluster.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FiringProfile {
    pub lengths: Vec<f64>,
    pub times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeumannSolution {
    pub firing: FiringProfile,
    /// Number of `T ← rhs + L T` updates performed.
    pub iterations: usize,
}

const MAX_ITERATIONS: usize = 100_000;

/// `mu ∫₀^{u_tr(x)} v` on each plateau of a step trace.
pub fn apply_l(trace: &Trace, v: &[f64], params: &Params) -> Result<Vec<f64>> {
    let lengths = trace
        .lengths()
        .ok_or_else(|| DefireError::InvalidArgument("trace does not tile (0, 1]".into()))?;
    if lengths.len() != v.len() {
        return Err(DefireError::InvalidArgument(format!(
            "partition mismatch: {} plateaus but {} values",
            lengths.len(),
            v.len()
        )));
    }
    Ok(lower_sums(&lengths, v, params.mu()))
}

fn lower_sums(lengths: &[f64], v: &[f64], mu: f64) -> Vec<f64> {
    let mut acc = 0.0;
    lengths
        .iter()
        .zip(v)
        .map(|(l, x)| {
            let out = mu * acc;
            acc += l * x;
            out
        })
        .collect()
}

/// First firing times from the affine equation, iterated from `T⁰ = rhs`
/// until the sup-norm update is at most `tol`.
///
/// The equation only describes the dynamics while `T ≤ u`; a solution
/// violating it is rejected.
pub fn solve_t1_neumann(
    profile: &StepProfile,
    params: &Params,
    tol: f64,
) -> Result<NeumannSolution> {
    if !(tol > 0.0) {
        return Err(DefireError::InvalidArgument(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    validate_profile(profile, params).into_result()?;
    let mu = params.mu();
    let lengths = profile.lengths();
    let levels = profile.levels();

    let mut left = 0.0;
    let mut tail: f64 = profile.mean();
    let rhs: Vec<f64> = lengths
        .iter()
        .zip(levels)
        .map(|(l, u)| {
            let r = (1.0 - mu) * u - params.eta + mu * (left + tail);
            left += l;
            tail -= l * u;
            r
        })
        .collect();

    let mut t = rhs.clone();
    let mut iterations = 0;
    loop {
        let next: Vec<f64> = lower_sums(lengths, &t, mu)
            .iter()
            .zip(&rhs)
            .map(|(lt, r)| r + lt)
            .collect();
        iterations += 1;
        let change = next
            .iter()
            .zip(&t)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        t = next;
        if change <= tol {
            break;
        }
        if iterations >= MAX_ITERATIONS {
            return Err(DefireError::InvalidArgument(format!(
                "Neumann iteration did not reach tolerance {tol}"
            )));
        }
    }

    if let Some((cluster, (&time, &level))) = t
        .iter()
        .zip(levels)
        .enumerate()
        .find(|(_, (&time, &level))| time > level + TOL)
    {
        return Err(DefireError::OutsideApplicability {
            cluster,
            time,
            level,
        });
    }
    Ok(NeumannSolution {
        firing: FiringProfile {
            lengths: lengths.to_vec(),
            times: t,
        },
        iterations,
    })
}

/// `1 - mu + mu (e^mu - mu - 1) + mu² / (1 - mu)`.
pub fn contraction_constant(mu: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&mu) {
        return Err(DefireError::InvalidArgument(format!(
            "mu = {mu} must lie in [0, 1)"
        )));
    }
    Ok(1.0 - mu + mu * (mu.exp() - mu - 1.0) + mu * mu / (1.0 - mu))
}

fn critical_residual(mu: f64) -> f64 {
    mu.exp() + mu * mu / (1.0 - mu) - 2.0
}

/// Root of `e^mu + mu² / (1 - mu) = 2` in `[0.4, 0.5]`, where the
/// contraction constant crosses 1.
pub fn mu_critical() -> f64 {
    let (mut lo, mut hi) = (0.4, 0.5);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if critical_residual(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn check_simple_cycle(cycle: &CycleResult, clusters: usize, which: &str) -> Result<()> {
    if cycle.branches.contains(&Branch::Minus) {
        return Err(DefireError::HypothesisViolated(format!(
            "profile {which}: a cluster reaches zero before firing"
        )));
    }
    if !cycle.merges.is_empty()
        || cycle.shared_firing.is_some()
        || cycle.firing_times.len() != clusters
    {
        return Err(DefireError::HypothesisViolated(format!(
            "profile {which}: the top cluster does not fire last in its cycle"
        )));
    }
    Ok(())
}

/// `‖F(u) - F(v)‖₁ / ‖u - v‖₁` over one cycle, for two profiles on the
/// same partition in the weak-coupling regime. Zero when `u = v`.
pub fn verify_cycle_contraction(u: &StepProfile, v: &StepProfile, params: &Params) -> Result<f64> {
    params.check()?;
    let same_partition = u.len() == v.len()
        && u.lengths()
            .iter()
            .zip(v.lengths())
            .all(|(a, b)| (a - b).abs() <= TOL);
    if !same_partition {
        return Err(DefireError::HypothesisViolated(
            "profiles have different traces".into(),
        ));
    }
    let mu = params.mu();
    let mu_c = mu_critical();
    if mu >= mu_c {
        return Err(DefireError::HypothesisViolated(format!(
            "mu = {mu} is not below the critical value {mu_c}"
        )));
    }
    let before = l1_distance(u, v)?;
    let cu = full_cycle(u, params)?;
    let cv = full_cycle(v, params)?;
    check_simple_cycle(&cu, u.len(), "u")?;
    check_simple_cycle(&cv, v.len(), "v")?;
    if before == 0.0 {
        return Ok(0.0);
    }
    let ratio = l1_distance(&cu.post_profile, &cv.post_profile)? / before;
    let bound = contraction_constant(mu)?;
    if ratio > bound + 1e-9 {
        return Err(DefireError::ContractionBoundExceeded { ratio, bound });
    }
    Ok(ratio)
}

/// Firing times near the jump of a sequence of profiles converging to a
/// two-plateau limit, next to their limit values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiscontinuityReport {
    /// First firing time on `(0, x1/2]`.
    pub lower_time: f64,
    /// First firing time on `(x1/2, x1]`.
    pub upper_time: f64,
    /// Firing time of the limit profile on `(0, x1]`.
    pub unperturbed: f64,
    /// Limit of `lower_time`.
    pub lower_limit: f64,
    /// Limit of `upper_time`, strictly above `unperturbed`.
    pub upper_limit: f64,
}

/// Depresses the lower half of the plateau `(0, x1]` at level `base_level`
/// by `1/n` and records the first firing times on both halves. `n = None`
/// evaluates the limit profile itself.
pub fn discontinuity_limit(
    x1: f64,
    base_level: f64,
    params: &Params,
    n: Option<u64>,
) -> Result<DiscontinuityReport> {
    params.check()?;
    if params.epsilon > 1.0 {
        return Err(DefireError::NotApplicable(format!(
            "needs epsilon <= 1, got {}",
            params.epsilon
        )));
    }
    if !(x1 > 0.0 && x1 < 1.0) {
        return Err(DefireError::InvalidArgument(format!(
            "x1 = {x1} must lie in (0, 1)"
        )));
    }
    let base = StepProfile::new(vec![x1, 1.0 - x1], vec![base_level, 1.0])?;
    validate_profile(&base, params).into_result()?;

    let mu = params.mu();
    let unperturbed = (1.0 - mu) * base_level + mu * base.mean() - params.eta;
    let lower_limit = unperturbed;
    let upper_limit = unperturbed + mu * (x1 / 2.0) * (unperturbed - base_level + 1.0);

    let (lower_time, upper_time) = match n {
        None => (unperturbed, unperturbed),
        Some(0) => return Err(DefireError::InvalidArgument("n must be positive".into())),
        Some(n) => {
            let half = x1 / 2.0;
            let depressed = base_level - 1.0 / n as f64;
            let profile =
                StepProfile::new(vec![half, half, 1.0 - x1], vec![depressed, base_level, 1.0])?;
            let sim = simulate(&profile, params, 1, 0.0)?;
            let first = |cluster| -> Result<f64> {
                sim.schedule(cluster)?.times.first().copied().ok_or(
                    DefireError::NoFiringWithinHorizon {
                        horizon: sim.horizon,
                    },
                )
            };
            (first(0)?, first(1)?)
        }
    };
    Ok(DiscontinuityReport {
        lower_time,
        upper_time,
        unperturbed,
        lower_limit,
        upper_limit,
    })
}
