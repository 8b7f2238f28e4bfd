//! Periodic profiles with period equal to the first return time of the top
//! cell, their existence threshold in `epsilon`, and epsilon scans.
//!
//! For a lower trace `u_tr` with `I = ∫ u_tr` the orbit lives on one of two
//! branches. Below `epsilon I = 1` nothing reaches zero (`no_damp`):
//!
//! ```text
//! T = (1 - eta) / (1 - mu I),        u = 1 - T (u_tr(1) - u_tr)
//! ```
//!
//! Above it every plateau but the top one fires from zero (`damp`):
//!
//! ```text
//! T = (2 I - 1/epsilon) / I,         u = (1 - ū_tr)(1 - T) + 1 - u_tr(1) + u_tr
//! ```

use rayon::prelude::*;
use serde::Serialize;

use crate::engine::full_cycle;
use crate::error::{DefireError, Result};
use crate::profile::{l1_distance, validate_profile, Params, StepProfile, Trace};

/// Relative distance to the existence bound below which an epsilon is
/// treated as sitting on the boundary.
pub const GHOST_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OrbitBranch {
    /// Period below 1: no cell reaches zero.
    NoDamp,
    /// Period at least 1: cells sit at zero before firing.
    Damp,
}

impl OrbitBranch {
    pub fn as_str(self) -> &'static str {
        match self {
            OrbitBranch::NoDamp => "no_damp",
            OrbitBranch::Damp => "damp",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicOrbit {
    pub profile: StepProfile,
    pub period: f64,
    pub branch: OrbitBranch,
    /// `bound - epsilon`; positive whenever the orbit exists.
    pub existence_margin: f64,
}

/// Critical coupling of a trace. `bound` is `+∞` when no finite coupling
/// destroys the orbit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExistenceBound {
    pub bound: f64,
    /// The orbit exists iff `epsilon < bound` (strict) or `epsilon <= bound`.
    pub strict: bool,
}

impl ExistenceBound {
    pub fn admits(&self, epsilon: f64) -> bool {
        if self.strict {
            epsilon < self.bound
        } else {
            epsilon <= self.bound
        }
    }

    /// Epsilon sits on the bound up to rounding.
    pub fn on_boundary(&self, epsilon: f64) -> bool {
        self.bound.is_finite() && (epsilon - self.bound).abs() <= GHOST_TOL * self.bound.max(1.0)
    }
}

/// `u_tr(1)`: the lower trace at the top cell.
fn top_lower(trace: &Trace) -> f64 {
    trace.lower(1.0)
}

/// Existence threshold of the periodic orbit for `trace`:
/// `1 / (I · (1 - r*))` where `r*` is the smaller of
///
/// * `inf r(x)`, `r(x) = (ū(x) - u(x)) / (1 - ū(ū(x) + 0) + ū(x))` over
///   `x ∈ (0, u_tr(1))`, which keeps every plateau firing alone;
/// * `(1 - u_tr(1)) / (1 - ū(0+0))`, which keeps the lowest level of the
///   damped orbit positive.
///
/// The second term is not implied by the first: with a thin top plateau it
/// is the binding one. Off the plateaus `r = 0`; on each plateau `r` is
/// constant, so the infimum of a finite trace is always attained.
pub fn existence_bound(trace: &Trace) -> Result<ExistenceBound> {
    let top = top_lower(trace);
    if top <= 0.0 {
        return Err(DefireError::NotApplicable(
            "lower trace vanishes at the top cell (single plateau)".into(),
        ));
    }

    let mut inf_ratio = (1.0 - top) / (1.0 - trace.upper_right_limit(0.0));
    let mut covered = 0.0;
    for &(a, b) in trace.plateaus().iter().take_while(|&&(a, _)| a < top) {
        if a > covered {
            inf_ratio = 0.0;
        }
        let ratio = (b - a) / (1.0 - trace.upper_right_limit(b) + b);
        inf_ratio = inf_ratio.min(ratio);
        covered = b;
    }
    if covered < top {
        inf_ratio = 0.0;
    }

    let integral = trace.lower_integral();
    let bound = if inf_ratio >= 1.0 {
        f64::INFINITY
    } else {
        1.0 / (integral * (1.0 - inf_ratio))
    };
    Ok(ExistenceBound {
        bound,
        strict: true,
    })
}

/// Periodic orbit for a step trace, or `None` when the coupling is at or
/// beyond the existence bound.
pub fn construct_periodic(trace: &Trace, params: &Params) -> Result<Option<PeriodicOrbit>> {
    params.check()?;
    let lengths = trace.lengths().ok_or_else(|| {
        DefireError::NotApplicable("orbit construction needs a trace tiling (0, 1]".into())
    })?;
    let existence = existence_bound(trace)?;
    if !existence.admits(params.epsilon) || existence.on_boundary(params.epsilon) {
        return Ok(None);
    }

    let integral = trace.lower_integral();
    let top = top_lower(trace);
    let (branch, period) = if params.epsilon * integral < 1.0 {
        let t = (1.0 - params.eta) / (1.0 - params.mu() * integral);
        (OrbitBranch::NoDamp, t)
    } else {
        let t = (2.0 * integral - 1.0 / params.epsilon) / integral;
        (OrbitBranch::Damp, t)
    };

    let mut levels: Vec<f64> = trace
        .plateaus()
        .iter()
        .map(|&(a, b)| match branch {
            OrbitBranch::NoDamp => 1.0 - period * (top - a),
            OrbitBranch::Damp => (1.0 - b) * (1.0 - period) + 1.0 - top + a,
        })
        .collect();
    // Both formulas give exactly 1 on the top plateau; pin it against rounding.
    if let Some(last) = levels.last_mut() {
        *last = 1.0;
    }

    let profile = StepProfile::new(lengths, levels)?;
    let report = validate_profile(&profile, params);
    if !report.is_valid() {
        return Err(DefireError::NotApplicable(format!(
            "constructed profile violates the model assumptions: {report}"
        )));
    }
    Ok(Some(PeriodicOrbit {
        profile,
        period,
        branch,
        existence_margin: existence.bound - params.epsilon,
    }))
}

/// `‖F(u) - u‖₁ + |return time - period|` for one engine cycle.
pub fn verify_fixed_point(orbit: &PeriodicOrbit, params: &Params) -> Result<f64> {
    let cycle = full_cycle(&orbit.profile, params)?;
    let drift = l1_distance(&cycle.post_profile, &orbit.profile)?;
    Ok(drift + (cycle.return_time - orbit.period).abs())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub epsilon: f64,
    pub exists: bool,
    pub branch: Option<OrbitBranch>,
    pub period: Option<f64>,
    pub bound: f64,
    pub strict: bool,
    /// Epsilon equals the bound: trajectories may approach a cycle that is
    /// not itself a solution.
    pub ghost_candidate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanReport {
    /// One row per grid value, in grid order.
    pub rows: Vec<ScanRow>,
    /// Adjacent pair of sorted grid values across which existence is lost.
    pub transition: Option<(f64, f64)>,
}

/// Existence and orbit data for every `epsilon` in `grid` at fixed `eta`.
pub fn scan_epsilon(trace: &Trace, eta: f64, grid: &[f64]) -> Result<ScanReport> {
    if grid.is_empty() {
        return Err(DefireError::InvalidArgument("empty epsilon grid".into()));
    }
    let params: Vec<Params> = grid
        .iter()
        .map(|&epsilon| Params::new(epsilon, eta))
        .collect::<Result<_>>()?;
    let existence = existence_bound(trace)?;

    let rows = params
        .par_iter()
        .map(|p| {
            let orbit = construct_periodic(trace, p)?;
            Ok(ScanRow {
                epsilon: p.epsilon,
                exists: orbit.is_some(),
                branch: orbit.as_ref().map(|o| o.branch),
                period: orbit.as_ref().map(|o| o.period),
                bound: existence.bound,
                strict: existence.strict,
                ghost_candidate: existence.on_boundary(p.epsilon),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut sorted: Vec<(f64, bool)> = rows.iter().map(|r| (r.epsilon, r.exists)).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let transition = sorted
        .windows(2)
        .find(|w| w[0].1 && !w[1].1)
        .map(|w| (w[0].0, w[1].0));
    Ok(ScanReport { rows, transition })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn equal_clusters(k: usize) -> Trace {
        Trace::from_lengths(&vec![1.0 / k as f64; k])
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn bound_for_equal_clusters() {
        let e = existence_bound(&equal_clusters(64)).unwrap();
        assert!(close(e.bound, 128.0 / 62.0, 1e-12));
        assert!(close(e.bound, 2.064516129, 1e-9));
        assert!(e.strict);
    }

    #[test]
    fn bound_for_identity_trace_is_two() {
        let e = existence_bound(&Trace::identity()).unwrap();
        assert!(close(e.bound, 2.0, 1e-15));
    }

    #[test]
    fn bound_infinite_for_two_halves() {
        let e = existence_bound(&Trace::from_lengths(&[0.5, 0.5])).unwrap();
        assert!(e.bound.is_infinite());
        assert!(e.admits(9.9));
    }

    #[test]
    fn single_plateau_is_not_applicable() {
        assert!(matches!(
            existence_bound(&Trace::from_lengths(&[1.0])),
            Err(DefireError::NotApplicable(_))
        ));
    }

    #[test]
    fn gap_below_top_gives_zero_ratio() {
        // plateaus (0, 0.3] and (0.6, 1]: the gap (0.3, 0.6) lies below u_tr(1) = 0.6
        let t = Trace::new(vec![(0.0, 0.3), (0.6, 1.0)]).unwrap();
        let e = existence_bound(&t).unwrap();
        assert!(close(e.bound, 1.0 / t.lower_integral(), 1e-15));
    }

    #[test]
    fn thin_top_plateau_limits_existence() {
        // interior ratios 0.4/0.6 and 0.4/0.8; wrap-around ratio 0.2/0.6
        let trace = Trace::from_lengths(&[0.4, 0.4, 0.2]);
        let e = existence_bound(&trace).unwrap();
        assert!(close(e.bound, 1.0 / (0.32 * (1.0 - 0.2 / 0.6)), 1e-12));

        // between this bound and the interior-only value the damped level
        // formula turns negative on the lowest plateau
        let beyond = Params::new(5.5, 0.05).unwrap();
        assert!(construct_periodic(&trace, &beyond).unwrap().is_none());
        let integral = trace.lower_integral();
        let period = 2.0 - 1.0 / (beyond.epsilon * integral);
        assert!((1.0 - 0.4) * (1.0 - period) + 0.2 < 0.0);

        let inside = Params::new(4.5, 0.05).unwrap();
        let orbit = construct_periodic(&trace, &inside).unwrap().unwrap();
        assert_eq!(orbit.branch, OrbitBranch::Damp);
        assert!(verify_fixed_point(&orbit, &inside).unwrap() <= 1e-10);
    }

    #[test]
    fn no_damp_example() {
        let orbit = construct_periodic(
            &Trace::from_lengths(&[0.5, 0.5]),
            &Params::new(1.0, 0.1).unwrap(),
        )
        .unwrap()
        .unwrap();
        assert_eq!(orbit.branch, OrbitBranch::NoDamp);
        assert!(close(orbit.period, 12.0 / 13.0, 1e-15));
        assert!(close(orbit.profile.levels()[0], 7.0 / 13.0, 1e-15));
        assert_eq!(orbit.profile.levels()[1], 1.0);
        assert!(verify_fixed_point(&orbit, &Params::new(1.0, 0.1).unwrap()).unwrap() <= 1e-10);
    }

    #[test]
    fn damp_example() {
        let params = Params::new(5.0, 0.1).unwrap();
        let orbit = construct_periodic(&Trace::from_lengths(&[0.5, 0.5]), &params)
            .unwrap()
            .unwrap();
        assert_eq!(orbit.branch, OrbitBranch::Damp);
        assert!(close(orbit.period, 1.2, 1e-14));
        assert!(close(orbit.profile.levels()[0], 0.4, 1e-14));
        assert!(verify_fixed_point(&orbit, &params).unwrap() <= 1e-10);
    }

    #[test]
    fn beyond_bound_gives_none() {
        let params = Params::new(2.2, 0.05).unwrap();
        assert!(construct_periodic(&equal_clusters(64), &params)
            .unwrap()
            .is_none());
    }

    #[test]
    fn perturbed_orbit_has_positive_residual() {
        let params = Params::new(1.0, 0.1).unwrap();
        let mut orbit = construct_periodic(&Trace::from_lengths(&[0.5, 0.5]), &params)
            .unwrap()
            .unwrap();
        let levels = vec![orbit.profile.levels()[0] + 0.01, 1.0];
        orbit.profile = StepProfile::new(vec![0.5, 0.5], levels).unwrap();
        assert!(verify_fixed_point(&orbit, &params).unwrap() > 1e-4);
    }

    #[test]
    fn identity_trace_cannot_be_constructed() {
        assert!(construct_periodic(&Trace::identity(), &Params::new(1.0, 0.1).unwrap()).is_err());
    }

    #[test]
    fn branch_periods_meet_at_one() {
        let trace = Trace::from_lengths(&[0.2, 0.3, 0.5]);
        let integral = trace.lower_integral();
        let epsilon = 1.0 / integral;
        let eta = 0.05;
        let no_damp = (1.0 - eta) / (1.0 - epsilon * eta * integral);
        let damp = (2.0 * integral - 1.0 / epsilon) / integral;
        assert!(close(no_damp, 1.0, 1e-12));
        assert!(close(damp, 1.0, 1e-12));
    }

    #[test]
    fn damp_period_ignores_eta() {
        let trace = Trace::from_lengths(&[0.5, 0.5]);
        let a = construct_periodic(&trace, &Params::new(5.0, 0.1).unwrap())
            .unwrap()
            .unwrap();
        let b = construct_periodic(&trace, &Params::new(5.0, 0.15).unwrap())
            .unwrap()
            .unwrap();
        assert_eq!(a.period, b.period);
    }

    #[test]
    fn scan_brackets_transition() {
        let report = scan_epsilon(&equal_clusters(64), 0.05, &[1.8, 2.0, 2.2]).unwrap();
        let exists: Vec<bool> = report.rows.iter().map(|r| r.exists).collect();
        assert_eq!(exists, vec![true, true, false]);
        assert_eq!(report.transition, Some((2.0, 2.2)));
    }

    #[test]
    fn scan_flags_boundary_and_errors() {
        let trace = equal_clusters(8);
        let bound = existence_bound(&trace).unwrap().bound;
        let report = scan_epsilon(&trace, 0.05, &[bound]).unwrap();
        assert!(report.rows[0].ghost_candidate);
        assert!(!report.rows[0].exists);

        assert!(scan_epsilon(&trace, 0.1, &[]).is_err());
        assert!(scan_epsilon(&trace, 0.1, &[10.0]).is_err());

        let halves =
            scan_epsilon(&Trace::from_lengths(&[0.5, 0.5]), 0.1, &[0.5, 3.0, 9.0]).unwrap();
        assert!(halves.rows.iter().all(|r| r.exists));
        assert_eq!(halves.transition, None);
    }
}
