//! Exact event-driven evolution of step profiles.
//!
//! Between firings every level decays at unit speed and sticks at zero. The
//! lowest cluster fires when its repressor level
//! `M = (1 - mu) u + mu ∫u` reaches `eta`; the firing time is closed-form on
//! each of the two branches:
//!
//! * plus: the cluster fires before reaching zero, `T = M(u₁) - eta`;
//! * minus: a prefix of clusters of total length `L` sits at zero and fires
//!   together, `T = (∫_L¹ u - 1/epsilon) / (1 - L)`.
//!
//! After a firing the fired group is reset to 1 and moved to the top, so the
//! profile stays non-decreasing with its last level at saturation.
//!
//! Cluster indices are zero-based throughout the API.

use serde::Serialize;

use crate::error::{DefireError, Result};
use crate::profile::{l1_distance, validate_profile, Params, StepProfile};

/// Levels within this distance of the lowest level at a firing instant fire
/// with it.
pub const GROUP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    /// Fires while its level is still positive.
    Plus,
    /// Fires from level zero, possibly with other zeroed clusters.
    Minus,
}

/// Caps for cycle and simulation loops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineConfig {
    pub max_firings_per_cycle: usize,
    pub max_cycles: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            max_firings_per_cycle: 1_000_000,
            max_cycles: 10_000,
        }
    }
}

/// Result of the next firing from a profile snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct FiringOutcome {
    /// Elapsed time since the snapshot.
    pub firing_time: f64,
    /// Number of leading clusters firing together.
    pub merge_extent: usize,
    pub branch: Branch,
    /// Total length of the clusters sitting at level zero at the firing instant.
    pub zero_length: f64,
    /// Profile immediately after the firing, rotated so the fired group is last.
    pub post_profile: StepProfile,
}

/// Merge that happened during a cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Merge {
    pub firing_index: usize,
    pub clusters: usize,
}

/// The cycle-closing firing also re-fired clusters that had already fired
/// earlier in the same cycle.
///
/// Two bookkeepings are possible: the firing closes the current cycle (the
/// one used here, which keeps the closing rotation), or the re-fired clusters
/// open the next cycle. Both share the same instant, so only the attribution
/// of `refired_clusters` differs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SharedFiring {
    pub firing_index: usize,
    pub time: f64,
    pub refired_clusters: usize,
}

/// One full cycle: every cluster present at the start fires exactly once.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleResult {
    pub cycle_index: usize,
    /// Elapsed time until the top cluster fires again.
    pub return_time: f64,
    /// Firing instants relative to the cycle start.
    pub firing_times: Vec<f64>,
    pub branches: Vec<Branch>,
    pub post_profile: StepProfile,
    pub merges: Vec<Merge>,
    pub shared_firing: Option<SharedFiring>,
}

impl CycleResult {
    pub fn merge_count(&self) -> usize {
        self.merges.len()
    }
}

#[derive(Debug, Clone, Copy)]
struct Firing {
    time: f64,
    group: usize,
    branch: Branch,
    zero_length: f64,
}

fn check_cluster(profile: &StepProfile, cluster: usize) -> Result<()> {
    if cluster >= profile.len() {
        return Err(DefireError::ClusterOutOfRange {
            index: cluster,
            count: profile.len(),
        });
    }
    Ok(())
}

/// `M` at `cluster`: `(1 - mu) u + mu ∫u`.
pub fn repressor_level(profile: &StepProfile, cluster: usize, params: &Params) -> Result<f64> {
    check_cluster(profile, cluster)?;
    let mu = params.mu();
    Ok((1.0 - mu) * profile.levels()[cluster] + mu * profile.mean())
}

/// Repressor level of `cluster` after `t` units of free decay from the
/// snapshot (valid while no firing has occurred).
pub fn repressor_at(profile: &StepProfile, params: &Params, cluster: usize, t: f64) -> Result<f64> {
    check_cluster(profile, cluster)?;
    let mu = params.mu();
    let mean: f64 = profile
        .lengths()
        .iter()
        .zip(profile.levels())
        .map(|(l, u)| l * (u - t).max(0.0))
        .sum();
    Ok((1.0 - mu) * (profile.levels()[cluster] - t).max(0.0) + mu * mean)
}

/// `S` at the right edge of `cluster`: `Σ_{n > cluster} ℓ_n (u_n - u_cluster)`.
pub fn s_value(profile: &StepProfile, cluster: usize) -> Result<f64> {
    check_cluster(profile, cluster)?;
    Ok(s_at(profile.lengths(), profile.levels(), cluster))
}

fn s_at(lengths: &[f64], levels: &[f64], cluster: usize) -> f64 {
    let base = levels[cluster];
    lengths[cluster + 1..]
        .iter()
        .zip(&levels[cluster + 1..])
        .map(|(l, u)| l * (u - base))
        .sum()
}

/// Size and branch of the first firing plateau.
///
/// `S` is non-increasing along the clusters, so the clusters with
/// `epsilon · S > 1` form a prefix; they all reach zero before the firing.
pub fn plateau_extent(profile: &StepProfile, params: &Params) -> (usize, Branch) {
    extent_of(profile.lengths(), profile.levels(), params)
}

fn extent_of(lengths: &[f64], levels: &[f64], params: &Params) -> (usize, Branch) {
    let zeroed = (0..levels.len())
        .take_while(|&k| params.epsilon * s_at(lengths, levels, k) > 1.0)
        .count();
    if zeroed == 0 {
        (1, Branch::Plus)
    } else {
        (zeroed, Branch::Minus)
    }
}

fn locate_firing(lengths: &[f64], levels: &[f64], params: &Params) -> Result<Firing> {
    let n = levels.len();
    let mu = params.mu();
    let (extent, branch) = extent_of(lengths, levels, params);
    let time = match branch {
        Branch::Plus => {
            let mean: f64 = lengths.iter().zip(levels).map(|(l, u)| l * u).sum();
            (1.0 - mu) * levels[0] + mu * mean - params.eta
        }
        Branch::Minus => {
            if extent >= n {
                return Err(DefireError::FullSynchrony);
            }
            let tail_length: f64 = lengths[extent..].iter().sum();
            let tail_mass: f64 = lengths[extent..]
                .iter()
                .zip(&levels[extent..])
                .map(|(l, u)| l * u)
                .sum();
            (tail_mass - 1.0 / params.epsilon) / tail_length
        }
    };

    let floor = (levels[0] - time).max(0.0);
    let group = levels
        .iter()
        .take_while(|&&u| (u - time).max(0.0) <= floor + GROUP_TOL)
        .count();
    if group == n && n > 1 {
        return Err(DefireError::FullSynchrony);
    }
    let zero_length = if floor <= GROUP_TOL {
        lengths[..group].iter().sum()
    } else {
        0.0
    };
    Ok(Firing {
        time,
        group,
        branch,
        zero_length,
    })
}

/// Working population with cluster identities, used by the cycle loops.
#[derive(Debug, Clone)]
struct Population {
    lengths: Vec<f64>,
    levels: Vec<f64>,
    members: Vec<Vec<usize>>,
}

impl Population {
    fn new(profile: &StepProfile) -> Self {
        Self {
            lengths: profile.lengths().to_vec(),
            levels: profile.levels().to_vec(),
            members: (0..profile.len()).map(|i| vec![i]).collect(),
        }
    }

    fn len(&self) -> usize {
        self.levels.len()
    }

    fn profile(&self) -> StepProfile {
        StepProfile::from_parts_unchecked(self.lengths.clone(), self.levels.clone())
    }

    /// Fires the next group, resets it to 1 and rotates it to the top.
    /// Returns the firing and the identities that fired.
    fn fire(&mut self, params: &Params) -> Result<(Firing, Vec<usize>)> {
        let firing = locate_firing(&self.lengths, &self.levels, params)?;
        let k = firing.group;

        let merged_length: f64 = self.lengths[..k].iter().sum();
        let mut fired: Vec<usize> = self.members.drain(..k).flatten().collect();
        fired.sort_unstable();

        self.lengths.drain(..k);
        self.levels.drain(..k);
        for level in &mut self.levels {
            *level -= firing.time;
        }
        self.lengths.push(merged_length);
        self.levels.push(1.0);
        self.members.push(fired.clone());
        Ok((firing, fired))
    }
}

/// Next firing from a valid profile.
pub fn first_firing(profile: &StepProfile, params: &Params) -> Result<FiringOutcome> {
    validate_profile(profile, params).into_result()?;
    let mut pop = Population::new(profile);
    let (firing, _) = pop.fire(params)?;
    Ok(FiringOutcome {
        firing_time: firing.time,
        merge_extent: firing.group,
        branch: firing.branch,
        zero_length: firing.zero_length,
        post_profile: pop.profile(),
    })
}

/// One firing as seen from the simulation clock.
#[derive(Debug, Clone, PartialEq)]
pub struct FiringEvent {
    /// Absolute time since the start of the simulation.
    pub t: f64,
    /// Identities (indices into the initial profile) of the cells that fired.
    pub fired_clusters: Vec<usize>,
    pub post_levels: Vec<f64>,
    pub post_lengths: Vec<f64>,
    pub branch: Branch,
    pub merge_extent: usize,
    pub zero_length: f64,
}

fn run_cycle(
    pop: &mut Population,
    params: &Params,
    config: &EngineConfig,
    cycle_index: usize,
    clock: f64,
    mut log: Option<&mut Vec<FiringEvent>>,
) -> Result<CycleResult> {
    let mut top = pop.len() - 1;
    let mut elapsed = 0.0;
    let mut firing_times = Vec::new();
    let mut branches = Vec::new();
    let mut merges = Vec::new();
    let mut shared_firing = None;

    loop {
        if firing_times.len() >= config.max_firings_per_cycle {
            return Err(DefireError::CycleCapExceeded {
                cap: config.max_firings_per_cycle,
            });
        }
        let (firing, fired) = pop.fire(params)?;
        let firing_index = firing_times.len();
        elapsed += firing.time;
        firing_times.push(elapsed);
        branches.push(firing.branch);
        if firing.group > 1 {
            merges.push(Merge {
                firing_index,
                clusters: firing.group,
            });
        }
        if let Some(log) = log.as_deref_mut() {
            log.push(FiringEvent {
                t: clock + elapsed,
                fired_clusters: fired,
                post_levels: pop.levels.clone(),
                post_lengths: pop.lengths.clone(),
                branch: firing.branch,
                merge_extent: firing.group,
                zero_length: firing.zero_length,
            });
        }
        if firing.group > top {
            if firing.group > top + 1 {
                shared_firing = Some(SharedFiring {
                    firing_index,
                    time: elapsed,
                    refired_clusters: firing.group - top - 1,
                });
            }
            break;
        }
        top -= firing.group;
    }

    Ok(CycleResult {
        cycle_index,
        return_time: elapsed,
        firing_times,
        branches,
        post_profile: pop.profile(),
        merges,
        shared_firing,
    })
}

/// Fires until the cluster at saturation fires again.
pub fn full_cycle(profile: &StepProfile, params: &Params) -> Result<CycleResult> {
    full_cycle_with(profile, params, &EngineConfig::default())
}

pub fn full_cycle_with(
    profile: &StepProfile,
    params: &Params,
    config: &EngineConfig,
) -> Result<CycleResult> {
    validate_profile(profile, params).into_result()?;
    let mut pop = Population::new(profile);
    run_cycle(&mut pop, params, config, 0, 0.0, None)
}

/// Firing instants of one initial cluster, together with the simulated end
/// time beyond which the trajectory is unknown.
#[derive(Debug, Clone, PartialEq)]
pub struct FiringSchedule {
    pub times: Vec<f64>,
    pub horizon: f64,
}

/// Outcome of [`simulate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub cycles: Vec<CycleResult>,
    pub events: Vec<FiringEvent>,
    /// `L¹` distance between the post profile of each cycle and the profile
    /// the cycle started from.
    pub l1_deltas: Vec<f64>,
    pub merge_events: usize,
    pub converged: bool,
    /// First cycle whose delta fell below the tolerance.
    pub converged_at: Option<usize>,
    /// Absolute time of the last simulated firing.
    pub horizon: f64,
    initial_clusters: usize,
}

impl Simulation {
    /// Firing times of initial cluster `cluster` (zero-based).
    pub fn schedule(&self, cluster: usize) -> Result<FiringSchedule> {
        if cluster >= self.initial_clusters {
            return Err(DefireError::ClusterOutOfRange {
                index: cluster,
                count: self.initial_clusters,
            });
        }
        let times = self
            .events
            .iter()
            .filter(|e| e.fired_clusters.binary_search(&cluster).is_ok())
            .map(|e| e.t)
            .collect();
        Ok(FiringSchedule {
            times,
            horizon: self.horizon,
        })
    }

    pub fn final_profile(&self) -> Option<&StepProfile> {
        self.cycles.last().map(|c| &c.post_profile)
    }
}

pub fn simulate(
    profile: &StepProfile,
    params: &Params,
    n_cycles: usize,
    tol: f64,
) -> Result<Simulation> {
    simulate_with(profile, params, n_cycles, tol, &EngineConfig::default())
}

pub fn simulate_with(
    profile: &StepProfile,
    params: &Params,
    n_cycles: usize,
    tol: f64,
    config: &EngineConfig,
) -> Result<Simulation> {
    validate_profile(profile, params).into_result()?;
    if n_cycles == 0 {
        return Err(DefireError::InvalidArgument(
            "n_cycles must be at least 1".into(),
        ));
    }
    if n_cycles > config.max_cycles {
        return Err(DefireError::CycleLimitExceeded {
            requested: n_cycles,
            cap: config.max_cycles,
        });
    }

    let mut pop = Population::new(profile);
    let mut cycles = Vec::with_capacity(n_cycles);
    let mut events = Vec::new();
    let mut l1_deltas = Vec::with_capacity(n_cycles);
    let mut clock = 0.0;
    let mut previous = profile.clone();
    let mut converged_at = None;

    for cycle_index in 0..n_cycles {
        let cycle = run_cycle(
            &mut pop,
            params,
            config,
            cycle_index,
            clock,
            Some(&mut events),
        )?;
        clock += cycle.return_time;
        let delta = l1_distance(&cycle.post_profile, &previous)?;
        if delta <= tol && converged_at.is_none() {
            converged_at = Some(cycle_index);
        }
        l1_deltas.push(delta);
        previous = cycle.post_profile.clone();
        cycles.push(cycle);
    }

    let merge_events = cycles.iter().map(CycleResult::merge_count).sum();
    let converged = l1_deltas.last().is_some_and(|&d| d <= tol);
    Ok(Simulation {
        cycles,
        events,
        l1_deltas,
        merge_events,
        converged,
        converged_at,
        horizon: clock,
        initial_clusters: profile.len(),
    })
}

/// Level of `cluster` at absolute time `t`, reconstructed from its firing
/// schedule: `(u₀ - t)⁺` before the first firing, `(1 - t + Tₙ)⁺` after the
/// n-th one.
pub fn evaluate_solution(
    profile: &StepProfile,
    cluster: usize,
    t: f64,
    schedule: &FiringSchedule,
) -> Result<f64> {
    check_cluster(profile, cluster)?;
    if !(t >= 0.0) {
        return Err(DefireError::InvalidArgument(format!("negative time {t}")));
    }
    if t > schedule.horizon {
        return Err(DefireError::BeyondHorizon {
            t,
            horizon: schedule.horizon,
        });
    }
    // Levels are left-continuous: a firing at Tₙ takes effect just after Tₙ.
    let fired = schedule.times.partition_point(|&tn| tn < t);
    Ok(match fired {
        0 => (profile.levels()[cluster] - t).max(0.0),
        n => (1.0 - t + schedule.times[n - 1]).max(0.0),
    })
}
