use std::path::Path;

use defire::{
    companion_family, companion_matrix, construct_periodic, contraction_constant,
    discontinuity_limit, empirical_contraction, estimate_contraction, existence_bound,
    first_firing, mu_critical, oracle_firing_time, scan_epsilon, simulate_with, solve_t1_neumann,
    spectral_radius, Branch, BranchSet, EmpiricalRate, EngineConfig, OrbitBranch, DEFAULT_DT,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{BranchChoice, Command, RunConfig};
use crate::error::CliError;
use crate::output::{fmt17, to_csv, to_json, write_atomic};

pub fn run(config: &RunConfig, out: &Path) -> Result<(), CliError> {
    match config.command {
        Command::Simulate => simulate(config, out),
        Command::Periodic => periodic(config, out),
        Command::Scan => scan(config, out),
        Command::Spectral => spectral(config, out),
        Command::Weakcoupling => weak_coupling(config, out),
        Command::OracleCheck => oracle_check(config, out),
        Command::DemoDiscontinuity => demo_discontinuity(config, out),
    }
}

fn engine_config(config: &RunConfig) -> EngineConfig {
    let defaults = EngineConfig::default();
    EngineConfig {
        max_firings_per_cycle: config
            .options
            .max_firings_per_cycle
            .unwrap_or(defaults.max_firings_per_cycle),
        max_cycles: config.options.max_cycles.unwrap_or(defaults.max_cycles),
    }
}

#[derive(Serialize)]
struct EventRecord<'a> {
    t: f64,
    fired_clusters: &'a [usize],
    post_levels: &'a [f64],
}

fn simulate(config: &RunConfig, out: &Path) -> Result<(), CliError> {
    let params = config.params()?;
    let profile = config.require_profile()?;
    let opts = &config.options;
    let sim = simulate_with(
        profile,
        &params,
        opts.n_cycles.unwrap_or(100),
        opts.tol.unwrap_or(1e-12),
        &engine_config(config),
    )?;

    let rows: Vec<Vec<String>> = sim
        .cycles
        .iter()
        .zip(&sim.l1_deltas)
        .map(|(c, d)| {
            vec![
                c.cycle_index.to_string(),
                fmt17(c.return_time),
                c.post_profile.len().to_string(),
                c.merge_count().to_string(),
                fmt17(*d),
            ]
        })
        .collect();
    let header = [
        "cycle_index",
        "return_time",
        "n_clusters",
        "merges",
        "l1_delta",
    ];
    write_atomic(out, &opts.outputs.cycles, &to_csv(&header, &rows))?;

    let events: Vec<EventRecord> = sim
        .events
        .iter()
        .map(|e| EventRecord {
            t: e.t,
            fired_clusters: &e.fired_clusters,
            post_levels: &e.post_levels,
        })
        .collect();
    write_atomic(out, &opts.outputs.events, &to_json(&events))?;

    match sim.converged_at {
        Some(k) => log::info!("converged at cycle {k}"),
        None => log::info!("not converged after {} cycles", sim.cycles.len()),
    }
    log::info!(
        "{} merges, horizon {}",
        sim.merge_events,
        fmt17(sim.horizon)
    );
    Ok(())
}

#[derive(Serialize)]
struct OrbitRecord<'a> {
    lengths: &'a [f64],
    levels: &'a [f64],
    period: f64,
    branch: OrbitBranch,
    existence_margin: f64,
}

fn periodic(config: &RunConfig, out: &Path) -> Result<(), CliError> {
    let params = config.params()?;
    let trace = config.require_trace()?;
    let Some(orbit) = construct_periodic(&trace, &params)? else {
        let bound = existence_bound(&trace)?;
        return Err(CliError::Check(format!(
            "no periodic orbit: epsilon = {} is beyond the existence bound {}",
            params.epsilon,
            fmt17(bound.bound)
        )));
    };
    let record = OrbitRecord {
        lengths: orbit.profile.lengths(),
        levels: orbit.profile.levels(),
        period: orbit.period,
        branch: orbit.branch,
        existence_margin: orbit.existence_margin,
    };
    write_atomic(out, &config.options.outputs.orbit, &to_json(&record))?;
    log::info!(
        "{} orbit with period {}",
        orbit.branch.as_str(),
        fmt17(orbit.period)
    );
    Ok(())
}

fn scan(config: &RunConfig, out: &Path) -> Result<(), CliError> {
    let trace = config.require_trace()?;
    let grid = config
        .options
        .grid
        .as_ref()
        .ok_or_else(|| CliError::Config("scan needs options.grid".into()))?
        .values()?;
    let report = scan_epsilon(&trace, config.eta, &grid)?;
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                fmt17(r.epsilon),
                r.exists.to_string(),
                r.branch.map_or(String::new(), |b| b.as_str().to_string()),
                r.period.map_or(String::new(), fmt17),
                fmt17(r.bound),
                r.strict.to_string(),
            ]
        })
        .collect();
    let header = ["epsilon", "exists", "branch", "period", "bound", "strict"];
    write_atomic(out, &config.options.outputs.scan, &to_csv(&header, &rows))?;
    for r in report.rows.iter().filter(|r| r.ghost_candidate) {
        log::warn!("epsilon = {} sits on the existence bound", fmt17(r.epsilon));
    }
    if let Some((a, b)) = report.transition {
        log::info!("existence lost between {} and {}", fmt17(a), fmt17(b));
    }
    Ok(())
}

#[derive(Serialize)]
struct FamilyMember {
    rotation: usize,
    source: Branch,
    coeffs: Vec<f64>,
    radius: f64,
}

#[derive(Serialize)]
struct SampleRecord {
    k: usize,
    max_radius: f64,
}

#[derive(Serialize)]
struct SpectralReport {
    branches: &'static str,
    ratio_bound: f64,
    flagged: bool,
    family: Vec<FamilyMember>,
    samples: Vec<SampleRecord>,
    empirical_rho: Option<EmpiricalRate>,
}

fn spectral(config: &RunConfig, out: &Path) -> Result<(), CliError> {
    let params = config.params()?;
    let lengths = config.require_lengths()?;
    let opts = &config.options;
    let branches = match opts.branches {
        BranchChoice::Auto => BranchSet::for_params(&params),
        BranchChoice::Plus => BranchSet::PlusOnly,
        BranchChoice::Both => BranchSet::Both,
    };
    let ks = opts.ks.clone().unwrap_or_else(|| vec![1, 2, 4, 8, 16]);
    let estimate = estimate_contraction(
        &lengths,
        &params,
        branches,
        &ks,
        opts.trials.unwrap_or(1000),
        opts.seed.unwrap_or(0),
    )?;

    let specs = companion_family(&lengths, &params, branches)?;
    let family = specs
        .into_par_iter()
        .map(|s| {
            let radius = spectral_radius(&companion_matrix(&s)?)?;
            Ok(FamilyMember {
                rotation: s.rotation,
                source: s.source,
                coeffs: s.coeffs,
                radius,
            })
        })
        .collect::<Result<Vec<_>, defire::DefireError>>()?;

    let empirical_rho = match &config.profile {
        Some(profile) => empirical_rate(config, profile)?,
        None => None,
    };
    let report = SpectralReport {
        branches: match branches {
            BranchSet::PlusOnly => "plus",
            BranchSet::Both => "both",
        },
        ratio_bound: estimate.ratio_bound,
        flagged: estimate.flagged,
        family,
        samples: estimate
            .samples
            .iter()
            .map(|&(k, max_radius)| SampleRecord { k, max_radius })
            .collect(),
        empirical_rho,
    };
    write_atomic(out, &opts.outputs.spectral, &to_json(&report))?;
    if report.flagged {
        log::warn!(
            "ratio bound {} does not certify contraction",
            fmt17(report.ratio_bound)
        );
    }
    Ok(())
}

/// Decay rate of the distance to the periodic orbit sharing the profile's
/// trace, when that orbit exists and the run stays merge-free.
fn empirical_rate(
    config: &RunConfig,
    profile: &defire::StepProfile,
) -> Result<Option<EmpiricalRate>, CliError> {
    let params = config.params()?;
    let trace = defire::compute_traces(profile);
    let orbit = match construct_periodic(&trace, &params) {
        Ok(Some(o)) => o,
        Ok(None) | Err(_) => {
            log::info!("no reference orbit; skipping empirical rate");
            return Ok(None);
        }
    };
    let n_cycles = config.options.n_cycles.unwrap_or(200);
    let sim = simulate_with(profile, &params, n_cycles, 0.0, &engine_config(config))?;
    if sim.merge_events > 0 {
        log::info!("run merged clusters; skipping empirical rate");
        return Ok(None);
    }
    match empirical_contraction(&sim.cycles, &orbit.profile) {
        Ok(rate) => Ok(Some(rate)),
        Err(e) => {
            log::info!("empirical rate unavailable: {e}");
            Ok(None)
        }
    }
}

fn weak_coupling(config: &RunConfig, out: &Path) -> Result<(), CliError> {
    let params = config.params()?;
    let profile = config.require_profile()?;
    let solution = solve_t1_neumann(profile, &params, config.options.tol.unwrap_or(1e-14))?;
    write_atomic(
        out,
        &config.options.outputs.firing_profile,
        &to_json(&solution.firing),
    )?;
    let mu = params.mu();
    log::info!("{} Neumann iterations", solution.iterations);
    if mu < 1.0 {
        log::info!(
            "mu = {}, contraction constant {}, mu_c = {}",
            fmt17(mu),
            fmt17(contraction_constant(mu)?),
            fmt17(mu_critical())
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct OracleRecord {
    exact: f64,
    oracle: f64,
    dt: f64,
    difference: f64,
    agree: bool,
}

fn oracle_check(config: &RunConfig, out: &Path) -> Result<(), CliError> {
    let params = config.params()?;
    let profile = config.require_profile()?;
    let dt = config.options.dt.unwrap_or(DEFAULT_DT);
    let exact = first_firing(profile, &params)?.firing_time;
    let oracle = oracle_firing_time(profile, &params, dt)?;
    let difference = (exact - oracle).abs();
    // the oracle localizes the crossing to dt / 100 and rounds near ties
    let agree = difference <= dt;
    let record = OracleRecord {
        exact,
        oracle,
        dt,
        difference,
        agree,
    };
    write_atomic(out, &config.options.outputs.oracle, &to_json(&record))?;
    if !agree {
        return Err(CliError::Check(format!(
            "oracle disagrees with exact firing time by {} (dt = {})",
            fmt17(difference),
            fmt17(dt)
        )));
    }
    Ok(())
}

fn demo_discontinuity(config: &RunConfig, out: &Path) -> Result<(), CliError> {
    let params = config.params()?;
    let opts = &config.options;
    let need = |v: Option<f64>, name: &str| {
        v.ok_or_else(|| CliError::Config(format!("demo-discontinuity needs options.{name}")))
    };
    let report = discontinuity_limit(
        need(opts.x1, "x1")?,
        need(opts.base_level, "base_level")?,
        &params,
        opts.n,
    )?;
    write_atomic(out, &opts.outputs.discontinuity, &to_json(&report))?;
    log::info!(
        "jump {} above the unperturbed firing time",
        fmt17(report.upper_limit - report.unperturbed)
    );
    Ok(())
}
