//! Brute-force time stepping of the decay dynamics, used to cross-check the
//! closed-form firing times. Shares no code with the engine.

use crate::error::{DefireError, Result};
use crate::profile::{Params, StepProfile};

pub const DEFAULT_DT: f64 = 1e-6;

fn min_repressor(lengths: &[f64], levels: &[f64], mu: f64) -> f64 {
    let mean: f64 = lengths.iter().zip(levels).map(|(l, u)| l * u).sum();
    levels
        .iter()
        .map(|u| (1.0 - mu) * u + mu * mean)
        .fold(f64::INFINITY, f64::min)
}

fn decayed(levels: &[f64], by: f64, out: &mut [f64]) {
    for (o, u) in out.iter_mut().zip(levels) {
        *o = (u - by).max(0.0);
    }
}

/// First time the lowest repressor level reaches `eta`, by explicit
/// stepping with step `dt` and bisection inside the bracketing step down to
/// `dt / 100`.
pub fn oracle_firing_time(profile: &StepProfile, params: &Params, dt: f64) -> Result<f64> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(DefireError::InvalidArgument(format!(
            "dt must be positive, got {dt}"
        )));
    }
    params.check()?;
    let mu = params.mu();
    let horizon = 2.0 / (1.0 - mu);
    let lengths = profile.lengths();
    let mut levels = profile.levels().to_vec();
    let mut scratch = levels.clone();

    let mut step: u64 = 0;
    loop {
        if min_repressor(lengths, &levels, mu) <= params.eta {
            break;
        }
        step += 1;
        if step as f64 * dt > horizon {
            return Err(DefireError::NoFiringWithinHorizon { horizon });
        }
        for u in &mut levels {
            *u = (*u - dt).max(0.0);
        }
    }
    if step == 0 {
        return Ok(0.0);
    }

    // Undo the last decrement, then bisect on the offset inside the step.
    let start = profile.levels();
    let base = (step - 1) as f64 * dt;
    let (mut lo, mut hi) = (0.0, dt);
    while hi - lo > dt / 100.0 {
        let mid = 0.5 * (lo + hi);
        decayed(start, base + mid, &mut scratch);
        if min_repressor(lengths, &scratch, mu) <= params.eta {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(base + hi)
}
