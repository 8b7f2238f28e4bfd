#![allow(dead_code)]

use defire::{validate_profile, Params, StepProfile, Trace};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

/// Positive lengths summing to 1, none below `0.2 / n` relative weight.
pub fn lengths(rng: &mut StdRng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..1.0)).collect();
    let total: f64 = w.iter().sum();
    let mut l: Vec<f64> = w.iter().map(|x| x / total).collect();
    // absorb rounding into the last entry so the sum is 1 to the last bit
    let head: f64 = l[..n - 1].iter().sum();
    l[n - 1] = 1.0 - head;
    l
}

/// Strictly increasing levels in `(low, 1]` ending at 1.
pub fn levels(rng: &mut StdRng, n: usize, low: f64) -> Vec<f64> {
    loop {
        let mut u: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(low..1.0)).collect();
        u.sort_by(f64::total_cmp);
        u.push(1.0);
        if u.windows(2).all(|w| w[1] - w[0] > 1e-6) {
            return u;
        }
    }
}

pub fn params(rng: &mut StdRng) -> Params {
    let eta = rng.gen_range(0.02..0.5);
    let epsilon = rng.gen_range(0.02..0.98 / eta);
    Params::new(epsilon, eta).unwrap()
}

pub fn params_with_epsilon(rng: &mut StdRng, lo: f64, hi: f64) -> Params {
    loop {
        let eta = rng.gen_range(0.02..0.5);
        let epsilon = rng.gen_range(lo..hi);
        if let Ok(p) = Params::new(epsilon, eta) {
            return p;
        }
    }
}

/// Random profile with `1..=max_n` clusters that passes validation for `params`.
pub fn valid_profile(rng: &mut StdRng, max_n: usize, params: &Params) -> StepProfile {
    loop {
        let n = rng.gen_range(1..=max_n);
        let p = StepProfile::new(lengths(rng, n), levels(rng, n, 0.02)).unwrap();
        if validate_profile(&p, params).is_valid() {
            return p;
        }
    }
}

pub fn instance(rng: &mut StdRng, max_n: usize) -> (StepProfile, Params) {
    let params = params(rng);
    (valid_profile(rng, max_n, &params), params)
}

/// Random trace of disjoint plateaus, possibly with gaps, possibly tiling.
pub fn trace(rng: &mut StdRng) -> Trace {
    let n = rng.gen_range(0..10);
    let mut cuts: Vec<f64> = (0..2 * n).map(|_| rng.gen_range(0.0..1.0)).collect();
    cuts.sort_by(f64::total_cmp);
    let mut plateaus: Vec<(f64, f64)> = cuts
        .chunks(2)
        .filter(|c| c[1] - c[0] > 1e-9)
        .map(|c| (c[0], c[1]))
        .collect();
    if rng.gen_bool(0.3) {
        if let Some(last) = plateaus.last_mut() {
            last.1 = 1.0;
        }
    }
    if rng.gen_bool(0.3) {
        if let Some(first) = plateaus.first_mut() {
            first.0 = 0.0;
        }
    }
    Trace::new(plateaus).unwrap()
}
