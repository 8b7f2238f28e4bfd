//! Cross-checks against independent computations: dense eigenvalue solvers
//! and finite-difference Jacobians of the firing map.

mod common;

use defire::*;
use nalgebra::{Complex, DMatrix};
use rand::Rng;

fn dense(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)])
}

fn eigenvalues(m: &DMatrix<f64>) -> Vec<Complex<f64>> {
    m.complex_eigenvalues().iter().copied().collect()
}

fn dense_radius(m: &DMatrix<f64>) -> f64 {
    eigenvalues(m).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest distance from an eigenvalue of `a` to its greedy partner in `b`.
fn spectrum_gap(a: &[Complex<f64>], b: &[Complex<f64>]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut pool = b.to_vec();
    let mut worst: f64 = 0.0;
    for z in a {
        let (i, d) = pool
            .iter()
            .map(|w| (w - z).norm())
            .enumerate()
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap();
        worst = worst.max(d);
        pool.swap_remove(i);
    }
    worst
}

/// Jacobian of one firing, in the coordinates `u_1 … u_{N-1}` (top pinned at 1),
/// by central differences.
fn firing_jacobian(profile: &StepProfile, params: &Params, h: f64) -> (DMatrix<f64>, Branch) {
    let k = profile.len() - 1;
    let base = first_firing(profile, params).unwrap();
    let mut jac = DMatrix::zeros(k, k);
    for j in 0..k {
        let shifted = |delta: f64| {
            let mut u = profile.levels().to_vec();
            u[j] += delta;
            let p = StepProfile::new(profile.lengths().to_vec(), u).unwrap();
            let out = first_firing(&p, params).unwrap();
            assert_eq!(out.branch, base.branch);
            assert_eq!(out.post_profile.len(), profile.len());
            out.post_profile.levels()[..k].to_vec()
        };
        let (up, down) = (shifted(h), shifted(-h));
        for i in 0..k {
            jac[(i, j)] = (up[i] - down[i]) / (2.0 * h);
        }
    }
    (jac, base.branch)
}

#[test]
fn spectral_radius_matches_dense_solver() {
    let mut rng = common::rng(11);
    for _ in 0..300 {
        let n = rng.gen_range(1..=8);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let m = Matrix::from_rows(&rows).unwrap();
        let ours = spectral_radius(&m).unwrap();
        let theirs = dense_radius(&dense(&m));
        assert!(
            (ours - theirs).abs() <= 1e-9 * theirs.max(1.0),
            "{ours} vs {theirs} for {rows:?}"
        );
    }
}

#[test]
fn companion_words_match_dense_solver() {
    let mut rng = common::rng(12);
    for _ in 0..100 {
        let n = rng.gen_range(2..=7);
        let lengths = common::lengths(&mut rng, n);
        let params = common::params(&mut rng);
        let family: Vec<Matrix> = companion_family(&lengths, &params, BranchSet::Both)
            .unwrap()
            .iter()
            .map(|s| companion_matrix(s).unwrap())
            .collect();
        let word: Vec<usize> = (0..rng.gen_range(1..10))
            .map(|_| rng.gen_range(0..family.len()))
            .collect();
        let product = word_product(&family, &word).unwrap();
        let ours = spectral_radius(&product).unwrap();
        let theirs = dense_radius(&dense(&product));
        assert!(
            (ours - theirs).abs() <= 1e-8 * theirs.max(1.0),
            "{ours} vs {theirs}"
        );
    }
}

#[test]
fn companion_characteristic_polynomial() {
    // det(λI - C) = λ^K + a_K λ^{K-1} + … + a_1
    let a = [0.3, -0.2, 0.7, 0.1];
    let spec = CompanionSpec {
        coeffs: a.to_vec(),
        source: Branch::Plus,
        rotation: 0,
    };
    let c = dense(&companion_matrix(&spec).unwrap());
    for z in eigenvalues(&c) {
        let p = a
            .iter()
            .enumerate()
            .fold(z.powu(4), |acc, (i, &ai)| acc + z.powu(i as u32) * ai);
        assert!(p.norm() <= 1e-10, "residual {p} at {z}");
    }
}

#[test]
fn plus_firing_jacobian_is_the_rotated_companion() {
    let mut rng = common::rng(13);
    let mut checked = 0;
    while checked < 60 {
        let params = common::params_with_epsilon(&mut rng, 0.05, 1.0);
        let n = rng.gen_range(2..=7);
        let lengths = common::lengths(&mut rng, n);
        let start = StepProfile::new(lengths.clone(), common::levels(&mut rng, n, 0.1)).unwrap();
        let Ok(cycle) = full_cycle(&start, &params) else {
            continue;
        };
        if cycle.merge_count() > 0 || cycle.post_profile.len() != n {
            continue;
        }
        // pre-firing profile of the r-th firing carries lengths rotated by r
        let mut current = start;
        for r in 0..n {
            let (jac, branch) = firing_jacobian(&current, &params, 1e-6);
            assert_eq!(branch, Branch::Plus);
            let (plus, _) = branch_coeffs(&lengths, &params, r).unwrap();
            let companion = dense(&companion_matrix(&plus).unwrap());
            let gap = spectrum_gap(&eigenvalues(&jac), &eigenvalues(&companion));
            // multiple roots amplify the finite-difference error to its root
            assert!(gap <= 1e-4, "rotation {r}: gap {gap}");
            assert!(
                (jac.determinant() - (-1f64).powi(n as i32 - 1) * plus.coeffs[0]).abs() <= 1e-7
            );
            current = first_firing(&current, &params).unwrap().post_profile;
        }
        checked += 1;
    }
}

#[test]
fn minus_firing_jacobian_is_the_shifted_companion() {
    // A single zeroed cluster firing on the minus branch gives the coefficients
    // a_1 = 0, a_n = Σ_{m=2}^{n} ℓ_m / (1 - ℓ_1): the library vector moved up
    // by one index.
    let mut rng = common::rng(14);
    let mut checked = 0;
    while checked < 60 {
        let params = common::params_with_epsilon(&mut rng, 1.2, 8.0);
        let n = rng.gen_range(3..=7);
        let lengths = common::lengths(&mut rng, n);
        let mut levels = common::levels(&mut rng, n, 0.3);
        levels[0] = rng.gen_range(0.01..0.2);
        let Ok(profile) = StepProfile::new(lengths.clone(), levels) else {
            continue;
        };
        if !validate_profile(&profile, &params).is_valid() {
            continue;
        }
        let Ok(out) = first_firing(&profile, &params) else {
            continue;
        };
        if out.branch != Branch::Minus || out.merge_extent != 1 {
            continue;
        }
        // the firing time must not cross the next cluster under perturbation
        if profile.levels()[1] - out.firing_time < 1e-4
            || out.firing_time - profile.levels()[0] < 1e-4
        {
            continue;
        }
        let (jac, branch) = firing_jacobian(&profile, &params, 1e-7);
        assert_eq!(branch, Branch::Minus);
        let (_, minus) = branch_coeffs(&lengths, &params, 0).unwrap();
        let mut shifted = vec![0.0];
        shifted.extend_from_slice(&minus.coeffs[..n - 2]);
        let spec = CompanionSpec {
            coeffs: shifted,
            source: Branch::Minus,
            rotation: 0,
        };
        let companion = dense(&companion_matrix(&spec).unwrap());
        let gap = spectrum_gap(&eigenvalues(&jac), &eigenvalues(&companion));
        assert!(gap <= 1e-4, "gap {gap}");
        checked += 1;
    }
}

#[test]
fn periodic_orbit_matches_brute_force_fixed_point() {
    // Iterate the exact cycle map on a profile with the orbit's trace and
    // compare with the closed form.
    let mut rng = common::rng(15);
    let mut checked = 0;
    while checked < 40 {
        let params = common::params_with_epsilon(&mut rng, 0.05, 0.95);
        let n = rng.gen_range(2..=6);
        let profile = StepProfile::new(
            common::lengths(&mut rng, n),
            common::levels(&mut rng, n, 0.1),
        )
        .unwrap();
        if !validate_profile(&profile, &params).is_valid() {
            continue;
        }
        let orbit = construct_periodic(&compute_traces(&profile), &params)
            .unwrap()
            .unwrap();
        let sim = simulate(&profile, &params, 10_000, 1e-14).unwrap();
        if !sim.converged || sim.final_profile().unwrap().len() != n {
            continue;
        }
        let d = l1_distance(sim.final_profile().unwrap(), &orbit.profile).unwrap();
        assert!(d <= 1e-9, "distance {d}");
        let period = sim.cycles.last().unwrap().return_time;
        assert!((period - orbit.period).abs() <= 1e-9);
        checked += 1;
    }
}

#[test]
fn json_round_trips() {
    let mut rng = common::rng(16);
    let (profile, params) = common::instance(&mut rng, 6);
    let text = serde_json::to_string(&profile).unwrap();
    let back: StepProfile = serde_json::from_str(&text).unwrap();
    assert_eq!(back, profile);

    let trace = compute_traces(&profile);
    let back: Trace = serde_json::from_str(&serde_json::to_string(&trace).unwrap()).unwrap();
    assert_eq!(back, trace);

    let text = serde_json::to_string(&params).unwrap();
    let back: Params = serde_json::from_str(&text).unwrap();
    assert_eq!(back, params);
}

#[test]
fn malformed_json_is_rejected() {
    for bad in [
        r#"{"lengths":[0.5,0.5],"levels":[0.2]}"#,
        r#"{"lengths":[],"levels":[]}"#,
        r#"{"lengths":[0.5],"levels":[1.0],"extra":1}"#,
    ] {
        assert!(serde_json::from_str::<StepProfile>(bad).is_err(), "{bad}");
    }
    for bad in [
        r#"{"plateaus":[[0.4,0.2]]}"#,
        r#"{"plateaus":[[0.1,0.5],[0.4,0.6]]}"#,
        r#"{"plateaus":[[-0.1,0.5]]}"#,
    ] {
        assert!(serde_json::from_str::<Trace>(bad).is_err(), "{bad}");
    }
}

#[test]
fn well_formed_but_invalid_profiles_are_reported() {
    // shape is checked on parse, admissibility by validation
    let params = Params::new(1.0, 0.2).unwrap();
    for text in [
        r#"{"lengths":[0.5,0.6],"levels":[0.2,1.0]}"#,
        r#"{"lengths":[0.5,0.5],"levels":[0.6,0.2]}"#,
    ] {
        let profile: StepProfile = serde_json::from_str(text).unwrap();
        assert!(!validate_profile(&profile, &params).is_valid(), "{text}");
    }
}
