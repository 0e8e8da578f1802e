use nalgebra::{Matrix3, Vector3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qcomp_core::channel::{channel_distance, compose, factorize, is_cptp, random_cptp, AffineChannel};
use qcomp_core::decomposer::{build_elementary_set, decompose_channel, length_bound, replay};
use qcomp_core::linalg::{
    bloch_to_su2, fidelity_distance, haar_unitary, phase_normalize, su2_to_bloch, BlochRotation,
};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_rotation(r: &mut ChaCha8Rng) -> BlochRotation {
    su2_to_bloch(&haar_unitary(r))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn fidelity_distance_is_left_invariant(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (u, v, w) = (haar_unitary(&mut r), haar_unitary(&mut r), haar_unitary(&mut r));
        let lhs = fidelity_distance(&w.mul(&u), &w.mul(&v));
        prop_assert!((lhs - fidelity_distance(&u, &v)).abs() < 1e-10);
    }

    #[test]
    fn bloch_map_is_homomorphism(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (u, v) = (haar_unitary(&mut r), haar_unitary(&mut r));
        let lhs = su2_to_bloch(&u.mul(&v));
        let rhs = su2_to_bloch(&u).mul(&su2_to_bloch(&v));
        prop_assert!((lhs.matrix() - rhs.matrix()).norm() < 1e-9);
    }

    #[test]
    fn bloch_round_trip(seed in any::<u64>()) {
        let mut r = rng(seed);
        let rot = random_rotation(&mut r);
        let back = su2_to_bloch(&bloch_to_su2(&rot).unwrap());
        prop_assert!((back.matrix() - rot.matrix()).norm() < 1e-8);
    }

    #[test]
    fn phase_normalize_is_idempotent(seed in any::<u64>()) {
        let mut r = rng(seed);
        let u = phase_normalize(&haar_unitary(&mut r));
        prop_assert!((phase_normalize(&u).matrix() - u.matrix()).norm() < 1e-12);
    }

    #[test]
    fn random_channels_are_cptp_and_fit_the_ball(seed in any::<u64>(), rank in 1usize..5) {
        let mut r = rng(seed);
        let e = random_cptp(&mut r, rank);
        prop_assert!(is_cptp(&e).is_cptp);
        for _ in 0..20 {
            let a = Vector3::from_fn(|_, _| r.random_range(-1.0..1.0f64));
            if a.norm() > 0.0 {
                prop_assert!(e.apply(&a.normalize()).norm() <= 1.0 + 1e-9);
            }
        }
    }

    #[test]
    fn determinant_never_grows_under_composition(seed in any::<u64>()) {
        let mut r = rng(seed);
        let a = random_cptp(&mut r, 2);
        let b = random_cptp(&mut r, 3);
        let d = compose(&a, &b).distortion().determinant().abs();
        let bound = a.distortion().determinant().abs().min(b.distortion().determinant().abs());
        prop_assert!(d <= bound + 1e-12);
    }

    #[test]
    fn distance_is_a_metric(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (a, b, c) = (random_cptp(&mut r, 2), random_cptp(&mut r, 2), random_cptp(&mut r, 4));
        prop_assert_eq!(channel_distance(&a, &b), channel_distance(&b, &a));
        prop_assert!(channel_distance(&a, &c) <= channel_distance(&a, &b) + channel_distance(&b, &c) + 1e-9);
        prop_assert!(channel_distance(&a, &a) == 0.0);
    }

    #[test]
    fn factorization_reassembles_with_sign_parity(seed in any::<u64>()) {
        let mut r = rng(seed);
        let e = { let k = r.random_range(1..5); random_cptp(&mut r, k) };
        let f = factorize(&e);
        let back = f.reassemble();
        prop_assert!((back.distortion() - e.distortion()).norm() < 1e-9);
        prop_assert!((back.shift() - e.shift()).norm() < 1e-9);
        prop_assert!(f.diag_magnitudes[0] >= f.diag_magnitudes[1] && f.diag_magnitudes[1] >= f.diag_magnitudes[2]);
        let det = e.distortion().determinant();
        if det.abs() > 1e-12 {
            let parity: f64 = f.diag_signs.iter().product();
            prop_assert_eq!(parity, det.signum());
        }
    }

    #[test]
    fn plans_replay_within_epsilon(seed in any::<u64>(), eps_idx in 0usize..3) {
        let eps = [0.35, 0.14, 0.07][eps_idx];
        let mut r = rng(seed);
        let target = { let k = r.random_range(1..5); random_cptp(&mut r, k) };
        let plan = decompose_channel(&target, eps).unwrap();
        let d = channel_distance(&replay(&plan).unwrap(), &target);
        prop_assert!(d <= eps + 1e-9, "distance {} > {}", d, eps);
        prop_assert!(plan.elementary_ids.len() <= length_bound(eps).unwrap());
        prop_assert_eq!(plan.orientation_reversing,
            plan.pre_map.orientation() < 0 || plan.final_map.orientation() < 0);
    }

    #[test]
    fn plans_are_deterministic(seed in any::<u64>()) {
        let mut r = rng(seed);
        let target = random_cptp(&mut r, 2);
        let a = decompose_channel(&target, 0.14).unwrap().to_json_line();
        let b = decompose_channel(&target, 0.14).unwrap().to_json_line();
        prop_assert_eq!(a, b);
    }
}

/// `min |eigenvalue|` of a real 3×3 matrix.
fn min_eigen_modulus(m: &Matrix3<f64>) -> f64 {
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min)
}

#[test]
fn determinant_gap_bounds_distance_on_seeded_pairs() {
    let mut r = rng(1);
    let mut tested = 0;
    while tested < 200 {
        let a = { let k = r.random_range(1..3); random_cptp(&mut r, k) };
        let b = { let k = r.random_range(2..5); random_cptp(&mut r, k) };
        let (da, db) = (a.distortion().determinant().abs(), b.distortion().determinant().abs());
        let (e1, e2, gap) = if da > db { (a, b, da - db) } else { (b, a, db - da) };
        let cap = min_eigen_modulus(e1.distortion());
        let eps = 0.999 * (gap / 6.0).min(cap);
        if eps <= 0.0 {
            continue;
        }
        assert!(channel_distance(&e1, &e2) > eps);
        tested += 1;
    }
}

#[test]
fn determinant_dichotomy_blocks_compilation() {
    let set = build_elementary_set(0.7).unwrap();
    let d1 = set
        .channels()
        .iter()
        .map(|c| c.distortion().determinant().abs())
        .fold(0.0, f64::max);
    assert!(d1 < 1.0);
    let target_det: f64 = (1.0 + d1) / 2.0;
    let target = AffineChannel::diagonal([target_det.cbrt(); 3], [0.0; 3]).unwrap();
    let eps = 0.99 * (1.0 - d1) / 12.0;

    let mut r = rng(2);
    for _ in 0..1000 {
        let len = r.random_range(0..12);
        let mut acc = AffineChannel::from_rotation(&random_rotation(&mut r));
        for _ in 0..len {
            let id = r.random_range(1..=14u8);
            acc = compose(set.channel(id).unwrap(), &acc);
            acc = compose(&AffineChannel::from_rotation(&random_rotation(&mut r)), &acc);
        }
        let det = acc.distortion().determinant().abs();
        assert!(det <= d1 + 1e-12 || (det - 1.0).abs() <= 1e-12, "det {det}");
        assert!(channel_distance(&acc, &target) > eps);
    }
}

#[test]
fn max_plan_length_scales_as_inverse_delta_log() {
    let mut r = rng(3);
    let targets: Vec<_> = (0..50).map(|_| random_cptp(&mut r, 2)).collect();
    for eps in [0.35, 0.14, 0.07, 0.035] {
        let delta: f64 = eps / 7.0;
        let max_len = targets
            .iter()
            .map(|t| decompose_channel(t, eps).unwrap().elementary_ids.len())
            .max()
            .unwrap();
        assert!((max_len as f64) <= 3.0 * (1.0 / delta) * (1.0 / delta).ln());
    }
}
