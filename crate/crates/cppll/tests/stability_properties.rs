//! Stability-analysis guarantees exercised against the real trajectories:
//! the parameter classification must predict observable lock behavior, the
//! piecewise differential must be continuous across its cone boundaries,
//! and the exportable records must carry the documented fields.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cppll::linalg::Vec2;
use cppll::{
    classification_record, classify_parameters, continuity_check, differential_apply, iterate,
    lasalle_check, linearized_pieces, DiscreteState64, NormalizedParameters64, StabilityClass,
    Termination,
};

fn np(alpha: f64, beta: f64) -> NormalizedParameters64 {
    NormalizedParameters64::new(alpha, beta).unwrap()
}

/// A locally-stable verdict must show up as observed locking from the four
/// small diagonal starts; an unstable-β verdict as failure to lock.
#[test]
fn classification_predicts_lock_behavior_from_small_starts() {
    let starts = [
        DiscreteState64::new(0.01, 0.01),
        DiscreteState64::new(0.01, -0.01),
        DiscreteState64::new(-0.01, 0.01),
        DiscreteState64::new(-0.01, -0.01),
    ];
    for alpha in [0.1, 0.3, 0.5, 0.7, 0.9] {
        for beta in [0.2, 0.7, 1.2, 1.45, 1.55, 1.7, 1.9] {
            let npv = np(alpha, beta);
            assert_eq!(classify_parameters(&npv), StabilityClass::LocallyStable);
            for s0 in starts {
                let traj = iterate(s0, &npv, 10_000, 1e-6, 10).unwrap();
                assert_eq!(
                    traj.termination,
                    Termination::Locked,
                    "({alpha}, {beta}) from {s0:?} ended {:?}",
                    traj.termination
                );
            }
        }
        for beta in [2.05, 2.5, 2.9] {
            let npv = np(alpha, beta);
            assert_eq!(classify_parameters(&npv), StabilityClass::UnstableBeta);
            let traj = iterate(DiscreteState64::new(-0.01, -0.01), &npv, 10_000, 1e-6, 10)
                .unwrap();
            assert_ne!(
                traj.termination,
                Termination::Locked,
                "({alpha}, {beta}) locked despite the expanding direction"
            );
        }
    }
}

/// At exactly β = 3/2 the linearization conserves V on a continuum of
/// three-step orbits, so the approach to lock is a power law driven by the
/// nonlinear terms alone: still classified locally stable, but no finite
/// lock window at a 1e−6 tolerance is reachable in practice, and the
/// contraction certificate reports the stall instead of an exponent.
#[test]
fn marginal_beta_decays_without_reaching_a_lock_window() {
    let npv = np(0.5, 1.5);
    assert_eq!(classify_parameters(&npv), StabilityClass::LocallyStable);
    assert!(matches!(
        cppll::contraction_certificate(&npv, 0.5),
        Err(cppll::CertificationFailure::Stalled { .. })
    ));
    let traj = iterate(DiscreteState64::new(0.01, 0.01), &npv, 700_000, 1e-6, 10).unwrap();
    assert_eq!(traj.termination, Termination::MaxSteps);
    let last = traj.states.last().unwrap();
    let norm = last.p.abs().max(last.u.abs());
    assert!(
        norm <= 2e-3,
        "state failed to decay at the marginal parameter: {norm:e}"
    );
    assert!(norm > 0.0, "unexpected exact lock at the marginal parameter");
}

/// The four cone matrices continue each other exactly on the shared rays,
/// and the assembled differential is continuous when a state is nudged
/// across each boundary.
#[test]
fn differential_is_continuous_across_every_cone_boundary() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x57AB_0001);
    for _ in 0..40 {
        let npv = np(rng.gen_range(0.05..0.95), rng.gen_range(0.1..2.5));
        let report = continuity_check(&linearized_pieces(&npv));
        assert!(
            report.max_mismatch <= 1e-12,
            "ray mismatch {:e} at ({}, {})",
            report.max_mismatch,
            npv.alpha,
            npv.beta
        );

        // Straddle each boundary ray by a relative 1e−12 and compare the
        // assembled differential's two one-sided values.
        let slope = 1.0 - npv.alpha;
        let r = rng.gen_range(0.5..2.0);
        let rays = [
            Vec2::new(r, r),          // shared by the two p ≥ 0 cones
            Vec2::new(0.0, r),        // p = 0, upper
            Vec2::new(-r, -slope * r), // u = (1−α)p, p ≤ 0
            Vec2::new(0.0, -r),       // p = 0, lower
        ];
        for ray in rays {
            let normal = Vec2::new(-ray.y, ray.x).scale(1e-12 / r);
            let a = differential_apply(ray.add(normal), &npv);
            let b = differential_apply(ray.sub(normal), &npv);
            let d = a.sub(b).inf_norm();
            assert!(
                d <= 1e-10,
                "differential jumps by {d:e} across ray {ray:?} at ({}, {})",
                npv.alpha,
                npv.beta
            );
        }
    }
}

/// The V-conservation set: the decrement is exactly zero on the fractional
/// cone and on the ray it maps onto, and strictly negative on directions
/// bounded away from that set (sampled).
#[test]
fn decrement_zero_set_matches_the_invariant_rays() {
    for (alpha, beta) in [(0.3, 0.8), (0.5, 1.0), (0.7, 1.6), (0.2, 1.9)] {
        let npv = np(alpha, beta);
        let report = lasalle_check(&npv, 720).unwrap();
        assert!(report.samples_on > 0 && report.samples_off > 0);
        assert!(
            report.max_abs_on_zero_set <= 1e-12,
            "V moved by {:e} on the conserving set at ({alpha}, {beta})",
            report.max_abs_on_zero_set
        );
        assert!(
            report.worst_off_zero_set < 0.0,
            "V failed to strictly decrease off the conserving set at ({alpha}, {beta})"
        );
    }
}

/// Exportable records round-trip through JSON with the documented fields:
/// parameters, class, Lyapunov matrix when it exists, witness eigenvalue
/// when one exists.
#[test]
fn classification_records_serialize_with_documented_fields() {
    let stable = classification_record(&np(0.5, 1.0));
    let v = serde_json::to_value(&stable).unwrap();
    assert_eq!(v["alpha"], 0.5);
    assert_eq!(v["beta"], 1.0);
    assert_eq!(v["class"], "LocallyStable");
    assert!(v["h"].is_object() || v["h"].is_array());
    assert!(v["witness_lambda1"].is_null());

    let unstable = classification_record(&np(0.5, 2.5));
    let v = serde_json::to_value(&unstable).unwrap();
    assert_eq!(v["class"], "UnstableBeta");
    assert!(v["h"].is_null());
    assert!(v["witness_lambda1"].as_f64().unwrap() > 1.0);

    let round: cppll::ClassificationRecord<f64> =
        serde_json::from_value(serde_json::to_value(&unstable).unwrap()).unwrap();
    assert_eq!(round, unstable);

    let cert = cppll::contraction_certificate(&np(0.5, 1.0), 0.5).unwrap();
    let v = serde_json::to_value(&cert).unwrap();
    assert!(v["m"].as_u64().unwrap() >= 1);
    let round: cppll::LyapunovCertificate64 =
        serde_json::from_value(serde_json::to_value(&cert).unwrap()).unwrap();
    assert_eq!(round, cert);
}
