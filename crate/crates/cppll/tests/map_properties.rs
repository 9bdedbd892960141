//! Cross-cutting properties of the exact one-step map: fixed point, the
//! update identity, branch totality, and continuity of the formulas across
//! the three branch-boundary curves near the origin.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cppll::{step, BranchId, DiscreteState64, NormalizedParameters64};

fn np(alpha: f64, beta: f64) -> NormalizedParameters64 {
    NormalizedParameters64::new(alpha, beta).unwrap()
}

#[test]
fn origin_is_fixed_for_random_parameters() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x51E9_0001);
    for _ in 0..500 {
        let npv = np(rng.gen_range(1e-3..3.0), rng.gen_range(1e-3..4.0));
        let r = step(DiscreteState64::new(0.0, 0.0), &npv).unwrap();
        let next = r.next.unwrap();
        assert_eq!(next.p, 0.0, "p' at origin, {npv:?}");
        assert_eq!(next.u, 0.0, "u' at origin, {npv:?}");
    }
}

#[test]
fn update_identity_and_intermediates_hold_on_random_states() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x51E9_0002);
    let mut checked = 0usize;
    while checked < 2000 {
        let npv = np(rng.gen_range(0.01..0.99), rng.gen_range(0.01..2.5));
        let s = DiscreteState64::new(rng.gen_range(-0.999..0.999), rng.gen_range(-0.99..3.0));
        let r = step(s, &npv).unwrap();
        let next = match r.next {
            Some(n) => n,
            None => continue,
        };
        // u' − u = 2β·p' to rounding, at the scale of the terms involved.
        let lhs = next.u - s.u;
        let rhs = 2.0 * npv.beta * next.p;
        let scale = 1.0 + lhs.abs().max(rhs.abs()) + s.u.abs();
        assert!(
            (lhs - rhs).abs() <= 1e-14 * scale,
            "update identity off by {:e} at {s:?}, {npv:?}",
            (lhs - rhs).abs()
        );
        // Exactly one branch family per sign of p, and every fractional
        // intermediate that was produced lies in [0, 1).
        match r.branch {
            BranchId::QuadPos | BranchId::FracPos => {
                assert!(s.p >= 0.0, "positive-pulse branch from p = {}", s.p);
                let c = r.intermediates.c.expect("c is computed for p >= 0");
                assert!(c.is_finite());
            }
            BranchId::LinNeg | BranchId::QuadNeg => {
                assert!(s.p < 0.0, "negative-pulse branch from p = {}", s.p);
                let l = r.intermediates.l.expect("l is computed for p < 0");
                assert!(l.is_finite());
            }
        }
        if let Some(sr) = r.intermediates.s_raw {
            let frac = sr - sr.floor();
            assert!((0.0..1.0).contains(&frac), "frac(S) = {frac} out of range");
        }
        checked += 1;
    }
}

/// Straddles each branch-boundary curve with a 1e−12 offset near the origin
/// and checks the two adjacent closed forms continue each other to 1e−10.
#[test]
fn branch_formulas_agree_across_their_boundary_curves() {
    let npv = np(0.35, 0.8);
    let tiny = 1e-12;
    let radii = [1e-3, 1e-2, 0.05, 0.15];
    let mut worst: f64 = 0.0;
    let mut check = |a: DiscreteState64, b: DiscreteState64, what: &str| {
        let ra = step(a, &npv).unwrap();
        let rb = step(b, &npv).unwrap();
        let (na, nb) = (ra.next.unwrap(), rb.next.unwrap());
        let d = (na.p - nb.p).abs().max((na.u - nb.u).abs());
        worst = worst.max(d);
        assert!(
            d <= 1e-10,
            "{what}: {:?} vs {:?} give |delta| = {d:e} ({} vs {})",
            a,
            b,
            ra.branch.name(),
            rb.branch.name()
        );
    };
    for &r in &radii {
        // Sign change of p (curve p = 0), approached from both half-planes,
        // above and below the origin.
        for u in [r, -r * 0.4] {
            check(
                DiscreteState64::new(tiny, u),
                DiscreteState64::new(-tiny, u),
                "p = 0 crossing",
            );
        }
        // Sign change of c: the curve u = p/(1−p) separates the two
        // positive-pulse formulas.
        let p = r;
        let u_curve = p / (1.0 - p);
        check(
            DiscreteState64::new(p, u_curve + tiny),
            DiscreteState64::new(p, u_curve - tiny),
            "c = 0 crossing",
        );
        // l = 1: for p < 0 the curve u = p(1−α−βp)/(1−p) separates the two
        // negative-pulse formulas.
        let p = -r;
        let u_curve = p * (1.0 - npv.alpha - npv.beta * p) / (1.0 - p);
        check(
            DiscreteState64::new(p, u_curve + tiny),
            DiscreteState64::new(p, u_curve - tiny),
            "l = 1 crossing",
        );
    }
    println!("branch boundary continuity: worst |delta| = {worst:.3e}");
}

/// The boundary checks above at one parameter pair, repeated across random
/// parameters so the continuity is not an artifact of a lucky (α, β).
#[test]
fn boundary_continuity_holds_for_random_parameters() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x51E9_0003);
    for _ in 0..50 {
        let npv = np(rng.gen_range(0.05..0.95), rng.gen_range(0.1..1.9));
        let tiny = 1e-12;
        let r = rng.gen_range(1e-3..0.1);
        let pairs = [
            (
                DiscreteState64::new(tiny, r),
                DiscreteState64::new(-tiny, r),
            ),
            (
                DiscreteState64::new(r, r / (1.0 - r) + tiny),
                DiscreteState64::new(r, r / (1.0 - r) - tiny),
            ),
            (
                DiscreteState64::new(-r, -r * (1.0 - npv.alpha + npv.beta * r) / (1.0 + r) + tiny),
                DiscreteState64::new(-r, -r * (1.0 - npv.alpha + npv.beta * r) / (1.0 + r) - tiny),
            ),
        ];
        for (a, b) in pairs {
            let na = step(a, &npv).unwrap().next.unwrap();
            let nb = step(b, &npv).unwrap().next.unwrap();
            let d = (na.p - nb.p).abs().max((na.u - nb.u).abs());
            assert!(
                d <= 1e-10,
                "boundary jump {d:e} near {a:?} at ({}, {})",
                npv.alpha,
                npv.beta
            );
        }
    }
}
