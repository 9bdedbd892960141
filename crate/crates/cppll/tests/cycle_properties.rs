//! Cycle-finder guarantees checked from the outside: returned orbits close
//! under the production map, the closed-form families keep their symmetry
//! and existence windows, coexistence of a stable lock with a stable
//! three-step oscillation holds across the parameter band, and the search
//! is deterministic for any thread count.

use rayon::ThreadPoolBuilder;

use cppll::{
    classify_cycle, classify_parameters, find_cycles, period2, period3, step, CycleStability,
    DiscreteState64, NormalizedParameters64, StabilityClass, StateBox64,
};

fn np(alpha: f64, beta: f64) -> NormalizedParameters64 {
    NormalizedParameters64::new(alpha, beta).unwrap()
}

fn closure_error(points: &[DiscreteState64], npv: &NormalizedParameters64) -> f64 {
    let n = points.len();
    let mut worst: f64 = 0.0;
    for k in 0..n {
        let next = step(points[k], npv).unwrap().next.unwrap();
        let target = points[(k + 1) % n];
        worst = worst
            .max((next.p - target.p).abs())
            .max((next.u - target.u).abs());
    }
    worst
}

/// Every cycle a search returns must close under the real map to 1e−10 and
/// must be of minimal period (no divisor of the period also closes).
#[test]
fn search_results_close_under_the_real_map_at_minimal_period() {
    let npv = np(0.2, 1.7);
    let mut found_periods = Vec::new();
    for period in 1..=4 {
        let search = find_cycles(&npv, period, StateBox64::default(), 60);
        for cycle in &search.cycles {
            assert_eq!(cycle.period, period);
            assert_eq!(cycle.points.len(), period);
            assert_eq!(cycle.itinerary.len(), period);
            let err = closure_error(&cycle.points, &npv);
            assert!(
                err <= 1e-10,
                "period-{period} cycle closure error {err:e}"
            );
            for d in 1..period {
                if period % d == 0 {
                    let sub = closure_error(&cycle.points[..d], &npv);
                    assert!(
                        sub > 1e-6,
                        "period-{period} cycle also closes at period {d}"
                    );
                }
            }
            found_periods.push(period);
        }
    }
    // At this parameter pair the origin (period 1) and the three-step
    // oscillation must both be found.
    assert!(found_periods.contains(&1));
    assert!(found_periods.contains(&3));
}

/// The two-step family: second point is the exact p-negation of the first,
/// and the family exists exactly for β > 2.
#[test]
fn period2_family_is_antisymmetric_and_gated_at_two() {
    for k in 0..=100 {
        let beta = 1.5 + k as f64 * 0.03;
        match period2::<f64>(beta) {
            Some(c) => {
                assert!(beta > 2.0, "period-2 family reported at beta = {beta}");
                assert_eq!(c.points.len(), 2);
                assert_eq!(
                    c.points[1].p,
                    -c.points[0].p,
                    "p-antisymmetry broken at beta = {beta}"
                );
                let err = closure_error(&c.points, &np(0.4, beta));
                assert!(err <= 1e-10, "closure {err:e} at beta = {beta}");
            }
            None => assert!(beta <= 2.0, "period-2 family missing at beta = {beta}"),
        }
    }
}

/// Across the band where the three-step family exists, the origin is
/// simultaneously locally stable and the cycle is itself attracting — the
/// coexistence that caps the usable pull-in range.
#[test]
fn stable_lock_and_stable_period3_coexist_across_the_band() {
    let mut coexisting = 0usize;
    for alpha_tenths in 1..10 {
        let alpha = alpha_tenths as f64 / 10.0;
        for beta in [1.55, 1.6, 1.7, 1.8, 1.9, 1.95] {
            let npv = np(alpha, beta);
            let cycle = match period3(&npv) {
                Some(c) => c,
                None => continue, // family removed by the overload gate here
            };
            assert_eq!(
                classify_parameters(&npv),
                StabilityClass::LocallyStable,
                "({alpha}, {beta})"
            );
            let classified = classify_cycle(&cycle, &npv);
            assert_eq!(
                classified.stability,
                Some(CycleStability::Stable),
                "three-step cycle not attracting at ({alpha}, {beta})"
            );
            coexisting += 1;
        }
    }
    // The overload gate (cycle exists only while α < 1 + u₁(β)) thins the
    // high-β rows out: on this grid exactly 17 pairs keep the cycle.
    assert!(
        coexisting >= 15,
        "only {coexisting} coexistence points sampled"
    );
}

/// The deduplicated result set must not depend on how many worker threads
/// ran the seed refinement.
#[test]
fn searches_return_identical_results_for_any_thread_count() {
    let npv = np(0.4, 2.5);
    let run = || {
        let mut out = Vec::new();
        for period in 1..=3 {
            out.push(find_cycles(&npv, period, StateBox64::default(), 50));
        }
        serde_json::to_string(&out).unwrap()
    };
    let single = ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(run);
    let four = ThreadPoolBuilder::new()
        .num_threads(4)
        .build()
        .unwrap()
        .install(run);
    let ambient = run();
    assert_eq!(single, four, "1-thread vs 4-thread result sets differ");
    assert_eq!(single, ambient, "pool vs ambient result sets differ");
}
