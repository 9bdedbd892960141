//! Sweep-engine guarantees: grids and pull-in estimates are bit-identical
//! for any worker-thread count, the first-step map splits the state box
//! into the documented regions, and exports carry the data they claim.

use rayon::ThreadPoolBuilder;

use cppll::{
    basin_map, branch_map, empirical_pull_in, grid_csv, grid_svg, param_map, AxisSpec,
    BasinOptions, BranchCell, BranchId, GridCell, NormalizedParameters64, PhysicalParameters64,
    PullInOptions, StateBox64, SweepError,
};

fn np(alpha: f64, beta: f64) -> NormalizedParameters64 {
    NormalizedParameters64::new(alpha, beta).unwrap()
}

/// The criterion family used throughout: β grows as 1.7·T² with K = I_p = 1,
/// R = 0.2 Ω, C = 1/3.4 F, so β crosses the three-step threshold at T = 1 s.
fn family() -> PhysicalParameters64 {
    PhysicalParameters64::new(0.2, 1.0 / 3.4, 1.0, 1.0, 1.0, 0.0).unwrap()
}

#[test]
fn grids_are_identical_for_any_thread_count() {
    let npv = np(0.2, 1.7);
    let opts = BasinOptions {
        max_steps: 2000,
        ..BasinOptions::default()
    };
    let run_basin = || {
        serde_json::to_string(&basin_map(
            &npv,
            StateBox64::default(),
            (40, 32),
            &opts,
        ))
        .unwrap()
    };
    let run_params = || {
        serde_json::to_string(&param_map(
            AxisSpec::new(0.1, 0.9, 24),
            AxisSpec::new(0.1, 2.4, 24),
            None,
            &BasinOptions::default(),
        ))
        .unwrap()
    };
    let pool1 = ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let pool7 = ThreadPoolBuilder::new().num_threads(7).build().unwrap();
    assert_eq!(
        pool1.install(run_basin),
        pool7.install(run_basin),
        "basin grid depends on thread count"
    );
    assert_eq!(run_basin(), pool1.install(run_basin));
    assert_eq!(
        pool1.install(run_params),
        pool7.install(run_params),
        "parameter grid depends on thread count"
    );
}

#[test]
fn pull_in_estimate_is_deterministic_and_reports_cleanly() {
    let phys = family();
    let opts = PullInOptions {
        samples: 256,
        max_steps: 20_000,
        ..PullInOptions::default()
    };
    let run = || empirical_pull_in(&phys, 0.05, 1.0, &opts).unwrap();
    let a = run();
    let pool1 = ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let b = pool1.install(run);
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap(),
        "pull-in result depends on thread count"
    );
    assert!(!a.at_upper_bound);
    assert!(a.t_ref_seconds < 1.0);
    assert!(a.bracket.0 <= a.t_ref_seconds && a.t_ref_seconds < a.bracket.1);
    // The evaluations walk is recorded, bracketed failures carry the exact
    // first failing sample, and no monotonicity violation was observed on
    // this family.
    assert!(a.evaluations.len() >= 2);
    let failing = a
        .evaluations
        .iter()
        .find(|e| !e.all_locked)
        .expect("some period failed inside the range");
    assert!(failing.first_failing.is_some());
    assert!(a.monotonicity_findings.is_empty());
}

#[test]
fn pull_in_empty_range_error_carries_the_failing_low_end() {
    let phys = family();
    // At T = 2 s the family sits far beyond the unstable threshold; even the
    // low end of the range fails, which must be the typed error, not a value.
    match empirical_pull_in(&phys, 2.0, 3.0, &PullInOptions::default()) {
        Err(SweepError::EmptyRange {
            t_lo_seconds,
            sample_index,
        }) => {
            assert_eq!(t_lo_seconds, 2.0);
            let _ = sample_index;
        }
        other => panic!("expected the empty-range error, got {other:?}"),
    }
}

/// At overload-free parameters the first-step map must split the box into
/// the four branch regions: on the p ≥ 0 side a single low-u/high-u split
/// per column, on the p < 0 side only the two negative-pulse branches.
#[test]
fn branch_map_regions_match_the_first_step_structure() {
    let npv = np(0.2, 0.3);
    let grid = branch_map(
        &npv,
        StateBox64::new(-0.99, 0.99, -0.5, 2.5),
        (80, 64),
    );
    let mut seen = std::collections::BTreeSet::new();
    for j in 0..grid.y.count {
        for i in 0..grid.x.count {
            seen.insert(grid.at(i, j).label());
        }
    }
    for branch in [
        BranchId::QuadPos,
        BranchId::FracPos,
        BranchId::LinNeg,
        BranchId::QuadNeg,
    ] {
        assert!(
            seen.contains(&BranchCell::Taken(branch).label()),
            "{} region missing",
            branch.name()
        );
    }
    assert!(
        !seen.contains(&BranchCell::Overload.label()),
        "unexpected overload cells at benign parameters"
    );
    for i in 0..grid.x.count {
        let p = grid.x.center(i);
        if p >= 0.0 {
            // Scanning up in u: quadratic branch below, fractional above,
            // exactly one changeover.
            let mut changes = 0;
            for j in 1..grid.y.count {
                let a = grid.at(i, j - 1);
                let b = grid.at(i, j);
                assert!(
                    matches!(
                        a,
                        BranchCell::Taken(BranchId::QuadPos) | BranchCell::Taken(BranchId::FracPos)
                    ),
                    "column p = {p}: {a:?} on the positive side"
                );
                if a != b {
                    changes += 1;
                    assert_eq!(*a, BranchCell::Taken(BranchId::QuadPos));
                    assert_eq!(*b, BranchCell::Taken(BranchId::FracPos));
                }
            }
            assert!(changes <= 1, "column p = {p}: {changes} changeovers");
        } else {
            for j in 0..grid.y.count {
                assert!(
                    matches!(
                        grid.at(i, j),
                        BranchCell::Taken(BranchId::LinNeg) | BranchCell::Taken(BranchId::QuadNeg)
                    ),
                    "column p = {p}: positive-pulse branch on the negative side"
                );
            }
        }
    }
}

#[test]
fn exports_carry_every_cell_and_the_metadata() {
    let npv = np(0.2, 1.7);
    let grid = basin_map(
        &npv,
        StateBox64::new(-0.4, 0.4, -0.4, 0.8),
        (12, 10),
        &BasinOptions {
            max_steps: 1500,
            ..BasinOptions::default()
        },
    );
    let csv = grid_csv(&grid);
    assert_eq!(csv.lines().count(), 12 * 10 + 1);
    assert!(csv.starts_with("x_index,y_index,x,y,cell\n"));
    let svg = grid_svg(&grid);
    assert!(svg.contains("viewBox=\"0 0 12 10\""));
    for (i, j) in [(0usize, 0usize), (11, 9), (5, 5)] {
        assert!(
            svg.contains(grid.at(i, j).color()),
            "palette color of cell ({i}, {j}) missing from the drawing"
        );
    }
}
