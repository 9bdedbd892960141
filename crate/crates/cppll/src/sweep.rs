//! Grid sweeps over initial conditions and parameters, plus an empirical
//! pull-in range estimator.
//!
//! Everything here is deterministic under any rayon thread count: work is
//! distributed by index and merged in index order, and the only data
//! dependence across work items (the pull-in early-exit) is a monotone
//! minimum that converges to the same value regardless of schedule.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cycles::{period2, period3};
use crate::map::{step, BranchId, DiscreteState, StateBox};
use crate::params::{NormalizedParameters, PhysicalParameters};
use crate::scalar::{lit, Scalar};

/// Uniformly spaced sample positions along one axis; samples sit at cell
/// centers, so the endpoints themselves are never sampled.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisSpec<F> {
    pub min: F,
    pub max: F,
    pub count: usize,
}

impl<F: Scalar> AxisSpec<F> {
    pub fn new(min: F, max: F, count: usize) -> Self {
        debug_assert!(count >= 1 && min <= max, "degenerate axis");
        Self { min, max, count }
    }

    /// Center of cell `i`: `min + (max − min)·(i + ½)/count`.
    pub fn center(&self, i: usize) -> F {
        let frac = (lit::<F>(i as f64) + lit::<F>(0.5)) / lit::<F>(self.count as f64);
        self.min + (self.max - self.min) * frac
    }
}

/// A rectangular raster of classified cells, row-major with `x` fastest
/// (`cells[j*x.count + i]` is column `i`, row `j`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid<F, C> {
    pub x: AxisSpec<F>,
    pub y: AxisSpec<F>,
    pub cells: Vec<C>,
    /// Free-form provenance (parameter values, options) carried into the
    /// CSV/SVG exports.
    pub metadata: BTreeMap<String, String>,
}

impl<F: Scalar, C> Grid<F, C> {
    pub fn at(&self, i: usize, j: usize) -> &C {
        &self.cells[j * self.x.count + i]
    }
}

/// Long-run outcome of iterating the map from one initial state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StateCell {
    /// Converged into the lock tolerance for a full window.
    Locked,
    /// Settled onto a periodic orbit of the given period (detected up to
    /// the scan limit, default 8).
    Cycle(u32),
    /// Tripped an overload predicate (or started outside the map's domain).
    Overload,
    /// `|u|` exceeded the divergence bound.
    Diverged,
    /// Budget exhausted without a verdict.
    Undecided,
}

/// Parameter-plane classification by the closed-form thresholds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParamCell {
    /// `α < 1`, `β ≤ 3/2`: locally stable lock, no period-3 family.
    Stable,
    /// `α < 1`, `3/2 < β < 2`: stable lock coexists with the period-3
    /// family (where it avoids overload).
    CycleRegion,
    /// `β ≥ 2`: the lock is not locally stable.
    Unstable,
    /// `α ≥ 1`: the pump overloads in steady state.
    OverloadAtLock,
}

/// First-step behavior of one initial state (for branch-structure rasters).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BranchCell {
    Taken(BranchId),
    Overload,
}

/// Label + fill color used by the CSV and SVG exports.
pub trait GridCell {
    fn label(&self) -> String;
    fn color(&self) -> &'static str;
}

impl GridCell for StateCell {
    fn label(&self) -> String {
        match self {
            StateCell::Locked => "locked".into(),
            StateCell::Cycle(d) => format!("cycle-{d}"),
            StateCell::Overload => "overload".into(),
            StateCell::Diverged => "diverged".into(),
            StateCell::Undecided => "undecided".into(),
        }
    }

    fn color(&self) -> &'static str {
        match self {
            StateCell::Locked => "#2ca02c",
            StateCell::Cycle(_) => "#9467bd",
            StateCell::Overload => "#000000",
            StateCell::Diverged => "#d62728",
            StateCell::Undecided => "#bbbbbb",
        }
    }
}

impl GridCell for ParamCell {
    fn label(&self) -> String {
        match self {
            ParamCell::Stable => "stable".into(),
            ParamCell::CycleRegion => "cycle-region".into(),
            ParamCell::Unstable => "unstable".into(),
            ParamCell::OverloadAtLock => "overload-at-lock".into(),
        }
    }

    fn color(&self) -> &'static str {
        match self {
            ParamCell::Stable => "#2ca02c",
            ParamCell::CycleRegion => "#ff7f0e",
            ParamCell::Unstable => "#d62728",
            ParamCell::OverloadAtLock => "#000000",
        }
    }
}

impl GridCell for BranchCell {
    fn label(&self) -> String {
        match self {
            BranchCell::Taken(b) => b.name().into(),
            BranchCell::Overload => "overload".into(),
        }
    }

    fn color(&self) -> &'static str {
        match self {
            BranchCell::Taken(BranchId::QuadPos) => "#e41a1c",
            BranchCell::Taken(BranchId::FracPos) => "#4daf4a",
            BranchCell::Taken(BranchId::LinNeg) => "#377eb8",
            BranchCell::Taken(BranchId::QuadNeg) => "#ffff33",
            BranchCell::Overload => "#000000",
        }
    }
}

/// Iteration budget and verdict thresholds for [`classify_state`],
/// [`basin_map`] and [`param_map`].
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct BasinOptions<F> {
    pub max_steps: usize,
    pub lock_tolerance: F,
    /// Consecutive in-tolerance states required, initial state included.
    pub lock_window: usize,
    pub divergence_bound: F,
    /// Largest cycle period scanned for at budget exhaustion.
    pub cycle_scan: usize,
    /// Relative tolerance for the cycle-recurrence test.
    pub cycle_tolerance: F,
}

impl<F: Scalar> Default for BasinOptions<F> {
    fn default() -> Self {
        Self {
            max_steps: 10_000,
            lock_tolerance: lit(1e-6),
            lock_window: 10,
            divergence_bound: lit(1e6),
            cycle_scan: 8,
            cycle_tolerance: lit(1e-9),
        }
    }
}

/// Iterates the map from `s0` and reports the long-run outcome.
///
/// Lock and divergence follow the same thresholds as the trajectory
/// iterator. If the step budget runs out, the tail of the trajectory is
/// scanned for recurrence: the verdict is `Cycle(d)` for the smallest
/// `d ≤ cycle_scan` with `x_k ≈ x_{k−d} ≈ x_{k−2d}` (tolerance
/// `cycle_tolerance · (1 + |x_k|)`), else `Undecided`. A start outside the
/// map's domain (`u ≤ −1`) is reported as `Overload`.
pub fn classify_state<F: Scalar>(
    s0: DiscreteState<F>,
    np: &NormalizedParameters<F>,
    opts: &BasinOptions<F>,
) -> StateCell {
    let ring_len = 2 * opts.cycle_scan + 1;
    let mut ring: Vec<DiscreteState<F>> = Vec::with_capacity(ring_len);
    let mut write = 0usize;
    let push = |ring: &mut Vec<DiscreteState<F>>, write: &mut usize, s: DiscreteState<F>| {
        if ring.len() < ring_len {
            ring.push(s);
        } else {
            ring[*write] = s;
        }
        *write = (*write + 1) % ring_len;
    };

    let mut s = s0;
    push(&mut ring, &mut write, s);
    let mut in_tol = if s.inf_norm() < opts.lock_tolerance {
        1
    } else {
        0
    };
    if in_tol >= opts.lock_window {
        return StateCell::Locked;
    }
    for _ in 0..opts.max_steps {
        let r = match step(s, np) {
            Ok(r) => r,
            Err(_) => return StateCell::Overload,
        };
        if r.overload.is_overload() {
            return StateCell::Overload;
        }
        s = match r.next {
            Some(n) => n,
            None => return StateCell::Overload,
        };
        push(&mut ring, &mut write, s);
        if s.u.abs() > opts.divergence_bound {
            return StateCell::Diverged;
        }
        if s.inf_norm() < opts.lock_tolerance {
            in_tol += 1;
            if in_tol >= opts.lock_window {
                return StateCell::Locked;
            }
        } else {
            in_tol = 0;
        }
    }

    // Recurrence scan over the retained tail. `back(0)` is the last state.
    let len = ring.len();
    let back = |off: usize| ring[(write + ring_len - 1 - off) % ring_len];
    let last = back(0);
    let tol = opts.cycle_tolerance * (F::one() + last.inf_norm());
    for d in 1..=opts.cycle_scan {
        if 2 * d >= len {
            break;
        }
        if last.inf_dist(&back(d)) <= tol && last.inf_dist(&back(2 * d)) <= tol {
            return StateCell::Cycle(d as u32);
        }
    }
    StateCell::Undecided
}

fn base_metadata<F: Scalar>(np: &NormalizedParameters<F>) -> BTreeMap<String, String> {
    let mut m = BTreeMap::new();
    m.insert("alpha".into(), format!("{:.17e}", np.alpha));
    m.insert("beta".into(), format!("{:.17e}", np.beta));
    m
}

/// Rasterizes [`classify_state`] over a grid of initial conditions
/// (`x` = pulse width `p`, `y` = frequency offset `u`, cell centers).
pub fn basin_map<F: Scalar>(
    np: &NormalizedParameters<F>,
    region: StateBox<F>,
    resolution: (usize, usize),
    opts: &BasinOptions<F>,
) -> Grid<F, StateCell> {
    let x = AxisSpec::new(region.p_min, region.p_max, resolution.0.max(1));
    let y = AxisSpec::new(region.u_min, region.u_max, resolution.1.max(1));
    let cells: Vec<StateCell> = (0..x.count * y.count)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx % x.count, idx / x.count);
            classify_state(DiscreteState::new(x.center(i), y.center(j)), np, opts)
        })
        .collect();
    let mut metadata = base_metadata(np);
    metadata.insert("kind".into(), "basin".into());
    metadata.insert("max_steps".into(), opts.max_steps.to_string());
    Grid {
        x,
        y,
        cells,
        metadata,
    }
}

/// Rasterizes the branch taken by the first step from each initial state
/// (`x` = `p`, `y` = `u`, cell centers); overloading first pulses are black.
pub fn branch_map<F: Scalar>(
    np: &NormalizedParameters<F>,
    region: StateBox<F>,
    resolution: (usize, usize),
) -> Grid<F, BranchCell> {
    let x = AxisSpec::new(region.p_min, region.p_max, resolution.0.max(1));
    let y = AxisSpec::new(region.u_min, region.u_max, resolution.1.max(1));
    let cells: Vec<BranchCell> = (0..x.count * y.count)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx % x.count, idx / x.count);
            let s = DiscreteState::new(x.center(i), y.center(j));
            match step(s, np) {
                Ok(r) if !r.overload.is_overload() && r.next.is_some() => {
                    BranchCell::Taken(r.branch)
                }
                _ => BranchCell::Overload,
            }
        })
        .collect();
    let mut metadata = base_metadata(np);
    metadata.insert("kind".into(), "branch".into());
    Grid {
        x,
        y,
        cells,
        metadata,
    }
}

/// Closed-form parameter classification used by [`param_map`].
pub fn param_cell<F: Scalar>(alpha: F, beta: F) -> ParamCell {
    if alpha >= F::one() {
        ParamCell::OverloadAtLock
    } else if beta >= lit::<F>(2.0) {
        ParamCell::Unstable
    } else if beta > lit::<F>(1.5) {
        ParamCell::CycleRegion
    } else {
        ParamCell::Stable
    }
}

/// A sampled trajectory whose outcome contradicts the closed-form class of
/// its parameter cell.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamFinding<F> {
    pub alpha: F,
    pub beta: F,
    pub initial: DiscreteState<F>,
    pub classified: ParamCell,
    pub observed: StateCell,
}

/// Parameter-plane raster (`x` = `α`, `y` = `β`) with optional empirical
/// cross-checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamMap<F> {
    pub grid: Grid<F, ParamCell>,
    /// Contradictions found by iterating `initial_set` at each cell:
    /// a non-locking start in a `Stable` cell, or a locking start in an
    /// `Unstable` cell. Empty when no `initial_set` was given.
    pub findings: Vec<ParamFinding<F>>,
}

/// Classifies every `(α, β)` cell by the closed-form thresholds; when
/// `initial_set` is given, additionally iterates each start at each cell and
/// records contradictions (`Undecided` outcomes are not contradictions, and
/// `CycleRegion`/`OverloadAtLock` cells admit both behaviors).
pub fn param_map<F: Scalar>(
    alpha_axis: AxisSpec<F>,
    beta_axis: AxisSpec<F>,
    initial_set: Option<&[DiscreteState<F>]>,
    opts: &BasinOptions<F>,
) -> ParamMap<F> {
    let per_cell: Vec<(ParamCell, Vec<ParamFinding<F>>)> = (0..alpha_axis.count
        * beta_axis.count)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx % alpha_axis.count, idx / alpha_axis.count);
            let (alpha, beta) = (alpha_axis.center(i), beta_axis.center(j));
            let cell = param_cell(alpha, beta);
            let mut findings = Vec::new();
            if let Some(starts) = initial_set {
                if let Ok(np) = NormalizedParameters::new(alpha, beta) {
                    for &s0 in starts {
                        let observed = classify_state(s0, &np, opts);
                        let contradiction = match cell {
                            ParamCell::Stable => !matches!(
                                observed,
                                StateCell::Locked | StateCell::Undecided
                            ),
                            ParamCell::Unstable => observed == StateCell::Locked,
                            ParamCell::CycleRegion | ParamCell::OverloadAtLock => false,
                        };
                        if contradiction {
                            findings.push(ParamFinding {
                                alpha,
                                beta,
                                initial: s0,
                                classified: cell,
                                observed,
                            });
                        }
                    }
                }
            }
            (cell, findings)
        })
        .collect();

    let mut cells = Vec::with_capacity(per_cell.len());
    let mut findings = Vec::new();
    for (cell, mut f) in per_cell {
        cells.push(cell);
        findings.append(&mut f);
    }
    let mut metadata = BTreeMap::new();
    metadata.insert("kind".into(), "param".into());
    metadata.insert("max_steps".into(), opts.max_steps.to_string());
    ParamMap {
        grid: Grid {
            x: alpha_axis,
            y: beta_axis,
            cells,
            metadata,
        },
        findings,
    }
}

/// Radical-inverse (Halton) low-discrepancy sequence member `index` in the
/// given base: `halton(1,2) = 1/2`, `halton(2,2) = 1/4`, `halton(3,2) = 3/4`.
pub fn halton(index: usize, base: usize) -> f64 {
    debug_assert!(base >= 2);
    let mut n = index;
    let mut f = 1.0;
    let mut r = 0.0;
    while n > 0 {
        f /= base as f64;
        r += f * (n % base) as f64;
        n /= base;
    }
    r
}

/// Errors from [`empirical_pull_in`].
#[derive(Clone, Debug, PartialEq, Error, Serialize, Deserialize)]
pub enum SweepError<F: Scalar> {
    /// Even the lower end of the period range fails to lock from every
    /// sampled start; the range contains no pull-in estimate.
    #[error(
        "no reference period in range locks from all starts: sample {sample_index} \
         fails at T_ref = {t_lo_seconds} s"
    )]
    EmptyRange { t_lo_seconds: F, sample_index: usize },
}

/// Sampling and bisection budget for [`empirical_pull_in`].
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PullInOptions<F> {
    /// Low-discrepancy start count per evaluated period.
    pub samples: usize,
    pub max_steps: usize,
    pub lock_tolerance: F,
    pub lock_window: usize,
    pub divergence_bound: F,
    /// Bisection stops when the bracket width falls below this fraction of
    /// the upper end.
    pub rel_tolerance: F,
    pub max_bisections: usize,
}

impl<F: Scalar> Default for PullInOptions<F> {
    fn default() -> Self {
        Self {
            samples: 4096,
            max_steps: 100_000,
            lock_tolerance: lit(1e-6),
            lock_window: 10,
            divergence_bound: lit(1e6),
            rel_tolerance: lit(1e-2),
            max_bisections: 60,
        }
    }
}

/// The lowest-index sampled start that failed to lock.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailingSample<F> {
    pub sample_index: usize,
    pub initial: DiscreteState<F>,
    pub outcome: StateCell,
}

/// One all-starts-lock evaluation at a candidate reference period.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PullInEvaluation<F> {
    pub t_ref_seconds: F,
    pub all_locked: bool,
    pub first_failing: Option<FailingSample<F>>,
}

/// Result of [`empirical_pull_in`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PullInResult<F> {
    /// Largest evaluated reference period from which every sampled start
    /// locked.
    pub t_ref_seconds: F,
    /// Final bracket: `bracket.0` locks, `bracket.1` fails (equal to
    /// `t_ref_seconds` twice when the upper range end already locks).
    pub bracket: (F, F),
    /// The whole range locked; the estimate is only a lower bound.
    pub at_upper_bound: bool,
    pub samples: usize,
    /// Every evaluation in the order performed.
    pub evaluations: Vec<PullInEvaluation<F>>,
    /// Lock/fail inversions among the evaluations (a failing period below a
    /// locking one), which would indicate non-monotone pull-in behavior.
    pub monotonicity_findings: Vec<(F, F)>,
}

/// Estimates the empirical pull-in range of the reference period by
/// bisection on "every sampled start locks".
///
/// At each candidate period the normalized parameters are re-derived from
/// `base`, the analytic period-2/period-3 orbits (when they exist there) are
/// injected as starts, and `samples` further starts are drawn from the
/// Halton (2,3) sequence over `p ∈ (−1, 1)`, `u ∈ (−0.9, 3)`. Failure is
/// strict: any non-`Locked` outcome (including `Undecided`) fails the
/// period. The upper range end is evaluated first (locking there returns
/// immediately with `at_upper_bound`); then the lower end, whose failure is
/// [`SweepError::EmptyRange`]; then bisection until `rel_tolerance`.
///
/// `first_failing` is the failing sample of smallest index, independent of
/// thread count.
pub fn empirical_pull_in<F: Scalar>(
    base: &PhysicalParameters<F>,
    t_lo_seconds: F,
    t_hi_seconds: F,
    opts: &PullInOptions<F>,
) -> Result<PullInResult<F>, SweepError<F>> {
    debug_assert!(
        F::zero() < t_lo_seconds && t_lo_seconds < t_hi_seconds,
        "period range must be positive and ordered"
    );
    let mut evaluations = Vec::new();

    let hi_eval = evaluate_period(base, t_hi_seconds, opts);
    evaluations.push(hi_eval);
    if hi_eval.all_locked {
        return Ok(finish_pull_in(
            t_hi_seconds,
            (t_hi_seconds, t_hi_seconds),
            true,
            opts.samples,
            evaluations,
        ));
    }

    let lo_eval = evaluate_period(base, t_lo_seconds, opts);
    evaluations.push(lo_eval);
    if !lo_eval.all_locked {
        let failing = lo_eval.first_failing.expect("failed evaluation has sample");
        return Err(SweepError::EmptyRange {
            t_lo_seconds,
            sample_index: failing.sample_index,
        });
    }

    let (mut lo, mut hi) = (t_lo_seconds, t_hi_seconds);
    for _ in 0..opts.max_bisections {
        if hi - lo <= opts.rel_tolerance * t_hi_seconds {
            break;
        }
        let mid = lit::<F>(0.5) * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let eval = evaluate_period(base, mid, opts);
        evaluations.push(eval);
        if eval.all_locked {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(finish_pull_in(lo, (lo, hi), false, opts.samples, evaluations))
}

fn finish_pull_in<F: Scalar>(
    t: F,
    bracket: (F, F),
    at_upper_bound: bool,
    samples: usize,
    evaluations: Vec<PullInEvaluation<F>>,
) -> PullInResult<F> {
    let mut monotonicity_findings = Vec::new();
    for a in &evaluations {
        for b in &evaluations {
            if a.t_ref_seconds < b.t_ref_seconds && !a.all_locked && b.all_locked {
                monotonicity_findings.push((a.t_ref_seconds, b.t_ref_seconds));
            }
        }
    }
    PullInResult {
        t_ref_seconds: t,
        bracket,
        at_upper_bound,
        samples,
        evaluations,
        monotonicity_findings,
    }
}

fn evaluate_period<F: Scalar>(
    base: &PhysicalParameters<F>,
    t_ref_seconds: F,
    opts: &PullInOptions<F>,
) -> PullInEvaluation<F> {
    let np = base.with_ref_period(t_ref_seconds).normalize();
    let basin = BasinOptions {
        max_steps: opts.max_steps,
        lock_tolerance: opts.lock_tolerance,
        lock_window: opts.lock_window,
        divergence_bound: opts.divergence_bound,
        ..BasinOptions::default()
    };

    // Known periodic orbits first, then the low-discrepancy bulk.
    let mut starts: Vec<DiscreteState<F>> = Vec::new();
    if let Some(c) = period2(np.beta) {
        starts.extend_from_slice(&c.points);
    }
    if let Some(c) = period3(&np) {
        starts.extend_from_slice(&c.points);
    }
    let injected = starts.len();
    let total = injected + opts.samples;

    let min_fail = AtomicUsize::new(usize::MAX);
    let outcomes: Vec<Option<StateCell>> = (0..total)
        .into_par_iter()
        .map(|idx| {
            // A failure with a smaller index already exists; this sample can
            // affect neither `all_locked` nor the minimum.
            if idx > min_fail.load(Ordering::Relaxed) {
                return None;
            }
            let s0 = if idx < injected {
                starts[idx]
            } else {
                let k = idx - injected + 1;
                DiscreteState::new(
                    lit::<F>(-1.0 + 2.0 * halton(k, 2)),
                    lit::<F>(-0.9 + 3.9 * halton(k, 3)),
                )
            };
            let outcome = classify_state(s0, &np, &basin);
            if outcome != StateCell::Locked {
                min_fail.fetch_min(idx, Ordering::Relaxed);
            }
            Some(outcome)
        })
        .collect();

    let first_fail_idx = min_fail.load(Ordering::Relaxed);
    let first_failing = if first_fail_idx == usize::MAX {
        None
    } else {
        let s0 = if first_fail_idx < injected {
            starts[first_fail_idx]
        } else {
            let k = first_fail_idx - injected + 1;
            DiscreteState::new(
                lit::<F>(-1.0 + 2.0 * halton(k, 2)),
                lit::<F>(-0.9 + 3.9 * halton(k, 3)),
            )
        };
        Some(FailingSample {
            sample_index: first_fail_idx,
            initial: s0,
            outcome: outcomes[first_fail_idx].expect("evaluated"),
        })
    };
    PullInEvaluation {
        t_ref_seconds,
        all_locked: first_fail_idx == usize::MAX,
        first_failing,
    }
}

/// Renders a grid as CSV with columns
/// `x_index,y_index,x,y,cell`.
pub fn grid_csv<F: Scalar, C: GridCell>(grid: &Grid<F, C>) -> String {
    let mut out = String::from("x_index,y_index,x,y,cell\n");
    for j in 0..grid.y.count {
        for i in 0..grid.x.count {
            let _ = writeln!(
                out,
                "{i},{j},{:.17e},{:.17e},{}",
                grid.x.center(i),
                grid.y.center(j),
                grid.at(i, j).label()
            );
        }
    }
    out
}

/// Renders a grid as an SVG raster (one unit square per cell, `y` upward),
/// with horizontal runs of equal color merged.
pub fn grid_svg<F: Scalar, C: GridCell>(grid: &Grid<F, C>) -> String {
    let (nx, ny) = (grid.x.count, grid.y.count);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {nx} {ny}\" \
         width=\"{nx}\" height=\"{ny}\" shape-rendering=\"crispEdges\">"
    );
    let meta: Vec<String> = grid
        .metadata
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect();
    let _ = writeln!(out, "  <title>{}</title>", meta.join(" "));
    for j in 0..ny {
        let row_y = ny - 1 - j;
        let mut i = 0;
        while i < nx {
            let color = grid.at(i, j).color();
            let mut run = 1;
            while i + run < nx && grid.at(i + run, j).color() == color {
                run += 1;
            }
            let _ = writeln!(
                out,
                "  <rect x=\"{i}\" y=\"{row_y}\" width=\"{run}\" height=\"1\" fill=\"{color}\"/>"
            );
            i += run;
        }
    }
    out.push_str("</svg>\n");
    out
}
