//! Limit cycles of the discrete map: closed forms for periods 2 and 3, a
//! numerical search for arbitrary periods, and stability classification.
//!
//! The closed-form families:
//!
//! * period 2 exists exactly for `β > 2` (it degenerates into the origin at
//!   `β = 2`) and is independent of `α`;
//! * period 3 exists for `β > 3/2` (merging with the origin at `β = 3/2`),
//!   subject to a no-overload condition that depends on `α`.
//!
//! For other periods, [`find_cycles`] seeds a grid, keeps seeds whose
//! `period`-step displacement is small, freezes each seed's branch itinerary
//! and phase-wrap offsets, and runs a damped Newton method on the resulting
//! smooth composition; refined points are validated by re-running the real
//! map (itinerary must be reproduced, no overload, closure to `1e−10`),
//! reduced to their minimal period, and deduplicated up to cyclic rotation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::{Mat2, Vec2};
use crate::map::{
    floor_mod, iterate_with, overload_pre, step, BranchId, DiscreteState, IterateOptions,
    PulseSign, StateBox, Termination,
};
use crate::params::NormalizedParameters;
use crate::scalar::{lit, Scalar};
use crate::stability::classify_parameters;

/// Stability verdict for a cycle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CycleStability {
    /// Every Floquet multiplier strictly inside the unit circle.
    Stable,
    /// Some multiplier strictly outside.
    Unstable,
    /// Marginal multipliers, disagreeing boundary-side products, or
    /// a multiplier verdict contradicted by perturbation probes.
    Neutral,
}

impl CycleStability {
    pub fn name(&self) -> &'static str {
        match self {
            CycleStability::Stable => "stable",
            CycleStability::Unstable => "unstable",
            CycleStability::Neutral => "neutral",
        }
    }
}

/// A periodic orbit of the map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cycle<F> {
    /// Minimal period (equals `points.len()`).
    pub period: usize,
    pub points: Vec<DiscreteState<F>>,
    /// Branch taken from each point.
    pub itinerary: Vec<BranchId>,
    /// Filled by [`classify_cycle`].
    pub stability: Option<CycleStability>,
    /// Eigenvalues `(re, im)` of the ordered product of per-branch
    /// Jacobians, filled by [`classify_cycle`].
    pub multipliers: Option<[(F, F); 2]>,
    /// Some point of the cycle sits within `1e−9` of a branch boundary, so
    /// the multiplier product was evaluated for every boundary side.
    pub boundary_touching: bool,
}

impl<F: Scalar> Cycle<F> {
    fn bare(points: Vec<DiscreteState<F>>, itinerary: Vec<BranchId>) -> Self {
        Self {
            period: points.len(),
            points,
            itinerary,
            stability: None,
            multipliers: None,
            boundary_touching: false,
        }
    }

    /// Smallest point of the orbit in `(p, u)` lexicographic order.
    pub fn canonical_point(&self) -> DiscreteState<F> {
        self.points[canonical_index(&self.points)]
    }
}

fn canonical_index<F: Scalar>(points: &[DiscreteState<F>]) -> usize {
    let mut best = 0;
    for (i, s) in points.iter().enumerate().skip(1) {
        let b = points[best];
        if s.p < b.p || (s.p == b.p && s.u < b.u) {
            best = i;
        }
    }
    best
}

/// The period-2 cycle, which exists exactly for `β > 2` and does not depend
/// on `α`:
///
/// `p₀ = (−√β + √(9β − 16)) / (4√β)`, `u₀ = 2p₀/(1 − 2p₀)`,
/// `p₁ = −p₀`, `u₁ = u₀ − 2β·p₀`.
///
/// Returns `None` when `9β − 16 < 0` or `p₀ ≤ 0` (i.e. for all `β ≤ 2`; at
/// `β = 2` the cycle degenerates into the origin). Whether the cycle's
/// negative pulse overloads depends on `α`, which this closed form does not
/// take; check with [`cycle_overloads`] before trusting the orbit for a
/// given parameter pair.
pub fn period2<F: Scalar>(beta: F) -> Option<Cycle<F>> {
    if !(beta > F::zero()) {
        return None;
    }
    let disc = lit::<F>(9.0) * beta - lit::<F>(16.0);
    if disc < F::zero() {
        return None;
    }
    let sqrt_b = beta.sqrt();
    let p0 = (-sqrt_b + disc.sqrt()) / (lit::<F>(4.0) * sqrt_b);
    if !(p0 > F::zero()) {
        return None;
    }
    let two = lit::<F>(2.0);
    let u0 = two * p0 / (F::one() - two * p0);
    let u1 = u0 - two * beta * p0;
    Some(Cycle::bare(
        vec![DiscreteState::new(p0, u0), DiscreteState::new(-p0, u1)],
        vec![BranchId::FracPos, BranchId::QuadNeg],
    ))
}

/// The frequency offset `u₀ = (2β − 3 + √(2β)·√(2β − 3))/3` of the period-3
/// family; `None` when `2β − 3 < 0`. At `β = 3/2` the value is exactly `0`
/// (the cycle has merged with the origin).
pub fn period3_offset<F: Scalar>(beta: F) -> Option<F> {
    let three = lit::<F>(3.0);
    let two_b = lit::<F>(2.0) * beta;
    let excess = two_b - three;
    if excess < F::zero() {
        return None;
    }
    Some((excess + two_b.sqrt() * excess.sqrt()) / three)
}

/// The period-3 cycle
/// `{(0, u₀), (−u₀/(u₀+1), u₀ − 2β·u₀/(1+u₀)), (u₀/(u₀+1), u₀)}`,
/// which exists for `β > 3/2` provided its negative pulse does not overload
/// (`u₁ > α − 1`). Returns `None` for `β ≤ 3/2` (at `β = 3/2`, `u₀ = 0`:
/// merged with the origin) or when the overload condition fails.
pub fn period3<F: Scalar>(np: &NormalizedParameters<F>) -> Option<Cycle<F>> {
    let u0 = period3_offset(np.beta)?;
    if !(u0 > F::zero()) {
        return None;
    }
    let p1 = -u0 / (u0 + F::one());
    let u1 = u0 + lit::<F>(2.0) * np.beta * p1;
    // Negative pulse of width p1 entered at offset u0.
    if overload_pre(DiscreteState::new(p1, u0), np, PulseSign::Negative).is_overload() {
        return None;
    }
    Some(Cycle::bare(
        vec![
            DiscreteState::new(F::zero(), u0),
            DiscreteState::new(p1, u1),
            DiscreteState::new(-p1, u0),
        ],
        vec![BranchId::FracPos, BranchId::QuadNeg, BranchId::QuadPos],
    ))
}

/// Whether any pulse of the cycle trips an overload predicate for the given
/// parameters. Pulse `k+1`'s width is `points[k+1].p`, entered at offset
/// `points[k].u`.
pub fn cycle_overloads<F: Scalar>(c: &Cycle<F>, np: &NormalizedParameters<F>) -> bool {
    let n = c.points.len();
    (0..n).any(|k| {
        let width = c.points[(k + 1) % n].p;
        let entry_u = c.points[k].u;
        let sign = if width < F::zero() {
            PulseSign::Negative
        } else {
            PulseSign::Positive
        };
        overload_pre(DiscreteState::new(width, entry_u), np, sign).is_overload()
    })
}

/// One step of a branch formula with the phase-wrap offset frozen, plus its
/// Jacobian. Used by the Newton refinement, where the itinerary and offsets
/// come from the seed and must not re-quantize between iterations.
fn frozen_step<F: Scalar>(
    s: DiscreteState<F>,
    np: &NormalizedParameters<F>,
    branch: BranchId,
    offset: F,
) -> Option<(DiscreteState<F>, Mat2<F>)> {
    let one = F::one();
    let two = lit::<F>(2.0);
    let four = lit::<F>(4.0);
    let (alpha, beta) = (np.alpha, np.beta);
    if !(s.u > -one) || !s.p.is_finite() || !s.u.is_finite() {
        return None;
    }
    let u1 = s.u + one;
    let (p_next, j11, j12) = match branch {
        BranchId::QuadPos => {
            let fp = s.p - offset;
            let c = (one - fp) * u1 - one;
            let w = s.u + alpha + one;
            let disc = w * w - four * beta * c;
            if disc <= F::zero() {
                return None;
            }
            let sq = disc.sqrt();
            let p_next = two * (-c) / (w + sq);
            (p_next, u1 / sq, -(p_next + one - fp) / sq)
        }
        BranchId::FracPos => {
            let fp = s.p - offset;
            (fp - s.u / u1, one, -(u1 * u1).recip())
        }
        BranchId::LinNeg => {
            let s_raw = -(s.u - alpha + one) * s.p + beta * s.p * s.p;
            let fs = s_raw - offset;
            let l = (one - fs) / u1;
            (
                l - one,
                (s.u - alpha + one - two * beta * s.p) / u1,
                (s.p * u1 - (one - fs)) / (u1 * u1),
            )
        }
        BranchId::QuadNeg => {
            let s_raw = -(s.u - alpha + one) * s.p + beta * s.p * s.p;
            let fs = s_raw - offset;
            let d = fs + s.u;
            let w = s.u + alpha + one;
            let disc = w * w - four * beta * d;
            if disc <= F::zero() {
                return None;
            }
            let sq = disc.sqrt();
            let p_next = two * (-d) / (w + sq);
            (
                p_next,
                (s.u - alpha + one - two * beta * s.p) / sq,
                -(p_next + one - s.p) / sq,
            )
        }
    };
    let u_next = s.u + two * beta * p_next;
    if !p_next.is_finite() || !u_next.is_finite() {
        return None;
    }
    Some((
        DiscreteState::new(p_next, u_next),
        Mat2::new(j11, j12, two * beta * j11, one + two * beta * j12),
    ))
}

/// Composes the frozen branch formulas; returns the end state and, when
/// `with_jacobian`, the ordered product of step Jacobians.
fn frozen_orbit<F: Scalar>(
    x0: DiscreteState<F>,
    np: &NormalizedParameters<F>,
    plan: &[(BranchId, F)],
    with_jacobian: bool,
) -> Option<(DiscreteState<F>, Option<Mat2<F>>)> {
    let mut x = x0;
    let mut jac = if with_jacobian {
        Some(Mat2::identity())
    } else {
        None
    };
    for &(branch, offset) in plan {
        let (next, j) = frozen_step(x, np, branch, offset)?;
        if let Some(acc) = jac.as_mut() {
            *acc = j.mul_mat(acc);
        }
        x = next;
    }
    Some((x, jac))
}

/// Search statistics and results of [`find_cycles`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleSearch<F> {
    /// Deduplicated cycles, sorted by `(period, canonical point)`. Not yet
    /// classified; pass each through [`classify_cycle`].
    pub cycles: Vec<Cycle<F>>,
    pub seeds_tried: usize,
    /// Seeds whose `period`-step displacement passed the screening threshold.
    pub candidates: usize,
    pub newton_failures: usize,
    pub rejected_itinerary: usize,
    pub rejected_overload: usize,
    pub rejected_closure: usize,
    pub duplicates: usize,
}

enum SeedOutcome<F> {
    Skipped,
    NewtonFail,
    BadItinerary,
    Overloaded,
    BadClosure,
    Found(Cycle<F>),
}

/// Grid-seeded Newton search for cycles of the given period.
///
/// `grid` is the per-axis seed count over `search_box`. Seeds whose
/// `period`-step displacement under the real map exceeds `0.1` are screened
/// out; survivors are refined by damped Newton on the frozen-itinerary
/// composition and then validated against the real map. Orbits whose real
/// closure already holds at a proper divisor of `period` are reduced to that
/// minimal period (so a fixed point found by a period-3 search is reported
/// as a period-1 cycle). Parallel execution is deterministic: outcomes are
/// merged in seed order.
pub fn find_cycles<F: Scalar>(
    np: &NormalizedParameters<F>,
    period: usize,
    search_box: StateBox<F>,
    grid: usize,
) -> CycleSearch<F> {
    assert!((1..=32).contains(&period), "period must be in 1..=32");
    let g = grid.max(2);
    let displacement_threshold = lit::<F>(0.1);
    let newton_tol = lit::<F>(1e-13);
    let closure_tol = lit::<F>(1e-10);
    let reduction_tol = lit::<F>(1e-9);
    let dedup_tol = lit::<F>(1e-8);

    let coord = |lo: F, hi: F, i: usize| -> F {
        lo + (hi - lo) * lit::<F>(i as f64) / lit::<F>((g - 1) as f64)
    };

    let outcomes: Vec<SeedOutcome<F>> = (0..g * g)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx % g, idx / g);
            let seed = DiscreteState::new(
                coord(search_box.p_min, search_box.p_max, i),
                coord(search_box.u_min, search_box.u_max, j),
            );
            refine_seed(
                seed,
                np,
                period,
                displacement_threshold,
                newton_tol,
                closure_tol,
                reduction_tol,
            )
        })
        .collect();

    let mut search = CycleSearch {
        cycles: Vec::new(),
        seeds_tried: g * g,
        candidates: 0,
        newton_failures: 0,
        rejected_itinerary: 0,
        rejected_overload: 0,
        rejected_closure: 0,
        duplicates: 0,
    };
    for outcome in outcomes {
        match outcome {
            SeedOutcome::Skipped => {}
            SeedOutcome::NewtonFail => {
                search.candidates += 1;
                search.newton_failures += 1;
            }
            SeedOutcome::BadItinerary => {
                search.candidates += 1;
                search.rejected_itinerary += 1;
            }
            SeedOutcome::Overloaded => {
                search.candidates += 1;
                search.rejected_overload += 1;
            }
            SeedOutcome::BadClosure => {
                search.candidates += 1;
                search.rejected_closure += 1;
            }
            SeedOutcome::Found(c) => {
                search.candidates += 1;
                let dup = search.cycles.iter().any(|e| {
                    e.period == c.period
                        && e.canonical_point().inf_dist(&c.canonical_point()) <= dedup_tol
                });
                if dup {
                    search.duplicates += 1;
                } else {
                    search.cycles.push(c);
                }
            }
        }
    }
    search.cycles.sort_by(|a, b| {
        let (ca, cb) = (a.canonical_point(), b.canonical_point());
        a.period
            .cmp(&b.period)
            .then(ca.p.partial_cmp(&cb.p).expect("finite"))
            .then(ca.u.partial_cmp(&cb.u).expect("finite"))
    });
    search
}

fn refine_seed<F: Scalar>(
    seed: DiscreteState<F>,
    np: &NormalizedParameters<F>,
    period: usize,
    displacement_threshold: F,
    newton_tol: F,
    closure_tol: F,
    reduction_tol: F,
) -> SeedOutcome<F> {
    // Screening pass under the real map, recording the itinerary and the
    // phase-wrap offsets to freeze.
    let mut plan: Vec<(BranchId, F)> = Vec::with_capacity(period);
    let mut x = seed;
    for _ in 0..period {
        let r = match step(x, np) {
            Ok(r) => r,
            Err(_) => return SeedOutcome::Skipped,
        };
        let next = match r.next {
            Some(n) if r.overload == crate::map::OverloadStatus::None => n,
            _ => return SeedOutcome::Skipped,
        };
        let offset = if x.p >= F::zero() {
            x.p - floor_mod(x.p)
        } else {
            let s_raw = r.intermediates.s_raw.expect("negative branch records S");
            s_raw - floor_mod(s_raw)
        };
        plan.push((r.branch, offset));
        x = next;
    }
    if x.inf_dist(&seed) > displacement_threshold {
        return SeedOutcome::Skipped;
    }

    // Damped Newton on x ↦ Φ(x) − x with the plan frozen.
    let mut z = seed;
    let mut converged = false;
    let mut res_norm = F::infinity();
    for _ in 0..60 {
        let (end, jac) = match frozen_orbit(z, np, &plan, true) {
            Some((end, jac)) => (end, jac.expect("jacobian requested")),
            None => return SeedOutcome::NewtonFail,
        };
        let f = Vec2::new(end.p - z.p, end.u - z.u);
        res_norm = f.inf_norm();
        if res_norm < newton_tol {
            converged = true;
            break;
        }
        let jf = jac.sub(&Mat2::identity());
        let d = match jf.solve(f.scale(-F::one())) {
            Some(d) => d,
            None => return SeedOutcome::NewtonFail,
        };
        let mut accepted = false;
        let mut lambda = F::one();
        for _ in 0..7 {
            let trial = DiscreteState::new(z.p + lambda * d.x, z.u + lambda * d.y);
            if let Some((end_t, _)) = frozen_orbit(trial, np, &plan, false) {
                let f_t = Vec2::new(end_t.p - trial.p, end_t.u - trial.u);
                if f_t.inf_norm() < res_norm {
                    z = trial;
                    accepted = true;
                    break;
                }
            }
            lambda = lambda / lit::<F>(2.0);
        }
        if !accepted {
            return SeedOutcome::NewtonFail;
        }
    }
    if !converged && res_norm >= newton_tol {
        return SeedOutcome::NewtonFail;
    }

    // Validation under the real map: itinerary reproduced, no overload,
    // closure, then minimal-period reduction.
    let mut states = Vec::with_capacity(period + 1);
    let mut branches = Vec::with_capacity(period);
    states.push(z);
    let mut y = z;
    for k in 0..period {
        let r = match step(y, np) {
            Ok(r) => r,
            Err(_) => return SeedOutcome::BadItinerary,
        };
        if r.overload != crate::map::OverloadStatus::None {
            return SeedOutcome::Overloaded;
        }
        let next = match r.next {
            Some(n) => n,
            None => return SeedOutcome::Overloaded,
        };
        if r.branch != plan[k].0 {
            return SeedOutcome::BadItinerary;
        }
        branches.push(r.branch);
        states.push(next);
        y = next;
    }
    if states[period].inf_dist(&states[0]) > closure_tol {
        return SeedOutcome::BadClosure;
    }

    let mut minimal = period;
    for d in 1..period {
        if period % d == 0 && states[d].inf_dist(&states[0]) <= reduction_tol {
            minimal = d;
            break;
        }
    }
    let mut points: Vec<DiscreteState<F>> = states[..minimal].to_vec();
    let mut itinerary: Vec<BranchId> = branches[..minimal].to_vec();
    let rot = canonical_index(&points);
    points.rotate_left(rot);
    itinerary.rotate_left(rot);
    SeedOutcome::Found(Cycle::bare(points, itinerary))
}

/// The boundary-side alternative for a branch at a point, when the point
/// sits within `btol` of the corresponding branch boundary.
fn boundary_alternative<F: Scalar>(
    s: DiscreteState<F>,
    np: &NormalizedParameters<F>,
    taken: BranchId,
    btol: F,
) -> Option<BranchId> {
    let one = F::one();
    if s.p.abs() <= btol {
        // Pulse-sign boundary: the alternative is the branch the opposite
        // sign of p would select at this state.
        return Some(match taken {
            BranchId::QuadPos | BranchId::FracPos => {
                // p treated as 0⁻: S = 0, l = 1/(u+1).
                if s.u > F::zero() {
                    BranchId::LinNeg
                } else {
                    BranchId::QuadNeg
                }
            }
            BranchId::LinNeg | BranchId::QuadNeg => {
                // p treated as 0⁺: c = u/(u+1) ≤ 0 iff u ≤ 0.
                if s.u <= F::zero() {
                    BranchId::QuadPos
                } else {
                    BranchId::FracPos
                }
            }
        });
    }
    match taken {
        BranchId::QuadPos | BranchId::FracPos => {
            let c = (one - floor_mod(s.p)) * (s.u + one) - one;
            if c.abs() <= btol {
                Some(if taken == BranchId::QuadPos {
                    BranchId::FracPos
                } else {
                    BranchId::QuadPos
                })
            } else {
                None
            }
        }
        BranchId::LinNeg | BranchId::QuadNeg => {
            let s_raw = -(s.u - np.alpha + one) * s.p + np.beta * s.p * s.p;
            let l = (one - floor_mod(s_raw)) / (s.u + one);
            if (l - one).abs() <= btol {
                Some(if taken == BranchId::LinNeg {
                    BranchId::QuadNeg
                } else {
                    BranchId::LinNeg
                })
            } else {
                None
            }
        }
    }
}

fn spectral_radius<F: Scalar>(eig: [(F, F); 2]) -> F {
    let m0 = (eig[0].0 * eig[0].0 + eig[0].1 * eig[0].1).sqrt();
    let m1 = (eig[1].0 * eig[1].0 + eig[1].1 * eig[1].1).sqrt();
    m0.max(m1)
}

fn verdict_from_radius<F: Scalar>(rho: F) -> CycleStability {
    let margin = lit::<F>(1e-6);
    if rho < F::one() - margin {
        CycleStability::Stable
    } else if rho > F::one() + margin {
        CycleStability::Unstable
    } else {
        CycleStability::Neutral
    }
}

/// Fills `stability`, `multipliers` and `boundary_touching` for a cycle that
/// closes under the real map.
///
/// Multipliers are the eigenvalues of the ordered product of per-branch
/// Jacobians along the orbit. Points within `1e−9` of a branch boundary make
/// the product ambiguous; in that case the product is evaluated for every
/// combination of boundary sides and the verdict is kept only if all
/// combinations agree (otherwise `Neutral`), with `boundary_touching` set.
/// The multiplier verdict is cross-validated by iterating `1e−4`
/// perturbations in eight compass directions: a contradiction downgrades the
/// verdict to `Neutral`.
///
/// A period-1 cycle at the origin is the locked state itself; its verdict
/// delegates to [`classify_parameters`] (the piecewise linearization has no
/// single Jacobian there).
pub fn classify_cycle<F: Scalar>(c: &Cycle<F>, np: &NormalizedParameters<F>) -> Cycle<F> {
    let mut out = c.clone();
    let n = c.points.len();
    debug_assert!(n >= 1);
    let btol = lit::<F>(1e-9);

    // The origin as a period-1 cycle: verdict from the parameter classes.
    if n == 1 && c.points[0].inf_norm() <= btol {
        use crate::stability::StabilityClass::*;
        out.stability = Some(match classify_parameters(np) {
            LocallyStable => CycleStability::Stable,
            UnstableBeta | OverloadAtLock => CycleStability::Unstable,
            Boundary => CycleStability::Neutral,
        });
        out.multipliers = None;
        out.boundary_touching = true;
        return out;
    }

    // Fresh branches plus boundary-side alternatives per point.
    let mut taken: Vec<BranchId> = Vec::with_capacity(n);
    let mut alts: Vec<Option<BranchId>> = Vec::with_capacity(n);
    for s in &c.points {
        let branch = match step(*s, np) {
            Ok(r) => r.branch,
            Err(_) => {
                out.stability = Some(CycleStability::Neutral);
                return out;
            }
        };
        taken.push(branch);
        alts.push(boundary_alternative(*s, np, branch, btol));
    }
    out.itinerary = taken.clone();
    out.boundary_touching = alts.iter().any(|a| a.is_some());

    let product = |choice: &[BranchId]| -> Mat2<F> {
        let mut acc = Mat2::identity();
        for (s, &b) in c.points.iter().zip(choice) {
            acc = crate::map::branch_jacobian(*s, np, b).mul_mat(&acc);
        }
        acc
    };
    out.multipliers = Some(product(&taken).eigenvalues());

    // Enumerate boundary-side combinations (at most 2^n, n small).
    let ambiguous: Vec<usize> = (0..n).filter(|&k| alts[k].is_some()).collect();
    let mut verdicts: Vec<CycleStability> = Vec::new();
    let combos = 1usize << ambiguous.len().min(10);
    let mut choice = taken.clone();
    for mask in 0..combos {
        for (bit, &k) in ambiguous.iter().enumerate() {
            choice[k] = if mask >> bit & 1 == 1 {
                alts[k].unwrap()
            } else {
                taken[k]
            };
        }
        verdicts.push(verdict_from_radius(spectral_radius(
            product(&choice).eigenvalues(),
        )));
    }
    let first = verdicts[0];
    let mut verdict = if verdicts.iter().all(|&v| v == first) {
        first
    } else {
        CycleStability::Neutral
    };

    // Perturbation cross-validation.
    if verdict != CycleStability::Neutral {
        if let Some(probe) = perturbation_probe(c, np) {
            if probe != verdict {
                verdict = CycleStability::Neutral;
            }
        }
    }
    out.stability = Some(verdict);
    out
}

/// Iterates eight compass perturbations of size `1e−4` around the first
/// cycle point; returns a verdict when the probes are decisive.
fn perturbation_probe<F: Scalar>(
    c: &Cycle<F>,
    np: &NormalizedParameters<F>,
) -> Option<CycleStability> {
    let eps = lit::<F>(1e-4);
    let converge_tol = lit::<F>(1e-5);
    let depart_tol = lit::<F>(1e-3);
    let base = c.points[0];
    let diag = lit::<F>(core::f64::consts::FRAC_1_SQRT_2);
    let dirs = [
        (F::one(), F::zero()),
        (-F::one(), F::zero()),
        (F::zero(), F::one()),
        (F::zero(), -F::one()),
        (diag, diag),
        (diag, -diag),
        (-diag, diag),
        (-diag, -diag),
    ];
    let steps = (400 * c.points.len()).min(4000);
    let mut any_departed = false;
    let mut any_converged = false;
    for (dx, dy) in dirs {
        let s0 = DiscreteState::new(base.p + eps * dx, base.u + eps * dy);
        let traj = match iterate_with(
            s0,
            np,
            steps,
            IterateOptions {
                lock_tolerance: lit(1e-300),
                lock_window: 2,
                divergence_bound: lit(1e6),
            },
        ) {
            Ok(t) => t,
            Err(_) => continue,
        };
        match traj.termination {
            Termination::Overloaded(_) | Termination::Diverged => {
                any_departed = true;
                continue;
            }
            _ => {}
        }
        let last = traj.states.last().expect("nonempty");
        let dist = c
            .points
            .iter()
            .map(|pt| last.inf_dist(pt))
            .fold(F::infinity(), F::min);
        if dist < converge_tol {
            any_converged = true;
        } else if dist > depart_tol {
            any_departed = true;
        }
    }
    if any_departed {
        Some(CycleStability::Unstable)
    } else if any_converged {
        Some(CycleStability::Stable)
    } else {
        None
    }
}
