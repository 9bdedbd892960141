//! The exact discrete-time phase map of the charge-pump PLL.
//!
//! Between consecutive pump pulses the loop filter and VCO admit closed-form
//! solutions, so the sampled state advances by an *exact* two-dimensional map
//! rather than by numerical integration. The state is
//!
//! * `p` — signed pump-pulse width divided by the reference period, and
//! * `u` — normalized VCO frequency offset (`u + 1` is the ratio of the VCO
//!   frequency to the reference frequency at the sampling instant).
//!
//! One step evaluates one of four closed-form branches selected by the sign
//! of `p` and an auxiliary quantity, then applies the shared frequency update
//! `u' = u + 2·beta·p'`. Two branches solve a quadratic whose
//! cancellation-safe small root is used throughout.
//!
//! The map is valid only while the VCO frequency stays positive. The
//! *overload* predicates detect pulses that drive it to zero or below; they
//! are stated on the pre-pulse state and are validated against the
//! event-driven continuous simulator in this crate's test suite.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::Mat2;
use crate::params::NormalizedParameters;
use crate::scalar::{lit, Scalar};

/// Sampled state of the loop: normalized pulse width and frequency offset.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteState<F> {
    /// Normalized signed pulse width `p = tau / T_ref`, positive when the
    /// reference leads the VCO.
    pub p: F,
    /// Normalized frequency offset; `u > −1` on every valid state.
    pub u: F,
}

impl<F: Scalar> DiscreteState<F> {
    pub fn new(p: F, u: F) -> Self {
        Self { p, u }
    }

    /// The locked state `(0, 0)`.
    pub fn origin() -> Self {
        Self::new(F::zero(), F::zero())
    }

    /// Maximum absolute component, used by lock detection.
    pub fn inf_norm(&self) -> F {
        self.p.abs().max(self.u.abs())
    }

    /// Componentwise distance in the maximum norm.
    pub fn inf_dist(&self, o: &Self) -> F {
        (self.p - o.p).abs().max((self.u - o.u).abs())
    }
}

/// Which of the four closed-form branches produced a step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BranchId {
    /// `p ≥ 0`, auxiliary `c ≤ 0`: next pulse is nonnegative, from the
    /// quadratic crossing equation.
    QuadPos,
    /// `p ≥ 0`, `c > 0`: next pulse is negative, from the fractional-phase
    /// formula (fires only for `u > 0`).
    FracPos,
    /// `p < 0`, auxiliary `l ≤ 1`: next pulse is negative, affine in `l`.
    LinNeg,
    /// `p < 0`, `l > 1`: next pulse is positive, from the quadratic crossing
    /// equation.
    QuadNeg,
}

impl BranchId {
    pub const ALL: [BranchId; 4] = [
        BranchId::QuadPos,
        BranchId::FracPos,
        BranchId::LinNeg,
        BranchId::QuadNeg,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            BranchId::QuadPos => "quad-pos",
            BranchId::FracPos => "frac-pos",
            BranchId::LinNeg => "lin-neg",
            BranchId::QuadNeg => "quad-neg",
        }
    }
}

impl core::fmt::Display for BranchId {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

/// Overload classification of a step or of a prospective pulse.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OverloadStatus {
    /// VCO frequency stays positive throughout the pulse.
    None,
    /// A negative (VCO-leading) pulse drives the VCO frequency to zero or
    /// below before the pulse ends.
    NegativePulse,
    /// A positive (reference-leading) pulse begins with the VCO frequency
    /// already at zero or below.
    PositivePulse,
    /// A quadratic branch produced a negative discriminant: the assumed edge
    /// never occurs, which happens exactly in overload territory.
    InvalidDiscriminant,
}

impl OverloadStatus {
    pub fn is_overload(&self) -> bool {
        !matches!(self, OverloadStatus::None)
    }
}

/// Auxiliary quantities computed by a step, for diagnostics and tests.
///
/// `s_raw` is the un-wrapped phase sum whose fractional part enters the
/// negative-pulse branches; `c`, `l`, `d` are the branch selectors and
/// quadratic constants. Fields are `None` when the branch taken does not
/// compute them.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepIntermediates<F> {
    pub c: Option<F>,
    pub s_raw: Option<F>,
    pub l: Option<F>,
    pub d: Option<F>,
}

impl<F> Default for StepIntermediates<F> {
    fn default() -> Self {
        Self {
            c: None,
            s_raw: None,
            l: None,
            d: None,
        }
    }
}

/// Outcome of one application of the map.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepResult<F> {
    /// The successor state; `None` only for [`OverloadStatus::InvalidDiscriminant`].
    pub next: Option<DiscreteState<F>>,
    /// Branch that fired.
    pub branch: BranchId,
    /// Overload classification of the step's pulse.
    pub overload: OverloadStatus,
    /// Auxiliary quantities of the branch taken.
    pub intermediates: StepIntermediates<F>,
}

/// Errors for invalid map inputs.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("state has u = {u} ≤ −1: VCO frequency nonpositive, outside the map's domain")]
    InvalidState { u: f64 },
    #[error("state contains a non-finite component")]
    NonFinite,
}

/// Fractional part with result in `[0, 1)` for all finite inputs
/// (floor-based, so negative inputs wrap upward: `floor_mod(-0.25) = 0.75`).
pub fn floor_mod<F: Scalar>(x: F) -> F {
    let mut r = x - x.floor();
    // `x - floor(x)` can round to exactly 1 for tiny negative x.
    if r >= F::one() {
        r = r - F::one();
    }
    if r < F::zero() {
        r = F::zero();
    }
    r
}

/// Normalizes IEEE negative zero to positive zero so downstream sign tests
/// and serialized output are unambiguous.
#[inline]
fn clean_zero<F: Scalar>(x: F) -> F {
    if x == F::zero() {
        F::zero()
    } else {
        x
    }
}

/// Sign of a prospective pump pulse, selecting which overload predicate
/// applies. Zero-width pulses arising as limits of negative pulses use
/// [`PulseSign::Negative`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PulseSign {
    Positive,
    Negative,
}

/// Overload predicate for a prospective pulse.
///
/// `s.p` is the imminent pulse width (normalized, signed) and `s.u` the
/// frequency offset *entering* the pulse interval.
///
/// * Negative pulse of width `p' ≤ 0`: overload iff
///   `(u + 1) + 2·beta·p' − alpha ≤ 0` (equivalently, the post-pulse offset
///   satisfies `u' ≤ alpha − 1`). At lock (`p'→0⁻`, `u→0`) this reduces to
///   `alpha ≥ 1`.
/// * Positive pulse: overload iff `u ≤ −1` at the pulse start, which no valid
///   state reaches.
pub fn overload_pre<F: Scalar>(
    s: DiscreteState<F>,
    np: &NormalizedParameters<F>,
    sign: PulseSign,
) -> OverloadStatus {
    match sign {
        PulseSign::Negative => {
            let margin = (s.u + F::one()) + lit::<F>(2.0) * np.beta * s.p - np.alpha;
            if margin <= F::zero() {
                OverloadStatus::NegativePulse
            } else {
                OverloadStatus::None
            }
        }
        PulseSign::Positive => {
            if s.u <= -F::one() {
                OverloadStatus::PositivePulse
            } else {
                OverloadStatus::None
            }
        }
    }
}

/// Advances the state by one pump pulse.
///
/// Preconditions: `s.u > −1` and all inputs finite. The four branches:
///
/// * `p ≥ 0`, `c = (1 − frac(p))·(u+1) − 1 ≤ 0` → **QuadPos**: smallest
///   nonnegative root of `beta·p'² + (u+alpha+1)·p' + c = 0`.
/// * `p ≥ 0`, `c > 0` → **FracPos**: `p' = frac(p) − u/(1+u)` (< 0).
/// * `p < 0`, `l = (1 − frac(S))/(u+1) ≤ 1` with
///   `S = −(u−alpha+1)·p + beta·p²` → **LinNeg**: `p' = l − 1`.
/// * `p < 0`, `l > 1` → **QuadNeg**: smallest positive root of
///   `beta·p'² + (u+alpha+1)·p' + d = 0`, `d = frac(S) + u`.
///
/// then `u' = u + 2·beta·p'` for every branch. Both quadratics use the
/// conjugate (cancellation-safe) small-root form, and `p = 0` takes the
/// `p ≥ 0` branches. Fractional parts are floor-based in `[0, 1)`.
///
/// The result carries the overload classification of the *pulse the step
/// realizes*: the successor state is still reported whenever it is
/// computable (everything except a negative discriminant).
///
/// # Errors
/// [`ModelError::InvalidState`] if `s.u ≤ −1`; [`ModelError::NonFinite`] on
/// non-finite input.
///
/// # Examples
/// ```
/// use cppll::map::{step, BranchId, DiscreteState};
/// use cppll::params::NormalizedParameters;
/// let np = NormalizedParameters::<f64>::new(0.2, 1.6).unwrap();
/// let r = step(DiscreteState::new(0.0, 1.0 / 3.0), &np).unwrap();
/// let next = r.next.unwrap();
/// assert_eq!(r.branch, BranchId::FracPos);
/// assert!((next.p + 0.25).abs() < 1e-15);
/// assert!((next.u + 7.0 / 15.0).abs() < 1e-15);
/// ```
pub fn step<F: Scalar>(
    s: DiscreteState<F>,
    np: &NormalizedParameters<F>,
) -> Result<StepResult<F>, ModelError> {
    if !(s.p.is_finite() && s.u.is_finite()) {
        return Err(ModelError::NonFinite);
    }
    if s.u <= -F::one() {
        return Err(ModelError::InvalidState {
            u: s.u.to_f64().unwrap_or(f64::NAN),
        });
    }
    let one = F::one();
    let two = lit::<F>(2.0);
    let four = lit::<F>(4.0);
    let (alpha, beta) = (np.alpha, np.beta);
    let u1 = s.u + one;
    let mut inter = StepIntermediates::default();

    let (p_next, branch) = if s.p >= F::zero() {
        let frac_p = floor_mod(s.p);
        let c = (one - frac_p) * u1 - one;
        inter.c = Some(c);
        if c <= F::zero() {
            // Quadratic with constant term c ≤ 0: discriminant ≥ w² > 0, so a
            // real nonnegative root always exists; the check below is a
            // safeguard for rounding at the extremes.
            let w = s.u + alpha + one;
            let disc = w * w - four * beta * c;
            if disc < F::zero() {
                return Ok(StepResult {
                    next: None,
                    branch: BranchId::QuadPos,
                    overload: OverloadStatus::InvalidDiscriminant,
                    intermediates: inter,
                });
            }
            let p_next = clean_zero(two * (-c) / (w + disc.sqrt()));
            (p_next, BranchId::QuadPos)
        } else {
            // c > 0 requires u > 0, and the result is always negative.
            let p_next = frac_p - s.u / u1;
            (p_next, BranchId::FracPos)
        }
    } else {
        let s_raw = -(s.u - alpha + one) * s.p + beta * s.p * s.p;
        let frac_s = floor_mod(s_raw);
        let l = (one - frac_s) / u1;
        inter.s_raw = Some(s_raw);
        inter.l = Some(l);
        if l <= one {
            (clean_zero(l - one), BranchId::LinNeg)
        } else {
            let d = frac_s + s.u;
            inter.d = Some(d);
            // l > 1 implies d < 0, so the root is positive; a negative
            // discriminant means the assumed next edge never happens.
            let w = s.u + alpha + one;
            let disc = w * w - four * beta * d;
            if disc < F::zero() {
                return Ok(StepResult {
                    next: None,
                    branch: BranchId::QuadNeg,
                    overload: OverloadStatus::InvalidDiscriminant,
                    intermediates: inter,
                });
            }
            let p_next = clean_zero(two * (-d) / (w + disc.sqrt()));
            (p_next, BranchId::QuadNeg)
        }
    };

    let u_next = s.u + two * beta * p_next;
    let sign = if p_next < F::zero() {
        PulseSign::Negative
    } else {
        PulseSign::Positive
    };
    // The overload predicate applies to the pulse this step realizes: width
    // p_next, entered with frequency offset s.u.
    let overload = overload_pre(DiscreteState::new(p_next, s.u), np, sign);
    Ok(StepResult {
        next: Some(DiscreteState::new(p_next, u_next)),
        branch,
        overload,
        intermediates: inter,
    })
}

/// Jacobian `d(p', u')/d(p, u)` of one branch formula at a state.
///
/// The branch is treated as a smooth function (fractional parts
/// differentiate to 1) at the floor offsets of `s` itself. The second row is
/// determined by the shared update `u' = u + 2·beta·p'`. For the quadratic
/// branches the derivative uses the identity `2·beta·p' + w = sqrt(disc)`.
///
/// # Panics
/// Debug-asserts that a quadratic branch has a positive discriminant at `s`.
pub fn branch_jacobian<F: Scalar>(
    s: DiscreteState<F>,
    np: &NormalizedParameters<F>,
    branch: BranchId,
) -> Mat2<F> {
    let one = F::one();
    let two = lit::<F>(2.0);
    let four = lit::<F>(4.0);
    let (alpha, beta) = (np.alpha, np.beta);
    let u1 = s.u + one;
    let (dp_dp, dp_du) = match branch {
        BranchId::QuadPos => {
            let frac_p = floor_mod(s.p);
            let c = (one - frac_p) * u1 - one;
            let w = s.u + alpha + one;
            let disc = w * w - four * beta * c;
            debug_assert!(disc > F::zero(), "QuadPos discriminant must be positive");
            let sq = disc.sqrt();
            let p_next = two * (-c) / (w + sq);
            ((u1) / sq, -(p_next + one - frac_p) / sq)
        }
        BranchId::FracPos => (one, -(u1 * u1).recip()),
        BranchId::LinNeg => {
            let s_raw = -(s.u - alpha + one) * s.p + beta * s.p * s.p;
            let frac_s = floor_mod(s_raw);
            (
                (s.u - alpha + one - two * beta * s.p) / u1,
                (s.p * u1 - (one - frac_s)) / (u1 * u1),
            )
        }
        BranchId::QuadNeg => {
            let s_raw = -(s.u - alpha + one) * s.p + beta * s.p * s.p;
            let frac_s = floor_mod(s_raw);
            let d = frac_s + s.u;
            let w = s.u + alpha + one;
            let disc = w * w - four * beta * d;
            debug_assert!(disc > F::zero(), "QuadNeg discriminant must be positive");
            let sq = disc.sqrt();
            let p_next = two * (-d) / (w + sq);
            (
                (s.u - alpha + one - two * beta * s.p) / sq,
                -(p_next + one - s.p) / sq,
            )
        }
    };
    Mat2::new(
        dp_dp,
        dp_du,
        two * beta * dp_dp,
        one + two * beta * dp_du,
    )
}

/// How a trajectory ended.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Termination {
    /// `max(|p|,|u|)` stayed below the lock tolerance for a full window.
    Locked,
    /// A step's pulse tripped an overload predicate (payload says which).
    Overloaded(OverloadStatus),
    /// The step budget ran out without meeting any other condition.
    MaxSteps,
    /// `|u|` exceeded the divergence bound.
    Diverged,
}

/// A finite orbit of the map together with the branches taken.
///
/// Invariant: `branches.len() == states.len() − 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory<F> {
    pub states: Vec<DiscreteState<F>>,
    pub branches: Vec<BranchId>,
    pub termination: Termination,
}

/// Tuning for [`iterate_with`].
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct IterateOptions<F> {
    /// Lock is declared when `max(|p|,|u|)` stays below this for
    /// `lock_window` consecutive states. Must be positive.
    pub lock_tolerance: F,
    /// Number of consecutive in-tolerance states required for lock.
    pub lock_window: usize,
    /// Divergence is declared when `|u|` exceeds this bound.
    pub divergence_bound: F,
}

impl<F: Scalar> Default for IterateOptions<F> {
    fn default() -> Self {
        Self {
            lock_tolerance: lit(1e-6),
            lock_window: 10,
            divergence_bound: lit(1e6),
        }
    }
}

/// Iterates the map from `s0` for at most `max_steps` steps.
///
/// Terminates `Locked` when `max(|p|,|u|) < lock_tolerance` holds for
/// `lock_window` consecutive states (the initial state counts), `Overloaded`
/// as soon as a step's pulse trips an overload predicate (the offending
/// step's successor, when computable, is the final recorded state),
/// `Diverged` when `|u|` exceeds the default bound of `1e6`, and `MaxSteps`
/// otherwise.
///
/// # Errors
/// Only on an invalid or non-finite initial state; mid-run overload is a
/// termination, not an error.
pub fn iterate<F: Scalar>(
    s0: DiscreteState<F>,
    np: &NormalizedParameters<F>,
    max_steps: usize,
    lock_tolerance: F,
    lock_window: usize,
) -> Result<Trajectory<F>, ModelError> {
    iterate_with(
        s0,
        np,
        max_steps,
        IterateOptions {
            lock_tolerance,
            lock_window,
            ..IterateOptions::default()
        },
    )
}

/// [`iterate`] with an explicit divergence bound.
pub fn iterate_with<F: Scalar>(
    s0: DiscreteState<F>,
    np: &NormalizedParameters<F>,
    max_steps: usize,
    opts: IterateOptions<F>,
) -> Result<Trajectory<F>, ModelError> {
    debug_assert!(max_steps >= 1, "iterate requires max_steps >= 1");
    debug_assert!(
        opts.lock_tolerance > F::zero(),
        "lock tolerance must be positive"
    );
    if !(s0.p.is_finite() && s0.u.is_finite()) {
        return Err(ModelError::NonFinite);
    }
    if s0.u <= -F::one() {
        return Err(ModelError::InvalidState {
            u: s0.u.to_f64().unwrap_or(f64::NAN),
        });
    }

    let mut states = Vec::with_capacity(max_steps.min(1 << 16) + 1);
    let mut branches = Vec::with_capacity(max_steps.min(1 << 16));
    let mut s = s0;
    states.push(s);
    let mut in_tol = 0usize;

    for _ in 0..max_steps {
        if s.inf_norm() < opts.lock_tolerance {
            in_tol += 1;
            if in_tol >= opts.lock_window {
                return Ok(Trajectory {
                    states,
                    branches,
                    termination: Termination::Locked,
                });
            }
        } else {
            in_tol = 0;
        }

        let r = match step(s, np) {
            Ok(r) => r,
            Err(_) => {
                // Unreachable from valid states: the negative-pulse predicate
                // fires before u can cross −1. Kept as a safe terminal.
                return Ok(Trajectory {
                    states,
                    branches,
                    termination: Termination::Overloaded(OverloadStatus::NegativePulse),
                });
            }
        };
        branches.push(r.branch);
        if let Some(next) = r.next {
            states.push(next);
            if r.overload.is_overload() {
                return Ok(Trajectory {
                    states,
                    branches,
                    termination: Termination::Overloaded(r.overload),
                });
            }
            if !next.u.is_finite() || next.u.abs() > opts.divergence_bound {
                return Ok(Trajectory {
                    states,
                    branches,
                    termination: Termination::Diverged,
                });
            }
            s = next;
        } else {
            return Ok(Trajectory {
                states,
                branches,
                termination: Termination::Overloaded(r.overload),
            });
        }
    }
    Ok(Trajectory {
        states,
        branches,
        termination: Termination::MaxSteps,
    })
}

/// An axis-aligned box of states, used by searches and sweeps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateBox<F> {
    pub p_min: F,
    pub p_max: F,
    pub u_min: F,
    pub u_max: F,
}

impl<F: Scalar> StateBox<F> {
    pub fn new(p_min: F, p_max: F, u_min: F, u_max: F) -> Self {
        debug_assert!(p_min <= p_max && u_min <= u_max, "degenerate state box");
        Self {
            p_min,
            p_max,
            u_min,
            u_max,
        }
    }

    pub fn contains(&self, s: &DiscreteState<F>) -> bool {
        s.p >= self.p_min && s.p <= self.p_max && s.u >= self.u_min && s.u <= self.u_max
    }
}

impl<F: Scalar> Default for StateBox<F> {
    /// Default search region `p ∈ [−0.9, 0.9]`, `u ∈ [−0.9, 3]`.
    fn default() -> Self {
        Self::new(lit(-0.9), lit(0.9), lit(-0.9), lit(3.0))
    }
}
