//! Stability analysis of the locked state.
//!
//! Near the origin the discrete map is positively homogeneous to first
//! order: its differential is linear on each of four convex cones that
//! partition the plane, with the four matrices agreeing on shared rays. This
//! module provides
//!
//! * the conical pieces and the piecewise-linear differential,
//! * a common quadratic Lyapunov function with per-cone closed-form
//!   decrements and a sampled invariant-set check,
//! * a finite-net contraction certificate producing the exponent `m` with
//!   `V(q^m(x)) ≤ η·V(x)`,
//! * a parameter classification and the hold-in / pull-in range estimates in
//!   physical units,
//! * an instability witness (an expanding direction of a two-step linear
//!   composition, cross-checked on the nonlinear map).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use rayon::prelude::*;

use crate::linalg::{Mat2, Vec2};
use crate::map::{iterate_with, BranchId, DiscreteState, IterateOptions, Trajectory};
use crate::params::{NormalizedParameters, PhysicalParameters};
use crate::scalar::{lit, Scalar};

/// One cone of the partition at the origin with its linear matrix.
///
/// The cone is the set of nonnegative combinations of `ray_low` and
/// `ray_high`; going through the four pieces in the returned order traverses
/// the plane counterclockwise, each piece's `ray_high` being the next
/// piece's `ray_low`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConicalPiece<F> {
    pub branch: BranchId,
    pub ray_low: Vec2<F>,
    pub ray_high: Vec2<F>,
    pub matrix: Mat2<F>,
}

impl<F: Scalar> ConicalPiece<F> {
    /// Cone membership (boundaries inclusive). Valid for sectors spanning
    /// less than a half-plane, which all four pieces are.
    pub fn contains(&self, x: Vec2<F>) -> bool {
        let cross = |a: Vec2<F>, b: Vec2<F>| a.x * b.y - a.y * b.x;
        cross(self.ray_low, x) >= F::zero() && cross(x, self.ray_high) >= F::zero()
    }
}

/// The linear matrix the differential applies on the cone owning `branch`.
pub fn piece_matrix<F: Scalar>(branch: BranchId, np: &NormalizedParameters<F>) -> Mat2<F> {
    let one = F::one();
    let two = lit::<F>(2.0);
    let (a, b) = (np.alpha, np.beta);
    match branch {
        BranchId::QuadPos => Mat2::new(one, -one, two * b, one + a - two * b)
            .scale((one + a).recip()),
        BranchId::FracPos => Mat2::new(one, -one, two * b, one - two * b),
        BranchId::LinNeg => Mat2::new(one - a, -one, two * b * (one - a), one - two * b),
        BranchId::QuadNeg => Mat2::new(one - a, -one, two * b * (one - a), one + a - two * b)
            .scale((one + a).recip()),
    }
}

/// The four cones of the differential with their matrices, in
/// counterclockwise order starting from the lower half of `p ≥ 0`.
///
/// Assignment (fixed by matching finite-difference Jacobians of the map's
/// branches near the origin, see the crate's test suite): sector
/// `{p ≥ 0, u ≤ p}` gets the quadratic positive-pulse matrix, `{p ≥ 0,
/// u ≥ p}` the fractional one, `{p ≤ 0, u ≥ (1−α)p}` the affine
/// negative-pulse one and `{p ≤ 0, u ≤ (1−α)p}` the quadratic negative-pulse
/// one.
pub fn linearized_pieces<F: Scalar>(np: &NormalizedParameters<F>) -> [ConicalPiece<F>; 4] {
    let one = F::one();
    let slope = one - np.alpha; // boundary ray u = (1−α)p for p ≤ 0
    let mk = |branch, low, high| ConicalPiece {
        branch,
        ray_low: low,
        ray_high: high,
        matrix: piece_matrix(branch, np),
    };
    [
        mk(
            BranchId::QuadPos,
            Vec2::new(F::zero(), -one),
            Vec2::new(one, one),
        ),
        mk(
            BranchId::FracPos,
            Vec2::new(one, one),
            Vec2::new(F::zero(), one),
        ),
        mk(
            BranchId::LinNeg,
            Vec2::new(F::zero(), one),
            Vec2::new(-one, -slope),
        ),
        mk(
            BranchId::QuadNeg,
            Vec2::new(-one, -slope),
            Vec2::new(F::zero(), -one),
        ),
    ]
}

/// The cone owning a vector (ties resolved consistently; the matrices agree
/// on ties, so the choice is unobservable through [`differential_apply`]).
pub fn piece_of<F: Scalar>(x: Vec2<F>, np: &NormalizedParameters<F>) -> BranchId {
    if x.x >= F::zero() {
        if x.y >= x.x {
            BranchId::FracPos
        } else {
            BranchId::QuadPos
        }
    } else if x.y >= (F::one() - np.alpha) * x.x {
        BranchId::LinNeg
    } else {
        BranchId::QuadNeg
    }
}

/// The piecewise-linear differential of the map at the origin.
pub fn differential_apply<F: Scalar>(x: Vec2<F>, np: &NormalizedParameters<F>) -> Vec2<F> {
    piece_matrix(piece_of(x, np), np).mul_vec(x)
}

/// Errors from operations that require a positive-definite Lyapunov matrix.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum StabilityError {
    #[error("Lyapunov matrix is not positive definite at beta = {beta} (requires 0 < beta < 2)")]
    HNotPositiveDefinite { beta: f64 },
}

/// The quadratic Lyapunov matrix `H = [[2β, −β], [−β, 1]]`.
///
/// Positive definite exactly for `0 < β < 2` (`det H = 2β − β²`).
pub fn lyapunov_h<F: Scalar>(np: &NormalizedParameters<F>) -> Mat2<F> {
    let b = np.beta;
    Mat2::new(lit::<F>(2.0) * b, -b, -b, F::one())
}

/// `V(x) = xᵀHx`.
pub fn lyapunov_value<F: Scalar>(x: Vec2<F>, np: &NormalizedParameters<F>) -> F {
    lyapunov_h(np).quadratic_form(x)
}

/// Closed-form Lyapunov decrement `V(q(x)) − V(x)` of the differential.
///
/// Per cone (with `x = (p, u)` and `k = 2αβ/(1+α)²`):
///
/// * `{p ≥ 0, u ≤ p}`: `−k·(u − p)·(u − (2+α)p)`,
/// * `{p ≥ 0, u ≥ p}`: `0` (the matrix preserves `H` exactly),
/// * `{p ≤ 0, u ≥ (1−α)p}`: `2αβ·p·((α−2)p + u)`,
/// * `{p ≤ 0, u ≤ (1−α)p}`: `−k·(2p − u)²`.
///
/// All four are `≤ 0` on their cones for `0 < α < 1`, `0 < β < 2`. The
/// decrement vanishes identically on the cone `{p ≥ 0, u ≥ p}` and on the
/// ray `u = 2p, p ≤ 0`, and nowhere else: LaSalle-type reasoning on that set
/// yields asymptotic stability, and [`lasalle_check`] verifies the sign
/// pattern by sampling.
///
/// # Errors
/// [`StabilityError::HNotPositiveDefinite`] when `β ∉ (0, 2)`.
pub fn lyapunov_decrement<F: Scalar>(
    x: Vec2<F>,
    np: &NormalizedParameters<F>,
) -> Result<F, StabilityError> {
    if !(np.beta > F::zero() && np.beta < lit::<F>(2.0)) {
        return Err(StabilityError::HNotPositiveDefinite {
            beta: np.beta.to_f64().unwrap_or(f64::NAN),
        });
    }
    let (a, b) = (np.alpha, np.beta);
    let one = F::one();
    let two = lit::<F>(2.0);
    let k = two * a * b / ((one + a) * (one + a));
    let (p, u) = (x.x, x.y);
    Ok(match piece_of(x, np) {
        BranchId::QuadPos => -k * (u - p) * (u - (two + a) * p),
        BranchId::FracPos => F::zero(),
        BranchId::LinNeg => two * a * b * p * ((a - two) * p + u),
        BranchId::QuadNeg => {
            let z = two * p - u;
            -k * z * z
        }
    })
}

/// Local stability verdict for a parameter pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StabilityClass {
    /// `0 < α < 1` and `0 < β < 2`: locked state locally asymptotically
    /// stable and free of overload.
    LocallyStable,
    /// `α = 1` or `β = 2` exactly.
    Boundary,
    /// `β > 2`: expanding two-step direction exists, origin unstable.
    UnstableBeta,
    /// `α > 1`: arbitrarily small negative pulses overload the VCO.
    OverloadAtLock,
}

impl StabilityClass {
    pub fn name(&self) -> &'static str {
        match self {
            StabilityClass::LocallyStable => "locally-stable",
            StabilityClass::Boundary => "boundary",
            StabilityClass::UnstableBeta => "unstable-beta",
            StabilityClass::OverloadAtLock => "overload-at-lock",
        }
    }
}

/// Classifies a parameter pair. Overload dominates: `α > 1` is reported as
/// [`StabilityClass::OverloadAtLock`] regardless of `β`; exact equalities
/// `α = 1` or `β = 2` report [`StabilityClass::Boundary`]. `β = 3/2` is
/// locally stable (the nonlinear map is, even though the linearization alone
/// is only marginally so; [`contraction_certificate`] reports that case as
/// stalled).
pub fn classify_parameters<F: Scalar>(np: &NormalizedParameters<F>) -> StabilityClass {
    let one = F::one();
    let two = lit::<F>(2.0);
    if np.alpha > one {
        StabilityClass::OverloadAtLock
    } else if np.alpha == one {
        StabilityClass::Boundary
    } else if np.beta > two {
        StabilityClass::UnstableBeta
    } else if np.beta == two {
        StabilityClass::Boundary
    } else {
        StabilityClass::LocallyStable
    }
}

/// Which closed-form term of a range estimate binds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BindingTerm {
    /// The `β`-boundary term (`β = 2` for hold-in, `β = 3/2` for pull-in).
    BetaBound,
    /// The `α = 1` overload term.
    AlphaBound,
}

impl BindingTerm {
    pub fn name(&self) -> &'static str {
        match self {
            BindingTerm::BetaBound => "beta",
            BindingTerm::AlphaBound => "alpha",
        }
    }
}

/// A reference-period range estimate `(0, t_ref_seconds)` with both
/// closed-form terms and the binding one identified.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RangeEstimate<F> {
    pub t_ref_seconds: F,
    pub binding: BindingTerm,
    pub beta_term_seconds: F,
    pub alpha_term_seconds: F,
}

fn range_estimate<F: Scalar>(beta_term: F, alpha_term: F) -> RangeEstimate<F> {
    if beta_term <= alpha_term {
        RangeEstimate {
            t_ref_seconds: beta_term,
            binding: BindingTerm::BetaBound,
            beta_term_seconds: beta_term,
            alpha_term_seconds: alpha_term,
        }
    } else {
        RangeEstimate {
            t_ref_seconds: alpha_term,
            binding: BindingTerm::AlphaBound,
            beta_term_seconds: beta_term,
            alpha_term_seconds: alpha_term,
        }
    }
}

/// Hold-in range: the locked state exists, is locally stable and overload-free
/// exactly for reference periods in `(0, hold_in)`, with
/// `hold_in = min{√(4C/(K·I_p)), 1/(K·I_p·R)}` (the `β = 2` and `α = 1`
/// boundaries expressed in seconds).
pub fn hold_in<F: Scalar>(phys: &PhysicalParameters<F>) -> RangeEstimate<F> {
    let kip = phys.vco_gain_hz_per_volt * phys.pump_current_amps;
    let beta_term = (lit::<F>(4.0) * phys.capacitance_farads / kip).sqrt();
    let alpha_term = (kip * phys.resistance_ohms).recip();
    range_estimate(beta_term, alpha_term)
}

/// Upper estimate of the pull-in range:
/// `min{√(3C/(K·I_p)), 1/(K·I_p·R)}` (the `β = 3/2` cycle-birth boundary and
/// the `α = 1` boundary). Always `≤` [`hold_in`].
pub fn pull_in_bound<F: Scalar>(phys: &PhysicalParameters<F>) -> RangeEstimate<F> {
    let kip = phys.vco_gain_hz_per_volt * phys.pump_current_amps;
    let beta_term = (lit::<F>(3.0) * phys.capacitance_farads / kip).sqrt();
    let alpha_term = (kip * phys.resistance_ohms).recip();
    range_estimate(beta_term, alpha_term)
}

/// An expanding direction certifying instability of the origin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness<F> {
    /// Leading eigenvalue of the two-step composition (growth per two steps).
    pub lambda1: F,
    pub lambda2: F,
    /// Unit eigenvector for `lambda1`, sign-normalized to `p > 0`. Lies in
    /// the cone `{p ≥ 0, u ≥ p}`, and its one-step image lies in
    /// `{p ≤ 0, u ≤ (1−α)p}`, so the two-step composition is realized by the
    /// differential.
    pub direction: Vec2<F>,
    /// The two-step matrix whose eigenpair is reported.
    pub matrix: Mat2<F>,
    /// Nonlinear map trajectory started at `1e−4 × direction`.
    pub orbit: Vec<DiscreteState<F>>,
    /// First index in `orbit` with Euclidean norm above `1e−2`, if reached.
    pub escape_step: Option<usize>,
}

/// Why no instability witness could be produced.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum WitnessError {
    #[error("two-step composition has no eigenvalue above 1 (lambda1 = {lambda1}, lambda2 = {lambda2}); origin not certified unstable")]
    NoExpandingDirection { lambda1: f64, lambda2: f64 },
    #[error("two-step composition has complex eigenvalues {re} ± {im}i; no real expanding direction")]
    ComplexEigenvalues { re: f64, im: f64 },
    #[error("leading eigenvector does not lie in the expected cones; two-step composition not realized by the differential")]
    DirectionOutsideCones,
}

/// Produces an instability witness for `β > 2`.
///
/// The composition of the two quadratic-branch-adjacent matrices (the
/// `{p ≥ 0, u ≥ p}` piece followed by the `{p ≤ 0, u ≤ (1−α)p}` piece) has
/// real eigenvalues with `λ1 > 1` exactly when `β > 2`; its leading
/// eigenvector and the nonlinear orbit from `1e−4 ×` that direction are
/// returned. The orbit is truncated when it leaves the Euclidean ball of
/// radius `1e−2` (recorded in `escape_step`), overloads, or diverges. The
/// step budget scales with `1 / log λ1` (linear growth from `1e−4` to
/// `1e−2` needs about `log(100)/log(λ1)` two-step rounds; four times that
/// is allowed, clamped to `[1000, 1_000_000]`), so a slowly expanding
/// direction is still given enough time to leave the ball.
///
/// `escape_step` can legitimately be `None`: just above the `β = 2`
/// boundary a small attracting two-step orbit coexists with the repelling
/// origin, and when that orbit lies inside the escape ball it traps the
/// witness trajectory at its own radius. `λ1 > 1` still certifies local
/// instability of the origin in that regime; the orbit merely settles on
/// the nearby oscillation instead of growing past the fixed radius.
///
/// # Errors
/// [`WitnessError::NoExpandingDirection`] when `λ1 ≤ 1` (in particular for
/// every `β ≤ 2`).
pub fn instability_witness<F: Scalar>(
    np: &NormalizedParameters<F>,
) -> Result<Witness<F>, WitnessError> {
    let a3 = piece_matrix(BranchId::FracPos, np);
    let a4 = piece_matrix(BranchId::QuadNeg, np);
    let m = a4.mul_mat(&a3);
    let eig = m.eigenvalues();
    let ((re1, im1), (re2, _)) = (eig[0], eig[1]);
    if im1.abs() > lit::<F>(1e-12) * (F::one() + re1.abs()) {
        return Err(WitnessError::ComplexEigenvalues {
            re: re1.to_f64().unwrap_or(f64::NAN),
            im: im1.to_f64().unwrap_or(f64::NAN),
        });
    }
    let (lambda1, lambda2) = (re1, re2);
    if !(lambda1 > F::one()) {
        return Err(WitnessError::NoExpandingDirection {
            lambda1: lambda1.to_f64().unwrap_or(f64::NAN),
            lambda2: lambda2.to_f64().unwrap_or(f64::NAN),
        });
    }
    let mut x1 = m
        .real_eigenvector(lambda1)
        .ok_or(WitnessError::DirectionOutsideCones)?;
    if x1.x < F::zero() || (x1.x == F::zero() && x1.y < F::zero()) {
        x1 = x1.scale(-F::one());
    }
    // The eigenvector must sit where the two-step composition is realized:
    // itself in the fractional cone, its one-step image in the quadratic
    // negative cone (small tolerance for rounding on the boundary rays).
    let tol = lit::<F>(1e-12);
    let in_frac = x1.x >= -tol && x1.y >= x1.x - tol;
    let img = a3.mul_vec(x1);
    let in_quad_neg = img.x <= tol && img.y <= (F::one() - np.alpha) * img.x + tol;
    if !(in_frac && in_quad_neg) {
        return Err(WitnessError::DirectionOutsideCones);
    }

    let eps = lit::<F>(1e-4);
    let ball = lit::<F>(1e-2);
    let s0 = DiscreteState::new(eps * x1.x, eps * x1.y);
    let lambda1_f = lambda1.to_f64().unwrap_or(f64::INFINITY);
    let rounds = (100.0f64.ln() / lambda1_f.ln()).ceil().max(1.0);
    let max_steps = ((8.0 * rounds) as usize).clamp(1000, 1_000_000);
    let traj: Trajectory<F> = iterate_with(
        s0,
        np,
        max_steps,
        IterateOptions {
            lock_tolerance: lit(1e-300),
            lock_window: 2,
            divergence_bound: lit(1e6),
        },
    )
    .unwrap_or(Trajectory {
        states: vec![s0],
        branches: vec![],
        termination: crate::map::Termination::MaxSteps,
    });
    let escape_step = traj
        .states
        .iter()
        .position(|s| (s.p * s.p + s.u * s.u).sqrt() > ball);
    let orbit = match escape_step {
        Some(i) => traj.states[..=i].to_vec(),
        None => traj.states,
    };
    Ok(Witness {
        lambda1,
        lambda2,
        direction: x1,
        matrix: m,
        orbit,
        escape_step,
    })
}

/// A verified contraction exponent for the piecewise-linear differential.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovCertificate<F> {
    pub h: Mat2<F>,
    pub eta: F,
    /// `V(q^m(x)) ≤ η·V(x)` for all `x` (net construction plus refined
    /// sampled verification).
    pub m: usize,
    /// Number of net points on the `H`-unit circle.
    pub net_size: usize,
    /// Largest `H`-norm over the refined verification circle after `m`
    /// applications (must be `≤ √η`).
    pub max_norm_at_m: F,
}

/// Tuning for [`contraction_certificate_with`].
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CertificateOptions {
    /// Hard bound on the exponent search.
    pub cap: usize,
    /// The verification circle has `net_refinement ×` the net's points.
    pub net_refinement: usize,
    /// Declare a stall when the net maximum stays flat (relative change
    /// `≤ 1e−15`) over this many consecutive iterations.
    pub stall_window: usize,
}

impl Default for CertificateOptions {
    fn default() -> Self {
        Self {
            cap: 100_000,
            net_refinement: 4,
            stall_window: 200,
        }
    }
}

/// Why certification failed.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CertificationFailure {
    #[error("eta = {eta} outside (0, 1)")]
    EtaOutOfRange { eta: f64 },
    #[error("Lyapunov matrix not positive definite at beta = {beta} (requires 0 < beta < 2); no certificate exists")]
    HNotPositiveDefinite { beta: f64 },
    #[error("net maximum still {level} after the cap of {cap} iterations")]
    CapReached { cap: usize, level: f64 },
    #[error("net maximum stalled at {level} after {at_iteration} iterations (marginal case: the linearization alone does not contract here)")]
    Stalled { level: f64, at_iteration: usize },
}

/// [`contraction_certificate`] with default options.
pub fn contraction_certificate<F: Scalar>(
    np: &NormalizedParameters<F>,
    eta: F,
) -> Result<LyapunovCertificate<F>, CertificationFailure> {
    contraction_certificate_with(np, eta, CertificateOptions::default())
}

/// Constructs a contraction exponent `m` with `V(q^m(x)) ≤ η·V(x)`.
///
/// A finite net of `√η/2`-spaced points on the `H`-unit circle is iterated
/// under the differential until every point's `H`-norm falls below
/// `ε = √η/2`; the smallest such iteration count is the candidate `m`. By
/// positive homogeneity the property on the unit circle extends to all `x`.
/// Because two of the four pieces can expand the `H`-norm transiently, the
/// net argument alone is not airtight; the candidate is therefore
/// re-verified on a finer circle (`net_refinement ×` denser, offset to
/// interleave), bumping `m` until `‖q^m(x)‖_H ≤ √η` holds on every
/// verification point.
///
/// Net points iterate in parallel; the reduction is a plain maximum, so the
/// result is deterministic for any thread count.
///
/// # Errors
/// * [`CertificationFailure::EtaOutOfRange`] unless `η ∈ (0, 1)`;
/// * [`CertificationFailure::HNotPositiveDefinite`] unless `0 < β < 2`;
/// * [`CertificationFailure::Stalled`] when the net maximum flatlines above
///   threshold (this happens at exactly `β = 3/2`, where the linearization
///   has a continuum of three-step orbits on which `V` is conserved);
/// * [`CertificationFailure::CapReached`] when `m` exceeds the cap.
pub fn contraction_certificate_with<F: Scalar>(
    np: &NormalizedParameters<F>,
    eta: F,
    opts: CertificateOptions,
) -> Result<LyapunovCertificate<F>, CertificationFailure> {
    if !(eta > F::zero() && eta < F::one()) {
        return Err(CertificationFailure::EtaOutOfRange {
            eta: eta.to_f64().unwrap_or(f64::NAN),
        });
    }
    if !(np.beta > F::zero() && np.beta < lit::<F>(2.0)) {
        return Err(CertificationFailure::HNotPositiveDefinite {
            beta: np.beta.to_f64().unwrap_or(f64::NAN),
        });
    }
    let h = lyapunov_h(np);
    let l = h.cholesky().ok_or(CertificationFailure::HNotPositiveDefinite {
        beta: np.beta.to_f64().unwrap_or(f64::NAN),
    })?;
    let lt = l.transpose();
    let eps = eta.sqrt() / lit::<F>(2.0);

    // Point on the H-unit circle at angle theta: solve Lᵀx = (cos, sin).
    let circle_point = |theta: F| -> Vec2<F> {
        lt.solve(Vec2::new(theta.cos(), theta.sin()))
            .expect("Cholesky factor is invertible")
    };
    let h_norm = |x: Vec2<F>| h.quadratic_form(x).max(F::zero()).sqrt();

    // Net spacing so that consecutive unit-circle points are within eps in
    // H-distance (arc step 2·asin(eps/2)), with a 4x safety factor.
    let two_pi = lit::<F>(core::f64::consts::TAU);
    let step = lit::<F>(2.0) * (eps / lit::<F>(2.0)).asin();
    let n_base = (two_pi / step)
        .ceil()
        .to_usize()
        .unwrap_or(usize::MAX)
        .max(16);
    let net_size = 4 * n_base;

    let mut pts: Vec<Vec2<F>> = (0..net_size)
        .map(|j| circle_point(two_pi * lit::<F>(j as f64) / lit::<F>(net_size as f64)))
        .collect();
    let max_norm = |pts: &[Vec2<F>]| -> F {
        pts.par_iter()
            .map(|&x| h_norm(x))
            .reduce(|| F::neg_infinity(), F::max)
    };

    let mut m = 0usize;
    let mut level = max_norm(&pts);
    let mut recent: Vec<F> = Vec::with_capacity(opts.stall_window);
    while level >= eps {
        if m >= opts.cap {
            return Err(CertificationFailure::CapReached {
                cap: opts.cap,
                level: level.to_f64().unwrap_or(f64::NAN),
            });
        }
        recent.push(level);
        if recent.len() > opts.stall_window {
            recent.remove(0);
        }
        if recent.len() == opts.stall_window {
            let lo = recent.iter().cloned().fold(F::infinity(), F::min);
            let hi = recent.iter().cloned().fold(F::neg_infinity(), F::max);
            if hi - lo <= lit::<F>(1e-15) * hi {
                return Err(CertificationFailure::Stalled {
                    level: level.to_f64().unwrap_or(f64::NAN),
                    at_iteration: m,
                });
            }
        }
        pts.par_iter_mut().for_each(|x| *x = differential_apply(*x, np));
        m += 1;
        level = max_norm(&pts);
    }

    // Refined verification: the certified inequality itself, sampled on a
    // denser interleaved circle. Bump m on any violation.
    let fine = net_size * opts.net_refinement.max(1);
    let sqrt_eta = eta.sqrt();
    let verify = |m: usize| -> F {
        (0..fine)
            .into_par_iter()
            .map(|j| {
                let theta = two_pi * (lit::<F>(j as f64) + lit::<F>(0.5))
                    / lit::<F>(fine as f64);
                let mut x = circle_point(theta);
                for _ in 0..m {
                    x = differential_apply(x, np);
                }
                h_norm(x)
            })
            .reduce(|| F::neg_infinity(), F::max)
    };
    let mut worst = verify(m);
    while worst > sqrt_eta {
        m += 1;
        if m > opts.cap {
            return Err(CertificationFailure::CapReached {
                cap: opts.cap,
                level: worst.to_f64().unwrap_or(f64::NAN),
            });
        }
        worst = verify(m);
    }

    Ok(LyapunovCertificate {
        h,
        eta,
        m,
        net_size,
        max_norm_at_m: worst,
    })
}

/// One shared-ray agreement check between adjacent pieces.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RayCheck<F> {
    pub ray: Vec2<F>,
    pub pieces: (BranchId, BranchId),
    pub mismatch: F,
}

/// Result of [`continuity_check`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuityReport<F> {
    pub ok: bool,
    pub max_mismatch: F,
    pub rays: Vec<RayCheck<F>>,
}

/// Verifies that adjacent pieces agree on their shared boundary rays
/// (tolerance `1e−12`), making the piecewise differential well-defined.
pub fn continuity_check<F: Scalar>(pieces: &[ConicalPiece<F>; 4]) -> ContinuityReport<F> {
    let tol = lit::<F>(1e-12);
    let mut rays = Vec::with_capacity(4);
    let mut max_mismatch = F::zero();
    for i in 0..4 {
        let a = &pieces[i];
        let b = &pieces[(i + 1) % 4];
        debug_assert_eq!(a.ray_high, b.ray_low, "pieces must be in adjacency order");
        let ray = a.ray_high;
        let mismatch = a.matrix.mul_vec(ray).sub(b.matrix.mul_vec(ray)).inf_norm();
        max_mismatch = max_mismatch.max(mismatch);
        rays.push(RayCheck {
            ray,
            pieces: (a.branch, b.branch),
            mismatch,
        });
    }
    ContinuityReport {
        ok: max_mismatch <= tol,
        max_mismatch,
        rays,
    }
}

/// Result of the sampled invariant-set check on the decrement's zero locus.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaSalleReport<F> {
    /// Largest `|decrement|` over sampled directions on the zero set
    /// (the cone `{p ≥ 0, u ≥ p}` and the ray `u = 2p, p ≤ 0`).
    pub max_abs_on_zero_set: F,
    /// Largest (least negative) decrement over sampled directions off the
    /// zero set; strict negativity confirms the locus is exactly as stated.
    pub worst_off_zero_set: F,
    pub samples_on: usize,
    pub samples_off: usize,
}

/// Samples unit directions and verifies the decrement is zero exactly on the
/// stated zero set and strictly negative elsewhere.
///
/// # Errors
/// [`StabilityError::HNotPositiveDefinite`] when `β ∉ (0, 2)`.
pub fn lasalle_check<F: Scalar>(
    np: &NormalizedParameters<F>,
    n_directions: usize,
) -> Result<LaSalleReport<F>, StabilityError> {
    let two_pi = lit::<F>(core::f64::consts::TAU);
    let mut report = LaSalleReport {
        max_abs_on_zero_set: F::zero(),
        worst_off_zero_set: F::neg_infinity(),
        samples_on: 0,
        samples_off: 0,
    };
    // Keep sampled directions a fixed angular margin away from the zero
    // set's boundary so "off" really is off.
    let margin = lit::<F>(1e-3);
    for j in 0..n_directions {
        let theta = two_pi * (lit::<F>(j as f64) + lit::<F>(0.37)) / lit::<F>(n_directions as f64);
        let x = Vec2::new(theta.cos(), theta.sin());
        let on_cone = x.x >= F::zero() && x.y >= x.x;
        let on_ray = x.x <= F::zero() && (x.y - lit::<F>(2.0) * x.x).abs() <= margin * x.norm();
        let near_boundary = (x.y - x.x).abs() <= margin
            || (x.x.abs() <= margin && x.y >= F::zero())
            || (x.y - lit::<F>(2.0) * x.x).abs() <= margin;
        let d = lyapunov_decrement(x, np)?;
        if on_cone || on_ray {
            report.max_abs_on_zero_set = report.max_abs_on_zero_set.max(d.abs());
            report.samples_on += 1;
        } else if !near_boundary {
            report.worst_off_zero_set = report.worst_off_zero_set.max(d);
            report.samples_off += 1;
        }
    }
    Ok(report)
}

/// Exportable summary of a parameter-pair analysis (classification plus the
/// Lyapunov data when it applies).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassificationRecord<F> {
    pub alpha: F,
    pub beta: F,
    pub class: StabilityClass,
    pub h: Option<Mat2<F>>,
    pub witness_lambda1: Option<F>,
}

/// Builds the exportable record for a parameter pair.
pub fn classification_record<F: Scalar>(np: &NormalizedParameters<F>) -> ClassificationRecord<F> {
    let class = classify_parameters(np);
    let h = if np.beta > F::zero() && np.beta < lit::<F>(2.0) {
        Some(lyapunov_h(np))
    } else {
        None
    };
    let witness_lambda1 = instability_witness(np).ok().map(|w| w.lambda1);
    ClassificationRecord {
        alpha: np.alpha,
        beta: np.beta,
        class,
        h,
        witness_lambda1,
    }
}
