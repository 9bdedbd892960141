//! Simulation and analysis of a charge-pump phase-locked loop with a
//! perfect proportional–integral loop filter.
//!
//! The loop is modeled two independent ways, and keeping the two routes
//! independent is a design requirement (each validates the other):
//!
//! * [`map`] — the exact pulse-to-pulse discrete map on the normalized
//!   state `(p, u)` (signed pulse width and frequency offset at reference
//!   edges), with closed-form branches, overload predicates, and analytic
//!   per-branch Jacobians;
//! * [`oracle`] — an event-driven continuous-time simulator of the
//!   phase/frequency detector, charge pump, filter, and VCO, from which the
//!   same discrete samples are extracted by watching pump pulses.
//!
//! On top of the map sit the analysis layers:
//!
//! * [`stability`] — conewise linearization around lock, a shared quadratic
//!   Lyapunov function with closed-form decrements, a finite-net contraction
//!   certificate, an instability witness for `β > 2`, and the closed-form
//!   hold-in / pull-in range bounds;
//! * [`cycles`] — closed-form period-2/period-3 orbits and a grid-seeded
//!   Newton search with Floquet-multiplier classification;
//! * [`sweep`] — basin / branch / parameter-plane rasters with CSV and SVG
//!   export, and an empirical pull-in estimator.
//!
//! All numerics are generic over the scalar type via [`scalar::Scalar`]
//! (implemented for `f32` and `f64`); `*64` aliases for the common types are
//! exported at the crate root.
//!
//! Parameters enter either as physical component values
//! ([`PhysicalParameters`]: resistance, capacitance, VCO gain, pump current,
//! reference period) or directly as the dimensionless pair
//! ([`NormalizedParameters`]: `α = K·I_p·T·R`, `β = K·I_p·T²/(2C)`).
//!
//! ```
//! use cppll::{DiscreteState, NormalizedParameters, OverloadStatus, step};
//!
//! let np = NormalizedParameters::<f64>::new(0.2, 1.6).unwrap();
//! // One point of the period-3 orbit maps to the next.
//! let r = step(DiscreteState::new(0.0, 1.0 / 3.0), &np).unwrap();
//! assert_eq!(r.overload, OverloadStatus::None);
//! let next = r.next.unwrap();
//! assert!((next.p + 0.25).abs() < 1e-15 && (next.u + 7.0 / 15.0).abs() < 1e-15);
//! ```

pub mod cycles;
pub mod linalg;
pub mod map;
pub mod oracle;
pub mod params;
pub mod scalar;
pub mod stability;
pub mod sweep;

pub use cycles::{
    classify_cycle, cycle_overloads, find_cycles, period2, period3, period3_offset, Cycle,
    CycleSearch, CycleStability,
};
pub use map::{
    branch_jacobian, iterate, iterate_with, overload_pre, step, BranchId, DiscreteState,
    IterateOptions, ModelError, OverloadStatus, PulseSign, StateBox, StepResult, Termination,
    Trajectory,
};
pub use oracle::{
    extract_discrete, next_event, simulate, simulate_with, ContinuousState, Event, EventKind,
    EventLog, OracleError, PfdState, PulseSample, Segment, SimOptions, StopReason,
};
pub use params::{NormalizedParameters, ParameterError, PhysicalParameters};
pub use scalar::Scalar;
pub use stability::{
    classify_parameters, classification_record, continuity_check, contraction_certificate,
    contraction_certificate_with, differential_apply, hold_in, instability_witness, lasalle_check,
    linearized_pieces, lyapunov_decrement, lyapunov_h, lyapunov_value, piece_matrix, piece_of,
    pull_in_bound, BindingTerm,
    CertificateOptions, CertificationFailure, ClassificationRecord, ConicalPiece,
    LyapunovCertificate, RangeEstimate, StabilityClass, StabilityError, Witness, WitnessError,
};
pub use sweep::{
    basin_map, branch_map, classify_state, empirical_pull_in, grid_csv, grid_svg, halton,
    param_cell, param_map, AxisSpec, BasinOptions, BranchCell, FailingSample, Grid, GridCell,
    ParamCell, ParamFinding, ParamMap, PullInEvaluation, PullInOptions, PullInResult, StateCell,
    SweepError,
};

/// `f64` aliases for the main parameterized types.
pub type DiscreteState64 = map::DiscreteState<f64>;
pub type NormalizedParameters64 = params::NormalizedParameters<f64>;
pub type PhysicalParameters64 = params::PhysicalParameters<f64>;
pub type Trajectory64 = map::Trajectory<f64>;
pub type StateBox64 = map::StateBox<f64>;
pub type IterateOptions64 = map::IterateOptions<f64>;
pub type ContinuousState64 = oracle::ContinuousState<f64>;
pub type EventLog64 = oracle::EventLog<f64>;
pub type SimOptions64 = oracle::SimOptions<f64>;
pub type RangeEstimate64 = stability::RangeEstimate<f64>;
pub type Witness64 = stability::Witness<f64>;
pub type LyapunovCertificate64 = stability::LyapunovCertificate<f64>;
pub type Cycle64 = cycles::Cycle<f64>;
pub type CycleSearch64 = cycles::CycleSearch<f64>;
pub type Grid64<C> = sweep::Grid<f64, C>;
pub type ParamMap64 = sweep::ParamMap<f64>;
pub type PullInResult64 = sweep::PullInResult<f64>;
pub type AxisSpec64 = sweep::AxisSpec<f64>;
pub type BasinOptions64 = sweep::BasinOptions<f64>;
pub type PullInOptions64 = sweep::PullInOptions<f64>;
