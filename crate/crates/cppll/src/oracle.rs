//! Event-driven continuous-time simulator of the charge-pump loop.
//!
//! This is the reference route against which the closed-form discrete map in
//! [`crate::map`] is validated. It shares no formulas with the map: the loop
//! is integrated segment by segment, where a *segment* is a maximal interval
//! on which the phase detector state — and hence the pump current — is
//! constant. On each segment the capacitor voltage is affine in time and the
//! VCO phase is a polynomial of degree ≤ 2, so event times (reference edges,
//! VCO edges, overload onsets) solve in closed form and the only approximation
//! anywhere is floating-point rounding.
//!
//! Phases are measured in cycles: an oscillator emits its trailing edge each
//! time its phase crosses an integer. The phase detector reacts to trailing
//! edges only:
//!
//! * reference edge: raises the state (`Zero → Plus`, `Minus → Zero`),
//! * VCO edge: lowers it (`Zero → Minus`, `Plus → Zero`),
//! * coincident edges: the state becomes `Zero` regardless.
//!
//! The pump current is `+I_p` in `Plus`, `−I_p` in `Minus`, `0` in `Zero`;
//! the filter output seen by the VCO is `v_F = v_c + R·i`.
//!
//! An *overload onset* is the instant the VCO frequency reaches zero. The
//! model is only meaningful while the frequency is positive, so simulation
//! stops there and the pulse in progress is discarded as incomplete.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::map::{floor_mod, DiscreteState};
use crate::params::PhysicalParameters;
use crate::scalar::{lit, Scalar};

/// Charge-pump phase-detector state (the sign of the pump current).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PfdState {
    Zero,
    Plus,
    Minus,
}

impl PfdState {
    /// Pump current in this state.
    pub fn current<F: Scalar>(&self, pump_current_amps: F) -> F {
        match self {
            PfdState::Zero => F::zero(),
            PfdState::Plus => pump_current_amps,
            PfdState::Minus => -pump_current_amps,
        }
    }

    /// Sign of a pulse driven by this state (`0` in `Zero`).
    pub fn sign<F: Scalar>(&self) -> F {
        match self {
            PfdState::Zero => F::zero(),
            PfdState::Plus => F::one(),
            PfdState::Minus => -F::one(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PfdState::Zero => "zero",
            PfdState::Plus => "plus",
            PfdState::Minus => "minus",
        }
    }
}

/// Which oscillator produced a trailing edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Edge {
    Ref,
    Vco,
    /// Reference and VCO edges within the coincidence tolerance.
    Both,
}

/// Phase-detector transition on a trailing edge.
pub fn pfd_transition(pfd: PfdState, edge: Edge) -> PfdState {
    match edge {
        Edge::Ref => match pfd {
            PfdState::Zero => PfdState::Plus,
            PfdState::Plus => PfdState::Plus,
            PfdState::Minus => PfdState::Zero,
        },
        Edge::Vco => match pfd {
            PfdState::Zero => PfdState::Minus,
            PfdState::Plus => PfdState::Zero,
            PfdState::Minus => PfdState::Minus,
        },
        Edge::Both => PfdState::Zero,
    }
}

/// What kind of event a log entry records.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    /// Reference edge that does not return the detector to `Zero`.
    RefEdge,
    /// VCO edge that does not return the detector to `Zero`.
    VcoEdge,
    /// Coincident reference and VCO edges (detector forced to `Zero`).
    BothEdges,
    /// An edge that closes the pump pulse in progress.
    PfdToZero,
    /// VCO frequency reached zero; simulation stops here.
    OverloadOnset,
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::RefEdge => "ref-edge",
            EventKind::VcoEdge => "vco-edge",
            EventKind::BothEdges => "both-edges",
            EventKind::PfdToZero => "pfd-to-zero",
            EventKind::OverloadOnset => "overload-onset",
        }
    }
}

/// Full continuous state at an instant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuousState<F> {
    pub t_seconds: F,
    /// Loop-filter capacitor voltage.
    pub v_c_volts: F,
    /// VCO phase in cycles (edges at integers). An integer value at the
    /// start of a simulation means the edge at that instant is treated as
    /// already processed, except for the coincident-start convention noted
    /// on [`simulate`].
    pub theta_vco: F,
    /// Reference phase in cycles, same edge convention as `theta_vco`.
    pub theta_ref: F,
    pub pfd: PfdState,
}

/// One logged event. Voltage, filter output and VCO frequency are the values
/// immediately *after* the event (the start of the following segment);
/// for an overload onset they are the values at the onset itself.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event<F> {
    pub t_seconds: F,
    pub kind: EventKind,
    pub pfd_before: PfdState,
    pub pfd_after: PfdState,
    pub v_c_volts: F,
    pub v_f_volts: F,
    pub omega_vco_hz: F,
}

/// A maximal constant-current interval between events.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment<F> {
    pub t_start_seconds: F,
    pub t_end_seconds: F,
    pub pfd: PfdState,
    pub v_c_start_volts: F,
    pub v_c_end_volts: F,
    pub omega_start_hz: F,
    pub omega_end_hz: F,
}

/// A completed pump pulse recovered from the event log.
///
/// `tau_seconds` is signed (negative when the VCO led); `p` and `u` are the
/// normalized pulse width and frequency offset sampled at the pulse end,
/// directly comparable to [`crate::map::DiscreteState`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseSample<F> {
    pub index: usize,
    pub t_end_seconds: F,
    pub tau_seconds: F,
    pub v_end_volts: F,
    pub p: F,
    pub u: F,
}

/// Why a simulation stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    /// The event budget was exhausted.
    Horizon,
    /// VCO frequency reached zero.
    Overload,
    /// Extracted samples stayed within the lock tolerance for a full window.
    Locked,
}

/// Complete record of one simulation run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventLog<F> {
    pub initial: ContinuousState<F>,
    pub final_state: ContinuousState<F>,
    pub events: Vec<Event<F>>,
    pub segments: Vec<Segment<F>>,
    pub extracted: Vec<PulseSample<F>>,
    pub stopped: StopReason,
}

impl<F: Scalar> EventLog<F> {
    /// Renders the event list as CSV with columns
    /// `time_seconds,kind,v_c_volts,v_f_volts,omega_vco_hz`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time_seconds,kind,v_c_volts,v_f_volts,omega_vco_hz\n");
        for e in &self.events {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                e.t_seconds,
                e.kind.name(),
                e.v_c_volts,
                e.v_f_volts,
                e.omega_vco_hz
            ));
        }
        out
    }
}

/// Errors constructing a continuous state.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    /// The requested discrete state does not correspond to any continuous
    /// trajectory of the loop (e.g. the VCO would have to cover a phase
    /// outside `(0, 1]` during the claimed pulse).
    #[error("discrete state is not realizable as a continuous trajectory: {0}")]
    UnrealizableState(String),
}

/// Tuning for [`simulate_with`].
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SimOptions<F> {
    /// When set, stop `Locked` once `max(|p|, |u|)` of the extracted samples
    /// stays below this for `lock_window` consecutive pulses.
    pub lock_tolerance: Option<F>,
    pub lock_window: usize,
    /// Edges closer than this fraction of the reference period are merged
    /// into a single coincident event.
    pub coincidence_tol_rel: F,
}

impl<F: Scalar> Default for SimOptions<F> {
    fn default() -> Self {
        Self {
            lock_tolerance: None,
            lock_window: 10,
            coincidence_tol_rel: lit(1e-12),
        }
    }
}

impl<F: Scalar> ContinuousState<F> {
    /// Embeds a discrete sample `(p, u)` as a continuous state at `t = 0`.
    ///
    /// The convention matches the discrete map's sampling: `(p, u)` describe
    /// pulse number 0, with `u` sampled at the pulse *end*. Concretely:
    ///
    /// * `p > 0`: `t = 0` is the reference edge opening a positive pulse that
    ///   a VCO edge will close at `t = p·T_ref`.
    /// * `p < 0`: `t = 0` is the VCO edge opening a negative pulse that the
    ///   first reference edge closes at `t = |p|·T_ref`.
    /// * `p = 0`: coincident edges at `t = 0` produce a zero-width pulse.
    ///
    /// # Errors
    /// [`OracleError::UnrealizableState`] if `u ≤ −1`, or if a positive pulse
    /// would require the VCO to cover a phase outside `(0, 1]`.
    pub fn from_discrete(
        s: DiscreteState<F>,
        phys: &PhysicalParameters<F>,
    ) -> Result<Self, OracleError> {
        if !(s.p.is_finite() && s.u.is_finite()) {
            return Err(OracleError::UnrealizableState(
                "state has a non-finite component".into(),
            ));
        }
        if s.u <= -F::one() {
            return Err(OracleError::UnrealizableState(format!(
                "u = {} implies a nonpositive VCO frequency",
                s.u.to_f64().unwrap_or(f64::NAN)
            )));
        }
        let t = phys.ref_period_seconds;
        let k = phys.vco_gain_hz_per_volt;
        let ip = phys.pump_current_amps;
        let c = phys.capacitance_farads;
        let r = phys.resistance_ohms;
        let tau0 = s.p * t;
        // Voltage at the end of pulse 0, from the offset definition, then the
        // capacitor ramp over the pulse backed out to get v_c at t = 0.
        let v0 = ((s.u + F::one()) / t - phys.vco_free_hz) / k;
        let v_c0 = v0 - ip * tau0 / c;

        if s.p > F::zero() {
            // VCO phase covered during the pulse; it must be one partial
            // cycle for the closing edge to be the *next* VCO edge.
            let omega_start = phys.vco_free_hz + k * (v_c0 + ip * r);
            let a = k * ip / (lit::<F>(2.0) * c);
            let dtheta = omega_start * tau0 + a * tau0 * tau0;
            if !(dtheta > F::zero() && dtheta <= F::one()) {
                return Err(OracleError::UnrealizableState(format!(
                    "positive pulse would cover VCO phase {} ∉ (0, 1]",
                    dtheta.to_f64().unwrap_or(f64::NAN)
                )));
            }
            Ok(Self {
                t_seconds: F::zero(),
                v_c_volts: v_c0,
                theta_vco: F::one() - dtheta,
                theta_ref: F::zero(),
                pfd: PfdState::Plus,
            })
        } else if s.p < F::zero() {
            Ok(Self {
                t_seconds: F::zero(),
                v_c_volts: v_c0,
                theta_vco: F::zero(),
                theta_ref: F::one() + s.p, // first reference edge at |p|·T_ref
                pfd: PfdState::Minus,
            })
        } else {
            Ok(Self {
                t_seconds: F::zero(),
                v_c_volts: v_c0,
                theta_vco: F::zero(),
                theta_ref: F::zero(),
                pfd: PfdState::Zero,
            })
        }
    }
}

/// What the segment solver determined comes next.
enum NextWithin<F> {
    /// Reference edge after `dt`.
    Ref(F),
    /// VCO edge after `dt`.
    Vco(F),
    /// Coincident edges after `dt` (reference time used).
    Both(F),
    /// VCO frequency reaches zero after `dt`.
    Onset(F),
}

/// Solves the current segment for its terminating event.
///
/// `omega0` is the VCO frequency at segment start, `accel` is
/// `K·I_p / (2C)`, `gap_vco ∈ (0, 1]` the VCO phase remaining to its next
/// edge, `dt_ref ≥ 0` the time to the next reference edge and `ctol` the
/// absolute coincidence tolerance in seconds.
fn solve_segment<F: Scalar>(
    pfd: PfdState,
    omega0: F,
    accel: F,
    gap_vco: F,
    dt_ref: F,
    ctol: F,
) -> NextWithin<F> {
    let two = lit::<F>(2.0);
    let four = lit::<F>(4.0);
    let dt_vco: Option<F> = match pfd {
        PfdState::Zero => {
            if omega0 <= F::zero() {
                return NextWithin::Onset(F::zero());
            }
            Some(gap_vco / omega0)
        }
        PfdState::Plus => {
            if omega0 <= F::zero() {
                return NextWithin::Onset(F::zero());
            }
            let disc = omega0 * omega0 + four * accel * gap_vco;
            Some(two * gap_vco / (omega0 + disc.sqrt()))
        }
        PfdState::Minus => {
            if omega0 <= F::zero() {
                return NextWithin::Onset(F::zero());
            }
            let disc = omega0 * omega0 - four * accel * gap_vco;
            if disc > F::zero() {
                Some(two * gap_vco / (omega0 + disc.sqrt()))
            } else {
                // Frequency reaches zero before the phase covers the gap.
                // A reference edge can still rescue the pulse by closing it
                // strictly before onset.
                let dt_onset = omega0 / (two * accel);
                if dt_onset <= dt_ref {
                    return NextWithin::Onset(dt_onset);
                }
                None
            }
        }
    };
    match dt_vco {
        Some(dtv) => {
            if (dtv - dt_ref).abs() <= ctol {
                NextWithin::Both(dt_ref)
            } else if dtv < dt_ref {
                NextWithin::Vco(dtv)
            } else {
                NextWithin::Ref(dt_ref)
            }
        }
        None => NextWithin::Ref(dt_ref),
    }
}

/// VCO phase covered in `dt` on a segment starting at frequency `omega0`.
fn phase_advance<F: Scalar>(pfd: PfdState, omega0: F, accel: F, dt: F) -> F {
    match pfd {
        PfdState::Zero => omega0 * dt,
        PfdState::Plus => omega0 * dt + accel * dt * dt,
        PfdState::Minus => omega0 * dt - accel * dt * dt,
    }
}

/// Predicts the next event from a bare continuous state.
///
/// Returns the absolute event time and its kind. This is a stateless preview
/// of one step of [`simulate`]; phases at integers are treated as
/// already-processed edges (gaps of one full cycle).
pub fn next_event<F: Scalar>(
    cs: &ContinuousState<F>,
    phys: &PhysicalParameters<F>,
) -> (F, EventKind) {
    let gap_vco = F::one() - floor_mod(cs.theta_vco);
    let gap_ref = F::one() - floor_mod(cs.theta_ref);
    let dt_ref = gap_ref * phys.ref_period_seconds;
    let i = cs.pfd.current(phys.pump_current_amps);
    let v_f = cs.v_c_volts + phys.resistance_ohms * i;
    let omega0 = phys.vco_free_hz + phys.vco_gain_hz_per_volt * v_f;
    let accel = phys.vco_gain_hz_per_volt * phys.pump_current_amps
        / (lit::<F>(2.0) * phys.capacitance_farads);
    let ctol = lit::<F>(1e-12) * phys.ref_period_seconds;
    let (dt, kind) = match solve_segment(cs.pfd, omega0, accel, gap_vco, dt_ref, ctol) {
        NextWithin::Ref(dt) => (
            dt,
            if cs.pfd == PfdState::Minus {
                EventKind::PfdToZero
            } else {
                EventKind::RefEdge
            },
        ),
        NextWithin::Vco(dt) => (
            dt,
            if cs.pfd == PfdState::Plus {
                EventKind::PfdToZero
            } else {
                EventKind::VcoEdge
            },
        ),
        NextWithin::Both(dt) => (dt, EventKind::BothEdges),
        NextWithin::Onset(dt) => (dt, EventKind::OverloadOnset),
    };
    (cs.t_seconds + dt, kind)
}

/// Runs the event-driven simulation for at most `horizon_events` events.
pub fn simulate<F: Scalar>(
    cs0: ContinuousState<F>,
    phys: &PhysicalParameters<F>,
    horizon_events: usize,
) -> EventLog<F> {
    simulate_with(cs0, phys, horizon_events, SimOptions::default())
}

/// [`simulate`] with explicit options.
///
/// Reference edges are scheduled multiplicatively (`t_first + n·T_ref`), so
/// their times carry no accumulated error. The VCO gap is reset to exactly
/// one cycle at each VCO edge. A starting state with both phases at integers
/// and the detector at `Zero` records one coincident-edge event at the start
/// (this is how a zero-width pulse embeds).
pub fn simulate_with<F: Scalar>(
    cs0: ContinuousState<F>,
    phys: &PhysicalParameters<F>,
    horizon_events: usize,
    opts: SimOptions<F>,
) -> EventLog<F> {
    let t_ref = phys.ref_period_seconds;
    let k = phys.vco_gain_hz_per_volt;
    let ip = phys.pump_current_amps;
    let c = phys.capacitance_farads;
    let r = phys.resistance_ohms;
    let accel = k * ip / (lit::<F>(2.0) * c);
    let ctol = opts.coincidence_tol_rel * t_ref;

    let mut t = cs0.t_seconds;
    let mut v_c = cs0.v_c_volts;
    let mut theta_vco = cs0.theta_vco;
    let mut theta_ref = cs0.theta_ref;
    let mut pfd = cs0.pfd;
    let mut gap_vco = F::one() - floor_mod(theta_vco);
    // Multiplicative reference-edge schedule anchored at the start time.
    let gap_ref0 = F::one() - floor_mod(theta_ref);
    let t_ref_anchor = cs0.t_seconds;
    let mut n_ref: usize = 0;

    let mut events: Vec<Event<F>> = Vec::new();
    let mut segments: Vec<Segment<F>> = Vec::new();
    let mut stopped = StopReason::Horizon;

    let omega_after = |pfd: PfdState, v_c: F| -> (F, F) {
        let v_f = v_c + r * pfd.current(ip);
        (v_f, phys.vco_free_hz + k * v_f)
    };

    // Coincident-start convention: both phases at integers with the detector
    // idle means both edges fire at the start instant.
    if horizon_events > 0
        && pfd == PfdState::Zero
        && floor_mod(theta_vco) == F::zero()
        && floor_mod(theta_ref) == F::zero()
    {
        let (v_f, om) = omega_after(PfdState::Zero, v_c);
        events.push(Event {
            t_seconds: t,
            kind: EventKind::BothEdges,
            pfd_before: PfdState::Zero,
            pfd_after: PfdState::Zero,
            v_c_volts: v_c,
            v_f_volts: v_f,
            omega_vco_hz: om,
        });
    }

    let lock_hit = |samples: &[PulseSample<F>]| -> bool {
        let (tol, win) = match opts.lock_tolerance {
            Some(tol) => (tol, opts.lock_window.max(1)),
            None => return false,
        };
        samples.len() >= win
            && samples[samples.len() - win..]
                .iter()
                .all(|s| s.p.abs().max(s.u.abs()) < tol)
    };

    while events.len() < horizon_events {
        let (_v_f0, omega0) = omega_after(pfd, v_c);
        let t_next_ref =
            t_ref_anchor + (gap_ref0 + F::from_usize(n_ref).expect("edge count fits")) * t_ref;
        let dt_ref = t_next_ref - t;
        let next = solve_segment(pfd, omega0, accel, gap_vco, dt_ref, ctol);

        let (dt, edge): (F, Option<Edge>) = match next {
            NextWithin::Ref(dt) => (dt, Some(Edge::Ref)),
            NextWithin::Vco(dt) => (dt, Some(Edge::Vco)),
            NextWithin::Both(dt) => (dt, Some(Edge::Both)),
            NextWithin::Onset(dt) => (dt, None),
        };

        // Advance the continuous quantities across the segment.
        let dtheta = phase_advance(pfd, omega0, accel, dt);
        let v_c_end = v_c + pfd.current(ip) / c * dt;
        let t_end = match edge {
            Some(Edge::Ref) | Some(Edge::Both) => t_next_ref,
            _ => t + dt,
        };
        segments.push(Segment {
            t_start_seconds: t,
            t_end_seconds: t_end,
            pfd,
            v_c_start_volts: v_c,
            v_c_end_volts: v_c_end,
            omega_start_hz: omega0,
            omega_end_hz: phys.vco_free_hz + k * (v_c_end + r * pfd.current(ip)),
        });
        t = t_end;
        v_c = v_c_end;

        match edge {
            None => {
                theta_vco = theta_vco + dtheta;
                theta_ref = theta_ref + dt / t_ref;
                let v_f = v_c + r * pfd.current(ip);
                events.push(Event {
                    t_seconds: t,
                    kind: EventKind::OverloadOnset,
                    pfd_before: pfd,
                    pfd_after: pfd,
                    v_c_volts: v_c,
                    v_f_volts: v_f,
                    omega_vco_hz: F::zero(),
                });
                stopped = StopReason::Overload;
                break;
            }
            Some(e) => {
                match e {
                    Edge::Ref => {
                        n_ref += 1;
                        theta_ref = (theta_ref + dt / t_ref).round();
                        theta_vco = theta_vco + dtheta;
                        gap_vco = gap_vco - dtheta;
                        if gap_vco <= F::zero() {
                            // Only reachable through rounding in a near-tie
                            // below the coincidence tolerance.
                            gap_vco = F::min_positive_value();
                        }
                    }
                    Edge::Vco => {
                        theta_vco = (theta_vco + gap_vco).round();
                        gap_vco = F::one();
                        theta_ref = theta_ref + dt / t_ref;
                    }
                    Edge::Both => {
                        n_ref += 1;
                        theta_ref = (theta_ref + dt / t_ref).round();
                        theta_vco = (theta_vco + gap_vco).round();
                        gap_vco = F::one();
                    }
                }
                let before = pfd;
                pfd = pfd_transition(pfd, e);
                let kind = match e {
                    Edge::Both => EventKind::BothEdges,
                    Edge::Ref => {
                        if before == PfdState::Minus {
                            EventKind::PfdToZero
                        } else {
                            EventKind::RefEdge
                        }
                    }
                    Edge::Vco => {
                        if before == PfdState::Plus {
                            EventKind::PfdToZero
                        } else {
                            EventKind::VcoEdge
                        }
                    }
                };
                let (v_f, om) = omega_after(pfd, v_c);
                events.push(Event {
                    t_seconds: t,
                    kind,
                    pfd_before: before,
                    pfd_after: pfd,
                    v_c_volts: v_c,
                    v_f_volts: v_f,
                    omega_vco_hz: om,
                });
                // A pulse just closed iff the detector returned to Zero (or a
                // coincident pair produced a zero-width pulse).
                if opts.lock_tolerance.is_some()
                    && pfd == PfdState::Zero
                    && (before != PfdState::Zero || kind == EventKind::BothEdges)
                {
                    let (samples, _) = extract_events(&cs0, &events, phys);
                    if lock_hit(&samples) {
                        stopped = StopReason::Locked;
                        break;
                    }
                }
            }
        }
    }

    let final_state = ContinuousState {
        t_seconds: t,
        v_c_volts: v_c,
        theta_vco,
        theta_ref,
        pfd,
    };
    let (extracted, _) = extract_events(&cs0, &events, phys);
    EventLog {
        initial: cs0,
        final_state,
        events,
        segments,
        extracted,
        stopped,
    }
}

/// Recovers the completed pump pulses from an event log.
///
/// Returns the same samples stored in [`EventLog::extracted`]; exposed so the
/// extraction can be audited independently of [`simulate`].
pub fn extract_discrete<F: Scalar>(
    log: &EventLog<F>,
    phys: &PhysicalParameters<F>,
) -> Vec<PulseSample<F>> {
    extract_events(&log.initial, &log.events, phys).0
}

/// Walks an event list and emits one sample per completed pulse.
///
/// Returns `(samples, truncated)`, where `truncated` reports a pulse that was
/// still open when an overload onset ended the run.
fn extract_events<F: Scalar>(
    initial: &ContinuousState<F>,
    events: &[Event<F>],
    phys: &PhysicalParameters<F>,
) -> (Vec<PulseSample<F>>, bool) {
    let t_ref = phys.ref_period_seconds;
    let mut samples = Vec::new();
    let mut open: Option<(F, F)> = match initial.pfd {
        PfdState::Zero => None,
        s => Some((initial.t_seconds, s.sign())),
    };
    let mut truncated = false;
    let u_of = |v: F| -> F {
        t_ref * (phys.vco_free_hz + phys.vco_gain_hz_per_volt * v) - F::one()
    };
    for e in events {
        if e.kind == EventKind::OverloadOnset {
            truncated = open.is_some();
            break;
        }
        if e.pfd_before == PfdState::Zero && e.pfd_after == PfdState::Zero {
            if e.kind == EventKind::BothEdges {
                samples.push(PulseSample {
                    index: samples.len(),
                    t_end_seconds: e.t_seconds,
                    tau_seconds: F::zero(),
                    v_end_volts: e.v_c_volts,
                    p: F::zero(),
                    u: u_of(e.v_c_volts),
                });
            }
        } else if e.pfd_before == PfdState::Zero {
            open = Some((e.t_seconds, e.pfd_after.sign()));
        } else if e.pfd_after == PfdState::Zero {
            if let Some((t_open, sign)) = open.take() {
                let tau = sign * (e.t_seconds - t_open);
                samples.push(PulseSample {
                    index: samples.len(),
                    t_end_seconds: e.t_seconds,
                    tau_seconds: tau,
                    v_end_volts: e.v_c_volts,
                    p: tau / t_ref,
                    u: u_of(e.v_c_volts),
                });
            }
        }
    }
    (samples, truncated)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::{iterate, DiscreteState, Termination};
    use crate::params::{NormalizedParameters, PhysicalParameters};

    fn classic_phys() -> PhysicalParameters<f64> {
        PhysicalParameters::new(0.2, 0.01, 20.0, 0.1, 0.125, 0.0).unwrap()
    }

    #[test]
    fn pfd_transition_table() {
        use Edge::*;
        use PfdState::*;
        assert_eq!(pfd_transition(Zero, Ref), Plus);
        assert_eq!(pfd_transition(Plus, Ref), Plus);
        assert_eq!(pfd_transition(Minus, Ref), Zero);
        assert_eq!(pfd_transition(Zero, Vco), Minus);
        assert_eq!(pfd_transition(Plus, Vco), Zero);
        assert_eq!(pfd_transition(Minus, Vco), Minus);
        for s in [Zero, Plus, Minus] {
            assert_eq!(pfd_transition(s, Both), Zero);
        }
    }

    #[test]
    fn embedding_of_positive_pulse_state() {
        let phys = classic_phys();
        let cs = ContinuousState::from_discrete(DiscreteState::new(0.1, 1.5), &phys).unwrap();
        assert_eq!(cs.pfd, PfdState::Plus);
        assert!((cs.v_c_volts - 0.875).abs() < 1e-15);
        // VCO phase covered during the pulse: 17.9·0.0125 + 100·0.0125².
        assert!((cs.theta_vco - (1.0 - 0.239375)).abs() < 1e-15);
        assert_eq!(cs.theta_ref, 0.0);
    }

    #[test]
    fn embedding_rejects_invalid_states() {
        let phys = classic_phys();
        assert!(ContinuousState::from_discrete(DiscreteState::new(0.1, -1.0), &phys).is_err());
        // A huge positive pulse forces more than one VCO cycle.
        assert!(ContinuousState::from_discrete(DiscreteState::new(5.0, 1.5), &phys).is_err());
    }

    #[test]
    fn classic_failure_run_reaches_overload_onset() {
        let phys = classic_phys();
        let cs = ContinuousState::from_discrete(DiscreteState::new(0.1, 1.5), &phys).unwrap();
        let log = simulate(cs, &phys, 40);
        assert_eq!(log.stopped, StopReason::Overload);
        let kinds: Vec<EventKind> = log.events.iter().map(|e| e.kind).collect();
        assert_eq!(
            kinds,
            vec![
                EventKind::PfdToZero, // VCO edge closes pulse 0 at t = 0.0125
                EventKind::VcoEdge,   // opens the first negative pulse
                EventKind::PfdToZero, // reference edge closes it at t = 0.125
                EventKind::VcoEdge,   // opens the second negative pulse
                EventKind::OverloadOnset,
            ]
        );
        let onset = log.events.last().unwrap();
        assert!((onset.t_seconds - 0.18258333333333332).abs() < 1e-12);
        assert_eq!(onset.omega_vco_hz, 0.0);

        // Extraction recovers the two completed pulses and truncates the third.
        assert_eq!(log.extracted.len(), 2);
        assert!((log.extracted[0].p - 0.1).abs() < 1e-12);
        assert!((log.extracted[0].u - 1.5).abs() < 1e-12);
        assert!((log.extracted[1].p + 0.5).abs() < 1e-12);
        assert!((log.extracted[1].u + 0.0625).abs() < 1e-12);
        assert_eq!(extract_discrete(&log, &phys), log.extracted);

        // Same verdict as the discrete map on the same start.
        let np = phys.normalize();
        let t = iterate(DiscreteState::new(0.1, 1.5), &np, 100, 1e-9, 3).unwrap();
        assert!(matches!(t.termination, Termination::Overloaded(_)));
    }

    #[test]
    fn zero_width_start_records_coincident_edges() {
        let np = NormalizedParameters::<f64>::new(0.2, 1.6).unwrap();
        let phys = np.canonical_physical();
        let cs = ContinuousState::from_discrete(DiscreteState::new(0.0, 1.0 / 3.0), &phys)
            .unwrap();
        let log = simulate(cs, &phys, 12);
        assert_eq!(log.events[0].kind, EventKind::BothEdges);
        assert_eq!(log.events[0].t_seconds, 0.0);
        assert!((log.extracted[0].p).abs() < 1e-15);
        assert!((log.extracted[0].u - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn oracle_follows_map_through_the_three_cycle() {
        // Start on the 3-cycle; the first dozen extracted pulses must match
        // the discrete iterates to near machine precision.
        let np = NormalizedParameters::<f64>::new(0.2, 1.6).unwrap();
        let phys = np.canonical_physical();
        let s0 = DiscreteState::new(0.0, 1.0 / 3.0);
        let traj = iterate(s0, &np, 12, 1e-300, 2).unwrap();
        let cs = ContinuousState::from_discrete(s0, &phys).unwrap();
        let log = simulate(cs, &phys, 80);
        assert!(log.extracted.len() >= 12);
        for (k, sample) in log.extracted.iter().take(12).enumerate() {
            let m = traj.states[k];
            assert!(
                (sample.p - m.p).abs() < 1e-10 && (sample.u - m.u).abs() < 1e-10,
                "pulse {k}: oracle ({}, {}) vs map ({}, {})",
                sample.p,
                sample.u,
                m.p,
                m.u
            );
        }
    }

    #[test]
    fn oracle_follows_map_from_generic_state() {
        let np = NormalizedParameters::<f64>::new(0.37, 1.21).unwrap();
        let phys = np.canonical_physical();
        let s0 = DiscreteState::new(0.3, 0.5);
        let traj = iterate(s0, &np, 20, 1e-300, 2).unwrap();
        let cs = ContinuousState::from_discrete(s0, &phys).unwrap();
        let log = simulate(cs, &phys, 120);
        assert!(log.extracted.len() >= 21, "got {}", log.extracted.len());
        for (k, sample) in log.extracted.iter().take(21).enumerate() {
            let m = traj.states[k];
            assert!(
                (sample.p - m.p).abs() < 1e-10 && (sample.u - m.u).abs() < 1e-10,
                "pulse {k}: oracle ({}, {}) vs map ({}, {})",
                sample.p,
                sample.u,
                m.p,
                m.u
            );
        }
    }

    #[test]
    fn lock_stop_fires_near_the_origin() {
        let np = NormalizedParameters::<f64>::new(0.5, 1.0).unwrap();
        let phys = np.canonical_physical();
        let cs = ContinuousState::from_discrete(DiscreteState::new(0.05, 0.05), &phys).unwrap();
        let log = simulate_with(
            cs,
            &phys,
            5000,
            SimOptions {
                lock_tolerance: Some(1e-8),
                lock_window: 5,
                ..SimOptions::default()
            },
        );
        assert_eq!(log.stopped, StopReason::Locked);
        let tail = &log.extracted[log.extracted.len() - 5..];
        assert!(tail.iter().all(|s| s.p.abs().max(s.u.abs()) < 1e-8));
    }

    #[test]
    fn next_event_agrees_with_simulation() {
        let phys = classic_phys();
        let cs = ContinuousState::from_discrete(DiscreteState::new(0.1, 1.5), &phys).unwrap();
        let (t1, kind1) = next_event(&cs, &phys);
        let log = simulate(cs, &phys, 1);
        assert_eq!(kind1, log.events[0].kind);
        assert!((t1 - log.events[0].t_seconds).abs() <= 1e-15 * (1.0 + t1.abs()));
    }

    #[test]
    fn csv_has_one_row_per_event() {
        let phys = classic_phys();
        let cs = ContinuousState::from_discrete(DiscreteState::new(0.1, 1.5), &phys).unwrap();
        let log = simulate(cs, &phys, 40);
        let csv = log.to_csv();
        assert_eq!(csv.lines().count(), 1 + log.events.len());
        assert!(csv.starts_with("time_seconds,kind,"));
        assert!(csv.contains("overload-onset"));
    }

    #[test]
    fn event_times_strictly_increase() {
        let np = NormalizedParameters::<f64>::new(0.37, 1.21).unwrap();
        let phys = np.canonical_physical();
        let cs = ContinuousState::from_discrete(DiscreteState::new(0.3, 0.5), &phys).unwrap();
        let log = simulate(cs, &phys, 200);
        for w in log.events.windows(2) {
            assert!(w[1].t_seconds > w[0].t_seconds);
        }
        for s in &log.segments {
            assert!(s.t_end_seconds > s.t_start_seconds);
        }
    }
}
