//! Exact event unitaries applied factor-locally.

use alloc::vec;
use alloc::vec::Vec;
use num_traits::Float;

use super::{EventKind, ProtocolEvent, PulseSchedule};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};
use crate::model::SystemParams;
use crate::quantum::{apply_local, conjugate_local, FactorLabel, QuantumState, StateRepr, QUBIT_LEVELS};

/// Largest population tolerated in the top level of a truncated cavity.
pub const LEAKAGE_LIMIT: f64 = 1e-6;

/// Two-level rotation on levels `(k-1, k)` of a qutrit.
fn pulse_matrix(upper: usize, angle: f64, phase: f64) -> CMatrix {
    let mut u = CMatrix::identity(QUBIT_LEVELS);
    let (s, c) = (angle / 2.0).sin_cos();
    let lo = upper - 1;
    u[(lo, lo)] = C64::new(c, 0.0);
    u[(upper, upper)] = C64::new(c, 0.0);
    u[(upper, lo)] = C64::new(0.0, -s) * C64::from_polar(1.0, -phase);
    u[(lo, upper)] = C64::new(0.0, -s) * C64::from_polar(1.0, phase);
    u
}

/// `exp(-i t g(|1><0|a + h.c.))` with `g t = area/2`, on a (qubit, cavity)
/// pair with the qubit index most significant.
fn jc_matrix(area: f64, cavity_dim: usize) -> CMatrix {
    let c = cavity_dim;
    let mut u = CMatrix::identity(QUBIT_LEVELS * c);
    for n in 1..c {
        let theta = area * (n as f64).sqrt() / 2.0;
        let (s, co) = theta.sin_cos();
        let e = c + (n - 1); // |1, n-1>
        let g = n; // |0, n>
        u[(e, e)] = C64::new(co, 0.0);
        u[(g, g)] = C64::new(co, 0.0);
        u[(e, g)] = C64::new(0.0, -s);
        u[(g, e)] = C64::new(0.0, -s);
    }
    u
}

/// Local unitary and the layout positions it acts on; `None` for events that
/// act trivially in this backend.
pub fn event_unitary(
    event: &ProtocolEvent,
    layout: &crate::quantum::HilbertLayout,
) -> Result<Option<(Vec<usize>, CMatrix)>> {
    Ok(match event.kind {
        EventKind::QubitPulse { target, transition, angle, phase } => {
            let p = layout.require(target)?;
            Some((vec![p], pulse_matrix(transition.upper_level(), angle, phase)))
        }
        EventKind::ResonantWindow { qubit, cavity, area } => {
            let pq = layout.require(qubit)?;
            let pc = layout.require(cavity)?;
            let cdim = layout.factors()[pc].1;
            Some((vec![pq, pc], jc_matrix(area, cdim)))
        }
        EventKind::DetuneShift { .. } => None,
    })
}

/// Applies one event and checks cavity truncation leakage.
pub fn apply_event_ideal(state: &mut QuantumState, event: &ProtocolEvent) -> Result<()> {
    let layout = state.layout().clone();
    if let Some((positions, u)) = event_unitary(event, &layout)? {
        let next = match state.repr() {
            StateRepr::Vector(v) => QuantumState::from_vector(layout.clone(), apply_local(&layout, &positions, &u, v))
                .map_err(|_| Error::InvalidState("norm drift in ideal backend".into()))?,
            StateRepr::Density(rho) => {
                QuantumState::from_density_unchecked(layout.clone(), conjugate_local(&layout, &positions, &u, rho))?
            }
        };
        *state = next;
    }
    check_leakage(state)
}

pub(crate) fn check_leakage(state: &QuantumState) -> Result<()> {
    for &(label, dim) in state.layout().factors() {
        if matches!(label, FactorLabel::C1 | FactorLabel::C2 | FactorLabel::CC) {
            let top = state.level_population(label, dim - 1)?;
            if top > LEAKAGE_LIMIT {
                return Err(Error::TruncationLeakage { population: top, limit: LEAKAGE_LIMIT });
            }
        }
    }
    Ok(())
}

/// Applies every event in start-time order.
pub fn simulate_ideal(schedule: &PulseSchedule, params: &SystemParams, initial: &QuantumState) -> Result<QuantumState> {
    schedule.validate(params)?;
    let mut state = initial.clone();
    for event in ordered(schedule) {
        apply_event_ideal(&mut state, event)?;
    }
    Ok(state)
}

pub(crate) fn ordered(schedule: &PulseSchedule) -> Vec<&ProtocolEvent> {
    let mut events: Vec<&ProtocolEvent> = schedule.events.iter().collect();
    events.sort_by(|a, b| a.start.partial_cmp(&b.start).unwrap_or(core::cmp::Ordering::Equal));
    events
}
