//! The six-stage NOON preparation schedule, its two simulation backends and
//! the timing budget.
//!
//! Window areas are dimensionless: a window of area `a` between a qubit and a
//! cavity with coupling `g` lasts `a / (2g)`, so that on the block
//! `{|1,n-1>, |0,n>}` it rotates by `a√n / 2`. Area `π/2` is a half transfer
//! and area `π/√n` a full transfer of the `n`-th photon.

mod hamiltonian;
mod ideal;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::{C64, ZERO};
use crate::model::{cavity_index, qubit_index, SystemParams};
use crate::quantum::{FactorLabel, HilbertLayout, QuantumState};

pub use hamiltonian::{simulate_hamiltonian, HamiltonianOptions};
pub use ideal::{apply_event_ideal, event_unitary, simulate_ideal};

/// Qubit transition addressed by a pulse.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Transition {
    /// `|0> ↔ |1>`
    Lower,
    /// `|1> ↔ |2>`
    Upper,
}

impl Transition {
    /// Index of the upper level of the transition.
    pub fn upper_level(self) -> usize {
        match self {
            Transition::Lower => 1,
            Transition::Upper => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum EventKind {
    /// `exp(-i θ/2 (e^{-iφ}|k><k-1| + h.c.))` on one qubit.
    QubitPulse { target: FactorLabel, transition: Transition, angle: f64, phase: f64 },
    /// Resonant exchange between a qubit and a cavity.
    ResonantWindow { qubit: FactorLabel, cavity: FactorLabel, area: f64 },
    /// Retune the qubit `|1>` energy.
    DetuneShift { qubit: FactorLabel, e1: f64 },
}

impl EventKind {
    pub fn qubit(&self) -> FactorLabel {
        match *self {
            EventKind::QubitPulse { target, .. } => target,
            EventKind::ResonantWindow { qubit, .. } => qubit,
            EventKind::DetuneShift { qubit, .. } => qubit,
        }
    }

    /// Factors whose state the event may change.
    pub fn subsystems(&self) -> Vec<FactorLabel> {
        match *self {
            EventKind::ResonantWindow { qubit, cavity, .. } => vec![qubit, cavity],
            other => vec![other.qubit()],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProtocolEvent {
    pub kind: EventKind,
    pub start: f64,
    pub duration: f64,
    /// Protocol stage 1..=6.
    pub stage: u8,
}

impl ProtocolEvent {
    pub fn end(&self) -> f64 {
        self.start + self.duration
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum LadderOrder {
    /// Side 1 completely, then side 2.
    #[default]
    Sequential,
    /// Both sides at the same time.
    Parallel,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PulseSchedule {
    pub n: usize,
    pub events: Vec<ProtocolEvent>,
}

impl PulseSchedule {
    pub fn total_duration(&self) -> f64 {
        self.events.iter().fold(0.0f64, |m, e| m.max(e.end()))
    }

    /// Number of pulses and windows, ignoring retuning events.
    pub fn operation_count(&self) -> usize {
        self.events
            .iter()
            .filter(|e| !matches!(e.kind, EventKind::DetuneShift { .. }))
            .count()
    }

    pub fn windows(&self) -> impl Iterator<Item = &ProtocolEvent> {
        self.events
            .iter()
            .filter(|e| matches!(e.kind, EventKind::ResonantWindow { .. }))
    }

    /// Checks durations, per-subsystem overlap and that every event refers to
    /// declared parameters.
    pub fn validate(&self, params: &SystemParams) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidParameter("photon number must be at least 1".into()));
        }
        for (k, e) in self.events.iter().enumerate() {
            if !(e.duration >= 0.0) || !(e.start >= 0.0) {
                return Err(Error::ScheduleMismatch(format!("event {k} has negative time")));
            }
            qubit_index(e.kind.qubit()).map_err(|_| Error::ScheduleMismatch(format!("event {k} targets a non-qubit")))?;
            match e.kind {
                EventKind::ResonantWindow { qubit, cavity, area } => {
                    cavity_index(cavity)
                        .map_err(|_| Error::ScheduleMismatch(format!("event {k} window on a non-cavity")))?;
                    if params.coupling(qubit, cavity).is_none() {
                        return Err(Error::ScheduleMismatch(format!(
                            "event {k}: no coupling between {} and {}",
                            qubit.name(),
                            cavity.name()
                        )));
                    }
                    if !(area >= 0.0) {
                        return Err(Error::ScheduleMismatch(format!("event {k} has negative area")));
                    }
                }
                EventKind::DetuneShift { e1, .. } => {
                    if !(e1 > 0.0) {
                        return Err(Error::ScheduleMismatch(format!("event {k} retunes to a nonpositive energy")));
                    }
                }
                EventKind::QubitPulse { .. } => {}
            }
            for (j, other) in self.events[..k].iter().enumerate() {
                let shared = e.kind.subsystems().iter().any(|s| other.kind.subsystems().contains(s));
                let overlap = e.start < other.end() - 1e-12 && other.start < e.end() - 1e-12;
                if shared && overlap {
                    return Err(Error::ScheduleMismatch(format!("events {j} and {k} overlap on a shared subsystem")));
                }
            }
        }
        Ok(())
    }
}

/// `(|N,0> − e^{iφ}|0,N>)/√2` on (C1, C2); `φ = 0` is the sign of the
/// textbook target.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NoonTarget {
    pub n: usize,
    pub phi: f64,
}

impl NoonTarget {
    pub fn new(n: usize, phi: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("photon number must be at least 1".into()));
        }
        Ok(Self { n, phi })
    }

    /// Two-cavity amplitudes in a `(dim × dim)` space.
    pub fn cavity_vector(&self, dim: usize) -> Vec<C64> {
        assert!(dim > self.n);
        let s = 1.0 / 2f64.sqrt();
        let mut v = vec![ZERO; dim * dim];
        v[self.n * dim] = C64::new(s, 0.0);
        v[self.n] = -C64::from_polar(s, self.phi);
        v
    }

    /// Target on a two-cavity layout `[(C1, d), (C2, d)]`.
    pub fn cavity_state(&self, dim: usize) -> QuantumState {
        let layout = HilbertLayout::new(vec![(FactorLabel::C1, dim), (FactorLabel::C2, dim)]).expect("valid layout");
        QuantumState::from_vector(layout, self.cavity_vector(dim)).expect("normalized")
    }

    /// Target on a full layout, every other factor in its ground level.
    pub fn full_state(&self, layout: &HilbertLayout) -> Result<QuantumState> {
        let p1 = layout.require(FactorLabel::C1)?;
        let p2 = layout.require(FactorLabel::C2)?;
        for &p in &[p1, p2] {
            if layout.factors()[p].1 <= self.n {
                return Err(Error::InvalidParameter("cavity truncation too small for target".into()));
            }
        }
        let s = 1.0 / 2f64.sqrt();
        let mut levels = vec![0; layout.factors().len()];
        let mut v = vec![ZERO; layout.dim()];
        levels[p1] = self.n;
        v[layout.index_of(&levels)] = C64::new(s, 0.0);
        levels[p1] = 0;
        levels[p2] = self.n;
        v[layout.index_of(&levels)] = -C64::from_polar(s, self.phi);
        QuantumState::from_vector(layout.clone(), v)
    }
}

/// Relative phase `φ` with `c_{0N} = −e^{iφ} c_{N0}` in a full-layout state,
/// and the fidelity with the corresponding target.
pub fn noon_phase_and_fidelity(state: &QuantumState, n: usize) -> Result<(f64, f64)> {
    let layout = state.layout();
    let p1 = layout.require(FactorLabel::C1)?;
    let p2 = layout.require(FactorLabel::C2)?;
    let mut levels = vec![0; layout.factors().len()];
    levels[p1] = n;
    let i_n0 = layout.index_of(&levels);
    levels[p1] = 0;
    levels[p2] = n;
    let i_0n = layout.index_of(&levels);
    let coherence = match state.repr() {
        crate::quantum::StateRepr::Vector(v) => v[i_0n] * v[i_n0].conj(),
        crate::quantum::StateRepr::Density(m) => m[(i_0n, i_n0)],
    };
    let phi = if coherence.norm() == 0.0 { 0.0 } else { (-coherence).arg() };
    let target = NoonTarget { n, phi }.full_state(layout)?;
    let f = crate::quantum::fidelity_with_pure(state, &target)?;
    Ok((phi, f))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Backend {
    /// Exact analytic unitaries per event.
    Ideal,
    /// Piecewise-constant interaction-frame Hamiltonians including detuned
    /// spectator couplings.
    Hamiltonian,
}

/// Runs a schedule from `initial` (joint ground state when `None`).
pub fn simulate(
    schedule: &PulseSchedule,
    backend: Backend,
    params: &SystemParams,
    initial: Option<&QuantumState>,
) -> Result<QuantumState> {
    let layout = params.layout();
    let ground;
    let start = match initial {
        Some(s) => {
            if s.layout() != &layout {
                return Err(Error::LayoutMismatch("initial state does not match parameter layout".into()));
            }
            s
        }
        None => {
            ground = QuantumState::ground(layout);
            &ground
        }
    };
    match backend {
        Backend::Ideal => simulate_ideal(schedule, params, start),
        Backend::Hamiltonian => simulate_hamiltonian(schedule, params, start, &HamiltonianOptions::default()),
    }
}

fn pulse_duration(params: &SystemParams, qubit: FactorLabel, transition: Transition, angle: f64) -> Result<f64> {
    let omega = params.rabi_amplitude();
    let q = params.qubit(qubit)?;
    Ok(match transition {
        Transition::Lower => angle.abs() / omega,
        Transition::Upper => angle.abs() / (q.lambda * omega),
    })
}

fn window_duration(params: &SystemParams, qubit: FactorLabel, cavity: FactorLabel, area: f64) -> Result<f64> {
    let g = params.require_coupling(qubit, cavity)?.g1;
    Ok(area / (2.0 * g))
}

/// Appends events with per-subsystem "as early as possible" timing, or fully
/// serial timing.
struct Builder<'a> {
    params: &'a SystemParams,
    events: Vec<ProtocolEvent>,
    clock: f64,
    stage: u8,
}

impl<'a> Builder<'a> {
    fn new(params: &'a SystemParams) -> Self {
        Self { params, events: Vec::new(), clock: 0.0, stage: 1 }
    }

    fn push_at(&mut self, kind: EventKind, start: f64) -> Result<f64> {
        let duration = match kind {
            EventKind::QubitPulse { target, transition, angle, .. } => {
                pulse_duration(self.params, target, transition, angle)?
            }
            EventKind::ResonantWindow { qubit, cavity, area } => window_duration(self.params, qubit, cavity, area)?,
            EventKind::DetuneShift { .. } => self.params.ramp_time,
        };
        self.events.push(ProtocolEvent { kind, start, duration, stage: self.stage });
        Ok(start + duration)
    }

    fn push(&mut self, kind: EventKind) -> Result<()> {
        self.clock = self.push_at(kind, self.clock)?;
        Ok(())
    }

    fn pulse(&mut self, target: FactorLabel, transition: Transition) -> Result<()> {
        self.push(EventKind::QubitPulse { target, transition, angle: PI, phase: 0.0 })
    }

    /// Retune to the cavity, hold for the window, retune back to idle.
    fn window_kinds(&self, qubit: FactorLabel, cavity: FactorLabel, area: f64) -> Result<[EventKind; 3]> {
        let w = self.params.cavity(cavity)?.omega;
        let idle = self.params.qubit(qubit)?.e1;
        Ok([
            EventKind::DetuneShift { qubit, e1: w },
            EventKind::ResonantWindow { qubit, cavity, area },
            EventKind::DetuneShift { qubit, e1: idle },
        ])
    }

    fn window(&mut self, qubit: FactorLabel, cavity: FactorLabel, area: f64) -> Result<()> {
        for k in self.window_kinds(qubit, cavity, area)? {
            self.push(k)?;
        }
        Ok(())
    }

    /// Two independent event lists started together; the clock advances to
    /// the later finish.
    fn parallel(&mut self, sides: [Vec<EventKind>; 2]) -> Result<()> {
        let start = self.clock;
        let mut end = start;
        for side in sides {
            let mut t = start;
            for k in side {
                t = self.push_at(k, t)?;
            }
            end = end.max(t);
        }
        self.clock = end;
        Ok(())
    }
}

fn side_pair(side: usize) -> (FactorLabel, FactorLabel) {
    if side == 0 {
        (FactorLabel::Q1, FactorLabel::C1)
    } else {
        (FactorLabel::Q2, FactorLabel::C2)
    }
}

/// Default (sequential-ladder) NOON schedule.
pub fn noon_schedule(n: usize, params: &SystemParams) -> Result<PulseSchedule> {
    noon_schedule_with(n, params, LadderOrder::Sequential)
}

pub fn noon_schedule_with(n: usize, params: &SystemParams, order: LadderOrder) -> Result<PulseSchedule> {
    if n == 0 {
        return Err(Error::InvalidParameter("photon number must be at least 1".into()));
    }
    for label in [FactorLabel::C1, FactorLabel::C2] {
        let t = params.cavity(label)?.truncation;
        if n + 2 > t {
            return Err(Error::InvalidParameter(format!(
                "N = {n} exceeds {} truncation {t} minus 2",
                label.name()
            )));
        }
    }
    for (q, c) in [
        (FactorLabel::Q1, FactorLabel::CC),
        (FactorLabel::Q2, FactorLabel::CC),
        (FactorLabel::Q1, FactorLabel::C1),
        (FactorLabel::Q2, FactorLabel::C2),
    ] {
        params.require_coupling(q, c)?;
    }
    let mut b = Builder::new(params);

    // (1) excite qubit 1
    b.pulse(FactorLabel::Q1, Transition::Lower)?;

    // (2) Bell pair through the coupling cavity
    b.stage = 2;
    b.window(FactorLabel::Q1, FactorLabel::CC, PI / 2.0)?;
    b.window(FactorLabel::Q2, FactorLabel::CC, PI)?;

    // (3) shelve
    b.stage = 3;
    b.pulse(FactorLabel::Q1, Transition::Upper)?;
    b.pulse(FactorLabel::Q2, Transition::Upper)?;

    // (4) photon ladder on each side
    b.stage = 4;
    let ladder = |b: &Builder, side: usize| -> Result<Vec<EventKind>> {
        let (q, c) = side_pair(side);
        let mut kinds = Vec::new();
        for k in 1..n {
            kinds.push(EventKind::QubitPulse { target: q, transition: Transition::Lower, angle: PI, phase: 0.0 });
            kinds.extend(b.window_kinds(q, c, PI / (k as f64).sqrt())?);
        }
        Ok(kinds)
    };
    match order {
        LadderOrder::Sequential => {
            for side in 0..2 {
                for k in ladder(&b, side)? {
                    b.push(k)?;
                }
            }
        }
        LadderOrder::Parallel => {
            let sides = [ladder(&b, 0)?, ladder(&b, 1)?];
            b.parallel(sides)?;
        }
    }

    // (5) unshelve: |2> -> |0>, |0> -> |1>
    b.stage = 5;
    for q in [FactorLabel::Q1, FactorLabel::Q2] {
        b.pulse(q, Transition::Upper)?;
        b.pulse(q, Transition::Lower)?;
    }

    // (6) last photon on each side
    b.stage = 6;
    let area = PI / (n as f64).sqrt();
    match order {
        LadderOrder::Sequential => {
            for side in 0..2 {
                let (q, c) = side_pair(side);
                b.window(q, c, area)?;
            }
        }
        LadderOrder::Parallel => {
            let (q1, c1) = side_pair(0);
            let (q2, c2) = side_pair(1);
            let sides = [b.window_kinds(q1, c1, area)?.to_vec(), b.window_kinds(q2, c2, area)?.to_vec()];
            b.parallel(sides)?;
        }
    }

    Ok(PulseSchedule { n, events: b.events })
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BudgetStep {
    pub photon: usize,
    /// `1 / (g √n)`
    pub window: f64,
    pub rabi: f64,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BudgetReport {
    pub n: usize,
    pub t_tot: f64,
    /// `T2 / 2`
    pub t_limit: f64,
    pub n_max: usize,
    pub steps: Vec<BudgetStep>,
}

/// `T_tot(N) = (1/g) Σ_{n=1}^{N} 1/√n + N·T_Rabi`
pub fn total_time(n: usize, g: f64, t_rabi: f64) -> f64 {
    (1..=n).map(|k| 1.0 / (g * (k as f64).sqrt())).sum::<f64>() + n as f64 * t_rabi
}

/// Closed-form protocol duration and the largest `N` that fits in `T2/2`.
pub fn budget(n: usize, g: f64, t_rabi: f64, t2: f64) -> Result<BudgetReport> {
    for (name, v) in [("g", g), ("T_Rabi", t_rabi), ("T2", t2)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::InvalidParameter(format!("{name} must be positive and finite")));
        }
    }
    let t_limit = t2 / 2.0;
    let mut n_max = 0;
    while total_time(n_max + 1, g, t_rabi) <= t_limit {
        n_max += 1;
    }
    let steps = (1..=n)
        .map(|k| BudgetStep { photon: k, window: 1.0 / (g * (k as f64).sqrt()), rabi: t_rabi })
        .collect();
    Ok(BudgetReport { n, t_tot: total_time(n, g, t_rabi), t_limit, n_max, steps })
}

/// Reference circuit used by tests and the command line: qubits idle between
/// the storage cavities and the coupling cavity, anharmonicity set so that the
/// `|1> ↔ |2>` transition sits `detuning_ratio·g` below a storage cavity while
/// `|0> ↔ |1>` is resonant with it.
///
/// Frequencies (rad per time unit): coupling cavity at `omega0`, storage
/// cavities at `omega0 + 4A`, idle points `omega0 + 2A` and `omega0 + 2.5A`,
/// with `A = detuning_ratio·g`. The idle points differ so that the exchange
/// interaction mediated by the coupling cavity stays off resonance. Storage
/// cavities keep `n + 2` levels, the coupling cavity three (it never holds
/// more than one photon).
pub fn reference_params(n: usize, g: f64, detuning_ratio: f64, omega0: f64, t_rabi: f64) -> Result<SystemParams> {
    use crate::model::{CavityParams, Coupling, CouplingParams, QubitParams};
    let lambda = 2f64.sqrt();
    let a = detuning_ratio * g;
    let storage = omega0 + 4.0 * a;
    let p = 1.0 / (2.0 - a / storage);
    let q1 = QubitParams::new(omega0 + 2.0 * a, p, lambda)?;
    let q2 = QubitParams::new(omega0 + 2.5 * a, p, lambda)?;
    let cav = |omega| CavityParams { omega, truncation: n + 2 };
    let couple = |qubit, cavity| Coupling { qubit, cavity, params: CouplingParams::with_lambda(g, lambda) };
    let params = SystemParams {
        qubits: [q1, q2],
        cavities: [cav(storage), cav(storage), CavityParams { omega: omega0, truncation: 3 }],
        couplings: vec![
            couple(FactorLabel::Q1, FactorLabel::C1),
            couple(FactorLabel::Q2, FactorLabel::C2),
            couple(FactorLabel::Q1, FactorLabel::CC),
            couple(FactorLabel::Q2, FactorLabel::CC),
        ],
        t_rabi,
        t2: 200.0,
        ramp_time: 0.1,
    };
    params.validate()?;
    Ok(params)
}
