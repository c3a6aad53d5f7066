//! Time evolution under the rotating-wave Hamiltonian with every declared
//! coupling switched on.
//!
//! The state is stored in a frame rotating at `ω_ref·K`, where `K` counts
//! excitations. Couplings conserve `K`, so on every interval with fixed qubit
//! energies and at most one drive frequency the generator is constant in the
//! frame rotating at that drive frequency and one exponential action advances
//! the state exactly. Retuning ramps are split into sub-intervals evaluated at
//! their midpoints. The result is returned in the interaction picture of the
//! bare energies, which is the picture used by the ideal backend.

use alloc::vec;
use alloc::vec::Vec;

use super::{EventKind, PulseSchedule};
use crate::error::{Error, Result};
use crate::expm::evolve_vector;
use crate::linalg::{cis, C64};
use crate::model::{drive_matrix, excitation_numbers, pair_coupling_matrix, qubit_index, QubitParams, SystemParams};
use crate::quantum::{conjugate_with, FactorLabel, LocalSum, QuantumState};

#[derive(Clone, Debug, PartialEq)]
pub struct HamiltonianOptions {
    /// Sub-intervals per retuning ramp.
    pub ramp_substeps: usize,
    /// Reference frame frequency; mean cavity frequency when `None`.
    pub reference_frequency: Option<f64>,
}

impl Default for HamiltonianOptions {
    fn default() -> Self {
        Self { ramp_substeps: 8, reference_frequency: None }
    }
}

const TIME_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug)]
struct Ramp {
    from: f64,
    to: f64,
    start: f64,
    duration: f64,
}

#[derive(Clone, Copy, Debug)]
struct ActiveDrive {
    qubit: usize,
    omega_d: f64,
    /// Carrier phase fixed at pulse start.
    phase_lab: f64,
}

struct Runner<'a> {
    params: &'a SystemParams,
    qubit_pos: [usize; 2],
    levels: Vec<[usize; 2]>,
    photons: Vec<[usize; 3]>,
    k: Vec<f64>,
    couplings: Vec<(Vec<usize>, crate::linalg::CMatrix)>,
    omega_ref: f64,
    e1: [f64; 2],
    /// Accumulated `∫E_l dt` for levels 1 and 2 of each qubit.
    phase: [[f64; 3]; 2],
}

impl<'a> Runner<'a> {
    fn new(params: &'a SystemParams, opts: &HamiltonianOptions) -> Result<Self> {
        let layout = params.layout();
        let qubit_pos = [layout.require(FactorLabel::Q1)?, layout.require(FactorLabel::Q2)?];
        let cav_pos = [
            layout.require(FactorLabel::C1)?,
            layout.require(FactorLabel::C2)?,
            layout.require(FactorLabel::CC)?,
        ];
        let mut levels = Vec::with_capacity(layout.dim());
        let mut photons = Vec::with_capacity(layout.dim());
        for i in 0..layout.dim() {
            let l = layout.levels_of(i);
            levels.push([l[qubit_pos[0]], l[qubit_pos[1]]]);
            photons.push([l[cav_pos[0]], l[cav_pos[1]], l[cav_pos[2]]]);
        }
        let mut couplings = Vec::new();
        for c in &params.couplings {
            let pq = layout.require(c.qubit)?;
            let pc = layout.require(c.cavity)?;
            let cdim = layout.factors()[pc].1;
            let m = pair_coupling_matrix(C64::new(c.params.g1, 0.0), C64::new(c.params.g2, 0.0), cdim);
            couplings.push((vec![pq, pc], m));
        }
        let omega_ref = opts
            .reference_frequency
            .unwrap_or_else(|| params.cavities.iter().map(|c| c.omega).sum::<f64>() / 3.0);
        Ok(Self {
            params,
            qubit_pos,
            levels,
            photons,
            k: excitation_numbers(&layout),
            couplings,
            omega_ref,
            e1: [params.qubits[0].e1, params.qubits[1].e1],
            phase: [[0.0; 3]; 2],
        })
    }

    fn qubit_at(&self, q: usize, e1: f64) -> QubitParams {
        self.params.qubits[q].retuned(e1)
    }

    /// Generator in the frame rotating at `omega` for fixed qubit energies.
    fn generator(&self, e1: [f64; 2], omega: f64, drives: &[ActiveDrive]) -> LocalSum {
        let layout = self.params.layout();
        let mut h = LocalSum::new(layout);
        let q = [self.qubit_at(0, e1[0]), self.qubit_at(1, e1[1])];
        let w: Vec<f64> = self.params.cavities.iter().map(|c| c.omega).collect();
        for (i, d) in h.diagonal_mut().iter_mut().enumerate() {
            let l = self.levels[i];
            let n = self.photons[i];
            let bare = q[0].level_energy(l[0])
                + q[1].level_energy(l[1])
                + w[0] * n[0] as f64
                + w[1] * n[1] as f64
                + w[2] * n[2] as f64;
            *d = bare - omega * self.k[i];
        }
        for (pos, m) in &self.couplings {
            h.add_term(pos, m.clone());
        }
        let amp = self.params.rabi_amplitude();
        for d in drives {
            let c = cis(-d.phase_lab);
            let lambda = self.params.qubits[d.qubit].lambda;
            h.add_term(&[self.qubit_pos[d.qubit]], drive_matrix(amp, lambda, c, c));
        }
        h
    }

    /// Rotating-frame phase `e^{i s K t}` applied in place.
    fn rotate(&self, v: &mut [C64], s: f64, t: f64) {
        if s == 0.0 || t == 0.0 {
            return;
        }
        for (x, &k) in v.iter_mut().zip(&self.k) {
            *x *= cis(s * k * t);
        }
    }

    /// Advances over `[t0, t1]` with the given energies held fixed.
    fn step(&self, v: &[C64], t0: f64, t1: f64, e1: [f64; 2], drives: &[ActiveDrive]) -> Result<Vec<C64>> {
        let omega = match drives.first() {
            None => self.omega_ref,
            Some(first) => {
                if drives.iter().any(|d| (d.omega_d - first.omega_d).abs() > 1e-9 * first.omega_d.abs()) {
                    return Err(Error::ScheduleMismatch(
                        "simultaneous drives at different frequencies are not supported".into(),
                    ));
                }
                first.omega_d
            }
        };
        let h = self.generator(e1, omega, drives);
        let shift = omega - self.omega_ref;
        let mut w = v.to_vec();
        self.rotate(&mut w, shift, t0);
        let mut w = evolve_vector(&h, t1 - t0, &w);
        self.rotate(&mut w, -shift, t1);
        Ok(w)
    }

    fn accumulate(&mut self, e1: [f64; 2], dt: f64) {
        for q in 0..2 {
            let p = self.qubit_at(q, e1[q]);
            self.phase[q][1] += p.e1 * dt;
            self.phase[q][2] += p.e2 * dt;
        }
    }

    /// Converts a reference-frame amplitude vector at time `t` to the
    /// interaction picture of the bare energies.
    fn to_interaction(&self, v: &mut [C64], t: f64) {
        let w: Vec<f64> = self.params.cavities.iter().map(|c| c.omega).collect();
        for (i, x) in v.iter_mut().enumerate() {
            let l = self.levels[i];
            let n = self.photons[i];
            let mut theta = self.phase[0][l[0]] + self.phase[1][l[1]];
            for j in 0..3 {
                theta += w[j] * n[j] as f64 * t;
            }
            theta -= self.omega_ref * self.k[i] * t;
            *x *= cis(theta);
        }
    }
}

/// Integrates the schedule; see the module documentation for frames.
pub fn simulate_hamiltonian(
    schedule: &PulseSchedule,
    params: &SystemParams,
    initial: &QuantumState,
    opts: &HamiltonianOptions,
) -> Result<QuantumState> {
    schedule.validate(params)?;
    let layout = params.layout();
    if initial.layout() != &layout {
        return Err(Error::LayoutMismatch("initial state does not match parameter layout".into()));
    }
    let mut run = Runner::new(params, opts)?;

    let mut marks: Vec<f64> = vec![0.0];
    for e in &schedule.events {
        marks.push(e.start);
        marks.push(e.end());
    }
    marks.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    marks.dedup_by(|a, b| (*a - *b).abs() <= TIME_EPS);

    let mut ramps: [Option<Ramp>; 2] = [None, None];
    let mut drives: Vec<(usize, ActiveDrive)> = Vec::new();

    // the representation is advanced column by column for density matrices
    let mut vector: Option<Vec<C64>> = initial.vector().map(|v| v.to_vec());
    let mut density = initial.density().cloned();

    for w in marks.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        // events starting now
        for (idx, e) in schedule.events.iter().enumerate() {
            if (e.start - t0).abs() > TIME_EPS {
                continue;
            }
            let q = qubit_index(e.kind.qubit())?;
            match e.kind {
                EventKind::DetuneShift { e1, .. } => {
                    if e.duration <= TIME_EPS {
                        run.e1[q] = e1;
                    } else {
                        ramps[q] = Some(Ramp { from: run.e1[q], to: e1, start: e.start, duration: e.duration });
                    }
                }
                EventKind::QubitPulse { transition, phase, .. } if e.duration > TIME_EPS => {
                    let p = run.qubit_at(q, run.e1[q]);
                    let k = transition.upper_level();
                    let omega_d = p.level_energy(k) - p.level_energy(k - 1);
                    let accumulated = run.phase[q][k] - run.phase[q][k - 1];
                    drives.push((idx, ActiveDrive { qubit: q, omega_d, phase_lab: phase + accumulated - omega_d * t0 }));
                }
                _ => {}
            }
        }
        if t1 - t0 > TIME_EPS {
            let substeps = if ramps.iter().any(|r| r.is_some()) { opts.ramp_substeps.max(1) } else { 1 };
            let dt = (t1 - t0) / substeps as f64;
            let active: Vec<ActiveDrive> = drives.iter().map(|&(_, d)| d).collect();
            for s in 0..substeps {
                let s0 = t0 + s as f64 * dt;
                let s1 = if s + 1 == substeps { t1 } else { s0 + dt };
                let mid = 0.5 * (s0 + s1);
                let mut e1 = run.e1;
                for q in 0..2 {
                    if let Some(r) = ramps[q] {
                        let x = ((mid - r.start) / r.duration).clamp(0.0, 1.0);
                        e1[q] = r.from + (r.to - r.from) * x;
                    }
                }
                if let Some(v) = vector.as_mut() {
                    *v = run.step(v, s0, s1, e1, &active)?;
                }
                if let Some(rho) = density.as_mut() {
                    let mut failure = None;
                    let next = conjugate_with(rho, |col| match run.step(col, s0, s1, e1, &active) {
                        Ok(x) => x,
                        Err(err) => {
                            failure = Some(err);
                            col.to_vec()
                        }
                    });
                    if let Some(err) = failure {
                        return Err(err);
                    }
                    *rho = next;
                }
                run.accumulate(e1, s1 - s0);
            }
        }
        // events ending now
        drives.retain(|&(idx, _)| (schedule.events[idx].end() - t1).abs() > TIME_EPS);
        for q in 0..2 {
            if let Some(r) = ramps[q] {
                if (r.start + r.duration - t1).abs() <= TIME_EPS {
                    run.e1[q] = r.to;
                    ramps[q] = None;
                }
            }
        }
    }

    let t_end = *marks.last().unwrap_or(&0.0);
    if let Some(mut v) = vector {
        run.to_interaction(&mut v, t_end);
        return QuantumState::from_vector(layout, v).map_err(|_| Error::InvalidState("norm drift in Hamiltonian backend".into()));
    }
    let rho = density.expect("state has one representation");
    let d = rho.rows();
    let mut phases = vec![C64::new(1.0, 0.0); d];
    run.to_interaction(&mut phases, t_end);
    let rotated = crate::linalg::CMatrix::from_fn(d, d, |i, j| phases[i] * rho[(i, j)] * phases[j].conj());
    QuantumState::from_density_unchecked(layout, rotated)
}
