//! Markovian decoherence applied between protocol events.
//!
//! Each qubit sees amplitude damping `|1> → |0>` at `1/T1` and `|2> → |1>` at
//! `2/T1`, plus pure dephasing generated by `diag(0, 1, 1)` at the rate that
//! makes `<0|ρ|1>` decay as `exp(-t/T2)`. Cavities lose photons at their loss
//! rate. Every channel is the exact solution of its Lindblad equation over the
//! step, so composition is exact.

use alloc::format;
use alloc::vec::Vec;
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};
use crate::model::{cavity_index, qubit_index, SystemParams};
use crate::protocol::{apply_event_ideal, noon_phase_and_fidelity, noon_schedule, PulseSchedule};
use crate::quantum::{FactorLabel, HilbertLayout, QuantumState, QUBIT_LEVELS};

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NoiseParams {
    /// Energy relaxation time per qubit; `None` means no relaxation.
    pub t1: [Option<f64>; 2],
    /// Coherence time per qubit; `None` means no decoherence beyond `T1`.
    pub t2: [Option<f64>; 2],
    /// Photon loss rate for C1, C2, CC.
    pub cavity_loss: [f64; 3],
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self::noiseless()
    }
}

impl NoiseParams {
    pub fn noiseless() -> Self {
        Self { t1: [None; 2], t2: [None; 2], cavity_loss: [0.0; 3] }
    }

    /// Same `T2` (and no relaxation) on both qubits.
    pub fn dephasing_only(t2: f64) -> Self {
        Self { t1: [None; 2], t2: [Some(t2); 2], cavity_loss: [0.0; 3] }
    }

    pub fn validate(&self) -> Result<()> {
        for q in 0..2 {
            for v in [self.t1[q], self.t2[q]].into_iter().flatten() {
                if !(v > 0.0) {
                    return Err(Error::InvalidParameter(format!("coherence times must be positive, got {v}")));
                }
            }
            if let (Some(t1), Some(t2)) = (self.t1[q], self.t2[q]) {
                if t2 > 2.0 * t1 * (1.0 + 1e-12) {
                    return Err(Error::InvalidParameter(format!("T2 = {t2} exceeds 2·T1 = {}", 2.0 * t1)));
                }
            }
        }
        if self.cavity_loss.iter().any(|&k| !(k >= 0.0)) {
            return Err(Error::InvalidParameter("cavity loss rates must be nonnegative".into()));
        }
        Ok(())
    }

    /// `(γ, γφ)`: damping rate of `|1>` and pure dephasing rate.
    pub fn qubit_rates(&self, q: usize) -> (f64, f64) {
        let gamma = self.t1[q].map_or(0.0, |t| 1.0 / t);
        let total = self.t2[q].map_or(gamma / 2.0, |t| 1.0 / t);
        (gamma, (total - gamma / 2.0).max(0.0))
    }

    pub fn is_noiseless(&self) -> bool {
        (0..2).all(|q| self.qubit_rates(q) == (0.0, 0.0)) && self.cavity_loss.iter().all(|&k| k == 0.0)
    }
}

/// Population transfer matrix (new from old) and coherence decay factors of
/// the qutrit channel over `dt`.
fn qutrit_factors(gamma: f64, gamma_phi: f64, dt: f64) -> ([[f64; 3]; 3], [[f64; 3]; 3]) {
    let e1 = (-gamma * dt).exp();
    let e2 = (-2.0 * gamma * dt).exp();
    let transfer = [[1.0, 1.0 - e1, (1.0 - e1) * (1.0 - e1)], [0.0, e1, 2.0 * (e1 - e2)], [0.0, 0.0, e2]];
    let decay_rate = [0.0, gamma, 2.0 * gamma];
    let excited = [0.0, 1.0, 1.0];
    let mut coherence = [[1.0; 3]; 3];
    for j in 0..3 {
        for k in 0..3 {
            if j != k {
                let d: f64 = excited[j] - excited[k];
                let rate = 0.5 * (decay_rate[j] + decay_rate[k]) + gamma_phi * d * d;
                coherence[j][k] = (-rate * dt).exp();
            }
        }
    }
    (transfer, coherence)
}

fn apply_qutrit(rho: &mut CMatrix, layout: &HilbertLayout, pos: usize, gamma: f64, gamma_phi: f64, dt: f64) {
    let (transfer, coherence) = qutrit_factors(gamma, gamma_phi, dt);
    let stride = layout.strides()[pos];
    let d = rho.rows();
    let level = |i: usize| (i / stride) % QUBIT_LEVELS;
    for j in 0..d {
        let lj = level(j);
        for i in 0..d {
            let li = level(i);
            if li != lj {
                rho[(i, j)] *= coherence[li][lj];
            }
        }
    }
    // diagonal blocks in this factor mix through the transfer matrix
    for j0 in (0..d).filter(|&j| level(j) == 0) {
        for i0 in (0..d).filter(|&i| level(i) == 0) {
            let old: [C64; 3] = core::array::from_fn(|l| rho[(i0 + l * stride, j0 + l * stride)]);
            for l in 0..3 {
                let mut acc = C64::new(0.0, 0.0);
                for m in 0..3 {
                    acc += old[m] * transfer[l][m];
                }
                rho[(i0 + l * stride, j0 + l * stride)] = acc;
            }
        }
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn apply_cavity_loss(rho: &CMatrix, layout: &HilbertLayout, pos: usize, kappa: f64, dt: f64) -> CMatrix {
    let eta = (-kappa * dt).exp();
    let stride = layout.strides()[pos];
    let dim = layout.factors()[pos].1;
    let d = rho.rows();
    let level = |i: usize| (i / stride) % dim;
    CMatrix::from_fn(d, d, |i, j| {
        let (m, n) = (level(i), level(j));
        let mut acc = C64::new(0.0, 0.0);
        let mut k = 0;
        while m + k < dim && n + k < dim {
            let c = (binomial(m + k, k) * binomial(n + k, k)).sqrt()
                * eta.powf(0.5 * (m + n) as f64)
                * (1.0 - eta).powi(k as i32);
            acc += rho[(i + k * stride, j + k * stride)] * c;
            k += 1;
        }
        acc
    })
}

/// Applies the decoherence channels for a time `dt` to a density matrix
/// state. Qubits and cavities absent from the layout are skipped.
pub fn apply_channel(state: &QuantumState, dt: f64, params: &NoiseParams) -> Result<QuantumState> {
    if dt < 0.0 {
        return Err(Error::NegativeTime(dt));
    }
    let rho = state
        .density()
        .ok_or_else(|| Error::InvalidParameter("noise channels act on density matrices".into()))?;
    let layout = state.layout();
    let mut out = rho.clone();
    if dt == 0.0 {
        return QuantumState::from_density_unchecked(layout.clone(), out);
    }
    for (pos, &(label, _)) in layout.factors().iter().enumerate() {
        if let Ok(q) = qubit_index(label) {
            let (gamma, gamma_phi) = params.qubit_rates(q);
            if gamma > 0.0 || gamma_phi > 0.0 {
                apply_qutrit(&mut out, layout, pos, gamma, gamma_phi, dt);
            }
        } else if let Ok(c) = cavity_index(label) {
            let kappa = params.cavity_loss[c];
            if kappa > 0.0 {
                out = apply_cavity_loss(&out, layout, pos, kappa, dt);
            }
        }
    }
    QuantumState::from_density_unchecked(layout.clone(), out)
}

/// Choi matrix `Σ_{jk} |j><k| ⊗ E(|j><k|)` of the single-qutrit channel.
pub fn qutrit_choi(t1: Option<f64>, t2: Option<f64>, dt: f64) -> Result<CMatrix> {
    let noise = NoiseParams { t1: [t1, None], t2: [t2, None], cavity_loss: [0.0; 3] };
    noise.validate()?;
    let layout = HilbertLayout::single(FactorLabel::Q1, QUBIT_LEVELS)?;
    let mut choi = CMatrix::zeros(9, 9);
    for j in 0..3 {
        for k in 0..3 {
            let mut e = CMatrix::zeros(3, 3);
            e[(j, k)] = C64::new(1.0, 0.0);
            let s = QuantumState::from_density_unchecked(layout.clone(), e)?;
            let out = apply_channel(&s, dt, &noise)?;
            let m = out.density().unwrap();
            for a in 0..3 {
                for b in 0..3 {
                    choi[(j * 3 + a, k * 3 + b)] = m[(a, b)];
                }
            }
        }
    }
    Ok(choi)
}

/// Runs the ideal schedule with decoherence between events and returns the
/// fidelity with the NOON target (relative phase taken from the final state).
pub fn decohered_fidelity(n: usize, params: &SystemParams, noise: &NoiseParams) -> Result<f64> {
    let schedule = noon_schedule(n, params)?;
    decohered_run(&schedule, params, noise).map(|(_, f)| f)
}

/// Final state and fidelity of a schedule run with decoherence. The channel
/// acts for the time elapsed between successive event completions.
pub fn decohered_run(schedule: &PulseSchedule, params: &SystemParams, noise: &NoiseParams) -> Result<(QuantumState, f64)> {
    noise.validate()?;
    schedule.validate(params)?;
    let mut state = QuantumState::ground(params.layout()).to_density_state();
    let mut events: Vec<_> = schedule.events.iter().collect();
    events.sort_by(|a, b| a.start.partial_cmp(&b.start).unwrap_or(core::cmp::Ordering::Equal));
    let mut clock = 0.0f64;
    for e in events {
        apply_event_ideal(&mut state, e)?;
        let end = e.end().max(clock);
        if !noise.is_noiseless() {
            state = apply_channel(&state, end - clock, noise)?;
        }
        clock = end;
    }
    let (_, f) = noon_phase_and_fidelity(&state, schedule.n)?;
    Ok((state, f))
}
