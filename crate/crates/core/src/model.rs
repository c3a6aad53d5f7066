//! Circuit parameters and the Hamiltonian pieces built from them.
//!
//! Energies and rates are angular frequencies with ħ = 1. The unit of time is
//! whatever the caller uses consistently; the command-line layer uses ns.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{cis, CMatrix, C64, ONE, ZERO};
use crate::quantum::{lowering, FactorLabel, HermitianOperator, HilbertLayout, LocalSum, QUBIT_LEVELS};

/// Ratio above which the rotating-wave approximation is flagged.
pub const RWA_WARN_RATIO: f64 = 0.05;

/// Three-level qubit at its idle operating point.
///
/// Level energies follow `E1 = p·E2`, so the `|2>` energy is `E1/p`.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QubitParams {
    pub e1: f64,
    pub e2: f64,
    pub p: f64,
    pub lambda: f64,
}

impl QubitParams {
    pub fn new(e1: f64, p: f64, lambda: f64) -> Result<Self> {
        let q = Self { e1, e2: e1 / p, p, lambda };
        q.validate()?;
        Ok(q)
    }

    /// Level energies after retuning the `|1>` energy to `e1`.
    pub fn retuned(&self, e1: f64) -> Self {
        Self { e1, e2: e1 / self.p, ..*self }
    }

    /// `|1> ↔ |2>` transition frequency.
    pub fn e12(&self) -> f64 {
        self.e2 - self.e1
    }

    pub fn level_energy(&self, level: usize) -> f64 {
        match level {
            0 => 0.0,
            1 => self.e1,
            _ => self.e2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.e1 > 0.0 && self.e2 > self.e1) {
            return Err(Error::InvalidParameter(format!(
                "qubit energies must satisfy E2 > E1 > 0 (E1 = {}, E2 = {})",
                self.e1, self.e2
            )));
        }
        if !(self.p > 0.0 && self.p < 2.0) {
            return Err(Error::InvalidParameter(format!("p = {} outside (0, 2)", self.p)));
        }
        if ((self.e1 - self.p * self.e2) / self.e1).abs() > 1e-9 {
            return Err(Error::InvalidParameter("E1 != p·E2".into()));
        }
        if !(self.lambda > 0.0) {
            return Err(Error::InvalidParameter(format!("lambda = {} must be positive", self.lambda)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CavityParams {
    pub omega: f64,
    pub truncation: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CouplingParams {
    /// `|0> ↔ |1>` coupling.
    pub g1: f64,
    /// `|1> ↔ |2>` coupling.
    pub g2: f64,
}

impl CouplingParams {
    /// `g2` defaults to `λ·g1`.
    pub fn with_lambda(g1: f64, lambda: f64) -> Self {
        Self { g1, g2: lambda * g1 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Coupling {
    pub qubit: FactorLabel,
    pub cavity: FactorLabel,
    pub params: CouplingParams,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SystemParams {
    /// Q1, Q2 at their idle (parking) points.
    pub qubits: [QubitParams; 2],
    /// C1, C2, CC.
    pub cavities: [CavityParams; 3],
    pub couplings: Vec<Coupling>,
    /// Duration of a 0↔1 π-pulse; the drive amplitude is `π / t_rabi`.
    pub t_rabi: f64,
    pub t2: f64,
    /// Duration of a frequency retuning ramp in the Hamiltonian backend.
    pub ramp_time: f64,
}

pub const CAVITIES: [FactorLabel; 3] = [FactorLabel::C1, FactorLabel::C2, FactorLabel::CC];
pub const QUBITS: [FactorLabel; 2] = [FactorLabel::Q1, FactorLabel::Q2];

pub fn qubit_index(label: FactorLabel) -> Result<usize> {
    match label {
        FactorLabel::Q1 => Ok(0),
        FactorLabel::Q2 => Ok(1),
        other => Err(Error::InvalidParameter(format!("{} is not a qubit", other.name()))),
    }
}

pub fn cavity_index(label: FactorLabel) -> Result<usize> {
    match label {
        FactorLabel::C1 => Ok(0),
        FactorLabel::C2 => Ok(1),
        FactorLabel::CC => Ok(2),
        other => Err(Error::InvalidParameter(format!("{} is not a cavity", other.name()))),
    }
}

impl SystemParams {
    /// Drive amplitude `Ω0 = π / T_Rabi`.
    pub fn rabi_amplitude(&self) -> f64 {
        core::f64::consts::PI / self.t_rabi
    }

    pub fn qubit(&self, label: FactorLabel) -> Result<&QubitParams> {
        Ok(&self.qubits[qubit_index(label)?])
    }

    pub fn cavity(&self, label: FactorLabel) -> Result<&CavityParams> {
        Ok(&self.cavities[cavity_index(label)?])
    }

    pub fn coupling(&self, qubit: FactorLabel, cavity: FactorLabel) -> Option<&CouplingParams> {
        self.couplings
            .iter()
            .find(|c| c.qubit == qubit && c.cavity == cavity)
            .map(|c| &c.params)
    }

    pub fn require_coupling(&self, qubit: FactorLabel, cavity: FactorLabel) -> Result<&CouplingParams> {
        self.coupling(qubit, cavity).ok_or_else(|| {
            Error::InvalidParameter(format!("no coupling declared between {} and {}", qubit.name(), cavity.name()))
        })
    }

    /// `[(Q1,3), (Q2,3), (C1,·), (C2,·), (CC,·)]` using the cavity truncations.
    pub fn layout(&self) -> HilbertLayout {
        HilbertLayout::new(vec![
            (FactorLabel::Q1, QUBIT_LEVELS),
            (FactorLabel::Q2, QUBIT_LEVELS),
            (FactorLabel::C1, self.cavities[0].truncation),
            (FactorLabel::C2, self.cavities[1].truncation),
            (FactorLabel::CC, self.cavities[2].truncation),
        ])
        .expect("fixed labels are unique")
    }

    /// Checks invariants; returns rotating-wave warnings that do not abort.
    pub fn validate(&self) -> Result<Vec<String>> {
        for q in &self.qubits {
            q.validate()?;
        }
        for (c, label) in self.cavities.iter().zip(CAVITIES) {
            if !(c.omega > 0.0) {
                return Err(Error::InvalidParameter(format!("{} frequency must be positive", label.name())));
            }
            if c.truncation < 2 {
                return Err(Error::InvalidParameter(format!("{} truncation must be at least 2", label.name())));
            }
        }
        for (name, v) in [("t_rabi", self.t_rabi), ("t2", self.t2)] {
            if !(v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive")));
            }
        }
        if !(self.ramp_time >= 0.0) {
            return Err(Error::InvalidParameter("ramp_time must be nonnegative".into()));
        }
        let mut warnings = Vec::new();
        for (k, c) in self.couplings.iter().enumerate() {
            qubit_index(c.qubit)?;
            cavity_index(c.cavity)?;
            if self.couplings[..k].iter().any(|o| o.qubit == c.qubit && o.cavity == c.cavity) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate coupling {}-{}",
                    c.qubit.name(),
                    c.cavity.name()
                )));
            }
            if !(c.params.g1 > 0.0 && c.params.g2 >= 0.0) {
                return Err(Error::InvalidParameter("coupling rates must be positive".into()));
            }
            let q = self.qubit(c.qubit)?;
            let cav = self.cavity(c.cavity)?;
            let g = c.params.g1.max(c.params.g2);
            let ratio = (g / cav.omega).max(g / q.e1);
            if ratio > RWA_WARN_RATIO {
                warnings.push(format!(
                    "coupling {}-{} is {ratio:.3} of the bare frequencies; rotating-wave approximation is doubtful",
                    c.qubit.name(),
                    c.cavity.name()
                ));
            }
        }
        Ok(warnings)
    }
}

/// `c1·|1><0|⊗a + c2·|2><1|⊗a + h.c.` on a (qubit, cavity) pair.
pub fn pair_coupling_matrix(c1: C64, c2: C64, cavity_dim: usize) -> CMatrix {
    let a = lowering(cavity_dim);
    let mut s01 = CMatrix::zeros(QUBIT_LEVELS, QUBIT_LEVELS);
    s01[(1, 0)] = c1;
    let mut s12 = CMatrix::zeros(QUBIT_LEVELS, QUBIT_LEVELS);
    s12[(2, 1)] = c2;
    let up = &s01.kron(&a) + &s12.kron(&a);
    &up + &up.adjoint()
}

/// `(Ω/2)(c01·|1><0| + λ·c12·|2><1|) + h.c.` on one qubit.
pub fn drive_matrix(amplitude: f64, lambda: f64, c01: C64, c12: C64) -> CMatrix {
    let mut m = CMatrix::zeros(QUBIT_LEVELS, QUBIT_LEVELS);
    m[(1, 0)] = c01 * (amplitude / 2.0);
    m[(2, 1)] = c12 * (amplitude * lambda / 2.0);
    m[(0, 1)] = m[(1, 0)].conj();
    m[(1, 2)] = m[(2, 1)].conj();
    m
}

fn pair_positions(layout: &HilbertLayout, qubit: FactorLabel, cavity: FactorLabel) -> Result<(usize, usize)> {
    qubit_index(qubit)?;
    cavity_index(cavity)?;
    Ok((layout.require(qubit)?, layout.require(cavity)?))
}

fn check_full_layout(layout: &HilbertLayout) -> Result<()> {
    for label in QUBITS.iter().chain(CAVITIES.iter()) {
        layout.require(*label)?;
    }
    Ok(())
}

/// Diagonal of the bare qubit and cavity energies for the given qubit
/// operating points.
pub fn bare_energies(params: &SystemParams, qubits: &[QubitParams; 2], layout: &HilbertLayout) -> Result<Vec<f64>> {
    let mut per_factor: Vec<Vec<f64>> = Vec::new();
    for &(label, dim) in layout.factors() {
        let e: Vec<f64> = if label.is_qubit() {
            let q = &qubits[qubit_index(label)?];
            (0..dim).map(|l| q.level_energy(l)).collect()
        } else {
            let w = params.cavity(label)?.omega;
            (0..dim).map(|n| w * n as f64).collect()
        };
        per_factor.push(e);
    }
    let total = layout.dim();
    let mut out = vec![0.0; total];
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = layout.levels_of(i).iter().zip(&per_factor).map(|(&l, e)| e[l]).sum();
    }
    Ok(out)
}

/// Excitation count per basis state: qubit level plus photon numbers.
pub fn excitation_numbers(layout: &HilbertLayout) -> Vec<f64> {
    (0..layout.dim())
        .map(|i| layout.levels_of(i).iter().sum::<usize>() as f64)
        .collect()
}

/// Lab-frame drift: bare energies plus the rotating-wave couplings.
pub fn build_drift(params: &SystemParams, layout: &HilbertLayout) -> Result<HermitianOperator> {
    check_full_layout(layout)?;
    let mut sum = LocalSum::new(layout.clone());
    sum.diagonal_mut().copy_from_slice(&bare_energies(params, &params.qubits, layout)?);
    for c in &params.couplings {
        let (pq, pc) = pair_positions(layout, c.qubit, c.cavity)?;
        let cdim = layout.factors()[pc].1;
        let m = pair_coupling_matrix(C64::new(c.params.g1, 0.0), C64::new(c.params.g2, 0.0), cdim);
        sum.add_term(&[pq, pc], m);
    }
    HermitianOperator::new(layout.clone(), sum.to_dense())
}

/// Detunings `(Δ1, Δ2)` of the qubit transitions from a cavity.
pub fn detunings(qubit: &QubitParams, cavity: &CavityParams) -> (f64, f64) {
    (qubit.e1 - cavity.omega, qubit.e12() - cavity.omega)
}

/// Interaction-picture coupling between one qubit and one cavity at time `t`.
pub fn interaction_coupling(
    params: &SystemParams,
    qubit: FactorLabel,
    cavity: FactorLabel,
    t: f64,
    layout: &HilbertLayout,
) -> Result<HermitianOperator> {
    let (pq, pc) = pair_positions(layout, qubit, cavity)?;
    let g = params.require_coupling(qubit, cavity)?;
    let (d1, d2) = detunings(params.qubit(qubit)?, params.cavity(cavity)?);
    let cdim = layout.factors()[pc].1;
    let m = pair_coupling_matrix(cis(d1 * t) * g.g1, cis(d2 * t) * g.g2, cdim);
    embed_local(layout, &[pq, pc], m)
}

/// `g1(|1><0|⊗a + |0><1|⊗a†)`; qubit level `|2>` is untouched.
pub fn resonant_jc(
    params: &SystemParams,
    qubit: FactorLabel,
    cavity: FactorLabel,
    layout: &HilbertLayout,
) -> Result<HermitianOperator> {
    let (pq, pc) = pair_positions(layout, qubit, cavity)?;
    let g = params.require_coupling(qubit, cavity)?;
    let cdim = layout.factors()[pc].1;
    let m = pair_coupling_matrix(C64::new(g.g1, 0.0), ZERO, cdim);
    embed_local(layout, &[pq, pc], m)
}

/// `(Ω/2)(|0><1| + λ|1><2| + h.c.)` on one qubit.
pub fn drive_term(amplitude: f64, lambda: f64, target: FactorLabel, layout: &HilbertLayout) -> Result<HermitianOperator> {
    qubit_index(target)?;
    let pq = layout.require(target)?;
    embed_local(layout, &[pq], drive_matrix(amplitude, lambda, ONE, ONE))
}

fn embed_local(layout: &HilbertLayout, positions: &[usize], m: CMatrix) -> Result<HermitianOperator> {
    let mut sum = LocalSum::new(layout.clone());
    sum.add_term(positions, m);
    HermitianOperator::new(layout.clone(), sum.to_dense())
}
