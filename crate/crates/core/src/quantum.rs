//! Composite Hilbert spaces, states and operators.
//!
//! Factor order in a [`HilbertLayout`] is the Kronecker order: the first
//! factor is the most significant index of the flattened basis.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use num_traits::Float;

use crate::error::{Error, Result};
use crate::expm::{evolve_vector, expm_action, LinearOperator};
use crate::linalg::{cnorm2, hermitian_eigen, CMatrix, C64, ONE, ZERO};

/// Hermiticity tolerance for operators and density matrices.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Normalization tolerance for states.
pub const NORM_TOL: f64 = 1e-9;

/// Subsystem names of the two-qubit, three-cavity circuit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum FactorLabel {
    Q1,
    Q2,
    C1,
    C2,
    /// Coupling cavity shared by both qubits.
    CC,
}

impl FactorLabel {
    pub fn is_qubit(self) -> bool {
        matches!(self, FactorLabel::Q1 | FactorLabel::Q2)
    }

    pub fn name(self) -> &'static str {
        match self {
            FactorLabel::Q1 => "Q1",
            FactorLabel::Q2 => "Q2",
            FactorLabel::C1 => "C1",
            FactorLabel::C2 => "C2",
            FactorLabel::CC => "CC",
        }
    }
}

/// Three transmon/phase-qubit levels are kept.
pub const QUBIT_LEVELS: usize = 3;

#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HilbertLayout {
    factors: Vec<(FactorLabel, usize)>,
}

impl HilbertLayout {
    /// Qubit factors must have exactly three levels and labels must be unique.
    pub fn new(factors: Vec<(FactorLabel, usize)>) -> Result<Self> {
        for (i, &(label, dim)) in factors.iter().enumerate() {
            if dim == 0 {
                return Err(Error::InvalidParameter(format!("factor {} has dimension 0", label.name())));
            }
            if label.is_qubit() && dim != QUBIT_LEVELS {
                return Err(Error::InvalidParameter(format!(
                    "qubit factor {} must have {QUBIT_LEVELS} levels, got {dim}",
                    label.name()
                )));
            }
            if factors[..i].iter().any(|&(l, _)| l == label) {
                return Err(Error::InvalidParameter(format!("duplicate factor {}", label.name())));
            }
        }
        Ok(Self { factors })
    }

    pub fn single(label: FactorLabel, dim: usize) -> Result<Self> {
        Self::new(vec![(label, dim)])
    }

    pub fn factors(&self) -> &[(FactorLabel, usize)] {
        &self.factors
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(|&(_, d)| d).collect()
    }

    pub fn labels(&self) -> Vec<FactorLabel> {
        self.factors.iter().map(|&(l, _)| l).collect()
    }

    /// Product of factor dimensions.
    pub fn dim(&self) -> usize {
        self.factors.iter().map(|&(_, d)| d).product()
    }

    pub fn position(&self, label: FactorLabel) -> Option<usize> {
        self.factors.iter().position(|&(l, _)| l == label)
    }

    pub fn require(&self, label: FactorLabel) -> Result<usize> {
        self.position(label).ok_or(Error::MissingFactor(label))
    }

    pub fn factor_dim(&self, label: FactorLabel) -> Option<usize> {
        self.position(label).map(|p| self.factors[p].1)
    }

    /// Row-major strides of the flattened basis.
    pub fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.factors.len()];
        for k in (0..self.factors.len().saturating_sub(1)).rev() {
            s[k] = s[k + 1] * self.factors[k + 1].1;
        }
        s
    }

    /// Flat index of a basis state given one level per factor.
    pub fn index_of(&self, levels: &[usize]) -> usize {
        assert_eq!(levels.len(), self.factors.len());
        levels
            .iter()
            .zip(&self.factors)
            .fold(0, |acc, (&l, &(_, d))| {
                assert!(l < d, "level {l} out of range {d}");
                acc * d + l
            })
    }

    /// Per-factor levels of a flat index.
    pub fn levels_of(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.factors.len()];
        for k in (0..self.factors.len()).rev() {
            let d = self.factors[k].1;
            out[k] = index % d;
            index /= d;
        }
        out
    }

    pub fn concat(&self, other: &Self) -> Result<Self> {
        let mut f = self.factors.clone();
        f.extend_from_slice(&other.factors);
        Self::new(f)
    }

    pub fn sub_layout(&self, positions: &[usize]) -> Result<Self> {
        Self::new(positions.iter().map(|&p| self.factors[p]).collect())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum StateRepr {
    Vector(Vec<C64>),
    Density(CMatrix),
}

/// A pure or mixed state over a declared layout.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumState {
    layout: HilbertLayout,
    repr: StateRepr,
}

impl QuantumState {
    /// Normalized state vector; norm must be within `1e-9` of one.
    pub fn from_vector(layout: HilbertLayout, amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.len() != layout.dim() {
            return Err(Error::LayoutMismatch(format!(
                "vector of length {} for layout dimension {}",
                amplitudes.len(),
                layout.dim()
            )));
        }
        let norm = cnorm2(&amplitudes);
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidState(format!("vector norm {norm} differs from 1")));
        }
        Ok(Self { layout, repr: StateRepr::Vector(amplitudes) })
    }

    /// Density matrix; checked for Hermiticity, unit trace and positivity.
    pub fn from_density(layout: HilbertLayout, rho: CMatrix) -> Result<Self> {
        let state = Self::from_density_unchecked(layout, rho)?;
        state.validate()?;
        Ok(state)
    }

    /// Shape-checked only. Used on internal paths that preserve the state
    /// invariants by construction.
    pub fn from_density_unchecked(layout: HilbertLayout, rho: CMatrix) -> Result<Self> {
        if !rho.is_square() || rho.rows() != layout.dim() {
            return Err(Error::LayoutMismatch(format!(
                "{}x{} matrix for layout dimension {}",
                rho.rows(),
                rho.cols(),
                layout.dim()
            )));
        }
        Ok(Self { layout, repr: StateRepr::Density(rho) })
    }

    pub(crate) fn from_vector_unchecked(layout: HilbertLayout, amplitudes: Vec<C64>) -> Self {
        debug_assert_eq!(amplitudes.len(), layout.dim());
        Self { layout, repr: StateRepr::Vector(amplitudes) }
    }

    /// Computational basis state with the given level in each factor.
    pub fn basis(layout: HilbertLayout, levels: &[usize]) -> Self {
        let mut v = vec![ZERO; layout.dim()];
        v[layout.index_of(levels)] = ONE;
        Self { layout, repr: StateRepr::Vector(v) }
    }

    /// All factors in their lowest level.
    pub fn ground(layout: HilbertLayout) -> Self {
        let n = layout.factors().len();
        Self::basis(layout, &vec![0; n])
    }

    /// `I/d`
    pub fn maximally_mixed(layout: HilbertLayout) -> Self {
        let d = layout.dim();
        let rho = CMatrix::identity(d).scale_real(1.0 / d as f64);
        Self { layout, repr: StateRepr::Density(rho) }
    }

    pub fn layout(&self) -> &HilbertLayout {
        &self.layout
    }

    pub fn repr(&self) -> &StateRepr {
        &self.repr
    }

    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    pub fn is_pure_vector(&self) -> bool {
        matches!(self.repr, StateRepr::Vector(_))
    }

    pub fn vector(&self) -> Option<&[C64]> {
        match &self.repr {
            StateRepr::Vector(v) => Some(v),
            StateRepr::Density(_) => None,
        }
    }

    pub fn density(&self) -> Option<&CMatrix> {
        match &self.repr {
            StateRepr::Density(m) => Some(m),
            StateRepr::Vector(_) => None,
        }
    }

    pub fn into_vector(self) -> Option<Vec<C64>> {
        match self.repr {
            StateRepr::Vector(v) => Some(v),
            StateRepr::Density(_) => None,
        }
    }

    /// Density matrix, forming `|ψ><ψ|` for vector states.
    pub fn to_density_matrix(&self) -> CMatrix {
        match &self.repr {
            StateRepr::Vector(v) => CMatrix::outer(v, v),
            StateRepr::Density(m) => m.clone(),
        }
    }

    pub fn to_density_state(&self) -> Self {
        Self { layout: self.layout.clone(), repr: StateRepr::Density(self.to_density_matrix()) }
    }

    pub fn trace(&self) -> f64 {
        match &self.repr {
            StateRepr::Vector(v) => v.iter().map(|x| x.norm_sqr()).sum(),
            StateRepr::Density(m) => m.trace().re,
        }
    }

    /// `Tr ρ²`
    pub fn purity(&self) -> f64 {
        match &self.repr {
            StateRepr::Vector(v) => {
                let n: f64 = v.iter().map(|x| x.norm_sqr()).sum();
                n * n
            }
            StateRepr::Density(m) => m.as_slice().iter().map(|x| x.norm_sqr()).sum(),
        }
    }

    /// Diagonal of the density matrix.
    pub fn populations(&self) -> Vec<f64> {
        match &self.repr {
            StateRepr::Vector(v) => v.iter().map(|x| x.norm_sqr()).collect(),
            StateRepr::Density(m) => m.diagonal().iter().map(|x| x.re).collect(),
        }
    }

    /// Total population with `level` in factor `label`.
    pub fn level_population(&self, label: FactorLabel, level: usize) -> Result<f64> {
        let pos = self.layout.require(label)?;
        let pops = self.populations();
        Ok(pops
            .iter()
            .enumerate()
            .filter(|(i, _)| self.layout.levels_of(*i)[pos] == level)
            .map(|(_, p)| p)
            .sum())
    }

    /// Population with factor `label` at or above `level`.
    pub fn population_at_least(&self, label: FactorLabel, level: usize) -> Result<f64> {
        let pos = self.layout.require(label)?;
        let pops = self.populations();
        Ok(pops
            .iter()
            .enumerate()
            .filter(|(i, _)| self.layout.levels_of(*i)[pos] >= level)
            .map(|(_, p)| p)
            .sum())
    }

    /// Checks the invariants of the representation.
    pub fn validate(&self) -> Result<()> {
        match &self.repr {
            StateRepr::Vector(v) => {
                let norm = cnorm2(v);
                if (norm - 1.0).abs() > NORM_TOL {
                    return Err(Error::InvalidState(format!("vector norm {norm} differs from 1")));
                }
            }
            StateRepr::Density(m) => {
                let herm = m.hermiticity_error();
                if herm > HERMITIAN_TOL {
                    return Err(Error::NotHermitian(herm));
                }
                let tr = m.trace().re;
                if (tr - 1.0).abs() > NORM_TOL {
                    return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
                }
                let min = hermitian_eigen(m).values.first().copied().unwrap_or(0.0);
                if min < -NORM_TOL {
                    return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
                }
            }
        }
        Ok(())
    }
}

/// A Hermitian matrix tied to a layout.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOperator {
    layout: HilbertLayout,
    matrix: CMatrix,
}

impl HermitianOperator {
    pub fn new(layout: HilbertLayout, matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() || matrix.rows() != layout.dim() {
            return Err(Error::LayoutMismatch(format!(
                "{}x{} matrix for layout dimension {}",
                matrix.rows(),
                matrix.cols(),
                layout.dim()
            )));
        }
        let err = matrix.hermiticity_error();
        if err > HERMITIAN_TOL * matrix.max_abs().max(1.0) {
            return Err(Error::NotHermitian(err));
        }
        Ok(Self { layout, matrix })
    }

    pub fn identity(layout: HilbertLayout) -> Self {
        let d = layout.dim();
        Self { layout, matrix: CMatrix::identity(d) }
    }

    pub fn zero(layout: HilbertLayout) -> Self {
        let d = layout.dim();
        Self { layout, matrix: CMatrix::zeros(d, d) }
    }

    pub fn layout(&self) -> &HilbertLayout {
        &self.layout
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigen(&self.matrix).values
    }

    /// `Tr(A ρ)`; real for Hermitian arguments.
    pub fn expectation(&self, state: &QuantumState) -> Result<f64> {
        if state.layout().dim() != self.layout.dim() {
            return Err(Error::LayoutMismatch("operator and state dimensions differ".into()));
        }
        Ok(match state.repr() {
            StateRepr::Vector(v) => self.matrix.expectation(v).re,
            StateRepr::Density(rho) => self.matrix.trace_product(rho).re,
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.layout != other.layout {
            return Err(Error::LayoutMismatch("cannot add operators on different layouts".into()));
        }
        Ok(Self { layout: self.layout.clone(), matrix: &self.matrix + &other.matrix })
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { layout: self.layout.clone(), matrix: self.matrix.scale_real(s) }
    }

    /// Largest entry of `[A, B]` in Frobenius norm.
    pub fn commutator_norm(&self, other: &Self) -> f64 {
        let ab = self.matrix.matmul(&other.matrix);
        let ba = other.matrix.matmul(&self.matrix);
        (&ab - &ba).frobenius_norm()
    }
}

/// Kronecker product of states in argument order.
pub fn tensor_states(states: &[&QuantumState]) -> Result<QuantumState> {
    let first = states.first().ok_or_else(|| Error::InvalidParameter("empty tensor product".into()))?;
    let all_vec = states.iter().all(|s| s.is_pure_vector());
    let all_mat = states.iter().all(|s| !s.is_pure_vector());
    if !all_vec && !all_mat {
        return Err(Error::MixedRepresentation);
    }
    let mut layout = first.layout.clone();
    for s in &states[1..] {
        layout = layout.concat(&s.layout)?;
    }
    if all_vec {
        let mut v: Vec<C64> = first.vector().unwrap().to_vec();
        for s in &states[1..] {
            let w = s.vector().unwrap();
            v = v.iter().flat_map(|a| w.iter().map(move |b| a * b)).collect();
        }
        Ok(QuantumState::from_vector_unchecked(layout, v))
    } else {
        let mut m = first.density().unwrap().clone();
        for s in &states[1..] {
            m = m.kron(s.density().unwrap());
        }
        QuantumState::from_density_unchecked(layout, m)
    }
}

/// Kronecker product of operators in argument order.
pub fn tensor_operators(ops: &[&HermitianOperator]) -> Result<HermitianOperator> {
    let first = ops.first().ok_or_else(|| Error::InvalidParameter("empty tensor product".into()))?;
    let mut layout = first.layout.clone();
    let mut m = first.matrix.clone();
    for op in &ops[1..] {
        layout = layout.concat(&op.layout)?;
        m = m.kron(&op.matrix);
    }
    Ok(HermitianOperator { layout, matrix: m })
}

/// Truncated annihilation operator, `a|n> = √n |n-1>`.
pub fn lowering(dim: usize) -> CMatrix {
    let mut a = CMatrix::zeros(dim, dim);
    for n in 1..dim {
        a[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    a
}

/// `a†a` on `dim` levels.
pub fn number_operator(dim: usize) -> CMatrix {
    CMatrix::from_real_diagonal(&(0..dim).map(|n| n as f64).collect::<Vec<_>>())
}

/// Sparse generator `α a† − α* a` on a truncated Fock space.
#[derive(Clone, Copy, Debug)]
pub struct DisplacementGenerator {
    pub alpha: C64,
    pub dim: usize,
}

impl LinearOperator for DisplacementGenerator {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        let d = self.dim;
        for n in 0..d {
            let mut acc = ZERO;
            if n >= 1 {
                acc += self.alpha * (n as f64).sqrt() * x[n - 1];
            }
            if n + 1 < d {
                acc -= self.alpha.conj() * ((n + 1) as f64).sqrt() * x[n + 1];
            }
            y[n] = acc;
        }
    }

    fn norm1_bound(&self) -> f64 {
        if self.dim < 2 {
            return 0.0;
        }
        2.0 * self.alpha.norm() * ((self.dim - 1) as f64).sqrt()
    }
}

/// `exp(α a† − α* a)` on `dim` Fock levels.
pub fn displacement(alpha: C64, dim: usize) -> CMatrix {
    assert!(dim >= 2, "displacement needs at least two levels");
    crate::expm::expm_dense(&DisplacementGenerator { alpha, dim }, ONE)
}

/// `D(α)|m>` on `dim` levels, without forming the full matrix.
pub fn displaced_fock(alpha: C64, dim: usize, m: usize) -> Vec<C64> {
    let mut e = vec![ZERO; dim];
    e[m] = ONE;
    expm_action(&DisplacementGenerator { alpha, dim }, ONE, &e)
}

/// Fock-space truncation that keeps displacement errors below ~1e-6 for
/// photon numbers up to `n_max`.
pub fn displacement_truncation(alpha_abs: f64, n_max: usize) -> usize {
    let a2 = alpha_abs * alpha_abs;
    (a2 + 6.0 * (a2 + 1.0).sqrt()).ceil() as usize + n_max + 1
}

/// Applies a dense operator on a subset of factors to a flattened vector.
///
/// `positions` lists layout positions in the order of the Kronecker factors of
/// `op`.
pub fn apply_local(layout: &HilbertLayout, positions: &[usize], op: &CMatrix, v: &[C64]) -> Vec<C64> {
    let plan = LocalPlan::new(layout, positions);
    assert_eq!(op.rows(), plan.offsets.len(), "operator does not match factor dimensions");
    let mut out = vec![ZERO; v.len()];
    plan.apply_into(op, v, &mut out, false);
    out
}

/// `U ρ U†` for `U` acting on a subset of factors.
pub fn conjugate_local(layout: &HilbertLayout, positions: &[usize], u: &CMatrix, rho: &CMatrix) -> CMatrix {
    let plan = LocalPlan::new(layout, positions);
    let d = rho.rows();
    let mut tmp = CMatrix::zeros(d, d);
    for j in 0..d {
        plan.apply_into(u, rho.column(j), tmp.column_mut(j), false);
    }
    // (U (U ρ)†)† = U ρ U†
    let tmp = tmp.adjoint();
    let mut out = CMatrix::zeros(d, d);
    for j in 0..d {
        plan.apply_into(u, tmp.column(j), out.column_mut(j), false);
    }
    out.adjoint()
}

/// `U ρ U†` for a unitary available only through its action on vectors.
pub fn conjugate_with(rho: &CMatrix, mut apply: impl FnMut(&[C64]) -> Vec<C64>) -> CMatrix {
    let d = rho.rows();
    let mut tmp = CMatrix::zeros(d, d);
    for j in 0..d {
        tmp.column_mut(j).copy_from_slice(&apply(rho.column(j)));
    }
    let tmp = tmp.adjoint();
    let mut out = CMatrix::zeros(d, d);
    for j in 0..d {
        out.column_mut(j).copy_from_slice(&apply(tmp.column(j)));
    }
    out.adjoint()
}

/// Index bookkeeping for factor-local operators.
#[derive(Clone, Debug)]
pub(crate) struct LocalPlan {
    /// Flat offsets of each local basis state.
    pub offsets: Vec<usize>,
    /// Flat indices with all local factors at level 0.
    pub bases: Vec<usize>,
}

impl LocalPlan {
    pub fn new(layout: &HilbertLayout, positions: &[usize]) -> Self {
        let strides = layout.strides();
        let dims = layout.dims();
        let mut offsets = vec![0usize];
        for &p in positions {
            let mut next = Vec::with_capacity(offsets.len() * dims[p]);
            for &o in &offsets {
                for l in 0..dims[p] {
                    next.push(o + l * strides[p]);
                }
            }
            offsets = next;
        }
        let total = layout.dim();
        let bases = (0..total)
            .filter(|&i| positions.iter().all(|&p| (i / strides[p]) % dims[p] == 0))
            .collect();
        Self { offsets, bases }
    }

    /// `out (+)= op · v` restricted to the local factors.
    pub fn apply_into(&self, op: &CMatrix, v: &[C64], out: &mut [C64], accumulate: bool) {
        let k = self.offsets.len();
        let mut local = vec![ZERO; k];
        for &b in &self.bases {
            for (l, &o) in self.offsets.iter().enumerate() {
                local[l] = v[b + o];
            }
            if !accumulate {
                for &o in &self.offsets {
                    out[b + o] = ZERO;
                }
            }
            for (c, &lc) in local.iter().enumerate() {
                if lc == ZERO {
                    continue;
                }
                let col = op.column(c);
                for (r, &o) in self.offsets.iter().enumerate() {
                    let a = col[r];
                    if a != ZERO {
                        out[b + o] += a * lc;
                    }
                }
            }
        }
    }
}

/// Sum of factor-local terms plus a diagonal, usable as a [`LinearOperator`]
/// on the full flattened space without forming a dense matrix.
#[derive(Clone, Debug)]
pub struct LocalSum {
    layout: HilbertLayout,
    diagonal: Vec<f64>,
    terms: Vec<(LocalPlan, CMatrix)>,
}

impl LocalSum {
    pub fn new(layout: HilbertLayout) -> Self {
        let d = layout.dim();
        Self { layout, diagonal: vec![0.0; d], terms: Vec::new() }
    }

    pub fn layout(&self) -> &HilbertLayout {
        &self.layout
    }

    pub fn diagonal_mut(&mut self) -> &mut [f64] {
        &mut self.diagonal
    }

    pub fn add_term(&mut self, positions: &[usize], op: CMatrix) {
        let plan = LocalPlan::new(&self.layout, positions);
        assert_eq!(op.rows(), plan.offsets.len());
        self.terms.push((plan, op));
    }

    /// Dense form; intended for small layouts and tests.
    pub fn to_dense(&self) -> CMatrix {
        let d = self.dim();
        let mut out = CMatrix::zeros(d, d);
        let mut e = vec![ZERO; d];
        for j in 0..d {
            e[j] = ONE;
            self.apply(&e, out.column_mut(j));
            e[j] = ZERO;
        }
        out
    }
}

impl LinearOperator for LocalSum {
    fn dim(&self) -> usize {
        self.diagonal.len()
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        for ((yi, &xi), &d) in y.iter_mut().zip(x).zip(&self.diagonal) {
            *yi = xi * d;
        }
        for (plan, op) in &self.terms {
            plan.apply_into(op, x, y, true);
        }
    }

    fn norm1_bound(&self) -> f64 {
        let diag = self.diagonal.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        diag + self.terms.iter().map(|(_, op)| op.norm1()).sum::<f64>()
    }
}

/// Reduced density matrix over the kept factors, in original order.
pub fn partial_trace(state: &QuantumState, keep: &[FactorLabel]) -> Result<QuantumState> {
    let layout = state.layout();
    let mut kept: Vec<usize> = Vec::with_capacity(keep.len());
    for &label in keep {
        kept.push(layout.position(label).ok_or(Error::UnknownLabel(label))?);
    }
    kept.sort_unstable();
    kept.dedup();
    let kept_layout = layout.sub_layout(&kept)?;
    let dk = kept_layout.dim();

    let kplan = LocalPlan::new(layout, &kept);
    // bases of the kept plan enumerate the traced-out configurations
    let mut out = CMatrix::zeros(dk, dk);
    match state.repr() {
        StateRepr::Vector(v) => {
            let mut local = vec![ZERO; dk];
            for &b in &kplan.bases {
                for (l, &o) in kplan.offsets.iter().enumerate() {
                    local[l] = v[b + o];
                }
                for j in 0..dk {
                    let cj = local[j].conj();
                    if cj == ZERO {
                        continue;
                    }
                    for i in 0..dk {
                        out[(i, j)] += local[i] * cj;
                    }
                }
            }
        }
        StateRepr::Density(rho) => {
            for &b in &kplan.bases {
                for (j, &oj) in kplan.offsets.iter().enumerate() {
                    for (i, &oi) in kplan.offsets.iter().enumerate() {
                        out[(i, j)] += rho[(b + oi, b + oj)];
                    }
                }
            }
        }
    }
    QuantumState::from_density_unchecked(kept_layout, out)
}

/// `exp(-i H t)` applied to a state.
pub fn evolve(h: &HermitianOperator, t: f64, state: &QuantumState) -> Result<QuantumState> {
    if h.layout().dim() != state.dim() {
        return Err(Error::LayoutMismatch("Hamiltonian and state dimensions differ".into()));
    }
    let herm = h.matrix().hermiticity_error();
    if herm > HERMITIAN_TOL * h.matrix().max_abs().max(1.0) {
        return Err(Error::NotHermitian(herm));
    }
    match state.repr() {
        StateRepr::Vector(v) => Ok(QuantumState::from_vector_unchecked(
            state.layout().clone(),
            evolve_vector(h.matrix(), t, v),
        )),
        StateRepr::Density(rho) => {
            let d = rho.rows();
            let mut half = CMatrix::zeros(d, d);
            for j in 0..d {
                half.column_mut(j).copy_from_slice(&evolve_vector(h.matrix(), t, rho.column(j)));
            }
            let half = half.adjoint();
            let mut full = CMatrix::zeros(d, d);
            for j in 0..d {
                full.column_mut(j).copy_from_slice(&evolve_vector(h.matrix(), t, half.column(j)));
            }
            QuantumState::from_density_unchecked(state.layout().clone(), full.adjoint())
        }
    }
}

/// `<ψ|ρ|ψ>`
pub fn fidelity_with_pure(rho: &QuantumState, psi: &QuantumState) -> Result<f64> {
    let v = psi
        .vector()
        .ok_or_else(|| Error::InvalidParameter("target must be a state vector".into()))?;
    if rho.layout().dims() != psi.layout().dims() {
        return Err(Error::LayoutMismatch("state and target layouts differ".into()));
    }
    let f = match rho.repr() {
        StateRepr::Vector(u) => crate::linalg::cdot(v, u).norm_sqr(),
        StateRepr::Density(m) => m.expectation(v).re,
    };
    Ok(f.clamp(0.0, 1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum ProjectionMode {
    /// Zero the negative eigenvalues and renormalize.
    Clip,
    /// Frobenius-nearest unit-trace positive semidefinite matrix.
    Nearest,
}

/// Maps a Hermitian matrix onto the set of density matrices.
pub fn project_to_physical(h: &HermitianOperator, mode: ProjectionMode) -> Result<QuantumState> {
    let m = h.matrix();
    if m.max_abs() == 0.0 {
        return Err(Error::ZeroMatrix);
    }
    let eig = hermitian_eigen(m);
    let weights: Vec<f64> = match mode {
        ProjectionMode::Clip => {
            let clipped: Vec<f64> = eig.values.iter().map(|&x| x.max(0.0)).collect();
            let total: f64 = clipped.iter().sum();
            if total <= 0.0 {
                return Err(Error::ZeroMatrix);
            }
            clipped.iter().map(|x| x / total).collect()
        }
        ProjectionMode::Nearest => project_to_simplex(&eig.values),
    };
    let rho = crate::linalg::eigen_reconstruct(&eig, &weights);
    QuantumState::from_density_unchecked(h.layout().clone(), rho.hermitian_part())
}

/// Euclidean projection onto the probability simplex.
pub fn project_to_simplex(values: &[f64]) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(core::cmp::Ordering::Equal));
    let mut cumulative = 0.0;
    let mut shift = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let candidate = (cumulative - 1.0) / (k + 1) as f64;
        if u - candidate > 0.0 {
            shift = candidate;
        }
    }
    values.iter().map(|&x| (x - shift).max(0.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::cis;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn layout_rejects_bad_qubit_dimension() {
        assert!(HilbertLayout::new(vec![(FactorLabel::Q1, 2)]).is_err());
        assert!(HilbertLayout::new(vec![(FactorLabel::C1, 3), (FactorLabel::C1, 3)]).is_err());
        let l = HilbertLayout::new(vec![(FactorLabel::Q1, 3), (FactorLabel::C1, 4)]).unwrap();
        assert_eq!(l.dim(), 12);
        assert_eq!(l.index_of(&[2, 1]), 9);
        assert_eq!(l.levels_of(9), vec![2, 1]);
    }

    #[test]
    fn tensor_of_ground_states_is_first_basis_vector() {
        let q = QuantumState::ground(HilbertLayout::single(FactorLabel::Q1, 3).unwrap());
        let cav = QuantumState::ground(HilbertLayout::single(FactorLabel::C1, 4).unwrap());
        let t = tensor_states(&[&q, &cav]).unwrap();
        let v = t.vector().unwrap();
        assert_eq!(v[0], ONE);
        assert!(v[1..].iter().all(|&x| x == ZERO));
    }

    #[test]
    fn tensor_rejects_mixed_kinds() {
        let q = QuantumState::ground(HilbertLayout::single(FactorLabel::Q1, 3).unwrap());
        let cav = QuantumState::maximally_mixed(HilbertLayout::single(FactorLabel::C1, 2).unwrap());
        assert_eq!(tensor_states(&[&q, &cav]), Err(Error::MixedRepresentation));
    }

    #[test]
    fn tensor_of_sign_operators_has_doubly_degenerate_spectrum() {
        let z = CMatrix::from_real_diagonal(&[1.0, -1.0]);
        let a = HermitianOperator::new(HilbertLayout::single(FactorLabel::C1, 2).unwrap(), z.clone()).unwrap();
        let b = HermitianOperator::new(HilbertLayout::single(FactorLabel::C2, 2).unwrap(), z).unwrap();
        let t = tensor_operators(&[&a, &b]).unwrap();
        let ev = t.eigenvalues();
        let want = [-1.0, -1.0, 1.0, 1.0];
        for (x, w) in ev.iter().zip(want) {
            assert!((x - w).abs() < 1e-12);
        }
    }

    #[test]
    fn displacement_at_zero_is_identity() {
        let d = displacement(ZERO, 6);
        assert!((&d - &CMatrix::identity(6)).max_abs() < 1e-15);
    }

    #[test]
    fn displacement_vacuum_column_is_coherent_state() {
        let alpha = C64::new(1.1, -0.6);
        let a2 = alpha.norm_sqr();
        let d = displacement_truncation(alpha.norm(), 6);
        let col = displacement(alpha, d).column(0).to_vec();
        let mut factorial = 1.0;
        for n in 0..=6 {
            if n > 0 {
                factorial *= n as f64;
            }
            let want = alpha.powu(n as u32) * ((-a2 / 2.0).exp() / factorial.sqrt());
            assert!((col[n] - want).norm() < 1e-6, "n={n}");
        }
    }

    #[test]
    fn displacement_inverse_on_interior_block() {
        let alpha = C64::new(0.7, 0.4);
        let d = 24;
        let p = displacement(alpha, d).matmul(&displacement(-alpha, d));
        for i in 0..d - 2 {
            for j in 0..d - 2 {
                let want = if i == j { ONE } else { ZERO };
                assert!((p[(i, j)] - want).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn partial_trace_of_bell_pair_is_maximally_mixed() {
        let layout = HilbertLayout::new(vec![(FactorLabel::C1, 2), (FactorLabel::C2, 2)]).unwrap();
        let s = 1.0 / 2f64.sqrt();
        let bell = QuantumState::from_vector(layout, vec![c(s), ZERO, ZERO, c(s)]).unwrap();
        let r = partial_trace(&bell, &[FactorLabel::C1]).unwrap();
        let ev = hermitian_eigen(r.density().unwrap()).values;
        assert!((ev[0] - 0.5).abs() < 1e-12 && (ev[1] - 0.5).abs() < 1e-12);
        assert!(matches!(
            partial_trace(&bell, &[FactorLabel::Q1]),
            Err(Error::UnknownLabel(FactorLabel::Q1))
        ));
    }

    #[test]
    fn partial_trace_of_product_is_pure() {
        let layout = HilbertLayout::new(vec![(FactorLabel::Q1, 3), (FactorLabel::C1, 3)]).unwrap();
        let q = [c(0.6), C64::new(0.0, 0.8), ZERO];
        let cav = [c(0.5), c(0.5), C64::new(0.5, 0.5)];
        let v: Vec<C64> = q.iter().flat_map(|a| cav.iter().map(move |b| a * b)).collect();
        let s = QuantumState::from_vector(layout, v).unwrap();
        let r = partial_trace(&s, &[FactorLabel::C1]).unwrap();
        assert!((r.purity() - 1.0).abs() < 1e-10);
        let rd = partial_trace(&s.to_density_state(), &[FactorLabel::Q1]).unwrap();
        assert!((rd.purity() - 1.0).abs() < 1e-10);
        assert!((rd.density().unwrap()[(1, 1)].re - 0.64).abs() < 1e-12);
    }

    #[test]
    fn evolve_diagonal_phase() {
        let layout = HilbertLayout::single(FactorLabel::C1, 2).unwrap();
        let e = 1.7;
        let h = HermitianOperator::new(layout.clone(), CMatrix::from_real_diagonal(&[0.0, e])).unwrap();
        let one = QuantumState::basis(layout.clone(), &[1]);
        let t = 2.3;
        let out = evolve(&h, t, &one).unwrap();
        assert!((out.vector().unwrap()[1] - cis(-e * t)).norm() < 1e-12);
        let same = evolve(&h, 0.0, &one).unwrap();
        assert_eq!(same, one);
    }

    #[test]
    fn evolve_rejects_non_hermitian_generator() {
        let layout = HilbertLayout::single(FactorLabel::C1, 2).unwrap();
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 1)] = ONE;
        assert!(HermitianOperator::new(layout, m).is_err());
    }

    #[test]
    fn fidelity_of_maximally_mixed_state() {
        let layout = HilbertLayout::single(FactorLabel::C1, 5).unwrap();
        let psi = QuantumState::basis(layout.clone(), &[3]);
        let mixed = QuantumState::maximally_mixed(layout);
        assert!((fidelity_with_pure(&mixed, &psi).unwrap() - 0.2).abs() < 1e-12);
        assert!((fidelity_with_pure(&psi.to_density_state(), &psi).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn clip_projection_of_diagonal() {
        let layout = HilbertLayout::single(FactorLabel::C1, 2).unwrap();
        let h = HermitianOperator::new(layout.clone(), CMatrix::from_real_diagonal(&[1.5, -0.5])).unwrap();
        let rho = project_to_physical(&h, ProjectionMode::Clip).unwrap();
        let m = rho.density().unwrap();
        assert!((m[(0, 0)].re - 1.0).abs() < 1e-12 && m[(1, 1)].norm() < 1e-12);
        let zero = HermitianOperator::zero(layout);
        assert_eq!(project_to_physical(&zero, ProjectionMode::Clip), Err(Error::ZeroMatrix));
        assert_eq!(project_to_physical(&zero, ProjectionMode::Nearest), Err(Error::ZeroMatrix));
    }

    #[test]
    fn simplex_projection_examples() {
        assert_eq!(project_to_simplex(&[1.5, -0.5]), vec![1.0, 0.0]);
        let p = project_to_simplex(&[0.5, 0.5, 0.5]);
        for x in p {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn local_application_matches_kronecker_embedding() {
        let layout = HilbertLayout::new(vec![(FactorLabel::Q1, 3), (FactorLabel::C1, 2), (FactorLabel::C2, 2)]).unwrap();
        let op = CMatrix::from_fn(6, 6, |i, j| C64::new((i * 6 + j) as f64 * 0.1, (i as f64) - (j as f64)));
        let v: Vec<C64> = (0..12).map(|k| C64::new(k as f64, 1.0 - k as f64)).collect();
        // op acts on (Q1, C2)
        let got = apply_local(&layout, &[0, 2], &op, &v);
        let mut want = vec![ZERO; 12];
        for i in 0..12 {
            let li = layout.levels_of(i);
            for j in 0..12 {
                let lj = layout.levels_of(j);
                if li[1] != lj[1] {
                    continue;
                }
                want[i] += op[(li[0] * 2 + li[2], lj[0] * 2 + lj[2])] * v[j];
            }
        }
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
