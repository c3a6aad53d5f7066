//! Least-squares tomography and semidefinite fidelity bounds from
//! measurement records on the two-cavity working space.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::{gemm, symmetric_eigen, CMatrix, RMatrix, C64};
use crate::measurement::{cavity_pair_layout, generate_record, sample_settings, working_observable, MeasurementRecord};
use crate::protocol::NoonTarget;
use crate::quantum::{
    fidelity_with_pure, partial_trace, project_to_physical, FactorLabel, HermitianOperator, ProjectionMode, QuantumState,
};
use crate::sdp::{solve, SdpProblem, SdpStatus, Sense};

/// Default half-width of the band constraints in units of `σ`.
pub const DEFAULT_KAPPA: f64 = 3.0;

/// Population allowed outside the working truncation when cropping.
pub const CROP_LIMIT: f64 = 1e-6;

/// Orthonormal traceless Hermitian basis (generalized Gell-Mann matrices),
/// listed as coefficient readers: `gell_mann_coordinates(M)[k] = Tr(M B_k)`.
pub fn gell_mann_coordinates(m: &CMatrix) -> Vec<f64> {
    let d = m.rows();
    let s = 2f64.sqrt();
    let mut out = Vec::with_capacity(d * d - 1);
    for k in 1..d {
        for j in 0..k {
            out.push(s * m[(j, k)].re);
            out.push(-s * m[(j, k)].im);
        }
    }
    let mut partial = 0.0;
    for l in 1..d {
        partial += m[(l - 1, l - 1)].re;
        let lf = l as f64;
        out.push((partial - lf * m[(l, l)].re) / (lf * (lf + 1.0)).sqrt());
    }
    out
}

/// `Σ_k x_k B_k` for the basis of [`gell_mann_coordinates`].
pub fn from_gell_mann(x: &[f64], d: usize) -> CMatrix {
    assert_eq!(x.len(), d * d - 1);
    let s = 1.0 / 2f64.sqrt();
    let mut m = CMatrix::zeros(d, d);
    let mut idx = 0;
    for k in 1..d {
        for j in 0..k {
            let (a, b) = (x[idx], x[idx + 1]);
            // symmetric part a(E_jk + E_kj)/√2, antisymmetric b(−iE_jk + iE_kj)/√2
            m[(j, k)] += C64::new(a * s, -b * s);
            m[(k, j)] += C64::new(a * s, b * s);
            idx += 2;
        }
    }
    for l in 1..d {
        let lf = l as f64;
        let c = x[idx] / (lf * (lf + 1.0)).sqrt();
        for j in 0..l {
            m[(j, j)] += C64::new(c, 0.0);
        }
        m[(l, l)] -= C64::new(lf * c, 0.0);
        idx += 1;
    }
    m
}

fn row_observable(record: &MeasurementRecord, j: usize, dims: [usize; 2]) -> CMatrix {
    let s = &record.entries[j].setting;
    working_observable(s.alpha1, s.tau1, dims[0]).kron(&working_observable(s.alpha2, s.tau2, dims[1]))
}

/// Design matrix on the traceless basis and the data with the fixed
/// identity component `Tr(M_j)/d` removed.
fn design(record: &MeasurementRecord, dims: [usize; 2]) -> (RMatrix, Vec<f64>) {
    let d = dims[0] * dims[1];
    let k = d * d - 1;
    let rows = record.len();
    let mut f = RMatrix::zeros(rows, k);
    let mut r = vec![0.0; rows];
    for j in 0..rows {
        let m = row_observable(record, j, dims);
        for (c, v) in gell_mann_coordinates(&m).into_iter().enumerate() {
            f[(j, c)] = v;
        }
        r[j] = record.entries[j].outcome - m.trace().re / d as f64;
    }
    (f, r)
}

/// Unit-trace Hermitian minimizer of `Σ_j (Tr(M_j ρ) − M_j)²`; the
/// minimum-norm solution when the record does not determine `ρ`.
pub fn least_squares_estimate(record: &MeasurementRecord, dims: [usize; 2]) -> Result<CMatrix> {
    if record.is_empty() {
        return Err(Error::InvalidParameter("empty measurement record".into()));
    }
    record.validate()?;
    let d = dims[0] * dims[1];
    let (f, r) = design(record, dims);
    let k = d * d - 1;
    let mut normal = RMatrix::zeros(k, k);
    gemm(1.0, &f, true, &f, false, 0.0, &mut normal);
    let mut rhs = vec![0.0; k];
    for (c, out) in rhs.iter_mut().enumerate() {
        *out = crate::linalg::dot(f.column(c), &r);
    }
    // pseudo-inverse of the normal matrix
    let eig = symmetric_eigen(&normal);
    let top = eig.values.last().copied().unwrap_or(0.0).max(0.0);
    let cut = 1e-10 * top;
    let mut x = vec![0.0; k];
    for (idx, &lambda) in eig.values.iter().enumerate() {
        if lambda <= cut || lambda <= 0.0 {
            continue;
        }
        let v = eig.vectors.column(idx);
        let c = crate::linalg::dot(v, &rhs) / lambda;
        for (xi, vi) in x.iter_mut().zip(v) {
            *xi += c * vi;
        }
    }
    let mut rho = from_gell_mann(&x, d);
    for i in 0..d {
        rho[(i, i)] += C64::new(1.0 / d as f64, 0.0);
    }
    Ok(rho)
}

/// Least-squares estimate mapped onto the density matrices.
pub fn physical_estimate(record: &MeasurementRecord, dims: [usize; 2], mode: ProjectionMode) -> Result<QuantumState> {
    let raw = least_squares_estimate(record, dims)?;
    let h = HermitianOperator::new(cavity_pair_layout(dims)?, raw.hermitian_part())?;
    project_to_physical(&h, mode)
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FidelityBounds {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    pub lower_status: SdpStatus,
    pub upper_status: SdpStatus,
    pub lower_gap: f64,
    pub upper_gap: f64,
}

impl FidelityBounds {
    pub fn gap(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn is_optimal(&self) -> bool {
        self.lower_status == SdpStatus::Optimal && self.upper_status == SdpStatus::Optimal
    }
}

/// NOON target on the `(N+1)`-level working space of each cavity.
pub fn noon_working_state(target: &NoonTarget) -> QuantumState {
    target.cavity_state(target.n + 1)
}

/// `p·|NOON><NOON| + (1 − p)·I/d` on the working space.
pub fn noon_mixture(target: &NoonTarget, p: f64) -> Result<QuantumState> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("mixture weight {p} outside [0, 1]")));
    }
    let pure = noon_working_state(target);
    let layout = pure.layout().clone();
    let d = layout.dim();
    let mut rho = pure.to_density_matrix().scale_real(p);
    for i in 0..d {
        rho[(i, i)] += C64::new((1.0 - p) / d as f64, 0.0);
    }
    QuantumState::from_density_unchecked(layout, rho)
}

/// Reduced (C1, C2) state cropped to `N + 1` levels per cavity.
///
/// Fails with a leakage error when more than [`CROP_LIMIT`] of the
/// population sits above `N` photons in either cavity.
pub fn working_state(state: &QuantumState, n: usize) -> Result<QuantumState> {
    let reduced = partial_trace(state, &[FactorLabel::C1, FactorLabel::C2])?;
    let layout = reduced.layout();
    let dims = layout.dims();
    if dims.iter().any(|&d| d <= n) {
        return Err(Error::InvalidParameter(format!("cavities hold fewer than {} levels", n + 1)));
    }
    for label in [FactorLabel::C1, FactorLabel::C2] {
        let above = reduced.population_at_least(label, n + 1)?;
        if above > CROP_LIMIT {
            return Err(Error::TruncationLeakage { population: above, limit: CROP_LIMIT });
        }
    }
    let rho = reduced.to_density_matrix();
    let w = n + 1;
    let cropped = CMatrix::from_fn(w * w, w * w, |i, j| {
        let (a, b) = (i / w, i % w);
        let (c, e) = (j / w, j % w);
        rho[(a * dims[1] + b, c * dims[1] + e)]
    });
    let t = cropped.trace().re;
    QuantumState::from_density_unchecked(cavity_pair_layout([w, w])?, cropped.scale_real(1.0 / t))
}

/// Minimum and maximum of `<ψ|ρ|ψ>` over states consistent with the record.
///
/// Rows with `σ = 0` are equalities, others bands `|Tr(M_j ρ) − M_j| ≤ κσ_j`.
pub fn fidelity_bounds(record: &MeasurementRecord, target: &QuantumState, kappa: f64) -> Result<FidelityBounds> {
    record.validate()?;
    let psi = target
        .vector()
        .ok_or_else(|| Error::InvalidParameter("fidelity target must be a pure state vector".into()))?;
    let dims_v = target.layout().dims();
    let dims = match dims_v.as_slice() {
        [a, b] if target.layout().labels() == [FactorLabel::C1, FactorLabel::C2] => [*a, *b],
        _ => return Err(Error::LayoutMismatch("target must live on (C1, C2)".into())),
    };
    if !(kappa >= 0.0) {
        return Err(Error::InvalidParameter("kappa must be nonnegative".into()));
    }
    let objective = CMatrix::outer(psi, psi);
    let mut problem = SdpProblem::over_states(objective, Sense::Minimize);
    for (j, e) in record.entries.iter().enumerate() {
        let half = kappa * e.sigma;
        problem.constrain(row_observable(record, j, dims), e.outcome - half, e.outcome + half);
    }
    let lo = solve(&problem)?;
    problem.sense = Sense::Maximize;
    let hi = solve(&problem)?;
    for s in [&lo, &hi] {
        if s.status == SdpStatus::Infeasible {
            return Err(Error::Infeasible { residual: s.infeasibility_residual.unwrap_or(f64::NAN) });
        }
    }
    Ok(FidelityBounds {
        lower: lo.objective.clamp(0.0, 1.0),
        upper: hi.objective.clamp(0.0, 1.0),
        count: record.len(),
        lower_status: lo.status,
        upper_status: hi.status,
        lower_gap: lo.gap,
        upper_gap: hi.gap,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweepRow {
    pub count: usize,
    /// `count / (d² − 1)`
    pub fraction_of_su_d: f64,
    pub lower: f64,
    pub upper: f64,
    pub gap: f64,
    pub true_fidelity: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweepResult {
    pub n: usize,
    /// Mixture weight when the swept state is a NOON/identity mixture.
    pub p: Option<f64>,
    pub sigma: f64,
    pub seed: u64,
    pub rows: Vec<SweepRow>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepOptions {
    pub sigma: f64,
    pub kappa: f64,
    /// Disc radius for the displacements; `N` when `None`.
    pub radius: Option<f64>,
    pub seed: u64,
}

impl SweepOptions {
    pub fn noiseless(seed: u64) -> Self {
        Self { sigma: 0.0, kappa: DEFAULT_KAPPA, radius: None, seed }
    }
}

/// Record of `count` settings for `state`, sampled as in the sweeps.
pub fn sweep_record(state: &QuantumState, n: usize, count: usize, opts: &SweepOptions) -> Result<MeasurementRecord> {
    let settings = sample_settings(count, opts.radius.unwrap_or(n as f64), opts.seed)?;
    generate_record(state, &settings, opts.sigma, opts.seed)
}

fn su_dim(state: &QuantumState) -> usize {
    let d = state.dim();
    d * d - 1
}

/// Bounds on nested prefixes of one sampled record.
pub fn bound_sweep(state: &QuantumState, target: &QuantumState, counts: &[usize], opts: &SweepOptions) -> Result<SweepResult> {
    let mut sorted = counts.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let Some(&max) = sorted.last() else {
        return Err(Error::InvalidParameter("at least one count is required".into()));
    };
    if sorted[0] == 0 {
        return Err(Error::InvalidParameter("counts must be positive".into()));
    }
    let n = infer_n(target)?;
    let record = sweep_record(state, n, max, opts)?;
    let truth = fidelity_with_pure(state, target)?;
    let su = su_dim(target) as f64;
    let mut rows = Vec::with_capacity(sorted.len());
    for &count in &sorted {
        let b = fidelity_bounds(&record.prefix(count), target, opts.kappa)?;
        rows.push(SweepRow {
            count,
            fraction_of_su_d: count as f64 / su,
            lower: b.lower,
            upper: b.upper,
            gap: b.gap(),
            true_fidelity: Some(truth),
        });
    }
    Ok(SweepResult { n, p: None, sigma: opts.sigma, seed: opts.seed, rows })
}

/// Photon number of a two-cavity target with `N + 1` levels per cavity.
fn infer_n(target: &QuantumState) -> Result<usize> {
    match target.layout().dims().as_slice() {
        [a, b] if a == b && *a >= 2 => Ok(a - 1),
        _ => Err(Error::LayoutMismatch("target must have equal cavity dimensions".into())),
    }
}

/// Smallest prefix of a `max_count` record whose bound gap is at most
/// `threshold`, found by bisection (the gap is nonincreasing on nested
/// prefixes). `None` when the full record does not reach the threshold.
pub fn gap_threshold_count(
    state: &QuantumState,
    target: &QuantumState,
    max_count: usize,
    threshold: f64,
    opts: &SweepOptions,
) -> Result<Option<usize>> {
    if max_count == 0 {
        return Err(Error::InvalidParameter("max_count must be positive".into()));
    }
    let n = infer_n(target)?;
    let record = sweep_record(state, n, max_count, opts)?;
    let gap_at = |k: usize| -> Result<f64> { Ok(fidelity_bounds(&record.prefix(k), target, opts.kappa)?.gap()) };
    if gap_at(max_count)? > threshold {
        return Ok(None);
    }
    let (mut lo, mut hi) = (0usize, max_count);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if gap_at(mid)? <= threshold {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

/// Tomographic fidelity of the physical estimate with the target.
pub fn estimate_fidelity(record: &MeasurementRecord, target: &QuantumState, mode: ProjectionMode) -> Result<f64> {
    let dims = match target.layout().dims().as_slice() {
        [a, b] => [*a, *b],
        _ => return Err(Error::LayoutMismatch("target must live on two cavities".into())),
    };
    let est = physical_estimate(record, dims, mode)?;
    fidelity_with_pure(&est, target)
}

#[cfg(test)]
mod tests;
