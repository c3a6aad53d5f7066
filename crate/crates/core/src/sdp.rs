//! Small dense semidefinite programs over density matrices.
//!
//! Problems are stated over complex Hermitian `d × d` matrices and solved on
//! the real embedding `A ↦ [[Re A, −Im A], [Im A, Re A]]` by an
//! infeasible-start primal-dual interior-point method with Nesterov-Todd
//! scaling and Mehrotra predictor-corrector steps. Band constraints
//! `lo ≤ Tr(Aρ) ≤ hi` become equalities with nonnegative slack variables.

use alloc::vec;
use alloc::vec::Vec;
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::{cholesky, cholesky_solve, dot, gemm, hermitian_eigen, norm2, symmetric_eigen, CMatrix, RMatrix, C64};
use crate::measurement::{from_hermitian_coordinates, hermitian_coordinates};
use crate::quantum::HERMITIAN_TOL;

/// `[[Re A, −Im A], [Im A, Re A]]`
pub fn embed_hermitian(a: &CMatrix) -> Result<RMatrix> {
    if !a.is_square() {
        return Err(Error::NotHermitian(f64::INFINITY));
    }
    let err = a.hermiticity_error();
    if err > HERMITIAN_TOL * (1.0 + a.max_abs()) {
        return Err(Error::NotHermitian(err));
    }
    Ok(embed_unchecked(a))
}

fn embed_unchecked(a: &CMatrix) -> RMatrix {
    let d = a.rows();
    RMatrix::from_fn(2 * d, 2 * d, |i, j| {
        let z = a[(i % d, j % d)];
        match (i < d, j < d) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

/// Inverse of the embedding, averaging the two copies of each block.
fn unembed(x: &RMatrix) -> CMatrix {
    let d = x.rows() / 2;
    CMatrix::from_fn(d, d, |i, j| {
        C64::new(0.5 * (x[(i, j)] + x[(i + d, j + d)]), 0.5 * (x[(i + d, j)] - x[(i, j + d)]))
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BandConstraint {
    pub matrix: CMatrix,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SdpProblem {
    pub dim: usize,
    /// Objective `Tr(Cρ)`.
    pub objective: CMatrix,
    pub equalities: Vec<(CMatrix, f64)>,
    pub bands: Vec<BandConstraint>,
    pub sense: Sense,
}

impl SdpProblem {
    /// Optimization over density matrices: the unit-trace equality is added.
    pub fn over_states(objective: CMatrix, sense: Sense) -> Self {
        let d = objective.rows();
        Self { dim: d, objective, equalities: vec![(CMatrix::identity(d), 1.0)], bands: Vec::new(), sense }
    }

    /// Adds `Tr(Aρ) = b` when `lo == hi`, otherwise a band.
    pub fn constrain(&mut self, matrix: CMatrix, lo: f64, hi: f64) {
        if lo == hi {
            self.equalities.push((matrix, lo));
        } else {
            self.bands.push(BandConstraint { matrix, lo, hi });
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check = |m: &CMatrix| -> Result<()> {
            if m.rows() != self.dim || m.cols() != self.dim {
                return Err(Error::LayoutMismatch("constraint dimension differs from problem".into()));
            }
            let err = m.hermiticity_error();
            if err > HERMITIAN_TOL * (1.0 + m.max_abs()) {
                return Err(Error::NotHermitian(err));
            }
            Ok(())
        };
        if self.dim == 0 {
            return Err(Error::InvalidParameter("empty problem".into()));
        }
        check(&self.objective)?;
        for (a, b) in &self.equalities {
            check(a)?;
            if !b.is_finite() {
                return Err(Error::InvalidParameter("equality right-hand side must be finite".into()));
            }
        }
        for band in &self.bands {
            check(&band.matrix)?;
            if band.lo.is_nan() || band.hi.is_nan() || band.lo > band.hi {
                return Err(Error::InvalidParameter("band needs lo ≤ hi".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SdpStatus {
    Optimal,
    Infeasible,
    MaxIterations,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SdpSolution {
    pub rho: CMatrix,
    /// `Tr(Cρ)` at the returned point.
    pub objective: f64,
    pub dual: f64,
    /// `|objective − dual|`
    pub gap: f64,
    pub status: SdpStatus,
    pub iterations: usize,
    /// Largest violation of an equality or band at `rho`.
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// Farkas certificate residual when infeasibility was detected.
    pub infeasibility_residual: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverOptions {
    pub max_iterations: usize,
    pub gap_abs: f64,
    pub gap_rel: f64,
    pub feasibility_tol: f64,
    /// Fraction of the distance to the cone boundary taken per step.
    pub step_fraction: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { max_iterations: 200, gap_abs: 1e-9, gap_rel: 1e-9, feasibility_tol: 1e-9, step_fraction: 0.98 }
    }
}

/// Equality rows with Gram-Schmidt dependencies removed.
struct Reduced {
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    /// Largest right-hand-side inconsistency among dropped rows.
    inconsistency: f64,
}

fn reduce_equalities(eqs: &[(Vec<f64>, f64)]) -> Reduced {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rhs = Vec::new();
    let mut inconsistency = 0.0f64;
    for (v0, b0) in eqs {
        let scale = norm2(v0);
        if scale == 0.0 {
            inconsistency = inconsistency.max(b0.abs());
            continue;
        }
        let mut v: Vec<f64> = v0.iter().map(|x| x / scale).collect();
        let mut b = b0 / scale;
        // two passes keep the basis orthonormal to working precision
        for _ in 0..2 {
            for (q, bq) in rows.iter().zip(&rhs) {
                let c = dot(q, &v);
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= c * qi;
                }
                b -= c * bq;
            }
        }
        let n = norm2(&v);
        if n < 1e-9 {
            inconsistency = inconsistency.max(b.abs());
        } else {
            v.iter_mut().for_each(|x| *x /= n);
            rows.push(v);
            rhs.push(b / n);
        }
    }
    Reduced { rows, rhs, inconsistency }
}

/// Packed upper triangle with `√2` off-diagonal weights, so that
/// `svec(A)·svec(B) = <A, B>`.
fn svec(a: &RMatrix, out: &mut [f64]) {
    let n = a.rows();
    let s = 2f64.sqrt();
    let mut k = 0;
    for j in 0..n {
        for i in 0..j {
            out[k] = s * a[(i, j)];
            k += 1;
        }
        out[k] = a[(j, j)];
        k += 1;
    }
}

fn smat(v: &[f64], n: usize) -> RMatrix {
    let s = 1.0 / 2f64.sqrt();
    let mut m = RMatrix::zeros(n, n);
    let mut k = 0;
    for j in 0..n {
        for i in 0..j {
            m[(i, j)] = s * v[k];
            m[(j, i)] = s * v[k];
            k += 1;
        }
        m[(j, j)] = v[k];
        k += 1;
    }
    m
}

/// Real standard-form program
/// `min <C,X> s.t. <A_i,X> + Σ_l G_il x_l = b_i, X ⪰ 0, x ≥ 0`, where every
/// slack `x_l` enters one row with coefficient ±1 and has zero cost.
struct RealProblem {
    n: usize,
    c: RMatrix,
    a: Vec<RMatrix>,
    b: Vec<f64>,
    /// `(row, coefficient)` per slack variable
    slacks: Vec<(usize, f64)>,
}

struct RealIterate {
    x: RMatrix,
    xs: Vec<f64>,
    y: Vec<f64>,
    z: RMatrix,
    zs: Vec<f64>,
}

struct RealResult {
    it: RealIterate,
    status: SdpStatus,
    iterations: usize,
    primal: f64,
    dual: f64,
    dual_residual: f64,
    certificate: Option<f64>,
}

impl RealProblem {
    fn op(&self, x: &RMatrix, xs: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = self.a.iter().map(|a| a.dot(x)).collect();
        for (&(row, coef), &v) in self.slacks.iter().zip(xs) {
            out[row] += coef * v;
        }
        out
    }

    fn adjoint(&self, y: &[f64]) -> (RMatrix, Vec<f64>) {
        let mut m = RMatrix::zeros(self.n, self.n);
        for (a, &yi) in self.a.iter().zip(y) {
            if yi != 0.0 {
                m.add_scaled(yi, a);
            }
        }
        let s = self.slacks.iter().map(|&(row, coef)| coef * y[row]).collect();
        (m, s)
    }

    fn solve(&self, opts: &SolverOptions, init_scale: f64) -> RealResult {
        let n = self.n;
        let m = self.b.len();
        let p = self.slacks.len();
        let nu = (n + p) as f64;
        let len = n * (n + 1) / 2;
        let b_norm = 1.0 + norm2(&self.b);
        let c_norm = 1.0 + self.c.frobenius_norm();

        let mut it = RealIterate {
            x: RMatrix::identity(n).scale(init_scale),
            xs: vec![1.0; p],
            y: vec![0.0; m],
            z: RMatrix::identity(n),
            zs: vec![1.0; p],
        };
        let mut stalled = 0;
        let result = |it, status, iterations, primal, dual, dual_residual, certificate| RealResult {
            it,
            status,
            iterations,
            primal,
            dual,
            dual_residual,
            certificate,
        };

        let mut scaled = RMatrix::zeros(m, len);
        let mut buf = vec![0.0; len];
        for iter in 0..opts.max_iterations {
            let ax = self.op(&it.x, &it.xs);
            let rp: Vec<f64> = self.b.iter().zip(&ax).map(|(b, a)| b - a).collect();
            let (aty, gty) = self.adjoint(&it.y);
            let mut rd = self.c.clone();
            rd.add_scaled(-1.0, &aty);
            rd.add_scaled(-1.0, &it.z);
            let rds: Vec<f64> = gty.iter().zip(&it.zs).map(|(g, z)| -g - z).collect();
            let primal = self.c.dot(&it.x);
            let dual = dot(&self.b, &it.y);
            let comp = it.x.dot(&it.z) + dot(&it.xs, &it.zs);
            let mu = comp / nu;
            let pinf = norm2(&rp) / b_norm;
            let dinf = (rd.frobenius_norm() + norm2(&rds)) / c_norm;
            let gap = (primal - dual).abs();
            let gap_tol = opts.gap_abs.max(opts.gap_rel * (1.0 + primal.abs()));
            if pinf <= opts.feasibility_tol && dinf <= opts.feasibility_tol && gap <= gap_tol && comp <= gap_tol {
                return result(it, SdpStatus::Optimal, iter, primal, dual, dinf, None);
            }
            // Farkas: b·y → +∞ while A*(y) + Z stays bounded
            if dual > 0.0 {
                let mut s = aty.clone();
                s.add_scaled(1.0, &it.z);
                let cert = (s.frobenius_norm() + gty.iter().zip(&it.zs).map(|(g, z)| (g + z).abs()).sum::<f64>()) / dual;
                if cert < 1e-8 && dual > 1e6 * c_norm {
                    return result(it, SdpStatus::Infeasible, iter, primal, dual, dinf, Some(cert));
                }
            }

            // Nesterov-Todd scaling: X = L L^T, L^T Z L = U diag(s) U^T,
            // G = L U diag(s)^(-1/4), G^{-1} X G^{-T} = G^T Z G = diag(√s).
            let Some(l) = cholesky(&it.x) else { break };
            let mut lz = RMatrix::zeros(n, n);
            gemm(1.0, &l, true, &it.z, false, 0.0, &mut lz);
            let mut lzl = RMatrix::zeros(n, n);
            gemm(1.0, &lz, false, &l, false, 0.0, &mut lzl);
            let eig = symmetric_eigen(&lzl.symmetrize());
            if eig.values[0] <= 0.0 {
                break;
            }
            let v: Vec<f64> = eig.values.iter().map(|s| s.sqrt()).collect();
            let mut g = RMatrix::zeros(n, n);
            gemm(1.0, &l, false, &eig.vectors, false, 0.0, &mut g);
            for j in 0..n {
                let f = eig.values[j].powf(-0.25);
                g.column_mut(j).iter_mut().for_each(|x| *x *= f);
            }
            let congruence = |a: &RMatrix| -> RMatrix {
                let mut t = RMatrix::zeros(n, n);
                gemm(1.0, a, false, &g, false, 0.0, &mut t);
                let mut out = RMatrix::zeros(n, n);
                gemm(1.0, &g, true, &t, false, 0.0, &mut out);
                out
            };
            for (i, a) in self.a.iter().enumerate() {
                svec(&congruence(a), &mut buf);
                for (k, &val) in buf.iter().enumerate() {
                    scaled[(i, k)] = val;
                }
            }
            let gl: Vec<f64> = it.xs.iter().zip(&it.zs).map(|(x, z)| (x / z).sqrt()).collect();
            let wl: Vec<f64> = it.xs.iter().zip(&it.zs).map(|(x, z)| (x * z).sqrt()).collect();

            let mut schur = RMatrix::zeros(m, m);
            gemm(1.0, &scaled, false, &scaled, true, 0.0, &mut schur);
            for (&(row, coef), &gv) in self.slacks.iter().zip(&gl) {
                schur[(row, row)] += (coef * gv) * (coef * gv);
            }
            let factor = {
                let mut f = cholesky(&schur);
                let mut reg = 1e-14 * (0..m).map(|i| schur[(i, i)]).fold(0.0, f64::max).max(1e-300);
                while f.is_none() && reg < 1e-2 {
                    for i in 0..m {
                        schur[(i, i)] += reg;
                    }
                    f = cholesky(&schur);
                    reg *= 100.0;
                }
                match f {
                    Some(f) => f,
                    None => break,
                }
            };

            let rd_s = congruence(&rd);
            let mut rd_vec = vec![0.0; len];
            svec(&rd_s, &mut rd_vec);
            let rds_s: Vec<f64> = rds.iter().zip(&gl).map(|(r, g)| r * g).collect();

            // Solves for a complementarity right-hand side (t, ts) in scaled
            // coordinates; returns (dX~, dx~, dy, dZ~, dz~).
            let direction = |t: &RMatrix, ts: &[f64]| {
                let mut tv = vec![0.0; len];
                svec(t, &mut tv);
                let diff: Vec<f64> = tv.iter().zip(&rd_vec).map(|(a, b)| a - b).collect();
                let a_diff = scaled.mul_vec(&diff);
                let mut rhs = rp.clone();
                for i in 0..m {
                    rhs[i] -= a_diff[i];
                }
                for (l_idx, &(row, coef)) in self.slacks.iter().enumerate() {
                    rhs[row] -= coef * gl[l_idx] * (ts[l_idx] - rds_s[l_idx]);
                }
                let dy = cholesky_solve(&factor, &rhs);
                let mut at_dy = vec![0.0; len];
                for (k, out) in at_dy.iter_mut().enumerate() {
                    *out = dot(scaled.column(k), &dy);
                }
                let dz_vec: Vec<f64> = rd_vec.iter().zip(&at_dy).map(|(r, a)| r - a).collect();
                let dx_vec: Vec<f64> = tv.iter().zip(&dz_vec).map(|(t, z)| t - z).collect();
                let dzs: Vec<f64> = self
                    .slacks
                    .iter()
                    .enumerate()
                    .map(|(l_idx, &(row, coef))| rds_s[l_idx] - coef * gl[l_idx] * dy[row])
                    .collect();
                let dxs: Vec<f64> = ts.iter().zip(&dzs).map(|(t, z)| t - z).collect();
                (smat(&dx_vec, n), dxs, dy, smat(&dz_vec, n), dzs)
            };
            // largest step keeping diag(v) + α·D ⪰ 0 and w + α·d ≥ 0
            let max_step = |d: &RMatrix, ds: &[f64]| -> f64 {
                let scaled_d = RMatrix::from_fn(n, n, |i, j| d[(i, j)] / (v[i] * v[j]).sqrt());
                let lmin = symmetric_eigen(&scaled_d).values[0];
                let mut a = if lmin < 0.0 { -1.0 / lmin } else { f64::INFINITY };
                for (w, dv) in wl.iter().zip(ds) {
                    if *dv < 0.0 {
                        a = a.min(-w / dv);
                    }
                }
                a
            };

            // predictor
            let t_aff = RMatrix::from_diagonal(&v).scale(-1.0);
            let ts_aff: Vec<f64> = wl.iter().map(|w| -w).collect();
            let (dxa, dxsa, _, dza, dzsa) = direction(&t_aff, &ts_aff);
            let ap = max_step(&dxa, &dxsa).min(1.0);
            let ad = max_step(&dza, &dzsa).min(1.0);
            let mut xa = RMatrix::from_diagonal(&v);
            xa.add_scaled(ap, &dxa);
            let mut za = RMatrix::from_diagonal(&v);
            za.add_scaled(ad, &dza);
            let mut mu_aff = xa.dot(&za);
            for l_idx in 0..p {
                mu_aff += (wl[l_idx] + ap * dxsa[l_idx]) * (wl[l_idx] + ad * dzsa[l_idx]);
            }
            mu_aff /= nu;
            let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

            // corrector: L_V(T) = 2σμI − 2V² − (dXa dZa + dZa dXa)
            let mut prod = RMatrix::zeros(n, n);
            gemm(1.0, &dxa, false, &dza, false, 0.0, &mut prod);
            let t = RMatrix::from_fn(n, n, |i, j| {
                let s = prod[(i, j)] + prod[(j, i)];
                let diag = if i == j { 2.0 * sigma * mu - 2.0 * v[i] * v[i] } else { 0.0 };
                (diag - s) / (v[i] + v[j])
            });
            let ts: Vec<f64> =
                (0..p).map(|l_idx| (sigma * mu - wl[l_idx] * wl[l_idx] - dxsa[l_idx] * dzsa[l_idx]) / wl[l_idx]).collect();
            let (dx, dxs, dy, dz, dzs) = direction(&t, &ts);
            let ap = (opts.step_fraction * max_step(&dx, &dxs)).min(1.0);
            let ad = (opts.step_fraction * max_step(&dz, &dzs)).min(1.0);

            // unscale: dX = G dX~ G^T, dZ = Rd − A*(dy)
            let mut tmp = RMatrix::zeros(n, n);
            gemm(1.0, &g, false, &dx, false, 0.0, &mut tmp);
            let mut dx_full = RMatrix::zeros(n, n);
            gemm(1.0, &tmp, false, &g, true, 0.0, &mut dx_full);
            let (ady, _) = self.adjoint(&dy);
            let mut dz_full = rd.clone();
            dz_full.add_scaled(-1.0, &ady);

            it.x.add_scaled(ap, &dx_full);
            it.x = it.x.symmetrize();
            it.z.add_scaled(ad, &dz_full);
            it.z = it.z.symmetrize();
            for l_idx in 0..p {
                it.xs[l_idx] += ap * gl[l_idx] * dxs[l_idx];
                it.zs[l_idx] += ad * dzs[l_idx] / gl[l_idx];
            }
            for (yi, d) in it.y.iter_mut().zip(&dy) {
                *yi += ad * d;
            }
            if ap < 1e-8 && ad < 1e-8 {
                stalled += 1;
                if stalled >= 3 {
                    break;
                }
            } else {
                stalled = 0;
            }
        }
        // iteration cap or numerical breakdown: accept loosely converged points
        let ax = self.op(&it.x, &it.xs);
        let pinf = ax.iter().zip(&self.b).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let primal = self.c.dot(&it.x);
        let dual = dot(&self.b, &it.y);
        let (aty, gty) = self.adjoint(&it.y);
        let mut rd = self.c.clone();
        rd.add_scaled(-1.0, &aty);
        rd.add_scaled(-1.0, &it.z);
        let rds: f64 = gty.iter().zip(&it.zs).map(|(g, z)| (g + z).powi(2)).sum::<f64>().sqrt();
        let dinf = (rd.frobenius_norm() + rds) / c_norm;
        let loose = (primal - dual).abs() <= 1e-6 * (1.0 + primal.abs()) && pinf <= 1e-7 && dinf <= 1e-7;
        let status = if loose { SdpStatus::Optimal } else { SdpStatus::MaxIterations };
        let iterations = opts.max_iterations;
        result(it, status, iterations, primal, dual, dinf, None)
    }
}

pub fn solve(problem: &SdpProblem) -> Result<SdpSolution> {
    solve_with(problem, &SolverOptions::default())
}

pub fn solve_with(problem: &SdpProblem, opts: &SolverOptions) -> Result<SdpSolution> {
    problem.validate()?;
    let d = problem.dim;
    let sign = match problem.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let eqs: Vec<(Vec<f64>, f64)> = problem.equalities.iter().map(|(a, b)| (hermitian_coordinates(a), *b)).collect();
    let reduced = reduce_equalities(&eqs);
    let coeff_scale = 1.0 + eqs.iter().map(|(_, b)| b.abs()).fold(0.0, f64::max);
    if reduced.inconsistency > 1e-8 * coeff_scale {
        return Ok(infeasible(d, reduced.inconsistency));
    }

    // the equalities pin ρ completely: check positivity directly
    if problem.bands.is_empty() && reduced.rows.len() == d * d {
        let mut x = vec![0.0; d * d];
        for (q, b) in reduced.rows.iter().zip(&reduced.rhs) {
            for (xi, qi) in x.iter_mut().zip(q) {
                *xi += b * qi;
            }
        }
        let rho = from_hermitian_coordinates(&x, d);
        let lmin = hermitian_eigen(&rho).values[0];
        if lmin < -1e-8 {
            return Ok(infeasible(d, -lmin));
        }
        let value = problem.objective.trace_product(&rho).re;
        let residual = residual_of(problem, &rho);
        return Ok(SdpSolution {
            rho,
            objective: value,
            dual: value,
            gap: 0.0,
            status: SdpStatus::Optimal,
            iterations: 0,
            primal_residual: residual,
            dual_residual: 0.0,
            infeasibility_residual: None,
        });
    }

    let half = |h: &CMatrix| embed_unchecked(h).scale(0.5);
    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut slacks = Vec::new();
    for (q, rhs) in reduced.rows.iter().zip(&reduced.rhs) {
        a.push(half(&from_hermitian_coordinates(q, d)));
        b.push(*rhs);
    }
    for band in &problem.bands {
        let scale = band.matrix.frobenius_norm().max(1e-300);
        let m = half(&band.matrix.scale_real(1.0 / scale));
        if band.lo.is_finite() {
            a.push(m.clone());
            b.push(band.lo / scale);
            slacks.push((b.len() - 1, -1.0));
        }
        if band.hi.is_finite() {
            a.push(m);
            b.push(band.hi / scale);
            slacks.push((b.len() - 1, 1.0));
        }
    }
    let real = RealProblem { n: 2 * d, c: half(&problem.objective).scale(sign), a, b, slacks };
    let out = real.solve(opts, 1.0 / d as f64);
    let rho = unembed(&out.it.x).hermitian_part();
    let objective = problem.objective.trace_product(&rho).re;
    let residual = residual_of(problem, &rho);
    Ok(SdpSolution {
        rho,
        objective,
        dual: sign * out.dual,
        gap: (out.primal - out.dual).abs(),
        status: out.status,
        iterations: out.iterations,
        primal_residual: residual,
        dual_residual: out.dual_residual,
        infeasibility_residual: out.certificate,
    })
}

fn infeasible(d: usize, residual: f64) -> SdpSolution {
    SdpSolution {
        rho: CMatrix::identity(d).scale_real(1.0 / d as f64),
        objective: f64::NAN,
        dual: f64::NAN,
        gap: f64::NAN,
        status: SdpStatus::Infeasible,
        iterations: 0,
        primal_residual: f64::NAN,
        dual_residual: f64::NAN,
        infeasibility_residual: Some(residual),
    }
}

/// Largest equality or band violation of `rho`.
fn residual_of(problem: &SdpProblem, rho: &CMatrix) -> f64 {
    let mut r = 0.0f64;
    for (a, b) in &problem.equalities {
        r = r.max((a.trace_product(rho).re - b).abs());
    }
    for band in &problem.bands {
        let v = band.matrix.trace_product(rho).re;
        r = r.max(band.lo - v).max(v - band.hi);
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ZERO;

    /// Deterministic pseudo-random Hermitian matrix.
    fn hermitian(d: usize, seed: u64) -> CMatrix {
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let m = CMatrix::from_fn(d, d, |_, _| C64::new(next(), next()));
        m.hermitian_part()
    }

    fn random_state(d: usize, seed: u64) -> CMatrix {
        let a = hermitian(d, seed);
        let rho = &a.matmul(&a) + &CMatrix::identity(d).scale_real(0.05);
        let t = rho.trace().re;
        rho.scale_real(1.0 / t)
    }

    #[test]
    fn embedding_identity_and_spectrum() {
        assert_eq!(embed_hermitian(&CMatrix::identity(3)).unwrap(), RMatrix::identity(6));
        let diag = CMatrix::from_real_diagonal(&[1.0, -1.0]);
        let ev = symmetric_eigen(&embed_hermitian(&diag).unwrap()).values;
        assert_eq!(ev, vec![-1.0, -1.0, 1.0, 1.0]);
        let a = hermitian(4, 3);
        let want = hermitian_eigen(&a).values;
        let got = symmetric_eigen(&embed_hermitian(&a).unwrap()).values;
        for (k, w) in want.iter().enumerate() {
            assert!((got[2 * k] - w).abs() < 1e-12 && (got[2 * k + 1] - w).abs() < 1e-12);
        }
        let b = hermitian(4, 5);
        let lhs = embed_hermitian(&a).unwrap().dot(&embed_hermitian(&b).unwrap());
        assert!((lhs - 2.0 * a.trace_product(&b).re).abs() < 1e-12);
        assert_eq!(unembed(&embed_hermitian(&a).unwrap()), a);
    }

    #[test]
    fn embedding_rejects_non_hermitian() {
        let mut a = CMatrix::identity(2);
        a[(0, 1)] = C64::new(1.0, 0.0);
        assert!(matches!(embed_hermitian(&a), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn projector_bounds() {
        let c = CMatrix::from_real_diagonal(&[1.0, 0.0]);
        let lo = solve(&SdpProblem::over_states(c.clone(), Sense::Minimize)).unwrap();
        assert_eq!(lo.status, SdpStatus::Optimal);
        assert!(lo.objective.abs() < 1e-8);
        assert!((lo.rho[(1, 1)].re - 1.0).abs() < 1e-6);
        let hi = solve(&SdpProblem::over_states(c, Sense::Maximize)).unwrap();
        assert!((hi.objective - 1.0).abs() < 1e-8);
        assert!(hi.gap <= 1e-8);
    }

    #[test]
    fn minimum_eigenvalue_oracle() {
        for (k, d) in [2usize, 3, 5, 8, 10].into_iter().enumerate() {
            let c = hermitian(d, 100 + k as u64);
            let sol = solve(&SdpProblem::over_states(c.clone(), Sense::Minimize)).unwrap();
            let lmin = hermitian_eigen(&c).values[0];
            assert_eq!(sol.status, SdpStatus::Optimal);
            assert!((sol.objective - lmin).abs() < 1e-6, "d={d}: {} vs {lmin}", sol.objective);
            assert!(sol.gap <= 1e-8, "{}", sol.gap);
            assert!(sol.dual <= sol.objective + 1e-9);
            assert!(hermitian_eigen(&sol.rho).values[0] >= -1e-8);
        }
    }

    #[test]
    fn bounds_bracket_a_feasible_point() {
        let d = 4;
        let truth = random_state(d, 7);
        let c = hermitian(d, 8);
        let mut base = SdpProblem::over_states(c.clone(), Sense::Minimize);
        for k in 0..5 {
            let a = hermitian(d, 20 + k);
            let b = a.trace_product(&truth).re;
            base.constrain(a, b, b);
        }
        let lo = solve(&base).unwrap();
        let mut max_problem = base.clone();
        max_problem.sense = Sense::Maximize;
        let hi = solve(&max_problem).unwrap();
        let v = c.trace_product(&truth).re;
        assert_eq!((lo.status, hi.status), (SdpStatus::Optimal, SdpStatus::Optimal));
        assert!(lo.objective <= v + 1e-7 && v <= hi.objective + 1e-7, "{} {v} {}", lo.objective, hi.objective);
        assert!(lo.primal_residual <= 1e-7 && hi.primal_residual <= 1e-7);
    }

    #[test]
    fn band_constraints_are_respected() {
        let p0 = CMatrix::from_real_diagonal(&[1.0, 0.0, 0.0]);
        let mut prob = SdpProblem::over_states(p0.clone(), Sense::Minimize);
        prob.constrain(p0.clone(), 0.2, 0.3);
        let lo = solve(&prob).unwrap();
        assert_eq!(lo.status, SdpStatus::Optimal);
        assert!((lo.objective - 0.2).abs() < 1e-7);
        prob.sense = Sense::Maximize;
        let hi = solve(&prob).unwrap();
        assert!((hi.objective - 0.3).abs() < 1e-7);
    }

    #[test]
    fn infeasibility_is_reported() {
        let p0 = CMatrix::from_real_diagonal(&[1.0, 0.0]);
        let mut prob = SdpProblem::over_states(CMatrix::identity(2), Sense::Minimize);
        prob.constrain(p0.clone(), 2.0, 2.0);
        let sol = solve(&prob).unwrap();
        assert_eq!(sol.status, SdpStatus::Infeasible);
        assert!(sol.infeasibility_residual.is_some());

        let mut band = SdpProblem::over_states(CMatrix::identity(2), Sense::Minimize);
        band.constrain(p0, -0.5, -0.1);
        assert_eq!(solve(&band).unwrap().status, SdpStatus::Infeasible);

        // inconsistent duplicate rows
        let mut dup = SdpProblem::over_states(CMatrix::identity(2), Sense::Minimize);
        dup.constrain(CMatrix::identity(2), 2.0, 2.0);
        assert_eq!(solve(&dup).unwrap().status, SdpStatus::Infeasible);
    }

    #[test]
    fn complete_constraints_pin_the_state() {
        let d = 3;
        let truth = random_state(d, 2);
        let c = hermitian(d, 3);
        let mut prob = SdpProblem::over_states(c.clone(), Sense::Minimize);
        for k in 0..12 {
            let a = hermitian(d, 40 + k);
            let b = a.trace_product(&truth).re;
            prob.constrain(a, b, b);
        }
        let sol = solve(&prob).unwrap();
        assert!((&sol.rho - &truth).max_abs() < 1e-10);
        assert!((sol.objective - c.trace_product(&truth).re).abs() < 1e-10);
    }

    #[test]
    fn rejects_mismatched_dimensions() {
        let mut prob = SdpProblem::over_states(CMatrix::identity(2), Sense::Minimize);
        prob.constrain(CMatrix::identity(3), 1.0, 1.0);
        assert!(solve(&prob).is_err());
        let _ = ZERO;
    }
}
