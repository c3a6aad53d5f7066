//! Displaced photon-number observables, their two-cavity correlations and
//! simulated measurement records.
//!
//! `M(α, τ) = Σ_n cos(2√n τ) D†(α)|n><n|D(α)` is built in a padded Fock space
//! whose size follows [`displacement_truncation`], then cropped to the working
//! truncation (`N + 1` levels per cavity) used by the estimators.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{singular_values, CMatrix, RMatrix, C64, ZERO};
use crate::quantum::{displaced_fock, displacement, displacement_truncation, FactorLabel, HermitianOperator, HilbertLayout, QuantumState};

/// Largest tolerated Fock-space tail of the displaced vacuum.
pub const TRUNCATION_TOL: f64 = 1e-4;

/// ChaCha stream used for setting sampling; measurement noise uses stream 1.
const SETTINGS_STREAM: u64 = 0;
const NOISE_STREAM: u64 = 1;

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MeasurementSetting {
    pub alpha1: C64,
    pub tau1: f64,
    pub alpha2: C64,
    pub tau2: f64,
}

impl MeasurementSetting {
    pub fn new(alpha1: C64, tau1: f64, alpha2: C64, tau2: f64) -> Result<Self> {
        let s = Self { alpha1, tau1, alpha2, tau2 };
        s.validate(None)?;
        Ok(s)
    }

    /// Both cavities undisplaced at `τ = 0`, i.e. the identity observable.
    pub fn identity() -> Self {
        Self { alpha1: ZERO, tau1: 0.0, alpha2: ZERO, tau2: 0.0 }
    }

    pub fn validate(&self, radius: Option<f64>) -> Result<()> {
        for tau in [self.tau1, self.tau2] {
            if !(0.0..=PI).contains(&tau) {
                return Err(Error::InvalidParameter(format!("tau = {tau} outside [0, π]")));
            }
        }
        for a in [self.alpha1, self.alpha2] {
            if !a.re.is_finite() || !a.im.is_finite() {
                return Err(Error::InvalidParameter("displacement must be finite".into()));
            }
            if let Some(r) = radius {
                if a.norm() > r * (1.0 + 1e-12) {
                    return Err(Error::InvalidParameter(format!("|alpha| = {} exceeds radius {r}", a.norm())));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MeasurementEntry {
    pub setting: MeasurementSetting,
    pub outcome: f64,
    pub sigma: f64,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MeasurementRecord {
    pub entries: Vec<MeasurementEntry>,
    pub seed: u64,
}

impl MeasurementRecord {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn settings(&self) -> Vec<MeasurementSetting> {
        self.entries.iter().map(|e| e.setting).collect()
    }

    /// First `k` entries, same seed.
    pub fn prefix(&self, k: usize) -> Self {
        Self { entries: self.entries[..k.min(self.entries.len())].to_vec(), seed: self.seed }
    }

    pub fn validate(&self) -> Result<()> {
        for (j, e) in self.entries.iter().enumerate() {
            e.setting.validate(None)?;
            if !e.outcome.is_finite() || !(e.sigma >= 0.0) {
                return Err(Error::InvalidParameter(format!("record row {j}: non-finite outcome or negative sigma")));
            }
            if e.outcome.abs() > 1.0 + 5.0 * e.sigma + 1e-9 {
                return Err(Error::InvalidParameter(format!("record row {j}: |outcome| exceeds 1 + 5σ")));
            }
        }
        Ok(())
    }
}

/// Mass of the displaced vacuum outside the first `dim` Fock levels.
pub fn coherent_tail(alpha_abs: f64, dim: usize) -> f64 {
    let mean = alpha_abs * alpha_abs;
    let mut term = (-mean).exp();
    let mut kept = 0.0;
    for n in 0..dim {
        if n > 0 {
            term *= mean / n as f64;
        }
        kept += term;
    }
    (1.0 - kept).max(0.0)
}

fn cosines(tau: f64, dim: usize) -> Vec<f64> {
    (0..dim).map(|n| (2.0 * (n as f64).sqrt() * tau).cos()).collect()
}

fn cavity_layout(label: FactorLabel, dim: usize) -> Result<HilbertLayout> {
    HilbertLayout::single(label, dim)
}

/// `M(α, τ)` on exactly `dim` Fock levels (truncated displacement).
///
/// Eigenvalues are `cos(2√n τ)`, `n < dim`, with eigenvectors `D†(α)|n>` in
/// the truncated space. Fails when the displaced vacuum leaks more than
/// [`TRUNCATION_TOL`] past `dim` levels.
pub fn observable(alpha: C64, tau: f64, dim: usize) -> Result<HermitianOperator> {
    if dim == 0 {
        return Err(Error::InvalidParameter("dimension must be positive".into()));
    }
    let tail = coherent_tail(alpha.norm(), dim);
    if tail > TRUNCATION_TOL {
        return Err(Error::InsufficientTruncation(tail));
    }
    let c = cosines(tau, dim);
    let m = if dim == 1 || alpha == ZERO {
        CMatrix::from_real_diagonal(&c)
    } else {
        let d = displacement(alpha, dim);
        let cd = CMatrix::from_fn(dim, dim, |i, j| d[(i, j)] * c[i]);
        d.adjoint().matmul(&cd).hermitian_part()
    };
    HermitianOperator::new(cavity_layout(FactorLabel::C1, dim)?, m)
}

/// Padded size for [`working_observable`]: the displacement rule with the
/// tail margin doubled, which keeps the cropped block accurate to ~1e-12.
pub fn observable_padding(alpha_abs: f64, dim: usize) -> usize {
    let margin = (6.0 * (alpha_abs * alpha_abs + 1.0).sqrt()).ceil() as usize;
    displacement_truncation(alpha_abs, dim.saturating_sub(1)) + margin
}

/// `M(α, τ)` built with padding and cropped to `dim` levels.
pub fn working_observable(alpha: C64, tau: f64, dim: usize) -> CMatrix {
    if alpha == ZERO {
        return CMatrix::from_real_diagonal(&cosines(tau, dim));
    }
    let pad = observable_padding(alpha.norm(), dim);
    let c = cosines(tau, pad);
    let cols: Vec<Vec<C64>> = (0..dim).map(|m| displaced_fock(alpha, pad, m)).collect();
    let mut out = CMatrix::zeros(dim, dim);
    for j in 0..dim {
        for i in 0..=j {
            let mut acc = ZERO;
            for n in 0..pad {
                acc += cols[i][n].conj() * cols[j][n] * c[n];
            }
            out[(i, j)] = acc;
            out[(j, i)] = acc.conj();
        }
    }
    for i in 0..dim {
        out[(i, i)] = C64::new(out[(i, i)].re, 0.0);
    }
    out
}

/// Two-cavity layout `[(C1, d1), (C2, d2)]` used by records and estimators.
pub fn cavity_pair_layout(dims: [usize; 2]) -> Result<HilbertLayout> {
    HilbertLayout::new(vec![(FactorLabel::C1, dims[0]), (FactorLabel::C2, dims[1])])
}

/// `M(α1, τ1) ⊗ M(α2, τ2)` on the working truncation.
pub fn correlated_observable(setting: &MeasurementSetting, dims: [usize; 2]) -> Result<HermitianOperator> {
    setting.validate(None)?;
    let a = working_observable(setting.alpha1, setting.tau1, dims[0]);
    let b = working_observable(setting.alpha2, setting.tau2, dims[1]);
    HermitianOperator::new(cavity_pair_layout(dims)?, a.kron(&b))
}

/// `Tr[(A ⊗ B) ρ]` without forming the product.
fn correlated_expectation(a: &CMatrix, b: &CMatrix, rho: &CMatrix) -> f64 {
    let (d1, d2) = (a.rows(), b.rows());
    let mut acc = ZERO;
    for i in 0..d1 {
        for j in 0..d1 {
            let aij = a[(i, j)];
            if aij == ZERO {
                continue;
            }
            for k in 0..d2 {
                for l in 0..d2 {
                    acc += aij * b[(k, l)] * rho[(j * d2 + l, i * d2 + k)];
                }
            }
        }
    }
    acc.re
}

/// `τ` uniform on `[0, π]`, `α` uniform on the disc of the given radius.
pub fn sample_settings(count: usize, radius: f64, seed: u64) -> Result<Vec<MeasurementSetting>> {
    if count == 0 {
        return Err(Error::InvalidParameter("at least one setting is required".into()));
    }
    if !(radius >= 0.0) || !radius.is_finite() {
        return Err(Error::InvalidParameter("sampling radius must be nonnegative".into()));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(SETTINGS_STREAM);
    let alpha = |rng: &mut ChaCha20Rng| {
        let r = radius * rng.random::<f64>().sqrt();
        let theta = 2.0 * PI * rng.random::<f64>();
        C64::from_polar(r, theta)
    };
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let alpha1 = alpha(&mut rng);
        let tau1 = PI * rng.random::<f64>();
        let alpha2 = alpha(&mut rng);
        let tau2 = PI * rng.random::<f64>();
        out.push(MeasurementSetting { alpha1, tau1, alpha2, tau2 });
    }
    Ok(out)
}

/// Exact correlated expectations for every setting.
pub fn expectations(rho: &QuantumState, settings: &[MeasurementSetting]) -> Result<Vec<f64>> {
    let labels = rho.layout().labels();
    if labels != [FactorLabel::C1, FactorLabel::C2] {
        return Err(Error::LayoutMismatch(format!("records need a (C1, C2) state, got {labels:?}")));
    }
    let dims = rho.layout().dims();
    let m = rho.to_density_matrix();
    settings
        .iter()
        .map(|s| {
            s.validate(None)?;
            let a = working_observable(s.alpha1, s.tau1, dims[0]);
            let b = working_observable(s.alpha2, s.tau2, dims[1]);
            Ok(correlated_expectation(&a, &b, &m))
        })
        .collect()
}

/// Outcomes `Tr(M_j ρ) + σ W_j` with independent standard normal `W_j`.
pub fn generate_record(rho: &QuantumState, settings: &[MeasurementSetting], sigma: f64, seed: u64) -> Result<MeasurementRecord> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter("sigma must be nonnegative".into()));
    }
    let exact = expectations(rho, settings)?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(NOISE_STREAM);
    let entries = settings
        .iter()
        .zip(exact)
        .map(|(s, m)| {
            let w: f64 = rng.sample(StandardNormal);
            MeasurementEntry { setting: *s, outcome: m + sigma * w, sigma }
        })
        .collect();
    Ok(MeasurementRecord { entries, seed })
}

/// Orthonormal real coordinates of a Hermitian matrix: diagonal entries,
/// then `√2 Re` and `√2 Im` of the strict upper triangle. The map is an
/// isometry from the Hilbert-Schmidt inner product.
pub fn hermitian_coordinates(m: &CMatrix) -> Vec<f64> {
    let d = m.rows();
    let s = 2f64.sqrt();
    let mut out = Vec::with_capacity(d * d);
    for i in 0..d {
        out.push(m[(i, i)].re);
    }
    for j in 0..d {
        for i in 0..j {
            out.push(s * m[(i, j)].re);
            out.push(s * m[(i, j)].im);
        }
    }
    out
}

/// Inverse of [`hermitian_coordinates`].
pub fn from_hermitian_coordinates(x: &[f64], d: usize) -> CMatrix {
    assert_eq!(x.len(), d * d);
    let s = 1.0 / 2f64.sqrt();
    let mut m = CMatrix::zeros(d, d);
    for i in 0..d {
        m[(i, i)] = C64::new(x[i], 0.0);
    }
    let mut k = d;
    for j in 0..d {
        for i in 0..j {
            let z = C64::new(x[k] * s, x[k + 1] * s);
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
            k += 2;
        }
    }
    m
}

/// Dimension of the real span of the observables and the identity.
///
/// `dims` has one entry (first cavity of each setting only) or two. Rank is
/// decided by singular values above `1e-8` times the largest.
pub fn completeness_rank(settings: &[MeasurementSetting], dims: &[usize]) -> Result<usize> {
    let ops: Vec<CMatrix> = match dims {
        [d] => settings.iter().map(|s| working_observable(s.alpha1, s.tau1, *d)).collect(),
        [d1, d2] => settings
            .iter()
            .map(|s| correlated_observable(s, [*d1, *d2]).map(HermitianOperator::into_matrix))
            .collect::<Result<_>>()?,
        _ => return Err(Error::InvalidParameter("one or two cavity dimensions expected".into())),
    };
    let d: usize = dims.iter().product();
    let mut rows = vec![hermitian_coordinates(&CMatrix::identity(d))];
    rows.extend(ops.iter().map(hermitian_coordinates));
    let a = RMatrix::from_fn(rows.len(), d * d, |i, j| rows[i][j]);
    let sv = singular_values(&a);
    let top = sv.first().copied().unwrap_or(0.0);
    Ok(sv.iter().filter(|&&s| s > 1e-8 * top).count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::hermitian_eigen;
    use crate::protocol::NoonTarget;

    const TAUS: [f64; 4] = [0.0, 0.4, 1.3, 2.9];

    #[test]
    fn zero_displacement_is_diagonal() {
        for tau in TAUS {
            let m = observable(ZERO, tau, 6).unwrap();
            for i in 0..6 {
                for j in 0..6 {
                    let want = if i == j { (2.0 * (i as f64).sqrt() * tau).cos() } else { 0.0 };
                    assert!((m.matrix()[(i, j)] - C64::new(want, 0.0)).norm() < 1e-15);
                }
            }
            // vacuum expectation
            assert!((m.matrix()[(0, 0)].re - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_time_is_identity() {
        let alpha = C64::new(0.8, -0.5);
        let m = observable(alpha, 0.0, 20).unwrap();
        assert!((m.matrix() - &CMatrix::identity(20)).max_abs() < 1e-12);
        assert!((&working_observable(alpha, 0.0, 4) - &CMatrix::identity(4)).max_abs() < 1e-10);
    }

    #[test]
    fn spectrum_is_the_cosines() {
        let alpha = C64::new(1.1, 0.7);
        let tau = 0.9;
        let dim = 25;
        let m = observable(alpha, tau, dim).unwrap();
        let mut want = cosines(tau, dim);
        want.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let got = m.eigenvalues();
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-10);
        }
        // eigenvectors are displaced Fock states
        let d = displacement(alpha, dim);
        for n in 0..dim {
            let v: Vec<C64> = (0..dim).map(|i| d[(n, i)].conj()).collect();
            let mv = m.matrix().mul_vec(&v);
            for i in 0..dim {
                assert!((mv[i] - v[i] * want_cos(tau, n)).norm() < 1e-10);
            }
        }
    }

    fn want_cos(tau: f64, n: usize) -> f64 {
        (2.0 * (n as f64).sqrt() * tau).cos()
    }

    #[test]
    fn insufficient_truncation_is_reported() {
        assert!(matches!(observable(C64::new(2.0, 0.0), 1.0, 5), Err(Error::InsufficientTruncation(_))));
        assert!(observable(C64::new(2.0, 0.0), 1.0, 20).is_ok());
    }

    #[test]
    fn working_observable_matches_displaced_diagonal() {
        // D† M(0) D restricted to the low block, with D from a large space
        let alpha = C64::new(-0.6, 1.2);
        let tau = 1.7;
        let big = 60;
        let d = displacement(alpha, big);
        let c = CMatrix::from_real_diagonal(&cosines(tau, big));
        let full = d.adjoint().matmul(&c.matmul(&d));
        let w = working_observable(alpha, tau, 4);
        let err = (&full.crop(4) - &w).max_abs();
        assert!(err < 1e-10, "{err:e}");
    }

    #[test]
    fn identity_setting_gives_identity() {
        let m = correlated_observable(&MeasurementSetting::identity(), [3, 3]).unwrap();
        assert!((m.matrix() - &CMatrix::identity(9)).max_abs() < 1e-15);
    }

    #[test]
    fn fock_and_noon_expectations_at_zero_displacement() {
        let n = 3;
        let d = n + 1;
        let layout = cavity_pair_layout([d, d]).unwrap();
        let fock = QuantumState::basis(layout.clone(), &[n, 0]);
        let noon = NoonTarget::new(n, 0.3).unwrap().cavity_state(d);
        let mixture = {
            let m = &fock.to_density_matrix().scale_real(0.5)
                + &QuantumState::basis(layout.clone(), &[0, n]).to_density_matrix().scale_real(0.5);
            QuantumState::from_density(layout, m).unwrap()
        };
        for &t1 in &TAUS {
            for &t2 in &TAUS {
                let s = MeasurementSetting::new(ZERO, t1, ZERO, t2).unwrap();
                let e = expectations(&fock, &[s]).unwrap()[0];
                assert!((e - want_cos(t1, n)).abs() < 1e-14);
                let e_noon = expectations(&noon, &[s]).unwrap()[0];
                assert!((e_noon - 0.5 * (want_cos(t1, n) + want_cos(t2, n))).abs() < 1e-14);
                let e_mix = expectations(&mixture, &[s]).unwrap()[0];
                assert!((e_noon - e_mix).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn expectation_matches_dense_product() {
        let d = 3;
        let layout = cavity_pair_layout([d, d]).unwrap();
        let rho = QuantumState::maximally_mixed(layout.clone());
        let v: Vec<C64> = (0..9).map(|i| C64::new((i as f64 * 0.37).sin(), (i as f64 * 0.91).cos())).collect();
        let norm = crate::linalg::cnorm2(&v);
        let pure = QuantumState::from_vector(layout, v.iter().map(|x| x / norm).collect()).unwrap();
        let s = MeasurementSetting::new(C64::new(0.5, 0.3), 1.0, C64::new(-0.2, 0.9), 2.2).unwrap();
        let m = correlated_observable(&s, [d, d]).unwrap();
        for st in [rho, pure] {
            let want = m.expectation(&st).unwrap();
            assert!((expectations(&st, &[s]).unwrap()[0] - want).abs() < 1e-13);
        }
    }

    #[test]
    fn maximally_mixed_record_without_noise() {
        let d = 3;
        let rho = QuantumState::maximally_mixed(cavity_pair_layout([d, d]).unwrap());
        let (t1, t2) = (0.7, 2.1);
        let s = MeasurementSetting::new(ZERO, t1, ZERO, t2).unwrap();
        let rec = generate_record(&rho, &[s, MeasurementSetting::identity()], 0.0, 5).unwrap();
        let sum = |t: f64| (0..d).map(|n| want_cos(t, n)).sum::<f64>();
        assert!((rec.entries[0].outcome - sum(t1) * sum(t2) / 9.0).abs() < 1e-14);
        assert!((rec.entries[1].outcome - 1.0).abs() < 1e-14);
        rec.validate().unwrap();
    }

    #[test]
    fn record_noise_has_requested_spread() {
        let d = 2;
        let rho = QuantumState::maximally_mixed(cavity_pair_layout([d, d]).unwrap());
        let settings = vec![MeasurementSetting::identity(); 10_000];
        let sigma = 0.05;
        let rec = generate_record(&rho, &settings, sigma, 11).unwrap();
        let dev: Vec<f64> = rec.entries.iter().map(|e| e.outcome - 1.0).collect();
        let mean = dev.iter().sum::<f64>() / dev.len() as f64;
        let var = dev.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (dev.len() - 1) as f64;
        assert!((var.sqrt() / sigma - 1.0).abs() < 0.03);
    }

    #[test]
    fn settings_are_reproducible_and_in_range() {
        let a = sample_settings(200, 3.0, 42).unwrap();
        assert_eq!(a, sample_settings(200, 3.0, 42).unwrap());
        assert_ne!(a, sample_settings(200, 3.0, 43).unwrap());
        for s in &a {
            s.validate(Some(3.0)).unwrap();
        }
        assert!(sample_settings(0, 1.0, 1).is_err());
    }

    #[test]
    fn disc_sampling_second_moment() {
        let radius = 2.0;
        let s = sample_settings(100_000, radius, 7).unwrap();
        let mean = s.iter().map(|x| x.alpha1.norm_sqr()).sum::<f64>() / s.len() as f64;
        assert!((mean / (radius * radius / 2.0) - 1.0).abs() < 0.01);
    }

    #[test]
    fn coordinates_round_trip_and_isometry() {
        let a = CMatrix::from_fn(3, 3, |i, j| C64::new((i + 2 * j) as f64, i as f64 - j as f64)).hermitian_part();
        let b = CMatrix::from_fn(3, 3, |i, j| C64::new((i * j) as f64 * 0.3, (i + j) as f64 * 0.1)).hermitian_part();
        let xa = hermitian_coordinates(&a);
        assert!((&from_hermitian_coordinates(&xa, 3) - &a).max_abs() < 1e-15);
        let ip: f64 = xa.iter().zip(hermitian_coordinates(&b)).map(|(x, y)| x * y).sum();
        assert!((ip - a.trace_product(&b).re).abs() < 1e-12);
    }

    #[test]
    fn completeness_ranks() {
        let single = sample_settings(1, 1.0, 3).unwrap();
        assert_eq!(completeness_rank(&single, &[2, 2]).unwrap(), 2);
        assert_eq!(completeness_rank(&[MeasurementSetting::identity()], &[2, 2]).unwrap(), 1);
        let four = sample_settings(4, 1.0, 9).unwrap();
        assert_eq!(completeness_rank(&four, &[2]).unwrap(), 4);
        let many = sample_settings(24, 1.0, 9).unwrap();
        assert_eq!(completeness_rank(&many, &[2, 2]).unwrap(), 16);
        let mut last = 0;
        for k in 1..=24 {
            let r = completeness_rank(&many[..k], &[2, 2]).unwrap();
            assert!(r >= last && r <= 16);
            last = r;
        }
    }

    #[test]
    fn observable_spectrum_in_unit_interval() {
        for (k, s) in sample_settings(20, 2.0, 1).unwrap().iter().enumerate() {
            let m = correlated_observable(s, [3, 3]).unwrap();
            let ev = hermitian_eigen(m.matrix()).values;
            assert!(ev[0] >= -1.0 - 1e-12 && ev[ev.len() - 1] <= 1.0 + 1e-12, "setting {k}");
        }
    }
}
