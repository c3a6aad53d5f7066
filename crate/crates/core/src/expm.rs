//! Action of a matrix exponential on a vector by scaled Taylor stepping.
//!
//! The full exponential is never formed: the generator is only touched through
//! matrix-vector products, so sparse and factor-local operators work as well as
//! dense ones.

use alloc::vec;
use alloc::vec::Vec;
use num_traits::Float;

use crate::linalg::{CMatrix, C64, ZERO};

/// A square complex linear map available through products with vectors.
pub trait LinearOperator {
    fn dim(&self) -> usize;

    /// `y ← A x`
    fn apply(&self, x: &[C64], y: &mut [C64]);

    /// Upper bound on the induced 1-norm.
    fn norm1_bound(&self) -> f64;
}

impl LinearOperator for CMatrix {
    fn dim(&self) -> usize {
        self.rows()
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        self.mul_vec_into(x, y);
    }

    fn norm1_bound(&self) -> f64 {
        self.norm1()
    }
}

/// Largest 1-norm of `scale·A` handled by a single Taylor sub-step.
const STEP_NORM: f64 = 4.0;
const MAX_TERMS: usize = 80;

/// Computes `exp(scale·A) v`.
pub fn expm_action<A: LinearOperator + ?Sized>(op: &A, scale: C64, v: &[C64]) -> Vec<C64> {
    let n = op.dim();
    assert_eq!(v.len(), n, "vector length does not match operator");
    let norm = op.norm1_bound() * scale.norm();
    if norm == 0.0 || n == 0 {
        return v.to_vec();
    }
    let steps = (norm / STEP_NORM).ceil().max(1.0) as usize;
    let h = scale / steps as f64;
    let mut out = v.to_vec();
    let mut term = vec![ZERO; n];
    let mut next = vec![ZERO; n];
    for _ in 0..steps {
        let base = l1(&out);
        if base == 0.0 {
            break;
        }
        term.copy_from_slice(&out);
        let mut prev_norm = f64::INFINITY;
        for k in 1..=MAX_TERMS {
            op.apply(&term, &mut next);
            let c = h / k as f64;
            for (t, x) in term.iter_mut().zip(&next) {
                *t = x * c;
            }
            for (o, t) in out.iter_mut().zip(&term) {
                *o += t;
            }
            let tn = l1(&term);
            if tn + prev_norm <= 1e-17 * base {
                break;
            }
            prev_norm = tn;
        }
    }
    out
}

/// Computes `exp(-i t H) v`.
pub fn evolve_vector<A: LinearOperator + ?Sized>(h: &A, t: f64, v: &[C64]) -> Vec<C64> {
    expm_action(h, C64::new(0.0, -t), v)
}

/// Dense `exp(scale·A)` assembled column by column from [`expm_action`].
pub fn expm_dense<A: LinearOperator + ?Sized>(op: &A, scale: C64) -> CMatrix {
    let n = op.dim();
    let mut out = CMatrix::zeros(n, n);
    let mut e = vec![ZERO; n];
    for j in 0..n {
        e.iter_mut().for_each(|x| *x = ZERO);
        e[j] = C64::new(1.0, 0.0);
        let col = expm_action(op, scale, &e);
        out.column_mut(j).copy_from_slice(&col);
    }
    out
}

fn l1(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm()).sum()
}
