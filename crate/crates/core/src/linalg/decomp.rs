use alloc::vec::Vec;
use num_traits::Float;

use super::{dot, RMatrix};

/// Lower Cholesky factor of a symmetric positive-definite matrix.
///
/// Returns `None` when a pivot is not strictly positive.
pub fn cholesky(a: &RMatrix) -> Option<RMatrix> {
    let n = a.rows();
    assert_eq!(n, a.cols());
    let mut l = RMatrix::zeros(n, n);
    // row-major scratch for contiguous inner products
    let mut rows: Vec<f64> = alloc::vec![0.0; n * n];
    for j in 0..n {
        let rj = &rows[j * n..j * n + j];
        let mut diag = a[(j, j)] - dot(rj, rj);
        if diag.is_nan() || diag <= 0.0 {
            return None;
        }
        diag = diag.sqrt();
        rows[j * n + j] = diag;
        l[(j, j)] = diag;
        for i in (j + 1)..n {
            let (head, tail) = rows.split_at_mut(i * n);
            let ri = &tail[..j];
            let rj = &head[j * n..j * n + j];
            let v = (a[(i, j)] - dot(ri, rj)) / diag;
            tail[j] = v;
            l[(i, j)] = v;
        }
    }
    Some(l)
}

/// Solves `L L^T x = b` given the lower factor.
pub fn cholesky_solve(l: &RMatrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows();
    assert_eq!(b.len(), n);
    let mut y = b.to_vec();
    for i in 0..n {
        let mut s = y[i];
        for k in 0..i {
            s -= l[(i, k)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    for i in (0..n).rev() {
        let col = l.column(i);
        let s = y[i] - dot(&col[i + 1..], &y[i + 1..]);
        y[i] = s / l[(i, i)];
    }
    y
}

/// Singular values (descending) of a real matrix by one-sided Jacobi.
///
/// Works on the orientation with fewer columns; accurate to high relative
/// precision, which matters for rank decisions at small thresholds.
pub fn singular_values(a: &RMatrix) -> Vec<f64> {
    let work = if a.cols() > a.rows() { a.transpose() } else { a.clone() };
    let m = work.rows();
    let n = work.cols();
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| work.column(j).to_vec()).collect();
    let eps = f64::EPSILON;
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if gamma.abs() <= eps * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (lo, hi) = cols.split_at_mut(q);
                let cp = &mut lo[p];
                let cq = &mut hi[0];
                for k in 0..m {
                    let x = cp[k];
                    let y = cq[k];
                    cp[k] = c * x - s * y;
                    cq[k] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = cols.iter().map(|c| dot(c, c).sqrt()).collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap_or(core::cmp::Ordering::Equal));
    sv
}
