//! Dense symmetric eigensolvers for small correlation matrices.
//!
//! [`jacobi`] returns the full spectrum with eigenvectors. [`largest_eigenvalue`]
//! only needs the top of the spectrum and is the hot path of the sampling
//! experiment: Householder tridiagonalization followed by Sturm-sequence bisection.

use crate::error::{Error, Result};

/// Largest allowed `|a_ij - a_ji|` for an input to count as symmetric.
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;

const MAX_SWEEPS: usize = 64;

/// Eigenvalues in descending order with matching unit eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

pub fn check_symmetric(a: &[f64], n: usize) -> Result<()> {
    assert_eq!(a.len(), n * n, "matrix storage does not match its size");
    for i in 0..n {
        for j in (i + 1)..n {
            let gap = (a[i * n + j] - a[j * n + i]).abs();
            if !(gap <= SYMMETRY_TOLERANCE) {
                return Err(Error::NotSymmetric { row: i, col: j, gap });
            }
        }
    }
    Ok(())
}

/// Cyclic Jacobi eigendecomposition of the row-major symmetric matrix `a` (size `n`).
pub fn jacobi(a: &[f64], n: usize) -> Result<SymmetricEigen> {
    check_symmetric(a, n)?;
    let mut m = a.to_vec();
    // symmetrize exactly so rotations act on a truly symmetric matrix
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[i * n + j] + m[j * n + i]);
            m[i * n + j] = avg;
            m[j * n + i] = avg;
        }
    }
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    let scale: f64 = m.iter().map(|x| x * x).sum::<f64>().sqrt();
    let tiny = (f64::EPSILON * scale).powi(2) * 1e-2;
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j] * m[i * n + j])
            .sum();
        if off <= tiny {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                m[p * n + q] = 0.0;
                m[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[j * n + j].total_cmp(&m[i * n + i]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| m[i * n + i]).collect();
    let vectors = order
        .iter()
        .map(|&col| (0..n).map(|row| v[row * n + col]).collect())
        .collect();
    Ok(SymmetricEigen { values, vectors })
}

/// Largest eigenvalue of a symmetric matrix, without eigenvectors.
///
/// `a` is consumed as scratch space. Symmetry is assumed, not checked.
pub fn largest_eigenvalue(a: &mut [f64], n: usize) -> f64 {
    debug_assert_eq!(a.len(), n * n);
    match n {
        0 => f64::NAN,
        1 => a[0],
        _ => {
            let (diag, off) = tridiagonalize(a, n);
            largest_tridiagonal(&diag, &off)
        }
    }
}

/// Householder reduction to tridiagonal form. Returns `(diagonal, off_diagonal)`.
fn tridiagonalize(a: &mut [f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n - 1];
    let mut v = vec![0.0; n];
    let mut w = vec![0.0; n];
    for k in 0..n.saturating_sub(2) {
        let lo = k + 1;
        let norm = (lo..n).map(|i| a[i * n + k] * a[i * n + k]).sum::<f64>().sqrt();
        diag[k] = a[k * n + k];
        if norm == 0.0 {
            off[k] = 0.0;
            continue;
        }
        let x0 = a[lo * n + k];
        let alpha = if x0 >= 0.0 { -norm } else { norm };
        for i in lo..n {
            v[i] = a[i * n + k];
        }
        v[lo] -= alpha;
        let vtv: f64 = (lo..n).map(|i| v[i] * v[i]).sum();
        if vtv == 0.0 {
            off[k] = x0;
            continue;
        }
        let beta = 2.0 / vtv;
        // p = beta * A22 v
        for i in lo..n {
            let row = &a[i * n + lo..i * n + n];
            w[i] = beta * row.iter().zip(&v[lo..n]).map(|(x, y)| x * y).sum::<f64>();
        }
        let kappa = 0.5 * beta * (lo..n).map(|i| v[i] * w[i]).sum::<f64>();
        for i in lo..n {
            w[i] -= kappa * v[i];
        }
        for i in lo..n {
            for j in lo..n {
                a[i * n + j] -= v[i] * w[j] + w[i] * v[j];
            }
        }
        off[k] = alpha;
    }
    diag[n - 2] = a[(n - 2) * n + (n - 2)];
    diag[n - 1] = a[(n - 1) * n + (n - 1)];
    off[n - 2] = a[(n - 1) * n + (n - 2)];
    (diag, off)
}

/// Number of eigenvalues of the tridiagonal matrix strictly below `x`.
fn sturm_count(diag: &[f64], off: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = diag[0] - x;
    if q < 0.0 {
        count += 1;
    }
    for i in 1..diag.len() {
        let denom = if q == 0.0 { f64::EPSILON * (off[i - 1].abs() + f64::MIN_POSITIVE) } else { q };
        q = diag[i] - x - off[i - 1] * off[i - 1] / denom;
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

fn largest_tridiagonal(diag: &[f64], off: &[f64]) -> f64 {
    let n = diag.len();
    let radius = |i: usize| {
        let left = if i > 0 { off[i - 1].abs() } else { 0.0 };
        let right = if i + 1 < n { off[i].abs() } else { 0.0 };
        left + right
    };
    let mut lo = (0..n).map(|i| diag[i] - radius(i)).fold(f64::INFINITY, f64::min);
    let mut hi = (0..n).map(|i| diag[i] + radius(i)).fold(f64::NEG_INFINITY, f64::max);
    let span = hi.abs().max(lo.abs());
    hi += f64::EPSILON * span;
    lo -= f64::EPSILON * span;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= 2.0 * f64::EPSILON * span {
            break;
        }
        if sturm_count(diag, off, mid) == n {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}
