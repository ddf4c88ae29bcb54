//! Collectivity and uniformity of rolling correlation spectra.
//!
//! For a correlation matrix of size `N` the normalized leading eigenvalue
//! `lambda_1 / N` measures how much of the total variance the market mode
//! carries. Uniformity `h = |<v_1, 1>| / (|v_1| |1|)` measures how evenly the
//! assets load on that mode.

use rayon::prelude::*;
use serde::Serialize;

use crate::correlation::{self, CorrelationMatrix, WindowSpec};
use crate::eigen::{self, SymmetricEigen};
use crate::error::Result;
use crate::ingest::ReturnsMatrix;

/// `lambda_1 - lambda_2` below this marks the leading eigenspace as degenerate.
pub const DEGENERACY_GAP: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSummary {
    pub window: WindowSpec,
    pub eigenvalues: Vec<f64>,
    pub normalized_leading: f64,
    /// Oriented so that its largest-magnitude component is positive.
    pub leading_vector: Vec<f64>,
    pub uniformity: f64,
    pub degenerate: bool,
}

/// Eigenvalues (descending) and orthonormal eigenvectors of a correlation matrix.
pub fn symmetric_eigen(matrix: &CorrelationMatrix) -> Result<SymmetricEigen> {
    eigen::jacobi(matrix.entries(), matrix.size())
}

/// Clamps `lambda / n` into `[1/n, 1]`, absorbing rounding at the ends of the range.
pub fn normalize(lambda: f64, n: usize) -> f64 {
    let n = n as f64;
    (lambda / n).clamp(1.0 / n, 1.0)
}

pub fn normalized_leading_eigenvalue(matrix: &CorrelationMatrix) -> Result<f64> {
    Ok(summarize(matrix)?.normalized_leading)
}

pub fn uniformity(matrix: &CorrelationMatrix) -> Result<f64> {
    Ok(summarize(matrix)?.uniformity)
}

/// `|<v, 1>| / (|v| sqrt(n))`; invariant under `v -> -v`.
pub fn uniformity_of(v: &[f64]) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return 0.0;
    }
    let h = v.iter().sum::<f64>().abs() / (norm * (v.len() as f64).sqrt());
    h.min(1.0)
}

/// Flips `v` so that its largest-magnitude component (first on ties) is positive.
pub fn orient(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|x| *x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

pub fn summarize(matrix: &CorrelationMatrix) -> Result<SpectralSummary> {
    let SymmetricEigen { values, mut vectors } = symmetric_eigen(matrix)?;
    let n = matrix.size();
    let mut leading = vectors.swap_remove(0);
    orient(&mut leading);
    let degenerate = values.len() > 1 && values[0] - values[1] < DEGENERACY_GAP;
    Ok(SpectralSummary {
        window: matrix.window(),
        normalized_leading: normalize(values[0], n),
        uniformity: uniformity_of(&leading),
        leading_vector: leading,
        eigenvalues: values,
        degenerate,
    })
}

/// One point of a rolling spectrum series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectrumPoint {
    /// 1-based index of the window's last return column.
    pub end: usize,
    pub lambda1_tilde: f64,
    pub h: f64,
    pub degenerate: bool,
}

/// `(t, lambda_1(t)/N, h(t))` for every window `t = tau..=T`, in time order.
pub fn rolling_spectra(
    returns: &ReturnsMatrix,
    subset: &[usize],
    tau: usize,
    variance_floor: f64,
) -> Result<Vec<SpectrumPoint>> {
    let matrices = correlation::rolling_correlations(returns, subset, tau, variance_floor)?;
    matrices
        .par_iter()
        .map(|m| {
            summarize(m).map(|s| SpectrumPoint {
                end: s.window.end,
                lambda1_tilde: s.normalized_leading,
                h: s.uniformity,
                degenerate: s.degenerate,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(n: usize, entries: Vec<f64>) -> CorrelationMatrix {
        CorrelationMatrix::from_entries(n, entries).unwrap()
    }

    fn identity(n: usize) -> CorrelationMatrix {
        let mut e = vec![0.0; n * n];
        (0..n).for_each(|i| e[i * n + i] = 1.0);
        matrix(n, e)
    }

    #[test]
    fn scalar_matrix() {
        let s = summarize(&matrix(1, vec![1.0])).unwrap();
        assert_eq!(s.normalized_leading, 1.0);
        assert_eq!(s.uniformity, 1.0);
        assert!(!s.degenerate);
    }

    #[test]
    fn identity_is_flat_and_degenerate() {
        let s = summarize(&identity(5)).unwrap();
        assert!((s.normalized_leading - 0.2).abs() < 1e-15);
        assert!(s.degenerate);
    }

    #[test]
    fn perfect_correlation() {
        let s = summarize(&matrix(4, vec![1.0; 16])).unwrap();
        assert!((s.normalized_leading - 1.0).abs() < 1e-12);
        assert!((s.uniformity - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_by_two_uniformity_follows_sign() {
        let pos = summarize(&matrix(2, vec![1.0, 0.4, 0.4, 1.0])).unwrap();
        assert!((pos.uniformity - 1.0).abs() < 1e-12);
        let neg = summarize(&matrix(2, vec![1.0, -0.4, -0.4, 1.0])).unwrap();
        assert!(neg.uniformity.abs() < 1e-12);
        assert!((neg.normalized_leading - 0.7).abs() < 1e-12);
    }

    #[test]
    fn uniformity_sign_invariant() {
        let v = [0.3, -0.1, 0.8, 0.2];
        let neg: Vec<f64> = v.iter().map(|x| -x).collect();
        assert_eq!(uniformity_of(&v), uniformity_of(&neg));
    }

    #[test]
    fn orientation() {
        let mut v = vec![0.1, -0.9, 0.3];
        orient(&mut v);
        assert_eq!(v, vec![-0.1, 0.9, -0.3]);
    }
}
