//! Windowed standardization and Pearson cross-correlation matrices.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ingest::ReturnsMatrix;

/// Rows whose population standard deviation falls below this are treated as constant.
pub const DEFAULT_VARIANCE_FLOOR: f64 = 1e-12;

/// A trailing window of `len` return columns ending (exclusive) at column `end`.
///
/// `end` runs over `len..=T`, so it equals the 1-based index of the window's
/// last return day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct WindowSpec {
    pub end: usize,
    pub len: usize,
}

impl WindowSpec {
    pub fn new(end: usize, len: usize, columns: usize) -> Result<Self> {
        if len == 0 || end < len || end > columns {
            return Err(Error::WindowOutOfRange { end, len, columns });
        }
        Ok(Self { end, len })
    }

    pub fn start(&self) -> usize {
        self.end - self.len
    }

    /// Column range covered by the window.
    pub fn columns(&self) -> std::ops::Range<usize> {
        self.start()..self.end
    }

    /// Index of the last column in the window.
    pub fn last(&self) -> usize {
        self.end - 1
    }
}

/// Every window of length `len` over `columns` return columns, in time order.
pub fn windows(columns: usize, len: usize) -> Result<Vec<WindowSpec>> {
    if len < 2 {
        return Err(Error::InvalidConfig(format!("window length {len} must be at least 2")));
    }
    if columns < len {
        return Err(Error::SeriesTooShort { columns, window: len });
    }
    Ok((len..=columns).map(|end| WindowSpec { end, len }).collect())
}

/// Standardized returns `R_i(s) = (r_i(s) - <r_i>) / sigma(r_i)` over one window.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedBlock {
    subset: Vec<usize>,
    window: WindowSpec,
    /// Row-major `subset.len() x window.len`.
    values: Vec<f64>,
    degenerate: Vec<bool>,
}

impl StandardizedBlock {
    pub fn subset(&self) -> &[usize] {
        &self.subset
    }

    pub fn window(&self) -> WindowSpec {
        self.window
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let len = self.window.len;
        &self.values[i * len..(i + 1) * len]
    }

    pub fn degenerate(&self) -> &[bool] {
        &self.degenerate
    }

    pub fn rows(&self) -> usize {
        self.subset.len()
    }
}

fn check_subset(subset: &[usize], rows: usize) -> Result<()> {
    if subset.is_empty() {
        return Err(Error::EmptySubset);
    }
    let mut seen = vec![false; rows];
    for &i in subset {
        if i >= rows || seen[i] {
            return Err(Error::InvalidSubset { index: i, rows });
        }
        seen[i] = true;
    }
    Ok(())
}

/// Standardizes each selected row over `window` using the population standard deviation.
///
/// Rows with `sigma < variance_floor` are flagged degenerate and zero-filled.
pub fn standardize_window(
    returns: &ReturnsMatrix,
    subset: &[usize],
    window: WindowSpec,
    variance_floor: f64,
) -> Result<StandardizedBlock> {
    check_subset(subset, returns.rows())?;
    let window = WindowSpec::new(window.end, window.len, returns.columns())?;
    let len = window.len;
    let mut values = Vec::with_capacity(subset.len() * len);
    let mut degenerate = Vec::with_capacity(subset.len());
    for &i in subset {
        let row = &returns.values()[i][window.columns()];
        let (mean, sigma) = mean_and_sigma(row);
        if sigma < variance_floor {
            values.extend(std::iter::repeat_n(0.0, len));
            degenerate.push(true);
        } else {
            values.extend(row.iter().map(|r| (r - mean) / sigma));
            degenerate.push(false);
        }
    }
    Ok(StandardizedBlock {
        subset: subset.to_vec(),
        window,
        values,
        degenerate,
    })
}

fn mean_and_sigma(row: &[f64]) -> (f64, f64) {
    let n = row.len() as f64;
    let mean = row.iter().sum::<f64>() / n;
    let var = row.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Symmetric correlation matrix of one window, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    subset: Vec<usize>,
    window: WindowSpec,
    entries: Vec<f64>,
}

impl CorrelationMatrix {
    /// Wraps a square row-major matrix. Used for synthetic inputs; no structure is checked
    /// beyond the shape.
    pub fn from_entries(size: usize, entries: Vec<f64>) -> Result<Self> {
        if size == 0 || entries.len() != size * size {
            return Err(Error::InvalidConfig(format!(
                "{} entries do not form a {size}x{size} matrix",
                entries.len()
            )));
        }
        Ok(Self {
            subset: (0..size).collect(),
            window: WindowSpec { end: 0, len: 0 },
            entries,
        })
    }

    pub fn size(&self) -> usize {
        self.subset.len()
    }

    pub fn subset(&self) -> &[usize] {
        &self.subset
    }

    pub fn window(&self) -> WindowSpec {
        self.window
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.size() + j]
    }

    pub fn trace(&self) -> f64 {
        (0..self.size()).map(|i| self.get(i, i)).sum()
    }

    /// Principal submatrix on positions `rows` (indices into this matrix, not the returns).
    pub fn principal(&self, rows: &[usize]) -> Self {
        let mut entries = Vec::with_capacity(rows.len() * rows.len());
        for &i in rows {
            for &j in rows {
                entries.push(self.get(i, j));
            }
        }
        Self {
            subset: rows.iter().map(|&i| self.subset[i]).collect(),
            window: self.window,
            entries,
        }
    }

    /// Copies the principal submatrix on `rows` into `out`, avoiding allocation in hot loops.
    pub fn principal_into(&self, rows: &[usize], out: &mut Vec<f64>) {
        out.clear();
        for &i in rows {
            let base = i * self.size();
            out.extend(rows.iter().map(|&j| self.entries[base + j]));
        }
    }
}

/// `Psi = (1/tau) R R^T`, with an exact unit diagonal and zero off-diagonal for degenerate rows.
pub fn correlation_matrix(block: &StandardizedBlock) -> CorrelationMatrix {
    let n = block.rows();
    let tau = block.window.len as f64;
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        entries[i * n + i] = 1.0;
        if block.degenerate[i] {
            continue;
        }
        let ri = block.row(i);
        for j in (i + 1)..n {
            if block.degenerate[j] {
                continue;
            }
            let dot: f64 = ri.iter().zip(block.row(j)).map(|(a, b)| a * b).sum();
            let psi = (dot / tau).clamp(-1.0, 1.0);
            entries[i * n + j] = psi;
            entries[j * n + i] = psi;
        }
    }
    CorrelationMatrix {
        subset: block.subset.clone(),
        window: block.window,
        entries,
    }
}

/// One correlation matrix per window `t = tau..=T`, in time order.
///
/// Windows are computed independently (in parallel on the ambient rayon pool);
/// the result does not depend on scheduling.
pub fn rolling_correlations(
    returns: &ReturnsMatrix,
    subset: &[usize],
    tau: usize,
    variance_floor: f64,
) -> Result<Vec<CorrelationMatrix>> {
    check_subset(subset, returns.rows())?;
    windows(returns.columns(), tau)?
        .into_par_iter()
        .map(|w| standardize_window(returns, subset, w, variance_floor).map(|b| correlation_matrix(&b)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn returns(rows: Vec<Vec<f64>>) -> ReturnsMatrix {
        let tickers = (0..rows.len()).map(|i| format!("T{i}")).collect();
        ReturnsMatrix::from_rows(tickers, rows).unwrap()
    }

    fn full(r: &ReturnsMatrix) -> StandardizedBlock {
        let all: Vec<usize> = (0..r.rows()).collect();
        standardize_window(r, &all, WindowSpec::new(r.columns(), r.columns(), r.columns()).unwrap(), DEFAULT_VARIANCE_FLOOR)
            .unwrap()
    }

    /// Textbook Pearson coefficient, used as the oracle.
    fn pearson(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
        let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
        sxy / (sxx.sqrt() * syy.sqrt())
    }

    #[test]
    fn standardize_one_two_three() {
        // mean 2, population sigma sqrt(2/3); (x - 2)/sigma = (-sqrt(1.5), 0, sqrt(1.5))
        let block = full(&returns(vec![vec![1.0, 2.0, 3.0]]));
        let expected = [-1.5f64.sqrt(), 0.0, 1.5f64.sqrt()];
        for (a, b) in block.row(0).iter().zip(expected) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        assert!((block.row(0)[2] - 1.224744871391589).abs() < 1e-12);
    }

    #[test]
    fn constant_row_is_degenerate() {
        let block = full(&returns(vec![vec![5.0, 5.0, 5.0], vec![1.0, 0.0, 2.0]]));
        assert_eq!(block.degenerate(), &[true, false]);
        assert!(block.row(0).iter().all(|&v| v == 0.0));
        let psi = correlation_matrix(&block);
        assert_eq!(psi.entries(), &[1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn identical_and_negated_rows() {
        let x = vec![0.3, -0.1, 0.7, 0.2];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let psi = correlation_matrix(&full(&returns(vec![x.clone(), x.clone(), neg])));
        assert!((psi.get(0, 1) - 1.0).abs() < 1e-15);
        assert!((psi.get(0, 2) + 1.0).abs() < 1e-15);
        assert_eq!(psi.get(1, 1), 1.0);
    }

    #[test]
    fn orthogonal_rows() {
        let a = vec![1.0, 0.0, -1.0, 0.0];
        let b = vec![0.0, 1.0, 0.0, -1.0];
        assert!(pearson(&a, &b).abs() < 1e-15);
        let psi = correlation_matrix(&full(&returns(vec![a, b])));
        assert!(psi.get(0, 1).abs() < 1e-15);
    }

    #[test]
    fn window_bounds() {
        let r = returns(vec![vec![1.0, 2.0, 4.0, 3.0]]);
        assert!(standardize_window(&r, &[0], WindowSpec { end: 5, len: 3 }, 0.0).is_err());
        assert!(standardize_window(&r, &[], WindowSpec { end: 3, len: 3 }, 0.0).is_err());
        assert!(standardize_window(&r, &[1], WindowSpec { end: 3, len: 3 }, 0.0).is_err());
        let w = WindowSpec::new(4, 3, 4).unwrap();
        assert_eq!(w.columns(), 1..4);
    }

    #[test]
    fn rolling_counts() {
        let r = returns(vec![(0..90).map(|i| ((i * 7) % 11) as f64).collect(); 2]);
        assert_eq!(rolling_correlations(&r, &[0, 1], 90, 1e-12).unwrap().len(), 1);
        assert_eq!(rolling_correlations(&r, &[0, 1], 80, 1e-12).unwrap().len(), 11);
        assert!(matches!(
            rolling_correlations(&r, &[0], 91, 1e-12),
            Err(Error::SeriesTooShort { columns: 90, window: 91 })
        ));
    }

    #[test]
    fn principal_submatrix() {
        let m = CorrelationMatrix::from_entries(3, vec![1.0, 0.1, 0.2, 0.1, 1.0, 0.3, 0.2, 0.3, 1.0]).unwrap();
        let s = m.principal(&[0, 2]);
        assert_eq!(s.entries(), &[1.0, 0.2, 0.2, 1.0]);
    }

    fn block_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
        (1usize..=5, 3usize..=10).prop_flat_map(|(n, tau)| {
            prop::collection::vec(prop::collection::vec(-0.2f64..0.2, tau), n)
        })
    }

    proptest! {
        #[test]
        fn matches_bruteforce_pearson(rows in block_strategy()) {
            let r = returns(rows.clone());
            let block = full(&r);
            let psi = correlation_matrix(&block);
            for i in 0..rows.len() {
                prop_assert!((block.row(i).iter().sum::<f64>() / rows[0].len() as f64).abs() < 1e-10);
                for j in 0..rows.len() {
                    prop_assert_eq!(psi.get(i, j), psi.get(j, i));
                    let expected = if i == j { 1.0 } else { pearson(&rows[i], &rows[j]) };
                    prop_assert!((psi.get(i, j) - expected).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn scale_and_shift_invariant(rows in block_strategy(), scale in 0.01f64..100.0, shift in -1.0f64..1.0, pick in 0usize..5) {
            let base = correlation_matrix(&full(&returns(rows.clone())));
            let mut moved = rows.clone();
            let k = pick % rows.len();
            for v in &mut moved[k] {
                *v = *v * scale + shift;
            }
            let other = correlation_matrix(&full(&returns(moved)));
            for (a, b) in base.entries().iter().zip(other.entries()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
