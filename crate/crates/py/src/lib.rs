//! Python bindings. Matrices cross the boundary as lists of rows, `(m, n)` specs as tuples.

use std::collections::BTreeMap;

use marketmode::sampling::Move;
use marketmode::spectra;
use marketmode::{
    AnalysisConfig, CorrelationMatrix, Dendrogram, DistanceMatrix, Grid, MuTable, PortfolioSpec, ReturnsMatrix, Sectors,
    StopReason, TieBreak,
};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn value_error(err: marketmode::Error) -> PyErr {
    PyValueError::new_err(err.to_string())
}

/// Row-major storage of a square list-of-rows matrix.
pub fn flatten_square(rows: &[Vec<f64>]) -> Result<(usize, Vec<f64>), String> {
    let n = rows.len();
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
        return Err(format!("row {i} has {} entries, expected {n}", r.len()));
    }
    Ok((n, rows.concat()))
}

pub fn unflatten(n: usize, entries: &[f64]) -> Vec<Vec<f64>> {
    entries.chunks(n.max(1)).map(<[f64]>::to_vec).collect()
}

fn returns_from_rows(rows: Vec<Vec<f64>>) -> PyResult<ReturnsMatrix> {
    let names = (0..rows.len()).map(|i| format!("X{i}")).collect();
    ReturnsMatrix::from_rows(names, rows).map_err(value_error)
}

fn square(rows: Vec<Vec<f64>>) -> PyResult<(usize, Vec<f64>)> {
    flatten_square(&rows).map_err(PyValueError::new_err)
}

/// Log returns of each price row.
#[pyfunction]
fn log_returns(prices: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
    prices
        .iter()
        .enumerate()
        .map(|(i, row)| {
            if let Some(p) = row.iter().find(|p| !(**p > 0.0)) {
                return Err(PyValueError::new_err(format!("row {i}: non-positive price {p}")));
            }
            Ok(row.windows(2).map(|w| (w[1] / w[0]).ln()).collect())
        })
        .collect()
}

/// Pearson correlation matrix of the rows over all their columns.
#[pyfunction]
#[pyo3(signature = (returns, variance_floor = marketmode::correlation::DEFAULT_VARIANCE_FLOOR))]
fn correlation_matrix(returns: Vec<Vec<f64>>, variance_floor: f64) -> PyResult<Vec<Vec<f64>>> {
    let r = returns_from_rows(returns)?;
    let all: Vec<usize> = (0..r.rows()).collect();
    let window = marketmode::WindowSpec::new(r.columns(), r.columns(), r.columns()).map_err(value_error)?;
    let block = marketmode::standardize_window(&r, &all, window, variance_floor).map_err(value_error)?;
    let m = marketmode::correlation_matrix(&block);
    Ok(unflatten(m.size(), m.entries()))
}

/// `(t, lambda1_tilde, h, degenerate)` for each window `t = window..=T`.
#[pyfunction]
#[pyo3(signature = (returns, window, subset = None, variance_floor = marketmode::correlation::DEFAULT_VARIANCE_FLOOR))]
fn rolling_spectra(
    returns: Vec<Vec<f64>>,
    window: usize,
    subset: Option<Vec<usize>>,
    variance_floor: f64,
) -> PyResult<Vec<(usize, f64, f64, bool)>> {
    let r = returns_from_rows(returns)?;
    let subset = subset.unwrap_or_else(|| (0..r.rows()).collect());
    let points = marketmode::rolling_spectra(&r, &subset, window, variance_floor).map_err(value_error)?;
    Ok(points.iter().map(|p| (p.end, p.lambda1_tilde, p.h, p.degenerate)).collect())
}

/// Eigenvalues (descending) and the matching unit eigenvectors of a symmetric matrix.
#[pyfunction]
fn symmetric_eigen(matrix: Vec<Vec<f64>>) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
    let (n, entries) = square(matrix)?;
    let eig = marketmode::eigen::jacobi(&entries, n).map_err(value_error)?;
    Ok((eig.values, eig.vectors))
}

/// Spectral summary of a correlation matrix as a dict.
#[pyfunction]
fn spectral_summary(py: Python<'_>, matrix: Vec<Vec<f64>>) -> PyResult<Py<PyAny>> {
    let (n, entries) = square(matrix)?;
    let m = CorrelationMatrix::from_entries(n, entries).map_err(value_error)?;
    let s = spectra::summarize(&m).map_err(value_error)?;
    let d = pyo3::types::PyDict::new(py);
    d.set_item("eigenvalues", s.eigenvalues)?;
    d.set_item("lambda1_tilde", s.normalized_leading)?;
    d.set_item("leading_vector", s.leading_vector)?;
    d.set_item("h", s.uniformity)?;
    d.set_item("degenerate", s.degenerate)?;
    Ok(d.into_any().unbind())
}

/// `|<v, 1>| / (|v| sqrt(n))`.
#[pyfunction]
fn uniformity(vector: Vec<f64>) -> f64 {
    spectra::uniformity_of(&vector)
}

/// Outcome of a sampling experiment.
#[pyclass(frozen, module = "marketmode")]
struct SampleResult {
    #[pyo3(get)]
    mu: BTreeMap<(usize, usize), f64>,
    #[pyo3(get)]
    trajectories: BTreeMap<(usize, usize), Vec<f64>>,
    #[pyo3(get)]
    draws: usize,
}

#[pymethods]
impl SampleResult {
    fn __repr__(&self) -> String {
        format!("SampleResult({} specs, draws={})", self.mu.len(), self.draws)
    }
}

/// Median trajectories and `mu` for every `(m, n)` up to the given bounds.
///
/// `sectors` lists the row indices of each sector; all sectors must have equal size.
#[pyfunction]
#[pyo3(signature = (returns, sectors, window = 90, draws = 500, seed = 20230214, max_sectors = None, max_per_sector = None))]
fn mu_table(
    returns: Vec<Vec<f64>>,
    sectors: Vec<Vec<usize>>,
    window: usize,
    draws: usize,
    seed: u64,
    max_sectors: Option<usize>,
    max_per_sector: Option<usize>,
) -> PyResult<SampleResult> {
    let r = returns_from_rows(returns)?;
    let sectors = Sectors::new(sectors, r.rows()).map_err(value_error)?;
    let full = Grid::full(&sectors);
    let grid = Grid {
        sectors: max_sectors.unwrap_or(full.sectors),
        per_sector: max_per_sector.unwrap_or(full.per_sector),
    };
    let config = AnalysisConfig {
        window,
        draws,
        master_seed: seed,
        start: None,
        end: None,
        ..Default::default()
    };
    let run = marketmode::mu_table(&r, &sectors, &config, grid).map_err(value_error)?;
    Ok(SampleResult {
        mu: run.table.iter().map(|(s, v)| ((s.sectors, s.per_sector), v)).collect(),
        trajectories: run
            .trajectories
            .into_iter()
            .map(|t| ((t.spec.sectors, t.spec.per_sector), t.values))
            .collect(),
        draws,
    })
}

/// Greedy walk over a full `{(m, n): mu}` grid. Returns `(steps, stop_reason)` with steps
/// `(m, n, mu, move)`.
#[pyfunction]
#[pyo3(signature = (mu, epsilon = 0.0, tie_break = "per_sector"))]
fn greedy_path(
    mu: BTreeMap<(usize, usize), f64>,
    epsilon: f64,
    tie_break: &str,
) -> PyResult<(Vec<(usize, usize, f64, String)>, String)> {
    let tie = match tie_break {
        "per_sector" | "n" => TieBreak::PerSector,
        "sectors" | "m" => TieBreak::Sectors,
        other => return Err(PyValueError::new_err(format!("unknown tie rule {other:?}"))),
    };
    let grid = Grid {
        sectors: mu.keys().map(|k| k.0).max().unwrap_or(0),
        per_sector: mu.keys().map(|k| k.1).max().unwrap_or(0),
    };
    let values = grid
        .specs()
        .map(|s| {
            mu.get(&(s.sectors, s.per_sector))
                .copied()
                .ok_or_else(|| PyValueError::new_err(format!("grid is missing {s}")))
        })
        .collect::<PyResult<Vec<f64>>>()?;
    let table = MuTable::new(grid, values).map_err(value_error)?;
    let path = marketmode::greedy_path(&table, epsilon, tie);
    let steps = path
        .steps
        .iter()
        .map(|s| {
            let mv = match s.mv {
                Move::Start => "start",
                Move::Sectors => "m+1",
                Move::PerSector => "n+1",
            };
            (s.spec.sectors, s.spec.per_sector, s.mu, mv.to_string())
        })
        .collect();
    let stop = match path.stop {
        StopReason::Threshold => "threshold",
        StopReason::Boundary => "boundary",
    };
    Ok((steps, stop.to_string()))
}

/// Mean absolute difference of two aligned trajectories.
#[pyfunction]
fn trajectory_distance(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    marketmode::trajectory_distance(&a, &b).map_err(value_error)
}

/// Average-linkage tree over labelled leaves.
#[pyclass(frozen, module = "marketmode")]
struct Tree {
    inner: Dendrogram<String>,
}

#[pymethods]
impl Tree {
    #[getter]
    fn labels(&self) -> Vec<String> {
        self.inner.labels().to_vec()
    }

    /// `(left, right, height, size)`; leaves are `0..L` and step `s` creates node `L + s`.
    #[getter]
    fn merges(&self) -> Vec<(usize, usize, f64, usize)> {
        self.inner.merges().iter().map(|m| (m.left, m.right, m.height, m.size)).collect()
    }

    /// Cluster id per leaf after cutting into `k` clusters.
    fn cut(&self, k: usize) -> PyResult<Vec<usize>> {
        marketmode::cut_clusters(&self.inner, k).map_err(value_error)
    }

    fn newick(&self) -> String {
        self.inner.to_newick()
    }

    fn __repr__(&self) -> String {
        format!("Tree({} leaves)", self.inner.leaves())
    }
}

/// UPGMA over a symmetric distance matrix. Labels default to zero-padded indices so that
/// tie-breaking follows input order.
#[pyfunction]
#[pyo3(signature = (distances, labels = None))]
fn average_linkage(distances: Vec<Vec<f64>>, labels: Option<Vec<String>>) -> PyResult<Tree> {
    let (n, entries) = square(distances)?;
    let width = n.to_string().len();
    let labels = labels.unwrap_or_else(|| (0..n).map(|i| format!("{i:0width$}")).collect());
    let dist = DistanceMatrix::new(labels, entries).map_err(value_error)?;
    Ok(Tree {
        inner: marketmode::average_linkage(&dist),
    })
}

/// Formats an `(m, n)` pair the way output files do.
#[pyfunction]
fn spec_label(m: usize, n: usize) -> String {
    PortfolioSpec::new(m, n).to_string()
}

#[pymodule]
#[pyo3(name = "marketmode")]
fn marketmode_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<SampleResult>()?;
    m.add_class::<Tree>()?;
    m.add_function(wrap_pyfunction!(log_returns, m)?)?;
    m.add_function(wrap_pyfunction!(correlation_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(rolling_spectra, m)?)?;
    m.add_function(wrap_pyfunction!(symmetric_eigen, m)?)?;
    m.add_function(wrap_pyfunction!(spectral_summary, m)?)?;
    m.add_function(wrap_pyfunction!(uniformity, m)?)?;
    m.add_function(wrap_pyfunction!(mu_table, m)?)?;
    m.add_function(wrap_pyfunction!(greedy_path, m)?)?;
    m.add_function(wrap_pyfunction!(trajectory_distance, m)?)?;
    m.add_function(wrap_pyfunction!(average_linkage, m)?)?;
    m.add_function(wrap_pyfunction!(spec_label, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_round_trip() {
        let rows = vec![vec![1.0, 0.5], vec![0.5, 1.0]];
        let (n, flat) = flatten_square(&rows).unwrap();
        assert_eq!(n, 2);
        assert_eq!(unflatten(n, &flat), rows);
    }

    #[test]
    fn ragged_rows_are_rejected() {
        assert!(flatten_square(&[vec![1.0, 0.0], vec![1.0]]).is_err());
    }
}
