//! Random sector portfolios and their diversification trajectories.
//!
//! An `(m, n)` portfolio holds `n` tickers from each of `m` sectors, both
//! chosen uniformly without replacement. For every pair we draw `D`
//! portfolios, follow the normalized leading eigenvalue of each portfolio's
//! rolling correlation matrix, and take the per-window median across draws.
//! The temporal mean of that median is `mu(m, n)`.
//!
//! Every draw has its own random stream, derived from the master seed and the
//! `(m, n, draw)` triple, so results do not depend on thread count or order.

use std::collections::BTreeMap;
use std::fmt;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::AnalysisConfig;
use crate::correlation::{self, CorrelationMatrix};
use crate::eigen;
use crate::error::{Error, Result};
use crate::ingest::{ReturnsMatrix, Sectors};
use crate::spectra;

/// `m` sectors with `n` tickers each.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct PortfolioSpec {
    pub sectors: usize,
    pub per_sector: usize,
}

impl PortfolioSpec {
    pub const fn new(sectors: usize, per_sector: usize) -> Self {
        Self { sectors, per_sector }
    }

    pub fn size(&self) -> usize {
        self.sectors * self.per_sector
    }

    pub fn check(&self, grid: Grid) -> Result<()> {
        if self.sectors == 0 || self.per_sector == 0 || self.sectors > grid.sectors || self.per_sector > grid.per_sector {
            return Err(Error::SpecOutOfBounds {
                sectors: self.sectors,
                per_sector: self.per_sector,
                max_sectors: grid.sectors,
                max_per_sector: grid.per_sector,
            });
        }
        Ok(())
    }
}

impl fmt::Display for PortfolioSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.sectors, self.per_sector)
    }
}

/// Upper bounds of the `(m, n)` grid, both inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Grid {
    pub sectors: usize,
    pub per_sector: usize,
}

impl Grid {
    pub fn full(sectors: &Sectors) -> Self {
        Self {
            sectors: sectors.count(),
            per_sector: sectors.size(),
        }
    }

    /// Specs in `(m, n)` lexicographic order.
    pub fn specs(&self) -> impl Iterator<Item = PortfolioSpec> + '_ {
        (1..=self.sectors).flat_map(move |m| (1..=self.per_sector).map(move |n| PortfolioSpec::new(m, n)))
    }

    pub fn len(&self) -> usize {
        self.sectors * self.per_sector
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Independent random stream for one draw of one spec.
///
/// ChaCha is counter based: the master seed is the key and `(m, n, draw)` selects the stream.
pub fn draw_stream(master_seed: u64, spec: PortfolioSpec, draw: u64) -> ChaCha8Rng {
    debug_assert!(spec.sectors < 256 && spec.per_sector < 256 && draw < 1 << 48);
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(((spec.sectors as u64) << 56) | ((spec.per_sector as u64) << 48) | draw);
    rng
}

/// Draws `m` distinct sectors, then `n` distinct tickers from each. Returns sorted row indices.
pub fn draw_portfolio<R: rand::Rng + ?Sized>(spec: PortfolioSpec, sectors: &Sectors, rng: &mut R) -> Result<Vec<usize>> {
    spec.check(Grid::full(sectors))?;
    let mut picked = Vec::with_capacity(spec.size());
    for s in index::sample(rng, sectors.count(), spec.sectors) {
        let members = &sectors.groups()[s];
        for k in index::sample(rng, members.len(), spec.per_sector) {
            picked.push(members[k]);
        }
    }
    picked.sort_unstable();
    Ok(picked)
}

/// Per-window median of the normalized leading eigenvalue across `draws` portfolios.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MedianTrajectory {
    pub spec: PortfolioSpec,
    /// One value per window, window `t = tau..=T` at position `t - tau`.
    pub values: Vec<f64>,
    pub draws: usize,
}

/// Median of a non-empty slice; mean of the two central order statistics for even length.
pub fn median(values: &mut [f64]) -> f64 {
    values.sort_unstable_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Temporal mean of a median trajectory.
pub fn mu(trajectory: &MedianTrajectory) -> Result<f64> {
    if trajectory.values.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    Ok(trajectory.values.iter().sum::<f64>() / trajectory.values.len() as f64)
}

/// Precomputed full-universe correlation windows shared by every draw.
///
/// The correlation of a sub-portfolio over a window is the principal submatrix of the
/// full-universe matrix, since standardization is row-wise.
pub struct SamplingExperiment<'a> {
    sectors: &'a Sectors,
    config: AnalysisConfig,
    windows: Vec<CorrelationMatrix>,
}

impl<'a> SamplingExperiment<'a> {
    pub fn new(returns: &ReturnsMatrix, sectors: &'a Sectors, config: &AnalysisConfig) -> Result<Self> {
        config.validate(returns.columns())?;
        let all: Vec<usize> = (0..returns.rows()).collect();
        let windows = correlation::rolling_correlations(returns, &all, config.window, config.variance_floor)?;
        Ok(Self {
            sectors,
            config: config.clone(),
            windows,
        })
    }

    pub fn window_count(&self) -> usize {
        self.windows.len()
    }

    pub fn grid(&self) -> Grid {
        Grid::full(self.sectors)
    }

    /// The portfolio chosen by draw `draw` of `spec`.
    pub fn portfolio(&self, spec: PortfolioSpec, draw: usize) -> Result<Vec<usize>> {
        let mut rng = draw_stream(self.config.master_seed, spec, draw as u64);
        draw_portfolio(spec, self.sectors, &mut rng)
    }

    /// Normalized leading eigenvalue of `portfolio` in every window.
    pub fn trajectory(&self, portfolio: &[usize]) -> Vec<f64> {
        let n = portfolio.len();
        if n == 1 {
            return vec![1.0; self.windows.len()];
        }
        let mut scratch = Vec::with_capacity(n * n);
        self.windows
            .iter()
            .map(|w| {
                w.principal_into(portfolio, &mut scratch);
                spectra::normalize(eigen::largest_eigenvalue(&mut scratch, n), n)
            })
            .collect()
    }

    pub fn median_trajectory(&self, spec: PortfolioSpec) -> Result<MedianTrajectory> {
        spec.check(self.grid())?;
        let draws = self.config.draws;
        let portfolios = (0..draws)
            .map(|d| self.portfolio(spec, d))
            .collect::<Result<Vec<_>>>()?;

        // identical portfolios have identical trajectories; compute each once
        let mut unique: BTreeMap<&[usize], usize> = BTreeMap::new();
        for p in &portfolios {
            let next = unique.len();
            unique.entry(p.as_slice()).or_insert(next);
        }
        let mut distinct: Vec<(&[usize], usize)> = unique.iter().map(|(p, &i)| (*p, i)).collect();
        distinct.sort_by_key(|&(_, i)| i);
        let trajectories: Vec<Vec<f64>> = distinct.par_iter().map(|(p, _)| self.trajectory(p)).collect();
        let slot: Vec<usize> = portfolios.iter().map(|p| unique[p.as_slice()]).collect();

        let mut column = vec![0.0; draws];
        let values = (0..self.windows.len())
            .map(|t| {
                for (c, &s) in column.iter_mut().zip(&slot) {
                    *c = trajectories[s][t];
                }
                median(&mut column)
            })
            .collect();
        Ok(MedianTrajectory { spec, values, draws })
    }

    /// Median trajectories and `mu` for every spec of `grid`.
    pub fn run(&self, grid: Grid) -> Result<SampleRun> {
        let bound = self.grid();
        if grid.sectors == 0 || grid.per_sector == 0 || grid.sectors > bound.sectors || grid.per_sector > bound.per_sector {
            return Err(Error::SpecOutOfBounds {
                sectors: grid.sectors,
                per_sector: grid.per_sector,
                max_sectors: bound.sectors,
                max_per_sector: bound.per_sector,
            });
        }
        let specs: Vec<PortfolioSpec> = grid.specs().collect();
        let trajectories = specs
            .par_iter()
            .map(|&s| self.median_trajectory(s))
            .collect::<Result<Vec<_>>>()?;
        let values = trajectories.iter().map(mu).collect::<Result<Vec<_>>>()?;
        Ok(SampleRun {
            table: MuTable { grid, values },
            trajectories,
        })
    }
}

pub fn median_trajectory(
    spec: PortfolioSpec,
    returns: &ReturnsMatrix,
    sectors: &Sectors,
    config: &AnalysisConfig,
) -> Result<MedianTrajectory> {
    SamplingExperiment::new(returns, sectors, config)?.median_trajectory(spec)
}

pub fn mu_table(returns: &ReturnsMatrix, sectors: &Sectors, config: &AnalysisConfig, grid: Grid) -> Result<SampleRun> {
    SamplingExperiment::new(returns, sectors, config)?.run(grid)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleRun {
    pub table: MuTable,
    /// In `(m, n)` lexicographic order, matching `table`.
    pub trajectories: Vec<MedianTrajectory>,
}

/// `mu(m, n)` over a grid, stored row-major by `m`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MuTable {
    grid: Grid,
    values: Vec<f64>,
}

impl MuTable {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidConfig(format!(
                "{} values for a {}x{} grid",
                values.len(),
                grid.sectors,
                grid.per_sector
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn get(&self, spec: PortfolioSpec) -> Option<f64> {
        spec.check(self.grid).ok()?;
        Some(self.values[(spec.sectors - 1) * self.grid.per_sector + spec.per_sector - 1])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (PortfolioSpec, f64)> + '_ {
        self.grid.specs().zip(self.values.iter().copied())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Move {
    #[serde(rename = "start")]
    Start,
    /// Added a sector.
    #[serde(rename = "m+1")]
    Sectors,
    /// Added a ticker per sector.
    #[serde(rename = "n+1")]
    PerSector,
}

impl fmt::Display for Move {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Move::Start => "start",
            Move::Sectors => "m+1",
            Move::PerSector => "n+1",
        })
    }
}

/// Which move wins when both candidates have exactly equal `mu`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    #[default]
    PerSector,
    Sectors,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// No move lowers `mu` by more than epsilon.
    Threshold,
    /// Both moves leave the grid.
    Boundary,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::Threshold => "threshold",
            StopReason::Boundary => "boundary",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GreedyStep {
    pub spec: PortfolioSpec,
    pub mu: f64,
    pub mv: Move,
    /// The in-grid candidate not taken at this step, with its `mu`.
    pub rejected: Option<(PortfolioSpec, f64)>,
    /// Both candidates had exactly equal `mu` and the tie rule decided.
    pub tie: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GreedyPath {
    pub steps: Vec<GreedyStep>,
    pub stop: StopReason,
    /// Best candidate at the point of stopping, if one was in the grid.
    pub stop_candidate: Option<(PortfolioSpec, f64)>,
    pub epsilon: f64,
    pub tie_break: TieBreak,
}

impl GreedyPath {
    pub fn specs(&self) -> Vec<PortfolioSpec> {
        self.steps.iter().map(|s| s.spec).collect()
    }
}

/// Walks from `(1, 1)`, each step taking whichever of `(m+1, n)` and `(m, n+1)` has the
/// smaller `mu`, until no in-grid move lowers `mu` by more than `epsilon`.
pub fn greedy_path(table: &MuTable, epsilon: f64, tie_break: TieBreak) -> GreedyPath {
    let start = PortfolioSpec::new(1, 1);
    let mut steps = vec![GreedyStep {
        spec: start,
        mu: table.get(start).expect("grid contains (1,1)"),
        mv: Move::Start,
        rejected: None,
        tie: false,
    }];
    loop {
        let here = steps.last().expect("path is never empty");
        let (cur, cur_mu) = (here.spec, here.mu);
        let more_sectors = PortfolioSpec::new(cur.sectors + 1, cur.per_sector);
        let more_each = PortfolioSpec::new(cur.sectors, cur.per_sector + 1);
        let a = table.get(more_sectors).map(|v| (more_sectors, v, Move::Sectors));
        let b = table.get(more_each).map(|v| (more_each, v, Move::PerSector));
        let (best, other, tie) = match (a, b) {
            (None, None) => {
                return GreedyPath {
                    steps,
                    stop: StopReason::Boundary,
                    stop_candidate: None,
                    epsilon,
                    tie_break,
                }
            }
            (Some(x), None) | (None, Some(x)) => (x, None, false),
            (Some(x), Some(y)) => {
                if x.1 < y.1 {
                    (x, Some(y), false)
                } else if y.1 < x.1 {
                    (y, Some(x), false)
                } else {
                    match tie_break {
                        TieBreak::PerSector => (y, Some(x), true),
                        TieBreak::Sectors => (x, Some(y), true),
                    }
                }
            }
        };
        if !(cur_mu - best.1 > epsilon) {
            return GreedyPath {
                steps,
                stop: StopReason::Threshold,
                stop_candidate: Some((best.0, best.1)),
                epsilon,
                tie_break,
            };
        }
        steps.push(GreedyStep {
            spec: best.0,
            mu: best.1,
            mv: best.2,
            rejected: other.map(|o| (o.0, o.1)),
            tie,
        });
    }
}
