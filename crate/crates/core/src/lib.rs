//! Market-structure analysis of daily price panels.
//!
//! The pipeline runs in five stages:
//!
//! 1. [`ingest`]: load `date,ticker,close` records, align them on a gap-free
//!    daily calendar, bucket tickers into market-cap deciles, take log returns.
//! 2. [`correlation`]: standardize returns over rolling windows and form
//!    Pearson correlation matrices.
//! 3. [`spectra`]: normalized leading eigenvalue (collectivity) and
//!    leading-eigenvector uniformity per window.
//! 4. [`sampling`]: random `(m, n)` sector portfolios, median collectivity
//!    trajectories, their temporal means and the greedy diversification path.
//! 5. [`cluster`]: average-linkage clustering of the median trajectories.

pub mod cluster;
pub mod config;
pub mod correlation;
pub mod eigen;
pub mod error;
pub mod ingest;
pub mod sampling;
pub mod spectra;
pub mod synthetic;

pub use cluster::{average_linkage, cut_clusters, distance_matrix, trajectory_distance, Dendrogram, DistanceMatrix, Merge};
pub use config::AnalysisConfig;
pub use correlation::{correlation_matrix, rolling_correlations, standardize_window, CorrelationMatrix, StandardizedBlock, WindowSpec};
pub use error::{Error, Result};
pub use ingest::{align_panel, assign_deciles, load_prices, log_returns, DecileMap, PricePanel, PriceRecord, RecordSet, ReturnsMatrix, Sectors};
pub use sampling::{
    draw_portfolio, greedy_path, mu, mu_table, median_trajectory, GreedyPath, Grid, MedianTrajectory, MuTable, PortfolioSpec,
    SampleRun, SamplingExperiment, StopReason, TieBreak,
};
pub use spectra::{normalized_leading_eigenvalue, rolling_spectra, symmetric_eigen, uniformity, SpectralSummary, SpectrumPoint};
