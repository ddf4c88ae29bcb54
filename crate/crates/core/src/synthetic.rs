//! Seeded synthetic markets for tests, demos and smoke runs.

use chrono::NaiveDate;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::ingest::{PricePanel, ReturnsMatrix};

/// One-factor returns `r_i(t) = beta * f(t) + eps_i(t)` with standard normal `f` and `eps`,
/// scaled by `volatility`.
pub fn one_factor_returns(tickers: usize, days: usize, beta: f64, volatility: f64, seed: u64) -> Result<ReturnsMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let factor: Vec<f64> = (0..days).map(|_| StandardNormal.sample(&mut rng)).collect();
    let values = (0..tickers)
        .map(|_| {
            factor
                .iter()
                .map(|f| {
                    let eps: f64 = StandardNormal.sample(&mut rng);
                    volatility * (beta * f + eps)
                })
                .collect()
        })
        .collect();
    ReturnsMatrix::from_rows(ticker_names(tickers), values)
}

/// Sector model: each ticker loads on a market factor and on its own sector's factor.
pub fn sector_returns(
    sectors: usize,
    per_sector: usize,
    days: usize,
    market_beta: f64,
    sector_beta: f64,
    seed: u64,
) -> Result<ReturnsMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
    let market: Vec<f64> = (0..days).map(|_| normal()).collect();
    let mut values = Vec::with_capacity(sectors * per_sector);
    for _ in 0..sectors {
        let sector: Vec<f64> = (0..days).map(|_| normal()).collect();
        for _ in 0..per_sector {
            values.push(
                (0..days)
                    .map(|t| 0.02 * (market_beta * market[t] + sector_beta * sector[t] + normal()))
                    .collect(),
            );
        }
    }
    ReturnsMatrix::from_rows(ticker_names(sectors * per_sector), values)
}

/// Compounds returns into a price panel starting at 100 on `start`.
pub fn prices_from_returns(returns: &ReturnsMatrix, start: NaiveDate) -> Result<PricePanel> {
    let calendar = start.iter_days().take(returns.columns() + 1).collect();
    let prices = returns
        .values()
        .iter()
        .map(|row| {
            let mut p = 100.0;
            std::iter::once(p)
                .chain(row.iter().map(|r| {
                    p *= r.exp();
                    p
                }))
                .collect()
        })
        .collect();
    PricePanel::new(returns.tickers().to_vec(), calendar, prices)
}

fn ticker_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("S{i:02}")).collect()
}
