use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::correlation::DEFAULT_VARIANCE_FLOOR;
use crate::error::{Error, Result};

/// Parameters shared by the spectra and sampling stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Rolling window length in days.
    pub window: usize,
    /// Random portfolios drawn per `(m, n)` pair.
    pub draws: usize,
    pub master_seed: u64,
    pub variance_floor: f64,
    pub start: Option<NaiveDate>,
    pub end: Option<NaiveDate>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            window: 90,
            draws: 500,
            master_seed: 20230214,
            variance_floor: DEFAULT_VARIANCE_FLOOR,
            start: NaiveDate::from_ymd_opt(2019, 6, 30),
            end: NaiveDate::from_ymd_opt(2023, 2, 14),
        }
    }
}

impl AnalysisConfig {
    /// Checks the config against a series of `columns` returns.
    pub fn validate(&self, columns: usize) -> Result<()> {
        if self.window < 2 {
            return Err(Error::InvalidConfig(format!("window {} must be at least 2", self.window)));
        }
        if self.window > columns {
            return Err(Error::SeriesTooShort {
                columns,
                window: self.window,
            });
        }
        if self.draws == 0 {
            return Err(Error::InvalidConfig("draws must be at least 1".into()));
        }
        if !(self.variance_floor > 0.0) || !self.variance_floor.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "variance floor {} must be a small positive number",
                self.variance_floor
            )));
        }
        if let (Some(start), Some(end)) = (self.start, self.end) {
            if start >= end {
                return Err(Error::InvalidRange { start, end });
            }
        }
        Ok(())
    }
}
