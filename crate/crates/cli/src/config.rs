use std::path::{Path, PathBuf};

use marketmode::{AnalysisConfig, TieBreak};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Environment variable naming the default config file.
pub const CONFIG_ENV: &str = "MARKETMODE_CONFIG";

/// Everything a run needs, loaded from TOML and overridden by flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub analysis: AnalysisConfig,
    pub paths: Paths,
    /// Largest `m` in the sampling grid; 0 means every sector.
    pub max_sectors: usize,
    /// Largest `n` in the sampling grid; 0 means the full sector size.
    pub max_per_sector: usize,
    /// Greedy path stops unless a move lowers mu by more than this.
    pub epsilon: f64,
    pub tie_break: TieBreak,
    /// Flat-cut cluster count.
    pub clusters: usize,
    /// Worker threads; 0 lets rayon decide.
    pub workers: usize,
    pub charts: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub prices: Option<PathBuf>,
    pub deciles: Option<PathBuf>,
    pub run_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            prices: None,
            deciles: None,
            run_dir: PathBuf::from("run"),
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            analysis: AnalysisConfig::default(),
            paths: Paths::default(),
            max_sectors: 0,
            max_per_sector: 0,
            epsilon: 0.0,
            tie_break: TieBreak::PerSector,
            clusters: 4,
            workers: 0,
            charts: false,
        }
    }
}

impl RunConfig {
    /// Reads `path`, or the file named by [`CONFIG_ENV`], or falls back to defaults.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let from_env = std::env::var_os(CONFIG_ENV).map(PathBuf::from);
        let Some(path) = path.map(Path::to_path_buf).or(from_env) else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut config: Self = toml::from_str(&text)
            .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))?;
        // relative data paths are taken relative to the config file
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut config.paths.prices, &mut config.paths.deciles].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if config.paths.run_dir.is_relative() {
            config.paths.run_dir = base.join(&config.paths.run_dir);
        }
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_partial_config() {
        let text = "clusters = 3\n[analysis]\nwindow = 30\ndraws = 10\nstart = \"2020-01-01\"\n";
        let c: RunConfig = toml::from_str(text).unwrap();
        assert_eq!(c.clusters, 3);
        assert_eq!(c.analysis.window, 30);
        assert_eq!(c.analysis.master_seed, AnalysisConfig::default().master_seed);
        assert_eq!(c.tie_break, TieBreak::PerSector);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("windw = 3\n").is_err());
    }

    #[test]
    fn round_trips() {
        let c = RunConfig::default();
        let back: RunConfig = toml::from_str(&c.to_toml()).unwrap();
        assert_eq!(c, back);
    }
}
