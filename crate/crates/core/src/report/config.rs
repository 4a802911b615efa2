//! Loading run configurations from JSON files.

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::backtest::BacktestConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config file {path}: {source}")]
    Parse { path: PathBuf, source: serde_json::Error },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Command-line settings that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub p_max: Option<usize>,
    pub free_initial_fill: bool,
    pub hrp_shrinkage: bool,
}

impl Overrides {
    pub fn apply(&self, config: &mut BacktestConfig) {
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(p) = self.p_max {
            config.qaoa.p_max = p;
        }
        config.free_initial_fill |= self.free_initial_fill;
        config.hrp_shrinkage |= self.hrp_shrinkage;
    }
}

/// Parses a config document; unknown keys anywhere are rejected.
pub fn parse_config(text: &str) -> Result<BacktestConfig, serde_json::Error> {
    serde_json::from_str(text)
}

/// Reads `path` (or the defaults when `None`), applies overrides and validates.
pub fn load_config(path: Option<&Path>, overrides: &Overrides) -> Result<BacktestConfig, ConfigError> {
    let mut config = match path {
        None => BacktestConfig::default(),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|source| ConfigError::Read { path: p.to_path_buf(), source })?;
            parse_config(&text).map_err(|source| ConfigError::Parse { path: p.to_path_buf(), source })?
        }
    };
    overrides.apply(&mut config);
    config.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn missing_file_names_the_path() {
        let err = load_config(Some(Path::new("/nonexistent/cfg.json")), &Overrides::default()).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/cfg.json"));
    }

    #[test]
    fn overrides_win_over_file() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        write!(f, r#"{{"seed": 3, "qaoa": {{"p_max": 4}}}}"#).unwrap();
        let o = Overrides { seed: Some(9), p_max: Some(2), free_initial_fill: true, hrp_shrinkage: false };
        let c = load_config(Some(f.path()), &o).unwrap();
        assert_eq!((c.seed, c.qaoa.p_max, c.free_initial_fill), (9, 2, true));
    }

    #[test]
    fn typo_is_an_error() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        write!(f, r#"{{"lookbak": 100}}"#).unwrap();
        assert!(matches!(load_config(Some(f.path()), &Overrides::default()), Err(ConfigError::Parse { .. })));
    }

    #[test]
    fn invalid_values_rejected() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        write!(f, r#"{{"q": 1.5}}"#).unwrap();
        assert!(matches!(load_config(Some(f.path()), &Overrides::default()), Err(ConfigError::Invalid(_))));
    }
}
