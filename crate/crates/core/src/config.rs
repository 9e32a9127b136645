//! Service and tool configuration: one TOML file plus environment
//! overrides for the port, model paths and data directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::{CategoryVocab, CYS_CATEGORIES};
use crate::error::{Error, Result};

pub const ENV_PORT: &str = "CYS_PORT";
pub const ENV_PALETTE_MODEL: &str = "CYS_PALETTE_MODEL";
pub const ENV_COLORIZER_MODEL: &str = "CYS_COLORIZER_MODEL";
pub const ENV_DATA_DIR: &str = "CYS_DATA_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub host: String,
    pub port: u16,
    pub palette_model: Option<PathBuf>,
    pub colorizer_model: Option<PathBuf>,
    /// Feedback log and stored uploads live here.
    pub data_dir: PathBuf,
    pub session_ttl_secs: u64,
    pub categories: Vec<String>,
    /// Default seed when a request or command gives none.
    pub seed: u64,
    /// Upper bound on accepted upload size, bytes.
    pub max_upload_bytes: usize,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            host: "127.0.0.1".into(),
            port: 8080,
            palette_model: None,
            colorizer_model: None,
            data_dir: PathBuf::from("data"),
            session_ttl_secs: 3600,
            categories: CYS_CATEGORIES.iter().map(|s| s.to_string()).collect(),
            seed: 0,
            max_upload_bytes: 16 * 1024 * 1024,
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Parse {
            input: "config".into(),
            reason: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path` if given (defaults otherwise), then applies environment
    /// overrides.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => Self::from_toml(&std::fs::read_to_string(p)?)?,
            None => Config::default(),
        };
        cfg.apply_env(|k| std::env::var(k).ok())?;
        Ok(cfg)
    }

    /// Applies overrides from a variable lookup.
    pub fn apply_env(&mut self, var: impl Fn(&str) -> Option<String>) -> Result<()> {
        if let Some(p) = var(ENV_PORT) {
            self.port = p.trim().parse().map_err(|_| Error::Parse {
                input: p.clone(),
                reason: format!("{ENV_PORT} must be a port number"),
            })?;
        }
        if let Some(p) = var(ENV_PALETTE_MODEL) {
            self.palette_model = Some(p.into());
        }
        if let Some(p) = var(ENV_COLORIZER_MODEL) {
            self.colorizer_model = Some(p.into());
        }
        if let Some(p) = var(ENV_DATA_DIR) {
            self.data_dir = p.into();
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        self.category_vocab()?;
        if self.session_ttl_secs == 0 {
            return Err(Error::validation("session_ttl_secs must be positive"));
        }
        Ok(())
    }

    pub fn category_vocab(&self) -> Result<CategoryVocab> {
        CategoryVocab::new(self.categories.clone())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}
