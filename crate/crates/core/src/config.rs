//! One TOML file describes a reproducible run: seed, output paths,
//! provider endpoints with prices, and the example sentences used in
//! the citation prompts. Command-line flags override what they name.
//! Credentials never appear here; each provider entry names the
//! environment variable that holds its key.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::ProviderConfig;
use crate::prompts::CategoryExamples;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: Box<toml::de::Error>,
    },
    #[error("no provider named '{0}' in the config")]
    UnknownProvider(String),
    #[error("the config declares no providers")]
    NoProviders,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default = "default_run_id")]
    pub run_id: String,
    /// Provider to use when no flag picks one; defaults to the first
    /// entry.
    #[serde(default)]
    pub default_provider: Option<String>,
    /// Fraction of groups used for training in split-based methods.
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    #[serde(default)]
    pub providers: Vec<ProviderConfig>,
    #[serde(default)]
    pub category_examples: CategoryExamples,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_run_id() -> String {
    "r1".to_string()
}

fn default_train_fraction() -> f64 {
    0.5
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            out_dir: default_out_dir(),
            run_id: default_run_id(),
            default_provider: None,
            train_fraction: default_train_fraction(),
            providers: vec![ProviderConfig::mock()],
            category_examples: CategoryExamples::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        toml::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.display().to_string(),
            source: Box::new(source),
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), ConfigError> {
        let text = toml::to_string_pretty(self).expect("config serializes");
        std::fs::write(path, text).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    /// Resolve a provider by name or model id; with no name, take the
    /// declared default or the first entry.
    pub fn provider(&self, name: Option<&str>) -> Result<&ProviderConfig, ConfigError> {
        if self.providers.is_empty() {
            return Err(ConfigError::NoProviders);
        }
        match name.or(self.default_provider.as_deref()) {
            Some(n) => self
                .providers
                .iter()
                .find(|p| p.provider_name == n || p.model_id == n)
                .ok_or_else(|| ConfigError::UnknownProvider(n.to_string())),
            None => Ok(&self.providers[0]),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::TempDir;

    #[test]
    fn minimal_toml_gets_defaults() {
        let text = r#"
            [[providers]]
            provider_name = "mock"
            endpoint = ""
            model_id = "mock"
            credential_env_var = ""
        "#;
        let cfg: RunConfig = toml::from_str(text).unwrap();
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.out_dir, PathBuf::from("out"));
        assert_eq!(cfg.run_id, "r1");
        assert_eq!(cfg.train_fraction, 0.5);
        assert_eq!(cfg.providers.len(), 1);
        assert_eq!(cfg.providers[0].max_concurrent, 4);
        assert_eq!(cfg.providers[0].requests_per_minute, 60);
        assert_eq!(cfg.providers[0].timeout, 120);
        assert_eq!(cfg.providers[0].price_in, 0.0);
        assert!(cfg
            .category_examples
            .background
            .contains("cancer mortality"));
    }

    #[test]
    fn provider_lookup_rules() {
        let mut cfg = RunConfig::default();
        assert_eq!(cfg.provider(None).unwrap().provider_name, "mock");
        assert_eq!(cfg.provider(Some("mock")).unwrap().model_id, "mock");
        assert!(matches!(
            cfg.provider(Some("absent")),
            Err(ConfigError::UnknownProvider(_))
        ));

        let mut second = ProviderConfig::mock();
        second.provider_name = "other-mock".to_string();
        second.model_id = "other".to_string();
        cfg.providers.push(second);
        cfg.default_provider = Some("other-mock".to_string());
        assert_eq!(cfg.provider(None).unwrap().model_id, "other");
        assert_eq!(cfg.provider(Some("mock")).unwrap().model_id, "mock");
        // model id works as a lookup key too
        assert_eq!(cfg.provider(Some("other")).unwrap().provider_name, "other-mock");

        cfg.providers.clear();
        assert!(matches!(cfg.provider(None), Err(ConfigError::NoProviders)));
    }

    #[test]
    fn save_load_round_trip() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("run.toml");
        let mut cfg = RunConfig {
            seed: 42,
            ..RunConfig::default()
        };
        cfg.category_examples.background = "custom example".to_string();
        cfg.save(&path).unwrap();
        let back = RunConfig::load(&path).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn load_errors_are_classified() {
        let dir = TempDir::new().unwrap();
        let missing = dir.path().join("absent.toml");
        assert!(matches!(
            RunConfig::load(&missing),
            Err(ConfigError::Io { .. })
        ));

        let bad = dir.path().join("bad.toml");
        std::fs::write(&bad, "seed = \"not a number\"").unwrap();
        assert!(matches!(RunConfig::load(&bad), Err(ConfigError::Parse { .. })));
    }
}
