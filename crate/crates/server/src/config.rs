use std::path::{Path, PathBuf};

use hintforge_core::workbench::{WorkbenchConfig, DEFAULT_K};
use serde::{Deserialize, Serialize};

pub const DEFAULT_PORT: u16 = 8787;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("config {path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
    #[error("{key}={value:?}: {reason}")]
    BadValue { key: String, value: String, reason: String },
}

/// Service settings. Read from an optional TOML file, then overridden by
/// `PH_*` environment variables.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub host: String,
    pub port: u16,
    /// State directory: pools, library journal, event log, jobs.
    pub journal_dir: Option<PathBuf>,
    pub provider_url: Option<String>,
    pub provider_key_env: Option<String>,
    pub default_k: usize,
    pub jobs: usize,
    pub max_running_jobs: usize,
    pub embedding_url: Option<String>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        let wb = WorkbenchConfig::default();
        ServerConfig {
            host: "127.0.0.1".into(),
            port: DEFAULT_PORT,
            journal_dir: None,
            provider_url: None,
            provider_key_env: None,
            default_k: DEFAULT_K,
            jobs: wb.jobs,
            max_running_jobs: wb.max_running_jobs,
            embedding_url: None,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.trim().parse().map_err(|_| ConfigError::BadValue {
        key: key.into(),
        value: value.into(),
        reason: "not a valid number".into(),
    })
}

fn non_empty(v: String) -> Option<String> {
    let t = v.trim();
    (!t.is_empty()).then(|| t.to_string())
}

impl ServerConfig {
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|source| ConfigError::Parse { path: origin.to_path_buf(), source })
    }

    /// Loads `path` (if any) and applies `env` overrides.
    pub fn load(path: Option<&Path>, env: impl Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        let mut config = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Read { path: p.to_path_buf(), source })?;
                ServerConfig::from_toml_str(&text, p)?
            }
            None => ServerConfig::default(),
        };
        if let Some(v) = env("PH_PORT") {
            config.port = parse_num("PH_PORT", &v)?;
        }
        if let Some(v) = env("PH_JOURNAL_DIR").and_then(non_empty) {
            config.journal_dir = Some(PathBuf::from(v));
        }
        if let Some(v) = env("PH_PROVIDER_URL").and_then(non_empty) {
            config.provider_url = Some(v);
        }
        if let Some(v) = env("PH_PROVIDER_KEY_ENV").and_then(non_empty) {
            config.provider_key_env = Some(v);
        }
        if let Some(v) = env("PH_DEFAULT_K") {
            config.default_k = parse_num("PH_DEFAULT_K", &v)?;
        }
        config.check()?;
        Ok(config)
    }

    pub fn from_env(path: Option<&Path>) -> Result<Self, ConfigError> {
        ServerConfig::load(path, |k| std::env::var(k).ok())
    }

    fn check(&self) -> Result<(), ConfigError> {
        let bad = |key: &str, value: String, reason: &str| ConfigError::BadValue {
            key: key.into(),
            value,
            reason: reason.into(),
        };
        if self.default_k == 0 {
            return Err(bad("default_k", "0".into(), "must be at least 1"));
        }
        if self.jobs == 0 {
            return Err(bad("jobs", "0".into(), "must be at least 1"));
        }
        if self.max_running_jobs == 0 {
            return Err(bad("max_running_jobs", "0".into(), "must be at least 1"));
        }
        if let Some(url) = &self.provider_url {
            if !(url.starts_with("http://") || url.starts_with("https://")) {
                return Err(bad("provider_url", url.clone(), "must be an http(s) URL"));
            }
        }
        Ok(())
    }

    pub fn workbench(&self) -> WorkbenchConfig {
        WorkbenchConfig {
            state_dir: self.journal_dir.clone(),
            default_k: self.default_k,
            batch_size: 0,
            jobs: self.jobs,
            max_running_jobs: self.max_running_jobs,
            provider_url: self.provider_url.clone(),
            provider_key_env: self.provider_key_env.clone(),
            embedding_url: self.embedding_url.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn env(pairs: &[(&str, &str)]) -> impl Fn(&str) -> Option<String> {
        let map: HashMap<String, String> = pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        move |k| map.get(k).cloned()
    }

    #[test]
    fn env_overrides_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("hf.toml");
        std::fs::write(&path, "port = 9000\ndefault_k = 5\njournal_dir = \"/tmp/a\"\n").unwrap();
        let c = ServerConfig::load(Some(&path), env(&[("PH_DEFAULT_K", "30"), ("PH_JOURNAL_DIR", "/tmp/b")])).unwrap();
        assert_eq!(c.port, 9000);
        assert_eq!(c.default_k, 30);
        assert_eq!(c.journal_dir.as_deref(), Some(Path::new("/tmp/b")));
    }

    #[test]
    fn bad_values_are_config_errors() {
        assert!(matches!(
            ServerConfig::load(None, env(&[("PH_PORT", "eighty")])),
            Err(ConfigError::BadValue { .. })
        ));
        assert!(matches!(
            ServerConfig::load(None, env(&[("PH_DEFAULT_K", "0")])),
            Err(ConfigError::BadValue { .. })
        ));
        assert!(matches!(
            ServerConfig::load(None, env(&[("PH_PROVIDER_URL", "ftp://x")])),
            Err(ConfigError::BadValue { .. })
        ));
    }

    #[test]
    fn unknown_keys_and_missing_files_fail() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("hf.toml");
        std::fs::write(&path, "prot = 1\n").unwrap();
        assert!(matches!(ServerConfig::load(Some(&path), env(&[])), Err(ConfigError::Parse { .. })));
        let missing = dir.path().join("nope.toml");
        assert!(matches!(ServerConfig::load(Some(&missing), env(&[])), Err(ConfigError::Read { .. })));
    }
}
