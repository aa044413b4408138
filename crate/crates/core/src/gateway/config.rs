//! Layered configuration: JSON file, then `IDVAULT_*` environment variables, then flags.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Deserialize;
use thiserror::Error;

use crate::auth::{DEFAULT_ITERATIONS, DEFAULT_TTL_SECONDS};
use crate::service::ServiceOptions;
use crate::store::DEFAULT_MAX_UPLOAD_BYTES;

pub const DEFAULT_PORT: u16 = 1337;
pub const DEFAULT_HOST: &str = "127.0.0.1";
pub const DEFAULT_DATA_DIR: &str = "data";
pub const ENV_PREFIX: &str = "IDVAULT_";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {}: {source}", path.display())]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config file {}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
    #[error("invalid value for {name}: {message}")]
    Invalid { name: String, message: String },
    #[error("jwt_secret is not set; provide it in the config file, as IDVAULT_JWT_SECRET, or with --jwt-secret")]
    MissingSecret,
    #[error("port must be between 1 and 65535, got {0}")]
    Port(u64),
}

/// One source of settings. Every field is optional so sources can be stacked.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigLayer {
    pub port: Option<u64>,
    pub host: Option<String>,
    pub data_dir: Option<PathBuf>,
    pub jwt_secret: Option<String>,
    pub token_ttl_seconds: Option<i64>,
    pub max_upload_bytes: Option<usize>,
    pub cors_allowed_origins: Option<Vec<String>>,
    pub verifier_url: Option<String>,
    pub verifier_timeout_ms: Option<u64>,
    pub hash_iterations: Option<u32>,
}

fn parsed<T: std::str::FromStr>(name: &str, raw: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    raw.trim()
        .parse()
        .map_err(|e: T::Err| ConfigError::Invalid {
            name: name.to_string(),
            message: e.to_string(),
        })
}

impl ConfigLayer {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    /// Reads `IDVAULT_<FIELD>` variables; list values are comma-separated.
    pub fn from_env(vars: impl IntoIterator<Item = (String, String)>) -> Result<Self, ConfigError> {
        let mut layer = Self::default();
        for (key, value) in vars {
            let Some(field) = key.strip_prefix(ENV_PREFIX) else {
                continue;
            };
            match field {
                "PORT" => layer.port = Some(parsed(&key, &value)?),
                "HOST" => layer.host = Some(value),
                "DATA_DIR" => layer.data_dir = Some(value.into()),
                "JWT_SECRET" => layer.jwt_secret = Some(value),
                "TOKEN_TTL_SECONDS" => layer.token_ttl_seconds = Some(parsed(&key, &value)?),
                "MAX_UPLOAD_BYTES" => layer.max_upload_bytes = Some(parsed(&key, &value)?),
                "CORS_ALLOWED_ORIGINS" => {
                    layer.cors_allowed_origins = Some(
                        value
                            .split(',')
                            .map(str::trim)
                            .filter(|s| !s.is_empty())
                            .map(String::from)
                            .collect(),
                    )
                }
                "VERIFIER_URL" => layer.verifier_url = Some(value),
                "VERIFIER_TIMEOUT_MS" => layer.verifier_timeout_ms = Some(parsed(&key, &value)?),
                "HASH_ITERATIONS" => layer.hash_iterations = Some(parsed(&key, &value)?),
                _ => {}
            }
        }
        Ok(layer)
    }

    /// `other` wins wherever it has a value.
    pub fn overlay(self, other: ConfigLayer) -> ConfigLayer {
        ConfigLayer {
            port: other.port.or(self.port),
            host: other.host.or(self.host),
            data_dir: other.data_dir.or(self.data_dir),
            jwt_secret: other.jwt_secret.or(self.jwt_secret),
            token_ttl_seconds: other.token_ttl_seconds.or(self.token_ttl_seconds),
            max_upload_bytes: other.max_upload_bytes.or(self.max_upload_bytes),
            cors_allowed_origins: other.cors_allowed_origins.or(self.cors_allowed_origins),
            verifier_url: other.verifier_url.or(self.verifier_url),
            verifier_timeout_ms: other.verifier_timeout_ms.or(self.verifier_timeout_ms),
            hash_iterations: other.hash_iterations.or(self.hash_iterations),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceConfig {
    pub port: u16,
    pub host: String,
    pub data_dir: PathBuf,
    pub jwt_secret: String,
    pub token_ttl_seconds: i64,
    pub max_upload_bytes: usize,
    pub cors_allowed_origins: Vec<String>,
    pub verifier_url: Option<String>,
    pub verifier_timeout: Duration,
    pub hash_iterations: u32,
}

impl ServiceConfig {
    /// Stacks `file < env < flags` and checks the result.
    pub fn resolve(
        file: Option<&Path>,
        env: ConfigLayer,
        flags: ConfigLayer,
    ) -> Result<Self, ConfigError> {
        let base = match file {
            Some(path) => ConfigLayer::from_file(path)?,
            None => ConfigLayer::default(),
        };
        Self::from_layer(base.overlay(env).overlay(flags))
    }

    pub fn from_layer(layer: ConfigLayer) -> Result<Self, ConfigError> {
        let port = layer.port.unwrap_or(u64::from(DEFAULT_PORT));
        let port = u16::try_from(port)
            .ok()
            .filter(|p| *p != 0)
            .ok_or(ConfigError::Port(port))?;
        let jwt_secret = layer
            .jwt_secret
            .filter(|s| !s.is_empty())
            .ok_or(ConfigError::MissingSecret)?;
        let token_ttl_seconds = layer.token_ttl_seconds.unwrap_or(DEFAULT_TTL_SECONDS);
        if token_ttl_seconds <= 0 {
            return Err(ConfigError::Invalid {
                name: "token_ttl_seconds".into(),
                message: "must be positive".into(),
            });
        }
        let max_upload_bytes = layer.max_upload_bytes.unwrap_or(DEFAULT_MAX_UPLOAD_BYTES);
        if max_upload_bytes == 0 {
            return Err(ConfigError::Invalid {
                name: "max_upload_bytes".into(),
                message: "must be positive".into(),
            });
        }
        let hash_iterations = layer.hash_iterations.unwrap_or(DEFAULT_ITERATIONS);
        if hash_iterations == 0 {
            return Err(ConfigError::Invalid {
                name: "hash_iterations".into(),
                message: "must be positive".into(),
            });
        }
        let verifier_url = layer.verifier_url.filter(|s| !s.is_empty());
        if verifier_url
            .as_deref()
            .is_some_and(|u| !u.starts_with("http://"))
        {
            return Err(ConfigError::Invalid {
                name: "verifier_url".into(),
                message: "must be an http:// URL (TLS is not built in)".into(),
            });
        }
        Ok(Self {
            port,
            host: layer.host.unwrap_or_else(|| DEFAULT_HOST.to_string()),
            data_dir: layer
                .data_dir
                .unwrap_or_else(|| PathBuf::from(DEFAULT_DATA_DIR)),
            jwt_secret,
            token_ttl_seconds,
            max_upload_bytes,
            cors_allowed_origins: layer.cors_allowed_origins.unwrap_or_default(),
            verifier_url,
            verifier_timeout: Duration::from_millis(layer.verifier_timeout_ms.unwrap_or(10_000)),
            hash_iterations,
        })
    }

    pub fn service_options(&self) -> ServiceOptions {
        let mut options = ServiceOptions::new(self.jwt_secret.clone());
        options.data_dir = Some(self.data_dir.clone());
        options.auth.token_ttl_seconds = self.token_ttl_seconds;
        options.auth.hash_iterations = self.hash_iterations;
        options.max_upload_bytes = self.max_upload_bytes;
        options
    }
}
