use std::path::Path;

use serde::{Deserialize, Serialize};

use super::GatewayError;

pub const ENV_ENDPOINT: &str = "BOOTSTRAP_ENDPOINT";
pub const ENV_MODEL: &str = "BOOTSTRAP_MODEL";

/// Connection settings for [`super::HttpGateway`], usually read from a TOML
/// file:
///
/// ```toml
/// endpoint = "http://127.0.0.1:8000/v1/chat/completions"
/// model_ref = "lmsys/vicuna-7b-v1.5"
/// timeout_secs = 60
/// max_retries = 3
/// max_in_flight = 4
/// ```
///
/// `BOOTSTRAP_ENDPOINT` and `BOOTSTRAP_MODEL` override the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GatewayConfig {
    #[serde(default)]
    pub endpoint: String,
    #[serde(default)]
    pub model_ref: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    /// First backoff delay; later retries double it.
    #[serde(default = "default_backoff")]
    pub backoff_base_ms: u64,
    /// Send `top_k` / `num_beams` to the server.
    #[serde(default = "default_true")]
    pub send_extensions: bool,
}

fn default_timeout() -> f64 {
    60.0
}
fn default_retries() -> u32 {
    3
}
fn default_in_flight() -> usize {
    4
}
fn default_backoff() -> u64 {
    1000
}
fn default_true() -> bool {
    true
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            endpoint: String::new(),
            model_ref: String::new(),
            timeout_secs: default_timeout(),
            max_retries: default_retries(),
            max_in_flight: default_in_flight(),
            backoff_base_ms: default_backoff(),
            send_extensions: true,
        }
    }
}

impl GatewayConfig {
    pub fn new(endpoint: impl Into<String>, model_ref: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            model_ref: model_ref.into(),
            ..Self::default()
        }
    }

    pub fn from_toml_str(raw: &str) -> Result<Self, GatewayError> {
        toml::from_str(raw).map_err(|e| GatewayError::Config(e.to_string()))
    }

    /// Read the file (if any), then apply environment overrides.
    pub fn load(path: Option<&Path>) -> Result<Self, GatewayError> {
        let mut config = match path {
            Some(p) => {
                let raw = std::fs::read_to_string(p)
                    .map_err(|e| GatewayError::Config(format!("{}: {e}", p.display())))?;
                Self::from_toml_str(&raw)?
            }
            None => Self::default(),
        };
        config.apply_overrides(|key| std::env::var(key).ok());
        Ok(config)
    }

    pub fn apply_overrides(&mut self, lookup: impl Fn(&str) -> Option<String>) {
        if let Some(endpoint) = lookup(ENV_ENDPOINT).filter(|v| !v.is_empty()) {
            self.endpoint = endpoint;
        }
        if let Some(model) = lookup(ENV_MODEL).filter(|v| !v.is_empty()) {
            self.model_ref = model;
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.endpoint.is_empty() {
            return Err(GatewayError::Config(format!(
                "no endpoint (set it in the config file or {ENV_ENDPOINT})"
            )));
        }
        if !(self.timeout_secs.is_finite() && self.timeout_secs > 0.0) {
            return Err(GatewayError::Config("timeout_secs must be > 0".into()));
        }
        if self.max_in_flight == 0 {
            return Err(GatewayError::Config("max_in_flight must be >= 1".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_defaults_and_overrides() {
        let mut c = GatewayConfig::from_toml_str(
            "endpoint = \"http://a/v1/chat/completions\"\nmodel_ref = \"vicuna\"\n",
        )
        .unwrap();
        assert_eq!(c.max_retries, 3);
        assert_eq!(c.max_in_flight, 4);
        assert_eq!(c.backoff_base_ms, 1000);
        c.apply_overrides(|k| (k == ENV_MODEL).then(|| "other".to_string()));
        assert_eq!(c.model_ref, "other");
        assert_eq!(c.endpoint, "http://a/v1/chat/completions");
        assert!(c.validate().is_ok());
    }

    #[test]
    fn rejects_unknown_keys_and_missing_endpoint() {
        assert!(GatewayConfig::from_toml_str("bogus = 1").is_err());
        assert!(GatewayConfig::default().validate().is_err());
    }
}
