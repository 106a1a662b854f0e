//! Completion clients.
//!
//! Everything that talks to a model goes through [`Gateway`]. Production
//! runs use [`HttpGateway`] against any chat-completions compatible server;
//! tests and offline demos use [`ScriptedMock`] or [`FnMock`], optionally
//! wrapped in a [`Recorder`] to capture the transcript.

use std::sync::Mutex;
use std::time::Duration;

use thiserror::Error;

use crate::task::DecodingConfig;

mod config;
mod http;
mod mock;
pub mod stub;
pub mod wire;

pub use config::GatewayConfig;
pub use http::HttpGateway;
pub use mock::{scripted_mock, FnMock, Matcher, ScriptEntry, ScriptedMock};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GatewayError {
    #[error("request timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("transport failure (status {status:?}): {message}")]
    TransportFailure {
        status: Option<u16>,
        message: String,
    },
    #[error("gave up after {attempts} attempts, last status {last_status}")]
    ExhaustedRetries { attempts: u32, last_status: u16 },
    #[error("no script entry matches prompt {0:?}")]
    UnscriptedPrompt(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("bad gateway configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionRequest {
    pub prompt: String,
    pub decoding: DecodingConfig,
    pub model_ref: String,
    /// Per-request sampling seed, forwarded to servers that honor one.
    pub seed: Option<u64>,
}

impl CompletionRequest {
    pub fn new(
        prompt: impl Into<String>,
        decoding: DecodingConfig,
        model_ref: impl Into<String>,
    ) -> Result<Self, GatewayError> {
        let request = Self {
            prompt: prompt.into(),
            decoding,
            model_ref: model_ref.into(),
            seed: None,
        };
        request.validate()?;
        Ok(request)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.prompt.is_empty() {
            return Err(GatewayError::InvalidRequest("empty prompt".into()));
        }
        self.decoding
            .validate()
            .map_err(|e| GatewayError::InvalidRequest(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionResponse {
    pub text: String,
    pub latency: Duration,
    pub request_tokens: Option<u32>,
    pub response_tokens: Option<u32>,
}

impl CompletionResponse {
    pub(crate) fn instant(text: String) -> Self {
        Self {
            text,
            latency: Duration::ZERO,
            request_tokens: None,
            response_tokens: None,
        }
    }
}

/// A model behind a completion interface. Implementations are shared across
/// worker threads.
pub trait Gateway: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, GatewayError>;
}

impl<G: Gateway + ?Sized> Gateway for &G {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, GatewayError> {
        (**self).complete(request)
    }
}

impl<G: Gateway + ?Sized> Gateway for Box<G> {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, GatewayError> {
        (**self).complete(request)
    }
}

impl<G: Gateway + ?Sized> Gateway for std::sync::Arc<G> {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, GatewayError> {
        (**self).complete(request)
    }
}

/// A scripted mock when `mock_script` is given, otherwise an HTTP client
/// configured from `config` (or defaults) plus environment overrides.
pub fn open(
    config: Option<&std::path::Path>,
    mock_script: Option<&std::path::Path>,
) -> Result<Box<dyn Gateway>, GatewayError> {
    if let Some(path) = mock_script {
        let raw = std::fs::read_to_string(path)
            .map_err(|e| GatewayError::Config(format!("cannot read {}: {e}", path.display())))?;
        return Ok(Box::new(ScriptedMock::from_json(&raw)?));
    }
    Ok(Box::new(HttpGateway::new(GatewayConfig::load(config)?)?))
}

/// One request/response pair seen by a [`Recorder`].
#[derive(Debug, Clone, PartialEq)]
pub struct Exchange {
    pub prompt: String,
    pub seed: Option<u64>,
    pub response: Result<String, GatewayError>,
}

/// Wraps a gateway and keeps every exchange in call order.
pub struct Recorder<G> {
    inner: G,
    log: Mutex<Vec<Exchange>>,
}

impl<G: Gateway> Recorder<G> {
    pub fn new(inner: G) -> Self {
        Self {
            inner,
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn transcript(&self) -> Vec<Exchange> {
        self.log.lock().expect("recorder lock").clone()
    }

    pub fn calls(&self) -> usize {
        self.log.lock().expect("recorder lock").len()
    }

    /// Number of recorded prompts containing `needle`.
    pub fn count_matching(&self, needle: &str) -> usize {
        self.log
            .lock()
            .expect("recorder lock")
            .iter()
            .filter(|x| x.prompt.contains(needle))
            .count()
    }
}

impl<G: Gateway> Gateway for Recorder<G> {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, GatewayError> {
        let result = self.inner.complete(request);
        self.log.lock().expect("recorder lock").push(Exchange {
            prompt: request.prompt.clone(),
            seed: request.seed,
            response: result
                .as_ref()
                .map(|r| r.text.clone())
                .map_err(Clone::clone),
        });
        result
    }
}

/// Cut `text` at the first occurrence of any stop sequence.
pub fn truncate_at_stop(text: &str, stops: &[String]) -> String {
    let cut = stops
        .iter()
        .filter(|s| !s.is_empty())
        .filter_map(|s| text.find(s.as_str()))
        .min()
        .unwrap_or(text.len());
    text[..cut].to_string()
}
