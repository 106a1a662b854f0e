use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use log::{debug, warn};

use super::wire::{ChatMessage, ChatRequest, ChatResponse};
use super::{
    truncate_at_stop, CompletionRequest, CompletionResponse, Gateway, GatewayConfig, GatewayError,
};

/// Blocking chat-completions client with bounded retries and an in-flight
/// admission limit.
///
/// Timeouts and 5xx replies are retried up to `max_retries` times, sleeping
/// `backoff_base_ms * 2^(n-1)` before retry `n`. Anything else fails at once.
pub struct HttpGateway {
    config: GatewayConfig,
    client: reqwest::blocking::Client,
    admission: Admission,
}

enum Failure {
    Timeout,
    Status(u16),
}

impl HttpGateway {
    pub fn new(config: GatewayConfig) -> Result<Self, GatewayError> {
        config.validate()?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(config.timeout_secs))
            .build()
            .map_err(|e| GatewayError::Config(e.to_string()))?;
        let admission = Admission::new(config.max_in_flight);
        Ok(Self {
            config,
            client,
            admission,
        })
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.config
    }

    /// The JSON body sent for `request`.
    pub fn request_body(&self, request: &CompletionRequest) -> ChatRequest {
        let decoding = &request.decoding;
        let model = if request.model_ref.is_empty() {
            self.config.model_ref.clone()
        } else {
            request.model_ref.clone()
        };
        ChatRequest {
            model,
            messages: vec![ChatMessage {
                role: "user".into(),
                content: request.prompt.clone(),
            }],
            temperature: decoding.temperature,
            max_tokens: decoding.max_new_tokens,
            top_k: self.config.send_extensions.then_some(decoding.top_k),
            num_beams: self.config.send_extensions.then_some(decoding.num_beams),
            stop: (!decoding.stop_sequences.is_empty()).then(|| decoding.stop_sequences.clone()),
            seed: request.seed,
        }
    }

    fn backoff(&self, retry: u32) -> Duration {
        Duration::from_millis(
            self.config
                .backoff_base_ms
                .saturating_mul(1 << (retry - 1).min(20)),
        )
    }

    fn attempt(
        &self,
        body: &ChatRequest,
    ) -> Result<Result<CompletionResponse, Failure>, GatewayError> {
        let started = Instant::now();
        let sent = self.client.post(&self.config.endpoint).json(body).send();
        let response = match sent {
            Ok(r) => r,
            Err(e) if e.is_timeout() => return Ok(Err(Failure::Timeout)),
            Err(e) => {
                return Err(GatewayError::TransportFailure {
                    status: e.status().map(|s| s.as_u16()),
                    message: e.to_string(),
                })
            }
        };
        let status = response.status();
        let payload = match response.text() {
            Ok(t) => t,
            Err(e) if e.is_timeout() => return Ok(Err(Failure::Timeout)),
            Err(e) => {
                return Err(GatewayError::TransportFailure {
                    status: Some(status.as_u16()),
                    message: e.to_string(),
                })
            }
        };
        let latency = started.elapsed();
        if status.is_server_error() {
            return Ok(Err(Failure::Status(status.as_u16())));
        }
        if !status.is_success() {
            return Err(GatewayError::TransportFailure {
                status: Some(status.as_u16()),
                message: payload,
            });
        }
        let parsed: ChatResponse =
            serde_json::from_str(&payload).map_err(|e| GatewayError::TransportFailure {
                status: Some(status.as_u16()),
                message: format!("unreadable completion body: {e}"),
            })?;
        let choice =
            parsed
                .choices
                .into_iter()
                .next()
                .ok_or_else(|| GatewayError::TransportFailure {
                    status: Some(status.as_u16()),
                    message: "completion has no choices".into(),
                })?;
        Ok(Ok(CompletionResponse {
            text: choice.message.content,
            latency,
            request_tokens: parsed.usage.as_ref().map(|u| u.prompt_tokens),
            response_tokens: parsed.usage.as_ref().map(|u| u.completion_tokens),
        }))
    }
}

impl Gateway for HttpGateway {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, GatewayError> {
        request.validate()?;
        let body = self.request_body(request);
        let _permit = self.admission.acquire();

        let mut last = Failure::Timeout;
        let attempts = self.config.max_retries + 1;
        for attempt in 0..attempts {
            if attempt > 0 {
                let wait = self.backoff(attempt);
                debug!("retry {attempt} after {wait:?}");
                std::thread::sleep(wait);
            }
            match self.attempt(&body)? {
                Ok(mut response) => {
                    response.text =
                        truncate_at_stop(&response.text, &request.decoding.stop_sequences);
                    return Ok(response);
                }
                Err(failure) => {
                    match &failure {
                        Failure::Timeout => warn!("completion attempt {} timed out", attempt + 1),
                        Failure::Status(s) => {
                            warn!("completion attempt {} got status {s}", attempt + 1)
                        }
                    }
                    last = failure;
                }
            }
        }
        Err(match last {
            Failure::Timeout => GatewayError::Timeout { attempts },
            Failure::Status(last_status) => GatewayError::ExhaustedRetries {
                attempts,
                last_status,
            },
        })
    }
}

/// Counting semaphore bounding concurrent requests.
struct Admission {
    limit: usize,
    in_flight: Mutex<usize>,
    freed: Condvar,
}

struct Permit<'a>(&'a Admission);

impl Admission {
    fn new(limit: usize) -> Self {
        Self {
            limit,
            in_flight: Mutex::new(0),
            freed: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut n = self.in_flight.lock().expect("admission lock");
        while *n >= self.limit {
            n = self.freed.wait(n).expect("admission lock");
        }
        *n += 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.in_flight.lock().expect("admission lock") -= 1;
        self.0.freed.notify_one();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::task::DecodingConfig;

    #[test]
    fn body_carries_decoding_and_extensions() {
        let mut cfg = GatewayConfig::new("http://127.0.0.1:9/x", "default-model");
        let gw = HttpGateway::new(cfg.clone()).unwrap();
        let decoding = DecodingConfig {
            stop_sequences: vec!["\n".into()],
            ..DecodingConfig::default()
        };
        let req = CompletionRequest::new("hello", decoding, "")
            .unwrap()
            .with_seed(5);
        let body = gw.request_body(&req);
        assert_eq!(body.model, "default-model");
        assert_eq!(body.prompt(), Some("hello"));
        assert_eq!(
            (body.top_k, body.num_beams, body.seed),
            (Some(50), Some(1), Some(5))
        );
        assert_eq!(body.stop, Some(vec!["\n".to_string()]));

        cfg.send_extensions = false;
        let gw = HttpGateway::new(cfg).unwrap();
        let body = gw.request_body(&req);
        assert_eq!((body.top_k, body.num_beams), (None, None));
    }

    #[test]
    fn backoff_doubles() {
        let gw = HttpGateway::new(GatewayConfig::new("http://127.0.0.1:9/x", "m")).unwrap();
        let waits: Vec<u64> = (1..=3).map(|r| gw.backoff(r).as_millis() as u64).collect();
        assert_eq!(waits, vec![1000, 2000, 4000]);
    }

    #[test]
    fn admission_bounds_concurrency() {
        use std::sync::atomic::{AtomicUsize, Ordering};
        let adm = Admission::new(2);
        let live = AtomicUsize::new(0);
        let peak = AtomicUsize::new(0);
        std::thread::scope(|s| {
            for _ in 0..8 {
                s.spawn(|| {
                    let _p = adm.acquire();
                    let now = live.fetch_add(1, Ordering::SeqCst) + 1;
                    peak.fetch_max(now, Ordering::SeqCst);
                    std::thread::sleep(Duration::from_millis(5));
                    live.fetch_sub(1, Ordering::SeqCst);
                });
            }
        });
        assert!(peak.load(Ordering::SeqCst) <= 2);
    }
}
