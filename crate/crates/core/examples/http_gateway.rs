//! The HTTP client against a local stub server: retries on 5xx, latency
//! measurement, and the chat-completions wire format.
//!
//!     cargo run --example http_gateway

use std::time::Duration;

use fewshot_bootstrap::gateway::stub::{StubReply, StubServer};
use fewshot_bootstrap::gateway::{CompletionRequest, Gateway, GatewayConfig, HttpGateway};
use fewshot_bootstrap::DecodingConfig;

fn main() -> anyhow::Result<()> {
    // Fails twice, then answers after a short delay.
    let server = StubServer::start(|req| match req.index {
        0 | 1 => StubReply::status(503),
        _ => StubReply::completion(" Positive").after(Duration::from_millis(40)),
    })?;
    let mut config = GatewayConfig::new(server.url(), "demo-model");
    config.backoff_base_ms = 50;
    println!("gateway config:\n{}", toml::to_string(&config)?);

    let gateway = HttpGateway::new(config)?;
    let request = CompletionRequest::new(
        "Classify the sentiment of the given movie review into Positive or Negative\n\nText: a delight\nLabel:",
        DecodingConfig::greedy(8),
        "",
    )?;
    let response = gateway.complete(&request)?;
    println!("reply {:?} after {} attempts, latency {:?}", response.text, server.hits(), response.latency);

    println!("request body:\n{}", serde_json::to_string_pretty(&gateway.request_body(&request))?);
    Ok(())
}
