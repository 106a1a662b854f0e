//! Class-conditioned generation of candidate examples.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{CompletionRequest, Gateway, GatewayError};
use crate::prompt::{render_generation_prompt, PromptError};
use crate::task::{DecodingConfig, LabeledExample, TaskSpec};

#[derive(Debug, Error)]
pub enum GenerateError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
}

/// An unfiltered generated example. `raw_completion` is kept for auditing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Candidate {
    pub text: String,
    pub intended_label: String,
    pub round: u32,
    pub raw_completion: String,
}

/// Split a generation completion into candidate texts.
///
/// The span before the first marker is a candidate, as is every span that
/// follows a text marker; spans after a label marker are dropped. Candidates
/// are trimmed and empty ones discarded.
pub fn parse_completion(raw: &str, task: &TaskSpec) -> Vec<String> {
    let text_marker = task.text_marker.as_str();
    let label_marker = task.label_marker.as_str();

    let mut out = Vec::new();
    let mut keep_current = true;
    let mut start = 0;
    let mut i = 0;
    let push = |out: &mut Vec<String>, span: &str| {
        let t = span.trim();
        if !t.is_empty() {
            out.push(t.to_string());
        }
    };
    while i < raw.len() {
        let rest = &raw[i..];
        let hit = match (
            rest.starts_with(text_marker),
            rest.starts_with(label_marker),
        ) {
            (true, true) if label_marker.len() > text_marker.len() => Some((label_marker, false)),
            (true, _) => Some((text_marker, true)),
            (false, true) => Some((label_marker, false)),
            (false, false) => None,
        };
        match hit {
            Some((marker, is_text)) => {
                if keep_current {
                    push(&mut out, &raw[start..i]);
                }
                i += marker.len();
                start = i;
                keep_current = is_text;
            }
            None => i += rest.chars().next().map_or(1, char::len_utf8),
        }
    }
    if keep_current {
        push(&mut out, &raw[start..]);
    }
    out
}

/// One generation call for one label.
#[derive(Debug, Clone)]
pub struct GenerationCall<'a> {
    pub task: &'a TaskSpec,
    pub target_label: &'a str,
    pub seeds: &'a [LabeledExample],
    pub decoding: &'a DecodingConfig,
    pub round: u32,
    pub model_ref: &'a str,
    /// Sampling seed forwarded with the request.
    pub seed: Option<u64>,
}

pub fn generate_batch(
    gateway: &dyn Gateway,
    call: &GenerationCall<'_>,
) -> Result<Vec<Candidate>, GenerateError> {
    let label = call
        .task
        .canonical_label(call.target_label)
        .ok_or_else(|| PromptError::UnknownLabel(call.target_label.to_string()))?;
    let prompt = render_generation_prompt(call.task, label, call.seeds)?;
    let mut request = CompletionRequest::new(prompt.text, call.decoding.clone(), call.model_ref)?;
    request.seed = call.seed;
    let response = gateway.complete(&request)?;
    Ok(parse_completion(&response.text, call.task)
        .into_iter()
        .map(|text| Candidate {
            text,
            intended_label: label.to_string(),
            round: call.round,
            raw_completion: response.text.clone(),
        })
        .collect())
}
