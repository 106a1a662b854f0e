use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{CompletionRequest, CompletionResponse, Gateway, GatewayError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Matcher {
    Any,
    Contains(String),
}

impl Matcher {
    pub fn contains(needle: impl Into<String>) -> Self {
        Matcher::Contains(needle.into())
    }

    fn matches(&self, prompt: &str) -> bool {
        match self {
            Matcher::Any => true,
            Matcher::Contains(needle) => prompt.contains(needle.as_str()),
        }
    }
}

fn one_use() -> Option<u32> {
    Some(1)
}

/// A scripted reply. `uses` of `None` never runs out.
///
/// In a script file each entry is
/// `{"matcher": "any" | {"contains": "..."}, "response": "...", "uses": 1}`;
/// `uses` defaults to 1 and `null` means unlimited.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptEntry {
    pub matcher: Matcher,
    pub response: String,
    #[serde(default = "one_use")]
    pub uses: Option<u32>,
}

impl ScriptEntry {
    pub fn once(matcher: Matcher, response: impl Into<String>) -> Self {
        Self {
            matcher,
            response: response.into(),
            uses: Some(1),
        }
    }

    pub fn always(matcher: Matcher, response: impl Into<String>) -> Self {
        Self {
            matcher,
            response: response.into(),
            uses: None,
        }
    }
}

/// Replays a fixed script: every call consumes the first live entry whose
/// matcher accepts the prompt. Latency is always zero.
#[derive(Debug)]
pub struct ScriptedMock {
    entries: Mutex<Vec<ScriptEntry>>,
}

/// Single-use script entries, consumed in order of first match.
pub fn scripted_mock(script: Vec<(Matcher, String)>) -> ScriptedMock {
    ScriptedMock::new(
        script
            .into_iter()
            .map(|(m, r)| ScriptEntry::once(m, r))
            .collect(),
    )
}

impl ScriptedMock {
    pub fn new(entries: Vec<ScriptEntry>) -> Self {
        Self {
            entries: Mutex::new(entries),
        }
    }

    pub fn from_json(raw: &str) -> Result<Self, GatewayError> {
        let entries: Vec<ScriptEntry> = serde_json::from_str(raw)
            .map_err(|e| GatewayError::Config(format!("bad mock script: {e}")))?;
        Ok(Self::new(entries))
    }

    pub fn remaining(&self) -> usize {
        self.entries
            .lock()
            .expect("script lock")
            .iter()
            .filter(|e| e.uses != Some(0))
            .count()
    }
}

fn excerpt(prompt: &str) -> String {
    const KEEP: usize = 80;
    if prompt.chars().count() <= KEEP {
        prompt.to_string()
    } else {
        let tail: String = prompt
            .chars()
            .rev()
            .take(KEEP)
            .collect::<Vec<_>>()
            .into_iter()
            .rev()
            .collect();
        format!("...{tail}")
    }
}

impl Gateway for ScriptedMock {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, GatewayError> {
        request.validate()?;
        let mut entries = self.entries.lock().expect("script lock");
        let entry = entries
            .iter_mut()
            .find(|e| e.uses != Some(0) && e.matcher.matches(&request.prompt))
            .ok_or_else(|| GatewayError::UnscriptedPrompt(excerpt(&request.prompt)))?;
        if let Some(n) = entry.uses.as_mut() {
            *n -= 1;
        }
        Ok(CompletionResponse::instant(entry.response.clone()))
    }
}

type Responder = dyn Fn(&CompletionRequest) -> Result<String, GatewayError> + Send + Sync;

/// A mock whose reply is computed from the request. Latency is always zero.
pub struct FnMock {
    respond: Box<Responder>,
}

impl FnMock {
    pub fn new(
        respond: impl Fn(&CompletionRequest) -> Result<String, GatewayError> + Send + Sync + 'static,
    ) -> Self {
        Self {
            respond: Box::new(respond),
        }
    }
}

impl Gateway for FnMock {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, GatewayError> {
        request.validate()?;
        (self.respond)(request).map(CompletionResponse::instant)
    }
}
