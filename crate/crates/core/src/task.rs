//! Domain types shared by every stage of the pipeline.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TaskError {
    #[error("task needs at least 2 labels, got {0}")]
    TooFewLabels(usize),
    #[error("label {0:?} is empty or contains a newline")]
    BadLabel(String),
    #[error("label {0:?} appears more than once (case-insensitive)")]
    DuplicateLabel(String),
    #[error("text and label markers must be non-empty and distinct")]
    BadMarkers,
    #[error("invalid generation plan: {0}")]
    BadPlan(&'static str),
    #[error("invalid decoding config: {0}")]
    BadDecoding(&'static str),
    #[error("failed to read task file {path}: {reason}")]
    Unreadable { path: String, reason: String },
}

fn default_text_marker() -> String {
    "Text:".to_string()
}

fn default_label_marker() -> String {
    "Label:".to_string()
}

/// A single-label classification task and the vocabulary its prompts use.
///
/// `generation_instruction` may use `{label}` (label lowercased, as it reads
/// mid-sentence), `{Label}` (label verbatim) and `{domain_noun}`.
/// `classification_instruction` may use `{label_list}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub task_id: String,
    pub labels: Vec<String>,
    pub domain_noun: String,
    pub generation_instruction: String,
    pub classification_instruction: String,
    #[serde(default = "default_text_marker")]
    pub text_marker: String,
    #[serde(default = "default_label_marker")]
    pub label_marker: String,
}

impl TaskSpec {
    pub fn validate(&self) -> Result<(), TaskError> {
        if self.labels.len() < 2 {
            return Err(TaskError::TooFewLabels(self.labels.len()));
        }
        let mut seen: Vec<String> = Vec::with_capacity(self.labels.len());
        for label in &self.labels {
            if label.trim().is_empty() || label.contains('\n') || label.contains('\r') {
                return Err(TaskError::BadLabel(label.clone()));
            }
            let key = label_key(label);
            if seen.contains(&key) {
                return Err(TaskError::DuplicateLabel(label.clone()));
            }
            seen.push(key);
        }
        if self.text_marker.is_empty()
            || self.label_marker.is_empty()
            || self.text_marker == self.label_marker
        {
            return Err(TaskError::BadMarkers);
        }
        Ok(())
    }

    pub fn from_json_file(path: &Path) -> Result<Self, TaskError> {
        let unreadable = |reason: String| TaskError::Unreadable {
            path: path.display().to_string(),
            reason,
        };
        let raw = std::fs::read_to_string(path).map_err(|e| unreadable(e.to_string()))?;
        let task: TaskSpec = serde_json::from_str(&raw).map_err(|e| unreadable(e.to_string()))?;
        task.validate()?;
        Ok(task)
    }

    /// Map a free-form label string onto the task's canonical casing.
    pub fn canonical_label(&self, raw: &str) -> Option<&str> {
        let key = label_key(raw);
        self.labels
            .iter()
            .find(|l| label_key(l) == key)
            .map(String::as_str)
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        let key = label_key(label);
        self.labels.iter().position(|l| label_key(l) == key)
    }

    /// `A or B` for two labels, `A, B, or C` otherwise.
    pub fn label_list(&self) -> String {
        match self.labels.as_slice() {
            [a, b] => format!("{a} or {b}"),
            [init @ .., last] => format!("{}, or {last}", init.join(", ")),
            [] => String::new(),
        }
    }
}

/// Comparison key for labels: trimmed and lowercased.
pub fn label_key(label: &str) -> String {
    label.trim().to_lowercase()
}

pub fn labels_match(a: &str, b: &str) -> bool {
    label_key(a) == label_key(b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Real,
    Synthetic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictKind {
    Accepted,
    RejectedDuplicate,
    RejectedTooShort,
    RejectedTooLong,
    RejectedMalformed,
    RejectedInconsistent,
    RejectedUnparseable,
}

impl VerdictKind {
    pub const ALL: [VerdictKind; 7] = [
        VerdictKind::Accepted,
        VerdictKind::RejectedDuplicate,
        VerdictKind::RejectedTooShort,
        VerdictKind::RejectedTooLong,
        VerdictKind::RejectedMalformed,
        VerdictKind::RejectedInconsistent,
        VerdictKind::RejectedUnparseable,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            VerdictKind::Accepted => "accepted",
            VerdictKind::RejectedDuplicate => "rejected_duplicate",
            VerdictKind::RejectedTooShort => "rejected_too_short",
            VerdictKind::RejectedTooLong => "rejected_too_long",
            VerdictKind::RejectedMalformed => "rejected_malformed",
            VerdictKind::RejectedInconsistent => "rejected_inconsistent",
            VerdictKind::RejectedUnparseable => "rejected_unparseable",
        }
    }

    fn carries_prediction(self) -> bool {
        matches!(
            self,
            VerdictKind::Accepted | VerdictKind::RejectedInconsistent
        )
    }
}

impl FromStr for VerdictKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        VerdictKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown verdict kind {s:?}"))
    }
}

/// Outcome of filtering one candidate.
///
/// The predicted label is present exactly for `accepted` and
/// `rejected_inconsistent`. On disk a verdict is a single string,
/// `kind` or `kind:predicted_label`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FilterVerdict {
    kind: VerdictKind,
    predicted_label: Option<String>,
}

impl FilterVerdict {
    pub fn accepted(predicted: impl Into<String>) -> Self {
        Self {
            kind: VerdictKind::Accepted,
            predicted_label: Some(predicted.into()),
        }
    }

    pub fn inconsistent(predicted: impl Into<String>) -> Self {
        Self {
            kind: VerdictKind::RejectedInconsistent,
            predicted_label: Some(predicted.into()),
        }
    }

    /// A verdict kind that never carries a predicted label.
    pub fn rejected(kind: VerdictKind) -> Self {
        assert!(
            !kind.carries_prediction(),
            "{} requires a predicted label",
            kind.as_str()
        );
        Self {
            kind,
            predicted_label: None,
        }
    }

    pub fn kind(&self) -> VerdictKind {
        self.kind
    }

    pub fn predicted_label(&self) -> Option<&str> {
        self.predicted_label.as_deref()
    }

    pub fn is_accepted(&self) -> bool {
        self.kind == VerdictKind::Accepted
    }
}

impl fmt::Display for FilterVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.predicted_label {
            Some(label) => write!(f, "{}:{label}", self.kind.as_str()),
            None => f.write_str(self.kind.as_str()),
        }
    }
}

impl FromStr for FilterVerdict {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, predicted) = match s.split_once(':') {
            Some((kind, label)) => (kind.parse::<VerdictKind>()?, Some(label.to_string())),
            None => (s.parse::<VerdictKind>()?, None),
        };
        if kind.carries_prediction() != predicted.is_some() {
            return Err(format!(
                "verdict {s:?}: predicted label must be present iff kind is accepted or rejected_inconsistent"
            ));
        }
        Ok(Self {
            kind,
            predicted_label: predicted,
        })
    }
}

impl Serialize for FilterVerdict {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FilterVerdict {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

/// One labeled text with provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabeledExample {
    pub text: String,
    pub label: String,
    pub source: Source,
    pub round: u32,
    pub verdict: Option<FilterVerdict>,
}

impl LabeledExample {
    pub fn real(text: impl Into<String>, label: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            label: label.into(),
            source: Source::Real,
            round: 0,
            verdict: None,
        }
    }

    pub fn synthetic(
        text: impl Into<String>,
        label: impl Into<String>,
        round: u32,
        verdict: FilterVerdict,
    ) -> Self {
        Self {
            text: text.into(),
            label: label.into(),
            source: Source::Synthetic,
            round,
            verdict: Some(verdict),
        }
    }

    /// Checks the invariants that do not need a task.
    pub fn check_shape(&self) -> Result<(), String> {
        if self.text.trim().is_empty() {
            return Err("text is empty".into());
        }
        match self.source {
            Source::Real if self.round != 0 || self.verdict.is_some() => {
                Err("real examples carry round 0 and no verdict".into())
            }
            Source::Synthetic if self.round == 0 || self.verdict.is_none() => {
                Err("synthetic examples carry round >= 1 and a verdict".into())
            }
            _ => Ok(()),
        }
    }
}

/// Budget for the generate/filter loop.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationPlan {
    pub n_per_class: u32,
    pub seeds_per_class: u32,
    pub batch_size: u32,
    pub max_rounds: u32,
    pub rng_seed: u64,
}

impl Default for GenerationPlan {
    fn default() -> Self {
        Self {
            n_per_class: 21,
            seeds_per_class: 4,
            batch_size: 8,
            max_rounds: 40,
            rng_seed: 0,
        }
    }
}

impl GenerationPlan {
    /// `n_per_class` may be zero: that run yields the real seeds only.
    pub fn validate(&self) -> Result<(), TaskError> {
        if self.seeds_per_class < 1 {
            return Err(TaskError::BadPlan("seeds_per_class must be >= 1"));
        }
        if self.batch_size < 1 {
            return Err(TaskError::BadPlan("batch_size must be >= 1"));
        }
        if self.max_rounds < 1 {
            return Err(TaskError::BadPlan("max_rounds must be >= 1"));
        }
        Ok(())
    }
}

/// Sampling parameters sent with each completion request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodingConfig {
    pub temperature: f64,
    pub top_k: u32,
    pub num_beams: u32,
    pub max_new_tokens: u32,
    #[serde(default)]
    pub stop_sequences: Vec<String>,
}

impl Default for DecodingConfig {
    fn default() -> Self {
        Self {
            temperature: 1.0,
            top_k: 50,
            num_beams: 1,
            max_new_tokens: 128,
            stop_sequences: Vec::new(),
        }
    }
}

impl DecodingConfig {
    /// Greedy decoding for classification: temperature 0, top-k 1.
    pub fn greedy(max_new_tokens: u32) -> Self {
        Self {
            temperature: 0.0,
            top_k: 1,
            num_beams: 1,
            max_new_tokens,
            stop_sequences: Vec::new(),
        }
    }

    pub fn is_greedy(&self) -> bool {
        self.temperature == 0.0 && self.top_k == 1
    }

    pub fn validate(&self) -> Result<(), TaskError> {
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(TaskError::BadDecoding("temperature must be > 0"));
        }
        if self.temperature == 0.0 && self.top_k != 1 {
            return Err(TaskError::BadDecoding(
                "temperature 0 is only valid as greedy decoding (top_k = 1)",
            ));
        }
        if self.top_k < 1 {
            return Err(TaskError::BadDecoding("top_k must be >= 1"));
        }
        if self.num_beams < 1 {
            return Err(TaskError::BadDecoding("num_beams must be >= 1"));
        }
        if self.max_new_tokens < 1 {
            return Err(TaskError::BadDecoding("max_new_tokens must be >= 1"));
        }
        Ok(())
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn sst2() -> TaskSpec {
        TaskSpec {
            task_id: "sst2".into(),
            labels: vec!["Positive".into(), "Negative".into()],
            domain_noun: "movie reviews".into(),
            generation_instruction:
                "Few examples of {domain_noun} having {label} sentiment are given. Generate more {label} reviews"
                    .into(),
            classification_instruction:
                "Classify the sentiment of the given movie review into {label_list}".into(),
            text_marker: default_text_marker(),
            label_marker: default_label_marker(),
        }
    }

    pub fn trec() -> TaskSpec {
        TaskSpec {
            task_id: "trec".into(),
            labels: ["Abbreviation", "Entity", "Description", "Human", "Location", "Numeric"]
                .map(String::from)
                .to_vec(),
            domain_noun: "questions".into(),
            generation_instruction:
                "Few examples of {domain_noun} asking about a {label} are given. Generate more {label} questions"
                    .into(),
            classification_instruction: "Classify the given question into {label_list}".into(),
            text_marker: default_text_marker(),
            label_marker: default_label_marker(),
        }
    }
}
