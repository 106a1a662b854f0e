//! Accuracy and latency of a served model in 0-shot, ICL or tuned mode.
//!
//! Tuned mode uses the zero-shot prompt: a fine-tuned model sees no
//! demonstrations at inference time. Unparseable outputs count as wrong.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::filter::{classification_decoding, parse_label, Prediction};
use crate::gateway::{CompletionRequest, Gateway, GatewayError};
use crate::prompt::{
    render_classification_prompt, render_zero_shot_prompt, PromptError, RenderedPrompt,
};
use crate::task::{labels_match, LabeledExample, TaskSpec};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("test set is empty")]
    EmptyTestset,
    #[error("gold label {0:?} is not part of the task")]
    UnknownLabel(String),
    #[error("failed to write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EvalMode {
    ZeroShot,
    Icl {
        demos: Vec<LabeledExample>,
        rng_seed: u64,
    },
    Tuned,
}

impl EvalMode {
    pub fn name(&self) -> &'static str {
        match self {
            EvalMode::ZeroShot => "zero_shot",
            EvalMode::Icl { .. } => "icl",
            EvalMode::Tuned => "tuned",
        }
    }

    pub fn render(&self, task: &TaskSpec, text: &str) -> Result<RenderedPrompt, PromptError> {
        match self {
            EvalMode::ZeroShot | EvalMode::Tuned => render_zero_shot_prompt(task, text),
            EvalMode::Icl { demos, rng_seed } => {
                render_classification_prompt(task, demos, text, *rng_seed)
            }
        }
    }
}

/// Classify one text; latency is what the gateway reports.
pub fn classify_one(
    gateway: &dyn Gateway,
    task: &TaskSpec,
    mode: &EvalMode,
    text: &str,
) -> Result<(Prediction, Duration), EvalError> {
    classify_with_model(gateway, task, mode, text, "")
}

fn classify_with_model(
    gateway: &dyn Gateway,
    task: &TaskSpec,
    mode: &EvalMode,
    text: &str,
    model_ref: &str,
) -> Result<(Prediction, Duration), EvalError> {
    let prompt = mode.render(task, text)?;
    let request = CompletionRequest::new(prompt.text, classification_decoding(), model_ref)?;
    let response = gateway.complete(&request)?;
    Ok((parse_label(&response.text, task), response.latency))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub text: String,
    pub gold: String,
    /// `None` when the output named no label.
    pub predicted: Option<String>,
    pub latency_ms: f64,
}

impl EvalRecord {
    pub fn is_correct(&self) -> bool {
        self.predicted
            .as_deref()
            .is_some_and(|p| labels_match(p, &self.gold))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelAccuracy {
    pub label: String,
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub accuracy: f64,
    pub correct: usize,
    pub total: usize,
    pub mean_latency_ms: f64,
    pub unparseable: usize,
    pub per_label: Vec<LabelAccuracy>,
    pub records: Vec<EvalRecord>,
}

impl EvalSummary {
    /// Everything except `records` is derived from `records`.
    pub fn from_records(task: &TaskSpec, records: Vec<EvalRecord>) -> Self {
        let total = records.len();
        let correct = records.iter().filter(|r| r.is_correct()).count();
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let per_label = task
            .labels
            .iter()
            .map(|label| {
                let mine = records.iter().filter(|r| labels_match(&r.gold, label));
                let (c, t) = mine.fold((0, 0), |(c, t), r| (c + r.is_correct() as usize, t + 1));
                LabelAccuracy {
                    label: label.clone(),
                    correct: c,
                    total: t,
                    accuracy: ratio(c, t),
                }
            })
            .collect();
        let mean_latency_ms = if total == 0 {
            0.0
        } else {
            records.iter().map(|r| r.latency_ms).sum::<f64>() / total as f64
        };
        Self {
            accuracy: ratio(correct, total),
            correct,
            total,
            mean_latency_ms,
            unparseable: records.iter().filter(|r| r.predicted.is_none()).count(),
            per_label,
            records,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    /// Server-side model name; empty means the gateway default.
    pub model_ref: String,
    /// Concurrent classification calls.
    pub workers: usize,
    /// Where partial summaries go while the run is in progress.
    pub partial_path: Option<PathBuf>,
    pub checkpoint_every: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            model_ref: String::new(),
            workers: 1,
            partial_path: None,
            checkpoint_every: 100,
        }
    }
}

pub fn evaluate(
    gateway: &dyn Gateway,
    task: &TaskSpec,
    mode: &EvalMode,
    testset: &[LabeledExample],
) -> Result<EvalSummary, EvalError> {
    evaluate_with(gateway, task, mode, testset, &EvalOptions::default())
}

pub fn evaluate_with(
    gateway: &dyn Gateway,
    task: &TaskSpec,
    mode: &EvalMode,
    testset: &[LabeledExample],
    options: &EvalOptions,
) -> Result<EvalSummary, EvalError> {
    if testset.is_empty() {
        return Err(EvalError::EmptyTestset);
    }
    if let Some(bad) = testset
        .iter()
        .find(|e| task.canonical_label(&e.label).is_none())
    {
        return Err(EvalError::UnknownLabel(bad.label.clone()));
    }
    if let EvalMode::Icl { demos, rng_seed } = mode {
        // Surface demo problems before any call is made.
        render_classification_prompt(task, demos, "probe", *rng_seed)?;
    }

    let workers = options.workers.max(1);
    let mut records: Vec<EvalRecord> = Vec::with_capacity(testset.len());
    for block in testset.chunks(options.checkpoint_every.max(1)) {
        for group in block.chunks(workers) {
            let results: Vec<Result<(Prediction, Duration), EvalError>> = std::thread::scope(|s| {
                let handles: Vec<_> = group
                    .iter()
                    .map(|ex| {
                        s.spawn(move || {
                            classify_with_model(gateway, task, mode, &ex.text, &options.model_ref)
                        })
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("classification worker panicked"))
                    .collect()
            });
            for (ex, result) in group.iter().zip(results) {
                let (prediction, latency) = result?;
                records.push(EvalRecord {
                    text: ex.text.clone(),
                    gold: task
                        .canonical_label(&ex.label)
                        .unwrap_or(&ex.label)
                        .to_string(),
                    predicted: prediction.label().map(str::to_string),
                    latency_ms: latency.as_secs_f64() * 1000.0,
                });
            }
        }
        if let Some(path) = &options.partial_path {
            if records.len() < testset.len() {
                write_json(path, &EvalSummary::from_records(task, records.clone()))?;
            }
        }
    }
    Ok(EvalSummary::from_records(task, records))
}

/// On-disk evaluation result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryFile {
    pub fingerprint: String,
    pub task_id: String,
    pub mode: String,
    pub model_ref: String,
    pub summary: EvalSummary,
}

/// Hash of everything that determines an evaluation's prompts and decoding.
pub fn eval_fingerprint(task: &TaskSpec, mode: &EvalMode, model_ref: &str) -> String {
    crate::fingerprint(&(task, mode, model_ref, classification_decoding()))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), EvalError> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    std::fs::write(path, text + "\n").map_err(|source| EvalError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn write_summary(path: &Path, file: &SummaryFile) -> Result<(), EvalError> {
    write_json(path, file)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{scripted_mock, FnMock, Matcher, ScriptEntry, ScriptedMock};
    use crate::task::fixtures::sst2;

    fn demos() -> Vec<LabeledExample> {
        (1..=4)
            .flat_map(|i| {
                [
                    LabeledExample::real(format!("good film {i}"), "Positive"),
                    LabeledExample::real(format!("bad film {i}"), "Negative"),
                ]
            })
            .collect()
    }

    #[test]
    fn classify_one_cases() {
        let task = sst2();
        let mock = scripted_mock(vec![
            (Matcher::Any, "Negative".into()),
            (Matcher::Any, "N/A".into()),
        ]);
        let (p, lat) = classify_one(&mock, &task, &EvalMode::ZeroShot, "dull").unwrap();
        assert_eq!(p, Prediction::Label("Negative".into()));
        assert_eq!(lat, Duration::ZERO);
        let (p, _) = classify_one(&mock, &task, &EvalMode::ZeroShot, "dull").unwrap();
        assert_eq!(p, Prediction::Unparseable);
    }

    #[test]
    fn icl_prompt_extends_zero_shot() {
        let task = sst2();
        let icl = EvalMode::Icl {
            demos: demos(),
            rng_seed: 3,
        };
        let z = EvalMode::ZeroShot
            .render(&task, "a fine film")
            .unwrap()
            .text;
        let i = icl.render(&task, "a fine film").unwrap().text;
        assert!(i.len() > z.len());
        let (instr, tail) = z.split_once("\n\n").unwrap();
        assert!(i.starts_with(instr) && i.ends_with(tail));
        assert_eq!(
            EvalMode::Tuned.render(&task, "a fine film").unwrap().text,
            z
        );
    }

    #[test]
    fn accuracy_extremes_and_half() {
        let task = sst2();
        let test: Vec<_> = demos().into_iter().take(4).collect();
        let right = FnMock::new(|r| {
            Ok(if r.prompt.contains("Text: good") {
                "Positive"
            } else {
                "Negative"
            }
            .into())
        });
        assert_eq!(
            evaluate(&right, &task, &EvalMode::ZeroShot, &test)
                .unwrap()
                .accuracy,
            1.0
        );
        let wrong = FnMock::new(|r| {
            Ok(if r.prompt.contains("Text: good") {
                "Negative"
            } else {
                "Positive"
            }
            .into())
        });
        assert_eq!(
            evaluate(&wrong, &task, &EvalMode::ZeroShot, &test)
                .unwrap()
                .accuracy,
            0.0
        );

        // test = [good 1 (P), bad 1 (N), good 2 (P), bad 2 (N)]; answer
        // Positive always -> both P right, both N wrong.
        let always = ScriptedMock::new(vec![ScriptEntry::always(Matcher::Any, "Positive")]);
        let s = evaluate(&always, &task, &EvalMode::ZeroShot, &test).unwrap();
        assert_eq!(s.accuracy, 0.5);
        assert_eq!(s.per_label[0].accuracy, 1.0);
        assert_eq!(s.per_label[1].accuracy, 0.0);
        assert_eq!(s, EvalSummary::from_records(&task, s.records.clone()));
    }

    #[test]
    fn errors_and_ordering() {
        let task = sst2();
        let mock = ScriptedMock::new(vec![ScriptEntry::always(Matcher::Any, "Positive")]);
        assert!(matches!(
            evaluate(&mock, &task, &EvalMode::ZeroShot, &[]),
            Err(EvalError::EmptyTestset)
        ));
        let bad = vec![LabeledExample::real("x", "Neutral")];
        assert!(matches!(
            evaluate(&mock, &task, &EvalMode::ZeroShot, &bad),
            Err(EvalError::UnknownLabel(_))
        ));
        let icl = EvalMode::Icl {
            demos: vec![],
            rng_seed: 0,
        };
        assert!(matches!(
            evaluate(&mock, &task, &icl, &demos()),
            Err(EvalError::Prompt(PromptError::EmptyDemos))
        ));

        let opts = EvalOptions {
            workers: 3,
            ..EvalOptions::default()
        };
        let s = evaluate_with(&mock, &task, &EvalMode::ZeroShot, &demos(), &opts).unwrap();
        let texts: Vec<_> = s.records.iter().map(|r| r.text.clone()).collect();
        let want: Vec<_> = demos().into_iter().map(|d| d.text).collect();
        assert_eq!(texts, want);
    }

    #[test]
    fn partial_summaries_are_written() {
        let task = sst2();
        let dir = tempfile::tempdir().unwrap();
        let partial = dir.path().join("partial.json");
        let mock = ScriptedMock::new(vec![ScriptEntry::always(Matcher::Any, "Positive")]);
        let opts = EvalOptions {
            partial_path: Some(partial.clone()),
            checkpoint_every: 3,
            ..EvalOptions::default()
        };
        evaluate_with(&mock, &task, &EvalMode::ZeroShot, &demos(), &opts).unwrap();
        let saved: EvalSummary =
            serde_json::from_str(&std::fs::read_to_string(&partial).unwrap()).unwrap();
        assert_eq!(saved.total, 6);
    }

    #[test]
    fn fingerprint_tracks_mode() {
        let task = sst2();
        assert_ne!(
            eval_fingerprint(&task, &EvalMode::ZeroShot, "m"),
            eval_fingerprint(&task, &EvalMode::Tuned, "m")
        );
        assert_eq!(
            eval_fingerprint(&task, &EvalMode::ZeroShot, "m"),
            eval_fingerprint(&task, &EvalMode::ZeroShot, "m")
        );
    }
}
