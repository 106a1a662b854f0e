#![allow(dead_code)]

use std::path::PathBuf;

use fewshot_bootstrap::dataset::load_dataset;
use fewshot_bootstrap::gateway::{FnMock, Matcher, ScriptEntry};
use fewshot_bootstrap::rng::SplitMix64;
use fewshot_bootstrap::{LabeledExample, TaskSpec};

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures/v1")
        .join(rel)
}

pub fn task(name: &str) -> TaskSpec {
    TaskSpec::from_json_file(&fixture(&format!("{name}/task.json"))).unwrap()
}

pub fn seeds(name: &str) -> Vec<LabeledExample> {
    load_dataset(&fixture(&format!("{name}/seeds.jsonl")), Some(&task(name))).unwrap()
}

pub fn queries(name: &str) -> Vec<String> {
    std::fs::read_to_string(fixture(&format!("{name}/queries.txt")))
        .unwrap()
        .lines()
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect()
}

/// The label whose lowercase form opens `text`, if any.
pub fn leading_label(task: &TaskSpec, text: &str) -> Option<String> {
    let first = text.split_whitespace().next()?;
    task.canonical_label(first).map(str::to_string)
}

/// Completion text holding `texts` as consecutive Text/Label blocks.
pub fn completion(texts: &[String], label: &str) -> String {
    let mut out = String::new();
    for (i, t) in texts.iter().enumerate() {
        if i > 0 {
            out.push_str("Text: ");
        } else {
            out.push(' ');
        }
        out.push_str(t);
        out.push_str("\nLabel: ");
        out.push_str(label);
        out.push('\n');
    }
    out
}

/// A pure function of the request, so it behaves identically across
/// restarts. Generation calls return `per_call` fresh texts that start with
/// the lowercase target label. Classification calls answer with the label
/// named by the query's first word ("echo oracle").
pub fn echo_mock(task: TaskSpec, per_call: usize) -> FnMock {
    FnMock::new(move |req| {
        if req.prompt.ends_with(&task.label_marker) {
            let query = req
                .prompt
                .rsplit(&format!("{} ", task.text_marker))
                .next()
                .unwrap();
            let query = query.strip_suffix(&task.label_marker).unwrap_or(query);
            return Ok(leading_label(&task, query).unwrap_or_else(|| "N/A".into()));
        }
        let label = task
            .labels
            .iter()
            .find(|l| {
                req.prompt
                    .contains(&format!("Generate more {}", l.to_lowercase()))
            })
            .expect("generation prompt names its label");
        let mut rng = SplitMix64::new(req.seed.expect("seeded request"));
        let texts: Vec<String> = (0..per_call)
            .map(|_| {
                format!(
                    "{} synthetic review {:016x}",
                    label.to_lowercase(),
                    rng.next_u64()
                )
            })
            .collect();
        Ok(completion(&texts, label))
    })
}

/// Script for a CLI run: `rounds` generation replies per label with
/// `per_call` fresh texts each, and an echo-oracle reply for every one.
pub fn quota_script(task: &TaskSpec, rounds: usize, per_call: usize) -> String {
    let mut entries = Vec::new();
    let mut checks = Vec::new();
    for label in &task.labels {
        let lower = label.to_lowercase();
        for r in 1..=rounds {
            let texts: Vec<String> = (1..=per_call)
                .map(|k| format!("{lower} scripted review {r} {k}"))
                .collect();
            for t in &texts {
                checks.push(ScriptEntry::once(
                    Matcher::contains(format!("{} {t}\n{}", task.text_marker, task.label_marker)),
                    label.clone(),
                ));
            }
            entries.push(ScriptEntry::once(
                Matcher::contains(format!("Generate more {lower}")),
                completion(&texts, label),
            ));
        }
    }
    entries.extend(checks);
    serde_json::to_string_pretty(&entries).unwrap()
}
