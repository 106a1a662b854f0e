//! Byte-exact rendering of the three prompt shapes.
//!
//! Layout, with `\n` between lines and one blank line after the instruction:
//!
//! ```text
//! <instruction>
//!
//! Text: <example>
//! Label: <label>
//! ...
//! Text:                      <- generation prompts stop here
//! Text: <query>
//! Label:                     <- classification prompts stop here
//! ```
//!
//! A marker is followed by a single space only when a value follows it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{fnv1a64, SplitMix64};
use crate::task::{labels_match, LabeledExample, TaskSpec};

#[derive(Debug, Error, PartialEq)]
pub enum PromptError {
    #[error("seed labeled {found:?} in a generation prompt for {expected:?}")]
    MixedSeedLabels { expected: String, found: String },
    #[error("generation prompt needs at least one seed")]
    EmptySeeds,
    #[error("classification prompt needs demonstrations")]
    EmptyDemos,
    #[error("no demonstration for label {0:?}")]
    UncoveredLabel(String),
    #[error("label {0:?} is not part of the task")]
    UnknownLabel(String),
    #[error("query text is empty")]
    EmptyQuery,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptKind {
    Generation,
    IclClassification,
    ZeroShotClassification,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedPrompt {
    pub text: String,
    pub kind: PromptKind,
    /// Indices into the supplied examples, in the order they were written.
    pub demo_order: Vec<usize>,
}

fn block(out: &mut String, task: &TaskSpec, text: &str, label: &str) {
    out.push_str(&task.text_marker);
    out.push(' ');
    out.push_str(text);
    out.push('\n');
    out.push_str(&task.label_marker);
    out.push(' ');
    out.push_str(label);
    out.push('\n');
}

fn query_tail(out: &mut String, task: &TaskSpec, query: &str) {
    out.push_str(&task.text_marker);
    out.push(' ');
    out.push_str(query);
    out.push('\n');
    out.push_str(&task.label_marker);
}

pub fn generation_instruction(task: &TaskSpec, label: &str) -> String {
    task.generation_instruction
        .replace("{domain_noun}", &task.domain_noun)
        .replace("{Label}", label)
        .replace("{label}", &label.to_lowercase())
}

pub fn classification_instruction(task: &TaskSpec) -> String {
    task.classification_instruction
        .replace("{label_list}", &task.label_list())
}

pub fn render_generation_prompt(
    task: &TaskSpec,
    target_label: &str,
    seeds: &[LabeledExample],
) -> Result<RenderedPrompt, PromptError> {
    let label = task
        .canonical_label(target_label)
        .ok_or_else(|| PromptError::UnknownLabel(target_label.to_string()))?;
    if seeds.is_empty() {
        return Err(PromptError::EmptySeeds);
    }
    if let Some(odd) = seeds.iter().find(|s| !labels_match(&s.label, label)) {
        return Err(PromptError::MixedSeedLabels {
            expected: label.to_string(),
            found: odd.label.clone(),
        });
    }

    let mut text = generation_instruction(task, label);
    text.push_str("\n\n");
    for seed in seeds {
        block(&mut text, task, &seed.text, label);
    }
    text.push_str(&task.text_marker);
    Ok(RenderedPrompt {
        text,
        kind: PromptKind::Generation,
        demo_order: (0..seeds.len()).collect(),
    })
}

/// Few-shot classification prompt. Demos are shuffled by a [`SplitMix64`]
/// stream seeded with `rng_seed ^ fnv1a64(query)`.
pub fn render_classification_prompt(
    task: &TaskSpec,
    demos: &[LabeledExample],
    query: &str,
    rng_seed: u64,
) -> Result<RenderedPrompt, PromptError> {
    if query.trim().is_empty() {
        return Err(PromptError::EmptyQuery);
    }
    if demos.is_empty() {
        return Err(PromptError::EmptyDemos);
    }
    let mut canonical = Vec::with_capacity(demos.len());
    for demo in demos {
        canonical.push(
            task.canonical_label(&demo.label)
                .ok_or_else(|| PromptError::UnknownLabel(demo.label.clone()))?,
        );
    }
    if let Some(missing) = task
        .labels
        .iter()
        .find(|l| !canonical.iter().any(|c| c == l))
    {
        return Err(PromptError::UncoveredLabel(missing.clone()));
    }

    let order = SplitMix64::new(rng_seed ^ fnv1a64(query)).permutation(demos.len());
    let mut text = classification_instruction(task);
    text.push_str("\n\n");
    for &i in &order {
        block(&mut text, task, &demos[i].text, canonical[i]);
    }
    query_tail(&mut text, task, query);
    Ok(RenderedPrompt {
        text,
        kind: PromptKind::IclClassification,
        demo_order: order,
    })
}

pub fn render_zero_shot_prompt(
    task: &TaskSpec,
    query: &str,
) -> Result<RenderedPrompt, PromptError> {
    if query.trim().is_empty() {
        return Err(PromptError::EmptyQuery);
    }
    let mut text = classification_instruction(task);
    text.push_str("\n\n");
    query_tail(&mut text, task, query);
    Ok(RenderedPrompt {
        text,
        kind: PromptKind::ZeroShotClassification,
        demo_order: Vec::new(),
    })
}

/// The first `per_class` examples of each label, in input order.
pub fn pick_demos(
    task: &TaskSpec,
    pool: &[LabeledExample],
    per_class: usize,
) -> Vec<LabeledExample> {
    let mut taken = vec![0usize; task.labels.len()];
    pool.iter()
        .filter(|ex| match task.label_index(&ex.label) {
            Some(i) if taken[i] < per_class => {
                taken[i] += 1;
                true
            }
            _ => false,
        })
        .cloned()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::task::fixtures::{sst2, trec};
    use proptest::prelude::*;

    fn seeds(label: &str) -> Vec<LabeledExample> {
        (1..=4)
            .map(|i| LabeledExample::real(format!("{label} review {i}"), label))
            .collect()
    }

    fn demos() -> Vec<LabeledExample> {
        let mut d = seeds("Positive");
        d.extend(seeds("Negative"));
        d
    }

    #[test]
    fn generation_layout() {
        let p = render_generation_prompt(&sst2(), "Positive", &seeds("Positive")[..2]).unwrap();
        assert_eq!(
            p.text,
            "Few examples of movie reviews having positive sentiment are given. Generate more positive reviews\n\
             \n\
             Text: Positive review 1\n\
             Label: Positive\n\
             Text: Positive review 2\n\
             Label: Positive\n\
             Text:"
        );
        assert_eq!(p.kind, PromptKind::Generation);
    }

    #[test]
    fn generation_single_seed_and_label_casing() {
        let p = render_generation_prompt(&sst2(), "positive", &seeds("Positive")[..1]).unwrap();
        assert_eq!(p.text.matches("Text: ").count(), 1);
        assert!(p.text.ends_with("Label: Positive\nText:"));
    }

    #[test]
    fn generation_rejects_mixed_or_missing_seeds() {
        let mut s = seeds("Positive");
        s.push(LabeledExample::real("awful", "Negative"));
        assert!(matches!(
            render_generation_prompt(&sst2(), "Positive", &s),
            Err(PromptError::MixedSeedLabels { .. })
        ));
        assert_eq!(
            render_generation_prompt(&sst2(), "Positive", &[]),
            Err(PromptError::EmptySeeds)
        );
        assert!(matches!(
            render_generation_prompt(&sst2(), "Neutral", &s),
            Err(PromptError::UnknownLabel(_))
        ));
    }

    #[test]
    fn classification_is_seeded_permutation() {
        let a = render_classification_prompt(&sst2(), &demos(), "a masterpiece", 1).unwrap();
        assert!(a.text.ends_with("Text: a masterpiece\nLabel:"));
        assert!(a.text.starts_with(
            "Classify the sentiment of the given movie review into Positive or Negative\n\n"
        ));
        let mut sorted = a.demo_order.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..8).collect::<Vec<_>>());
        assert_eq!(
            a,
            render_classification_prompt(&sst2(), &demos(), "a masterpiece", 1).unwrap()
        );
        let b = render_classification_prompt(&sst2(), &demos(), "a masterpiece", 2).unwrap();
        assert_ne!(a.demo_order, b.demo_order);
        assert_eq!(a.text.len(), b.text.len());
    }

    #[test]
    fn classification_errors() {
        assert_eq!(
            render_classification_prompt(&sst2(), &[], "q", 0),
            Err(PromptError::EmptyDemos)
        );
        assert_eq!(
            render_classification_prompt(&sst2(), &seeds("Positive"), "q", 0),
            Err(PromptError::UncoveredLabel("Negative".into()))
        );
        assert_eq!(
            render_classification_prompt(&sst2(), &demos(), "  ", 0),
            Err(PromptError::EmptyQuery)
        );
    }

    #[test]
    fn zero_shot_layout() {
        let p = render_zero_shot_prompt(&sst2(), "dull and lifeless").unwrap();
        assert_eq!(
            p.text,
            "Classify the sentiment of the given movie review into Positive or Negative\n\nText: dull and lifeless\nLabel:"
        );
        assert!(p.demo_order.is_empty());
        let multi = render_zero_shot_prompt(&sst2(), "line one\nline two").unwrap();
        assert!(multi.text.contains("Text: line one\nline two\nLabel:"));
        assert_eq!(
            render_zero_shot_prompt(&sst2(), ""),
            Err(PromptError::EmptyQuery)
        );
    }

    #[test]
    fn trec_label_list() {
        let p = render_zero_shot_prompt(&trec(), "Who is called the Father of Geometry?").unwrap();
        assert!(p.text.starts_with(
            "Classify the given question into Abbreviation, Entity, Description, Human, Location, or Numeric\n\n"
        ));
    }

    #[test]
    fn pick_demos_caps_per_class() {
        let d = pick_demos(&sst2(), &demos(), 2);
        assert_eq!(d.len(), 4);
        assert_eq!(d[0].text, "Positive review 1");
        assert_eq!(d[2].text, "Negative review 1");
    }

    proptest! {
        #[test]
        fn icl_contains_every_demo_once_and_zero_shot_tail(
            query in "[a-z]{1,12}( [a-z]{1,12}){0,5}",
            seed in any::<u64>(),
        ) {
            let task = sst2();
            let icl = render_classification_prompt(&task, &demos(), &query, seed).unwrap();
            let zero = render_zero_shot_prompt(&task, &query).unwrap();
            for d in demos() {
                let b = format!("Text: {}\nLabel: {}\n", d.text, d.label);
                prop_assert_eq!(icl.text.matches(&b).count(), 1);
            }
            prop_assert!(zero.text.len() < icl.text.len());
            prop_assert_eq!(zero.text.matches(task.text_marker.as_str()).count(), 1);
            let tail = format!("Text: {query}\nLabel:");
            prop_assert!(icl.text.ends_with(&tail));
            prop_assert!(zero.text.ends_with(&tail));
            prop_assert!(icl.text.starts_with(&classification_instruction(&task)));
        }
    }
}
