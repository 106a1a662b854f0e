//! Hygiene and label-consistency filtering of generated candidates.
//!
//! A candidate first passes [`basic_filter`] (malformed, duplicate, length),
//! then is classified by the same model with a few-shot prompt built from
//! the real seeds. It is kept only if the predicted label equals the label
//! it was generated for.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{CompletionRequest, Gateway, GatewayError};
use crate::generate::Candidate;
use crate::prompt::{pick_demos, render_classification_prompt, PromptError};
use crate::task::{
    labels_match, DecodingConfig, FilterVerdict, LabeledExample, TaskSpec, VerdictKind,
};

/// Classification calls decode greedily with a short budget.
pub const CLASSIFY_MAX_NEW_TOKENS: u32 = 8;

pub fn classification_decoding() -> DecodingConfig {
    DecodingConfig::greedy(CLASSIFY_MAX_NEW_TOKENS)
}

#[derive(Debug, Error)]
pub enum FilterError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("invalid length bounds: need 1 <= min_words <= max_words")]
    BadBounds,
}

/// Lowercase, collapse whitespace runs, trim, and drop trailing `.`, `!`, `?`.
pub fn normalize(text: &str) -> String {
    let collapsed = text
        .to_lowercase()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ");
    collapsed
        .trim_end_matches(['.', '!', '?'])
        .trim_end()
        .to_string()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LengthBounds {
    pub min_words: usize,
    pub max_words: usize,
}

impl Default for LengthBounds {
    fn default() -> Self {
        Self {
            min_words: 3,
            max_words: 256,
        }
    }
}

impl LengthBounds {
    pub fn new(min_words: usize, max_words: usize) -> Result<Self, FilterError> {
        let b = Self {
            min_words,
            max_words,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<(), FilterError> {
        if self.min_words >= 1 && self.min_words <= self.max_words {
            Ok(())
        } else {
            Err(FilterError::BadBounds)
        }
    }
}

/// Set of normalized texts already taken by seeds or earlier candidates.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DedupIndex {
    keys: BTreeSet<String>,
}

impl DedupIndex {
    pub fn from_texts<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        let mut index = Self::default();
        for t in texts {
            index.insert(t);
        }
        index
    }

    pub fn insert(&mut self, text: &str) -> bool {
        self.keys.insert(normalize(text))
    }

    pub fn contains(&self, text: &str) -> bool {
        self.keys.contains(&normalize(text))
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }
}

/// Result of the hygiene pass; a provisional pass still needs the
/// consistency check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BasicVerdict {
    Provisional,
    Rejected(FilterVerdict),
}

/// Hygiene checks, in order: malformed (empty after normalizing, or
/// containing a task marker), duplicate, too short, too long. A provisional
/// pass is inserted into `index` at once.
pub fn basic_filter(
    candidate: &Candidate,
    task: &TaskSpec,
    index: &mut DedupIndex,
    bounds: &LengthBounds,
) -> BasicVerdict {
    let reject = |k| BasicVerdict::Rejected(FilterVerdict::rejected(k));
    let text = &candidate.text;
    if normalize(text).is_empty()
        || text.contains(task.text_marker.as_str())
        || text.contains(task.label_marker.as_str())
    {
        return reject(VerdictKind::RejectedMalformed);
    }
    if index.contains(text) {
        return reject(VerdictKind::RejectedDuplicate);
    }
    let words = text.split_whitespace().count();
    if words < bounds.min_words {
        return reject(VerdictKind::RejectedTooShort);
    }
    if words > bounds.max_words {
        return reject(VerdictKind::RejectedTooLong);
    }
    index.insert(text);
    BasicVerdict::Provisional
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Prediction {
    Label(String),
    Unparseable,
}

impl Prediction {
    pub fn label(&self) -> Option<&str> {
        match self {
            Prediction::Label(l) => Some(l),
            Prediction::Unparseable => None,
        }
    }
}

fn is_word_char(c: Option<char>) -> bool {
    c.is_some_and(char::is_alphanumeric)
}

/// Read a label out of a classification completion.
///
/// First an exact case-insensitive match of the whole output (punctuation
/// and whitespace stripped from both ends); failing that, the label whose
/// whole-word occurrence starts earliest, ties going to task order.
pub fn parse_label(raw_output: &str, task: &TaskSpec) -> Prediction {
    let stripped = raw_output.trim_matches(|c: char| c.is_whitespace() || c.is_ascii_punctuation());
    if let Some(label) = task.canonical_label(stripped) {
        return Prediction::Label(label.to_string());
    }

    let haystack = raw_output.to_lowercase();
    let mut best: Option<(usize, &str)> = None;
    for label in &task.labels {
        let needle = label.trim().to_lowercase();
        let first = haystack.match_indices(needle.as_str()).find(|(at, m)| {
            !is_word_char(haystack[..*at].chars().next_back())
                && !is_word_char(haystack[at + m.len()..].chars().next())
        });
        if let Some((at, _)) = first {
            if best.is_none_or(|(b, _)| at < b) {
                best = Some((at, label));
            }
        }
    }
    match best {
        Some((_, label)) => Prediction::Label(label.to_string()),
        None => Prediction::Unparseable,
    }
}

/// Classify `candidate.text` with a few-shot prompt and compare against the
/// intended label. Uses the gateway's default model.
pub fn consistency_filter(
    gateway: &dyn Gateway,
    task: &TaskSpec,
    demos: &[LabeledExample],
    candidate: &Candidate,
    rng_seed: u64,
) -> Result<FilterVerdict, FilterError> {
    check_consistency(gateway, task, demos, candidate, rng_seed, "")
}

pub(crate) fn check_consistency(
    gateway: &dyn Gateway,
    task: &TaskSpec,
    demos: &[LabeledExample],
    candidate: &Candidate,
    rng_seed: u64,
    model_ref: &str,
) -> Result<FilterVerdict, FilterError> {
    let prompt = render_classification_prompt(task, demos, &candidate.text, rng_seed)?;
    let request = CompletionRequest::new(prompt.text, classification_decoding(), model_ref)?;
    let response = gateway.complete(&request)?;
    Ok(match parse_label(&response.text, task) {
        Prediction::Label(p) if labels_match(&p, &candidate.intended_label) => {
            FilterVerdict::accepted(p)
        }
        Prediction::Label(p) => FilterVerdict::inconsistent(p),
        Prediction::Unparseable => FilterVerdict::rejected(VerdictKind::RejectedUnparseable),
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictCounts {
    pub accepted: usize,
    pub rejected_duplicate: usize,
    pub rejected_too_short: usize,
    pub rejected_too_long: usize,
    pub rejected_malformed: usize,
    pub rejected_inconsistent: usize,
    pub rejected_unparseable: usize,
}

impl VerdictCounts {
    fn slot(&mut self, kind: VerdictKind) -> &mut usize {
        match kind {
            VerdictKind::Accepted => &mut self.accepted,
            VerdictKind::RejectedDuplicate => &mut self.rejected_duplicate,
            VerdictKind::RejectedTooShort => &mut self.rejected_too_short,
            VerdictKind::RejectedTooLong => &mut self.rejected_too_long,
            VerdictKind::RejectedMalformed => &mut self.rejected_malformed,
            VerdictKind::RejectedInconsistent => &mut self.rejected_inconsistent,
            VerdictKind::RejectedUnparseable => &mut self.rejected_unparseable,
        }
    }

    pub fn get(&self, kind: VerdictKind) -> usize {
        match kind {
            VerdictKind::Accepted => self.accepted,
            VerdictKind::RejectedDuplicate => self.rejected_duplicate,
            VerdictKind::RejectedTooShort => self.rejected_too_short,
            VerdictKind::RejectedTooLong => self.rejected_too_long,
            VerdictKind::RejectedMalformed => self.rejected_malformed,
            VerdictKind::RejectedInconsistent => self.rejected_inconsistent,
            VerdictKind::RejectedUnparseable => self.rejected_unparseable,
        }
    }

    pub fn bump(&mut self, kind: VerdictKind) {
        *self.slot(kind) += 1;
    }

    pub fn total(&self) -> usize {
        VerdictKind::ALL.iter().map(|&k| self.get(k)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelReport {
    pub label: String,
    /// Candidates parsed from completions.
    pub generated: usize,
    /// Candidates left unexamined once the quota was met.
    pub surplus: usize,
    pub counts: VerdictCounts,
    pub rounds: u32,
    /// accepted / generated.
    pub yield_ratio: f64,
}

/// Per-label verdict bookkeeping. For every label,
/// `generated == counts.total() + surplus`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub labels: Vec<LabelReport>,
    pub totals: VerdictCounts,
    pub generated: usize,
    pub surplus: usize,
    pub rounds_consumed: u32,
}

impl FilterReport {
    pub fn new(task: &TaskSpec) -> Self {
        Self {
            labels: task
                .labels
                .iter()
                .map(|l| LabelReport {
                    label: l.clone(),
                    generated: 0,
                    surplus: 0,
                    counts: VerdictCounts::default(),
                    rounds: 0,
                    yield_ratio: 0.0,
                })
                .collect(),
            totals: VerdictCounts::default(),
            generated: 0,
            surplus: 0,
            rounds_consumed: 0,
        }
    }

    fn entry(&mut self, label: &str) -> &mut LabelReport {
        self.labels
            .iter_mut()
            .find(|l| labels_match(&l.label, label))
            .expect("report covers every task label")
    }

    pub fn label(&self, label: &str) -> Option<&LabelReport> {
        self.labels.iter().find(|l| labels_match(&l.label, label))
    }

    fn refresh_yield(entry: &mut LabelReport) {
        entry.yield_ratio = if entry.generated == 0 {
            0.0
        } else {
            entry.counts.accepted as f64 / entry.generated as f64
        };
    }

    pub fn record(&mut self, label: &str, kind: VerdictKind) {
        let e = self.entry(label);
        e.counts.bump(kind);
        Self::refresh_yield(e);
        self.totals.bump(kind);
    }

    pub fn add_generated(&mut self, label: &str, n: usize) {
        let e = self.entry(label);
        e.generated += n;
        Self::refresh_yield(e);
        self.generated += n;
    }

    pub fn add_surplus(&mut self, label: &str, n: usize) {
        self.entry(label).surplus += n;
        self.surplus += n;
    }

    pub fn add_round(&mut self, label: &str) {
        self.entry(label).rounds += 1;
        self.rounds_consumed += 1;
    }

    /// Every examined candidate has exactly one verdict.
    pub fn is_balanced(&self) -> bool {
        self.labels
            .iter()
            .all(|l| l.generated == l.counts.total() + l.surplus)
            && self.totals.total() == self.labels.iter().map(|l| l.counts.total()).sum::<usize>()
            && self.generated == self.totals.total() + self.surplus
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let header = [
            "label",
            "generated",
            "accepted",
            "duplicate",
            "short",
            "long",
            "malformed",
            "inconsistent",
            "unparseable",
            "surplus",
            "rounds",
            "yield",
        ];
        let width = self
            .labels
            .iter()
            .map(|l| l.label.len())
            .chain([5])
            .max()
            .unwrap_or(5);
        let _ = write!(out, "{:<width$}", header[0]);
        for h in &header[1..] {
            let _ = write!(out, " {h:>12}");
        }
        out.push('\n');
        let mut row =
            |name: &str, generated: usize, c: &VerdictCounts, surplus: usize, rounds: u32| {
                let y = if generated == 0 {
                    0.0
                } else {
                    c.accepted as f64 / generated as f64
                };
                let _ = write!(out, "{name:<width$}");
                for v in [
                    generated,
                    c.accepted,
                    c.rejected_duplicate,
                    c.rejected_too_short,
                    c.rejected_too_long,
                    c.rejected_malformed,
                    c.rejected_inconsistent,
                    c.rejected_unparseable,
                    surplus,
                    rounds as usize,
                ] {
                    let _ = write!(out, " {v:>12}");
                }
                let _ = writeln!(out, " {y:>12.3}");
            };
        for l in &self.labels {
            row(&l.label, l.generated, &l.counts, l.surplus, l.rounds);
        }
        row(
            "total",
            self.generated,
            &self.totals,
            self.surplus,
            self.rounds_consumed,
        );
        out
    }
}

/// Knobs shared by the standalone filter and the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterSettings {
    pub bounds: LengthBounds,
    pub skip_consistency: bool,
    /// Seeds the demo shuffle of every classification prompt.
    pub rng_seed: u64,
    /// Real examples per label used as classification demos.
    pub demos_per_class: usize,
    pub model_ref: String,
    /// Concurrent consistency checks.
    pub workers: usize,
}

impl Default for FilterSettings {
    fn default() -> Self {
        Self {
            bounds: LengthBounds::default(),
            skip_consistency: false,
            rng_seed: 0,
            demos_per_class: 4,
            model_ref: String::new(),
            workers: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchOutcome {
    /// Examined candidates in input order with their verdicts.
    pub verdicts: Vec<(Candidate, FilterVerdict)>,
    /// Candidates never examined because the quota was already met.
    pub surplus: Vec<Candidate>,
}

impl BatchOutcome {
    pub fn accepted(&self) -> impl Iterator<Item = LabeledExample> + '_ {
        self.verdicts
            .iter()
            .filter(|(_, v)| v.is_accepted())
            .map(|(c, v)| LabeledExample::synthetic(&c.text, &c.intended_label, c.round, v.clone()))
    }
}

/// Stateful filter: owns the dedup index and the running report.
#[derive(Debug, Clone)]
pub struct FilterStage<'t> {
    task: &'t TaskSpec,
    demos: Vec<LabeledExample>,
    settings: FilterSettings,
    index: DedupIndex,
    report: FilterReport,
}

impl<'t> FilterStage<'t> {
    /// The dedup index starts with every seed; demos are the first
    /// `demos_per_class` seeds of each label.
    pub fn new(task: &'t TaskSpec, seeds: &[LabeledExample], settings: FilterSettings) -> Self {
        let index = DedupIndex::from_texts(seeds.iter().map(|s| s.text.as_str()));
        Self::restore(task, seeds, settings, index, FilterReport::new(task))
    }

    pub fn restore(
        task: &'t TaskSpec,
        seeds: &[LabeledExample],
        settings: FilterSettings,
        index: DedupIndex,
        report: FilterReport,
    ) -> Self {
        let demos = pick_demos(task, seeds, settings.demos_per_class);
        Self {
            task,
            demos,
            settings,
            index,
            report,
        }
    }

    pub fn report(&self) -> &FilterReport {
        &self.report
    }

    pub fn report_mut(&mut self) -> &mut FilterReport {
        &mut self.report
    }

    pub fn index(&self) -> &DedupIndex {
        &self.index
    }

    pub fn demos(&self) -> &[LabeledExample] {
        &self.demos
    }

    /// Filter a batch in order. With a quota, at most `quota` candidates are
    /// accepted and the rest of the batch is returned unexamined.
    pub fn process(
        &mut self,
        gateway: &dyn Gateway,
        candidates: Vec<Candidate>,
        quota: Option<usize>,
    ) -> Result<BatchOutcome, FilterError> {
        let mut slots: Vec<(Candidate, Option<FilterVerdict>)> =
            Vec::with_capacity(candidates.len());
        let mut pending: Vec<usize> = Vec::new();
        let mut remaining = quota;
        let mut rest = candidates.into_iter();

        while remaining != Some(0) {
            let Some(candidate) = rest.next() else { break };
            match basic_filter(
                &candidate,
                self.task,
                &mut self.index,
                &self.settings.bounds,
            ) {
                BasicVerdict::Provisional => {
                    pending.push(slots.len());
                    slots.push((candidate, None));
                }
                BasicVerdict::Rejected(v) => slots.push((candidate, Some(v))),
            }
            if remaining == Some(pending.len()) {
                let accepted = self.settle(gateway, &mut slots, &pending)?;
                pending.clear();
                remaining = remaining.map(|r| r - accepted);
            }
        }
        if !pending.is_empty() {
            self.settle(gateway, &mut slots, &pending)?;
        }

        let verdicts: Vec<(Candidate, FilterVerdict)> = slots
            .into_iter()
            .map(|(c, v)| (c, v.expect("every examined candidate is settled")))
            .collect();
        for (c, v) in &verdicts {
            self.report.record(&c.intended_label, v.kind());
        }
        let surplus: Vec<Candidate> = rest.collect();
        for c in &surplus {
            self.report.add_surplus(&c.intended_label, 1);
        }
        Ok(BatchOutcome { verdicts, surplus })
    }

    /// Run consistency checks for the provisional slots; returns how many
    /// were accepted.
    fn settle(
        &self,
        gateway: &dyn Gateway,
        slots: &mut [(Candidate, Option<FilterVerdict>)],
        pending: &[usize],
    ) -> Result<usize, FilterError> {
        let verdicts: Vec<FilterVerdict> = if self.settings.skip_consistency {
            pending
                .iter()
                .map(|&i| FilterVerdict::accepted(slots[i].0.intended_label.clone()))
                .collect()
        } else {
            let workers = self.settings.workers.max(1);
            let mut out = Vec::with_capacity(pending.len());
            for chunk in pending.chunks(workers) {
                let results: Vec<Result<FilterVerdict, FilterError>> = std::thread::scope(|s| {
                    let handles: Vec<_> = chunk
                        .iter()
                        .map(|&i| {
                            let candidate = &slots[i].0;
                            s.spawn(move || {
                                check_consistency(
                                    gateway,
                                    self.task,
                                    &self.demos,
                                    candidate,
                                    self.settings.rng_seed,
                                    &self.settings.model_ref,
                                )
                            })
                        })
                        .collect();
                    handles
                        .into_iter()
                        .map(|h| h.join().expect("consistency worker panicked"))
                        .collect()
                });
                for r in results {
                    out.push(r?);
                }
            }
            out
        };
        let accepted = verdicts.iter().filter(|v| v.is_accepted()).count();
        for (&i, v) in pending.iter().zip(verdicts) {
            slots[i].1 = Some(v);
        }
        Ok(accepted)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutcome {
    pub accepted: Vec<LabeledExample>,
    pub verdicts: Vec<(Candidate, FilterVerdict)>,
    pub report: FilterReport,
}

/// Filter a standalone candidate list against the seeds (no quota).
pub fn filter_candidates(
    gateway: &dyn Gateway,
    task: &TaskSpec,
    seeds: &[LabeledExample],
    candidates: Vec<Candidate>,
    settings: FilterSettings,
) -> Result<FilterOutcome, FilterError> {
    settings.bounds.validate()?;
    let mut stage = FilterStage::new(task, seeds, settings);
    for label in &task.labels {
        let n = candidates
            .iter()
            .filter(|c| labels_match(&c.intended_label, label))
            .count();
        stage.report_mut().add_generated(label, n);
    }
    let outcome = stage.process(gateway, candidates, None)?;
    Ok(FilterOutcome {
        accepted: outcome.accepted().collect(),
        verdicts: outcome.verdicts,
        report: stage.report().clone(),
    })
}
