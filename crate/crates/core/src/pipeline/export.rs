//! Trainer-ready JSONL: `{"prompt": <zero-shot prompt>, "completion": " <label>"}`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{read_jsonl, write_jsonl, DatasetError};
use crate::prompt::render_zero_shot_prompt;
use crate::rng::SplitMix64;
use crate::task::{LabeledExample, TaskSpec};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingRecord {
    pub prompt: String,
    pub completion: String,
}

/// Build the records for `real` followed by `synthetic`, then shuffle them
/// with a [`SplitMix64`] stream seeded with `rng_seed`.
pub fn training_records(
    real: &[LabeledExample],
    synthetic: &[LabeledExample],
    task: &TaskSpec,
    rng_seed: u64,
) -> Result<Vec<TrainingRecord>, DatasetError> {
    let mut records = Vec::with_capacity(real.len() + synthetic.len());
    for ex in real.iter().chain(synthetic) {
        let label = task
            .canonical_label(&ex.label)
            .ok_or_else(|| DatasetError::UnknownLabel(ex.label.clone()))?;
        let prompt =
            render_zero_shot_prompt(task, &ex.text).map_err(|e| DatasetError::MalformedRecord {
                line: records.len() + 1,
                reason: e.to_string(),
            })?;
        records.push(TrainingRecord {
            prompt: prompt.text,
            completion: format!(" {label}"),
        });
    }
    SplitMix64::new(rng_seed).shuffle(&mut records);
    Ok(records)
}

pub fn assemble_training_set(
    real: &[LabeledExample],
    synthetic: &[LabeledExample],
    task: &TaskSpec,
    rng_seed: u64,
    path: &Path,
) -> Result<usize, DatasetError> {
    let records = training_records(real, synthetic, task, rng_seed)?;
    write_jsonl(path, &records)?;
    Ok(records.len())
}

pub fn load_training_set(path: &Path) -> Result<Vec<TrainingRecord>, DatasetError> {
    read_jsonl(path)
}
