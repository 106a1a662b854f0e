//! The generate/filter loop, its checkpoints and its outputs.
//!
//! Labels are visited round-robin: round 1 runs one generation call per
//! label, then round 2, and so on. A label that has met its quota is
//! skipped. After every label-round the full state is written to
//! `checkpoint.json` in the output directory. The sampling seed of each
//! generation call is derived from `(plan.rng_seed, label index, round)`, so
//! a resumed run issues exactly the requests an uninterrupted run would.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{select_task_seeds, write_dataset, DatasetError};
use crate::filter::{FilterError, FilterReport, FilterSettings, FilterStage, LengthBounds};
use crate::gateway::Gateway;
use crate::generate::{generate_batch, GenerateError, GenerationCall};
use crate::rng::derive_seed;
use crate::task::{
    labels_match, DecodingConfig, GenerationPlan, LabeledExample, TaskError, TaskSpec,
};

mod checkpoint;
mod export;

pub use checkpoint::{
    Cursor, DirLock, PipelineState, CHECKPOINT_FILE, CHECKPOINT_VERSION, LOCK_FILE,
};
pub use export::{assemble_training_set, load_training_set, training_records, TrainingRecord};

pub const DATASET_FILE: &str = "dataset.jsonl";
pub const REPORT_JSON_FILE: &str = "report.json";
pub const REPORT_TABLE_FILE: &str = "report.txt";
pub const TRAIN_FILE: &str = "train.jsonl";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Generate(#[from] GenerateError),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error("label {label:?} reached {accepted} of {n_per_class} accepted examples before running out of rounds")]
    InsufficientYield {
        label: String,
        accepted: usize,
        n_per_class: usize,
    },
    #[error("checkpoint was written for config {found}, current config is {expected}")]
    ConfigMismatch { expected: String, found: String },
    #[error("corrupt checkpoint {path}: {reason}")]
    CorruptCheckpoint { path: String, reason: String },
    #[error("{path} is held by running process {pid}")]
    Locked { path: String, pid: u32 },
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("stopped after round {round} on request")]
    Halted { round: u32 },
}

impl PipelineError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        PipelineError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// Full description of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub task: TaskSpec,
    pub plan: GenerationPlan,
    pub decoding: DecodingConfig,
    pub bounds: LengthBounds,
    pub skip_consistency: bool,
    /// Consistency-check demonstrations per label, taken from the seeds.
    pub demos_per_class: usize,
    /// Server-side model name; empty means the gateway default.
    pub model_ref: String,
    /// Real examples to draw `plan.seeds_per_class` seeds per label from.
    pub seed_pool: Vec<LabeledExample>,
    /// Concurrent consistency checks. Does not affect results.
    pub workers: usize,
    pub output_dir: PathBuf,
}

impl PipelineConfig {
    pub fn new(
        task: TaskSpec,
        seed_pool: Vec<LabeledExample>,
        output_dir: impl Into<PathBuf>,
    ) -> Self {
        let plan = GenerationPlan::default();
        Self {
            task,
            demos_per_class: plan.seeds_per_class as usize,
            plan,
            decoding: DecodingConfig::default(),
            bounds: LengthBounds::default(),
            skip_consistency: false,
            model_ref: String::new(),
            seed_pool,
            workers: 4,
            output_dir: output_dir.into(),
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        self.task.validate()?;
        self.plan.validate()?;
        self.decoding.validate()?;
        self.bounds.validate()?;
        Ok(())
    }

    /// Hash of every setting that changes what the run produces.
    /// `workers` and `output_dir` are excluded.
    pub fn hash(&self) -> String {
        crate::fingerprint(&(
            &self.task,
            &self.plan,
            &self.decoding,
            &self.bounds,
            self.skip_consistency,
            self.demos_per_class,
            &self.model_ref,
            &self.seed_pool,
        ))
    }

    fn filter_settings(&self) -> FilterSettings {
        FilterSettings {
            bounds: self.bounds,
            skip_consistency: self.skip_consistency,
            rng_seed: self.plan.rng_seed,
            demos_per_class: self.demos_per_class,
            model_ref: self.model_ref.clone(),
            workers: self.workers,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    /// Seeds first, then accepted synthetic examples grouped by label.
    pub dataset: Vec<LabeledExample>,
    pub report: FilterReport,
}

/// Test hook: stop with [`PipelineError::Halted`] once the given round has
/// been checkpointed, as if the process had been killed.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunControl {
    pub halt_after_round: Option<u32>,
}

pub fn run_pipeline(
    config: &PipelineConfig,
    gateway: &dyn Gateway,
) -> Result<PipelineOutput, PipelineError> {
    run_pipeline_with(config, gateway, RunControl::default())
}

/// Start a fresh run, replacing any checkpoint in the output directory.
pub fn run_pipeline_with(
    config: &PipelineConfig,
    gateway: &dyn Gateway,
    control: RunControl,
) -> Result<PipelineOutput, PipelineError> {
    config.validate()?;
    let seeds = select_task_seeds(
        &config.task,
        &config.seed_pool,
        config.plan.seeds_per_class as usize,
        config.plan.rng_seed,
    )?;
    std::fs::create_dir_all(&config.output_dir)
        .map_err(|e| PipelineError::io(&config.output_dir, e))?;
    let _lock = DirLock::acquire(&config.output_dir)?;

    let stage = FilterStage::new(&config.task, &seeds, config.filter_settings());
    let state = PipelineState {
        version: CHECKPOINT_VERSION,
        config_hash: config.hash(),
        config: config.clone(),
        seeds,
        cursor: Cursor::START,
        accepted: vec![Vec::new(); config.task.labels.len()],
        index: stage.index().clone(),
        report: stage.report().clone(),
        complete: false,
    };
    drive(state, config, gateway, control)
}

/// Continue from a checkpoint using the configuration stored in it. Outputs
/// go to the checkpoint's directory.
pub fn resume(
    checkpoint_path: &Path,
    gateway: &dyn Gateway,
) -> Result<PipelineOutput, PipelineError> {
    resume_with(checkpoint_path, None, gateway, RunControl::default())
}

/// Continue from a checkpoint, insisting that it was written for `config`.
pub fn resume_with_config(
    checkpoint_path: &Path,
    config: &PipelineConfig,
    gateway: &dyn Gateway,
) -> Result<PipelineOutput, PipelineError> {
    resume_with(
        checkpoint_path,
        Some(config),
        gateway,
        RunControl::default(),
    )
}

pub fn resume_with(
    checkpoint_path: &Path,
    config: Option<&PipelineConfig>,
    gateway: &dyn Gateway,
    control: RunControl,
) -> Result<PipelineOutput, PipelineError> {
    let state = PipelineState::load(checkpoint_path)?;
    let config = match config {
        Some(c) => {
            let expected = c.hash();
            if expected != state.config_hash {
                return Err(PipelineError::ConfigMismatch {
                    expected,
                    found: state.config_hash,
                });
            }
            c.clone()
        }
        None => {
            let mut c = state.config.clone();
            c.output_dir = checkpoint_path
                .parent()
                .map(Path::to_path_buf)
                .unwrap_or_else(|| PathBuf::from("."));
            c
        }
    };
    config.validate()?;
    std::fs::create_dir_all(&config.output_dir)
        .map_err(|e| PipelineError::io(&config.output_dir, e))?;
    let _lock = DirLock::acquire(&config.output_dir)?;
    drive(state, &config, gateway, control)
}

fn drive(
    mut state: PipelineState,
    config: &PipelineConfig,
    gateway: &dyn Gateway,
    control: RunControl,
) -> Result<PipelineOutput, PipelineError> {
    let task = &config.task;
    let plan = &config.plan;
    let quota = plan.n_per_class as usize;
    let n_labels = task.labels.len();
    let checkpoint = config.output_dir.join(CHECKPOINT_FILE);
    let mut stage = FilterStage::restore(
        task,
        &state.seeds,
        config.filter_settings(),
        state.index.clone(),
        state.report.clone(),
    );

    while !state.complete {
        let all_full = state.accepted.iter().all(|a| a.len() >= quota);
        if all_full || state.cursor.round > plan.max_rounds {
            state.complete = true;
            state.save(&checkpoint)?;
            break;
        }
        let Cursor { round, label: li } = state.cursor;
        let have = state.accepted[li].len();
        if have < quota {
            let label = &task.labels[li];
            let seeds: Vec<LabeledExample> = state
                .seeds
                .iter()
                .filter(|s| labels_match(&s.label, label))
                .cloned()
                .collect();
            let call = GenerationCall {
                task,
                target_label: label,
                seeds: &seeds,
                decoding: &config.decoding,
                round,
                model_ref: &config.model_ref,
                seed: Some(derive_seed(plan.rng_seed, &[li as u64, round as u64])),
            };
            let mut candidates = generate_batch(gateway, &call)?;
            stage.report_mut().add_generated(label, candidates.len());
            let overflow = candidates.split_off(candidates.len().min(plan.batch_size as usize));
            stage.report_mut().add_surplus(label, overflow.len());
            let outcome = stage.process(gateway, candidates, Some(quota - have))?;
            state.accepted[li].extend(outcome.accepted());
            stage.report_mut().add_round(label);
            log::info!(
                "round {round} {label}: {}/{quota} accepted",
                state.accepted[li].len()
            );
        }
        state.cursor = state.cursor.after(n_labels);
        state.index = stage.index().clone();
        state.report = stage.report().clone();
        state.save(&checkpoint)?;

        let round_done = state.cursor.label == 0;
        let finished = state.accepted.iter().all(|a| a.len() >= quota);
        if round_done && !finished && control.halt_after_round == Some(round) {
            return Err(PipelineError::Halted { round });
        }
    }

    write_reports(&config.output_dir, &state.report)?;
    if let Some(li) = state.accepted.iter().position(|a| a.len() < quota) {
        return Err(PipelineError::InsufficientYield {
            label: task.labels[li].clone(),
            accepted: state.accepted[li].len(),
            n_per_class: quota,
        });
    }

    let synthetic: Vec<LabeledExample> = state.accepted.concat();
    let mut dataset = state.seeds.clone();
    dataset.extend(synthetic.iter().cloned());
    write_dataset(&config.output_dir.join(DATASET_FILE), &dataset)?;
    assemble_training_set(
        &state.seeds,
        &synthetic,
        task,
        plan.rng_seed,
        &config.output_dir.join(TRAIN_FILE),
    )?;
    Ok(PipelineOutput {
        dataset,
        report: state.report,
    })
}

fn write_reports(dir: &Path, report: &FilterReport) -> Result<(), PipelineError> {
    let json = serde_json::to_string_pretty(report).expect("report serializes") + "\n";
    checkpoint::write_atomic(&dir.join(REPORT_JSON_FILE), json.as_bytes())?;
    checkpoint::write_atomic(&dir.join(REPORT_TABLE_FILE), report.to_table().as_bytes())
}
