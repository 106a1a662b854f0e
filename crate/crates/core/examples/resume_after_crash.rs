//! Stop a run after two rounds, resume it from the checkpoint, and check that
//! the outputs match an uninterrupted run byte for byte.
//!
//!     cargo run --example resume_after_crash

#[path = "shared/mod.rs"]
mod shared;

use std::path::Path;

use fewshot_bootstrap::dataset::load_dataset;
use fewshot_bootstrap::pipeline::{
    resume, run_pipeline, run_pipeline_with, PipelineConfig, PipelineError, PipelineState,
    RunControl, CHECKPOINT_FILE, DATASET_FILE, REPORT_JSON_FILE, TRAIN_FILE,
};
use fewshot_bootstrap::TaskSpec;

fn config(dir: &Path) -> anyhow::Result<PipelineConfig> {
    let task = TaskSpec::from_json_file(&shared::fixture("sst2/task.json"))?;
    let pool = load_dataset(&shared::fixture("sst2/seeds.jsonl"), Some(&task))?;
    let mut c = PipelineConfig::new(task, pool, dir);
    c.plan.n_per_class = 12;
    c.plan.rng_seed = 5;
    Ok(c)
}

fn main() -> anyhow::Result<()> {
    let whole = tempfile::tempdir()?;
    let broken = tempfile::tempdir()?;
    let model = |c: &PipelineConfig| shared::toy_model(c.task.clone());

    let c = config(whole.path())?;
    run_pipeline(&c, &model(&c))?;

    let c = config(broken.path())?;
    let stop = RunControl { halt_after_round: Some(2) };
    match run_pipeline_with(&c, &model(&c), stop) {
        Err(PipelineError::Halted { round }) => println!("stopped after round {round}"),
        other => anyhow::bail!("expected a halt, got {other:?}"),
    }
    let checkpoint = broken.path().join(CHECKPOINT_FILE);
    let state = PipelineState::load(&checkpoint)?;
    println!(
        "checkpoint: next round {}, accepted so far {:?}",
        state.cursor.round,
        state.accepted.iter().map(Vec::len).collect::<Vec<_>>()
    );

    resume(&checkpoint, &model(&c))?;
    for file in [DATASET_FILE, REPORT_JSON_FILE, TRAIN_FILE] {
        let same = std::fs::read(whole.path().join(file))? == std::fs::read(broken.path().join(file))?;
        println!("{file:<14} {}", if same { "identical" } else { "DIFFERENT" });
        anyhow::ensure!(same, "{file} differs");
    }
    Ok(())
}
