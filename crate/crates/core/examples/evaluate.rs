//! Accuracy and latency of a served model in zero-shot, in-context or tuned mode.
//!
//!     cargo run --example evaluate -- --mode icl
//!     cargo run --example evaluate -- --config gateway.toml --mode tuned --test test.jsonl --out summary.json

#[path = "shared/mod.rs"]
mod shared;

use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use fewshot_bootstrap::dataset::load_dataset;
use fewshot_bootstrap::eval::{
    eval_fingerprint, evaluate_with, write_summary, EvalMode, EvalOptions, SummaryFile,
};
use fewshot_bootstrap::TaskSpec;

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    ZeroShot,
    Icl,
    Tuned,
}

#[derive(Parser)]
struct Opts {
    #[arg(long, default_value_os_t = shared::fixture("sst2/task.json"))]
    task: PathBuf,
    #[arg(long, default_value_os_t = shared::fixture("sst2/test.jsonl"))]
    test: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Icl)]
    mode: Mode,
    /// Demonstrations for icl mode.
    #[arg(long, default_value_os_t = shared::fixture("sst2/seeds.jsonl"))]
    demos: PathBuf,
    #[arg(long, default_value_t = 0)]
    rng_seed: u64,
    #[arg(long, default_value_t = 4)]
    workers: usize,
    /// Server-side model name; empty uses the gateway's.
    #[arg(long, default_value = "")]
    model: String,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    gateway: shared::GatewayArgs,
}

fn main() -> anyhow::Result<()> {
    let opts = Opts::parse();
    let task = TaskSpec::from_json_file(&opts.task)?;
    let test = load_dataset(&opts.test, Some(&task))?;
    let mode = match opts.mode {
        Mode::ZeroShot => EvalMode::ZeroShot,
        Mode::Tuned => EvalMode::Tuned,
        Mode::Icl => EvalMode::Icl {
            demos: load_dataset(&opts.demos, Some(&task))?,
            rng_seed: opts.rng_seed,
        },
    };
    let gateway = opts.gateway.open(&task)?;
    let options = EvalOptions {
        model_ref: opts.model.clone(),
        workers: opts.workers,
        partial_path: opts.out.as_ref().map(|p| p.with_extension("partial.json")),
        ..EvalOptions::default()
    };
    let summary = evaluate_with(&gateway, &task, &mode, &test, &options)?;

    println!("mode          {}", mode.name());
    println!("accuracy      {:.4} ({}/{})", summary.accuracy, summary.correct, summary.total);
    println!("unparseable   {}", summary.unparseable);
    println!("mean latency  {:.2} ms", summary.mean_latency_ms);
    for l in &summary.per_label {
        println!("  {:<12} {:.4} ({}/{})", l.label, l.accuracy, l.correct, l.total);
    }
    if let Some(path) = &opts.out {
        let file = SummaryFile {
            fingerprint: eval_fingerprint(&task, &mode, &opts.model),
            task_id: task.task_id.clone(),
            mode: mode.name().to_string(),
            model_ref: opts.model.clone(),
            summary,
        };
        write_summary(path, &file)?;
    }
    Ok(())
}
