//! One generation call per label; candidates are written as JSONL.
//!
//!     cargo run --example generate -- --label all --out candidates.jsonl
//!     cargo run --example generate -- --config gateway.toml --label Positive --temperature 0.8

#[path = "shared/mod.rs"]
mod shared;

use std::path::PathBuf;

use clap::Parser;
use fewshot_bootstrap::dataset::{load_dataset, select_task_seeds};
use fewshot_bootstrap::generate::{generate_batch, GenerationCall};
use fewshot_bootstrap::task::labels_match;
use fewshot_bootstrap::{DecodingConfig, TaskSpec};

#[derive(Parser)]
struct Opts {
    #[arg(long, default_value_os_t = shared::fixture("sst2/task.json"))]
    task: PathBuf,
    #[arg(long, default_value_os_t = shared::fixture("sst2/seeds.jsonl"))]
    seeds: PathBuf,
    /// A task label, or "all".
    #[arg(long, default_value = "all")]
    label: String,
    #[arg(long, default_value_t = 4)]
    seeds_per_class: usize,
    #[arg(long, default_value_t = 0)]
    rng_seed: u64,
    #[arg(long, default_value_t = 1.0)]
    temperature: f64,
    #[arg(long, default_value_t = 50)]
    top_k: u32,
    #[arg(long, default_value_t = 1)]
    num_beams: u32,
    #[arg(long, default_value_t = 128)]
    max_new_tokens: u32,
    /// Candidate JSONL; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    gateway: shared::GatewayArgs,
}

fn main() -> anyhow::Result<()> {
    let opts = Opts::parse();
    let task = TaskSpec::from_json_file(&opts.task)?;
    let pool = load_dataset(&opts.seeds, Some(&task))?;
    let seeds = select_task_seeds(&task, &pool, opts.seeds_per_class, opts.rng_seed)?;
    let decoding = DecodingConfig {
        temperature: opts.temperature,
        top_k: opts.top_k,
        num_beams: opts.num_beams,
        max_new_tokens: opts.max_new_tokens,
        stop_sequences: Vec::new(),
    };
    let gateway = opts.gateway.open(&task)?;

    let labels: Vec<String> = if opts.label == "all" {
        task.labels.clone()
    } else {
        vec![opts.label.clone()]
    };
    let mut lines = Vec::new();
    for (i, label) in labels.iter().enumerate() {
        let mine: Vec<_> = seeds.iter().filter(|s| labels_match(&s.label, label)).cloned().collect();
        let call = GenerationCall {
            task: &task,
            target_label: label,
            seeds: &mine,
            decoding: &decoding,
            round: 1,
            model_ref: "",
            seed: Some(opts.rng_seed.wrapping_add(i as u64)),
        };
        for c in generate_batch(&gateway, &call)? {
            lines.push(serde_json::to_string(&c)?);
        }
    }
    let body = lines.join("\n") + "\n";
    match &opts.out {
        Some(path) => {
            std::fs::write(path, body)?;
            eprintln!("wrote {} candidates to {}", lines.len(), path.display());
        }
        None => print!("{body}"),
    }
    Ok(())
}
