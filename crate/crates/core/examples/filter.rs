//! Run candidates through the basic checks and the label-consistency check.
//!
//!     cargo run --example generate -- --out /tmp/cands.jsonl
//!     cargo run --example filter -- --candidates /tmp/cands.jsonl --out /tmp/kept.jsonl
//!     cargo run --example filter -- --candidates /tmp/cands.jsonl --skip-consistency

#[path = "shared/mod.rs"]
mod shared;

use std::path::PathBuf;

use clap::Parser;
use fewshot_bootstrap::dataset::{load_dataset, write_dataset};
use fewshot_bootstrap::filter::{filter_candidates, FilterSettings};
use fewshot_bootstrap::generate::Candidate;
use fewshot_bootstrap::{LengthBounds, TaskSpec};

#[derive(Parser)]
struct Opts {
    #[arg(long, default_value_os_t = shared::fixture("sst2/task.json"))]
    task: PathBuf,
    /// Real examples used as consistency demos and for deduplication.
    #[arg(long, default_value_os_t = shared::fixture("sst2/seeds.jsonl"))]
    seeds: PathBuf,
    #[arg(long)]
    candidates: PathBuf,
    #[arg(long, default_value_t = 3)]
    min_words: usize,
    #[arg(long, default_value_t = 256)]
    max_words: usize,
    #[arg(long)]
    skip_consistency: bool,
    #[arg(long, default_value_t = 0)]
    rng_seed: u64,
    /// Accepted examples as dataset JSONL.
    #[arg(long)]
    out: Option<PathBuf>,
    /// FilterReport as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    gateway: shared::GatewayArgs,
}

fn main() -> anyhow::Result<()> {
    let opts = Opts::parse();
    let task = TaskSpec::from_json_file(&opts.task)?;
    let seeds = load_dataset(&opts.seeds, Some(&task))?;
    let candidates: Vec<Candidate> = std::fs::read_to_string(&opts.candidates)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect::<Result<_, _>>()?;
    let settings = FilterSettings {
        bounds: LengthBounds::new(opts.min_words, opts.max_words)?,
        skip_consistency: opts.skip_consistency,
        rng_seed: opts.rng_seed,
        ..FilterSettings::default()
    };
    let gateway = opts.gateway.open(&task)?;
    let outcome = filter_candidates(&gateway, &task, &seeds, candidates, settings)?;

    for (c, v) in &outcome.verdicts {
        println!("{:<28} {}", v.to_string(), c.text);
    }
    println!();
    print!("{}", outcome.report.to_table());
    if let Some(path) = &opts.out {
        write_dataset(path, &outcome.accepted)?;
    }
    if let Some(path) = &opts.report {
        std::fs::write(path, serde_json::to_string_pretty(&outcome.report)? + "\n")?;
    }
    Ok(())
}
