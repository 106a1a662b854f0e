//! The full loop: select seeds, generate and filter until every label has
//! its quota, then export the training set.
//!
//!     cargo run --example bootstrap_pipeline
//!     cargo run --example bootstrap_pipeline -- --config gateway.toml --n 21 --out run/

#[path = "shared/mod.rs"]
mod shared;

use std::path::PathBuf;

use clap::Parser;
use fewshot_bootstrap::dataset::load_dataset;
use fewshot_bootstrap::pipeline::{run_pipeline, PipelineConfig, TRAIN_FILE};
use fewshot_bootstrap::{Source, TaskSpec};

#[derive(Parser)]
struct Opts {
    #[arg(long, default_value_os_t = shared::fixture("sst2/task.json"))]
    task: PathBuf,
    #[arg(long, default_value_os_t = shared::fixture("sst2/seeds.jsonl"))]
    seeds: PathBuf,
    #[arg(long, default_value_t = 6)]
    n: u32,
    #[arg(long)]
    skip_consistency: bool,
    /// Output directory; a temporary one when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    gateway: shared::GatewayArgs,
}

fn main() -> anyhow::Result<()> {
    let opts = Opts::parse();
    let task = TaskSpec::from_json_file(&opts.task)?;
    let pool = load_dataset(&opts.seeds, Some(&task))?;
    let tmp = tempfile::tempdir()?;
    let out = opts.out.clone().unwrap_or_else(|| tmp.path().to_path_buf());

    let mut config = PipelineConfig::new(task.clone(), pool, &out);
    config.plan.n_per_class = opts.n;
    config.skip_consistency = opts.skip_consistency;
    let gateway = opts.gateway.open(&task)?;
    let result = run_pipeline(&config, &gateway)?;

    print!("{}", result.report.to_table());
    println!();
    for ex in result.dataset.iter().filter(|e| e.source == Source::Synthetic).take(6) {
        println!("[{} r{}] {}", ex.label, ex.round, ex.text);
    }
    let train = std::fs::read_to_string(out.join(TRAIN_FILE))?;
    println!("\n{} training records; first one:\n{}", train.lines().count(), train.lines().next().unwrap_or(""));
    Ok(())
}
