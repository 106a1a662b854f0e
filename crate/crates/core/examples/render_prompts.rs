//! Print the generation, in-context and zero-shot prompts for a task.
//!
//!     cargo run --example render_prompts
//!     cargo run --example render_prompts -- --task t.json --seeds s.jsonl --label Positive --query "so dull"

#[path = "shared/mod.rs"]
mod shared;

use std::path::PathBuf;

use clap::Parser;
use fewshot_bootstrap::dataset::load_dataset;
use fewshot_bootstrap::prompt::{
    render_classification_prompt, render_generation_prompt, render_zero_shot_prompt,
};
use fewshot_bootstrap::task::labels_match;
use fewshot_bootstrap::TaskSpec;

#[derive(Parser)]
struct Opts {
    #[arg(long, default_value_os_t = shared::fixture("sst2/task.json"))]
    task: PathBuf,
    #[arg(long, default_value_os_t = shared::fixture("sst2/seeds.jsonl"))]
    seeds: PathBuf,
    /// Label for the generation prompt; defaults to the first task label.
    #[arg(long)]
    label: Option<String>,
    #[arg(long, default_value = "an instant classic that rewards repeat viewings.")]
    query: String,
    /// Seed for the demo order of the in-context prompt.
    #[arg(long, default_value_t = 7)]
    rng_seed: u64,
}

fn main() -> anyhow::Result<()> {
    let opts = Opts::parse();
    let task = TaskSpec::from_json_file(&opts.task)?;
    let seeds = load_dataset(&opts.seeds, Some(&task))?;
    let label = opts.label.unwrap_or_else(|| task.labels[0].clone());
    let mine: Vec<_> = seeds.iter().filter(|s| labels_match(&s.label, &label)).cloned().collect();

    let generation = render_generation_prompt(&task, &label, &mine)?;
    let icl = render_classification_prompt(&task, &seeds, &opts.query, opts.rng_seed)?;
    let zero = render_zero_shot_prompt(&task, &opts.query)?;
    for (title, p) in [("generation", &generation), ("in-context", &icl), ("zero-shot", &zero)] {
        println!("==== {title} ({} bytes) ====\n{}\n", p.text.len(), p.text);
    }
    println!("in-context demo order: {:?}", icl.demo_order);
    Ok(())
}
