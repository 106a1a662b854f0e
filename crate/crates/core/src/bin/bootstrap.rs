use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use fewshot_bootstrap::dataset::load_dataset;
use fewshot_bootstrap::gateway;
use fewshot_bootstrap::pipeline::{
    assemble_training_set, resume_with, run_pipeline_with, PipelineConfig, PipelineError,
    PipelineState, RunControl, CHECKPOINT_FILE,
};
use fewshot_bootstrap::{LengthBounds, TaskSpec};

/// Grow a few-shot classification dataset with LLM-generated, self-filtered examples.
#[derive(Parser)]
#[command(name = "bootstrap", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate and filter until every label has its quota.
    Run(RunArgs),
    /// Write the training JSONL of a finished run.
    ExportTrain {
        /// Output directory of the run.
        #[arg(long, default_value = ".")]
        from: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    task: PathBuf,
    /// Real labeled examples (JSONL) to draw seeds from.
    #[arg(long)]
    seeds: PathBuf,
    /// Synthetic examples wanted per label.
    #[arg(long, default_value_t = 21)]
    n: u32,
    #[arg(long)]
    out: PathBuf,
    /// Accept every candidate that passes the basic checks.
    #[arg(long)]
    skip_consistency: bool,
    /// Continue from the checkpoint in --out.
    #[arg(long)]
    resume: bool,
    /// Gateway TOML file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Serve completions from a JSON script instead of a server.
    #[arg(long)]
    mock: Option<PathBuf>,
    /// Model name sent with each request; defaults to the gateway's.
    #[arg(long, default_value = "")]
    model: String,
    #[arg(long, default_value_t = 0)]
    rng_seed: u64,
    #[arg(long, default_value_t = 4)]
    seeds_per_class: u32,
    #[arg(long, default_value_t = 8)]
    batch_size: u32,
    #[arg(long, default_value_t = 40)]
    max_rounds: u32,
    /// Consistency-check demos per label; defaults to --seeds-per-class.
    #[arg(long)]
    demos_per_class: Option<usize>,
    #[arg(long, default_value_t = 3)]
    min_words: usize,
    #[arg(long, default_value_t = 256)]
    max_words: usize,
    #[arg(long, default_value_t = 1.0)]
    temperature: f64,
    #[arg(long, default_value_t = 50)]
    top_k: u32,
    #[arg(long, default_value_t = 1)]
    num_beams: u32,
    #[arg(long, default_value_t = 128)]
    max_new_tokens: u32,
    #[arg(long, default_value_t = 4)]
    workers: usize,
    #[arg(long, hide = true)]
    halt_after_round: Option<u32>,
}

impl RunArgs {
    fn pipeline_config(&self) -> Result<PipelineConfig> {
        let task = TaskSpec::from_json_file(&self.task)?;
        let pool = load_dataset(&self.seeds, Some(&task))?;
        let mut c = PipelineConfig::new(task, pool, &self.out);
        c.plan.n_per_class = self.n;
        c.plan.seeds_per_class = self.seeds_per_class;
        c.plan.batch_size = self.batch_size;
        c.plan.max_rounds = self.max_rounds;
        c.plan.rng_seed = self.rng_seed;
        c.decoding.temperature = self.temperature;
        c.decoding.top_k = self.top_k;
        c.decoding.num_beams = self.num_beams;
        c.decoding.max_new_tokens = self.max_new_tokens;
        c.bounds = LengthBounds::new(self.min_words, self.max_words)?;
        c.skip_consistency = self.skip_consistency;
        c.demos_per_class = self
            .demos_per_class
            .unwrap_or(self.seeds_per_class as usize);
        c.model_ref = self.model.clone();
        c.workers = self.workers;
        Ok(c)
    }
}

fn run(args: RunArgs) -> Result<()> {
    let config = args.pipeline_config()?;
    let gateway = gateway::open(args.config.as_deref(), args.mock.as_deref())?;
    let control = RunControl {
        halt_after_round: args.halt_after_round,
    };
    let checkpoint = args.out.join(CHECKPOINT_FILE);
    let output = if args.resume && checkpoint.exists() {
        resume_with(&checkpoint, Some(&config), &gateway, control)?
    } else {
        if args.resume {
            log::warn!("no checkpoint in {}, starting fresh", args.out.display());
        }
        run_pipeline_with(&config, &gateway, control)?
    };
    print!("{}", output.report.to_table());
    println!(
        "wrote {} examples to {}",
        output.dataset.len(),
        args.out.display()
    );
    Ok(())
}

fn export_train(from: PathBuf, out: PathBuf) -> Result<()> {
    let path = from.join(CHECKPOINT_FILE);
    let state =
        PipelineState::load(&path).with_context(|| format!("reading {}", path.display()))?;
    if !state.complete {
        bail!("run in {} has not finished", from.display());
    }
    let synthetic = state.accepted.concat();
    let n = assemble_training_set(
        &state.seeds,
        &synthetic,
        &state.config.task,
        state.config.plan.rng_seed,
        &out,
    )?;
    println!("wrote {n} records to {}", out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::ExportTrain { from, out } => export_train(from, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            match err.downcast_ref::<PipelineError>() {
                Some(PipelineError::InsufficientYield { .. }) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
