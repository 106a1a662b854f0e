//! Unique n-gram growth curves and token frequency tables.
//!
//!     cargo run --example analyze
//!     cargo run --example analyze -- --data run/dataset.jsonl --ngram 3 --sizes 4,8,16,25 --out curve.csv --freq-dir freq/

#[path = "shared/mod.rs"]
mod shared;

use std::path::PathBuf;

use clap::Parser;
use fewshot_bootstrap::dataset::load_dataset;
use fewshot_bootstrap::diversity::{
    default_stopwords, diversity_curve, load_stopwords, token_frequencies, write_curves_csv,
    write_frequencies_csv,
};
use fewshot_bootstrap::{LabeledExample, Source};

#[derive(Parser)]
struct Opts {
    /// Dataset JSONL; real and synthetic examples are analyzed separately.
    #[arg(long, default_value_os_t = shared::fixture("sst2/test.jsonl"))]
    data: PathBuf,
    #[arg(long, default_value_t = 3)]
    ngram: usize,
    /// Increasing prefix sizes; defaults to 1..=len in steps of a quarter.
    #[arg(long, value_delimiter = ',')]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    rng_seed: u64,
    #[arg(long, default_value_t = 20)]
    top_k: usize,
    /// One stopword per line; a built-in English list otherwise.
    #[arg(long)]
    stopwords: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory for `<cohort>_frequencies.csv`.
    #[arg(long)]
    freq_dir: Option<PathBuf>,
}

fn quarters(len: usize) -> Vec<usize> {
    let mut v: Vec<usize> = (1..=4).map(|q| (len * q).div_ceil(4)).filter(|&s| s > 0).collect();
    v.dedup();
    v
}

fn main() -> anyhow::Result<()> {
    let opts = Opts::parse();
    let data = load_dataset(&opts.data, None)?;
    let stop = match &opts.stopwords {
        Some(p) => load_stopwords(p)?,
        None => default_stopwords(),
    };
    let cohorts: Vec<Vec<LabeledExample>> = [Source::Real, Source::Synthetic]
        .into_iter()
        .map(|s| data.iter().filter(|e| e.source == s).cloned().collect::<Vec<_>>())
        .filter(|c| !c.is_empty())
        .collect();

    let mut curves = Vec::new();
    for cohort in &cohorts {
        let sizes = if opts.sizes.is_empty() { quarters(cohort.len()) } else { opts.sizes.clone() };
        let curve = diversity_curve(cohort, &sizes, opts.ngram, opts.rng_seed)?;
        println!("{} ({} examples), unique {}-grams:", curve.cohort.as_str(), cohort.len(), opts.ngram);
        for p in &curve.points {
            println!("  {:>6} {:>8}", p.data_size, p.unique_ngram_count);
        }
        let texts: Vec<&str> = cohort.iter().map(|e| e.text.as_str()).collect();
        let table = token_frequencies(&texts, opts.top_k, &stop, curve.cohort.as_str())?;
        let top: Vec<String> = table.entries.iter().take(8).map(|(t, n)| format!("{t}:{n}")).collect();
        println!("  top tokens: {}", top.join(" "));
        if let Some(dir) = &opts.freq_dir {
            std::fs::create_dir_all(dir)?;
            write_frequencies_csv(&dir.join(format!("{}_frequencies.csv", table.cohort)), &table)?;
        }
        curves.push(curve);
    }
    if let Some(path) = &opts.out {
        write_curves_csv(path, &curves)?;
    }
    Ok(())
}
