#![allow(dead_code)]

use std::path::{Path, PathBuf};

use clap::Args;
use fewshot_bootstrap::gateway::{self, FnMock, Gateway};
use fewshot_bootstrap::rng::SplitMix64;
use fewshot_bootstrap::TaskSpec;

pub fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/v1").join(rel)
}

#[derive(Args, Debug)]
pub struct GatewayArgs {
    /// Gateway TOML file for a real server.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// JSON script of canned replies.
    #[arg(long)]
    pub mock: Option<PathBuf>,
}

impl GatewayArgs {
    /// The configured gateway, or the offline toy model when neither flag is set.
    pub fn open(&self, task: &TaskSpec) -> anyhow::Result<Box<dyn Gateway>> {
        if self.config.is_none() && self.mock.is_none() && std::env::var_os("BOOTSTRAP_ENDPOINT").is_none() {
            eprintln!("(no --config or --mock: using the offline toy model)");
            return Ok(Box::new(toy_model(task.clone())));
        }
        Ok(gateway::open(self.config.as_deref(), self.mock.as_deref())?)
    }
}

fn blocks(prompt: &str, task: &TaskSpec) -> Vec<(String, String)> {
    let t = format!("{} ", task.text_marker);
    let l = format!("{} ", task.label_marker);
    let lines: Vec<&str> = prompt.lines().collect();
    lines
        .windows(2)
        .filter_map(|w| Some((w[0].strip_prefix(&t)?.to_string(), w[1].strip_prefix(&l)?.to_string())))
        .collect()
}

fn words(text: &str) -> Vec<String> {
    text.split_whitespace().map(|w| w.to_lowercase()).collect()
}

/// A deterministic stand-in for an LLM.
///
/// Generation splices the first half of one seed onto the second half of
/// another, three times per call. Classification picks the label of the
/// demo sharing the most words with the query; with no demos it answers the
/// first label.
pub fn toy_model(task: TaskSpec) -> FnMock {
    FnMock::new(move |req| {
        let demos = blocks(&req.prompt, &task);
        if req.prompt.ends_with(&task.label_marker) {
            let query = req.prompt.rsplit(&format!("{} ", task.text_marker)).next().unwrap_or("");
            let q = words(query);
            let best = demos
                .iter()
                .max_by_key(|(text, _)| words(text).iter().filter(|w| q.contains(w)).count())
                .map(|(_, label)| label.clone());
            return Ok(format!(" {}", best.unwrap_or_else(|| task.labels[0].clone())));
        }
        let label = demos.first().map(|(_, l)| l.clone()).unwrap_or_default();
        let mut rng = SplitMix64::new(req.seed.unwrap_or(0));
        let mut out = String::new();
        for k in 0..3 {
            let a = words(&demos[rng.below(demos.len() as u64) as usize].0);
            let b = words(&demos[rng.below(demos.len() as u64) as usize].0);
            let text = [&a[..a.len() / 2], &b[b.len() / 2..]].concat().join(" ");
            if k > 0 {
                out.push_str(&format!("{} ", task.text_marker));
            } else {
                out.push(' ');
            }
            out.push_str(&format!("{text}\n{} {label}\n", task.label_marker));
        }
        Ok(out)
    })
}
