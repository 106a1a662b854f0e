mod common;

use common::{fixture, queries, seeds, task};
use fewshot_bootstrap::prompt::{
    render_classification_prompt, render_generation_prompt, render_zero_shot_prompt,
};
use fewshot_bootstrap::task::labels_match;

/// Must equal ICL_RNG_SEED in tests/fixtures/v1/render_goldens.py.
const ICL_RNG_SEED: u64 = 7;

fn golden(name: &str, file: &str) -> String {
    std::fs::read_to_string(fixture(&format!("golden/{name}/{file}"))).unwrap()
}

fn check(name: &str) {
    let task = task(name);
    let seeds = seeds(name);
    for label in &task.labels {
        let mine: Vec<_> = seeds
            .iter()
            .filter(|s| labels_match(&s.label, label))
            .cloned()
            .collect();
        let got = render_generation_prompt(&task, label, &mine).unwrap().text;
        let file = format!("generation_{}.txt", label.to_lowercase());
        assert_eq!(got, golden(name, &file), "{name}/{file}");
    }
    for (i, q) in queries(name).iter().enumerate() {
        let icl = render_classification_prompt(&task, &seeds, q, ICL_RNG_SEED)
            .unwrap()
            .text;
        let zero = render_zero_shot_prompt(&task, q).unwrap().text;
        assert_eq!(
            icl,
            golden(name, &format!("icl_{}.txt", i + 1)),
            "{name} icl {}",
            i + 1
        );
        assert_eq!(
            zero,
            golden(name, &format!("zero_shot_{}.txt", i + 1)),
            "{name} zero-shot {}",
            i + 1
        );
        assert!(zero.len() < icl.len());
    }
}

#[test]
fn sst2_prompts_match_goldens() {
    check("sst2");
}

#[test]
fn trec_prompts_match_goldens() {
    check("trec");
}
