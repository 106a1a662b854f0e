mod common;

use std::ffi::OsStr;
use std::path::Path;
use std::process::{Command, Output};

use common::{fixture, quota_script, task};
use fewshot_bootstrap::dataset::load_dataset;
use fewshot_bootstrap::pipeline::{load_training_set, CHECKPOINT_FILE, DATASET_FILE, TRAIN_FILE};
use fewshot_bootstrap::Source;

fn bootstrap<S: AsRef<OsStr>>(args: &[S]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bootstrap"))
        .args(args)
        .env_remove("BOOTSTRAP_ENDPOINT")
        .env_remove("BOOTSTRAP_MODEL")
        .output()
        .unwrap()
}

fn run_args(out: &str, mock: &str, extra: &[&str]) -> Vec<String> {
    let task = fixture("sst2/task.json").display().to_string();
    let seeds = fixture("sst2/seeds.jsonl").display().to_string();
    let mut args: Vec<String> = [
        "run", "--task", &task, "--seeds", &seeds, "--out", out, "--mock", mock,
    ]
    .map(String::from)
    .to_vec();
    args.extend(extra.iter().map(|s| s.to_string()));
    args
}

fn write_script(dir: &Path, body: &str) -> String {
    let p = dir.join("script.json");
    std::fs::write(&p, body).unwrap();
    p.display().to_string()
}

#[test]
fn run_then_export_train() {
    let dir = tempfile::tempdir().unwrap();
    let mock = write_script(dir.path(), &quota_script(&task("sst2"), 7, 3));
    let out = dir.path().join("run").display().to_string();
    let o = bootstrap(&run_args(&out, &mock, &["--n", "21"]));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("wrote 50 examples"), "{stdout}");

    let data = load_dataset(&Path::new(&out).join(DATASET_FILE), None).unwrap();
    assert_eq!(
        data.iter()
            .filter(|e| e.source == Source::Synthetic)
            .count(),
        42
    );

    let export = dir.path().join("again.jsonl");
    let o = bootstrap(&[
        "export-train",
        "--from",
        &out,
        "--out",
        &export.display().to_string(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        std::fs::read(&export).unwrap(),
        std::fs::read(Path::new(&out).join(TRAIN_FILE)).unwrap()
    );
    assert_eq!(load_training_set(&export).unwrap().len(), 50);
}

#[test]
fn starvation_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let dup =
        r#"[{"matcher": "any", "response": "a gorgeous, witty, seductive movie.", "uses": null}]"#;
    let mock = write_script(dir.path(), dup);
    let out = dir.path().join("run").display().to_string();
    let o = bootstrap(&run_args(&out, &mock, &["--n", "2", "--max-rounds", "2"]));
    assert_eq!(
        o.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
}

#[test]
fn resume_with_changed_settings_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let mock = write_script(dir.path(), &quota_script(&task("sst2"), 7, 3));
    let out = dir.path().join("run").display().to_string();
    let halted = bootstrap(&run_args(&out, &mock, &["--halt-after-round", "1"]));
    assert_eq!(halted.status.code(), Some(1));
    assert!(Path::new(&out).join(CHECKPOINT_FILE).exists());

    let o = bootstrap(&run_args(
        &out,
        &mock,
        &["--resume", "--temperature", "0.7"],
    ));
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("checkpoint was written for config"));
}

#[test]
fn unfinished_run_cannot_be_exported() {
    let dir = tempfile::tempdir().unwrap();
    let mock = write_script(dir.path(), &quota_script(&task("sst2"), 7, 3));
    let out = dir.path().join("run").display().to_string();
    bootstrap(&run_args(&out, &mock, &["--halt-after-round", "1"]));
    let o = bootstrap(&["export-train", "--from", &out, "--out", "/dev/null"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn unreachable_server_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("gw.toml");
    std::fs::write(
        &cfg,
        "endpoint = \"http://127.0.0.1:9/v1/chat/completions\"\nmodel_ref = \"m\"\ntimeout_secs = 1\nmax_retries = 0\n",
    )
    .unwrap();
    let task = fixture("sst2/task.json").display().to_string();
    let seeds = fixture("sst2/seeds.jsonl").display().to_string();
    let out = dir.path().join("run").display().to_string();
    let o = bootstrap(&[
        "run",
        "--task",
        &task,
        "--seeds",
        &seeds,
        "--out",
        &out,
        "--config",
        &cfg.display().to_string(),
    ]);
    assert_eq!(o.status.code(), Some(1));
}
