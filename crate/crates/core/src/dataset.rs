//! JSONL persistence of labeled examples and deterministic seed selection.
//!
//! One JSON object per line with exactly the fields `text`, `label`,
//! `source` (`"real"` / `"synthetic"`), `round` and `verdict` (string or null).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use crate::rng::{fnv1a64, SplitMix64};
use crate::task::{label_key, LabeledExample, Source, TaskSpec};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("malformed record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("unknown label {0:?}")]
    UnknownLabel(String),
    #[error("label {label:?} has {available} real examples, {k} requested")]
    InsufficientExamples {
        label: String,
        available: usize,
        k: usize,
    },
    #[error("i/o failure on {path}: {source}")]
    IoFailure {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl DatasetError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        DatasetError::IoFailure {
            path: path.display().to_string(),
            source,
        }
    }
}

/// Read a dataset file. With a task, labels are validated and rewritten to
/// the task's casing.
pub fn load_dataset(
    path: &Path,
    task: Option<&TaskSpec>,
) -> Result<Vec<LabeledExample>, DatasetError> {
    let file = File::open(path).map_err(|e| DatasetError::io(path, e))?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| DatasetError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut example: LabeledExample =
            serde_json::from_str(&line).map_err(|e| DatasetError::MalformedRecord {
                line: line_no,
                reason: e.to_string(),
            })?;
        example
            .check_shape()
            .map_err(|reason| DatasetError::MalformedRecord {
                line: line_no,
                reason,
            })?;
        if let Some(task) = task {
            example.label = task
                .canonical_label(&example.label)
                .ok_or_else(|| DatasetError::UnknownLabel(example.label.clone()))?
                .to_string();
        }
        out.push(example);
    }
    Ok(out)
}

pub fn write_dataset(path: &Path, examples: &[LabeledExample]) -> Result<(), DatasetError> {
    write_jsonl(path, examples)
}

pub(crate) fn write_jsonl<T: serde::Serialize>(
    path: &Path,
    records: &[T],
) -> Result<(), DatasetError> {
    let file = File::create(path).map_err(|e| DatasetError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for record in records {
        let line = serde_json::to_string(record).expect("records serialize to JSON");
        writeln!(w, "{line}").map_err(|e| DatasetError::io(path, e))?;
    }
    w.flush().map_err(|e| DatasetError::io(path, e))
}

pub(crate) fn read_jsonl<T: serde::de::DeserializeOwned>(
    path: &Path,
) -> Result<Vec<T>, DatasetError> {
    let file = File::open(path).map_err(|e| DatasetError::io(path, e))?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| DatasetError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|e| DatasetError::MalformedRecord {
                line: idx + 1,
                reason: e.to_string(),
            })?,
        );
    }
    Ok(out)
}

/// Pick `k` real examples per label without replacement.
///
/// Labels are visited in order of first appearance. Each label's pool is
/// shuffled by a [`SplitMix64`] stream seeded with
/// `rng_seed ^ fnv1a64(lowercased label)`, the first `k` are kept, and the
/// result is returned in dataset order.
pub fn select_seeds(
    dataset: &[LabeledExample],
    k: usize,
    rng_seed: u64,
) -> Result<Vec<LabeledExample>, DatasetError> {
    let mut labels: Vec<String> = Vec::new();
    for ex in dataset.iter().filter(|e| e.source == Source::Real) {
        let key = label_key(&ex.label);
        if !labels.contains(&key) {
            labels.push(key);
        }
    }

    let mut chosen: Vec<usize> = Vec::new();
    for key in &labels {
        let pool: Vec<usize> = dataset
            .iter()
            .enumerate()
            .filter(|(_, e)| e.source == Source::Real && label_key(&e.label) == *key)
            .map(|(i, _)| i)
            .collect();
        if pool.len() < k {
            return Err(DatasetError::InsufficientExamples {
                label: dataset[pool[0]].label.clone(),
                available: pool.len(),
                k,
            });
        }
        let mut rng = SplitMix64::new(rng_seed ^ fnv1a64(key));
        let order = rng.permutation(pool.len());
        chosen.extend(order.into_iter().take(k).map(|i| pool[i]));
    }
    chosen.sort_unstable();
    Ok(chosen.into_iter().map(|i| dataset[i].clone()).collect())
}

/// Like [`select_seeds`], but also fails for task labels that have no real
/// examples at all.
pub fn select_task_seeds(
    task: &TaskSpec,
    dataset: &[LabeledExample],
    k: usize,
    rng_seed: u64,
) -> Result<Vec<LabeledExample>, DatasetError> {
    for label in &task.labels {
        let available = dataset
            .iter()
            .filter(|e| e.source == Source::Real && label_key(&e.label) == label_key(label))
            .count();
        if available < k {
            return Err(DatasetError::InsufficientExamples {
                label: label.clone(),
                available,
                k,
            });
        }
    }
    select_seeds(dataset, k, rng_seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::task::fixtures::sst2;
    use crate::task::FilterVerdict;
    use proptest::prelude::*;

    fn pool(per_label: usize) -> Vec<LabeledExample> {
        let mut v = Vec::new();
        for i in 0..per_label {
            v.push(LabeledExample::real(format!("good film {i}"), "Positive"));
            v.push(LabeledExample::real(format!("bad film {i}"), "Negative"));
        }
        v
    }

    #[test]
    fn round_trip_preserves_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        let data = vec![
            LabeledExample::real("a lovely film", "Positive"),
            LabeledExample::real("a dull film", "Negative"),
            LabeledExample::synthetic(
                "great fun",
                "Positive",
                3,
                FilterVerdict::accepted("Positive"),
            ),
        ];
        write_dataset(&path, &data).unwrap();
        assert_eq!(load_dataset(&path, Some(&sst2())).unwrap(), data);
    }

    #[test]
    fn empty_file_loads_empty() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        write_dataset(&path, &[]).unwrap();
        assert_eq!(std::fs::read(&path).unwrap().len(), 0);
        assert!(load_dataset(&path, None).unwrap().is_empty());
    }

    #[test]
    fn empty_text_is_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        std::fs::write(
            &path,
            "{\"text\":\"ok\",\"label\":\"Positive\",\"source\":\"real\",\"round\":0,\"verdict\":null}\n\
             {\"text\":\"\", \"label\":\"Positive\",\"source\":\"real\",\"round\":0,\"verdict\":null}\n",
        )
        .unwrap();
        match load_dataset(&path, None) {
            Err(DatasetError::MalformedRecord { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected MalformedRecord, got {other:?}"),
        }
    }

    #[test]
    fn extra_fields_and_bad_json_are_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        std::fs::write(
            &path,
            "{\"text\":\"ok\",\"label\":\"Positive\",\"source\":\"real\",\"round\":0,\"verdict\":null,\"x\":1}\n",
        )
        .unwrap();
        assert!(matches!(
            load_dataset(&path, None),
            Err(DatasetError::MalformedRecord { line: 1, .. })
        ));
        std::fs::write(&path, "not json\n").unwrap();
        assert!(matches!(
            load_dataset(&path, None),
            Err(DatasetError::MalformedRecord { line: 1, .. })
        ));
    }

    #[test]
    fn unknown_label_and_canonical_casing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        write_dataset(&path, &[LabeledExample::real("ok film", " positive")]).unwrap();
        assert_eq!(
            load_dataset(&path, Some(&sst2())).unwrap()[0].label,
            "Positive"
        );
        write_dataset(&path, &[LabeledExample::real("ok film", "Neutral")]).unwrap();
        assert!(matches!(
            load_dataset(&path, Some(&sst2())),
            Err(DatasetError::UnknownLabel(l)) if l == "Neutral"
        ));
    }

    #[test]
    fn unwritable_path_is_io_failure() {
        let err = write_dataset(Path::new("/proc/definitely/not/here.jsonl"), &[]).unwrap_err();
        assert!(matches!(err, DatasetError::IoFailure { .. }));
    }

    #[test]
    fn seeds_are_deterministic_and_balanced() {
        let data = pool(10);
        let a = select_seeds(&data, 4, 7).unwrap();
        let b = select_seeds(&data, 4, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 8);
        assert_eq!(a.iter().filter(|e| e.label == "Positive").count(), 4);
        let c = select_seeds(&data, 4, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn seeds_insufficient() {
        let mut data = pool(4);
        data.retain(|e| e.text != "bad film 3");
        match select_seeds(&data, 4, 7) {
            Err(DatasetError::InsufficientExamples {
                label,
                available,
                k,
            }) => {
                assert_eq!((label.as_str(), available, k), ("Negative", 3, 4));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn seeds_full_pool_is_identity() {
        let data = pool(4);
        for seed in [0, 1, 99] {
            assert_eq!(select_seeds(&data, 4, seed).unwrap(), data);
        }
    }

    #[test]
    fn task_seeds_require_every_label() {
        let data: Vec<_> = pool(4)
            .into_iter()
            .filter(|e| e.label == "Positive")
            .collect();
        assert!(matches!(
            select_task_seeds(&sst2(), &data, 4, 0),
            Err(DatasetError::InsufficientExamples { available: 0, .. })
        ));
    }

    fn arb_example() -> impl Strategy<Value = LabeledExample> {
        (
            "[a-zA-Z0-9 ,.!?\"\\\\\n\u{e9}\u{4e2d}]{0,30}[a-z]",
            prop_oneof![Just("Positive"), Just("Negative")],
            any::<bool>(),
            1u32..50,
        )
            .prop_map(|(text, label, synthetic, round)| {
                if synthetic {
                    LabeledExample::synthetic(text, label, round, FilterVerdict::accepted(label))
                } else {
                    LabeledExample::real(text, label)
                }
            })
    }

    proptest! {
        #[test]
        fn write_then_load_is_identity(data in proptest::collection::vec(arb_example(), 0..20)) {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("d.jsonl");
            write_dataset(&path, &data).unwrap();
            prop_assert_eq!(load_dataset(&path, Some(&sst2())).unwrap(), data);
        }

        #[test]
        fn select_seeds_is_pure(seed in any::<u64>(), k in 1usize..6) {
            let data = pool(8);
            let a = select_seeds(&data, k, seed).unwrap();
            prop_assert_eq!(&a, &select_seeds(&data, k, seed).unwrap());
            prop_assert_eq!(a.len(), 2 * k);
        }
    }
}
