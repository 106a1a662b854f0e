//! Persistent loop state and the per-directory lock.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{PipelineConfig, PipelineError};
use crate::filter::{DedupIndex, FilterReport};
use crate::task::LabeledExample;

pub const CHECKPOINT_VERSION: u32 = 1;
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const LOCK_FILE: &str = ".bootstrap.lock";

/// Next label-round to run. Rounds start at 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cursor {
    pub round: u32,
    pub label: usize,
}

impl Cursor {
    pub const START: Cursor = Cursor { round: 1, label: 0 };

    pub(crate) fn after(self, labels: usize) -> Cursor {
        if self.label + 1 < labels {
            Cursor {
                round: self.round,
                label: self.label + 1,
            }
        } else {
            Cursor {
                round: self.round + 1,
                label: 0,
            }
        }
    }
}

/// Everything needed to continue a run. The sampling seed of each call is
/// derived from the cursor, so no generator state is stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineState {
    pub version: u32,
    pub config_hash: String,
    pub config: PipelineConfig,
    pub seeds: Vec<LabeledExample>,
    pub cursor: Cursor,
    /// Accepted synthetic examples, one list per task label.
    pub accepted: Vec<Vec<LabeledExample>>,
    pub index: DedupIndex,
    pub report: FilterReport,
    pub complete: bool,
}

impl PipelineState {
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        let state: PipelineState =
            serde_json::from_str(&text).map_err(|e| PipelineError::CorruptCheckpoint {
                path: path.display().to_string(),
                reason: e.to_string(),
            })?;
        let corrupt = |reason: &str| PipelineError::CorruptCheckpoint {
            path: path.display().to_string(),
            reason: reason.to_string(),
        };
        if state.version != CHECKPOINT_VERSION {
            return Err(corrupt("unsupported checkpoint version"));
        }
        if state.config_hash != state.config.hash() {
            return Err(corrupt("stored hash does not match stored config"));
        }
        let labels = state.config.task.labels.len();
        if state.accepted.len() != labels || state.report.labels.len() != labels {
            return Err(corrupt("per-label state does not match the task"));
        }
        let quota = state.config.plan.n_per_class as usize;
        if state.accepted.iter().any(|a| a.len() > quota) {
            return Err(corrupt("more accepted examples than the quota"));
        }
        if !state.report.is_balanced() {
            return Err(corrupt("report does not balance"));
        }
        Ok(state)
    }

    /// Write to a sibling temp file, then rename over `path`.
    pub fn save(&self, path: &Path) -> Result<(), PipelineError> {
        let mut text = serde_json::to_string_pretty(self).expect("state serializes");
        text.push('\n');
        write_atomic(path, text.as_bytes())
    }
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    result.map_err(|e| PipelineError::io(path, e))
}

/// Exclusive claim on an output directory, released on drop. A lock left by
/// a process that no longer exists is taken over.
#[derive(Debug)]
pub struct DirLock {
    path: PathBuf,
}

impl DirLock {
    pub fn acquire(dir: &Path) -> Result<Self, PipelineError> {
        let path = dir.join(LOCK_FILE);
        for _ in 0..2 {
            match OpenOptions::new().write(true).create_new(true).open(&path) {
                Ok(mut f) => {
                    writeln!(f, "{}", std::process::id())
                        .map_err(|e| PipelineError::io(&path, e))?;
                    return Ok(Self { path });
                }
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                    let owner = fs::read_to_string(&path)
                        .ok()
                        .and_then(|s| s.trim().parse::<u32>().ok());
                    match owner {
                        Some(pid) if pid != std::process::id() && process_alive(pid) => {
                            return Err(PipelineError::Locked {
                                path: path.display().to_string(),
                                pid,
                            });
                        }
                        _ => {
                            log::warn!("removing stale lock {}", path.display());
                            let _ = fs::remove_file(&path);
                        }
                    }
                }
                Err(e) => return Err(PipelineError::io(&path, e)),
            }
        }
        Err(PipelineError::Locked {
            path: path.display().to_string(),
            pid: 0,
        })
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

#[cfg(target_os = "linux")]
fn process_alive(pid: u32) -> bool {
    Path::new("/proc").join(pid.to_string()).exists()
}

#[cfg(not(target_os = "linux"))]
fn process_alive(_pid: u32) -> bool {
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cursor_walks_labels_then_rounds() {
        let c = Cursor::START.after(2);
        assert_eq!(c, Cursor { round: 1, label: 1 });
        assert_eq!(c.after(2), Cursor { round: 2, label: 0 });
        assert!(Cursor { round: 1, label: 1 } < Cursor { round: 2, label: 0 });
    }

    #[test]
    fn lock_is_exclusive_and_released() {
        let dir = tempfile::tempdir().unwrap();
        let lock = DirLock::acquire(dir.path()).unwrap();
        assert!(dir.path().join(LOCK_FILE).exists());
        drop(lock);
        assert!(!dir.path().join(LOCK_FILE).exists());
    }

    #[test]
    fn live_foreign_lock_blocks_and_stale_lock_is_taken() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(LOCK_FILE);
        // pid 1 always exists on Linux.
        fs::write(&path, "1\n").unwrap();
        if cfg!(target_os = "linux") {
            assert!(matches!(
                DirLock::acquire(dir.path()),
                Err(PipelineError::Locked { pid: 1, .. })
            ));
        }
        fs::write(&path, "not a pid\n").unwrap();
        assert!(DirLock::acquire(dir.path()).is_ok());
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.json");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
