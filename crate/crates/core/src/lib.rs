//! Few-shot data bootstrapping for text classification.
//!
//! Starting from a handful of labeled examples per class, an LLM generates
//! candidate examples for each label. Candidates that are malformed,
//! duplicated, out of length bounds, or that the same LLM classifies under a
//! different label (in-context, with the seeds as demonstrations) are
//! discarded. The loop repeats until every class has its quota. The result
//! is exported as prompt/completion records for adapter fine-tuning, and the
//! evaluator scores any served model in zero-shot, in-context or tuned mode.
//!
//! Start with [`pipeline::run_pipeline`], or the `examples/` directory.

pub mod dataset;
pub mod diversity;
pub mod eval;
pub mod filter;
pub mod gateway;
pub mod generate;
pub mod pipeline;
pub mod prompt;
pub mod rng;
pub mod task;

pub use dataset::{load_dataset, select_seeds, select_task_seeds, write_dataset, DatasetError};
pub use filter::{FilterReport, FilterSettings, LengthBounds, Prediction};
pub use gateway::{
    CompletionRequest, CompletionResponse, Gateway, GatewayConfig, GatewayError, HttpGateway,
};
pub use pipeline::{run_pipeline, PipelineConfig, PipelineError};
pub use task::{
    DecodingConfig, FilterVerdict, GenerationPlan, LabeledExample, Source, TaskSpec, VerdictKind,
};

/// Hex SHA-256 of the JSON serialization of `value`.
pub fn fingerprint<T: serde::Serialize + ?Sized>(value: &T) -> String {
    use sha2::{Digest, Sha256};
    let bytes = serde_json::to_vec(value).expect("fingerprinted values serialize");
    hex::encode(Sha256::digest(&bytes))
}
