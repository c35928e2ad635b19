//! Request and response bodies. All bodies are JSON.

use std::path::PathBuf;

use alpf_core::engine::{Phase, RoundMetrics};
use alpf_core::ExperimentConfig;
use serde::{Deserialize, Serialize};

/// Where a session's examples come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DatasetRef {
    /// A built-in dataset (`synth16`, `toy`).
    Preset {
        preset: String,
        #[serde(default)]
        seed: u64,
    },
    /// A dataset directory relative to the service's data root.
    Dir { dir: PathBuf },
}

/// `POST /sessions`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub dataset: DatasetRef,
    /// Hierarchy file relative to the data root, overriding the dataset's own.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hierarchy: Option<PathBuf>,
    pub config: ExperimentConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    /// A question is waiting for an answer.
    Active,
    /// The classifier is being re-trained; poll until this changes.
    Retraining,
    Complete,
    Exhausted,
    /// Re-training failed; see `error`.
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuestionView {
    /// Sequence number of the question; echo it back when answering.
    pub id: usize,
    pub example: usize,
    pub composite: usize,
    pub class_name: String,
    /// `Is this a <class_name>?`
    pub text: String,
    pub phase: Phase,
    pub payload: Option<String>,
    pub features: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Progress {
    pub questions_asked: usize,
    pub budget: usize,
    pub examples: usize,
    pub exact_examples: usize,
    pub fraction_exact: f64,
    pub mean_remaining: f64,
    pub rounds_completed: usize,
    pub warm_start_incomplete: bool,
}

/// Returned by create, question and answer calls.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub id: String,
    pub status: Status,
    pub question: Option<QuestionView>,
    pub progress: Progress,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnswerValue {
    Yes,
    No,
}

impl From<AnswerValue> for alpf_core::Answer {
    fn from(v: AnswerValue) -> Self {
        match v {
            AnswerValue::Yes => alpf_core::Answer::Yes,
            AnswerValue::No => alpf_core::Answer::No,
        }
    }
}

/// `POST /sessions/{id}/answer`
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnswerRequest {
    pub question_id: usize,
    pub answer: AnswerValue,
}

/// `GET /sessions/{id}/metrics`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsView {
    pub id: String,
    pub status: Status,
    pub progress: Progress,
    pub history: Vec<RoundMetrics>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub id: String,
    pub status: Status,
    pub questions_asked: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub sessions: usize,
    pub version: String,
}

/// Body of every non-2xx response.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    /// Machine-readable kind: `bad_request`, `not_found`, `conflict`,
    /// `inconsistent_answer` or `internal`.
    pub error: String,
    pub message: String,
    /// For conflicts: the id of the question currently awaiting an answer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pending_question_id: Option<usize>,
}
