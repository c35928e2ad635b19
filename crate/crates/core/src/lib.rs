//! Active learning from yes/no questions about composite classes.
//!
//! A learner chooses (example, composite class) pairs, asks a yes/no question
//! about each, narrows that example's set of possible classes with the answer,
//! and periodically re-trains a softmax classifier on the resulting partial
//! labels.

pub mod acquisition;
pub mod annotator;
pub mod classset;
pub mod datagen;
pub mod engine;
pub mod error;
pub mod hierarchy;
pub mod labels;
pub mod model;
mod optim;
pub mod study;

pub use acquisition::{ExampleHeuristic, Question, QuestionStrategy};
pub use annotator::{Annotator, OracleAnnotator};
pub use classset::ClassSet;
pub use datagen::{Dataset, SynthParams};
pub use engine::{Experiment, ExperimentConfig, Mode, Pool, RoundMetrics, Step, StopReason};
pub use error::{Error, Result};
pub use hierarchy::ClassHierarchy;
pub use labels::{Answer, PartialLabel};
pub use model::{Architecture, Classifier, TrainConfig};
pub use optim::Adam;
