//! The active learning loop.
//!
//! [`Experiment`] is a step-wise state machine so that the same code serves
//! oracle simulation ([`run`]) and human sessions, where answers and
//! re-trainings arrive asynchronously:
//!
//! ```text
//! loop {
//!     match exp.next_step()? {
//!         Step::Ask(q) => exp.answer(q, annotator.answer(q, ..)?)?,
//!         Step::Retrain => exp.retrain()?,
//!         Step::Finished(_) => break,
//!     }
//! }
//! ```
//!
//! Warm-start questions flow through the same queue. Scores are computed once
//! per re-training from cached predictions; when an answer changes an
//! example's partial label only that example's candidates are re-scored.

mod candidates;
mod config;
mod metrics;

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use candidates::CandidateQueue;
pub use config::{ExperimentConfig, Mode};
pub use metrics::{
    audit_text, metrics_csv, metrics_json, read_audit, write_audit, write_audit_line,
    write_metrics_csv, AuditEntry, Phase, RoundMetrics,
};

use crate::acquisition::{binary_split_question, example_scores_me_lc, ExampleHeuristic, Question};
use crate::annotator::Annotator;
use crate::classset::ClassSet;
use crate::datagen::Dataset;
use crate::error::{Error, Result};
use crate::hierarchy::ClassHierarchy;
use crate::labels::{Answer, PartialLabel};
use crate::model::{entropy, Classifier, Sample, TrainConfig};

const WARM_STREAM: u64 = 1;
const ORDER_STREAM: u64 = 2;

/// Features the learner may see, plus evaluation data it may not learn from.
#[derive(Clone, Debug)]
pub struct Pool {
    k: usize,
    d: usize,
    train: Vec<f64>,
    holdout: Vec<f64>,
    holdout_labels: Vec<usize>,
    /// True training classes, used only for per-class selection counts.
    diagnostic_labels: Option<Vec<usize>>,
}

impl Pool {
    pub fn from_dataset(dataset: &Dataset, k: usize) -> Self {
        let gather = |idx: &[usize]| -> Vec<f64> {
            idx.iter()
                .flat_map(|&i| dataset.row(i).iter().copied())
                .collect()
        };
        Self {
            k,
            d: dataset.d(),
            train: gather(dataset.train_indices()),
            holdout: gather(dataset.holdout_indices()),
            holdout_labels: dataset.holdout_labels(),
            diagnostic_labels: None,
        }
    }

    /// Same as [`Pool::from_dataset`] but keeps the true training classes for
    /// selection diagnostics.
    pub fn with_diagnostics(dataset: &Dataset, k: usize) -> Self {
        Self {
            diagnostic_labels: Some(dataset.train_labels()),
            ..Self::from_dataset(dataset, k)
        }
    }

    pub fn n(&self) -> usize {
        self.train.len() / self.d
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.train[i * self.d..(i + 1) * self.d]
    }

    fn holdout_rows(&self) -> impl Iterator<Item = (&[f64], usize)> {
        self.holdout
            .chunks_exact(self.d)
            .zip(self.holdout_labels.iter().copied())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StopReason {
    /// Every training example is exactly labeled.
    Complete,
    /// The question budget ran out.
    Exhausted,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Step {
    /// Ask this question next; stays pending until answered.
    Ask(Question),
    /// Re-train (or install an externally trained classifier) before continuing.
    Retrain,
    Finished(StopReason),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Stage {
    WarmStart,
    NeedsTraining,
    Active,
    Finished(StopReason),
}

/// The learner's mutable state.
#[derive(Clone, Debug)]
pub struct ExperimentState {
    pub labels: Vec<PartialLabel>,
    pub classifier: Option<Classifier>,
    pub questions_asked: usize,
    pub audit: Vec<AuditEntry>,
    pub history: Vec<RoundMetrics>,
    /// Set when the budget ran out before the warm-start sample was exact.
    pub warm_start_incomplete: bool,
}

/// Owned inputs for one re-training, so it can run off the engine's thread.
#[derive(Clone, Debug)]
pub struct TrainingJob {
    k: usize,
    d: usize,
    rows: Vec<f64>,
    labels: Vec<PartialLabel>,
    cfg: TrainConfig,
}

impl TrainingJob {
    pub fn run(&self) -> Result<Classifier> {
        let samples: Vec<Sample<'_>> = self.rows.chunks_exact(self.d).zip(&self.labels).collect();
        Classifier::fit(self.k, self.d, &samples, &self.cfg)
    }

    /// Number of examples with a non-trivial partial label.
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

pub struct Experiment {
    cfg: ExperimentConfig,
    hierarchy: Arc<ClassHierarchy>,
    pool: Arc<Pool>,
    state: ExperimentState,
    stage: Stage,
    pending: Option<Question>,
    round: usize,

    warm_sample: Vec<usize>,
    warm_pos: usize,
    random_order: Vec<usize>,
    order_pos: usize,
    /// Example being labeled to completion (Baseline, AL, AQ).
    current: Option<usize>,

    predictions: Vec<Vec<f64>>,
    pred_entropy: Vec<f64>,
    queue: CandidateQueue,

    round_questions: usize,
    round_entropy_sum: f64,
    round_model_questions: usize,
    round_per_class: Vec<usize>,
}

impl Experiment {
    pub fn new(
        cfg: ExperimentConfig,
        pool: Arc<Pool>,
        hierarchy: Arc<ClassHierarchy>,
    ) -> Result<Self> {
        cfg.validate()?;
        if pool.k() != hierarchy.k() {
            return Err(Error::InvalidConfig(format!(
                "pool has {} classes, hierarchy has {}",
                pool.k(),
                hierarchy.k()
            )));
        }
        let n = pool.n();
        if n == 0 {
            return Err(Error::InvalidDataset("empty training pool".into()));
        }
        let mut all: Vec<usize> = (0..n).collect();
        all.shuffle(&mut stream_rng(cfg.seed, WARM_STREAM));
        all.truncate(cfg.warm_start_count(n));
        let warm_sample = all;

        let mut random_order: Vec<usize> = (0..n).collect();
        random_order.shuffle(&mut stream_rng(cfg.seed, ORDER_STREAM));

        let k = hierarchy.k();
        Ok(Self {
            state: ExperimentState {
                labels: vec![PartialLabel::full(k); n],
                classifier: None,
                questions_asked: 0,
                audit: Vec::new(),
                history: Vec::new(),
                warm_start_incomplete: false,
            },
            stage: Stage::WarmStart,
            pending: None,
            round: 0,
            warm_sample,
            warm_pos: 0,
            random_order,
            order_pos: 0,
            current: None,
            predictions: Vec::new(),
            pred_entropy: Vec::new(),
            queue: CandidateQueue::default(),
            round_questions: 0,
            round_entropy_sum: 0.0,
            round_model_questions: 0,
            round_per_class: vec![0; k],
            cfg,
            hierarchy,
            pool,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    pub fn hierarchy(&self) -> &ClassHierarchy {
        &self.hierarchy
    }

    pub fn pool(&self) -> &Pool {
        &self.pool
    }

    pub fn state(&self) -> &ExperimentState {
        &self.state
    }

    pub fn into_state(self) -> ExperimentState {
        self.state
    }

    pub fn pending(&self) -> Option<Question> {
        self.pending
    }

    /// Index of the next re-training round.
    pub fn round(&self) -> usize {
        self.round
    }

    pub fn warm_sample(&self) -> &[usize] {
        &self.warm_sample
    }

    /// Whether questions are still labeling the warm-start sample.
    pub fn in_warm_start(&self) -> bool {
        self.stage == Stage::WarmStart
    }

    pub fn all_exact(&self) -> bool {
        self.state.labels.iter().all(PartialLabel::is_exact)
    }

    fn budget_left(&self) -> bool {
        self.state.questions_asked < self.cfg.budget
    }

    /// Advances the machine to its next externally visible action. Calling it
    /// again without acting returns the same step.
    pub fn next_step(&mut self) -> Result<Step> {
        loop {
            match self.stage {
                Stage::Finished(reason) => return Ok(Step::Finished(reason)),
                Stage::NeedsTraining => return Ok(Step::Retrain),
                _ if self.pending.is_some() => return Ok(Step::Ask(self.pending.unwrap())),
                Stage::WarmStart => {
                    while self.warm_pos < self.warm_sample.len()
                        && self.state.labels[self.warm_sample[self.warm_pos]].is_exact()
                    {
                        self.warm_pos += 1;
                    }
                    if self.warm_pos == self.warm_sample.len() {
                        self.stage = Stage::NeedsTraining;
                        continue;
                    }
                    if !self.budget_left() {
                        self.state.warm_start_incomplete = true;
                        self.stage = Stage::NeedsTraining;
                        continue;
                    }
                    let example = self.warm_sample[self.warm_pos];
                    let uniform = vec![1.0; self.hierarchy.k()];
                    let composite = binary_split_question(
                        &uniform,
                        &self.state.labels[example],
                        self.hierarchy.composites(),
                    )?;
                    self.pending = Some(Question { example, composite });
                }
                Stage::Active => {
                    let q = self.select_next()?;
                    self.pending = Some(q);
                }
            }
        }
    }

    /// Validates an answer to the pending question and returns the audit
    /// entry [`Experiment::answer`] would record, without changing anything.
    pub fn preview_answer(&self, question: Question, answer: Answer) -> Result<AuditEntry> {
        if self.pending != Some(question) {
            return Err(Error::Protocol(format!(
                "answer for {question:?} but pending question is {:?}",
                self.pending
            )));
        }
        let c = &self.hierarchy.composites()[question.composite];
        self.state.labels[question.example].update(c, answer)?;
        Ok(AuditEntry {
            t: self.state.questions_asked,
            phase: if self.in_warm_start() {
                Phase::Warm
            } else {
                Phase::Active
            },
            question,
            answer,
        })
    }

    /// Applies the annotator's answer to the pending question.
    pub fn answer(&mut self, question: Question, answer: Answer) -> Result<()> {
        let entry = self.preview_answer(question, answer)?;
        let example = question.example;
        let c = &self.hierarchy.composites()[question.composite];
        self.state.labels[example] = self.state.labels[example].update(c, answer)?;
        self.pending = None;
        let phase = entry.phase;
        self.state.audit.push(entry);
        self.state.questions_asked += 1;
        self.round_questions += 1;

        if phase == Phase::Warm {
            return Ok(());
        }
        if let Some(truth) = &self.pool.diagnostic_labels {
            self.round_per_class[truth[example]] += 1;
        }
        if let Some(&h) = self.pred_entropy.get(example) {
            self.round_entropy_sum += h;
            self.round_model_questions += 1;
        }
        if let Mode::Alpf(_) = self.cfg.mode {
            let fresh = self.score_example(example);
            self.queue.replace(example, fresh);
        }
        if self.round_questions >= self.cfg.retrain_interval
            || !self.budget_left()
            || self.all_exact()
        {
            self.stage = Stage::NeedsTraining;
        }
        Ok(())
    }

    /// Inputs for the pending re-training: every non-trivial partial label.
    pub fn training_job(&self) -> Result<TrainingJob> {
        if self.stage != Stage::NeedsTraining {
            return Err(Error::Protocol("no re-training is due".into()));
        }
        let (mut rows, mut labels) = (Vec::new(), Vec::new());
        for (i, label) in self.state.labels.iter().enumerate() {
            if !label.is_trivial() {
                rows.extend_from_slice(self.pool.row(i));
                labels.push(label.clone());
            }
        }
        Ok(TrainingJob {
            k: self.pool.k(),
            d: self.pool.d(),
            rows,
            labels,
            cfg: TrainConfig {
                seed: round_seed(self.cfg.seed, self.cfg.train.seed, self.round),
                ..self.cfg.train.clone()
            },
        })
    }

    /// Re-trains from scratch on the current partial labels.
    pub fn retrain(&mut self) -> Result<()> {
        let clf = self.training_job()?.run()?;
        self.install(clf)
    }

    /// Installs a classifier trained from [`Experiment::training_job`], records
    /// the round's metrics and re-scores candidates.
    pub fn install(&mut self, classifier: Classifier) -> Result<()> {
        if self.stage != Stage::NeedsTraining {
            return Err(Error::Protocol("no re-training is due".into()));
        }
        if classifier.k() != self.pool.k() || classifier.d() != self.pool.d() {
            return Err(Error::DimensionMismatch {
                expected: self.pool.k() * self.pool.d(),
                actual: classifier.k() * classifier.d(),
            });
        }
        let pool = Arc::clone(&self.pool);
        self.predictions = (0..pool.n())
            .into_par_iter()
            .map(|i| classifier.predict(pool.row(i)))
            .collect::<Result<_>>()?;
        self.pred_entropy = self.predictions.iter().map(|p| entropy(p)).collect();
        let accuracy = if pool.holdout_labels.is_empty() {
            None
        } else {
            Some(classifier.accuracy(pool.holdout_rows())?)
        };
        self.state.classifier = Some(classifier);

        let first = self.round == 0;
        if !first || !self.warm_sample.is_empty() {
            let n = self.state.labels.len() as f64;
            let exact = self.state.labels.iter().filter(|l| l.is_exact()).count();
            let remaining: usize = self.state.labels.iter().map(PartialLabel::len).sum();
            self.state.history.push(RoundMetrics {
                round: self.round,
                questions_asked: self.state.questions_asked,
                questions_this_round: self.round_questions,
                accuracy,
                fraction_exact: exact as f64 / n,
                mean_remaining: remaining as f64 / n,
                mean_selected_entropy: (self.round_model_questions > 0)
                    .then(|| self.round_entropy_sum / self.round_model_questions as f64),
                selected_per_class: if pool.diagnostic_labels.is_some() {
                    self.round_per_class.clone()
                } else {
                    Vec::new()
                },
            });
        }
        self.round += 1;
        self.round_questions = 0;
        self.round_entropy_sum = 0.0;
        self.round_model_questions = 0;
        self.round_per_class.iter_mut().for_each(|c| *c = 0);

        if let Mode::Alpf(_) = self.cfg.mode {
            self.rebuild_queue();
        }
        self.stage = if self.all_exact() {
            Stage::Finished(StopReason::Complete)
        } else if !self.budget_left() {
            Stage::Finished(StopReason::Exhausted)
        } else {
            Stage::Active
        };
        Ok(())
    }

    fn rebuild_queue(&mut self) {
        let per_example: Vec<Vec<(usize, f64)>> = (0..self.state.labels.len())
            .into_par_iter()
            .map(|i| self.score_example(i))
            .collect();
        self.queue = CandidateQueue::build(per_example);
    }

    // Informative composites of one example with their utilities (ALPF/AQ).
    fn score_example(&self, example: usize) -> Vec<(usize, f64)> {
        let strategy = match self.cfg.mode {
            Mode::Alpf(s) | Mode::Aq(s) => s,
            _ => return Vec::new(),
        };
        let label = &self.state.labels[example];
        if label.is_exact() {
            return Vec::new();
        }
        let yhat = &self.predictions[example];
        self.hierarchy
            .composites()
            .iter()
            .enumerate()
            .filter(|(_, c)| label.is_informative(c))
            .map(|(j, c)| {
                let u = strategy
                    .utility(yhat, label, c)
                    .expect("informative candidate scores");
                (j, u)
            })
            .collect()
    }

    /// The next question under the configured mode.
    pub fn select_next(&mut self) -> Result<Question> {
        if self.all_exact() {
            return Err(Error::NoInformativeQuestion);
        }
        let hierarchy = Arc::clone(&self.hierarchy);
        let composites = hierarchy.composites();
        match self.cfg.mode {
            Mode::Alpf(_) => self
                .queue
                .peek()
                .map(|(q, _)| q)
                .ok_or(Error::NoInformativeQuestion),
            Mode::Baseline => {
                let example = self.continue_or_random();
                let uniform = vec![1.0; self.hierarchy.k()];
                let composite =
                    binary_split_question(&uniform, &self.state.labels[example], composites)?;
                Ok(Question { example, composite })
            }
            Mode::Aq(_) => {
                let example = self.continue_or_random();
                let composite = self
                    .score_example(example)
                    .into_iter()
                    .fold(None::<(usize, f64)>, |best, (j, u)| match best {
                        Some((_, bu)) if bu >= u => best,
                        _ => Some((j, u)),
                    })
                    .map(|(j, _)| j)
                    .ok_or(Error::NoInformativeQuestion)?;
                Ok(Question { example, composite })
            }
            Mode::Al(heuristic) => {
                let example = match self.current.filter(|&i| !self.state.labels[i].is_exact()) {
                    Some(i) => i,
                    None => self.most_uncertain(heuristic)?,
                };
                self.current = Some(example);
                let composite = binary_split_question(
                    &self.predictions[example],
                    &self.state.labels[example],
                    composites,
                )?;
                Ok(Question { example, composite })
            }
        }
    }

    fn continue_or_random(&mut self) -> usize {
        if let Some(i) = self.current.filter(|&i| !self.state.labels[i].is_exact()) {
            return i;
        }
        while self.state.labels[self.random_order[self.order_pos]].is_exact() {
            self.order_pos += 1;
        }
        let i = self.random_order[self.order_pos];
        self.current = Some(i);
        i
    }

    fn most_uncertain(&self, heuristic: ExampleHeuristic) -> Result<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, label) in self.state.labels.iter().enumerate() {
            if label.is_exact() {
                continue;
            }
            let (me, lc) = example_scores_me_lc(&self.predictions[i], label)?;
            let u = match heuristic {
                ExampleHeuristic::Me => me,
                ExampleHeuristic::Lc => -lc,
            };
            if best.is_none_or(|(_, b)| u > b) {
                best = Some((i, u));
            }
        }
        best.map(|(i, _)| i).ok_or(Error::NoInformativeQuestion)
    }

    /// Cached predictive distribution of a training example under the current model.
    pub fn prediction(&self, example: usize) -> Option<&[f64]> {
        self.predictions.get(example).map(Vec::as_slice)
    }

    pub fn composite(&self, index: usize) -> Result<&ClassSet> {
        self.hierarchy.composite(index)
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

// Per-round initialization seed; retraining is from scratch every round.
fn round_seed(experiment_seed: u64, train_seed: u64, round: usize) -> u64 {
    let mut z = experiment_seed
        .wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(train_seed)
        .wrapping_add((round as u64).wrapping_mul(0xbf58_476d_1ce4_e5b9));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Final state and metrics of a completed run.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub stop: StopReason,
    pub state: ExperimentState,
}

impl RunOutcome {
    pub fn history(&self) -> &[RoundMetrics] {
        &self.state.history
    }

    pub fn audit(&self) -> &[AuditEntry] {
        &self.state.audit
    }
}

/// Drives an experiment to completion with the given annotator.
pub fn run(
    cfg: ExperimentConfig,
    pool: Arc<Pool>,
    hierarchy: Arc<ClassHierarchy>,
    annotator: &mut dyn Annotator,
) -> Result<RunOutcome> {
    let mut exp = Experiment::new(cfg, pool, hierarchy)?;
    let stop = drive(&mut exp, annotator)?;
    Ok(RunOutcome {
        stop,
        state: exp.into_state(),
    })
}

/// Runs `exp` until it finishes.
pub fn drive(exp: &mut Experiment, annotator: &mut dyn Annotator) -> Result<StopReason> {
    loop {
        match exp.next_step()? {
            Step::Ask(q) => {
                let c = exp.hierarchy.composites()[q.composite].clone();
                let a = annotator.answer(q, &c)?;
                exp.answer(q, a)?;
            }
            Step::Retrain => exp.retrain()?,
            Step::Finished(reason) => return Ok(reason),
        }
    }
}

#[cfg(test)]
mod tests;
