//! One annotation session: an [`Experiment`] driven by human answers, with
//! its write-ahead log.

use std::path::{Component, Path, PathBuf};
use std::sync::Arc;

use alpf_core::datagen::{load_dir, preset};
use alpf_core::engine::{Phase, Pool, RoundMetrics, Step, StopReason, TrainingJob};
use alpf_core::{Answer, ClassHierarchy, Classifier, Error, Experiment};

use crate::api::{CreateSession, DatasetRef, Progress, QuestionView, SessionView, Status};
use crate::error::{ServiceError, ServiceResult};
use crate::store::{AuditAppender, SessionDir};

pub(crate) struct Session {
    id: String,
    dir: SessionDir,
    exp: Experiment,
    audit: AuditAppender,
    status: Status,
    error: Option<String>,
    /// Display payload per training example.
    payload: Vec<Option<String>>,
}

fn resolve(data_root: &Path, rel: &Path) -> ServiceResult<PathBuf> {
    if rel
        .components()
        .any(|c| !matches!(c, Component::Normal(_) | Component::CurDir))
    {
        return Err(ServiceError::BadRequest(format!(
            "dataset paths must be relative to the data root without `..`: {}",
            rel.display()
        )));
    }
    let path = data_root.join(rel);
    if !path.exists() {
        return Err(ServiceError::BadRequest(format!(
            "unknown dataset `{}`",
            rel.display()
        )));
    }
    Ok(path)
}

fn build(
    request: &CreateSession,
    data_root: &Path,
) -> ServiceResult<(Experiment, Vec<Option<String>>)> {
    request
        .config
        .validate()
        .map_err(ServiceError::invalid_input)?;
    let (dataset, mut hierarchy) = match &request.dataset {
        DatasetRef::Preset { preset: name, seed } => {
            preset(name, *seed).map_err(ServiceError::invalid_input)?
        }
        DatasetRef::Dir { dir } => {
            load_dir(resolve(data_root, dir)?).map_err(ServiceError::invalid_input)?
        }
    };
    if let Some(h) = &request.hierarchy {
        hierarchy =
            ClassHierarchy::load(resolve(data_root, h)?).map_err(ServiceError::invalid_input)?;
    }
    let payload = dataset
        .train_indices()
        .iter()
        .map(|&i| dataset.payload(i).map(str::to_string))
        .collect();
    let pool = Arc::new(Pool::from_dataset(&dataset, hierarchy.k()));
    let exp = Experiment::new(request.config.clone(), pool, Arc::new(hierarchy))
        .map_err(ServiceError::invalid_input)?;
    Ok((exp, payload))
}

impl Session {
    /// Creates the session on disk and advances it to its first question.
    /// Returns a re-training to run in the background, if one is due.
    pub fn create(
        root: &Path,
        id: String,
        request: &CreateSession,
        data_root: &Path,
    ) -> ServiceResult<(Self, Option<TrainingJob>)> {
        let (exp, payload) = build(request, data_root)?;
        let dir = SessionDir::create(root, &id, request).map_err(ServiceError::internal)?;
        let audit = dir.appender().map_err(ServiceError::internal)?;
        let mut session = Self {
            id,
            dir,
            exp,
            audit,
            status: Status::Active,
            error: None,
            payload,
        };
        let job = session.advance()?;
        Ok((session, job))
    }

    /// Rebuilds a session by replaying its audit log over the saved
    /// classifiers.
    pub fn load(path: &Path, data_root: &Path) -> ServiceResult<(Self, Option<TrainingJob>)> {
        let (dir, id, request) = SessionDir::open(path).map_err(ServiceError::internal)?;
        let (mut exp, payload) = build(&request, data_root)?;
        let entries = dir.read_audit().map_err(ServiceError::internal)?;
        for entry in entries {
            loop {
                match exp.next_step().map_err(ServiceError::internal)? {
                    Step::Ask(q) => {
                        if q != entry.question || entry.t != exp.state().questions_asked {
                            return Err(ServiceError::Internal(format!(
                                "audit log of `{id}` diverges at t = {}",
                                entry.t
                            )));
                        }
                        exp.answer(q, entry.answer)
                            .map_err(ServiceError::internal)?;
                        break;
                    }
                    Step::Retrain => {
                        let round = exp.round();
                        let clf = match dir.load_round(round).map_err(ServiceError::internal)? {
                            Some(clf) => clf,
                            None => {
                                let clf = exp
                                    .training_job()
                                    .and_then(|j| j.run())
                                    .map_err(ServiceError::internal)?;
                                dir.save_round(round, &clf)
                                    .map_err(ServiceError::internal)?;
                                clf
                            }
                        };
                        exp.install(clf).map_err(ServiceError::internal)?;
                    }
                    Step::Finished(_) => {
                        return Err(ServiceError::Internal(format!(
                            "audit log of `{id}` continues past the end of the session"
                        )))
                    }
                }
            }
        }
        let audit = dir.appender().map_err(ServiceError::internal)?;
        let mut session = Self {
            id,
            dir,
            exp,
            audit,
            status: Status::Active,
            error: None,
            payload,
        };
        let job = session.advance()?;
        Ok((session, job))
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    /// Moves to the next question or end state. Re-trainings with nothing to
    /// learn from, or whose classifier is already on disk, happen inline;
    /// anything else is handed back to run off the request path.
    fn advance(&mut self) -> ServiceResult<Option<TrainingJob>> {
        loop {
            match self.exp.next_step().map_err(ServiceError::internal)? {
                Step::Ask(_) => {
                    self.status = Status::Active;
                    return Ok(None);
                }
                Step::Finished(reason) => {
                    self.status = match reason {
                        StopReason::Complete => Status::Complete,
                        StopReason::Exhausted => Status::Exhausted,
                    };
                    return Ok(None);
                }
                Step::Retrain => {
                    let round = self.exp.round();
                    if let Some(clf) = self.dir.load_round(round).map_err(ServiceError::internal)? {
                        self.exp.install(clf).map_err(ServiceError::internal)?;
                        continue;
                    }
                    let job = self.exp.training_job().map_err(ServiceError::internal)?;
                    if job.is_empty() {
                        let clf = job.run().map_err(ServiceError::internal)?;
                        self.install_inner(clf)?;
                        continue;
                    }
                    self.status = Status::Retraining;
                    return Ok(Some(job));
                }
            }
        }
    }

    fn install_inner(&mut self, clf: Classifier) -> ServiceResult<()> {
        self.dir
            .save_round(self.exp.round(), &clf)
            .map_err(ServiceError::internal)?;
        self.exp.install(clf).map_err(ServiceError::internal)
    }

    /// Installs a classifier produced by a background re-training.
    pub fn install(&mut self, clf: Classifier) -> ServiceResult<Option<TrainingJob>> {
        self.install_inner(clf)?;
        self.advance()
    }

    pub fn fail(&mut self, message: String) {
        self.status = Status::Failed;
        self.error = Some(message);
    }

    /// Applies an answer to the pending question after logging it durably.
    pub fn submit(
        &mut self,
        question_id: usize,
        answer: Answer,
    ) -> ServiceResult<Option<TrainingJob>> {
        let pending = match (self.status, self.exp.pending()) {
            (Status::Active, Some(q)) => q,
            (status, _) => {
                return Err(ServiceError::Conflict {
                    message: format!(
                        "no question is pending (session is {})",
                        status_name(status)
                    ),
                    pending: None,
                })
            }
        };
        let current = self.exp.state().questions_asked;
        if question_id != current {
            return Err(ServiceError::Conflict {
                message: format!("question {question_id} is not pending; question {current} is"),
                pending: Some(current),
            });
        }
        let entry = self
            .exp
            .preview_answer(pending, answer)
            .map_err(|e| match e {
                Error::InconsistentAnswer { .. } | Error::Uninformative { .. } => {
                    ServiceError::InconsistentAnswer(e.to_string())
                }
                other => ServiceError::internal(other),
            })?;
        self.audit.append(&entry).map_err(ServiceError::internal)?;
        self.exp
            .answer(pending, answer)
            .map_err(ServiceError::internal)?;
        self.advance()
    }

    fn progress(&self) -> Progress {
        let state = self.exp.state();
        let n = state.labels.len();
        let exact = state.labels.iter().filter(|l| l.is_exact()).count();
        let remaining: usize = state.labels.iter().map(|l| l.len()).sum();
        Progress {
            questions_asked: state.questions_asked,
            budget: self.exp.config().budget,
            examples: n,
            exact_examples: exact,
            fraction_exact: exact as f64 / n as f64,
            mean_remaining: remaining as f64 / n as f64,
            rounds_completed: state.history.len(),
            warm_start_incomplete: state.warm_start_incomplete,
        }
    }

    pub fn view(&self) -> SessionView {
        let question = match (self.status, self.exp.pending()) {
            (Status::Active, Some(q)) => {
                let h = self.exp.hierarchy();
                let name = h.name(q.composite).to_string();
                let phase = if self.exp.in_warm_start() {
                    Phase::Warm
                } else {
                    Phase::Active
                };
                Some(QuestionView {
                    id: self.exp.state().questions_asked,
                    example: q.example,
                    composite: q.composite,
                    text: format!("Is this a {name}?"),
                    class_name: name,
                    phase,
                    payload: self.payload[q.example].clone(),
                    features: self.exp.pool().row(q.example).to_vec(),
                })
            }
            _ => None,
        };
        SessionView {
            id: self.id.clone(),
            status: self.status,
            question,
            progress: self.progress(),
            error: self.error.clone(),
        }
    }

    pub fn history(&self) -> Vec<RoundMetrics> {
        self.exp.state().history.clone()
    }
}

fn status_name(s: Status) -> &'static str {
    match s {
        Status::Active => "active",
        Status::Retraining => "retraining",
        Status::Complete => "complete",
        Status::Exhausted => "exhausted",
        Status::Failed => "failed",
    }
}
