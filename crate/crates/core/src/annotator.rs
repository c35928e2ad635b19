//! Sources of answers to binary questions.

use crate::acquisition::Question;
use crate::classset::ClassSet;
use crate::error::{Error, Result};
use crate::labels::Answer;

/// Anything that can answer "does example `q.example` belong to `c`?".
pub trait Annotator {
    fn answer(&mut self, question: Question, composite: &ClassSet) -> Result<Answer>;
}

/// Answers from hidden ground-truth labels.
#[derive(Clone, Debug)]
pub struct OracleAnnotator {
    true_labels: Vec<usize>,
    k: usize,
}

impl OracleAnnotator {
    pub fn new(true_labels: Vec<usize>, k: usize) -> Result<Self> {
        if let Some(&bad) = true_labels.iter().find(|&&y| y >= k) {
            return Err(Error::ClassOutOfRange { index: bad, k });
        }
        Ok(Self { true_labels, k })
    }

    pub fn len(&self) -> usize {
        self.true_labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.true_labels.is_empty()
    }

    pub fn oracle_answer(&self, question: Question, composite: &ClassSet) -> Result<Answer> {
        let y = *self
            .true_labels
            .get(question.example)
            .ok_or(Error::ExampleOutOfRange {
                index: question.example,
                n: self.true_labels.len(),
            })?;
        if composite.universe() != self.k {
            return Err(Error::DimensionMismatch {
                expected: self.k,
                actual: composite.universe(),
            });
        }
        Ok(Answer::from_bit(composite.contains(y)))
    }
}

impl Annotator for OracleAnnotator {
    fn answer(&mut self, question: Question, composite: &ClassSet) -> Result<Answer> {
        self.oracle_answer(question, composite)
    }
}

/// Replays a fixed list of answers in order, failing when it runs out.
#[derive(Clone, Debug, Default)]
pub struct ScriptedAnnotator {
    answers: std::collections::VecDeque<Answer>,
}

impl ScriptedAnnotator {
    pub fn new(answers: impl IntoIterator<Item = Answer>) -> Self {
        Self {
            answers: answers.into_iter().collect(),
        }
    }
}

impl Annotator for ScriptedAnnotator {
    fn answer(&mut self, _question: Question, _composite: &ClassSet) -> Result<Answer> {
        self.answers
            .pop_front()
            .ok_or_else(|| Error::Protocol("scripted annotator ran out of answers".into()))
    }
}
