//! Question and example scoring.
//!
//! Every score works on the predictive distribution restricted to the current
//! partial label and renormalized, so eliminated classes never influence a
//! choice. A branch with zero mass gets a uniform placeholder distribution and
//! zero weight.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::classset::ClassSet;
use crate::error::{Error, Result};
use crate::labels::PartialLabel;
use crate::model::entropy;

/// One binary question: "does example `example` belong to composite `composite`?"
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Question {
    pub example: usize,
    pub composite: usize,
}

/// Question-level acquisition strategies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuestionStrategy {
    /// Expected information gain; maximized.
    Eig,
    /// Expected decrease in classes; maximized.
    Edc,
    /// Expected remaining classes; minimized.
    Erc,
}

/// Example-level uncertainty heuristics for classical active learning.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExampleHeuristic {
    /// Maximum entropy.
    Me,
    /// Least confidence.
    Lc,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreKind {
    Eig,
    Erc,
    Edc,
    Me,
    Lc,
    Split,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Orientation {
    Maximize,
    Minimize,
}

impl ScoreKind {
    pub fn orientation(self) -> Orientation {
        match self {
            ScoreKind::Eig | ScoreKind::Edc | ScoreKind::Me => Orientation::Maximize,
            // Split minimizes distance from an even split; LC ranks ascending by confidence.
            ScoreKind::Erc | ScoreKind::Lc | ScoreKind::Split => Orientation::Minimize,
        }
    }
}

impl From<QuestionStrategy> for ScoreKind {
    fn from(s: QuestionStrategy) -> Self {
        match s {
            QuestionStrategy::Eig => ScoreKind::Eig,
            QuestionStrategy::Edc => ScoreKind::Edc,
            QuestionStrategy::Erc => ScoreKind::Erc,
        }
    }
}

impl From<ExampleHeuristic> for ScoreKind {
    fn from(h: ExampleHeuristic) -> Self {
        match h {
            ExampleHeuristic::Me => ScoreKind::Me,
            ExampleHeuristic::Lc => ScoreKind::Lc,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuestionScore {
    pub question: Question,
    pub kind: ScoreKind,
    pub value: f64,
}

impl QuestionScore {
    /// Larger is better regardless of orientation.
    pub fn utility(&self) -> f64 {
        match self.kind.orientation() {
            Orientation::Maximize => self.value,
            Orientation::Minimize => -self.value,
        }
    }
}

impl QuestionStrategy {
    pub const ALL: [QuestionStrategy; 3] = [
        QuestionStrategy::Eig,
        QuestionStrategy::Edc,
        QuestionStrategy::Erc,
    ];

    pub fn score(self, yhat: &[f64], label: &PartialLabel, c: &ClassSet) -> Result<f64> {
        match self {
            QuestionStrategy::Eig => eig(yhat, label, c),
            QuestionStrategy::Edc => edc(yhat, label, c),
            QuestionStrategy::Erc => erc(yhat, label, c),
        }
    }

    /// Score oriented so that larger is always better.
    pub fn utility(self, yhat: &[f64], label: &PartialLabel, c: &ClassSet) -> Result<f64> {
        let v = self.score(yhat, label, c)?;
        Ok(match ScoreKind::from(self).orientation() {
            Orientation::Maximize => v,
            Orientation::Minimize => -v,
        })
    }
}

impl fmt::Display for QuestionStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QuestionStrategy::Eig => "eig",
            QuestionStrategy::Edc => "edc",
            QuestionStrategy::Erc => "erc",
        })
    }
}

impl FromStr for QuestionStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "eig" => Ok(QuestionStrategy::Eig),
            "edc" => Ok(QuestionStrategy::Edc),
            "erc" => Ok(QuestionStrategy::Erc),
            other => Err(Error::Parse(format!("unknown question strategy `{other}`"))),
        }
    }
}

impl fmt::Display for ExampleHeuristic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExampleHeuristic::Me => "me",
            ExampleHeuristic::Lc => "lc",
        })
    }
}

impl FromStr for ExampleHeuristic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "me" => Ok(ExampleHeuristic::Me),
            "lc" => Ok(ExampleHeuristic::Lc),
            other => Err(Error::Parse(format!("unknown example heuristic `{other}`"))),
        }
    }
}

/// The two answer-conditional predictive distributions for one question.
#[derive(Clone, Debug, PartialEq)]
pub struct Conditionals {
    /// Probability of a "yes", relative to the current partial label.
    pub p_yes: f64,
    /// Distribution over `k` classes after "yes" (support `ỹ ∩ c`).
    pub yes: Vec<f64>,
    /// Distribution over `k` classes after "no" (support `ỹ \ c`).
    pub no: Vec<f64>,
}

/// `yhat` restricted to `set` and renormalized; uniform on `set` if it has no
/// mass. Returns the raw mass alongside.
pub fn restrict(yhat: &[f64], set: &ClassSet) -> (f64, Vec<f64>) {
    let mass: f64 = set.iter().map(|y| yhat[y]).sum();
    let mut out = vec![0.0; yhat.len()];
    if mass > 0.0 {
        for y in set {
            out[y] = yhat[y] / mass;
        }
    } else {
        let u = 1.0 / set.len() as f64;
        for y in set {
            out[y] = u;
        }
    }
    (mass, out)
}

fn check(yhat: &[f64], label: &PartialLabel, c: &ClassSet) -> Result<()> {
    let k = label.potential().universe();
    if yhat.len() != k || c.universe() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            actual: if yhat.len() != k {
                yhat.len()
            } else {
                c.universe()
            },
        });
    }
    if !label.is_informative(c) {
        return Err(Error::Uninformative {
            composite: c.to_string(),
            label: label.potential().to_string(),
        });
    }
    Ok(())
}

// Probability of "yes" given the current label, computed on the raw mass.
// A label with no mass falls back to the uniform prior over its classes.
fn yes_probability(yhat: &[f64], label: &PartialLabel, c: &ClassSet) -> f64 {
    let potential = label.potential();
    let total: f64 = potential.iter().map(|y| yhat[y]).sum();
    if total > 0.0 {
        let inside: f64 = potential
            .iter()
            .filter(|&y| c.contains(y))
            .map(|y| yhat[y])
            .sum();
        (inside / total).clamp(0.0, 1.0)
    } else {
        potential.intersection_len(c) as f64 / potential.len() as f64
    }
}

pub fn conditional_distributions(
    yhat: &[f64],
    label: &PartialLabel,
    c: &ClassSet,
) -> Result<Conditionals> {
    check(yhat, label, c)?;
    let p_yes = yes_probability(yhat, label, c);
    let (_, yes) = restrict(yhat, &label.potential().intersection(c));
    let (_, no) = restrict(yhat, &label.potential().difference(c));
    Ok(Conditionals { p_yes, yes, no })
}

/// Expected entropy reduction from asking `c`.
pub fn eig(yhat: &[f64], label: &PartialLabel, c: &ClassSet) -> Result<f64> {
    let cond = conditional_distributions(yhat, label, c)?;
    let (_, current) = restrict(yhat, label.potential());
    let mut expected = 0.0;
    if cond.p_yes > 0.0 {
        expected += cond.p_yes * entropy(&cond.yes);
    }
    if cond.p_yes < 1.0 {
        expected += (1.0 - cond.p_yes) * entropy(&cond.no);
    }
    Ok(entropy(&current) - expected)
}

/// Expected size of the partial label after the answer.
pub fn erc(yhat: &[f64], label: &PartialLabel, c: &ClassSet) -> Result<f64> {
    check(yhat, label, c)?;
    let p = yes_probability(yhat, label, c);
    let inside = label.potential().intersection_len(c) as f64;
    let outside = label.len() as f64 - inside;
    Ok(p * inside + (1.0 - p) * outside)
}

/// Expected number of classes eliminated by the answer.
pub fn edc(yhat: &[f64], label: &PartialLabel, c: &ClassSet) -> Result<f64> {
    Ok(label.len() as f64 - erc(yhat, label, c)?)
}

/// `-p ln p - (1-p) ln (1-p)`
pub fn binary_entropy(p: f64) -> f64 {
    entropy(&[p, 1.0 - p])
}

/// Maximum-entropy and least-confidence scores of one example, both on the
/// distribution restricted to its partial label.
pub fn example_scores_me_lc(yhat: &[f64], label: &PartialLabel) -> Result<(f64, f64)> {
    if label.is_exact() {
        return Err(Error::AlreadyExact(label.exact_class().unwrap_or_default()));
    }
    let (_, r) = restrict(yhat, label.potential());
    let lc = label.potential().iter().map(|y| r[y]).fold(0.0, f64::max);
    Ok((entropy(&r), lc))
}

/// The informative composite whose share of the prior mass on the partial
/// label is closest to one half; lowest index wins ties.
pub fn binary_split_question(
    prior: &[f64],
    label: &PartialLabel,
    composites: &[ClassSet],
) -> Result<usize> {
    if label.is_exact() {
        return Err(Error::AlreadyExact(label.exact_class().unwrap_or_default()));
    }
    let mut best: Option<(usize, f64)> = None;
    for (i, c) in composites.iter().enumerate() {
        if !label.is_informative(c) {
            continue;
        }
        let distance = (yes_probability(prior, label, c) - 0.5).abs();
        if best.is_none_or(|(_, d)| distance < d) {
            best = Some((i, distance));
        }
    }
    best.map(|(i, _)| i).ok_or(Error::NoInformativeQuestion)
}
