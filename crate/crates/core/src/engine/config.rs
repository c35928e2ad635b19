use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::acquisition::{ExampleHeuristic, QuestionStrategy};
use crate::error::{Error, Result};
use crate::model::TrainConfig;

/// How examples and questions are chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Random examples, binary splitting under a uniform prior, label to completion.
    Baseline,
    /// Uncertainty-ranked examples, binary splitting under the model prior,
    /// label to completion.
    Al(ExampleHeuristic),
    /// Random examples, strategy-chosen questions, label to completion.
    Aq(QuestionStrategy),
    /// Free choice over every informative (example, composite) pair.
    Alpf(QuestionStrategy),
}

impl Mode {
    /// Baseline, both AL heuristics, and AQ/ALPF under each question strategy.
    pub fn grid() -> Vec<Mode> {
        let mut modes = vec![
            Mode::Baseline,
            Mode::Al(ExampleHeuristic::Me),
            Mode::Al(ExampleHeuristic::Lc),
        ];
        modes.extend(QuestionStrategy::ALL.map(Mode::Aq));
        modes.extend(QuestionStrategy::ALL.map(Mode::Alpf));
        modes
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Baseline => f.write_str("baseline"),
            Mode::Al(h) => write!(f, "al-{h}"),
            Mode::Aq(s) => write!(f, "aq-{s}"),
            Mode::Alpf(s) => write!(f, "alpf-{s}"),
        }
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        if lower == "baseline" {
            return Ok(Mode::Baseline);
        }
        match lower.split_once('-') {
            Some(("al", h)) => Ok(Mode::Al(h.parse()?)),
            Some(("aq", q)) => Ok(Mode::Aq(q.parse()?)),
            Some(("alpf", q)) => Ok(Mode::Alpf(q.parse()?)),
            _ => Err(Error::Parse(format!("unknown mode `{s}`"))),
        }
    }
}

impl Serialize for Mode {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Mode {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub mode: Mode,
    /// Fraction of training examples exactly labeled i.i.d. before active
    /// selection begins; those questions count against the budget.
    #[serde(default = "default_warm_start")]
    pub warm_start_fraction: f64,
    /// Questions between re-trainings.
    pub retrain_interval: usize,
    /// Maximum number of binary questions, warm-start included.
    pub budget: usize,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub seed: u64,
}

fn default_warm_start() -> f64 {
    0.05
}

impl ExperimentConfig {
    pub fn new(mode: Mode, retrain_interval: usize, budget: usize, seed: u64) -> Self {
        Self {
            mode,
            warm_start_fraction: default_warm_start(),
            retrain_interval,
            budget,
            train: TrainConfig::default(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.warm_start_fraction) {
            return Err(Error::InvalidConfig(
                "warm_start_fraction must lie in [0, 1)".into(),
            ));
        }
        if self.retrain_interval == 0 {
            return Err(Error::InvalidConfig(
                "retrain_interval must be at least 1".into(),
            ));
        }
        self.train.validate()
    }

    /// Number of warm-start examples for a pool of `n`: `ceil(w * n)`.
    pub fn warm_start_count(&self, n: usize) -> usize {
        // Guard against products like 0.05 * 1000 landing a hair above an integer.
        let exact = self.warm_start_fraction * n as f64;
        ((exact - 1e-9).ceil().max(0.0) as usize).min(n)
    }
}
