//! Exact-only versus exact-plus-partial training on a fixed labeled split.
//!
//! For every `gamma` (fraction of exact labels) and coarseness level, the same
//! exact subset is used for both arms so the delta isolates the contribution
//! of the coarse labels.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::{assign_partial_labels, Dataset};
use crate::error::{Error, Result};
use crate::hierarchy::ClassHierarchy;
use crate::labels::PartialLabel;
use crate::model::{Classifier, TrainConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub gammas: Vec<f64>,
    pub levels: Vec<usize>,
    pub train: TrainConfig,
    pub seed: u64,
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if self.gammas.is_empty() {
            return Err(Error::InvalidConfig(
                "at least one gamma is required".into(),
            ));
        }
        if let Some(g) = self.gammas.iter().find(|g| !(0.0..=1.0).contains(*g)) {
            return Err(Error::InvalidConfig(format!("gamma {g} outside [0, 1]")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub gamma: f64,
    /// Holdout accuracy trained on the exact subset alone.
    pub exact_only: f64,
    /// Accuracy change from adding the coarse labels, one entry per level.
    /// `None` when there are no coarse labels to add.
    pub deltas: Vec<Option<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyTable {
    pub levels: Vec<usize>,
    pub rows: Vec<StudyRow>,
}

impl StudyTable {
    /// CSV with columns `gamma,exact_only,level_<l>...`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("gamma,exact_only");
        for l in &self.levels {
            out.push_str(&format!(",level_{l}"));
        }
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!("{},{:.6}", r.gamma, r.exact_only));
            for d in &r.deltas {
                match d {
                    Some(v) => out.push_str(&format!(",{v:+.6}")),
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
        out
    }

    /// Fixed-width table for terminals; accuracies in percent.
    pub fn to_text(&self) -> String {
        let mut out = format!("{:>6} {:>10}", "gamma", "exact");
        for l in &self.levels {
            out.push_str(&format!(" {:>9}", format!("level {l}")));
        }
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{:>5.0}% {:>9.2}%",
                r.gamma * 100.0,
                r.exact_only * 100.0
            ));
            for d in &r.deltas {
                match d {
                    Some(v) => out.push_str(&format!(" {:>+9.2}", v * 100.0)),
                    None => out.push_str(&format!(" {:>9}", "-")),
                }
            }
            out.push('\n');
        }
        out
    }
}

fn holdout_accuracy(clf: &Classifier, dataset: &Dataset) -> Result<f64> {
    let labels = dataset.holdout_labels();
    clf.accuracy(dataset.holdout_rows().into_iter().zip(labels))
}

fn fit_and_score(
    dataset: &Dataset,
    hierarchy: &ClassHierarchy,
    labels: &[PartialLabel],
    train: &TrainConfig,
) -> Result<f64> {
    let rows = dataset.train_rows();
    let samples: Vec<_> = rows.iter().copied().zip(labels).collect();
    let clf = Classifier::fit(hierarchy.k(), dataset.d(), &samples, train)?;
    holdout_accuracy(&clf, dataset)
}

/// Runs the full grid. Cells are trained in parallel; results do not depend
/// on thread count.
pub fn run_study(
    dataset: &Dataset,
    hierarchy: &ClassHierarchy,
    cfg: &StudyConfig,
) -> Result<StudyTable> {
    cfg.validate()?;
    let k = hierarchy.k();
    let rows = cfg
        .gammas
        .par_iter()
        .map(|&gamma| -> Result<StudyRow> {
            let exact_mask =
                crate::datagen::exact_subset(dataset.train_indices().len(), gamma, cfg.seed);
            let truth = dataset.train_labels();
            let exact_only: Vec<PartialLabel> = truth
                .iter()
                .zip(&exact_mask)
                .map(|(&y, &e)| {
                    if e {
                        PartialLabel::exact(k, y)
                    } else {
                        PartialLabel::full(k)
                    }
                })
                .collect();
            let base = fit_and_score(dataset, hierarchy, &exact_only, &cfg.train)?;
            let has_partial = exact_mask.iter().any(|e| !e);
            let deltas = cfg
                .levels
                .par_iter()
                .map(|&level| -> Result<Option<f64>> {
                    if !has_partial {
                        return Ok(None);
                    }
                    let labels = assign_partial_labels(dataset, hierarchy, gamma, level, cfg.seed)?;
                    Ok(Some(
                        fit_and_score(dataset, hierarchy, &labels, &cfg.train)? - base,
                    ))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(StudyRow {
                gamma,
                exact_only: base,
                deltas,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StudyTable {
        levels: cfg.levels.clone(),
        rows,
    })
}
