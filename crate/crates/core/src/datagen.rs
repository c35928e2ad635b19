//! Datasets: synthetic hierarchical Gaussians, CSV ingestion, pre-partialized
//! label assignments and the easy-class perturbation.
//!
//! # File layout
//!
//! A dataset directory holds three files plus a sidecar:
//!
//! * `features.csv`: header row, then one row per example. Every column is a
//!   numeric feature except an optional `payload` column (e.g. an image path
//!   shown to human annotators).
//! * `labels.csv`: header `label[,split]`, one row per example in the same
//!   order. `label` is a hierarchy leaf name, `split` is `train` or `holdout`
//!   (default `train`).
//! * `hierarchy.json`: a hierarchy document.
//! * `metadata.json`: generation parameters, when the data is synthetic.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hierarchy::{balanced_doc, ClassHierarchy};
use crate::labels::PartialLabel;

pub const FEATURES_FILE: &str = "features.csv";
pub const LABELS_FILE: &str = "labels.csv";
pub const HIERARCHY_FILE: &str = "hierarchy.json";
pub const METADATA_FILE: &str = "metadata.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    d: usize,
    features: Vec<f64>,
    labels: Vec<usize>,
    payload: Option<Vec<String>>,
    train: Vec<usize>,
    holdout: Vec<usize>,
}

impl Dataset {
    pub fn new(
        d: usize,
        features: Vec<f64>,
        labels: Vec<usize>,
        k: usize,
        train: Vec<usize>,
        holdout: Vec<usize>,
    ) -> Result<Self> {
        let n = labels.len();
        if n == 0 || d == 0 {
            return Err(Error::InvalidDataset(
                "dataset has no examples or features".into(),
            ));
        }
        if features.len() != n * d {
            return Err(Error::InvalidDataset(format!(
                "{} feature values for {n} rows of width {d}",
                features.len()
            )));
        }
        if let Some(&y) = labels.iter().find(|&&y| y >= k) {
            return Err(Error::ClassOutOfRange { index: y, k });
        }
        let mut seen = vec![false; n];
        for &i in train.iter().chain(&holdout) {
            if i >= n || std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidDataset(format!(
                    "split index {i} is out of range or repeated"
                )));
            }
        }
        if train.is_empty() {
            return Err(Error::InvalidDataset("empty training split".into()));
        }
        Ok(Self {
            d,
            features,
            labels,
            payload: None,
            train,
            holdout,
        })
    }

    pub fn with_payload(mut self, payload: Vec<String>) -> Result<Self> {
        if payload.len() != self.labels.len() {
            return Err(Error::InvalidDataset(
                "payload length differs from row count".into(),
            ));
        }
        self.payload = Some(payload);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.d..(i + 1) * self.d]
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn payload(&self, i: usize) -> Option<&str> {
        self.payload.as_ref().map(|p| p[i].as_str())
    }

    pub fn train_indices(&self) -> &[usize] {
        &self.train
    }

    pub fn holdout_indices(&self) -> &[usize] {
        &self.holdout
    }

    /// True labels of the training split, in split order.
    pub fn train_labels(&self) -> Vec<usize> {
        self.train.iter().map(|&i| self.labels[i]).collect()
    }

    pub fn holdout_labels(&self) -> Vec<usize> {
        self.holdout.iter().map(|&i| self.labels[i]).collect()
    }

    /// Training feature rows, in split order.
    pub fn train_rows(&self) -> Vec<&[f64]> {
        self.train.iter().map(|&i| self.row(i)).collect()
    }

    pub fn holdout_rows(&self) -> Vec<&[f64]> {
        self.holdout.iter().map(|&i| self.row(i)).collect()
    }
}

/// Parameters of the synthetic hierarchical Gaussian generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub k: usize,
    pub branching: usize,
    pub depth: u32,
    pub d: usize,
    pub n_train: usize,
    pub n_holdout: usize,
    /// Norm scale of the offsets from the root to its children.
    pub root_scale: f64,
    /// Multiplier applied to the offset scale at each deeper level.
    pub decay: f64,
    pub seed: u64,
}

impl SynthParams {
    /// 16 classes in a depth-4 binary tree, 32 features, 2000 train / 1000 holdout.
    pub fn synth16(seed: u64) -> Self {
        Self {
            k: 16,
            branching: 2,
            depth: 4,
            d: 32,
            n_train: 2000,
            n_holdout: 1000,
            root_scale: 4.0,
            decay: 0.5,
            seed,
        }
    }
}

/// Names accepted by [`preset`].
pub const PRESETS: [&str; 2] = ["synth16", "toy"];

/// Built-in datasets by name: `synth16` (see [`SynthParams::synth16`]) and
/// `toy`, 4 classes with 20 training and 20 holdout examples in 2 dimensions,
/// each carrying a short text payload.
pub fn preset(name: &str, seed: u64) -> Result<(Dataset, ClassHierarchy)> {
    match name {
        "synth16" => gen_hierarchical_gaussians(&SynthParams::synth16(seed)),
        "toy" => {
            let (data, h) = gen_hierarchical_gaussians(&SynthParams {
                k: 4,
                branching: 2,
                depth: 2,
                d: 2,
                n_train: 20,
                n_holdout: 20,
                root_scale: 6.0,
                decay: 0.5,
                seed,
            })?;
            let payload = (0..data.n()).map(|i| format!("toy example {i}")).collect();
            Ok((data.with_payload(payload)?, h))
        }
        other => Err(Error::InvalidDataset(format!(
            "unknown preset `{other}` (expected one of {})",
            PRESETS.join(", ")
        ))),
    }
}

/// Gaussian clusters whose means descend the class tree: each child's mean is
/// its parent's plus a random offset whose scale shrinks with depth, so coarse
/// composites separate more easily than sibling leaves. Features have unit
/// variance and classes are balanced.
pub fn gen_hierarchical_gaussians(p: &SynthParams) -> Result<(Dataset, ClassHierarchy)> {
    if p.branching < 2 || p.depth == 0 {
        return Err(Error::InvalidConfig(
            "tree needs branching >= 2 and depth >= 1".into(),
        ));
    }
    let leaves = p
        .branching
        .checked_pow(p.depth)
        .ok_or_else(|| Error::InvalidConfig("tree too large".into()))?;
    if leaves != p.k {
        return Err(Error::InvalidConfig(format!(
            "k = {} but a depth-{} tree with branching {} has {leaves} leaves",
            p.k, p.depth, p.branching
        )));
    }
    if p.d == 0 || p.n_train == 0 {
        return Err(Error::InvalidConfig("need d >= 1 and n_train >= 1".into()));
    }
    let hierarchy = ClassHierarchy::from_doc(&balanced_doc(p.branching, p.depth))?;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);

    let gauss = |rng: &mut ChaCha8Rng| -> f64 { StandardNormal.sample(rng) };
    let inv_sqrt_d = 1.0 / (p.d as f64).sqrt();
    let mut means: Vec<Vec<f64>> = vec![vec![0.0; p.d]];
    let mut scale = p.root_scale;
    for _ in 0..p.depth {
        let mut next = Vec::with_capacity(means.len() * p.branching);
        for parent in &means {
            for _ in 0..p.branching {
                next.push(
                    parent
                        .iter()
                        .map(|m| m + scale * inv_sqrt_d * gauss(&mut rng))
                        .collect(),
                );
            }
        }
        means = next;
        scale *= p.decay;
    }

    let n = p.n_train + p.n_holdout;
    let mut labels: Vec<usize> = (0..p.n_train)
        .map(|i| i % p.k)
        .chain((0..p.n_holdout).map(|i| i % p.k))
        .collect();
    labels[..p.n_train].shuffle(&mut rng);
    labels[p.n_train..].shuffle(&mut rng);
    let mut features = Vec::with_capacity(n * p.d);
    for &y in &labels {
        features.extend(means[y].iter().map(|m| m + gauss(&mut rng)));
    }
    let dataset = Dataset::new(
        p.d,
        features,
        labels,
        p.k,
        (0..p.n_train).collect(),
        (p.n_train..n).collect(),
    )?;
    Ok((dataset, hierarchy))
}

/// Table-style partial labels for the training split: a seeded `gamma`
/// fraction is exact, the rest get the level-`level` ancestor of their class
/// (clipped at the root). Returned in training-split order.
pub fn assign_partial_labels(
    dataset: &Dataset,
    hierarchy: &ClassHierarchy,
    gamma: f64,
    level: usize,
    seed: u64,
) -> Result<Vec<PartialLabel>> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidConfig("gamma must lie in [0, 1]".into()));
    }
    let n = dataset.train.len();
    let exact = exact_subset(n, gamma, seed);
    dataset
        .train_labels()
        .into_iter()
        .zip(exact)
        .map(|(y, is_exact)| {
            if is_exact {
                Ok(PartialLabel::exact(hierarchy.k(), y))
            } else {
                PartialLabel::new(hierarchy.level_set(y, level)?.clone())
            }
        })
        .collect()
}

/// Which of `n` training rows get exact labels for a given `gamma` and seed.
/// The same seed picks nested subsets regardless of `level`.
pub fn exact_subset(n: usize, gamma: f64, seed: u64) -> Vec<bool> {
    let count = ((gamma * n as f64).round() as usize).min(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut mask = vec![false; n];
    for &i in &order[..count] {
        mask[i] = true;
    }
    mask
}

/// A dataset in which some classes have been made trivially recognizable.
#[derive(Clone, Debug)]
pub struct Adversarial {
    pub dataset: Dataset,
    pub easy_classes: Vec<usize>,
}

/// Replaces the features of `easy_class_count` randomly chosen classes with
/// distinct constant vectors: the first at the global feature maximum, the
/// second at the global minimum, any further ones spread evenly in between.
pub fn make_adversarial(
    dataset: &Dataset,
    k: usize,
    easy_class_count: usize,
    seed: u64,
) -> Result<Adversarial> {
    if easy_class_count > k {
        return Err(Error::InvalidConfig(format!(
            "cannot make {easy_class_count} of {k} classes easy"
        )));
    }
    let mut classes: Vec<usize> = (0..k).collect();
    classes.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut easy_classes = classes[..easy_class_count].to_vec();
    easy_classes.sort_unstable();

    let mut out = dataset.clone();
    if easy_class_count == 0 {
        return Ok(Adversarial {
            dataset: out,
            easy_classes,
        });
    }
    let hi = dataset
        .features
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let lo = dataset
        .features
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let constant = |rank: usize| -> f64 {
        match rank {
            0 => hi,
            1 => lo,
            r => lo + (hi - lo) * (r - 1) as f64 / (easy_class_count - 1) as f64,
        }
    };
    let d = out.d;
    for (i, &y) in dataset.labels.iter().enumerate() {
        if let Some(rank) = easy_classes.iter().position(|&c| c == y) {
            out.features[i * d..(i + 1) * d].fill(constant(rank));
        }
    }
    Ok(Adversarial {
        dataset: out,
        easy_classes,
    })
}

/// Loads a dataset directory written by [`write_dir`] or by hand.
pub fn load_dir(dir: impl AsRef<Path>) -> Result<(Dataset, ClassHierarchy)> {
    let dir = dir.as_ref();
    load_csv(
        dir.join(FEATURES_FILE),
        dir.join(LABELS_FILE),
        dir.join(HIERARCHY_FILE),
    )
}

pub fn load_csv(
    features_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
    hierarchy_path: impl AsRef<Path>,
) -> Result<(Dataset, ClassHierarchy)> {
    let hierarchy = ClassHierarchy::load(hierarchy_path)?;
    let dataset = read_csv(
        std::fs::File::open(features_path)?,
        std::fs::File::open(labels_path)?,
        &hierarchy,
    )?;
    Ok((dataset, hierarchy))
}

/// Parses the feature and label tables against a hierarchy.
pub fn read_csv<F: std::io::Read, L: std::io::Read>(
    features: F,
    labels: L,
    hierarchy: &ClassHierarchy,
) -> Result<Dataset> {
    let mut reader = csv::Reader::from_reader(features);
    let header = reader.headers()?.clone();
    let payload_col = header.iter().position(|h| h == "payload");
    let d = header.len() - usize::from(payload_col.is_some());
    let mut values = Vec::new();
    let mut payload = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        for (col, field) in record.iter().enumerate() {
            if Some(col) == payload_col {
                payload.push(field.to_string());
            } else {
                values.push(field.trim().parse::<f64>().map_err(|e| {
                    Error::Parse(format!("features row {}, column {}: {e}", row + 1, col + 1))
                })?);
            }
        }
    }

    let mut reader = csv::Reader::from_reader(labels);
    let header = reader.headers()?.clone();
    let label_col = header
        .iter()
        .position(|h| h == "label")
        .ok_or_else(|| Error::Parse("labels file has no `label` column".into()))?;
    let split_col = header.iter().position(|h| h == "split");
    let (mut ys, mut train, mut holdout) = (Vec::new(), Vec::new(), Vec::new());
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let name = record.get(label_col).unwrap_or_default();
        ys.push(
            hierarchy
                .class_index(name)
                .ok_or_else(|| Error::UnknownLabel(name.to_string()))?,
        );
        match split_col.and_then(|c| record.get(c)).unwrap_or("train") {
            "train" | "" => train.push(row),
            "holdout" => holdout.push(row),
            other => {
                return Err(Error::Parse(format!(
                    "labels row {}: unknown split `{other}`",
                    row + 1
                )))
            }
        }
    }
    if d == 0 || values.len() != ys.len() * d {
        return Err(Error::InvalidDataset(format!(
            "features file has {} rows of width {d}, labels file has {} rows",
            values.len().checked_div(d).unwrap_or(0),
            ys.len()
        )));
    }
    let dataset = Dataset::new(d, values, ys, hierarchy.k(), train, holdout)?;
    if payload_col.is_some() {
        dataset.with_payload(payload)
    } else {
        Ok(dataset)
    }
}

/// Writes the three dataset files (and optional metadata) into `dir`.
pub fn write_dir<M: Serialize>(
    dir: impl AsRef<Path>,
    dataset: &Dataset,
    hierarchy: &ClassHierarchy,
    metadata: Option<&M>,
) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let mut holdout = vec![false; dataset.n()];
    for &i in &dataset.holdout {
        holdout[i] = true;
    }

    let mut w = csv::Writer::from_path(dir.join(FEATURES_FILE))?;
    let mut header: Vec<String> = (0..dataset.d).map(|j| format!("f{j}")).collect();
    if dataset.payload.is_some() {
        header.push("payload".into());
    }
    w.write_record(&header)?;
    for i in 0..dataset.n() {
        let mut rec: Vec<String> = dataset.row(i).iter().map(|v| v.to_string()).collect();
        if let Some(p) = dataset.payload(i) {
            rec.push(p.to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join(LABELS_FILE))?;
    w.write_record(["label", "split"])?;
    for (i, &y) in dataset.labels.iter().enumerate() {
        w.write_record([
            hierarchy.class_names()[y].as_str(),
            if holdout[i] { "holdout" } else { "train" },
        ])?;
    }
    w.flush()?;

    std::fs::write(dir.join(HIERARCHY_FILE), hierarchy.to_json())?;
    if let Some(meta) = metadata {
        std::fs::write(dir.join(METADATA_FILE), serde_json::to_string_pretty(meta)?)?;
    }
    Ok(())
}
