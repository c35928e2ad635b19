//! Softmax classifiers trained on partial labels.
//!
//! The probability of a partial label is the softmax mass on its classes, and
//! training minimizes the mean negative log of that mass. An exact label turns
//! this into ordinary cross-entropy; a full-set label contributes nothing.
//!
//! For logits `z` with softmax `s` and partial label `Y`, the gradient of
//! `-ln Σ_{y∈Y} s_y` with respect to `z` is `s - r`, where `r` is `s` restricted
//! to `Y` and renormalized.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::PartialLabel;
use crate::optim::Adam;

/// Lower clamp on a partial label's probability before taking the log.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Architecture {
    #[default]
    Linear,
    /// One rectified hidden layer of the given width.
    Mlp { hidden: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub minibatch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub architecture: Architecture,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            minibatch_size: 200,
            epochs: 30,
            seed: 0,
            architecture: Architecture::Linear,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("beta1 and beta2 must lie in [0, 1)");
        }
        if self.epsilon <= 0.0 {
            return bad("epsilon must be positive");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.minibatch_size == 0 {
            return bad("minibatch_size must be at least 1");
        }
        if let Architecture::Mlp { hidden: 0 } = self.architecture {
            return bad("hidden width must be at least 1");
        }
        Ok(())
    }
}

/// A training example: feature row and its current partial label.
pub type Sample<'a> = (&'a [f64], &'a PartialLabel);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Classifier {
    arch: Architecture,
    k: usize,
    d: usize,
    theta: Vec<f64>,
}

/// Versioned on-disk form of a classifier.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClassifierSnapshot {
    pub format_version: u32,
    pub classifier: Classifier,
}

impl ClassifierSnapshot {
    pub const VERSION: u32 = 1;
}

impl Classifier {
    /// All-zero parameters: predicts the uniform distribution.
    pub fn zeros(arch: Architecture, k: usize, d: usize) -> Self {
        Self {
            arch,
            k,
            d,
            theta: vec![0.0; param_count(arch, k, d)],
        }
    }

    /// Seeded Gaussian initialization scaled by fan-in; biases start at zero.
    pub fn init(arch: Architecture, k: usize, d: usize, seed: u64) -> Self {
        let mut clf = Self::zeros(arch, k, d);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fill = |block: &mut [f64], std: f64, rng: &mut ChaCha8Rng| {
            let normal = Normal::new(0.0, std).expect("finite std");
            for w in block {
                *w = normal.sample(rng);
            }
        };
        match arch {
            Architecture::Linear => {
                let std = 1.0 / (d.max(1) as f64).sqrt();
                fill(&mut clf.theta[..k * d], std, &mut rng);
            }
            Architecture::Mlp { hidden } => {
                let l = MlpLayout::new(k, d, hidden);
                fill(
                    &mut clf.theta[l.w1..l.b1],
                    (2.0 / d.max(1) as f64).sqrt(),
                    &mut rng,
                );
                fill(
                    &mut clf.theta[l.w2..l.b2],
                    1.0 / (hidden as f64).sqrt(),
                    &mut rng,
                );
            }
        }
        clf
    }

    pub fn from_parts(arch: Architecture, k: usize, d: usize, theta: Vec<f64>) -> Result<Self> {
        let expected = param_count(arch, k, d);
        if theta.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: theta.len(),
            });
        }
        Ok(Self { arch, k, d, theta })
    }

    pub fn architecture(&self) -> Architecture {
        self.arch
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn theta_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                actual: x.len(),
            });
        }
        Ok(())
    }

    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let mut z = vec![0.0; self.k];
        match self.arch {
            Architecture::Linear => affine(
                &self.theta[..self.k * self.d],
                &self.theta[self.k * self.d..],
                x,
                &mut z,
            ),
            Architecture::Mlp { hidden } => {
                let l = MlpLayout::new(self.k, self.d, hidden);
                let mut a = vec![0.0; hidden];
                affine(&self.theta[l.w1..l.b1], &self.theta[l.b1..l.w2], x, &mut a);
                a.iter_mut().for_each(|v| *v = v.max(0.0));
                affine(&self.theta[l.w2..l.b2], &self.theta[l.b2..], &a, &mut z);
            }
        }
        Ok(z)
    }

    /// Predictive distribution over the `k` atomic classes.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax(&self.logits(x)?))
    }

    /// Probability mass the model puts on a partial label.
    pub fn partial_prob(&self, x: &[f64], label: &PartialLabel) -> Result<f64> {
        let p = self.predict(x)?;
        Ok(label.potential().iter().map(|y| p[y]).sum())
    }

    /// Mean clamped negative log partial-label likelihood over `batch`, and its
    /// gradient with respect to the flat parameter vector.
    pub fn partial_loss(&self, batch: &[Sample<'_>]) -> Result<(f64, Vec<f64>)> {
        let mut grad = vec![0.0; self.theta.len()];
        if batch.is_empty() {
            return Ok((0.0, grad));
        }
        let mut total = 0.0;
        let mut dz = vec![0.0; self.k];
        let hidden = match self.arch {
            Architecture::Mlp { hidden } => hidden,
            Architecture::Linear => 0,
        };
        let mut act = vec![0.0; hidden];
        let mut da = vec![0.0; hidden];
        for &(x, label) in batch {
            self.check_dim(x)?;
            if label.potential().universe() != self.k {
                return Err(Error::DimensionMismatch {
                    expected: self.k,
                    actual: label.potential().universe(),
                });
            }
            if label.is_trivial() {
                continue;
            }
            let z = match self.arch {
                Architecture::Linear => self.logits(x)?,
                Architecture::Mlp { hidden } => {
                    let l = MlpLayout::new(self.k, self.d, hidden);
                    affine(
                        &self.theta[l.w1..l.b1],
                        &self.theta[l.b1..l.w2],
                        x,
                        &mut act,
                    );
                    act.iter_mut().for_each(|v| *v = v.max(0.0));
                    let mut z = vec![0.0; self.k];
                    affine(&self.theta[l.w2..l.b2], &self.theta[l.b2..], &act, &mut z);
                    z
                }
            };
            let (loss, clamped) = logit_loss_grad(&z, label, &mut dz);
            total += loss;
            if clamped {
                continue;
            }
            match self.arch {
                Architecture::Linear => {
                    let (gw, gb) = grad.split_at_mut(self.k * self.d);
                    for (j, &g) in dz.iter().enumerate() {
                        gb[j] += g;
                        for (w, &xi) in gw[j * self.d..(j + 1) * self.d].iter_mut().zip(x) {
                            *w += g * xi;
                        }
                    }
                }
                Architecture::Mlp { hidden } => {
                    let l = MlpLayout::new(self.k, self.d, hidden);
                    da.iter_mut().for_each(|v| *v = 0.0);
                    for (j, &g) in dz.iter().enumerate() {
                        grad[l.b2 + j] += g;
                        let row = l.w2 + j * hidden;
                        for h in 0..hidden {
                            grad[row + h] += g * act[h];
                            da[h] += g * self.theta[row + h];
                        }
                    }
                    for h in 0..hidden {
                        if act[h] <= 0.0 {
                            continue;
                        }
                        grad[l.b1 + h] += da[h];
                        let row = l.w1 + h * self.d;
                        for (w, &xi) in grad[row..row + self.d].iter_mut().zip(x) {
                            *w += da[h] * xi;
                        }
                    }
                }
            }
        }
        let scale = 1.0 / batch.len() as f64;
        grad.iter_mut().for_each(|g| *g *= scale);
        Ok((total * scale, grad))
    }

    /// Trains a freshly initialized classifier with shuffled minibatch Adam.
    ///
    /// Full-set labels carry no gradient and are dropped up front; if nothing
    /// remains the initialization is returned unchanged.
    pub fn fit(k: usize, d: usize, data: &[Sample<'_>], cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let mut clf = Self::init(cfg.architecture, k, d, cfg.seed);
        let useful: Vec<Sample<'_>> = data
            .iter()
            .copied()
            .filter(|(_, label)| !label.is_trivial())
            .collect();
        if useful.is_empty() {
            return Ok(clf);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ SHUFFLE_STREAM);
        let mut adam = Adam::new(
            clf.theta.len(),
            cfg.learning_rate,
            cfg.beta1,
            cfg.beta2,
            cfg.epsilon,
        );
        let mut order: Vec<usize> = (0..useful.len()).collect();
        let mut batch = Vec::with_capacity(cfg.minibatch_size);
        for _ in 0..cfg.epochs {
            order.shuffle(&mut rng);
            for chunk in order.chunks(cfg.minibatch_size) {
                batch.clear();
                batch.extend(chunk.iter().map(|&i| useful[i]));
                let (_, grad) = clf.partial_loss(&batch)?;
                adam.step(&mut clf.theta, &grad);
            }
        }
        Ok(clf)
    }

    /// Top-1 accuracy on exactly labeled rows.
    pub fn accuracy<'a, I>(&self, rows: I) -> Result<f64>
    where
        I: IntoIterator<Item = (&'a [f64], usize)>,
    {
        let (mut hits, mut total) = (0usize, 0usize);
        for (x, y) in rows {
            let z = self.logits(x)?;
            hits += usize::from(argmax(&z) == y);
            total += 1;
        }
        Ok(if total == 0 {
            0.0
        } else {
            hits as f64 / total as f64
        })
    }

    pub fn to_snapshot_json(&self) -> String {
        serde_json::to_string(&ClassifierSnapshot {
            format_version: ClassifierSnapshot::VERSION,
            classifier: self.clone(),
        })
        .expect("classifier serializes")
    }

    pub fn from_snapshot_json(text: &str) -> Result<Self> {
        let snap: ClassifierSnapshot = serde_json::from_str(text)?;
        if snap.format_version != ClassifierSnapshot::VERSION {
            return Err(Error::Parse(format!(
                "unsupported classifier snapshot version {}",
                snap.format_version
            )));
        }
        let c = snap.classifier;
        Self::from_parts(c.arch, c.k, c.d, c.theta)
    }
}

// Minibatch shuffling draws from a different stream than initialization.
const SHUFFLE_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

fn param_count(arch: Architecture, k: usize, d: usize) -> usize {
    match arch {
        Architecture::Linear => k * d + k,
        Architecture::Mlp { hidden } => hidden * d + hidden + k * hidden + k,
    }
}

struct MlpLayout {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
}

impl MlpLayout {
    fn new(k: usize, d: usize, hidden: usize) -> Self {
        let b1 = hidden * d;
        let w2 = b1 + hidden;
        Self {
            w1: 0,
            b1,
            w2,
            b2: w2 + k * hidden,
        }
    }
}

fn affine(w: &[f64], b: &[f64], x: &[f64], out: &mut [f64]) {
    let d = x.len();
    for (j, o) in out.iter_mut().enumerate() {
        *o = b[j]
            + w[j * d..(j + 1) * d]
                .iter()
                .zip(x)
                .map(|(a, b)| a * b)
                .sum::<f64>();
    }
}

fn log_sum_exp<I: Iterator<Item = f64> + Clone>(values: I) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

// Loss and d(loss)/d(logits) for one example. Returns whether the clamp was
// active, in which case the gradient is zero.
fn logit_loss_grad(z: &[f64], label: &PartialLabel, dz: &mut [f64]) -> (f64, bool) {
    let lse_all = log_sum_exp(z.iter().copied());
    let lse_in = log_sum_exp(label.potential().iter().map(|y| z[y]));
    let log_p = lse_in - lse_all;
    if log_p < PROB_FLOOR.ln() {
        dz.iter_mut().for_each(|g| *g = 0.0);
        return (-PROB_FLOOR.ln(), true);
    }
    for (j, g) in dz.iter_mut().enumerate() {
        *g = (z[j] - lse_all).exp();
    }
    for y in label.potential() {
        dz[y] -= (z[y] - lse_in).exp();
    }
    (-log_p, false)
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= sum);
    out
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Shannon entropy in nats, with `0 ln 0 = 0`.
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| v * v.ln())
        .sum::<f64>()
}
