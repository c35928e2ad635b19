#![allow(dead_code)]

use alpf_core::hierarchy::NodeDoc;
use alpf_core::{ClassHierarchy, TrainConfig};
use rand::seq::SliceRandom;
use rand::Rng;

/// Optimizer settings sized for a few thousand rows: smaller batches and a
/// larger step than the defaults so each re-training converges.
pub fn desk_train() -> TrainConfig {
    TrainConfig {
        learning_rate: 0.01,
        minibatch_size: 32,
        epochs: 30,
        ..TrainConfig::default()
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// A random tree over `k` leaves: every internal node splits its classes into
/// 2..=4 random non-empty groups.
pub fn random_hierarchy<R: Rng>(k: usize, rng: &mut R) -> ClassHierarchy {
    let mut classes: Vec<usize> = (0..k).collect();
    classes.shuffle(rng);
    let mut counter = 0;
    let root = random_node(&classes, rng, &mut counter);
    ClassHierarchy::from_doc(&root).expect("random tree is valid")
}

fn random_node<R: Rng>(classes: &[usize], rng: &mut R, counter: &mut usize) -> NodeDoc {
    if classes.len() == 1 {
        return NodeDoc::leaf(format!("c{}", classes[0]));
    }
    let parts = rng.random_range(2..=classes.len().min(4));
    let mut cuts: Vec<usize> = (1..classes.len()).collect();
    cuts.shuffle(rng);
    let mut cuts = cuts[..parts - 1].to_vec();
    cuts.sort_unstable();
    let mut children = Vec::with_capacity(parts);
    let mut start = 0;
    for end in cuts.into_iter().chain([classes.len()]) {
        children.push(random_node(&classes[start..end], rng, counter));
        start = end;
    }
    *counter += 1;
    NodeDoc::node(format!("n{counter}"), children)
}
