//! Max-priority queue over (example, composite) candidates with lazy
//! invalidation by per-example version.
//!
//! Re-scoring an example bumps its version and pushes fresh entries; stale
//! entries stay in the heap and are discarded when they reach the top.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::acquisition::Question;

#[derive(Clone, Copy, Debug)]
struct Entry {
    utility: f64,
    example: usize,
    composite: usize,
    version: u32,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    // Highest utility first; ties go to the lowest example, then the lowest composite.
    fn cmp(&self, other: &Self) -> Ordering {
        self.utility
            .total_cmp(&other.utility)
            .then_with(|| other.example.cmp(&self.example))
            .then_with(|| other.composite.cmp(&self.composite))
            .then_with(|| self.version.cmp(&other.version))
    }
}

#[derive(Clone, Debug, Default)]
pub struct CandidateQueue {
    heap: BinaryHeap<Entry>,
    version: Vec<u32>,
}

impl CandidateQueue {
    /// Builds the queue from per-example `(composite, utility)` lists.
    pub fn build(per_example: Vec<Vec<(usize, f64)>>) -> Self {
        let version = vec![0; per_example.len()];
        let entries: Vec<Entry> = per_example
            .into_iter()
            .enumerate()
            .flat_map(|(example, list)| {
                list.into_iter().map(move |(composite, utility)| Entry {
                    utility,
                    example,
                    composite,
                    version: 0,
                })
            })
            .collect();
        Self {
            heap: BinaryHeap::from(entries),
            version,
        }
    }

    /// Invalidates every entry of `example` and inserts `fresh` in its place.
    pub fn replace(&mut self, example: usize, fresh: impl IntoIterator<Item = (usize, f64)>) {
        self.version[example] += 1;
        let version = self.version[example];
        for (composite, utility) in fresh {
            self.heap.push(Entry {
                utility,
                example,
                composite,
                version,
            });
        }
    }

    fn discard_stale(&mut self) {
        while let Some(top) = self.heap.peek() {
            if top.version == self.version[top.example] {
                break;
            }
            self.heap.pop();
        }
    }

    pub fn peek(&mut self) -> Option<(Question, f64)> {
        self.discard_stale();
        self.heap.peek().map(|e| {
            (
                Question {
                    example: e.example,
                    composite: e.composite,
                },
                e.utility,
            )
        })
    }

    pub fn pop(&mut self) -> Option<(Question, f64)> {
        let top = self.peek();
        self.heap.pop();
        top
    }

    /// Heap size including stale entries.
    pub fn raw_len(&self) -> usize {
        self.heap.len()
    }
}
