//! Partial labels and the binary-feedback update.

use serde::{Deserialize, Serialize};

use crate::classset::ClassSet;
use crate::error::{Error, Result};

/// The classes not yet eliminated for one example. Never empty.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PartialLabel(ClassSet);

/// A yes/no reply to "does this example belong to composite `c`?".
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Answer {
    No,
    Yes,
}

impl Answer {
    pub fn from_bit(bit: bool) -> Self {
        if bit {
            Answer::Yes
        } else {
            Answer::No
        }
    }

    pub fn bit(self) -> u8 {
        match self {
            Answer::No => 0,
            Answer::Yes => 1,
        }
    }
}

impl PartialLabel {
    /// The uninformative label `{0..k-1}`.
    pub fn full(k: usize) -> Self {
        Self(ClassSet::full(k))
    }

    pub fn exact(k: usize, class: usize) -> Self {
        Self(ClassSet::singleton(k, class))
    }

    pub fn new(potential: ClassSet) -> Result<Self> {
        if potential.is_empty() {
            return Err(Error::EmptyPartialLabel);
        }
        Ok(Self(potential))
    }

    pub fn potential(&self) -> &ClassSet {
        &self.0
    }

    /// Number of candidate classes; never zero, so there is no `is_empty`.
    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_exact(&self) -> bool {
        self.0.len() == 1
    }

    /// True while nothing has been eliminated.
    pub fn is_trivial(&self) -> bool {
        self.0.is_full()
    }

    pub fn exact_class(&self) -> Option<usize> {
        self.0.single()
    }

    pub fn contains(&self, class: usize) -> bool {
        self.0.contains(class)
    }

    /// Whether asking about `c` can change this label: `c` must overlap the
    /// label without covering it.
    pub fn is_informative(&self, c: &ClassSet) -> bool {
        self.0.intersects(c) && !self.0.is_subset(c)
    }

    /// Applies an answer: `No` removes `c`, `Yes` keeps only `c`.
    pub fn update(&self, c: &ClassSet, answer: Answer) -> Result<PartialLabel> {
        let next = match answer {
            Answer::No => self.0.difference(c),
            Answer::Yes => self.0.intersection(c),
        };
        if next.is_empty() {
            return Err(Error::InconsistentAnswer {
                label: self.0.to_string(),
                eliminated: match answer {
                    Answer::No => c.to_string(),
                    Answer::Yes => self.0.difference(c).to_string(),
                },
            });
        }
        if next == self.0 {
            return Err(Error::Uninformative {
                composite: c.to_string(),
                label: self.0.to_string(),
            });
        }
        Ok(Self(next))
    }
}

impl From<PartialLabel> for ClassSet {
    fn from(label: PartialLabel) -> Self {
        label.0
    }
}
