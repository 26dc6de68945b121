use std::fmt;

use serde::{Deserialize, Serialize};

/// A subset of the labels `1..=K`, stored sorted.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct LabelSet(Vec<usize>);

impl LabelSet {
    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn full(classes: usize) -> Self {
        Self((1..=classes).collect())
    }

    /// From 0-based class indices in ascending order.
    pub(crate) fn from_sorted_indices(indices: impl IntoIterator<Item = usize>) -> Self {
        Self(indices.into_iter().map(|k| k + 1).collect())
    }

    pub fn from_labels(labels: impl IntoIterator<Item = usize>) -> Self {
        let mut v: Vec<usize> = labels.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        Self(v)
    }

    pub fn contains(&self, label: usize) -> bool {
        self.0.binary_search(&label).is_ok()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn labels(&self) -> &[usize] {
        &self.0
    }

    pub fn is_subset(&self, other: &LabelSet) -> bool {
        self.0.iter().all(|&l| other.contains(l))
    }

    /// Labels in exactly one of the two sets.
    pub fn symmetric_difference(&self, other: &LabelSet) -> LabelSet {
        let mut out: Vec<usize> = self.0.iter().copied().filter(|&l| !other.contains(l)).collect();
        out.extend(other.0.iter().copied().filter(|&l| !self.contains(l)));
        LabelSet::from_labels(out)
    }
}

impl fmt::Display for LabelSet {
    /// Labels joined by `;`, e.g. `1;3`. The empty set prints as nothing.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|l| l.to_string()).collect();
        f.write_str(&parts.join(";"))
    }
}
