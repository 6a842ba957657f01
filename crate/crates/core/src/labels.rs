//! Hard pseudo-labels from transport plans or raw predictions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PseudoLabels {
    labels: Vec<usize>,
    k: usize,
}

impl PseudoLabels {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if let Some(bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::Argument(format!("label {bad} out of range for {k} clusters")));
        }
        Ok(Self { labels, k })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Labels of the listed samples, in order.
    pub fn subset(&self, idx: &[usize]) -> Self {
        Self { labels: idx.iter().map(|&i| self.labels[i]).collect(), k: self.k }
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.labels
    }
}

/// First index of the row maximum.
pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = j;
        }
    }
    best
}

/// Row argmax of the plan; ties go to the lowest column.
pub fn labels_from_plan(q: &Mat) -> PseudoLabels {
    PseudoLabels { labels: q.row_iter().map(argmax).collect(), k: q.cols() }
}

/// Row argmax of the predicted probabilities.
pub fn labels_from_prediction(p: &Mat) -> PseudoLabels {
    labels_from_plan(p)
}

/// For every sample, the (0-based) indices sharing its label, itself included.
pub fn same_cluster_sets(labels: &PseudoLabels) -> Vec<Vec<usize>> {
    let mut members = vec![Vec::new(); labels.k];
    for (i, &l) in labels.labels.iter().enumerate() {
        members[l].push(i);
    }
    labels.labels.iter().map(|&l| members[l].clone()).collect()
}
