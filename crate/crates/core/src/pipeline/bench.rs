use serde::{Deserialize, Serialize};

use super::data::Dataset;
use super::train::{forward_heads, semantic_similarity, train, BatchViews, RunConfig};
use crate::error::{shape_check, Error, Result};
use crate::labels::{labels_from_plan, labels_from_prediction};
use crate::linalg::Mat;
use crate::metrics::{accuracy, nmi, LabelPair};
use crate::solver::{caot_solve, CaotParams, OtProblem};

pub const SAMPLES_PER_CLASS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Labeler {
    Prediction,
    Aot,
    Caot,
}

impl Labeler {
    pub const ALL: [Labeler; 3] = [Labeler::Prediction, Labeler::Aot, Labeler::Caot];

    pub fn name(self) -> &'static str {
        match self {
            Labeler::Prediction => "prediction",
            Labeler::Aot => "aot",
            Labeler::Caot => "caot",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelerScore {
    pub method: Labeler,
    pub acc: f64,
    pub nmi: f64,
    pub labels: Vec<usize>,
    /// `K × 5K` coupling restricted to the sampled subset, columns grouped by class.
    pub coupling: Mat,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub scores: Vec<LabelerScore>,
    /// Sample indices behind the coupling columns.
    pub subset: Vec<usize>,
}

impl BenchReport {
    pub fn score(&self, method: Labeler) -> &LabelerScore {
        self.scores.iter().find(|s| s.method == method).expect("all labelers scored")
    }
}

/// First `SAMPLES_PER_CLASS` indices of every class, classes in order.
pub fn class_subset(y: &[usize], k: usize) -> Vec<usize> {
    (0..k)
        .flat_map(|c| y.iter().enumerate().filter(move |&(_, &l)| l == c).map(|(i, _)| i).take(SAMPLES_PER_CLASS))
        .collect()
}

fn subset_coupling(q: &Mat, subset: &[usize]) -> Mat {
    Mat::from_fn(q.cols(), subset.len(), |c, j| q[(subset[j], c)])
}

/// Scores the three labelers on one prediction matrix and similarity.
pub fn compare_labelers(p0: &Mat, s: &Mat, y_true: &[usize], caot: &CaotParams) -> Result<BenchReport> {
    shape_check(y_true.len() == p0.rows(), || format!("{} labels for {} samples", y_true.len(), p0.rows()))?;
    let n = p0.rows() as f64;
    let subset = class_subset(y_true, p0.cols());
    let prob = OtProblem::with_uniform_marginal(p0.clone(), s.clone())?;
    let aot_params = CaotParams { eps3: 0.0, ..caot.clone() };

    let mut scores = Vec::with_capacity(3);
    for method in Labeler::ALL {
        let (labels, q) = match method {
            Labeler::Prediction => (labels_from_prediction(p0), p0.scale(1.0 / n)),
            Labeler::Aot => {
                let plan = caot_solve(&prob, &aot_params)?;
                (labels_from_plan(&plan.q), plan.q)
            }
            Labeler::Caot => {
                let plan = caot_solve(&prob, caot)?;
                (labels_from_plan(&plan.q), plan.q)
            }
        };
        let pair = LabelPair::new(y_true, labels.labels())?;
        scores.push(LabelerScore {
            method,
            acc: accuracy(&pair),
            nmi: nmi(&pair),
            coupling: subset_coupling(&q, &subset),
            labels: labels.into_vec(),
        });
    }
    Ok(BenchReport { scores, subset })
}

/// Trains with `cfg`, then compares the labelers on the whole dataset using
/// the trained heads.
pub fn pseudo_label_bench(data: &Dataset, cfg: &RunConfig) -> Result<BenchReport> {
    let y = data
        .y_true
        .as_ref()
        .ok_or_else(|| Error::Argument("the pseudo-label benchmark needs ground-truth labels".into()))?;
    let (heads, _) = train(data, cfg)?;
    let all: Vec<usize> = (0..data.n()).collect();
    let fw = forward_heads(&BatchViews::select(data, &all), &heads)?;
    let s = semantic_similarity(&fw)?;
    compare_labelers(&fw.p0, &s, y, &cfg.caot)
}
