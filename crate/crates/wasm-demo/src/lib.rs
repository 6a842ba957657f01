//! Browser bindings: solve a small transport problem, run the pseudo-label
//! benchmark on a synthetic mixture, and score a labeling.
//!
//! Each export is a thin wrapper over a plain Rust function so the logic can
//! be tested natively.

use pota_core::labels::labels_from_plan;
use pota_core::metrics::{accuracy, nmi, LabelPair};
use pota_core::pipeline::{pseudo_label_bench, synth_dataset, Labeler, RunConfig, SynthSpec};
use pota_core::similarity::cosine_matrix;
use pota_core::solver::{caot_solve, CaotParams, OtProblem};
use pota_core::Mat;
use wasm_bindgen::prelude::*;

#[wasm_bindgen]
#[derive(Debug)]
pub struct Solution {
    n: usize,
    k: usize,
    q: Vec<f64>,
    b: Vec<f64>,
    labels: Vec<u32>,
    trace: Vec<f64>,
}

#[wasm_bindgen]
impl Solution {
    #[wasm_bindgen(getter)]
    pub fn n(&self) -> usize {
        self.n
    }

    #[wasm_bindgen(getter)]
    pub fn k(&self) -> usize {
        self.k
    }

    /// The plan, row-major `n × k`.
    #[wasm_bindgen(getter)]
    pub fn q(&self) -> Vec<f64> {
        self.q.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn b(&self) -> Vec<f64> {
        self.b.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn labels(&self) -> Vec<u32> {
        self.labels.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn trace(&self) -> Vec<f64> {
        self.trace.clone()
    }
}

/// Parses whitespace- or comma-separated rows, one per line.
pub fn parse_rows(text: &str) -> Result<Mat, String> {
    let rows: Vec<Vec<f64>> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .enumerate()
        .map(|(i, line)| {
            line.split(|c: char| c == ',' || c.is_whitespace())
                .filter(|f| !f.is_empty())
                .map(|f| f.parse::<f64>().map_err(|_| format!("row {}: cannot read {f:?}", i + 1)))
                .collect()
        })
        .collect::<Result<_, _>>()?;
    Mat::from_rows(&rows).map_err(|e| e.to_string())
}

/// Similarity text may be empty, in which case the cosine similarity of the
/// prediction rows is used.
pub fn solve_text(probs: &str, similarity: &str, eps1: f64, eps2: f64, eps3: f64) -> Result<Solution, String> {
    let p = parse_rows(probs)?;
    let s = if similarity.trim().is_empty() {
        cosine_matrix(&p).map_err(|e| e.to_string())?
    } else {
        parse_rows(similarity)?
    };
    let params = CaotParams { eps1, eps2, eps3, ..CaotParams::default() };
    let prob = OtProblem::with_uniform_marginal(p, s).map_err(|e| e.to_string())?;
    let plan = caot_solve(&prob, &params).map_err(|e| e.to_string())?;
    let labels = labels_from_plan(&plan.q).labels().iter().map(|&l| l as u32).collect();
    Ok(Solution {
        n: prob.n(),
        k: prob.k(),
        q: plan.q.as_slice().to_vec(),
        b: plan.b.to_vec(),
        labels,
        trace: plan.objective_trace,
    })
}

#[wasm_bindgen]
pub fn solve(probs: &str, similarity: &str, eps1: f64, eps2: f64, eps3: f64) -> Result<Solution, JsError> {
    solve_text(probs, similarity, eps1, eps2, eps3).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub struct BenchResult {
    acc: Vec<f64>,
    nmi: Vec<f64>,
    k: usize,
    couplings: Vec<Vec<f64>>,
}

#[wasm_bindgen]
impl BenchResult {
    /// ACC of prediction, AOT and CAOT labels, in that order.
    #[wasm_bindgen(getter)]
    pub fn acc(&self) -> Vec<f64> {
        self.acc.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn nmi(&self) -> Vec<f64> {
        self.nmi.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn k(&self) -> usize {
        self.k
    }

    /// Row-major `k × 5k` coupling of one labeler (0 prediction, 1 AOT, 2 CAOT).
    pub fn coupling(&self, method: usize) -> Vec<f64> {
        self.couplings.get(method).cloned().unwrap_or_default()
    }
}

pub fn bench_mixture(sizes: &[usize], noise: f64, eps2: f64, eps3: f64, seed: u64) -> Result<BenchResult, String> {
    let spec = SynthSpec { k: sizes.len(), sizes: sizes.to_vec(), dim: 16, separation: 8.0, noise, seed };
    let data = synth_dataset(&spec).map_err(|e| e.to_string())?;
    let mut cfg = RunConfig { e_total: 40, e_warm: 20, seed, ..RunConfig::default() };
    cfg.caot.eps2 = eps2;
    cfg.caot.eps3 = eps3;
    let report = pseudo_label_bench(&data, &cfg).map_err(|e| e.to_string())?;
    let scores = Labeler::ALL.map(|m| report.score(m));
    Ok(BenchResult {
        acc: scores.iter().map(|s| s.acc).collect(),
        nmi: scores.iter().map(|s| s.nmi).collect(),
        k: sizes.len(),
        couplings: scores.iter().map(|s| s.coupling.as_slice().to_vec()).collect(),
    })
}

/// Trains briefly on a synthetic mixture with the given class sizes and
/// compares the three pseudo-labelers.
#[wasm_bindgen]
pub fn bench(sizes: Vec<u32>, noise: f64, eps2: f64, eps3: f64, seed: u32) -> Result<BenchResult, JsError> {
    let sizes: Vec<usize> = sizes.into_iter().map(|s| s as usize).collect();
    bench_mixture(&sizes, noise, eps2, eps3, seed.into()).map_err(|e| JsError::new(&e))
}

pub fn score_text(truth: &str, pred: &str) -> Result<[f64; 2], String> {
    let read = |t: &str| -> Result<Vec<usize>, String> {
        t.split(|c: char| c == ',' || c.is_whitespace())
            .filter(|f| !f.is_empty())
            .map(|f| f.parse().map_err(|_| format!("not a label: {f:?}")))
            .collect()
    };
    let (y, p) = (read(truth)?, read(pred)?);
    let pair = LabelPair::new(&y, &p).map_err(|e| e.to_string())?;
    Ok([accuracy(&pair), nmi(&pair)])
}

/// `[ACC, NMI]` of a predicted labeling against ground truth.
#[wasm_bindgen]
pub fn evaluate(truth: &str, pred: &str) -> Result<Vec<f64>, JsError> {
    score_text(truth, pred).map(|s| s.to_vec()).map_err(|e| JsError::new(&e))
}
