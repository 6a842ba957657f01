//! Semantic similarity between samples: cosine similarity of predicted
//! probability rows plus an instance-level attention similarity.

use serde::{Deserialize, Serialize};

use crate::error::{shape_check, Error, Result};
use crate::linalg::{norm, softmax_rows, Mat};

/// Projection matrices of the attention network, all `D2×D2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttentionParams {
    pub w_k1: Mat,
    pub w_k2: Mat,
    pub w_t: Mat,
}

impl AttentionParams {
    pub fn new(w_k1: Mat, w_k2: Mat, w_t: Mat) -> Result<Self> {
        let d = w_k1.rows();
        for (name, w) in [("w_k1", &w_k1), ("w_k2", &w_k2), ("w_t", &w_t)] {
            shape_check(w.shape() == (d, d), || format!("{name} must be {d}x{d}, got {:?}", w.shape()))?;
            if !w.is_finite() {
                return Err(Error::Domain(format!("{name} has non-finite entries")));
            }
        }
        Ok(Self { w_k1, w_k2, w_t })
    }

    pub fn dim(&self) -> usize {
        self.w_k1.rows()
    }

    /// Logit scale `√D2`.
    pub fn scale(&self) -> f64 {
        (self.dim() as f64).sqrt()
    }
}

/// Attention similarity for one view and the re-aggregated representations.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionOut {
    /// Row-stochastic `N×N` similarity.
    pub s_view: Mat,
    /// `N×D2` rows, each a convex combination of the value rows.
    pub h_view: Mat,
    /// Value rows `T = Z W_T`, kept for gradient computations.
    pub t_view: Mat,
}

/// `S = softmax_rows(Z W_K1 (Z W_K2)ᵀ / √D2)`, `H = S Z W_T`.
pub fn attention_forward(z: &Mat, params: &AttentionParams) -> Result<AttentionOut> {
    shape_check(z.rows() >= 1, || "attention needs at least one sample".into())?;
    shape_check(z.cols() == params.dim(), || {
        format!("inputs have dimension {}, attention expects {}", z.cols(), params.dim())
    })?;
    let k1 = z.matmul(&params.w_k1)?;
    let k2 = z.matmul(&params.w_k2)?;
    let t = z.matmul(&params.w_t)?;
    let logits = k1.matmul_t(&k2)?.scale(1.0 / params.scale());
    let s = softmax_rows(&logits);
    let h = s.matmul(&t)?;
    Ok(AttentionOut { s_view: s, h_view: h, t_view: t })
}

/// Mean of the two view similarities.
pub fn attention_similarity(s1: &Mat, s2: &Mat) -> Result<Mat> {
    shape_check(s1.is_square(), || format!("view similarity must be square, got {:?}", s1.shape()))?;
    s1.zip_map(s2, |a, b| 0.5 * (a + b))
}

/// Pairwise cosine similarity of the rows of `p0`.
pub fn cosine_matrix(p0: &Mat) -> Result<Mat> {
    let norms: Vec<f64> = p0.row_iter().map(norm).collect();
    if let Some(i) = norms.iter().position(|&v| v == 0.0) {
        return Err(Error::Domain(format!("row {i} has zero norm")));
    }
    let n = p0.rows();
    let mut out = Mat::zeros(n, n);
    for i in 0..n {
        out[(i, i)] = 1.0;
        for j in i + 1..n {
            let c = crate::linalg::dot(p0.row(i), p0.row(j)) / (norms[i] * norms[j]);
            out[(i, j)] = c;
            out[(j, i)] = c;
        }
    }
    Ok(out)
}

/// `S = S^cos + S^att`.
pub fn combine_similarity(s_cos: &Mat, s_att: &Mat) -> Result<Mat> {
    s_cos.add(s_att)
}
