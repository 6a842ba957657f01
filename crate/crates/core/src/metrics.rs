//! Clustering accuracy (with Hungarian label matching) and normalized mutual
//! information.

use crate::error::{shape_check, Error, Result};
use crate::linalg::Mat;

/// Minimum-cost assignment on a square cost matrix.
///
/// Returns `perm` with row `i` assigned to column `perm[i]`. Shortest
/// augmenting path with row/column potentials, `O(K³)`.
pub fn hungarian(cost: &Mat) -> Result<Vec<usize>> {
    shape_check(cost.is_square(), || format!("assignment needs a square matrix, got {:?}", cost.shape()))?;
    if !cost.is_finite() {
        return Err(Error::Argument("assignment costs must be finite".into()));
    }
    let n = cost.rows();
    // 1-based arrays with a sentinel column 0
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut col0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let i0 = owner[col0];
            let mut delta = f64::INFINITY;
            let mut col1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = col0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    col1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            col0 = col1;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let col1 = way[col0];
            owner[col0] = owner[col1];
            col0 = col1;
            if col0 == 0 {
                break;
            }
        }
    }
    let mut perm = vec![0; n];
    for j in 1..=n {
        if owner[j] > 0 {
            perm[owner[j] - 1] = j - 1;
        }
    }
    Ok(perm)
}

/// A ground-truth / predicted labeling pair of equal length.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelPair<'a> {
    pub y_true: &'a [usize],
    pub y_pred: &'a [usize],
}

impl<'a> LabelPair<'a> {
    pub fn new(y_true: &'a [usize], y_pred: &'a [usize]) -> Result<Self> {
        shape_check(y_true.len() == y_pred.len(), || {
            format!("label vectors differ in length: {} vs {}", y_true.len(), y_pred.len())
        })?;
        Ok(Self { y_true, y_pred })
    }

    /// Contingency counts `[pred][true]` over a square `K×K` table, with `K`
    /// the larger label range of the two sides.
    fn contingency(&self) -> Vec<Vec<u64>> {
        let k = self
            .y_true
            .iter()
            .chain(self.y_pred)
            .copied()
            .max()
            .map_or(0, |m| m + 1);
        let mut table = vec![vec![0u64; k]; k];
        for (&t, &p) in self.y_true.iter().zip(self.y_pred) {
            table[p][t] += 1;
        }
        table
    }
}

/// Fraction of samples whose predicted cluster maps to their true class under
/// the best one-to-one mapping.
pub fn accuracy(pair: &LabelPair) -> f64 {
    let n = pair.y_true.len();
    if n == 0 {
        return 0.0;
    }
    let table = pair.contingency();
    let k = table.len();
    let cost = Mat::from_fn(k, k, |p, t| -(table[p][t] as f64));
    let perm = hungarian(&cost).expect("square finite cost");
    let matched: u64 = perm.iter().enumerate().map(|(p, &t)| table[p][t]).sum();
    matched as f64 / n as f64
}

fn entropy(counts: impl Iterator<Item = u64>, n: f64) -> f64 {
    counts
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// `I(Y, Ỹ) / √(H(Y) H(Ỹ))`, natural logs; 0 when either entropy is 0.
pub fn nmi(pair: &LabelPair) -> f64 {
    let n = pair.y_true.len();
    if n == 0 {
        return 0.0;
    }
    let nf = n as f64;
    let table = pair.contingency();
    let k = table.len();
    let pred_counts: Vec<u64> = table.iter().map(|r| r.iter().sum()).collect();
    let true_counts: Vec<u64> = (0..k).map(|t| table.iter().map(|r| r[t]).sum()).collect();
    let h_pred = entropy(pred_counts.iter().copied(), nf);
    let h_true = entropy(true_counts.iter().copied(), nf);
    if h_pred == 0.0 || h_true == 0.0 {
        return 0.0;
    }
    // summed in sorted order so that swapping the arguments is exact
    let mut terms = Vec::new();
    for p in 0..k {
        for t in 0..k {
            let c = table[p][t];
            if c == 0 {
                continue;
            }
            let joint = c as f64 / nf;
            // p(x,y) / (p(x) p(y)) = c n / (n_p n_t)
            terms.push(joint * ((c as f64 * nf) / (pred_counts[p] as f64 * true_counts[t] as f64)).ln());
        }
    }
    terms.sort_by(f64::total_cmp);
    let mi: f64 = terms.iter().sum();
    (mi / (h_pred * h_true).sqrt()).clamp(0.0, 1.0)
}
