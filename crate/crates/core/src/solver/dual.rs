//! Log-domain dual updates for the linearized transport subproblem.

use crate::error::{shape_check, Error, Result};
use crate::linalg::{logsumexp, Mat, RVec};

use super::marginal::{b_of_h, newton_h, relaxation};
use super::{CaotParams, OtProblem};

/// Output of one inner (Lagrangian) solve.
#[derive(Clone, Debug, PartialEq)]
pub struct InnerSolution {
    pub q: Mat,
    pub b: RVec,
    pub f: RVec,
    pub g: RVec,
}

/// `f_i = ε1 ln a_i − ε1 · LSE_j((g_j − M'_ij)/ε1)`.
pub(crate) fn update_f(m: &Mat, g: &[f64], a: &[f64], eps1: f64) -> RVec {
    let mut buf = vec![0.0; m.cols()];
    m.row_iter()
        .zip(a)
        .map(|(row, &ai)| {
            for ((t, &gj), &mij) in buf.iter_mut().zip(g).zip(row) {
                *t = (gj - mij) / eps1;
            }
            eps1 * ai.ln() - eps1 * logsumexp(&buf)
        })
        .collect()
}

/// `g_j = ε1 ln b_j − ε1 · LSE_i((f_i − M'_ij)/ε1)`.
pub(crate) fn update_g(m: &Mat, f: &[f64], b: &[f64], eps1: f64) -> RVec {
    let k = m.cols();
    let mut mx = vec![f64::NEG_INFINITY; k];
    for (row, &fi) in m.row_iter().zip(f) {
        for (c, &mij) in mx.iter_mut().zip(row) {
            *c = c.max((fi - mij) / eps1);
        }
    }
    let mut acc = vec![0.0; k];
    for (row, &fi) in m.row_iter().zip(f) {
        for ((s, &c), &mij) in acc.iter_mut().zip(&mx).zip(row) {
            *s += ((fi - mij) / eps1 - c).exp();
        }
    }
    (0..k)
        .map(|j| eps1 * b[j].ln() - eps1 * (mx[j] + acc[j].ln()))
        .collect()
}

/// `Q_ij = exp((f_i + g_j − M'_ij)/ε1)`.
pub(crate) fn plan_from_duals(m: &Mat, f: &[f64], g: &[f64], eps1: f64) -> Mat {
    Mat::from_fn(m.rows(), m.cols(), |i, j| ((f[i] + g[j] - m[(i, j)]) / eps1).exp())
}

/// One round of the alternating dual updates: `f` from `g`, then `g` from the
/// freshly updated `f`.
pub fn dual_update(
    m_prime: &Mat,
    f: &[f64],
    g: &[f64],
    b: &[f64],
    a: &[f64],
    eps1: f64,
) -> Result<(RVec, RVec)> {
    let (n, k) = m_prime.shape();
    shape_check(f.len() == n && a.len() == n, || {
        format!("f/a length must be {n} (got {}/{})", f.len(), a.len())
    })?;
    shape_check(g.len() == k && b.len() == k, || {
        format!("g/b length must be {k} (got {}/{})", g.len(), b.len())
    })?;
    let f_new = update_f(m_prime, g, a, eps1);
    let g_new = update_g(m_prime, &f_new, b, eps1);
    Ok((f_new, g_new))
}

/// Solves the linearized subproblem
/// `min ⟨Q, M'⟩ + ε1 H(Q) + ε2 Σ Ψ(b_j)` s.t. `Q1 = a, Qᵀ1 = b, Σb = 1`
/// by `T2` rounds of {dual updates with `b` fixed; marginal update with the
/// duals fixed}. A final `f` update makes the row marginals exact.
pub fn inner_solve(
    m_prime: &Mat,
    prob: &OtProblem,
    params: &CaotParams,
    b_init: &[f64],
) -> Result<InnerSolution> {
    let (n, k) = prob.p.shape();
    shape_check(m_prime.shape() == (n, k), || {
        format!("cost shape {:?} does not match problem {n}x{k}", m_prime.shape())
    })?;
    shape_check(b_init.len() == k, || format!("b_init has length {}, expected {k}", b_init.len()))?;
    if k > 1 && b_init.iter().any(|&v| !(v > 0.0 && v < 1.0)) {
        return Err(Error::Domain("b_init entries must lie in (0, 1)".into()));
    }

    let eps1 = params.eps1;
    let a = &prob.a;
    let mut b = if k == 1 { RVec::filled(1, 1.0) } else { RVec::from(b_init.to_vec()) };
    let mut g = RVec::zeros(k);
    let mut h = 1.0;

    for _ in 0..params.t2 {
        let f = update_f(m_prime, &g, a, eps1);
        g = update_g(m_prime, &f, &b, eps1);
        if k > 1 {
            h = newton_h(&g, params.eps2, h, params.newton_iters)?;
            let target = b_of_h(&g, h, params.eps2);
            let w = relaxation(&b, eps1, params.eps2);
            if w == 1.0 {
                b = target;
            } else {
                for (bj, tj) in b.iter_mut().zip(target.iter()) {
                    *bj = (1.0 - w) * *bj + w * tj;
                }
            }
        }
    }
    let f = update_f(m_prime, &g, a, eps1);
    let q = plan_from_duals(m_prime, &f, &g, eps1);
    if !q.is_finite() {
        return Err(Error::Numeric("transport plan overflowed".into()));
    }
    Ok(InnerSolution { q, b, f, g })
}

/// Entropic transport with both marginals fixed (plain Sinkhorn in the log
/// domain). Used as an oracle for the adaptive solver.
pub fn sinkhorn_fixed(m: &Mat, a: &[f64], b: &[f64], eps1: f64, iters: usize) -> Result<Mat> {
    let (n, k) = m.shape();
    shape_check(a.len() == n && b.len() == k, || {
        format!("marginals {}/{} do not match cost {n}x{k}", a.len(), b.len())
    })?;
    let mut f = RVec::zeros(n);
    let mut g = RVec::zeros(k);
    for _ in 0..iters.max(1) {
        (f, g) = dual_update(m, &f, &g, b, a, eps1)?;
    }
    Ok(plan_from_duals(m, &f, &g, eps1))
}
