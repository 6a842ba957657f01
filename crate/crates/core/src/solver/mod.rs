//! Consistency-aware adaptive optimal transport.
//!
//! Solves
//!
//! ```text
//! min_{Q,b}  ⟨Q, −log P⟩ + ε1 ⟨Q, log Q − 1⟩ + ε2 Σ_j Ψ(b_j) − ε3 ⟨S, QQᵀ⟩
//! s.t.       Q1 = a,  Qᵀ1 = b,  Q ≥ 0,  Σ b = 1,      Ψ(b) = −log b − log(1 − b)
//! ```
//!
//! with a generalized conditional gradient loop: the quadratic semantic term
//! is linearized around the current plan, the resulting entropic problem with
//! an adaptive cluster marginal is solved by dual updates (see [`dual`]), and
//! a backtracking Armijo search picks the step along the segment from the
//! current `(Q, b)` to the subproblem solution.

mod dual;
mod marginal;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{shape_check, Error, Result};
use crate::linalg::{clamp_log, Mat, RVec, PROB_FLOOR};

pub use dual::{dual_update, inner_solve, sinkhorn_fixed, InnerSolution};
pub use marginal::{b_of_h, newton_h};

/// How the initial cluster marginal `b_0` is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BInit {
    Uniform,
    /// Random positive weights, normalized, from a seeded generator.
    Random(u64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaotParams {
    /// Entropy weight.
    pub eps1: f64,
    /// Strength of the marginal penalty pulling `b` toward uniform.
    pub eps2: f64,
    /// Weight of the semantic consistency term.
    pub eps3: f64,
    /// Outer (conditional gradient) iterations.
    pub t1: usize,
    /// Inner dual rounds per outer iteration.
    pub t2: usize,
    pub newton_iters: usize,
    pub armijo_c1: f64,
    pub armijo_shrink: f64,
    pub max_backtracks: usize,
    /// Row-marginal tolerance checked on the returned plan.
    pub marginal_tol: f64,
    pub prob_floor: f64,
    pub b_init: BInit,
}

impl Default for CaotParams {
    fn default() -> Self {
        Self {
            eps1: 1.0,
            eps2: 100.0,
            eps3: 25.0,
            t1: 10,
            t2: 10,
            newton_iters: 10,
            armijo_c1: 1e-4,
            armijo_shrink: 0.5,
            max_backtracks: 20,
            marginal_tol: 1e-9,
            prob_floor: PROB_FLOOR,
            b_init: BInit::Uniform,
        }
    }
}

impl CaotParams {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            (self.eps1 > 0.0, "eps1 must be > 0"),
            (self.eps2 > 0.0, "eps2 must be > 0"),
            (self.eps3 >= 0.0 && self.eps3.is_finite(), "eps3 must be >= 0"),
            (self.t1 >= 1, "t1 must be >= 1"),
            (self.t2 >= 1, "t2 must be >= 1"),
            (self.newton_iters >= 1, "newton_iters must be >= 1"),
            (self.armijo_c1 > 0.0 && self.armijo_c1 < 1.0, "armijo_c1 must lie in (0, 1)"),
            (self.armijo_shrink > 0.0 && self.armijo_shrink < 1.0, "armijo_shrink must lie in (0, 1)"),
            (self.marginal_tol > 0.0, "marginal_tol must be > 0"),
            (self.prob_floor > 0.0, "prob_floor must be > 0"),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(Error::Argument((*msg).into())),
            None => Ok(()),
        }
    }

    fn initial_marginal(&self, k: usize) -> RVec {
        match self.b_init {
            BInit::Uniform => RVec::uniform(k),
            BInit::Random(seed) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.5..1.5)).collect();
                let total: f64 = raw.iter().sum();
                raw.into_iter().map(|v| v / total).collect()
            }
        }
    }
}

/// One transport instance: predictions `p` (N×K), semantic similarity `s`
/// (N×N) and the sample marginal `a`.
#[derive(Clone, Debug, PartialEq)]
pub struct OtProblem {
    pub p: Mat,
    pub s: Mat,
    pub a: RVec,
}

impl OtProblem {
    pub fn new(p: Mat, s: Mat, a: RVec) -> Result<Self> {
        let prob = Self { p, s, a };
        prob.validate()?;
        Ok(prob)
    }

    /// Problem with the uniform sample marginal `1/N`.
    pub fn with_uniform_marginal(p: Mat, s: Mat) -> Result<Self> {
        let n = p.rows();
        Self::new(p, s, RVec::uniform(n))
    }

    pub fn n(&self) -> usize {
        self.p.rows()
    }

    pub fn k(&self) -> usize {
        self.p.cols()
    }

    pub fn validate(&self) -> Result<()> {
        let (n, k) = self.p.shape();
        shape_check(n >= 1 && k >= 1, || "problem needs at least one sample and one cluster".into())?;
        shape_check(self.s.shape() == (n, n), || {
            format!("similarity must be {n}x{n}, got {:?}", self.s.shape())
        })?;
        shape_check(self.a.len() == n, || format!("marginal a has length {}, expected {n}", self.a.len()))?;
        if !self.p.is_finite() || !self.s.is_finite() {
            return Err(Error::Argument("problem matrices must be finite".into()));
        }
        if self.p.min() < 0.0 {
            return Err(Error::Argument("probabilities must be non-negative".into()));
        }
        for (i, row) in self.p.row_iter().enumerate() {
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > 1e-6 {
                return Err(Error::Argument(format!("probability row {i} sums to {total}")));
            }
        }
        if self.a.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::Argument("sample marginal entries must be > 0".into()));
        }
        if (self.a.sum() - 1.0).abs() > 1e-9 {
            return Err(Error::Argument(format!("sample marginal sums to {}", self.a.sum())));
        }
        Ok(())
    }
}

/// Solved coupling with its cluster marginal, the duals of the last inner
/// solve and the objective after every outer iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan {
    pub q: Mat,
    pub b: RVec,
    pub f: RVec,
    pub g: RVec,
    pub objective_trace: Vec<f64>,
    /// Accepted step per outer iteration (0 when the line search failed).
    pub step_sizes: Vec<f64>,
}

/// Gradient of `f(Q) = ⟨Q, −log P⟩ − ε3 ⟨S, QQᵀ⟩`:
/// `−log P − ε3 (S + Sᵀ) Q`.
pub fn grad_f(q: &Mat, p: &Mat, s: &Mat, eps3: f64) -> Result<Mat> {
    grad_f_floored(q, p, s, eps3, PROB_FLOOR)
}

pub fn grad_f_floored(q: &Mat, p: &Mat, s: &Mat, eps3: f64, floor: f64) -> Result<Mat> {
    shape_check(q.shape() == p.shape(), || {
        format!("plan {:?} and predictions {:?} differ in shape", q.shape(), p.shape())
    })?;
    shape_check(s.shape() == (q.rows(), q.rows()), || {
        format!("similarity {:?} incompatible with {} samples", s.shape(), q.rows())
    })?;
    let neg_log_p = clamp_log(p, floor).scale(-1.0);
    Ok(linearized_cost(&neg_log_p, q, s, eps3))
}

fn linearized_cost(neg_log_p: &Mat, q: &Mat, s: &Mat, eps3: f64) -> Mat {
    if eps3 == 0.0 {
        return neg_log_p.clone();
    }
    let sym = s.add(&s.transpose()).expect("square similarity");
    let pull = sym.matmul(q).expect("compatible shapes");
    let mut out = neg_log_p.clone();
    out.axpy(-eps3, &pull).expect("same shape");
    out
}

/// Full objective value at `(Q, b)`.
pub fn objective(q: &Mat, b: &[f64], prob: &OtProblem, params: &CaotParams) -> Result<f64> {
    shape_check(q.shape() == prob.p.shape(), || {
        format!("plan {:?} does not match problem {:?}", q.shape(), prob.p.shape())
    })?;
    shape_check(b.len() == prob.k(), || format!("b has length {}, expected {}", b.len(), prob.k()))?;
    let neg_log_p = clamp_log(&prob.p, params.prob_floor).scale(-1.0);
    let psi = marginal_penalty(b)?;
    Ok(plan_energy(q, &neg_log_p, &prob.s, params) + params.eps2 * psi)
}

/// `Σ_j −log b_j − log(1 − b_j)`.
fn marginal_penalty(b: &[f64]) -> Result<f64> {
    if let Some(bad) = b.iter().find(|&&v| !(v > 0.0 && v < 1.0)) {
        return Err(Error::Domain(format!("cluster marginal entry {bad} outside (0, 1)")));
    }
    Ok(b.iter().map(|&v| -v.ln() - (1.0 - v).ln()).sum())
}

/// Objective terms that depend on `Q` only.
fn plan_energy(q: &Mat, neg_log_p: &Mat, s: &Mat, params: &CaotParams) -> f64 {
    let transport = q.frob_dot(neg_log_p).expect("same shape");
    let entropy: f64 = q
        .as_slice()
        .iter()
        .map(|&v| if v > 0.0 { v * (v.ln() - 1.0) } else { 0.0 })
        .sum();
    let semantic = if params.eps3 == 0.0 {
        0.0
    } else {
        // ⟨S, QQᵀ⟩ = ⟨SQ, Q⟩
        s.matmul(q).expect("compatible").frob_dot(q).expect("same shape")
    };
    transport + params.eps1 * entropy - params.eps3 * semantic
}

struct Evaluator<'a> {
    neg_log_p: Mat,
    prob: &'a OtProblem,
    params: &'a CaotParams,
    /// With a single cluster `b = [1]` is fixed and Ψ is dropped.
    with_penalty: bool,
}

impl Evaluator<'_> {
    fn value(&self, q: &Mat, b: &[f64]) -> Result<f64> {
        let energy = plan_energy(q, &self.neg_log_p, &self.prob.s, self.params);
        if self.with_penalty {
            Ok(energy + self.params.eps2 * marginal_penalty(b)?)
        } else {
            Ok(energy)
        }
    }

    /// Directional derivative of the objective at `(q, b)` along `(dq, db)`.
    fn slope(&self, cost: &Mat, q: &Mat, b: &[f64], q_dir: &Mat, b_dir: &[f64]) -> f64 {
        let eps1 = self.params.eps1;
        let mut s = 0.0;
        for ((&c, &qv), &d) in cost.as_slice().iter().zip(q.as_slice()).zip(q_dir.as_slice()) {
            s += (c + eps1 * qv.max(f64::MIN_POSITIVE).ln()) * d;
        }
        if self.with_penalty {
            for (&bj, &dj) in b.iter().zip(b_dir) {
                s += self.params.eps2 * (-1.0 / bj + 1.0 / (1.0 - bj)) * dj;
            }
        }
        s
    }
}

/// Solves the transport problem; see the module docs for the scheme.
///
/// `Q_0 = a b_0ᵀ`. Each outer iteration linearizes at `Q_{i−1}`, solves the
/// subproblem for `(Q̃_i, b̃_i)` and accepts the largest `α = shrinkᵐ` with
/// `F(Q_α, b_α) ≤ F(Q_{i−1}, b_{i−1}) + c1 α min(∇F·D, 0)`, where
/// `(Q_α, b_α)` interpolates both variables. If no step passes, the iterate
/// is kept, so the objective trace never increases.
pub fn caot_solve(prob: &OtProblem, params: &CaotParams) -> Result<TransportPlan> {
    params.validate()?;
    prob.validate()?;
    let k = prob.k();
    let eval = Evaluator {
        neg_log_p: clamp_log(&prob.p, params.prob_floor).scale(-1.0),
        prob,
        params,
        with_penalty: k > 1,
    };

    let mut b = if k == 1 { RVec::filled(1, 1.0) } else { params.initial_marginal(k) };
    let mut q = Mat::outer(&prob.a, &b);
    let mut current = eval.value(&q, &b)?;
    let mut duals = (RVec::zeros(prob.n()), RVec::zeros(k));
    let mut trace = Vec::with_capacity(params.t1);
    let mut steps = Vec::with_capacity(params.t1);

    for _ in 0..params.t1 {
        let cost = linearized_cost(&eval.neg_log_p, &q, &prob.s, params.eps3);
        let sub = inner_solve(&cost, prob, params, &b)?;

        let q_dir = sub.q.sub(&q)?;
        let b_dir: Vec<f64> = sub.b.iter().zip(b.iter()).map(|(t, c)| t - c).collect();
        let slope = eval.slope(&cost, &q, &b, &q_dir, &b_dir).min(0.0);

        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..=params.max_backtracks {
            let (q_try, b_try) = interpolate(&q, &b, &sub, alpha);
            match eval.value(&q_try, &b_try) {
                Ok(v) if v <= current + params.armijo_c1 * alpha * slope => {
                    accepted = Some((q_try, b_try, v));
                    break;
                }
                _ => alpha *= params.armijo_shrink,
            }
        }
        duals = (sub.f, sub.g);
        match accepted {
            Some((q_new, b_new, v)) => {
                q = q_new;
                b = b_new;
                current = v;
                steps.push(alpha);
            }
            None => steps.push(0.0),
        }
        trace.push(current);
    }

    if !q.is_finite() || q.min() <= 0.0 {
        return Err(Error::Numeric("transport plan lost positivity".into()));
    }
    let worst_row = q.row_sums().max_abs_diff(&prob.a);
    if worst_row > params.marginal_tol {
        return Err(Error::Numeric(format!(
            "row marginal violated by {worst_row:.3e} (tolerance {:.1e})",
            params.marginal_tol
        )));
    }
    Ok(TransportPlan { q, b, f: duals.0, g: duals.1, objective_trace: trace, step_sizes: steps })
}

fn interpolate(q: &Mat, b: &RVec, sub: &InnerSolution, alpha: f64) -> (Mat, RVec) {
    if alpha == 1.0 {
        return (sub.q.clone(), sub.b.clone());
    }
    let q_new = q.zip_map(&sub.q, |c, t| (1.0 - alpha) * c + alpha * t).expect("same shape");
    let b_new = b.iter().zip(sub.b.iter()).map(|(c, t)| (1.0 - alpha) * c + alpha * t).collect();
    (q_new, b_new)
}
