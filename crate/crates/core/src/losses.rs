//! Attention, cluster-level and instance-level losses, with analytic gradients
//! and a central-difference checker.
//!
//! Both contrastive losses are written over a stacked `2N`-row matrix whose
//! first `N` rows come from the first view. Each sample contributes two
//! anchor terms (row `i` and row `N+i`); the batch loss is the mean over all
//! `2N` anchor terms, which is what `LossValue::per_sample` holds for them.

use serde::{Deserialize, Serialize};

use crate::error::{shape_check, Error, Result};
use crate::labels::PseudoLabels;
use crate::linalg::{dot, norm, softmax_rows, Mat, RVec, PROB_FLOOR};
use crate::similarity::{attention_forward, attention_similarity, AttentionParams};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Temperatures {
    pub tau_a: f64,
    pub tau_i: f64,
}

impl Default for Temperatures {
    fn default() -> Self {
        Self { tau_a: 1.0, tau_i: 1.0 }
    }
}

impl Temperatures {
    pub fn new(tau_a: f64, tau_i: f64) -> Result<Self> {
        let t = Self { tau_a, tau_i };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("tau_a", self.tau_a), ("tau_i", self.tau_i)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Argument(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossValue {
    pub value: f64,
    pub per_sample: Option<Vec<f64>>,
}

impl LossValue {
    fn from_terms(terms: Vec<f64>) -> Result<Self> {
        let value = terms.iter().sum::<f64>() / terms.len() as f64;
        if !value.is_finite() {
            return Err(Error::Numeric(format!("loss evaluated to {value}")));
        }
        Ok(Self { value, per_sample: Some(terms) })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Warmup,
    Train,
}

pub fn cos_sim(u: &[f64], v: &[f64]) -> Result<f64> {
    shape_check(u.len() == v.len(), || format!("vectors differ in length: {} vs {}", u.len(), v.len()))?;
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::Domain("cosine similarity of a zero vector".into()));
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

fn stack(top: &Mat, bottom: &Mat) -> Result<Mat> {
    shape_check(top.shape() == bottom.shape(), || {
        format!("views differ in shape: {:?} vs {:?}", top.shape(), bottom.shape())
    })?;
    let mut data = Vec::with_capacity(2 * top.as_slice().len());
    data.extend_from_slice(top.as_slice());
    data.extend_from_slice(bottom.as_slice());
    Ok(Mat::from_raw(2 * top.rows(), top.cols(), data))
}

fn split(m: &Mat) -> (Mat, Mat) {
    let n = m.rows() / 2;
    let idx: Vec<usize> = (0..m.rows()).collect();
    (m.select_rows(&idx[..n]), m.select_rows(&idx[n..]))
}

/// Unit-normalized rows together with the original norms.
struct UnitRows {
    u: Mat,
    norms: Vec<f64>,
}

impl UnitRows {
    fn new(x: &Mat) -> Result<Self> {
        let norms: Vec<f64> = x.row_iter().map(norm).collect();
        if let Some(i) = norms.iter().position(|&v| v == 0.0) {
            return Err(Error::Domain(format!("row {i} has zero norm")));
        }
        let u = Mat::from_fn(x.rows(), x.cols(), |i, j| x[(i, j)] / norms[i]);
        Ok(Self { u, norms })
    }

    /// Cosine matrix and the shifted exponentials `exp((cos − 1)/τ)`.
    fn kernel(&self, tau: f64) -> Result<(Mat, Mat)> {
        let cos = self.u.matmul_t(&self.u)?.map(|c| c.clamp(-1.0, 1.0));
        let e = cos.map(|c| ((c - 1.0) / tau).exp());
        Ok((cos, e))
    }

    /// Pull a gradient on the cosine logits `cos/τ` back to the raw rows.
    fn backward(&self, d_logits: &Mat, tau: f64) -> Result<Mat> {
        let sym = d_logits.add(&d_logits.transpose())?.scale(1.0 / tau);
        let du = sym.matmul(&self.u)?;
        let mut dx = Mat::zeros(du.rows(), du.cols());
        for i in 0..du.rows() {
            let ui = self.u.row(i);
            let proj = dot(ui, du.row(i));
            for (d, out) in dx.row_mut(i).iter_mut().enumerate() {
                *out = (du[(i, d)] - ui[d] * proj) / self.norms[i];
            }
        }
        Ok(dx)
    }
}

struct AttentionGrad {
    d_h: Mat,
    d_s: Mat,
}

fn attention_core(
    h: &Mat,
    s_att: &Mat,
    r: &[Vec<usize>],
    tau: f64,
    want_grad: bool,
) -> Result<(LossValue, Option<AttentionGrad>)> {
    let n = s_att.rows();
    shape_check(s_att.is_square(), || format!("S^att must be square, got {:?}", s_att.shape()))?;
    shape_check(h.rows() == 2 * n, || format!("expected {} stacked rows, got {}", 2 * n, h.rows()))?;
    shape_check(r.len() == n, || format!("expected {n} same-cluster sets, got {}", r.len()))?;
    if n < 2 {
        return Err(Error::Domain("attention loss needs at least two samples".into()));
    }
    let unit = UnitRows::new(h)?;
    let (_, e) = unit.kernel(tau)?;
    let w = 1.0 / (2 * n) as f64;
    let mut terms = vec![0.0; 2 * n];
    let mut d_c = Mat::zeros(2 * n, 2 * n);
    let mut d_s = Mat::zeros(n, n);
    for i in 0..n {
        for a in [i, n + i] {
            let ea = e.row(a);
            let num: f64 = r[i].iter().map(|&j| s_att[(i, j)] * (ea[j] + ea[n + j])).sum();
            let den: f64 = ea.iter().enumerate().filter(|&(v, _)| v != i).map(|(_, x)| x).sum();
            terms[a] = den.ln() - num.ln();
            if !want_grad {
                continue;
            }
            for &j in &r[i] {
                d_c[(a, j)] -= w * s_att[(i, j)] * ea[j] / num;
                d_c[(a, n + j)] -= w * s_att[(i, j)] * ea[n + j] / num;
                d_s[(i, j)] -= w * (ea[j] + ea[n + j]) / num;
            }
            for v in (0..2 * n).filter(|&v| v != i) {
                d_c[(a, v)] += w * ea[v] / den;
            }
        }
    }
    let loss = LossValue::from_terms(terms)?;
    let grad = if want_grad { Some(AttentionGrad { d_h: unit.backward(&d_c, tau)?, d_s }) } else { None };
    Ok((loss, grad))
}

/// Attention loss over `H = [h1; h2]`, weighting positives by `S^att`.
///
/// `r[i]` lists the samples sharing `i`'s pseudo-label (including `i`).
pub fn attention_loss(h1: &Mat, h2: &Mat, s_att: &Mat, r: &[Vec<usize>], temps: &Temperatures) -> Result<LossValue> {
    temps.validate()?;
    Ok(attention_core(&stack(h1, h2)?, s_att, r, temps.tau_a, false)?.0)
}

/// `L_P = −(1/N) Σ_i (log p1[i, ŷ_i] + log p2[i, ŷ_i])`.
pub fn cluster_loss(y_hat: &PseudoLabels, p1: &Mat, p2: &Mat) -> Result<LossValue> {
    shape_check(p1.shape() == p2.shape(), || format!("views differ in shape: {:?} vs {:?}", p1.shape(), p2.shape()))?;
    shape_check(p1.rows() == y_hat.len() && p1.cols() == y_hat.k(), || {
        format!("predictions are {:?}, labels cover {} samples of {} clusters", p1.shape(), y_hat.len(), y_hat.k())
    })?;
    if y_hat.is_empty() {
        return Err(Error::Argument("cluster loss of an empty batch".into()));
    }
    let terms = y_hat
        .labels()
        .iter()
        .enumerate()
        .map(|(i, &y)| -(p1[(i, y)].max(PROB_FLOOR).ln() + p2[(i, y)].max(PROB_FLOOR).ln()))
        .collect();
    LossValue::from_terms(terms)
}

fn instance_core(x: &Mat, tau: f64, want_grad: bool) -> Result<(LossValue, Option<Mat>)> {
    let n = x.rows() / 2;
    if n < 2 {
        return Err(Error::Domain("instance loss needs at least two samples".into()));
    }
    let unit = UnitRows::new(x)?;
    let (cos, e) = unit.kernel(tau)?;
    let w = 1.0 / (2 * n) as f64;
    let mut terms = vec![0.0; 2 * n];
    let mut d_c = Mat::zeros(2 * n, 2 * n);
    for a in 0..2 * n {
        let i = a % n;
        let partner = (a + n) % (2 * n);
        let ea = e.row(a);
        let excluded = |v: usize| v == i || v == n + i;
        let den: f64 = (0..2 * n).filter(|&v| !excluded(v)).map(|v| ea[v]).sum();
        terms[a] = den.ln() - (cos[(a, partner)] - 1.0) / tau;
        if want_grad {
            d_c[(a, partner)] -= w;
            for v in (0..2 * n).filter(|&v| !excluded(v)) {
                d_c[(a, v)] += w * ea[v] / den;
            }
        }
    }
    let loss = LossValue::from_terms(terms)?;
    let grad = if want_grad { Some(unit.backward(&d_c, tau)?) } else { None };
    Ok((loss, grad))
}

/// Instance contrastive loss; the positive pair is left out of the
/// denominator.
pub fn instance_loss(z1: &Mat, z2: &Mat, temps: &Temperatures) -> Result<LossValue> {
    temps.validate()?;
    Ok(instance_core(&stack(z1, z2)?, temps.tau_i, false)?.0)
}

pub fn combined_loss(stage: Stage, l_a: f64, l_p: f64, l_i: f64, lambda: f64) -> f64 {
    match stage {
        Stage::Warmup => l_a + lambda * l_i,
        Stage::Train => l_a + l_p + lambda * l_i,
    }
}

/// Gradient of the attention loss with respect to the attention parameters,
/// flowing through both the aggregated rows and `S^att`.
pub fn attention_loss_with_grad(
    z1: &Mat,
    z2: &Mat,
    params: &AttentionParams,
    r: &[Vec<usize>],
    temps: &Temperatures,
) -> Result<(LossValue, AttentionParams)> {
    temps.validate()?;
    let views = [attention_forward(z1, params)?, attention_forward(z2, params)?];
    let s_att = attention_similarity(&views[0].s_view, &views[1].s_view)?;
    let h = stack(&views[0].h_view, &views[1].h_view)?;
    let (loss, grad) = attention_core(&h, &s_att, r, temps.tau_a, true)?;
    let AttentionGrad { d_h, d_s } = grad.expect("gradient requested");
    let (dh1, dh2) = split(&d_h);

    let d = params.dim();
    let mut g1 = Mat::zeros(d, d);
    let mut g2 = Mat::zeros(d, d);
    let mut gt = Mat::zeros(d, d);
    for (z, view, dh) in [(z1, &views[0], &dh1), (z2, &views[1], &dh2)] {
        // H = S T
        let mut ds = dh.matmul_t(&view.t_view)?;
        ds.axpy(0.5, &d_s)?;
        let dt = view.s_view.t_matmul(dh)?;
        // row softmax backward
        let mut dlog = Mat::zeros(ds.rows(), ds.cols());
        for i in 0..ds.rows() {
            let s = view.s_view.row(i);
            let inner = dot(s, ds.row(i));
            for (j, out) in dlog.row_mut(i).iter_mut().enumerate() {
                *out = s[j] * (ds[(i, j)] - inner) / params.scale();
            }
        }
        let k1 = z.matmul(&params.w_k1)?;
        let k2 = z.matmul(&params.w_k2)?;
        let dk1 = dlog.matmul(&k2)?;
        let dk2 = dlog.t_matmul(&k1)?;
        g1.axpy(1.0, &z.t_matmul(&dk1)?)?;
        g2.axpy(1.0, &z.t_matmul(&dk2)?)?;
        gt.axpy(1.0, &z.t_matmul(&dt)?)?;
    }
    Ok((loss, AttentionParams { w_k1: g1, w_k2: g2, w_t: gt }))
}

/// Instance loss and its gradients with respect to both views.
pub fn instance_loss_with_grad(z1: &Mat, z2: &Mat, temps: &Temperatures) -> Result<(LossValue, Mat, Mat)> {
    temps.validate()?;
    let (loss, grad) = instance_core(&stack(z1, z2)?, temps.tau_i, true)?;
    let (d1, d2) = split(&grad.expect("gradient requested"));
    Ok((loss, d1, d2))
}

/// Cluster loss evaluated on softmax logits, with gradients `(P − Ŷ)/N` per view.
pub fn cluster_loss_with_grad(y_hat: &PseudoLabels, logits1: &Mat, logits2: &Mat) -> Result<(LossValue, Mat, Mat)> {
    let p1 = softmax_rows(logits1);
    let p2 = softmax_rows(logits2);
    let loss = cluster_loss(y_hat, &p1, &p2)?;
    let n = y_hat.len() as f64;
    let grad = |p: Mat| {
        let mut g = p.scale(1.0 / n);
        for (i, &y) in y_hat.labels().iter().enumerate() {
            g[(i, y)] -= 1.0 / n;
        }
        g
    };
    Ok((loss, grad(p1), grad(p2)))
}

/// Central differences `(L(θ+h e_k) − L(θ−h e_k)) / 2h`.
pub fn fd_gradient(loss_eval: impl Fn(&[f64]) -> Result<f64>, theta: &[f64], step: f64) -> Result<RVec> {
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::Argument(format!("step must be positive, got {step}")));
    }
    let mut probe = theta.to_vec();
    let mut out = RVec::zeros(theta.len());
    for k in 0..theta.len() {
        probe[k] = theta[k] + step;
        let up = loss_eval(&probe)?;
        probe[k] = theta[k] - step;
        let down = loss_eval(&probe)?;
        probe[k] = theta[k];
        if !(up.is_finite() && down.is_finite()) {
            return Err(Error::Numeric(format!("loss is not finite around coordinate {k}")));
        }
        out[k] = (up - down) / (2.0 * step);
    }
    Ok(out)
}
