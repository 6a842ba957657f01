use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::data::Dataset;
use super::kmeans::kmeans;
use crate::error::{shape_check, Error, Result};
use crate::labels::{labels_from_plan, labels_from_prediction, same_cluster_sets, PseudoLabels};
use crate::linalg::{softmax_rows, Mat};
use crate::losses::{
    attention_loss, attention_loss_with_grad, cluster_loss, cluster_loss_with_grad, combined_loss, fd_gradient,
    instance_loss, instance_loss_with_grad, Stage, Temperatures,
};
use crate::metrics::{accuracy, nmi, LabelPair};
use crate::similarity::{
    attention_forward, attention_similarity, combine_similarity, cosine_matrix, AttentionOut, AttentionParams,
};
use crate::solver::{caot_solve, CaotParams, OtProblem};

/// Projection head, clustering head and attention network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Heads {
    pub g_z: Mat,
    pub g_p: Mat,
    pub g_h: AttentionParams,
}

impl Heads {
    /// Gaussian initialization with fan-in scaling.
    pub fn init(d1: usize, d2: usize, k: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut gauss = |r: usize, c: usize, scale: f64| {
            Mat::from_fn(r, c, |_, _| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z * scale
            })
        };
        let s1 = 1.0 / (d1 as f64).sqrt();
        let s2 = 1.0 / (d2 as f64).sqrt();
        let g_z = gauss(d1, d2, s1);
        let g_p = gauss(d1, k, s1);
        let g_h = AttentionParams::new(gauss(d2, d2, s2), gauss(d2, d2, s2), gauss(d2, d2, s2))?;
        Ok(Self { g_z, g_p, g_h })
    }

    pub fn k(&self) -> usize {
        self.g_p.cols()
    }

    pub fn is_finite(&self) -> bool {
        [&self.g_z, &self.g_p, &self.g_h.w_k1, &self.g_h.w_k2, &self.g_h.w_t].iter().all(|m| m.is_finite())
    }
}

/// The three views of one mini-batch.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchViews {
    pub v0: Mat,
    pub v1: Mat,
    pub v2: Mat,
}

impl BatchViews {
    pub fn select(data: &Dataset, idx: &[usize]) -> Self {
        Self { v0: data.v0.select_rows(idx), v1: data.v1.select_rows(idx), v2: data.v2.select_rows(idx) }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Forward {
    pub z1: Mat,
    pub z2: Mat,
    pub p0: Mat,
    pub p1: Mat,
    pub p2: Mat,
    pub att1: AttentionOut,
    pub att2: AttentionOut,
}

pub fn forward_heads(views: &BatchViews, heads: &Heads) -> Result<Forward> {
    shape_check(views.v0.cols() == heads.g_z.rows(), || {
        format!("embeddings have dimension {}, heads expect {}", views.v0.cols(), heads.g_z.rows())
    })?;
    let z1 = views.v1.matmul(&heads.g_z)?;
    let z2 = views.v2.matmul(&heads.g_z)?;
    let p0 = softmax_rows(&views.v0.matmul(&heads.g_p)?);
    let p1 = softmax_rows(&views.v1.matmul(&heads.g_p)?);
    let p2 = softmax_rows(&views.v2.matmul(&heads.g_p)?);
    let att1 = attention_forward(&z1, &heads.g_h)?;
    let att2 = attention_forward(&z2, &heads.g_h)?;
    Ok(Forward { z1, z2, p0, p1, p2, att1, att2 })
}

/// Semantic similarity `S^cos + S^att` of one forward pass.
pub fn semantic_similarity(fw: &Forward) -> Result<Mat> {
    let s_att = attention_similarity(&fw.att1.s_view, &fw.att2.s_view)?;
    combine_similarity(&cosine_matrix(&fw.p0)?, &s_att)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GradMode {
    Fd,
    Analytic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub e_total: usize,
    pub e_warm: usize,
    pub batch: usize,
    pub lambda: f64,
    pub temps: Temperatures,
    pub caot: CaotParams,
    pub lr: f64,
    pub seed: u64,
    pub grad_mode: GradMode,
    /// Output dimension of the projection head.
    pub d2: usize,
    /// Step used by finite-difference gradients.
    pub fd_step: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            e_total: 200,
            e_warm: 60,
            batch: 200,
            lambda: 10.0,
            temps: Temperatures::default(),
            caot: CaotParams::default(),
            lr: 0.05,
            seed: 0,
            grad_mode: GradMode::Analytic,
            d2: 8,
            fd_step: 1e-5,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.e_warm > self.e_total {
            return Err(Error::Argument(format!("e_warm ({}) exceeds e_total ({})", self.e_warm, self.e_total)));
        }
        if self.batch < 2 {
            return Err(Error::Argument(format!("batch must be at least 2, got {}", self.batch)));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::Argument(format!("lambda must be non-negative, got {}", self.lambda)));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::Argument(format!("lr must be positive, got {}", self.lr)));
        }
        if !(self.fd_step.is_finite() && self.fd_step > 0.0) {
            return Err(Error::Argument(format!("fd_step must be positive, got {}", self.fd_step)));
        }
        if self.d2 == 0 {
            return Err(Error::Argument("d2 must be positive".into()));
        }
        self.temps.validate()?;
        self.caot.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelSource {
    Kmeans,
    Caot,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub stage: Stage,
    pub label_source: LabelSource,
    pub l_a: f64,
    pub l_p: Option<f64>,
    pub l_i: f64,
    pub total: f64,
    pub pseudo_label_acc: Option<f64>,
    pub objective_trace: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingSnapshot {
    pub epoch: usize,
    pub batch: Vec<usize>,
    pub q: Mat,
    pub b: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub epochs: Vec<EpochRecord>,
    pub kmeans_acc: Option<f64>,
    pub final_acc: Option<f64>,
    pub final_nmi: Option<f64>,
    pub labels: Vec<usize>,
    pub snapshots: Vec<CouplingSnapshot>,
}

/// Cycles through shuffled passes over the data, one batch per call.
struct BatchSampler {
    order: Vec<usize>,
    pos: usize,
    batch: usize,
    rng: ChaCha8Rng,
}

impl BatchSampler {
    fn new(n: usize, batch: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        Self { order, pos: 0, batch: batch.min(n), rng }
    }

    fn next(&mut self) -> Vec<usize> {
        if self.pos + self.batch > self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.pos = 0;
        }
        let out = self.order[self.pos..self.pos + self.batch].to_vec();
        self.pos += self.batch;
        out
    }
}

struct Step {
    l_a: f64,
    l_p: Option<f64>,
    l_i: f64,
    d_h: AttentionParams,
    d_z: Mat,
    d_p: Option<Mat>,
}

fn analytic_step(views: &BatchViews, fw: &Forward, heads: &Heads, y: &PseudoLabels, stage: Stage, cfg: &RunConfig) -> Result<Step> {
    let r = same_cluster_sets(y);
    let (la, d_h) = attention_loss_with_grad(&fw.z1, &fw.z2, &heads.g_h, &r, &cfg.temps)?;
    let (li, dz1, dz2) = instance_loss_with_grad(&fw.z1, &fw.z2, &cfg.temps)?;
    let d_z = views.v1.t_matmul(&dz1)?.add(&views.v2.t_matmul(&dz2)?)?;
    let (l_p, d_p) = match stage {
        Stage::Warmup => (None, None),
        Stage::Train => {
            let l1 = views.v1.matmul(&heads.g_p)?;
            let l2 = views.v2.matmul(&heads.g_p)?;
            let (lp, dl1, dl2) = cluster_loss_with_grad(y, &l1, &l2)?;
            (Some(lp.value), Some(views.v1.t_matmul(&dl1)?.add(&views.v2.t_matmul(&dl2)?)?))
        }
    };
    Ok(Step { l_a: la.value, l_p, l_i: li.value, d_h, d_z, d_p })
}

fn fd_step(views: &BatchViews, fw: &Forward, heads: &Heads, y: &PseudoLabels, stage: Stage, cfg: &RunConfig) -> Result<Step> {
    let r = same_cluster_sets(y);
    let d2 = heads.g_h.dim();
    let temps = cfg.temps;
    let attention_at = |w: &AttentionParams| -> Result<f64> {
        let o1 = attention_forward(&fw.z1, w)?;
        let o2 = attention_forward(&fw.z2, w)?;
        let s = attention_similarity(&o1.s_view, &o2.s_view)?;
        Ok(attention_loss(&o1.h_view, &o2.h_view, &s, &r, &temps)?.value)
    };
    let l_a = attention_at(&heads.g_h)?;
    let mut theta = Vec::with_capacity(3 * d2 * d2);
    for m in [&heads.g_h.w_k1, &heads.g_h.w_k2, &heads.g_h.w_t] {
        theta.extend_from_slice(m.as_slice());
    }
    let unpack = |th: &[f64], i: usize| Mat::new(d2, d2, th[i * d2 * d2..(i + 1) * d2 * d2].to_vec());
    let g = fd_gradient(|th| attention_at(&AttentionParams::new(unpack(th, 0)?, unpack(th, 1)?, unpack(th, 2)?)?), &theta, cfg.fd_step)?;
    let d_h = AttentionParams { w_k1: unpack(&g, 0)?, w_k2: unpack(&g, 1)?, w_t: unpack(&g, 2)? };

    let (d1, dz) = heads.g_z.shape();
    let instance_at = |gz: &Mat| -> Result<f64> {
        Ok(instance_loss(&views.v1.matmul(gz)?, &views.v2.matmul(gz)?, &temps)?.value)
    };
    let l_i = instance_at(&heads.g_z)?;
    let gz = fd_gradient(|th| instance_at(&Mat::new(d1, dz, th.to_vec())?), heads.g_z.as_slice(), cfg.fd_step)?;
    let d_z = Mat::new(d1, dz, gz.into_vec())?;

    let (l_p, d_p) = match stage {
        Stage::Warmup => (None, None),
        Stage::Train => {
            let k = heads.k();
            let cluster_at = |gp: &Mat| -> Result<f64> {
                let p1 = softmax_rows(&views.v1.matmul(gp)?);
                let p2 = softmax_rows(&views.v2.matmul(gp)?);
                Ok(cluster_loss(y, &p1, &p2)?.value)
            };
            let lp = cluster_loss(y, &fw.p1, &fw.p2)?.value;
            let gp = fd_gradient(|th| cluster_at(&Mat::new(d1, k, th.to_vec())?), heads.g_p.as_slice(), cfg.fd_step)?;
            (Some(lp), Some(Mat::new(d1, k, gp.into_vec())?))
        }
    };
    Ok(Step { l_a, l_p, l_i, d_h, d_z, d_p })
}

fn descend(m: &mut Mat, grad: &Mat, lr: f64) -> Result<()> {
    m.axpy(-lr, grad)
}

/// Labels of `P⁽⁰⁾ = softmax(V⁽⁰⁾ g_p)` over the whole dataset.
pub fn predict(data: &Dataset, heads: &Heads) -> Result<PseudoLabels> {
    Ok(labels_from_prediction(&softmax_rows(&data.v0.matmul(&heads.g_p)?)))
}

fn batch_acc(data: &Dataset, idx: &[usize], labels: &PseudoLabels) -> Option<f64> {
    let y = data.y_true.as_ref()?;
    let truth: Vec<usize> = idx.iter().map(|&i| y[i]).collect();
    Some(accuracy(&LabelPair::new(&truth, labels.labels()).ok()?))
}

/// Full training run; returns the trained heads alongside the report.
pub fn train(data: &Dataset, cfg: &RunConfig) -> Result<(Heads, RunReport)> {
    data.validate()?;
    cfg.validate()?;
    let n = data.n();
    if n < 2 {
        return Err(Error::Argument("training needs at least two samples".into()));
    }
    let mut heads = Heads::init(data.dim(), cfg.d2, data.k, cfg.seed)?;
    let mut sampler = BatchSampler::new(n, cfg.batch, cfg.seed.wrapping_add(1));
    let km = kmeans(&data.v0, data.k, cfg.seed)?;
    let kmeans_acc = data
        .y_true
        .as_ref()
        .map(|y| accuracy(&LabelPair::new(y, km.labels()).expect("validated lengths")));

    let mut epochs = Vec::with_capacity(cfg.e_total);
    let mut snapshots = Vec::new();
    for epoch in 0..cfg.e_total {
        let idx = sampler.next();
        let views = BatchViews::select(data, &idx);
        let fw = forward_heads(&views, &heads)?;
        let stage = if epoch < cfg.e_warm { Stage::Warmup } else { Stage::Train };
        let (labels, source, trace) = match stage {
            Stage::Warmup => (km.subset(&idx), LabelSource::Kmeans, None),
            Stage::Train => {
                let s = semantic_similarity(&fw)?;
                let plan = caot_solve(&OtProblem::with_uniform_marginal(fw.p0.clone(), s)?, &cfg.caot)?;
                let labels = labels_from_plan(&plan.q);
                if epoch == cfg.e_warm || epoch + 1 == cfg.e_total {
                    snapshots.push(CouplingSnapshot { epoch, batch: idx.clone(), q: plan.q.clone(), b: plan.b.to_vec() });
                }
                (labels, LabelSource::Caot, Some(plan.objective_trace))
            }
        };
        let step = match cfg.grad_mode {
            GradMode::Analytic => analytic_step(&views, &fw, &heads, &labels, stage, cfg)?,
            GradMode::Fd => fd_step(&views, &fw, &heads, &labels, stage, cfg)?,
        };
        let total = combined_loss(stage, step.l_a, step.l_p.unwrap_or(0.0), step.l_i, cfg.lambda);
        if !total.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite loss at epoch {epoch}: L_A={}, L_P={:?}, L_I={}",
                step.l_a, step.l_p, step.l_i
            )));
        }
        descend(&mut heads.g_h.w_k1, &step.d_h.w_k1, cfg.lr)?;
        descend(&mut heads.g_h.w_k2, &step.d_h.w_k2, cfg.lr)?;
        descend(&mut heads.g_h.w_t, &step.d_h.w_t, cfg.lr)?;
        descend(&mut heads.g_z, &step.d_z.scale(cfg.lambda), cfg.lr)?;
        if let Some(d_p) = &step.d_p {
            descend(&mut heads.g_p, d_p, cfg.lr)?;
        }
        if !heads.is_finite() {
            return Err(Error::Numeric(format!("parameters diverged at epoch {epoch}")));
        }
        epochs.push(EpochRecord {
            epoch,
            stage,
            label_source: source,
            l_a: step.l_a,
            l_p: step.l_p,
            l_i: step.l_i,
            total,
            pseudo_label_acc: batch_acc(data, &idx, &labels),
            objective_trace: trace,
        });
    }

    let labels = predict(data, &heads)?.into_vec();
    let (final_acc, final_nmi) = match &data.y_true {
        Some(y) => {
            let pair = LabelPair::new(y, &labels)?;
            (Some(accuracy(&pair)), Some(nmi(&pair)))
        }
        None => (None, None),
    };
    let report = RunReport { config: cfg.clone(), epochs, kmeans_acc, final_acc, final_nmi, labels, snapshots };
    Ok((heads, report))
}

pub fn run_pota(data: &Dataset, cfg: &RunConfig) -> Result<RunReport> {
    Ok(train(data, cfg)?.1)
}
