use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{shape_check, Error, Result};
use crate::linalg::{norm, Mat};

/// Anchor embeddings and their two augmented views.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub v0: Mat,
    pub v1: Mat,
    pub v2: Mat,
    pub y_true: Option<Vec<usize>>,
    pub k: usize,
}

impl Dataset {
    pub fn new(v0: Mat, v1: Mat, v2: Mat, y_true: Option<Vec<usize>>, k: usize) -> Result<Self> {
        let d = Self { v0, v1, v2, y_true, k };
        d.validate()?;
        Ok(d)
    }

    /// A dataset whose augmented views are the anchors themselves.
    pub fn without_views(v0: Mat, y_true: Option<Vec<usize>>, k: usize) -> Result<Self> {
        Self::new(v0.clone(), v0.clone(), v0, y_true, k)
    }

    pub fn validate(&self) -> Result<()> {
        shape_check(self.v1.shape() == self.v0.shape() && self.v2.shape() == self.v0.shape(), || {
            format!(
                "views must share a shape: {:?}, {:?}, {:?}",
                self.v0.shape(),
                self.v1.shape(),
                self.v2.shape()
            )
        })?;
        if self.k < 2 {
            return Err(Error::Argument(format!("need at least 2 clusters, got {}", self.k)));
        }
        if let Some(y) = &self.y_true {
            shape_check(y.len() == self.v0.rows(), || {
                format!("{} labels for {} samples", y.len(), self.v0.rows())
            })?;
        }
        for (name, v) in [("v0", &self.v0), ("v1", &self.v1), ("v2", &self.v2)] {
            if !v.is_finite() {
                return Err(Error::Domain(format!("{name} has non-finite entries")));
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.v0.rows()
    }

    pub fn dim(&self) -> usize {
        self.v0.cols()
    }

    /// Largest over smallest class size, when ground truth is known.
    pub fn imbalance_ratio(&self) -> Option<f64> {
        let y = self.y_true.as_ref()?;
        let mut counts = vec![0usize; y.iter().max().map_or(0, |m| m + 1)];
        for &l in y {
            counts[l] += 1;
        }
        let present: Vec<usize> = counts.into_iter().filter(|&c| c > 0).collect();
        let max = *present.iter().max()?;
        let min = *present.iter().min()?;
        Some(max as f64 / min as f64)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub k: usize,
    pub sizes: Vec<usize>,
    pub dim: usize,
    /// Distance between any two class centers.
    pub separation: f64,
    /// Within-class standard deviation of the anchors, and of the view
    /// perturbations around them.
    pub noise: f64,
    pub seed: u64,
}

/// Centers on a regular simplex, rotated randomly into `dim` dimensions.
fn simplex_centers(k: usize, dim: usize, separation: f64, rng: &mut ChaCha8Rng) -> Result<Mat> {
    if dim < k {
        return Err(Error::Argument(format!("dim must be at least k ({k}), got {dim}")));
    }
    // random orthonormal frame via Gram-Schmidt
    let mut frame: Vec<Vec<f64>> = Vec::with_capacity(k);
    while frame.len() < k {
        let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        for u in &frame {
            let p: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            for (x, y) in v.iter_mut().zip(u) {
                *x -= p * y;
            }
        }
        let nv = norm(&v);
        if nv > 1e-8 {
            frame.push(v.into_iter().map(|x| x / nv).collect());
        }
    }
    // e_c scaled so that ‖e_a − e_b‖ = separation, then centered
    let r = separation / std::f64::consts::SQRT_2;
    let mean = r / k as f64;
    Ok(Mat::from_fn(k, dim, |c, d| {
        frame.iter().enumerate().map(|(j, u)| (if j == c { r } else { 0.0 } - mean) * u[d]).sum()
    }))
}

/// Isotropic Gaussian mixture of scale `noise`; each view adds independent
/// Gaussian noise of the same scale to the anchors. Samples are ordered
/// class by class.
pub fn synth_dataset(spec: &SynthSpec) -> Result<Dataset> {
    let SynthSpec { k, ref sizes, dim, separation, noise, seed } = *spec;
    shape_check(sizes.len() == k, || format!("{} sizes given for {k} classes", sizes.len()))?;
    if !(separation.is_finite() && separation > 0.0) {
        return Err(Error::Argument(format!("separation must be positive, got {separation}")));
    }
    if !(noise.is_finite() && noise >= 0.0) {
        return Err(Error::Argument(format!("noise must be non-negative, got {noise}")));
    }
    if sizes.contains(&0) {
        return Err(Error::Argument("class sizes must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers = simplex_centers(k, dim, separation, &mut rng)?;
    let n: usize = sizes.iter().sum();
    let y: Vec<usize> = sizes.iter().enumerate().flat_map(|(c, &s)| std::iter::repeat_n(c, s)).collect();
    let mut gauss = |scale: f64| -> f64 {
        let z: f64 = StandardNormal.sample(&mut rng);
        scale * z
    };
    let v0 = Mat::from_fn(n, dim, |i, d| centers[(y[i], d)] + gauss(noise));
    let mut view = || Mat::from_fn(n, dim, |i, d| if noise == 0.0 { v0[(i, d)] } else { v0[(i, d)] + gauss(noise) });
    let v1 = view();
    let v2 = view();
    Dataset::new(v0, v1, v2, Some(y), k)
}
