use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::PseudoLabels;
use crate::linalg::Mat;

const MAX_LLOYD_ITERS: usize = 300;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KMeansFit {
    pub labels: PseudoLabels,
    pub centroids: Mat,
    pub inertia: f64,
    pub iterations: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(x: &[f64], centroids: &Mat) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, row) in centroids.row_iter().enumerate() {
        let d = sq_dist(x, row);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn plus_plus_init(v: &Mat, k: usize, rng: &mut ChaCha8Rng) -> Mat {
    let n = v.rows();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = v.row_iter().map(|x| sq_dist(x, v.row(chosen[0]))).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random_range(0.0..total);
            let mut acc = 0.0;
            let mut pick = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if acc > target && d > 0.0 {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            // all remaining mass sits on chosen points
            (0..n).find(|i| !chosen.contains(i)).unwrap_or(0)
        };
        chosen.push(pick);
        for (i, x) in v.row_iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(x, v.row(pick)));
        }
    }
    v.select_rows(&chosen)
}

fn assign(v: &Mat, centroids: &Mat, labels: &mut [usize]) -> (bool, f64) {
    let mut changed = false;
    let mut inertia = 0.0;
    for (i, x) in v.row_iter().enumerate() {
        let (c, d) = nearest(x, centroids);
        changed |= labels[i] != c;
        labels[i] = c;
        inertia += d;
    }
    (changed, inertia)
}

/// Move the point farthest from its centroid into each empty cluster.
fn fill_empty(v: &Mat, centroids: &mut Mat, labels: &mut [usize], k: usize) {
    loop {
        let mut counts = vec![0usize; k];
        for &l in labels.iter() {
            counts[l] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else { return };
        let donor = (0..v.rows())
            .filter(|&i| counts[labels[i]] > 1)
            .max_by(|&i, &j| {
                let di = sq_dist(v.row(i), centroids.row(labels[i]));
                let dj = sq_dist(v.row(j), centroids.row(labels[j]));
                di.total_cmp(&dj).then(j.cmp(&i))
            })
            .expect("n >= k leaves a cluster with two members");
        labels[donor] = empty;
        centroids.row_mut(empty).copy_from_slice(v.row(donor));
    }
}

fn update_centroids(v: &Mat, labels: &[usize], centroids: &mut Mat) {
    let k = centroids.rows();
    let mut sums = Mat::zeros(k, v.cols());
    let mut counts = vec![0usize; k];
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        for (s, x) in sums.row_mut(l).iter_mut().zip(v.row(i)) {
            *s += x;
        }
    }
    for c in 0..k {
        if counts[c] > 0 {
            for (dst, s) in centroids.row_mut(c).iter_mut().zip(sums.row(c)) {
                *dst = s / counts[c] as f64;
            }
        }
    }
}

/// k-means++ seeding followed by Lloyd iterations.
pub fn kmeans_fit(v: &Mat, k: usize, seed: u64) -> Result<KMeansFit> {
    let n = v.rows();
    if k == 0 || n < k {
        return Err(Error::Argument(format!("k-means needs 1 <= k <= N, got k={k}, N={n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus_init(v, k, &mut rng);
    let mut labels = vec![usize::MAX; n];
    let mut iterations = 0;
    for it in 0..MAX_LLOYD_ITERS {
        iterations = it + 1;
        let (changed, _) = assign(v, &centroids, &mut labels);
        fill_empty(v, &mut centroids, &mut labels, k);
        if !changed && it > 0 {
            break;
        }
        update_centroids(v, &labels, &mut centroids);
    }
    let inertia = labels.iter().enumerate().map(|(i, &l)| sq_dist(v.row(i), centroids.row(l))).sum();
    Ok(KMeansFit { labels: PseudoLabels::new(labels, k)?, centroids, inertia, iterations })
}

pub fn kmeans(v: &Mat, k: usize, seed: u64) -> Result<PseudoLabels> {
    Ok(kmeans_fit(v, k, seed)?.labels)
}
