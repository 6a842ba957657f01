//! Adaptive cluster marginal: the closed-form `b(h)` given the column duals
//! and the scalar root `h` enforcing `Σ b = 1`.

use crate::error::{Error, Result};
use crate::linalg::RVec;

/// Residual tolerance the root solve aims for; well inside the 1e-8 contract.
const ROOT_TOL: f64 = 1e-13;
const MAX_BISECTIONS: usize = 200;

/// Stationary cluster marginal for fixed duals `g` and multiplier `h`.
///
/// Each `b_j` is the root in (0, 1) of
/// `(g_j − h) b² − (g_j − h + 2ε2) b + ε2 = 0`, i.e.
/// `((g_j − h) + 2ε2 − √Δ_j) / (2(g_j − h))`. It is evaluated through the
/// rationalized form `2ε2 / ((g_j − h) + 2ε2 + √Δ_j)`, which has no
/// cancellation for large `g_j − h` and takes the limit value 1/2 at
/// `g_j = h`.
pub fn b_of_h(g: &[f64], h: f64, eps2: f64) -> RVec {
    g.iter().map(|&gj| b_single(gj - h, eps2)).collect()
}

#[inline]
fn b_single(x: f64, eps2: f64) -> f64 {
    let two_eps = 2.0 * eps2;
    two_eps / ((x + two_eps) + x.hypot(two_eps))
}

/// `d b_j / d h`, strictly positive.
#[inline]
fn db_dh(x: f64, b: f64, eps2: f64) -> f64 {
    b * (1.0 - b) / (2.0 * eps2 + x * (1.0 - 2.0 * b))
}

fn residual(g: &[f64], h: f64, eps2: f64) -> f64 {
    g.iter().map(|&gj| b_single(gj - h, eps2)).sum::<f64>() - 1.0
}

fn residual_and_slope(g: &[f64], h: f64, eps2: f64) -> (f64, f64) {
    let mut sum = 0.0;
    let mut slope = 0.0;
    for &gj in g {
        let x = gj - h;
        let b = b_single(x, eps2);
        sum += b;
        slope += db_dh(x, b, eps2);
    }
    (sum - 1.0, slope)
}

/// Finds `h*` with `Σ_j b_j(h*) = 1`.
///
/// The residual is strictly increasing in `h`, so a bracket always exists
/// when `K ≥ 2`. Up to `iters` Newton steps are taken from `h0`; a step that
/// leaves the bracket or does not shrink the residual is replaced by a
/// bisection. If the Newton budget runs out first, bisection finishes.
pub fn newton_h(g: &[f64], eps2: f64, h0: f64, iters: usize) -> Result<f64> {
    if g.is_empty() {
        return Err(Error::Argument("newton_h needs at least one dual value".into()));
    }
    if !(eps2 > 0.0) || !h0.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain(format!(
            "newton_h needs finite inputs and eps2 > 0 (eps2 = {eps2}, h0 = {h0})"
        )));
    }

    let k = g.len() as f64;
    let gmin = g.iter().copied().fold(f64::INFINITY, f64::min);
    let gmax = g.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // At h = gmin − 2Kε2 every b_j < 1/K; at h = gmax + 2ε2 every b_j > 1/2.
    let mut lo = h0.min(gmin - 2.0 * k * eps2);
    let mut hi = h0.max(gmax + 2.0 * eps2);
    let (r_lo, r_hi) = (residual(g, lo, eps2), residual(g, hi, eps2));
    if !(r_lo < 0.0 && r_hi > 0.0) {
        return Err(Error::Numeric(format!(
            "no bracket for the marginal root: residual {r_lo:.3e} at h = {lo}, {r_hi:.3e} at h = {hi}"
        )));
    }

    let mut h = h0;
    let (mut r, mut slope) = residual_and_slope(g, h, eps2);
    for step in 0..iters + MAX_BISECTIONS {
        if r.abs() <= ROOT_TOL {
            break;
        }
        if r < 0.0 {
            lo = h;
        } else {
            hi = h;
        }
        let mut newton = None;
        if step < iters && slope > 0.0 {
            let candidate = h - r / slope;
            if candidate > lo && candidate < hi {
                let (rc, sc) = residual_and_slope(g, candidate, eps2);
                if rc.abs() < r.abs() {
                    newton = Some((candidate, rc, sc));
                }
            }
        }
        let (hn, rn, sn) = match newton {
            Some(accepted) => accepted,
            None => {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    // bracket is down to adjacent floats
                    break;
                }
                let (rm, sm) = residual_and_slope(g, mid, eps2);
                (mid, rm, sm)
            }
        };
        h = hn;
        r = rn;
        slope = sn;
    }

    if r.abs() < 1e-8 {
        Ok(h)
    } else {
        Err(Error::Numeric(format!(
            "marginal root did not converge: |Σb − 1| = {:.3e} at h = {h}",
            r.abs()
        )))
    }
}

/// Relaxation weight for the marginal update.
///
/// Feeding `b` back through `g_j = ε1 ln b_j − …` and then through `b(h)`
/// has local slope `−ε1 b(1−b)² / (ε2 (1 − 2b + 2b²))` per coordinate; when
/// its magnitude exceeds one the plain update oscillates. The weight keeps
/// the relaxed map contractive and is exactly 1 while the plain update is.
pub(crate) fn relaxation(b: &[f64], eps1: f64, eps2: f64) -> f64 {
    let rho = b
        .iter()
        .map(|&bj| bj * (1.0 - bj).powi(2) / (1.0 - 2.0 * bj + 2.0 * bj * bj))
        .fold(0.0, f64::max)
        * eps1
        / eps2;
    (1.5 / (1.0 + rho)).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Eq. 29 exactly as printed, with the minus root.
    fn b_printed(x: f64, eps2: f64) -> f64 {
        let delta = x * x + 4.0 * eps2 * eps2;
        (x + 2.0 * eps2 - delta.sqrt()) / (2.0 * x)
    }

    fn quadratic(x: f64, b: f64, eps2: f64) -> f64 {
        x * b * b - (x + 2.0 * eps2) * b + eps2
    }

    #[test]
    fn b_of_h_examples() {
        assert_eq!(b_of_h(&[0.0], 0.0, 3.0).as_ref(), &[0.5]);
        assert_eq!(b_of_h(&[2.5], 2.5, 0.03).as_ref(), &[0.5]);
        let b = b_of_h(&[1.0], 0.0, 1.0)[0];
        assert!((b - (3.0 - 5f64.sqrt()) / 2.0).abs() < 1e-15);
        assert!((b - 0.38197).abs() < 1e-5);
        assert!(quadratic(1.0, b, 1.0).abs() < 1e-12);
    }

    #[test]
    fn matches_printed_form_and_quadratic() {
        for &eps2 in &[0.03, 1.0, 100.0] {
            for &x in &[-500.0, -7.0, -0.3, 1e-6, 0.2, 4.0, 80.0] {
                let b = b_of_h(&[x], 0.0, eps2)[0];
                assert!(b > 0.0 && b < 1.0);
                assert!((b - b_printed(x, eps2)).abs() < 1e-9, "x={x} eps2={eps2}");
                assert!(quadratic(x, b, eps2).abs() < 1e-10 * (1.0 + x.abs()));
            }
        }
    }

    #[test]
    fn near_singular_is_continuous() {
        let at = b_of_h(&[0.0], 0.0, 1.0)[0];
        let near = b_of_h(&[1e-13], 0.0, 1.0)[0];
        assert!((at - near).abs() < 1e-12);
    }

    #[test]
    fn derivative_matches_differences() {
        let eps2 = 0.7;
        for &x in &[-3.0, -0.1, 0.0, 0.4, 5.0] {
            let b = b_single(x, eps2);
            let h = 1e-6;
            // b depends on g − h, so d/dh = −d/dx
            let fd = -(b_single(x + h, eps2) - b_single(x - h, eps2)) / (2.0 * h);
            assert!((db_dh(x, b, eps2) - fd).abs() < 1e-8);
        }
    }

    #[test]
    fn newton_examples() {
        let g = [0.0, 0.0];
        let h = newton_h(&g, 1.0, 1.0, 10).unwrap();
        let b = b_of_h(&g, h, 1.0);
        assert!((b[0] - 0.5).abs() < 1e-12 && (b[1] - 0.5).abs() < 1e-12);

        let g = [1.7; 4];
        let h = newton_h(&g, 0.3, 1.0, 10).unwrap();
        for bj in b_of_h(&g, h, 0.3).iter() {
            assert!((bj - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn newton_rejects_single_cluster() {
        assert!(matches!(newton_h(&[0.3], 1.0, 1.0, 10), Err(Error::Numeric(_))));
        assert!(matches!(newton_h(&[0.3, 1.0], 0.0, 1.0, 10), Err(Error::Domain(_))));
    }

    #[test]
    fn newton_survives_zero_budget_and_far_start() {
        let g = [-60.0, -3.0, 40.0];
        for &h0 in &[1.0, -1e4, 1e4] {
            let h = newton_h(&g, 0.03, h0, 0).unwrap();
            assert!((b_of_h(&g, h, 0.03).sum() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn relaxation_is_one_when_contractive() {
        assert_eq!(relaxation(&[0.2; 5], 1.0, 100.0), 1.0);
        assert_eq!(relaxation(&[0.2; 5], 1.0, 3.5), 1.0);
        let w = relaxation(&[0.2; 5], 1.0, 0.03);
        assert!(w > 0.0 && w < 0.5);
    }
}
