use pota_core::linalg::{clamp_log, Mat, RVec, PROB_FLOOR};
use pota_core::solver::{
    b_of_h, caot_solve, dual_update, grad_f, inner_solve, newton_h, objective, sinkhorn_fixed,
    CaotParams, OtProblem,
};
use pota_core::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_probs(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Mat {
    let mut m = Mat::from_fn(n, k, |_, _| rng.random_range(0.05..1.0));
    for i in 0..n {
        let total: f64 = m.row(i).iter().sum();
        m.row_mut(i).iter_mut().for_each(|v| *v /= total);
    }
    m
}

fn random_mat(rng: &mut ChaCha8Rng, n: usize, k: usize, lo: f64, hi: f64) -> Mat {
    Mat::from_fn(n, k, |_, _| rng.random_range(lo..hi))
}

/// f(Q) = ⟨Q, −log P⟩ − ε3 ⟨S, QQᵀ⟩, written out with explicit loops.
fn f_of_q(q: &Mat, p: &Mat, s: &Mat, eps3: f64) -> f64 {
    let (n, k) = q.shape();
    let mut linear = 0.0;
    for i in 0..n {
        for j in 0..k {
            linear -= q[(i, j)] * p[(i, j)].max(PROB_FLOOR).ln();
        }
    }
    let mut quad = 0.0;
    for i in 0..n {
        for l in 0..n {
            let qq: f64 = (0..k).map(|j| q[(i, j)] * q[(l, j)]).sum();
            quad += s[(i, l)] * qq;
        }
    }
    linear - eps3 * quad
}

#[test]
fn grad_f_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let (n, k) = (5, 3);
        let p = random_probs(&mut rng, n, k);
        let s = random_mat(&mut rng, n, n, -1.0, 2.0);
        let q = random_mat(&mut rng, n, k, 0.0, 0.2);
        let eps3 = rng.random_range(0.5..30.0);
        let grad = grad_f(&q, &p, &s, eps3).unwrap();
        let step = 1e-6;
        for i in 0..n {
            for j in 0..k {
                let mut plus = q.clone();
                plus[(i, j)] += step;
                let mut minus = q.clone();
                minus[(i, j)] -= step;
                let fd = (f_of_q(&plus, &p, &s, eps3) - f_of_q(&minus, &p, &s, eps3)) / (2.0 * step);
                let rel = (grad[(i, j)] - fd).abs() / fd.abs().max(1.0);
                assert!(rel < 1e-6, "entry ({i},{j}): analytic {} fd {fd}", grad[(i, j)]);
            }
        }
    }
}

#[test]
fn dual_updates_reach_both_marginals() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let m = random_mat(&mut rng, 4, 3, 0.0, 3.0);
    let a = RVec::from(vec![0.1, 0.2, 0.3, 0.4]);
    let b = RVec::from(vec![0.5, 0.3, 0.2]);
    let eps1 = 1.0;
    let (mut f, mut g) = (RVec::zeros(4), RVec::zeros(3));
    for _ in 0..200 {
        (f, g) = dual_update(&m, &f, &g, &b, &a, eps1).unwrap();
    }
    let q = Mat::from_fn(4, 3, |i, j| ((f[i] + g[j] - m[(i, j)]) / eps1).exp());
    assert!(q.row_sums().max_abs_diff(&a) < 1e-8);
    assert!(q.col_sums().max_abs_diff(&b) < 1e-8);
}

#[test]
fn dual_update_checks_lengths() {
    let m = Mat::zeros(3, 2);
    let err = dual_update(&m, &[0.0; 2], &[0.0; 2], &[0.5; 2], &[0.3; 3], 1.0).unwrap_err();
    assert!(matches!(err, Error::Argument(_)));
}

/// Residual of Σ b(h) − 1 computed from the printed (unrationalized) formula.
fn printed_residual(g: &[f64], h: f64, eps2: f64) -> f64 {
    g.iter()
        .map(|&gj| {
            let x = gj - h;
            if x.abs() < 1e-12 {
                0.5
            } else {
                (x + 2.0 * eps2 - (x * x + 4.0 * eps2 * eps2).sqrt()) / (2.0 * x)
            }
        })
        .sum::<f64>()
        - 1.0
}

fn bisection_oracle(g: &[f64], eps2: f64) -> f64 {
    let (mut lo, mut hi) = (-1e6, 1e6);
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if printed_residual(g, mid, eps2) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn newton_three_clusters_agrees_with_bisection() {
    let g = [0.0, 1.0, 2.0];
    let h = newton_h(&g, 1.0, 1.0, 10).unwrap();
    let oracle = bisection_oracle(&g, 1.0);
    assert!((h - oracle).abs() < 1e-10, "newton {h} bisection {oracle}");
    let b_newton = b_of_h(&g, h, 1.0);
    let b_oracle = b_of_h(&g, oracle, 1.0);
    assert!(b_newton.max_abs_diff(&b_oracle) < 1e-8);
    assert!((b_newton.sum() - 1.0).abs() < 1e-8);
}

#[test]
fn b_of_h_satisfies_the_stationarity_quadratic() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..200 {
        let eps2 = [0.03, 1.0, 100.0][rng.random_range(0..3)];
        let g: Vec<f64> = (0..6).map(|_| rng.random_range(-20.0..20.0)).collect();
        let h = rng.random_range(-20.0..20.0);
        for (&gj, &bj) in g.iter().zip(b_of_h(&g, h, eps2).iter()) {
            let x = gj - h;
            if x.abs() < 1e-12 {
                continue;
            }
            let r = x * bj * bj - (x + 2.0 * eps2) * bj + eps2;
            assert!(r.abs() < 1e-10, "residual {r} at x = {x}, eps2 = {eps2}");
        }
    }
}

fn params(eps2: f64, eps3: f64) -> CaotParams {
    CaotParams { eps2, eps3, ..CaotParams::default() }
}

#[test]
fn inner_single_cluster() {
    let prob = OtProblem::with_uniform_marginal(Mat::filled(2, 1, 1.0), Mat::zeros(2, 2)).unwrap();
    let m = clamp_log(&prob.p, PROB_FLOOR).scale(-1.0);
    let sol = inner_solve(&m, &prob, &CaotParams::default(), &[1.0]).unwrap();
    assert_eq!(sol.b.as_ref(), &[1.0]);
    assert!(sol.q.row_sums().max_abs_diff(&prob.a) < 1e-15);
    assert!((sol.q[(0, 0)] - 0.5).abs() < 1e-15);
}

#[test]
fn inner_symmetric_instance_is_uniform() {
    let (n, k) = (6, 3);
    let prob = OtProblem::with_uniform_marginal(Mat::filled(n, k, 1.0 / 3.0), Mat::zeros(n, n)).unwrap();
    let m = Mat::filled(n, k, 0.7);
    for eps2 in [0.03, 1.0, 100.0] {
        let sol = inner_solve(&m, &prob, &params(eps2, 0.0), &RVec::uniform(k)).unwrap();
        assert!(sol.q.max_abs_diff(&Mat::filled(n, k, 1.0 / 18.0)) < 1e-14);
        assert!(sol.b.max_abs_diff(&RVec::uniform(k)) < 1e-14);
    }
}

#[test]
fn inner_with_huge_marginal_penalty_is_sinkhorn() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let p = random_probs(&mut rng, 6, 3);
    let prob = OtProblem::with_uniform_marginal(p, Mat::zeros(6, 6)).unwrap();
    let m = clamp_log(&prob.p, PROB_FLOOR).scale(-1.0);
    let par = CaotParams { eps2: 1e4, t2: 200, ..CaotParams::default() };
    let sol = inner_solve(&m, &prob, &par, &RVec::uniform(3)).unwrap();
    let oracle = sinkhorn_fixed(&m, &prob.a, &RVec::uniform(3), 1.0, 200).unwrap();
    assert!(sol.q.max_abs_diff(&oracle) < 1e-5);
}

#[test]
fn inner_column_error_shrinks_with_rounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let p = random_probs(&mut rng, 30, 4);
    let prob = OtProblem::with_uniform_marginal(p, Mat::zeros(30, 30)).unwrap();
    let m = clamp_log(&prob.p, PROB_FLOOR).scale(-1.0);
    for eps2 in [0.03, 3.5, 100.0] {
        let err = |t2| {
            let sol = inner_solve(&m, &prob, &CaotParams { eps2, t2, ..CaotParams::default() }, &RVec::uniform(4))
                .unwrap();
            sol.q.col_sums().max_abs_diff(&sol.b)
        };
        let (e2, e10, e50) = (err(2), err(10), err(50));
        assert!(e10 <= e2 && e50 <= e10, "eps2 {eps2}: {e2} {e10} {e50}");
        assert!(e50 < 1e-9);
    }
}

/// KKT check for the adaptive-marginal subproblem: with Sinkhorn run to
/// convergence at the returned b, g_j + ε2 Ψ'(b_j) must not depend on j.
#[test]
fn inner_marginal_is_stationary() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut p = random_probs(&mut rng, 80, 5);
    for i in 0..80 {
        // skew toward the first cluster
        p[(i, 0)] += 1.0;
        let total: f64 = p.row(i).iter().sum();
        p.row_mut(i).iter_mut().for_each(|v| *v /= total);
    }
    let prob = OtProblem::with_uniform_marginal(p, Mat::zeros(80, 80)).unwrap();
    let m = clamp_log(&prob.p, PROB_FLOOR).scale(-1.0);
    for eps2 in [0.03, 0.06, 3.5, 100.0] {
        let par = CaotParams { eps2, t2: 100, ..CaotParams::default() };
        let sol = inner_solve(&m, &prob, &par, &RVec::uniform(5)).unwrap();
        let (mut f, mut g) = (RVec::zeros(80), RVec::zeros(5));
        for _ in 0..2000 {
            (f, g) = dual_update(&m, &f, &g, &sol.b, &prob.a, 1.0).unwrap();
        }
        let stat: Vec<f64> = g.iter().zip(sol.b.iter()).map(|(gj, bj)| gj + eps2 * (-1.0 / bj + 1.0 / (1.0 - bj))).collect();
        let spread = stat.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            - stat.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(spread < 1e-8, "eps2 {eps2}: stationarity spread {spread}");
    }
}

#[test]
fn caot_without_semantics_single_step_is_the_inner_solution() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let p = random_probs(&mut rng, 10, 3);
    let prob = OtProblem::with_uniform_marginal(p, Mat::zeros(10, 10)).unwrap();
    let par = CaotParams { eps2: 3.5, eps3: 0.0, t1: 1, ..CaotParams::default() };
    let plan = caot_solve(&prob, &par).unwrap();
    let m = clamp_log(&prob.p, PROB_FLOOR).scale(-1.0);
    let sol = inner_solve(&m, &prob, &par, &RVec::uniform(3)).unwrap();
    assert_eq!(plan.step_sizes, vec![1.0]);
    assert_eq!(plan.q, sol.q);
    assert_eq!(plan.b, sol.b);
}

#[test]
fn confident_predictions_survive_transport() {
    let p = Mat::from_rows(&[[0.98, 0.02], [0.97, 0.03], [0.01, 0.99], [0.04, 0.96]]).unwrap();
    let prob = OtProblem::with_uniform_marginal(p.clone(), Mat::zeros(4, 4)).unwrap();
    let plan = caot_solve(&prob, &params(100.0, 25.0)).unwrap();
    for i in 0..4 {
        let q_arg = if plan.q[(i, 0)] >= plan.q[(i, 1)] { 0 } else { 1 };
        let p_arg = if p[(i, 0)] >= p[(i, 1)] { 0 } else { 1 };
        assert_eq!(q_arg, p_arg);
    }
}

fn partner_problem(rows: [[f64; 2]; 4]) -> OtProblem {
    let p = Mat::from_rows(&rows).unwrap();
    let mut s = Mat::zeros(4, 4);
    for (i, j) in [(0, 1), (1, 0), (2, 3), (3, 2)] {
        s[(i, j)] = 5.0;
    }
    OtProblem::with_uniform_marginal(p, s).unwrap()
}

fn argmax_labels(q: &Mat) -> Vec<usize> {
    q.row_iter()
        .map(|r| if r[1] > r[0] { 1 } else { 0 })
        .collect()
}

#[test]
fn semantic_term_makes_partners_agree() {
    // samples 2 and 4 lean away from their partners
    let prob = partner_problem([[0.9, 0.1], [0.45, 0.55], [0.1, 0.9], [0.55, 0.45]]);
    let off = argmax_labels(&caot_solve(&prob, &params(100.0, 0.0)).unwrap().q);
    assert_eq!(off, vec![0, 1, 1, 0]);
    let on = argmax_labels(&caot_solve(&prob, &params(100.0, 25.0)).unwrap().q);
    assert_eq!(on, vec![0, 0, 1, 1]);
}

#[test]
fn literal_partner_instance_is_consistent_either_way() {
    let prob = partner_problem([[0.9, 0.1], [0.55, 0.45], [0.1, 0.9], [0.45, 0.55]]);
    for eps3 in [0.0, 25.0] {
        let labels = argmax_labels(&caot_solve(&prob, &params(100.0, eps3)).unwrap().q);
        assert_eq!(labels, vec![0, 0, 1, 1], "eps3 = {eps3}");
    }
}

/// Scans the objective over feasible perturbations of the solved plan: moving
/// mass δ between the two clusters for one sample (and back for another, so
/// the column sums are preserved) must not lower the objective noticeably.
#[test]
fn partner_plan_is_a_local_minimum() {
    let prob = partner_problem([[0.9, 0.1], [0.45, 0.55], [0.1, 0.9], [0.55, 0.45]]);
    let par = CaotParams { t1: 50, t2: 50, ..params(100.0, 25.0) };
    let plan = caot_solve(&prob, &par).unwrap();
    let base = objective(&plan.q, &plan.b, &prob, &par).unwrap();
    for i in 0..4 {
        for l in 0..4 {
            if i == l {
                continue;
            }
            for &delta in &[1e-4, -1e-4] {
                let mut q = plan.q.clone();
                q[(i, 0)] -= delta;
                q[(i, 1)] += delta;
                q[(l, 0)] += delta;
                q[(l, 1)] -= delta;
                if q.min() <= 0.0 {
                    continue;
                }
                let v = objective(&q, &plan.b, &prob, &par).unwrap();
                assert!(v >= base - 1e-6, "perturbing ({i},{l}) by {delta} lowers {base} to {v}");
            }
        }
    }
}

#[test]
fn uniformity_increases_with_marginal_penalty() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let (n, k) = (60, 4);
    let mut p = random_probs(&mut rng, n, k);
    for i in 0..n {
        p[(i, 0)] += 2.0;
        let total: f64 = p.row(i).iter().sum();
        p.row_mut(i).iter_mut().for_each(|v| *v /= total);
    }
    let prob = OtProblem::with_uniform_marginal(p, Mat::zeros(n, n)).unwrap();
    let deviation = |eps2: f64| {
        let plan = caot_solve(&prob, &params(eps2, 25.0)).unwrap();
        plan.b.iter().map(|b| (b - 1.0 / k as f64).abs()).fold(0.0, f64::max)
    };
    let devs: Vec<f64> = [0.03, 3.5, 100.0].into_iter().map(deviation).collect();
    assert!(devs[0] >= devs[1] && devs[1] >= devs[2], "{devs:?}");
}

#[test]
fn invalid_problem_is_rejected() {
    let p = Mat::filled(3, 2, 0.5);
    let prob = OtProblem { p, s: Mat::zeros(2, 2), a: RVec::uniform(3) };
    assert!(matches!(caot_solve(&prob, &CaotParams::default()), Err(Error::Argument(_))));
}
