use pota_core::linalg::Mat;
use pota_core::metrics::{accuracy, hungarian, nmi, LabelPair};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

fn total(cost: &Mat, perm: &[usize]) -> f64 {
    perm.iter().enumerate().map(|(i, &j)| cost[(i, j)]).sum()
}

#[test]
fn hungarian_matches_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for trial in 0..200 {
        let k = 1 + trial % 6;
        let cost = Mat::from_fn(k, k, |_, _| rng.random_range(0..20) as f64);
        let perm = hungarian(&cost).unwrap();
        let mut seen = perm.clone();
        seen.sort_unstable();
        assert_eq!(seen, (0..k).collect::<Vec<_>>());
        let best = permutations(k).iter().map(|p| total(&cost, p)).fold(f64::INFINITY, f64::min);
        assert_eq!(total(&cost, &perm), best, "trial {trial}");
    }
}

#[test]
fn hungarian_real_costs() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let cost = Mat::from_fn(5, 5, |_, _| rng.random_range(-3.0..3.0));
        let perm = hungarian(&cost).unwrap();
        let best = permutations(5).iter().map(|p| total(&cost, p)).fold(f64::INFINITY, f64::min);
        assert!((total(&cost, &perm) - best).abs() < 1e-12);
    }
}

#[test]
fn metrics_ignore_relabeling_and_nmi_is_symmetric() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let n = 40;
        let y: Vec<usize> = (0..n).map(|_| rng.random_range(0..4)).collect();
        let p: Vec<usize> = (0..n).map(|_| rng.random_range(0..4)).collect();
        let relabel = [2, 0, 3, 1];
        let q: Vec<usize> = p.iter().map(|&l| relabel[l]).collect();
        let yq: Vec<usize> = y.iter().map(|&l| relabel[l]).collect();
        let base = LabelPair::new(&y, &p).unwrap();
        for other in [LabelPair::new(&y, &q).unwrap(), LabelPair::new(&yq, &p).unwrap()] {
            assert_eq!(accuracy(&base), accuracy(&other));
            assert!((nmi(&base) - nmi(&other)).abs() < 1e-12);
        }
        assert_eq!(nmi(&base), nmi(&LabelPair::new(&p, &y).unwrap()));
        let (a, m) = (accuracy(&base), nmi(&base));
        assert!((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&m));
    }
}

#[test]
fn accuracy_matches_brute_force_mapping() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..50 {
        let y: Vec<usize> = (0..30).map(|_| rng.random_range(0..5)).collect();
        let p: Vec<usize> = (0..30).map(|_| rng.random_range(0..5)).collect();
        let best = permutations(5)
            .iter()
            .map(|m| y.iter().zip(&p).filter(|&(&t, &q)| m[q] == t).count())
            .max()
            .unwrap();
        assert_eq!(accuracy(&LabelPair::new(&y, &p).unwrap()), best as f64 / 30.0);
    }
}
