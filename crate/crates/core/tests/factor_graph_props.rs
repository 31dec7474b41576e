mod common;

use common::*;
use proptest::prelude::*;
use qgm::factor_graph::{
    from_bayesian_network, multiplicative_error, reduce_degree, total_variation, Factor, FactorGraph, PairwiseExpFactor,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn kl_q_p(p: &[f64], q: &[f64]) -> f64 {
    q.iter().zip(p).map(|(qi, pi)| qi * (qi / pi).ln()).sum()
}

fn l1(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum()
}

/// p(x) = q(x)(1 + δ_x) with Σ q δ = 0 and max |δ| = gamma.
fn pair_with_gamma<R: Rng>(r: &mut R, n: usize, gamma: f64) -> (Vec<f64>, Vec<f64>) {
    let q = random_distribution(r, n);
    let raw: Vec<f64> = (0..n).map(|_| uniform(r, -1.0, 1.0)).collect();
    let mean: f64 = raw.iter().zip(&q).map(|(d, w)| d * w).sum();
    let centered: Vec<f64> = raw.iter().map(|d| d - mean).collect();
    let scale = centered.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let p = q.iter().zip(&centered).map(|(w, d)| w * (1.0 + gamma * d / scale)).collect();
    (p, q)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn distribution_is_normalized(seed in any::<u64>()) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let fg = random_pairwise_fg(&mut r, 8, 30, 4);
        let p = fg.distribution().unwrap();
        prop_assert!(p.iter().all(|&x| x >= 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn bayesian_networks_are_normalized(seed in any::<u64>(), n in 1usize..7) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let parents: Vec<Vec<usize>> = (0..n)
            .map(|v| (0..v).filter(|_| r.random::<f64>() < 0.4).take(3).collect())
            .collect();
        let cpts: Vec<Vec<[f64; 2]>> = parents
            .iter()
            .map(|ps| (0..1usize << ps.len()).map(|_| { let a = uniform(&mut r, 0.02, 0.98); [a, 1.0 - a] }).collect())
            .collect();
        let fg = from_bayesian_network(&parents, &cpts).unwrap();
        let z: f64 = fg.weights().unwrap().iter().sum();
        prop_assert!((z - 1.0).abs() <= 1e-12, "Z = {}", z);
    }

    #[test]
    fn multiplicative_error_bounds_at_half(seed in any::<u64>(), n in 2usize..20, gamma in 0.0..=0.5f64) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let (p, q) = pair_with_gamma(&mut r, n, gamma);
        let g = multiplicative_error(&p, &q);
        prop_assert!((g - gamma).abs() <= 1e-12);
        prop_assert!(l1(&p, &q) <= g + 1e-15);
        prop_assert!(kl_q_p(&p, &q) <= g + 1e-15);
        prop_assert!(kl_q_p(&p, &q) >= -1e-15);
    }

    #[test]
    fn l1_bounded_by_gamma_below_one(seed in any::<u64>(), n in 2usize..20, gamma in 0.0..1.0f64) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let (p, q) = pair_with_gamma(&mut r, n, gamma);
        prop_assert!(l1(&p, &q) <= multiplicative_error(&p, &q) + 1e-15);
    }
}

#[test]
fn kl_bound_fails_as_gamma_approaches_one() {
    // two-point pair where KL(q‖p) = −½ log(1 − γ²), which overtakes γ near γ ≈ 0.92
    for (gamma, holds) in [(0.5, true), (0.9, true), (0.95, false), (0.99, false)] {
        let q = [0.5, 0.5];
        let p = [0.5 * (1.0 + gamma), 0.5 * (1.0 - gamma)];
        let g = multiplicative_error(&p, &q);
        assert!((g - gamma).abs() < 1e-15);
        let kl = kl_q_p(&p, &q);
        assert!((kl + 0.5 * (1.0 - gamma * gamma).ln()).abs() < 1e-12);
        assert_eq!(kl <= g, holds, "gamma {gamma}: KL {kl}");
    }
}

fn star(leaves: usize, r: &mut ChaCha8Rng) -> FactorGraph {
    let mut factors: Vec<Factor> = (1..=leaves)
        .map(|l| {
            Factor::pairwise(0, l, PairwiseExpFactor {
                a: uniform(r, -1.5, 1.5),
                b: uniform(r, -0.5, 0.5),
                c: uniform(r, -0.5, 0.5),
            })
        })
        .collect();
    factors.push(Factor::unary(0, uniform(r, -1.0, 1.0)));
    FactorGraph::new(leaves + 1, factors).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn reduce_degree_converges_monotonically(seed in any::<u64>(), leaves in 4usize..=6) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let fg = star(leaves, &mut r);
        let p = fg.visible_distribution().unwrap();
        let tvs: Vec<f64> = [5.0, 10.0, 20.0, 30.0]
            .iter()
            .map(|&a| {
                let red = reduce_degree(&fg, a).unwrap();
                assert!(red.max_degree() <= 3);
                total_variation(&p, &red.visible_distribution().unwrap())
            })
            .collect();
        for w in tvs.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-15, "{:?}", tvs);
        }
        prop_assert!(tvs[3] < tvs[0], "{:?}", tvs);
    }
}
