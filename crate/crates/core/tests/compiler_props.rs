mod common;

use common::*;
use proptest::prelude::*;
use qgm::compiler::{brickwork_graph, build_brickwork, compile_factor_graph, compile_pairwise, hz, BRICKWORK_ANGLES};
use qgm::factor_graph::total_variation;
use qgm::inference::visible_distribution;
use qgm::tensor::statevec;
use qgm::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn gadget_correlator_is_exact(a in -5.0..5.0f64, b in -5.0..5.0f64, c in -5.0..5.0f64) {
        let g = compile_pairwise(a, b, c).unwrap();
        for x1 in 0..2u8 {
            for x2 in 0..2u8 {
                let (f1, f2) = (x1 as f64, x2 as f64);
                let want = (a * f1 * f2 + b * f1 + c * f2).exp();
                prop_assert!((g.correlator(x1, x2) - want).abs() <= 1e-12 * want);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn compilation_preserves_distribution(seed in any::<u64>()) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let fg = random_pairwise_fg(&mut r, 6, 10, 3);
        let model = compile_factor_graph(&fg).unwrap();
        prop_assert!(model.m() <= 10);
        prop_assert!(model.matrices.iter().all(|m| m.is_invertible()));
        let tv = total_variation(&fg.visible_distribution().unwrap(), &visible_distribution(&model).unwrap());
        prop_assert!(tv <= 1e-8, "TV {}", tv);
    }

    #[test]
    fn brickwork_matches_circuit_oracle(seed in any::<u64>(), rows in 1usize..=2, cols in 1usize..=6) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let n = rows * cols;
        let thetas: Vec<f64> = (0..n).map(|_| BRICKWORK_ANGLES[r.random_range(0..2)]).collect();
        let model = build_brickwork(rows, cols, &thetas).unwrap();
        prop_assert!(model.graph.max_degree() <= 3);
        // |+⟩^n, CZ on each edge, then H·Z(θ) on each qubit
        let mut s = vec![C64::new((0.5f64).powi(n as i32).sqrt(), 0.0); 1 << n];
        let cz = nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(-1.0, 0.0),
        ]));
        for &(a, b) in brickwork_graph(rows, cols).unwrap().edges() {
            s = statevec::apply_op(&s, n, &[a, b], &cz);
        }
        for (q, &t) in thetas.iter().enumerate() {
            s = statevec::apply_op(&s, n, &[q], &hz(t).to_dmatrix());
        }
        let want: Vec<f64> = s.iter().map(|z| z.norm_sqr()).collect();
        let got = visible_distribution(&model).unwrap();
        prop_assert!(total_variation(&want, &got) <= 1e-12);
    }
}

#[test]
fn single_site_brickwork_probability() {
    for theta in [0.0, std::f64::consts::FRAC_PI_4, 1.0, 2.5] {
        let p = visible_distribution(&build_brickwork(1, 1, &[theta]).unwrap()).unwrap();
        assert!((p[0] - (1.0 + theta.cos()) / 2.0).abs() < 1e-14);
    }
}
