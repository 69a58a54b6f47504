//! Property tests for the structural invariants.

mod common;

use common::simplex_projection_oracle;
use pdar::core::BlockVector;
use pdar::regularizer::{lambda_coeff, RegularizerParams};
use pdar::subsolver::project_simplex;
use proptest::prelude::*;

fn block_vector_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(
        prop::collection::vec(-1e3..1e3f64, 1..6),
        1..6,
    )
}

proptest! {
    #[test]
    fn partition_flatten_round_trip(blocks in block_vector_strategy()) {
        let x = BlockVector::new(blocks).unwrap();
        let y = BlockVector::partition(&x.flatten(), &x.dims()).unwrap();
        prop_assert_eq!(x, y);
    }

    #[test]
    fn replace_block_with_own_block_is_identity(blocks in block_vector_strategy(), idx in 0usize..6) {
        let x = BlockVector::new(blocks).unwrap();
        let i = idx % x.n_blocks();
        let y = x.replace_block(i, &x.block(i).to_vec()).unwrap();
        prop_assert_eq!(x, y);
    }

    #[test]
    fn simplex_projection_feasible_and_idempotent(
        v in prop::collection::vec(-10.0..10.0f64, 1..11),
        total in 0.1..5.0f64,
    ) {
        let w = project_simplex(&v, total).unwrap();
        let sum: f64 = w.iter().sum();
        prop_assert!((sum - total).abs() <= 1e-12 * total.max(1.0));
        prop_assert!(w.iter().all(|&wi| wi >= 0.0));

        let w2 = project_simplex(&w, total).unwrap();
        for (a, b) in w.iter().zip(&w2) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn simplex_projection_matches_active_set_oracle(
        v in prop::collection::vec(-3.0..3.0f64, 2..8),
    ) {
        let fast = project_simplex(&v, 1.0).unwrap();
        let slow = simplex_projection_oracle(&v, 1.0);
        for (a, b) in fast.iter().zip(&slow) {
            prop_assert!((a - b).abs() <= 1e-8, "fast {:?} vs oracle {:?}", fast, slow);
        }
    }

    #[test]
    fn lambda_always_positive_and_monotone_in_prev_norm(
        alpha in 1e-3..10.0f64,
        beta in 1e-3..10.0f64,
        k_threshold in 1usize..100,
        n_agents in 1usize..50,
        k in 1usize..200,
        norm_a in 0.0..10.0f64,
        norm_b in 0.0..10.0f64,
    ) {
        let p = RegularizerParams::new(alpha, beta, k_threshold, n_agents).unwrap();
        let la = lambda_coeff(k, norm_a, &p).unwrap();
        let lb = lambda_coeff(k, norm_b, &p).unwrap();
        prop_assert!(la > 0.0);
        prop_assert!(lb > 0.0);
        if k < k_threshold && norm_a <= norm_b {
            prop_assert!(la <= lb);
        }
    }
}
