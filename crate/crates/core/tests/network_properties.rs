mod common;

use common::{dense_columns, nested_sum_evaluate, random_model, random_ranks, rel_err, rng};
use proptest::prelude::*;
use rand::Rng;
use svdinstn::network::{
    env_edge_with, env_matrix_core, param_count, prune_edge, squeeze_rank_one_edges, structure_of, EdgeStrategy,
};
use svdinstn::{evaluate, SvdInsTnModel};

/// Small random model: order 2 to 4, dims and ranks up to 3.
fn small_model() -> impl Strategy<Value = SvdInsTnModel> {
    (2usize..=4, any::<u64>()).prop_map(|(order, seed)| {
        let mut r = rng(seed);
        let dims: Vec<usize> = (0..order).map(|_| r.random_range(1..=3)).collect();
        let ranks = random_ranks(order, 3, &mut r);
        random_model(&dims, &ranks, &mut r)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn evaluate_matches_nested_sums(model in small_model()) {
        let fast = evaluate(&model);
        let oracle = nested_sum_evaluate(&model);
        prop_assert_eq!(fast.shape(), oracle.shape());
        prop_assert!(rel_err(fast.data(), oracle.data()) <= 1e-10);
    }

    #[test]
    fn core_environment_reproduces_unfolding(model in small_model()) {
        let x = evaluate(&model);
        for k in 0..model.order() {
            let m = env_matrix_core(&model, k).unwrap();
            let lhs = x.unfold_mode(k).unwrap();
            let rhs = model.core(k).unfold_mode(k).unwrap().matmul(&m);
            prop_assert!(rel_err(lhs.data(), rhs.data()) <= 1e-10);
        }
    }

    #[test]
    fn edge_environment_matches_dense_columns(model in small_model(), seed in any::<u64>()) {
        let y = common::random_tensor(model.dims(), &mut rng(seed));
        for (t, l) in model.ranks().edges() {
            let cols = dense_columns(&model, t, l);
            let rank = cols.len();
            let gram: Vec<f64> = (0..rank * rank)
                .map(|i| cols[i % rank].iter().zip(&cols[i / rank]).map(|(a, b)| a * b).sum())
                .collect();
            let proj: Vec<f64> = cols.iter().map(|c| c.iter().zip(y.data()).map(|(a, b)| a * b).sum()).collect();
            for strategy in [EdgeStrategy::Dense, EdgeStrategy::Columns, EdgeStrategy::Factored] {
                let env = env_edge_with(&model, t, l, strategy).unwrap();
                prop_assert!(rel_err(env.gram().data(), &gram) <= 1e-10);
                prop_assert!(rel_err(&env.proj(&y).unwrap(), &proj) <= 1e-10);
            }
        }
    }

    #[test]
    fn pruning_zero_entries_keeps_the_tensor(model in small_model(), pick in any::<u64>()) {
        let mut r = rng(pick);
        let edges: Vec<_> = model.ranks().edges().collect();
        let (t, l) = edges[r.random_range(0..edges.len())];
        let rank = model.ranks().get(t, l);
        prop_assume!(rank > 1);
        let mut s = model.diagonal(t, l).to_vec();
        let keep: Vec<usize> = (0..rank).filter(|&i| i == 0 || r.random_bool(0.5)).collect();
        for (i, v) in s.iter_mut().enumerate() {
            if !keep.contains(&i) {
                *v = 0.0;
            }
        }
        let zeroed = model.with_diagonal(t, l, s).unwrap();
        let pruned = prune_edge(&zeroed, t, l, &keep).unwrap();
        prop_assert_eq!(pruned.ranks().get(t, l), keep.len());
        let before = evaluate(&zeroed);
        let after = evaluate(&pruned);
        prop_assert!(rel_err(after.data(), before.data()) <= 1e-13);
    }

    #[test]
    fn squeezing_keeps_the_tensor_and_saves_storage(model in small_model()) {
        let squeezed = squeeze_rank_one_edges(&model);
        let full = evaluate(&model);
        prop_assert!(rel_err(squeezed.evaluate().data(), full.data()) <= 1e-12);
        prop_assert_eq!(squeezed.param_count(), param_count(&model));
        let raw: usize = model.cores().iter().map(|c| c.len()).sum::<usize>()
            + model.diagonals().iter().map(Vec::len).sum::<usize>();
        let has_rank_one = model.ranks().entries().contains(&1);
        if has_rank_one && model.order() >= 3 {
            prop_assert!(squeezed.param_count() < raw);
        }
    }

    #[test]
    fn structure_ignores_diagonal_magnitudes(model in small_model(), seed in any::<u64>()) {
        let mut r = rng(seed);
        let mut rescaled = model.clone();
        for (t, l) in model.ranks().edges() {
            let s = model.diagonal(t, l).iter().map(|v| v * r.random_range(0.01..100.0)).collect();
            rescaled = rescaled.with_diagonal(t, l, s).unwrap();
        }
        prop_assert_eq!(structure_of(&rescaled), structure_of(&model));
    }
}
