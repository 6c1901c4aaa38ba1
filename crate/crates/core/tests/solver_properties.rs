mod common;

use common::{random_model, random_tensor, rng};
use proptest::prelude::*;
use svdinstn::init::initial_model;
use svdinstn::network::env_matrix_core;
use svdinstn::solver::{pam_sweep, shrink, shrink_scalar, update_core, update_lambdas, SolverConfig, SolverState};
use svdinstn::{evaluate, DenseTensor, Matrix, RankMatrix, SvdInsTnModel};

/// `‖G_(k)(M Mᵀ + (μ+ρ)I) − X_(k)Mᵀ − ρĜ_(k)‖ / ‖X_(k)Mᵀ + ρĜ_(k)‖`.
fn core_residual(model: &SvdInsTnModel, anchor: &Matrix, x: &DenseTensor, k: usize, cfg: &SolverConfig) -> f64 {
    let m = env_matrix_core(model, k).unwrap();
    let g = model.core(k).unfold_mode(k).unwrap();
    let mut system = m.matmul_tr(&m);
    system.add_to_diagonal(cfg.mu + cfg.rho);
    let mut rhs = x.unfold_mode(k).unwrap().matmul_tr(&m);
    rhs.axpy(cfg.rho, anchor);
    let mut lhs = g.matmul(&system);
    lhs.axpy(-1.0, &rhs);
    lhs.fro_norm() / rhs.fro_norm()
}

fn core_subproblem(model: &SvdInsTnModel, anchor: &Matrix, x: &DenseTensor, k: usize, cfg: &SolverConfig) -> f64 {
    let g = model.core(k).unfold_mode(k).unwrap();
    let mut d = g.clone();
    d.axpy(-1.0, anchor);
    0.5 * x.sub(&evaluate(model)).unwrap().fro_norm().powi(2)
        + 0.5 * cfg.mu * g.fro_norm().powi(2)
        + 0.5 * cfg.rho * d.fro_norm().powi(2)
}

fn setup(seed: u64) -> (DenseTensor, SolverState) {
    let mut r = rng(seed);
    let dims = [3, 4, 3];
    let ranks = RankMatrix::new(3, vec![2, 3, 2]).unwrap();
    let x = random_tensor(&dims, &mut r);
    (x, SolverState::new(random_model(&dims, &ranks, &mut r)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn shrink_is_odd_lipschitz_and_zero_inside(a in -50.0f64..50.0, c in -50.0f64..50.0, b in 0.0f64..20.0) {
        prop_assert_eq!(shrink_scalar(-a, b), -shrink_scalar(a, b));
        // Subtracting the same threshold from both sides can round by an ulp.
        let slack = 4.0 * f64::EPSILON * (a.abs() + c.abs() + b);
        prop_assert!((shrink_scalar(a, b) - shrink_scalar(c, b)).abs() <= (a - c).abs() + slack);
        prop_assert_eq!(shrink_scalar(a, b) == 0.0, a.abs() <= b);
        let v = shrink(&[a, c], &[b, b]).unwrap();
        prop_assert_eq!(v, vec![shrink_scalar(a, b), shrink_scalar(c, b)]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn core_update_solves_its_system_and_lowers_its_objective(seed in any::<u64>(), rho in 1e-4f64..1.0, mu in 1e-3f64..2.0) {
        let cfg = SolverConfig { rho, mu, ..SolverConfig::default() };
        let (x, mut state) = setup(seed);
        update_lambdas(&mut state, &cfg);
        for k in 0..3 {
            let anchor = state.model().core(k).unfold_mode(k).unwrap();
            let before = core_subproblem(state.model(), &anchor, &x, k, &cfg);
            update_core(&mut state, &x, k, &cfg).unwrap();
            let after = core_subproblem(state.model(), &anchor, &x, k, &cfg);
            prop_assert!(core_residual(state.model(), &anchor, &x, k, &cfg) <= 1e-8);
            prop_assert!(after <= before + 1e-9 * before.max(1.0));
        }
    }

    #[test]
    fn ranks_never_grow_and_change_is_reported_exactly(seed in any::<u64>(), gamma in 0.0f64..0.05) {
        let mut r = rng(seed);
        let truth = random_model(&[4, 5, 4], &RankMatrix::new(3, vec![2, 1, 2]).unwrap(), &mut r);
        let x = evaluate(&truth).scaled(5.0);
        let cfg = SolverConfig { gamma, ..SolverConfig::default() };
        let mut state = SolverState::new(initial_model(&x, gamma, cfg.epsilon, true).unwrap());
        let mut ranks = state.model().ranks().entries().to_vec();
        for _ in 0..8 {
            let previous = state.reconstruction().clone();
            let summary = pam_sweep(&mut state, &x, &cfg).unwrap();
            let diff = state.reconstruction().sub(&previous).unwrap().fro_norm();
            prop_assert_eq!(summary.change, diff / previous.fro_norm());
            prop_assert_eq!(*state.change_trace().last().unwrap(), summary.change);
            let now = state.model().ranks().entries().to_vec();
            prop_assert!(now.iter().zip(&ranks).all(|(a, b)| a <= b));
            ranks = now;
        }
    }
}

#[test]
fn pruning_inside_a_sweep_keeps_the_reconstruction() {
    // Diagonal entries the sweep sets to exactly zero contribute nothing, so
    // the reconstruction equals the evaluation of the pruned model.
    let (x, mut state) = setup(3);
    let cfg = SolverConfig { gamma: 0.5, ..SolverConfig::default() };
    for _ in 0..3 {
        pam_sweep(&mut state, &x, &cfg).unwrap();
        assert_eq!(state.reconstruction(), &evaluate(state.model()));
    }
}
