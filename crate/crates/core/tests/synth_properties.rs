mod common;

use common::rel_err;
use svdinstn::solver::decompose;
use svdinstn::synth::{gen_model_with, run_trials, trial_rng, StructureFamily, TrialSpec};
use svdinstn::{evaluate, RankMatrix};

fn small_spec(seed: u64) -> TrialSpec {
    let ranks = StructureFamily::Chain.ranks(3, 2).unwrap();
    let mut spec = TrialSpec::new("chain", vec![4, 5, 4], ranks, seed, 3, 0.0015);
    spec.config.max_outer = 40;
    spec
}

#[test]
fn success_is_exact_rank_equality() {
    let spec = small_spec(5);
    let summary = run_trials(&spec).unwrap();
    for o in &summary.outcomes {
        let recovered = o.recovered.as_ref().unwrap();
        assert_eq!(o.success, recovered == &spec.ranks);
        let differs_by_one: Vec<usize> = recovered
            .entries()
            .iter()
            .zip(spec.ranks.entries())
            .filter(|(a, b)| a != b)
            .map(|(a, _)| *a)
            .collect();
        assert_eq!(o.success, differs_by_one.is_empty());
    }
    assert_eq!(summary.successes, summary.outcomes.iter().filter(|o| o.success).count());
}

#[test]
fn isomorphic_ring_relabeling_counts_as_failure() {
    // A 5-cycle through the cores in a different order has the same shape as
    // a graph, but the rank matrices differ.
    let ring = StructureFamily::Ring.ranks(5, 2).unwrap();
    let other = StructureFamily::FiveStar.ranks(5, 2).unwrap();
    assert_ne!(ring, other);
    let count = |r: &RankMatrix| r.entries().iter().filter(|&&v| v == 2).count();
    assert_eq!(count(&ring), count(&other));
}

#[test]
fn trials_are_reproducible() {
    let a = run_trials(&small_spec(9)).unwrap();
    let b = run_trials(&small_spec(9)).unwrap();
    for (x, y) in a.outcomes.iter().zip(&b.outcomes) {
        assert_eq!(x.recovered, y.recovered);
        assert_eq!(x.relative_error.to_bits(), y.relative_error.to_bits());
        assert_eq!(x.iterations, y.iterations);
    }
}

#[test]
fn reported_error_matches_a_recomputation() {
    let spec = small_spec(21);
    let summary = run_trials(&spec).unwrap();
    for o in &summary.outcomes {
        let truth = gen_model_with(&spec.dims, &spec.ranks, &mut trial_rng(spec.seed, o.trial as u64)).unwrap();
        let x = evaluate(&truth);
        let (model, _) = decompose(&x, &spec.config).unwrap();
        let approx = common::nested_sum_evaluate(&model);
        let zero = vec![0.0; x.len()];
        let diff: Vec<f64> = approx.data().iter().zip(x.data()).map(|(a, b)| a - b).collect();
        let re = rel_err(&diff, &zero) / rel_err(x.data(), &zero);
        assert!((o.relative_error - re).abs() <= 1e-12 * re.max(1e-300) + 1e-15, "{} vs {re}", o.relative_error);
    }
}
