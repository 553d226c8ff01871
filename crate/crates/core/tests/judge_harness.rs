use evoforge_core::corpus::VoiceSpace;
use evoforge_core::evolution::EvolutionConfig;
use evoforge_core::judge::{
    convergence_experiment, deceptive_judge, restart_utility_experiment, run_trial, sign_test, summarize,
    SimulatedJudge, TrialContext,
};
use std::sync::OnceLock;

/// Frozen from `examples/calibrate_convergence.rs`.
const CONVERGENCE_THRESHOLD: f64 = 0.45;

fn space() -> &'static VoiceSpace {
    static SPACE: OnceLock<VoiceSpace> = OnceLock::new();
    SPACE.get_or_init(VoiceSpace::reference)
}

#[test]
fn noiseless_trials_converge() {
    let reports = convergence_experiment(space(), &EvolutionConfig::default(), 100, 50, 0.0, 0).unwrap();
    let s = summarize(&reports);
    assert!(s.median_ratio < CONVERGENCE_THRESHOLD, "median {}", s.median_ratio);
    assert_eq!(s.monotone, 100);
    assert!(s.improved >= 95, "{} improved", s.improved);
    for r in &reports {
        assert_eq!(r.distance_trajectory.len(), 51);
        assert_eq!(r.generations_run, 50);
    }
}

#[test]
fn experiments_are_reproducible() {
    let a = convergence_experiment(space(), &EvolutionConfig::default(), 8, 30, 0.1, 500).unwrap();
    let b = convergence_experiment(space(), &EvolutionConfig::default(), 8, 30, 0.1, 500).unwrap();
    assert_eq!(a, b);
}

#[test]
fn restarts_escape_the_decoy() {
    let cmp = restart_utility_experiment(space(), &EvolutionConfig::default(), 200, 50, 0).unwrap();
    assert!(cmp.escaped_with_restarts > cmp.escaped_without_restarts, "{cmp:?}");
    assert!(cmp.p_value < 0.05, "{cmp:?}");
}

#[test]
fn decoy_traps_a_restart_free_search() {
    let s = space();
    let judge = deceptive_judge(s);
    assert!(!judge.in_target_basin(s.low_seed.as_slice()));
    let ctx = TrialContext::from_space(s);
    let cfg = EvolutionConfig { epsilon: 0.0, rng_seed: 3, ..Default::default() };
    let r = run_trial(&ctx, &cfg, &judge, 50, 3).unwrap();
    assert_eq!(r.restart_count, 0);
    assert!(r.is_monotone());
}

#[test]
fn sign_test_reference_values() {
    // P(X >= 9 | n = 10, p = 1/2) = 11 / 1024
    assert!((sign_test(9, 1) - 11.0 / 1024.0).abs() < 1e-12);
    assert!((sign_test(5, 5) - 638.0 / 1024.0).abs() < 1e-12);
    assert_eq!(sign_test(0, 0), 1.0);
    assert_eq!(sign_test(0, 4), 1.0);
}

#[test]
fn wrong_target_length_is_rejected() {
    let s = space();
    let ctx = TrialContext::from_space(s);
    let judge = SimulatedJudge::new(evoforge_core::pca::Coefficients::zeros(3), 0.0).unwrap();
    assert!(run_trial(&ctx, &EvolutionConfig::default(), &judge, 5, 0).is_err());
}
