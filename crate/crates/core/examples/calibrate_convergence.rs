//! Sweeps the mutation scale and prints the median final/initial distance
//! ratio of the convergence experiment (100 trials, 50 generations, noiseless
//! judge). The acceptance threshold is frozen from the default-scale row.
//!
//! cargo run --release -p evoforge-core --example calibrate_convergence

use evoforge_core::corpus::VoiceSpace;
use evoforge_core::evolution::EvolutionConfig;
use evoforge_core::judge::{convergence_experiment, summarize};

fn main() {
    let space = VoiceSpace::reference();
    println!("sigma_scale  median   q25      q75      improved  monotone  mean_restarts");
    for sigma_scale in [0.1, 0.2, 0.3, 0.4, 0.5] {
        let config = EvolutionConfig { sigma_scale, ..Default::default() };
        let reports = convergence_experiment(&space, &config, 100, 50, 0.0, 0).expect("valid config");
        let s = summarize(&reports);
        println!(
            "{sigma_scale:<12} {:<8.4} {:<8.4} {:<8.4} {:<9} {:<9} {:.2}",
            s.median_ratio, s.q25_ratio, s.q75_ratio, s.improved, s.monotone, s.mean_restarts
        );
    }
    for base_seed in [1_000, 2_000, 3_000] {
        let reports =
            convergence_experiment(&space, &EvolutionConfig::default(), 100, 50, 0.0, base_seed).expect("valid config");
        println!("default config, base seed {base_seed}: median {:.4}", summarize(&reports).median_ratio);
    }
}
