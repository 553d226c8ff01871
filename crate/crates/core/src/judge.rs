//! Simulated judges standing in for the listener, plus batch experiments
//! over seeded trials.
//!
//! A [`SimulatedJudge`] prefers the candidate with the lower landscape cost
//! (Euclidean distance to a hidden target in v1) and flips its answer with
//! probability `noise`. Exact ties go to the first candidate.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};

use crate::corpus::VoiceSpace;
use crate::evolution::{
    initial_population, select_and_advance, EvolutionConfig, EvolutionError, Individual, Judgment, Origin,
    Population,
};
use crate::pca::{Coefficients, PcaModel};
use crate::rng::{EvoRng, STREAM_EVOLUTION, STREAM_JUDGE, STREAM_TARGET};
use crate::scalar::Scalar;

/// How a judge scores a candidate. Lower is better.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", bound = "T: Scalar")]
pub enum Metric<T> {
    /// Distance to the target.
    Euclidean,
    /// `min(d(x, target), d(x, decoy) + decoy_penalty)` over the first
    /// `active_axes` coordinates: a deep optimum at the target and a shallower
    /// local optimum at the decoy.
    TwoCluster {
        decoy: Coefficients<T>,
        decoy_penalty: T,
        active_axes: usize,
    },
}

fn distance<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum::<T>()
        .sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SimulatedJudge<T> {
    pub target: Coefficients<T>,
    pub noise: f64,
    pub metric: Metric<T>,
}

impl<T: Scalar> SimulatedJudge<T> {
    pub fn new(target: Coefficients<T>, noise: f64) -> Result<Self, EvolutionError> {
        Self::with_metric(target, noise, Metric::Euclidean)
    }

    pub fn with_metric(target: Coefficients<T>, noise: f64, metric: Metric<T>) -> Result<Self, EvolutionError> {
        if !(0.0..=0.5).contains(&noise) {
            return Err(EvolutionError::Config(format!("judge noise {noise} outside [0, 0.5]")));
        }
        if let Metric::TwoCluster {
            decoy,
            decoy_penalty,
            active_axes,
        } = &metric
        {
            if decoy.len() != target.len() || *active_axes == 0 || *active_axes > target.len() {
                return Err(EvolutionError::Dimension("two-cluster landscape shape mismatch".into()));
            }
            if decoy_penalty.is_nan() || *decoy_penalty < T::zero() {
                return Err(EvolutionError::Config("decoy penalty must be non-negative".into()));
            }
        }
        Ok(Self { target, noise, metric })
    }

    pub fn cost(&self, genes: &[T]) -> T {
        let t = self.target.as_slice();
        match &self.metric {
            Metric::Euclidean => distance(genes, t),
            Metric::TwoCluster {
                decoy,
                decoy_penalty,
                active_axes,
            } => {
                let n = *active_axes;
                let to_target = distance(&genes[..n], &t[..n]);
                let to_decoy = distance(&genes[..n], &decoy.as_slice()[..n]) + *decoy_penalty;
                to_target.min(to_decoy)
            }
        }
    }

    /// True when `genes` lie in the target's basin rather than the decoy's.
    pub fn in_target_basin(&self, genes: &[T]) -> bool {
        match &self.metric {
            Metric::Euclidean => true,
            Metric::TwoCluster {
                decoy,
                decoy_penalty,
                active_axes,
            } => {
                let n = *active_axes;
                distance(&genes[..n], &self.target.as_slice()[..n])
                    < distance(&genes[..n], &decoy.as_slice()[..n]) + *decoy_penalty
            }
        }
    }

    /// Pairwise preference. Consumes exactly one uniform draw.
    pub fn judge<R: Rng + ?Sized>(&self, a: &Individual<T>, b: &Individual<T>, rng: &mut R) -> Judgment {
        let flip = rng.random::<f64>() < self.noise;
        let prefer_a = self.cost(a.genes.as_slice()) <= self.cost(b.genes.as_slice());
        let chosen = if prefer_a != flip { a.id } else { b.id };
        Judgment { chosen }
    }

    /// Picks among a whole population. For λ = 1 this is [`Self::judge`] on
    /// (parent, offspring). For larger populations the best member wins,
    /// and a noisy flip picks uniformly among the others.
    pub fn judge_population<R: Rng + ?Sized>(&self, pop: &Population<T>, rng: &mut R) -> Judgment {
        if pop.offspring.len() == 1 {
            return self.judge(&pop.parent, &pop.offspring[0], rng);
        }
        let members: Vec<&Individual<T>> = pop.members().collect();
        let mut best = 0;
        for (i, m) in members.iter().enumerate().skip(1) {
            if self.cost(m.genes.as_slice()) < self.cost(members[best].genes.as_slice()) {
                best = i;
            }
        }
        let flip = rng.random::<f64>() < self.noise;
        if flip {
            let mut other = rng.random_range(0..members.len() - 1);
            if other >= best {
                other += 1;
            }
            best = other;
        }
        Judgment {
            chosen: members[best].id,
        }
    }
}

/// Per-trial record. One JSON line in `run-trials` output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TrialReport<T> {
    pub seed: u64,
    pub generations_run: u64,
    pub initial_distance: T,
    pub final_distance: T,
    /// Parent cost at generations 0..=generations_run.
    pub distance_trajectory: Vec<T>,
    /// Generations whose offspring included a random restart.
    pub restart_count: u64,
    pub final_genes: Vec<T>,
}

impl<T: Scalar> TrialReport<T> {
    pub fn ratio(&self) -> f64 {
        let init = self.initial_distance.as_f64();
        if init == 0.0 {
            0.0
        } else {
            self.final_distance.as_f64() / init
        }
    }

    pub fn is_monotone(&self) -> bool {
        self.distance_trajectory.windows(2).all(|w| w[1] <= w[0])
    }
}

/// The fixed inputs of a trial: model and the two seed voices.
#[derive(Debug, Clone, Copy)]
pub struct TrialContext<'a, T> {
    pub pca: &'a PcaModel<T>,
    pub seed_a: &'a Coefficients<T>,
    pub seed_b: &'a Coefficients<T>,
}

impl<'a> TrialContext<'a, f64> {
    pub fn from_space(space: &'a VoiceSpace) -> Self {
        Self {
            pca: &space.pca,
            seed_a: &space.low_seed,
            seed_b: &space.high_seed,
        }
    }
}

/// Runs the full loop with `judge` in place of the listener. The evolution
/// stream is seeded from `config.rng_seed`, the judge stream from `judge_seed`.
pub fn run_trial<T: Scalar>(
    ctx: &TrialContext<'_, T>,
    config: &EvolutionConfig,
    judge: &SimulatedJudge<T>,
    generations: u64,
    judge_seed: u64,
) -> Result<TrialReport<T>, EvolutionError> {
    if judge.target.len() != ctx.pca.k() {
        return Err(EvolutionError::Dimension(format!(
            "target has {} coefficients, model has {}",
            judge.target.len(),
            ctx.pca.k()
        )));
    }
    let mut evo_rng = EvoRng::new(config.rng_seed, STREAM_EVOLUTION);
    let mut judge_rng = EvoRng::new(judge_seed, STREAM_JUDGE);
    let mut pop = initial_population(ctx.seed_a.clone(), ctx.seed_b.clone(), config)?;
    let mut trajectory = Vec::with_capacity(generations as usize + 1);
    trajectory.push(judge.cost(pop.parent.genes.as_slice()));
    let mut restarts = 0;
    for _ in 0..generations {
        let j = judge.judge_population(&pop, &mut judge_rng);
        pop = select_and_advance(&pop, &j, config, ctx.pca, &mut evo_rng)?;
        if pop.offspring.iter().any(|o| o.origin == Origin::RandomRestart) {
            restarts += 1;
        }
        trajectory.push(judge.cost(pop.parent.genes.as_slice()));
    }
    Ok(TrialReport {
        seed: config.rng_seed,
        generations_run: generations,
        initial_distance: trajectory[0],
        final_distance: *trajectory.last().expect("non-empty"),
        distance_trajectory: trajectory,
        restart_count: restarts,
        final_genes: pop.parent.genes.into_vec(),
    })
}

/// Hidden target for trial `seed`: one draw from the restart law
/// `N(0, diag(sd²))`.
pub fn draw_target<T: Scalar>(pca: &PcaModel<T>, seed: u64) -> Coefficients<T> {
    let mut rng = EvoRng::new(seed, STREAM_TARGET);
    let genes = pca
        .component_stddevs()
        .iter()
        .map(|&sd| T::of(rng.sample::<f64, _>(rand_distr::StandardNormal)) * sd)
        .collect();
    Coefficients::new(genes).expect("finite draw")
}

/// Seeds `0..trials` offset by `base_seed`; each trial gets its own target.
pub fn convergence_experiment(
    space: &VoiceSpace,
    base: &EvolutionConfig,
    trials: u64,
    generations: u64,
    noise: f64,
    base_seed: u64,
) -> Result<Vec<TrialReport<f64>>, EvolutionError> {
    let ctx = TrialContext::from_space(space);
    (0..trials)
        .into_par_iter()
        .map(|i| {
            let seed = base_seed.wrapping_add(i);
            let config = EvolutionConfig { rng_seed: seed, ..*base };
            let judge = SimulatedJudge::new(draw_target(&space.pca, seed), noise)?;
            run_trial(&ctx, &config, &judge, generations, seed)
        })
        .collect()
}

/// The committed deceptive landscape over the first two PCA axes.
///
/// The decoy sits on the low seed, so a noiseless judge starts there. The
/// target lies one stddev past the origin on axis 0 (on the high seed's
/// side) and 1.5 stddevs out on axis 1. The decoy's floor is
/// `0.75 · sd_0`. Gaussian mutation cannot cross the barrier between the two
/// basins; a restart landing close enough to the target can.
pub fn deceptive_judge(space: &VoiceSpace) -> SimulatedJudge<f64> {
    let sd = space.pca.component_stddevs();
    let decoy = space.low_seed.clone();
    let side = if decoy.as_slice()[0] >= 0.0 { -1.0 } else { 1.0 };
    let mut target = vec![0.0; space.pca.k()];
    target[0] = side * 1.0 * sd[0];
    target[1] = 1.5 * sd[1];
    SimulatedJudge::with_metric(
        Coefficients::new(target).expect("finite"),
        0.0,
        Metric::TwoCluster {
            decoy,
            decoy_penalty: 0.75 * sd[0],
            active_axes: 2,
        },
    )
    .expect("valid landscape")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartComparison {
    pub pairs: u64,
    pub escaped_with_restarts: u64,
    pub escaped_without_restarts: u64,
    /// Pairs where only the restart run escaped.
    pub wins: u64,
    /// Pairs where only the restart-free run escaped.
    pub losses: u64,
    /// One-sided sign-test p-value for `wins > losses`.
    pub p_value: f64,
}

/// One-sided sign test: `P(X ≥ wins)` for `X ~ Binomial(wins + losses, 1/2)`.
pub fn sign_test(wins: u64, losses: u64) -> f64 {
    let n = wins + losses;
    if n == 0 || wins == 0 {
        return 1.0;
    }
    let b = Binomial::new(0.5, n).expect("valid binomial");
    b.sf(wins - 1)
}

/// Paired-seed comparison of `epsilon` against ε = 0 on the deceptive
/// landscape.
pub fn restart_utility_experiment(
    space: &VoiceSpace,
    base: &EvolutionConfig,
    pairs: u64,
    generations: u64,
    base_seed: u64,
) -> Result<RestartComparison, EvolutionError> {
    let ctx = TrialContext::from_space(space);
    let judge = deceptive_judge(space);
    let outcomes: Vec<(bool, bool)> = (0..pairs)
        .into_par_iter()
        .map(|i| {
            let seed = base_seed.wrapping_add(i);
            let with = EvolutionConfig { rng_seed: seed, ..*base };
            let without = EvolutionConfig { epsilon: 0.0, ..with };
            let a = run_trial(&ctx, &with, &judge, generations, seed)?;
            let b = run_trial(&ctx, &without, &judge, generations, seed)?;
            Ok((judge.in_target_basin(&a.final_genes), judge.in_target_basin(&b.final_genes)))
        })
        .collect::<Result<_, EvolutionError>>()?;
    let wins = outcomes.iter().filter(|(a, b)| *a && !*b).count() as u64;
    let losses = outcomes.iter().filter(|(a, b)| !*a && *b).count() as u64;
    Ok(RestartComparison {
        pairs,
        escaped_with_restarts: outcomes.iter().filter(|(a, _)| *a).count() as u64,
        escaped_without_restarts: outcomes.iter().filter(|(_, b)| *b).count() as u64,
        wins,
        losses,
        p_value: sign_test(wins, losses),
    })
}

/// Aggregate view of a batch of trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub trials: usize,
    pub median_ratio: f64,
    pub mean_ratio: f64,
    pub q25_ratio: f64,
    pub q75_ratio: f64,
    pub improved: usize,
    pub monotone: usize,
    pub mean_restarts: f64,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn summarize<T: Scalar>(reports: &[TrialReport<T>]) -> TrialSummary {
    let mut ratios: Vec<f64> = reports.iter().map(TrialReport::ratio).collect();
    ratios.sort_by(|a, b| a.total_cmp(b));
    let n = reports.len().max(1) as f64;
    TrialSummary {
        trials: reports.len(),
        median_ratio: quantile(&ratios, 0.5),
        mean_ratio: ratios.iter().sum::<f64>() / n,
        q25_ratio: quantile(&ratios, 0.25),
        q75_ratio: quantile(&ratios, 0.75),
        improved: reports.iter().filter(|r| r.final_distance < r.initial_distance).count(),
        monotone: reports.iter().filter(|r| r.is_monotone()).count(),
        mean_restarts: reports.iter().map(|r| r.restart_count as f64).sum::<f64>() / n,
    }
}
