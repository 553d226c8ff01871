//! (1+λ) evolution strategy with epsilon mutation, driven by an external
//! preference judgment instead of a fitness function.
//!
//! Each generation shows one parent and λ offspring. Whoever is chosen
//! becomes the next parent unchanged (elitism) and λ new offspring are drawn
//! from it. With probability `epsilon` an offspring is a fresh random
//! individual rather than a Gaussian perturbation of the parent.

use std::fmt;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pca::{Coefficients, PcaModel};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvolutionError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("judgment names individual {0}, which is not in the current population")]
    UnknownIndividual(IndividualId),
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("internal error: {0}")]
    Internal(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IndividualId(pub u64);

impl fmt::Display for IndividualId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl IndividualId {
    /// Id of offspring `index` born into `generation`. Generation 0 uses ids
    /// `0..=lambda` (parent first); later generations continue the sequence.
    pub fn offspring(generation: u64, index: usize, lambda: usize) -> Self {
        let lambda = lambda as u64;
        if generation == 0 {
            Self(1 + index as u64)
        } else {
            Self(1 + lambda + (generation - 1) * lambda + index as u64)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Seed,
    Mutation,
    RandomRestart,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Individual<T> {
    pub id: IndividualId,
    pub genes: Coefficients<T>,
    pub origin: Origin,
    /// The individual this one was mutated from, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_id: Option<IndividualId>,
}

impl<T: Scalar> Individual<T> {
    pub fn seed(id: IndividualId, genes: Coefficients<T>) -> Self {
        Self {
            id,
            genes,
            origin: Origin::Seed,
            parent_id: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Population<T> {
    pub parent: Individual<T>,
    pub offspring: Vec<Individual<T>>,
    pub generation: u64,
}

impl<T: Scalar> Population<T> {
    /// Parent first, then offspring in order.
    pub fn members(&self) -> impl Iterator<Item = &Individual<T>> {
        std::iter::once(&self.parent).chain(&self.offspring)
    }

    pub fn get(&self, id: IndividualId) -> Option<&Individual<T>> {
        self.members().find(|i| i.id == id)
    }

    pub fn size(&self) -> usize {
        1 + self.offspring.len()
    }
}

/// Strategy parameters. Scales are multiples of the PCA per-axis stddevs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvolutionConfig {
    pub lambda: usize,
    pub epsilon: f64,
    pub sigma_scale: f64,
    pub restart_scale: f64,
    pub rng_seed: u64,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            lambda: 1,
            epsilon: 0.2,
            sigma_scale: 0.3,
            restart_scale: 1.0,
            rng_seed: 0,
        }
    }
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<(), EvolutionError> {
        if self.lambda < 1 {
            return Err(EvolutionError::Config("lambda must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(EvolutionError::Config(format!(
                "epsilon {} outside [0, 1]",
                self.epsilon
            )));
        }
        if !(self.sigma_scale.is_finite() && self.sigma_scale > 0.0) {
            return Err(EvolutionError::Config("sigma_scale must be positive".into()));
        }
        if !(self.restart_scale.is_finite() && self.restart_scale > 0.0) {
            return Err(EvolutionError::Config("restart_scale must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Judgment {
    pub chosen: IndividualId,
}

/// Generation-0 pairing of two seed voices: `seed_a` is the parent and
/// `seed_b` the only offspring. Defined for λ = 1 only.
pub fn initial_population<T: Scalar>(
    seed_a: Coefficients<T>,
    seed_b: Coefficients<T>,
    config: &EvolutionConfig,
) -> Result<Population<T>, EvolutionError> {
    config.validate()?;
    if config.lambda != 1 {
        return Err(EvolutionError::Config(format!(
            "two seeds define a population only for lambda = 1, got {}",
            config.lambda
        )));
    }
    if seed_a.len() != seed_b.len() {
        return Err(EvolutionError::Dimension(format!(
            "seed lengths differ: {} vs {}",
            seed_a.len(),
            seed_b.len()
        )));
    }
    Ok(Population {
        parent: Individual::seed(IndividualId(0), seed_a),
        offspring: vec![Individual::seed(IndividualId::offspring(0, 0, 1), seed_b)],
        generation: 0,
    })
}

/// Generation-0 population for any λ: one seed parent plus λ offspring
/// drawn from it.
pub fn seeded_population<T: Scalar, R: Rng + ?Sized>(
    seed: Coefficients<T>,
    config: &EvolutionConfig,
    pca: &PcaModel<T>,
    rng: &mut R,
) -> Result<Population<T>, EvolutionError> {
    config.validate()?;
    let parent = Individual::seed(IndividualId(0), seed);
    let offspring = (0..config.lambda)
        .map(|j| mutate(&parent, IndividualId::offspring(0, j, config.lambda), config, pca, rng))
        .collect::<Result<_, _>>()?;
    Ok(Population {
        parent,
        offspring,
        generation: 0,
    })
}

/// Draws one offspring of `parent`.
///
/// A uniform draw `u < epsilon` selects a random restart (each axis
/// `N(0, (restart_scale · sd_i)²)`); otherwise every gene gets Gaussian noise
/// of stddev `sigma_scale · sd_i`. Genes are never clamped.
pub fn mutate<T: Scalar, R: Rng + ?Sized>(
    parent: &Individual<T>,
    id: IndividualId,
    config: &EvolutionConfig,
    pca: &PcaModel<T>,
    rng: &mut R,
) -> Result<Individual<T>, EvolutionError> {
    let stddevs = pca.component_stddevs();
    if parent.genes.len() != stddevs.len() {
        return Err(EvolutionError::Dimension(format!(
            "parent has {} genes, model has {} components",
            parent.genes.len(),
            stddevs.len()
        )));
    }
    let u: f64 = rng.random();
    let restart = u < config.epsilon;
    let genes: Vec<T> = if restart {
        let scale = T::of(config.restart_scale);
        stddevs
            .iter()
            .map(|&sd| T::of(rng.sample::<f64, _>(StandardNormal)) * scale * sd)
            .collect()
    } else {
        let scale = T::of(config.sigma_scale);
        parent
            .genes
            .as_slice()
            .iter()
            .zip(stddevs)
            .map(|(&g, &sd)| g + T::of(rng.sample::<f64, _>(StandardNormal)) * scale * sd)
            .collect()
    };
    let genes = Coefficients::new(genes)
        .map_err(|e| EvolutionError::Internal(format!("mutation produced {e}")))?;
    Ok(Individual {
        id,
        genes,
        origin: if restart {
            Origin::RandomRestart
        } else {
            Origin::Mutation
        },
        parent_id: Some(parent.id),
    })
}

/// Makes the chosen individual the next parent (genes and id unchanged) and
/// draws λ fresh offspring from it.
pub fn select_and_advance<T: Scalar, R: Rng + ?Sized>(
    pop: &Population<T>,
    judgment: &Judgment,
    config: &EvolutionConfig,
    pca: &PcaModel<T>,
    rng: &mut R,
) -> Result<Population<T>, EvolutionError> {
    config.validate()?;
    let parent = pop
        .get(judgment.chosen)
        .cloned()
        .ok_or(EvolutionError::UnknownIndividual(judgment.chosen))?;
    let generation = pop.generation + 1;
    let offspring = (0..config.lambda)
        .map(|j| {
            mutate(
                &parent,
                IndividualId::offspring(generation, j, config.lambda),
                config,
                pca,
                rng,
            )
        })
        .collect::<Result<_, _>>()?;
    Ok(Population {
        parent,
        offspring,
        generation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::VoiceSpace;
    use crate::rng::{EvoRng, STREAM_EVOLUTION};

    fn space() -> VoiceSpace {
        VoiceSpace::reference()
    }

    #[test]
    fn config_validation() {
        let ok = EvolutionConfig::default();
        ok.validate().unwrap();
        for bad in [
            EvolutionConfig { epsilon: 1.5, ..ok },
            EvolutionConfig { epsilon: -0.1, ..ok },
            EvolutionConfig { lambda: 0, ..ok },
            EvolutionConfig { sigma_scale: 0.0, ..ok },
            EvolutionConfig { restart_scale: -1.0, ..ok },
        ] {
            assert!(matches!(bad.validate(), Err(EvolutionError::Config(_))));
        }
    }

    #[test]
    fn initial_population_pairs_seeds() {
        let s = space();
        let pop = initial_population(s.low_seed.clone(), s.high_seed.clone(), &EvolutionConfig::default()).unwrap();
        assert_eq!(pop.generation, 0);
        assert_eq!(pop.size(), 2);
        assert_eq!(pop.parent.genes, s.low_seed);
        assert_eq!(pop.offspring[0].genes, s.high_seed);
        assert!(pop.members().all(|i| i.origin == Origin::Seed));
        assert_ne!(pop.parent.id, pop.offspring[0].id);
    }

    #[test]
    fn identical_seeds_are_legal() {
        let s = space();
        let pop = initial_population(s.low_seed.clone(), s.low_seed.clone(), &EvolutionConfig::default()).unwrap();
        assert_eq!(pop.parent.genes, pop.offspring[0].genes);
    }

    #[test]
    fn two_seeds_need_lambda_one() {
        let s = space();
        let cfg = EvolutionConfig { lambda: 3, ..Default::default() };
        assert!(matches!(
            initial_population(s.low_seed.clone(), s.high_seed, &cfg),
            Err(EvolutionError::Config(_))
        ));
    }

    #[test]
    fn tiny_sigma_without_restarts_copies_parent() {
        let s = space();
        let cfg = EvolutionConfig {
            epsilon: 0.0,
            sigma_scale: f64::MIN_POSITIVE,
            ..Default::default()
        };
        let parent = Individual::seed(IndividualId(0), s.low_seed.clone());
        let mut rng = EvoRng::new(1, STREAM_EVOLUTION);
        for _ in 0..50 {
            let child = mutate(&parent, IndividualId(1), &cfg, &s.pca, &mut rng).unwrap();
            assert_eq!(child.genes, parent.genes);
            assert_eq!(child.origin, Origin::Mutation);
            assert_eq!(child.parent_id, Some(IndividualId(0)));
        }
    }

    #[test]
    fn epsilon_one_always_restarts_independent_of_parent() {
        let s = space();
        let cfg = EvolutionConfig { epsilon: 1.0, ..Default::default() };
        let a = Individual::seed(IndividualId(0), s.low_seed.clone());
        let b = Individual::seed(IndividualId(0), s.high_seed.clone());
        let mut r1 = EvoRng::new(5, STREAM_EVOLUTION);
        let mut r2 = EvoRng::new(5, STREAM_EVOLUTION);
        for _ in 0..100 {
            let ca = mutate(&a, IndividualId(1), &cfg, &s.pca, &mut r1).unwrap();
            let cb = mutate(&b, IndividualId(1), &cfg, &s.pca, &mut r2).unwrap();
            assert_eq!(ca.origin, Origin::RandomRestart);
            assert_eq!(ca.genes, cb.genes);
        }
    }

    #[test]
    fn choosing_offspring_promotes_it_verbatim() {
        let s = space();
        let cfg = EvolutionConfig::default();
        let pop = initial_population(s.low_seed.clone(), s.high_seed.clone(), &cfg).unwrap();
        let mut rng = EvoRng::new(3, STREAM_EVOLUTION);
        let chosen = pop.offspring[0].clone();
        let next = select_and_advance(&pop, &Judgment { chosen: chosen.id }, &cfg, &s.pca, &mut rng).unwrap();
        assert_eq!(next.generation, 1);
        assert_eq!(next.parent, chosen);
        assert_eq!(next.size(), 2);
        assert_eq!(next.offspring[0].id, IndividualId(2));
        assert_eq!(next.offspring[0].parent_id, Some(chosen.id));
    }

    #[test]
    fn unknown_choice_is_rejected() {
        let s = space();
        let cfg = EvolutionConfig::default();
        let pop = initial_population(s.low_seed.clone(), s.high_seed, &cfg).unwrap();
        let mut rng = EvoRng::new(3, STREAM_EVOLUTION);
        let err = select_and_advance(&pop, &Judgment { chosen: IndividualId(99) }, &cfg, &s.pca, &mut rng);
        assert_eq!(err, Err(EvolutionError::UnknownIndividual(IndividualId(99))));
    }

    #[test]
    fn ids_are_unique_across_generations() {
        let mut seen = std::collections::HashSet::new();
        for lambda in [1usize, 3] {
            seen.clear();
            for g in 0..20u64 {
                for j in 0..lambda {
                    assert!(seen.insert(IndividualId::offspring(g, j, lambda)));
                }
            }
            assert!(!seen.contains(&IndividualId(0)));
        }
    }

    #[test]
    fn larger_lambda_population() {
        let s = space();
        let cfg = EvolutionConfig { lambda: 4, ..Default::default() };
        let mut rng = EvoRng::new(8, STREAM_EVOLUTION);
        let pop = seeded_population(s.low_seed.clone(), &cfg, &s.pca, &mut rng).unwrap();
        assert_eq!(pop.size(), 5);
        let next = select_and_advance(&pop, &Judgment { chosen: pop.offspring[2].id }, &cfg, &s.pca, &mut rng).unwrap();
        assert_eq!(next.size(), 5);
        assert_eq!(next.parent, pop.offspring[2]);
    }

    #[test]
    fn single_precision_step() {
        let s = space();
        let corpus: Vec<crate::pca::Embedding<f32>> = crate::corpus::SpeakerCorpus::reference()
            .embeddings
            .iter()
            .map(|e| crate::pca::Embedding::new(e.as_slice().iter().map(|&v| v as f32).collect()).unwrap())
            .collect();
        let pca32 = PcaModel::<f32>::fit(&corpus, 10).unwrap();
        let seed: Vec<f32> = s.low_seed.as_slice().iter().map(|&v| v as f32).collect();
        let parent = Individual::seed(IndividualId(0), Coefficients::new(seed).unwrap());
        let mut rng = EvoRng::new(2, STREAM_EVOLUTION);
        let child = mutate(&parent, IndividualId(1), &EvolutionConfig::default(), &pca32, &mut rng).unwrap();
        assert_eq!(child.genes.len(), 10);
    }
}
