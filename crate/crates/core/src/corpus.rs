//! Seeded synthetic speaker corpus and the reference voice space built on it.
//!
//! 110 embeddings are drawn from a latent-factor model: sixteen orthonormal
//! factor directions, the first six of which coincide with the synthesizer's
//! control directions. Factor 0 (pitch) carries a group offset that splits the
//! corpus into two labelled halves, a low-pitched group (indices 0..55) and a
//! high-pitched group (55..110). The group centroids serve as the two seed
//! voices of every session.

use serde::{Deserialize, Serialize};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg;
use crate::pca::{Coefficients, Embedding, PcaError, PcaModel, EMBEDDING_DIM, REFERENCE_COMPONENTS};
use crate::synth::control_directions;

pub const CORPUS_SEED: u64 = 0x0110_5EED_C0A5_0256;
pub const CORPUS_SIZE: usize = 110;

/// Per-factor standard deviations of the latent model.
pub const FACTOR_STDDEVS: [f64; 16] = [
    0.6, 1.6, 1.4, 1.2, 1.0, 0.85, 0.75, 0.65, 0.55, 0.45, 0.3, 0.25, 0.2, 0.15, 0.1, 0.08,
];
/// Mean score along the pitch direction.
pub const PITCH_BASE: f64 = -4.0;
/// Half the distance between the two group means along the pitch direction.
pub const PITCH_GROUP_OFFSET: f64 = 2.0;
/// Isotropic per-coordinate noise.
pub const ISOTROPIC_NOISE: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpeakerGroup {
    /// Stands in for the stereotypically male seed voice.
    Low,
    /// Stands in for the stereotypically female seed voice.
    High,
}

#[derive(Debug, Clone)]
pub struct SpeakerCorpus {
    pub embeddings: Vec<Embedding<f64>>,
    pub groups: Vec<SpeakerGroup>,
}

impl SpeakerCorpus {
    /// The committed reference corpus.
    pub fn reference() -> Self {
        Self::generate(CORPUS_SEED, CORPUS_SIZE)
    }

    pub fn generate(seed: u64, size: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut factors: Vec<Vec<f64>> = control_directions().to_vec();
        while factors.len() < FACTOR_STDDEVS.len() {
            let mut v: Vec<f64> = (0..EMBEDDING_DIM).map(|_| rng.sample(StandardNormal)).collect();
            for _ in 0..2 {
                for u in &factors {
                    let p = linalg::dot(&v, u);
                    linalg::axpy(-p, u, &mut v);
                }
            }
            let n = linalg::norm(&v);
            v.iter_mut().for_each(|x| *x /= n);
            factors.push(v);
        }

        let mut embeddings = Vec::with_capacity(size);
        let mut groups = Vec::with_capacity(size);
        for i in 0..size {
            let group = if i < size / 2 {
                SpeakerGroup::Low
            } else {
                SpeakerGroup::High
            };
            let mut e: Vec<f64> = (0..EMBEDDING_DIM)
                .map(|_| ISOTROPIC_NOISE * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let pitch = PITCH_BASE
                + match group {
                    SpeakerGroup::Low => -PITCH_GROUP_OFFSET,
                    SpeakerGroup::High => PITCH_GROUP_OFFSET,
                };
            linalg::axpy(pitch, &factors[0], &mut e);
            for (dir, sd) in factors.iter().zip(FACTOR_STDDEVS) {
                let z: f64 = rng.sample(StandardNormal);
                linalg::axpy(sd * z, dir, &mut e);
            }
            embeddings.push(Embedding::new(e).expect("finite by construction"));
            groups.push(group);
        }
        Self { embeddings, groups }
    }

    pub fn centroid(&self, group: SpeakerGroup) -> Embedding<f64> {
        let members: Vec<&Embedding<f64>> = self
            .embeddings
            .iter()
            .zip(&self.groups)
            .filter(|(_, g)| **g == group)
            .map(|(e, _)| e)
            .collect();
        let mut c = vec![0.0; EMBEDDING_DIM];
        let w = 1.0 / members.len().max(1) as f64;
        for e in members {
            linalg::axpy(w, e.as_slice(), &mut c);
        }
        Embedding::new(c).expect("finite by construction")
    }
}

/// A fitted PCA plus the two seed voices expressed in its coefficient space.
#[derive(Debug, Clone)]
pub struct VoiceSpace {
    pub pca: PcaModel<f64>,
    pub low_seed: Coefficients<f64>,
    pub high_seed: Coefficients<f64>,
}

impl VoiceSpace {
    /// Fits the reference PCA (k = 10) on the reference corpus.
    pub fn reference() -> Self {
        let corpus = SpeakerCorpus::reference();
        let pca = PcaModel::fit(&corpus.embeddings, REFERENCE_COMPONENTS)
            .expect("reference corpus supports the reference PCA");
        Self::with_model(pca, &corpus).expect("reference model matches corpus")
    }

    /// Uses an externally supplied model; seeds are the corpus group centroids
    /// projected into that model.
    pub fn with_model(pca: PcaModel<f64>, corpus: &SpeakerCorpus) -> Result<Self, PcaError> {
        pca.validate()?;
        Ok(Self {
            low_seed: pca.project(&corpus.centroid(SpeakerGroup::Low)),
            high_seed: pca.project(&corpus.centroid(SpeakerGroup::High)),
            pca,
        })
    }
}
