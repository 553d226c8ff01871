//! Embedding → voice-parameter map of the parametric backend.
//!
//! The embedding is projected onto six fixed orthonormal control directions
//! and each score is squashed by a logistic sigmoid into its parameter range:
//!
//! | direction | drives                        | range          | score scale |
//! |-----------|-------------------------------|----------------|-------------|
//! | 0         | `f0_hz`                       | 75 .. 400      | 4.0         |
//! | 1         | `formants_hz[0]`              | 250 .. 850     | 3.0         |
//! | 2         | `formants_hz[1]`              | 900 .. 2300    | 4.0         |
//! | 3         | `formants_hz[2]`              | 2400 .. 3400   | 3.0         |
//! | 4         | `breathiness`                 | 0 .. 0.6       | 2.0         |
//! | 5         | `speech_rate`, `vibrato_depth`| 0.7 .. 1.4, 0 .. 0.03 | 2.0  |
//!
//! `value = lo + (hi - lo) * sigmoid(score / scale)`, so the zero embedding
//! maps to the midpoint of every range. The formant sub-ranges are disjoint,
//! which keeps the three formants strictly increasing.

use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::linalg;
use crate::pca::{Embedding, EMBEDDING_DIM};

use super::SynthError;

/// Seed of the control directions. Changing it changes every voice.
pub const CONTROL_SEED: u64 = 0x5EED_0F0C_A1C0_DE06;

/// Number of control directions.
pub const CONTROL_COUNT: usize = 6;

/// Parameter range and score scale for one sigmoid-squashed control.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlRange {
    pub lo: f64,
    pub hi: f64,
    pub scale: f64,
}

impl ControlRange {
    const fn new(lo: f64, hi: f64, scale: f64) -> Self {
        Self { lo, hi, scale }
    }

    pub fn squash(&self, score: f64) -> f64 {
        self.lo + (self.hi - self.lo) * sigmoid(score / self.scale)
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

pub const F0_RANGE: ControlRange = ControlRange::new(75.0, 400.0, 4.0);
pub const FORMANT_RANGES: [ControlRange; 3] = [
    ControlRange::new(250.0, 850.0, 3.0),
    ControlRange::new(900.0, 2300.0, 4.0),
    ControlRange::new(2400.0, 3400.0, 3.0),
];
pub const BREATHINESS_RANGE: ControlRange = ControlRange::new(0.0, 0.6, 2.0);
pub const SPEECH_RATE_RANGE: ControlRange = ControlRange::new(0.7, 1.4, 2.0);
pub const VIBRATO_RANGE: ControlRange = ControlRange::new(0.0, 0.03, 2.0);

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Six orthonormal unit vectors in embedding space, generated from
/// [`CONTROL_SEED`] by Gaussian sampling and Gram-Schmidt.
pub fn control_directions() -> &'static [Vec<f64>] {
    static DIRS: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
    DIRS.get_or_init(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(CONTROL_SEED);
        let mut dirs: Vec<Vec<f64>> = Vec::with_capacity(CONTROL_COUNT);
        while dirs.len() < CONTROL_COUNT {
            let mut v: Vec<f64> = (0..EMBEDDING_DIM).map(|_| rng.sample(StandardNormal)).collect();
            for _ in 0..2 {
                for u in &dirs {
                    let p = linalg::dot(&v, u);
                    linalg::axpy(-p, u, &mut v);
                }
            }
            let n = linalg::norm(&v);
            v.iter_mut().for_each(|x| *x /= n);
            dirs.push(v);
        }
        dirs
    })
}

/// Controls of the parametric voice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoiceParams {
    pub f0_hz: f64,
    pub formants_hz: [f64; 3],
    pub breathiness: f64,
    pub speech_rate: f64,
    pub vibrato_depth: f64,
}

impl VoiceParams {
    /// Parameters of the zero embedding.
    pub fn midpoint() -> Self {
        Self {
            f0_hz: F0_RANGE.midpoint(),
            formants_hz: [
                FORMANT_RANGES[0].midpoint(),
                FORMANT_RANGES[1].midpoint(),
                FORMANT_RANGES[2].midpoint(),
            ],
            breathiness: BREATHINESS_RANGE.midpoint(),
            speech_rate: SPEECH_RATE_RANGE.midpoint(),
            vibrato_depth: VIBRATO_RANGE.midpoint(),
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let in_range = |v: f64, lo: f64, hi: f64| v.is_finite() && (lo..=hi).contains(&v);
        if !in_range(self.f0_hz, 75.0, 400.0) {
            return Err(SynthError::Validation(format!("f0 {} outside [75, 400]", self.f0_hz)));
        }
        if self.formants_hz.iter().any(|&f| !in_range(f, 200.0, 3500.0)) {
            return Err(SynthError::Validation("formant outside [200, 3500]".into()));
        }
        if !(self.formants_hz[0] < self.formants_hz[1] && self.formants_hz[1] < self.formants_hz[2]) {
            return Err(SynthError::Validation("formants must be strictly increasing".into()));
        }
        if !in_range(self.breathiness, 0.0, 1.0) {
            return Err(SynthError::Validation("breathiness outside [0, 1]".into()));
        }
        if !in_range(self.speech_rate, 0.7, 1.4) {
            return Err(SynthError::Validation("speech rate outside [0.7, 1.4]".into()));
        }
        if !in_range(self.vibrato_depth, 0.0, 0.05) {
            return Err(SynthError::Validation("vibrato depth outside [0, 0.05]".into()));
        }
        Ok(())
    }
}

/// Scores of `embedding` along the six control directions.
pub fn control_scores(embedding: &Embedding<f64>) -> [f64; CONTROL_COUNT] {
    let mut out = [0.0; CONTROL_COUNT];
    for (o, d) in out.iter_mut().zip(control_directions()) {
        *o = linalg::dot(d, embedding.as_slice());
    }
    out
}

pub fn embedding_to_params(embedding: &Embedding<f64>) -> VoiceParams {
    let s = control_scores(embedding);
    VoiceParams {
        f0_hz: F0_RANGE.squash(s[0]),
        formants_hz: [
            FORMANT_RANGES[0].squash(s[1]),
            FORMANT_RANGES[1].squash(s[2]),
            FORMANT_RANGES[2].squash(s[3]),
        ],
        breathiness: BREATHINESS_RANGE.squash(s[4]),
        speech_rate: SPEECH_RATE_RANGE.squash(s[5]),
        vibrato_depth: VIBRATO_RANGE.squash(s[5]),
    }
}
