//! Synthesizer contract (embedding + text → audio), the deterministic
//! `parametric-v1` reference backend and WAV encoding.

mod params;
mod render;
mod wav;

use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

use crate::pca::Embedding;

pub use params::{
    control_directions, control_scores, embedding_to_params, ControlRange, VoiceParams,
    BREATHINESS_RANGE, CONTROL_COUNT, CONTROL_SEED, F0_RANGE, FORMANT_RANGES, SPEECH_RATE_RANGE,
    VIBRATO_RANGE,
};
pub use render::{
    gap_len, render, segment_len, BASE_SEGMENT_MS, FADE_MS, FORMANT_BANDWIDTHS_HZ, GAP_MS,
    OUTPUT_PEAK, VIBRATO_RATE_HZ,
};
pub use wav::{decode_wav, encode_wav, WAV_HEADER_LEN};

pub const DEFAULT_SAMPLE_RATE: u32 = 22050;
pub const SUPPORTED_SAMPLE_RATES: [u32; 3] = [16000, 22050, 44100];
pub const MAX_TEXT_CHARS: usize = 500;

/// Name of the reference backend.
pub const PARAMETRIC_V1: &str = "parametric-v1";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("validation error: {0}")]
    Validation(String),
    #[error("unknown synthesizer backend {0:?}")]
    UnknownBackend(String),
    #[error("malformed WAV at byte {offset}: {reason}")]
    Format { offset: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisRequest {
    pub embedding: Embedding<f64>,
    pub text: String,
    pub sample_rate: u32,
}

impl SynthesisRequest {
    pub fn new(embedding: Embedding<f64>, text: impl Into<String>, sample_rate: u32) -> Result<Self, SynthError> {
        let req = Self {
            embedding,
            text: text.into(),
            sample_rate,
        };
        req.validate()?;
        Ok(req)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        validate_text(&self.text)?;
        validate_sample_rate(self.sample_rate)
    }
}

pub fn validate_text(text: &str) -> Result<(), SynthError> {
    let chars = text.chars().count();
    if text.trim().is_empty() {
        return Err(SynthError::Validation("text is empty".into()));
    }
    if chars > MAX_TEXT_CHARS {
        return Err(SynthError::Validation(format!(
            "text has {chars} characters, limit is {MAX_TEXT_CHARS}"
        )));
    }
    Ok(())
}

pub fn validate_sample_rate(sample_rate: u32) -> Result<(), SynthError> {
    if SUPPORTED_SAMPLE_RATES.contains(&sample_rate) {
        Ok(())
    } else {
        Err(SynthError::Validation(format!(
            "unsupported sample rate {sample_rate}"
        )))
    }
}

/// Mono 16-bit PCM audio.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AudioClip {
    samples: Vec<i16>,
    sample_rate: u32,
    clipped: usize,
}

impl AudioClip {
    pub fn from_samples(samples: Vec<i16>, sample_rate: u32) -> Self {
        Self {
            samples,
            sample_rate,
            clipped: 0,
        }
    }

    /// Converts samples in [-1, 1] to PCM, saturating (and counting) values
    /// outside full scale.
    pub fn from_float(samples: impl IntoIterator<Item = f64>, sample_rate: u32) -> Self {
        let mut clipped = 0;
        let samples = samples
            .into_iter()
            .map(|v| {
                let scaled = (v * 32767.0).round();
                if scaled > f64::from(i16::MAX) || scaled < f64::from(i16::MIN) {
                    clipped += 1;
                }
                scaled.clamp(f64::from(i16::MIN), f64::from(i16::MAX)) as i16
            })
            .collect();
        Self {
            samples,
            sample_rate,
            clipped,
        }
    }

    pub fn samples(&self) -> &[i16] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn clipped_samples(&self) -> usize {
        self.clipped
    }

    /// `round(1000 · len / sample_rate)`
    pub fn duration_ms(&self) -> u64 {
        if self.sample_rate == 0 {
            return 0;
        }
        let len = self.samples.len() as u64;
        let sr = u64::from(self.sample_rate);
        (1000 * len + sr / 2) / sr
    }
}

pub trait SynthesizerBackend: Send + Sync {
    fn name(&self) -> &str;
    fn synthesize(&self, request: &SynthesisRequest) -> Result<AudioClip, SynthError>;
}

/// The deterministic source-filter reference backend.
#[derive(Debug, Default, Clone, Copy)]
pub struct ParametricBackend;

impl SynthesizerBackend for ParametricBackend {
    fn name(&self) -> &str {
        PARAMETRIC_V1
    }

    fn synthesize(&self, request: &SynthesisRequest) -> Result<AudioClip, SynthError> {
        request.validate()?;
        let params = embedding_to_params(&request.embedding);
        render(&params, &request.text, request.sample_rate)
    }
}

pub fn synthesize(request: &SynthesisRequest, backend: &dyn SynthesizerBackend) -> Result<AudioClip, SynthError> {
    request.validate()?;
    backend.synthesize(request)
}

/// Backends keyed by name.
#[derive(Clone)]
pub struct BackendRegistry {
    backends: BTreeMap<String, Arc<dyn SynthesizerBackend>>,
}

impl Default for BackendRegistry {
    fn default() -> Self {
        let mut r = Self {
            backends: BTreeMap::new(),
        };
        r.backends.insert(PARAMETRIC_V1.to_string(), Arc::new(ParametricBackend));
        r
    }
}

impl BackendRegistry {
    /// Registers a backend under its own name. The reference name is reserved.
    pub fn register(&mut self, backend: Arc<dyn SynthesizerBackend>) -> Result<(), SynthError> {
        let name = backend.name().to_string();
        if name == PARAMETRIC_V1 {
            return Err(SynthError::Validation(format!("{PARAMETRIC_V1:?} is reserved")));
        }
        self.backends.insert(name, backend);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn SynthesizerBackend>, SynthError> {
        self.backends
            .get(name)
            .cloned()
            .ok_or_else(|| SynthError::UnknownBackend(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.backends.keys().map(String::as_str)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_validation() {
        let e = Embedding::zeros();
        assert!(SynthesisRequest::new(e.clone(), "   ", 22050).is_err());
        assert!(SynthesisRequest::new(e.clone(), "hi", 8000).is_err());
        assert!(SynthesisRequest::new(e.clone(), "x".repeat(501), 22050).is_err());
        assert!(SynthesisRequest::new(e, "é".repeat(500), 44100).is_ok());
    }

    #[test]
    fn saturating_conversion_counts_clips() {
        let clip = AudioClip::from_float([0.0, 2.0, -2.0, 0.5], 16000);
        assert_eq!(clip.samples(), &[0, 32767, -32768, 16384]);
        assert_eq!(clip.clipped_samples(), 2);
    }

    #[test]
    fn duration_rounds() {
        assert_eq!(AudioClip::from_samples(vec![0; 22050], 22050).duration_ms(), 1000);
        assert_eq!(AudioClip::from_samples(vec![0; 11], 22050).duration_ms(), 0);
        assert_eq!(AudioClip::from_samples(vec![0; 12], 22050).duration_ms(), 1);
    }

    #[test]
    fn registry_has_reference_backend() {
        let mut reg = BackendRegistry::default();
        assert_eq!(reg.get(PARAMETRIC_V1).unwrap().name(), PARAMETRIC_V1);
        assert!(matches!(reg.get("vits"), Err(SynthError::UnknownBackend(_))));
        assert!(reg.register(Arc::new(ParametricBackend)).is_err());
    }

    #[test]
    fn same_request_same_samples() {
        let req = SynthesisRequest::new(Embedding::zeros(), "one two", 16000).unwrap();
        let a = synthesize(&req, &ParametricBackend).unwrap();
        let b = synthesize(&req, &ParametricBackend).unwrap();
        assert_eq!(a, b);
    }
}
