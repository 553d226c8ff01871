//! Source-filter renderer of the parametric backend.
//!
//! Each whitespace-separated token becomes one vowel-like segment:
//! a Rosenberg glottal pulse train at f0 (with sinusoidal vibrato),
//! differentiated for lip radiation, mixed with white noise by
//! `breathiness`, then passed through three cascaded two-pole formant
//! resonators. Segments last `BASE_SEGMENT_MS / speech_rate`, carry a raised
//! cosine fade of `FADE_MS` at both ends, and are separated by `GAP_MS` of
//! silence. The whole clip is peak-normalised before PCM conversion.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::params::VoiceParams;
use super::{AudioClip, SynthError};

pub const BASE_SEGMENT_MS: f64 = 180.0;
pub const GAP_MS: f64 = 40.0;
pub const FADE_MS: f64 = 10.0;
pub const VIBRATO_RATE_HZ: f64 = 5.5;
pub const FORMANT_BANDWIDTHS_HZ: [f64; 3] = [80.0, 110.0, 150.0];
/// Output peak as a fraction of 16-bit full scale.
pub const OUTPUT_PEAK: f64 = 0.7;

const NOISE_SEED: u64 = 0xB4EA_7400_0000_0001;
const OPEN_PHASE: f64 = 0.4;
const CLOSING_PHASE: f64 = 0.16;

/// Samples in one token segment.
pub fn segment_len(speech_rate: f64, sample_rate: u32) -> usize {
    (BASE_SEGMENT_MS / speech_rate * f64::from(sample_rate) / 1000.0).round() as usize
}

/// Samples of silence between segments.
pub fn gap_len(sample_rate: u32) -> usize {
    (GAP_MS * f64::from(sample_rate) / 1000.0).round() as usize
}

pub fn tokens(text: &str) -> impl Iterator<Item = &str> {
    text.split_whitespace()
}

/// Renders `text` with explicit voice parameters.
pub fn render(params: &VoiceParams, text: &str, sample_rate: u32) -> Result<AudioClip, SynthError> {
    params.validate()?;
    let words: Vec<&str> = tokens(text).collect();
    if words.is_empty() {
        return Err(SynthError::Validation("text has no tokens".into()));
    }
    let sr = f64::from(sample_rate);
    let seg = segment_len(params.speech_rate, sample_rate);
    let gap = gap_len(sample_rate);
    let fade = ((FADE_MS * sr / 1000.0).round() as usize).min(seg / 2);

    let mut out = Vec::with_capacity(words.len() * (seg + gap));
    for (index, word) in words.iter().enumerate() {
        if index > 0 {
            out.resize(out.len() + gap, 0.0);
        }
        let start = out.len();
        render_segment(params, word, index, seg, sr, &mut out);
        apply_fades(&mut out[start..], fade);
    }

    let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let gain = if peak > 0.0 { OUTPUT_PEAK / peak } else { 0.0 };
    Ok(AudioClip::from_float(out.iter().map(|v| v * gain), sample_rate))
}

/// Deterministic per-token colouring of the formants, within ±6%.
fn token_formant_factors(word: &str) -> [f64; 3] {
    // FNV-1a
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in word.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    let mut f = [0.0; 3];
    for (i, slot) in f.iter_mut().enumerate() {
        let byte = ((h >> (i * 16)) & 0xffff) as f64 / 65535.0;
        *slot = 0.94 + 0.12 * byte;
    }
    f
}

fn glottal_pulse(phase: f64) -> f64 {
    if phase < OPEN_PHASE {
        0.5 * (1.0 - (PI * phase / OPEN_PHASE).cos())
    } else if phase < OPEN_PHASE + CLOSING_PHASE {
        (0.5 * PI * (phase - OPEN_PHASE) / CLOSING_PHASE).cos()
    } else {
        0.0
    }
}

struct Resonator {
    a: f64,
    b: f64,
    c: f64,
    y1: f64,
    y2: f64,
}

impl Resonator {
    fn new(freq: f64, bandwidth: f64, sr: f64) -> Self {
        let c = -(-2.0 * PI * bandwidth / sr).exp();
        let b = 2.0 * (-PI * bandwidth / sr).exp() * (2.0 * PI * freq / sr).cos();
        Self {
            a: 1.0 - b - c,
            b,
            c,
            y1: 0.0,
            y2: 0.0,
        }
    }

    fn step(&mut self, x: f64) -> f64 {
        let y = self.a * x + self.b * self.y1 + self.c * self.y2;
        self.y2 = self.y1;
        self.y1 = y;
        y
    }
}

fn render_segment(p: &VoiceParams, word: &str, index: usize, len: usize, sr: f64, out: &mut Vec<f64>) {
    let colour = token_formant_factors(word);
    let nyquist_guard = 0.45 * sr;
    let mut filters: Vec<Resonator> = p
        .formants_hz
        .iter()
        .zip(colour)
        .zip(FORMANT_BANDWIDTHS_HZ)
        .map(|((&f, k), bw)| Resonator::new((f * k).min(nyquist_guard), bw, sr))
        .collect();
    let mut noise = ChaCha8Rng::seed_from_u64(NOISE_SEED ^ index as u64);

    // keeps the differentiated pulse at a comparable level across f0
    let voiced_gain = sr / p.f0_hz / 4.0;
    let mut phase = 0.0;
    let mut prev = 0.0;
    for n in 0..len {
        let t = n as f64 / sr;
        let f = p.f0_hz * (1.0 + p.vibrato_depth * (2.0 * PI * VIBRATO_RATE_HZ * t).sin());
        let g = glottal_pulse(phase);
        let voiced = (g - prev) * voiced_gain;
        prev = g;
        phase += f / sr;
        if phase >= 1.0 {
            phase -= 1.0;
        }
        let breath: f64 = noise.random_range(-1.0..1.0);
        let mut x = (1.0 - p.breathiness) * voiced + p.breathiness * 0.5 * breath;
        for r in filters.iter_mut() {
            x = r.step(x);
        }
        out.push(x);
    }
}

fn apply_fades(segment: &mut [f64], fade: usize) {
    if fade == 0 {
        return;
    }
    let len = segment.len();
    for i in 0..fade {
        let w = 0.5 * (1.0 - (PI * i as f64 / fade as f64).cos());
        segment[i] *= w;
        segment[len - 1 - i] *= w;
    }
}
