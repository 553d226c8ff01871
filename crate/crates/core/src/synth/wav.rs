//! Canonical 44-byte-header RIFF/WAVE, PCM (format 1), mono, 16-bit LE.
//!
//! ```text
//! off  size  field
//!   0     4  "RIFF"
//!   4     4  36 + data_len
//!   8     4  "WAVE"
//!  12     4  "fmt "
//!  16     4  16
//!  20     2  1 (PCM)
//!  22     2  1 (channels)
//!  24     4  sample_rate
//!  28     4  byte_rate = sample_rate * 2
//!  32     2  block_align = 2
//!  34     2  16 (bits per sample)
//!  36     4  "data"
//!  40     4  data_len = 2 * samples
//!  44     …  samples, little-endian i16
//! ```

use super::{AudioClip, SynthError};

pub const WAV_HEADER_LEN: usize = 44;

pub fn encode_wav(clip: &AudioClip) -> Result<Vec<u8>, SynthError> {
    if clip.samples().is_empty() {
        return Err(SynthError::Validation("cannot encode an empty clip".into()));
    }
    let data_len = u32::try_from(clip.samples().len() * 2)
        .map_err(|_| SynthError::Validation("clip too long for WAV".into()))?;
    let sr = clip.sample_rate();
    let mut out = Vec::with_capacity(WAV_HEADER_LEN + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&sr.to_le_bytes());
    out.extend_from_slice(&(sr * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for s in clip.samples() {
        out.extend_from_slice(&s.to_le_bytes());
    }
    Ok(out)
}

fn err(offset: usize, reason: impl Into<String>) -> SynthError {
    SynthError::Format {
        offset,
        reason: reason.into(),
    }
}

fn u16_at(b: &[u8], off: usize) -> u16 {
    u16::from_le_bytes([b[off], b[off + 1]])
}

fn u32_at(b: &[u8], off: usize) -> u32 {
    u32::from_le_bytes([b[off], b[off + 1], b[off + 2], b[off + 3]])
}

/// Decodes the canonical layout written by [`encode_wav`]; anything else is
/// rejected with the offending byte offset.
pub fn decode_wav(bytes: &[u8]) -> Result<AudioClip, SynthError> {
    if bytes.len() < WAV_HEADER_LEN {
        return Err(err(bytes.len(), "truncated header"));
    }
    for (off, tag) in [(0, b"RIFF"), (8, b"WAVE"), (12, b"fmt "), (36, b"data")] {
        if &bytes[off..off + 4] != tag {
            return Err(err(off, format!("expected {:?}", std::str::from_utf8(tag).unwrap())));
        }
    }
    let checks: [(usize, u32, u32); 3] = [
        (16, u32_at(bytes, 16), 16),
        (20, u32::from(u16_at(bytes, 20)), 1),
        (22, u32::from(u16_at(bytes, 22)), 1),
    ];
    for (off, got, want) in checks {
        if got != want {
            return Err(err(off, format!("expected {want}, found {got}")));
        }
    }
    let sr = u32_at(bytes, 24);
    if u32_at(bytes, 28) != sr.wrapping_mul(2) {
        return Err(err(28, "byte rate inconsistent with sample rate"));
    }
    if u16_at(bytes, 32) != 2 {
        return Err(err(32, "block align must be 2"));
    }
    if u16_at(bytes, 34) != 16 {
        return Err(err(34, "only 16-bit PCM is supported"));
    }
    let data_len = u32_at(bytes, 40) as usize;
    if !data_len.is_multiple_of(2) {
        return Err(err(40, "odd data length"));
    }
    if u32_at(bytes, 4) as usize != 36 + data_len {
        return Err(err(4, "RIFF size inconsistent with data length"));
    }
    if bytes.len() != WAV_HEADER_LEN + data_len {
        return Err(err(bytes.len().min(WAV_HEADER_LEN + data_len), "data length mismatch"));
    }
    let samples = bytes[WAV_HEADER_LEN..]
        .chunks_exact(2)
        .map(|c| i16::from_le_bytes([c[0], c[1]]))
        .collect();
    Ok(AudioClip::from_samples(samples, sr))
}
