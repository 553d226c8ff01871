//! Versioned, checksummed binary export of a finished voice.
//!
//! All integers and doubles are little-endian.
//!
//! ```text
//! off      size   field
//!   0         4   magic "EVVF"
//!   4         4   u32 version (1)
//!   8         4   u32 embedding_dim (256)
//!  12         4   u32 coeff_count k
//!  16         8   u64 generations
//!  24         8   u64 rng_seed
//!  32         8   i64 created_at, ms since the Unix epoch (UTC)
//!  40         4   u32 h = backend_hint length in bytes
//!  44         h   backend_hint, UTF-8
//!  44+h    2048   embedding, 256 × f64
//!  ...      8·k   pca_coeffs, k × f64
//!  ...        4   u32 CRC-32 (IEEE) of every preceding byte
//! ```
//!
//! The embedding is authoritative for consumers; the coefficients are carried
//! for auditing and must reproduce the embedding through the PCA that made
//! the file.

use chrono::{DateTime, TimeZone, Utc};
use thiserror::Error;

use crate::pca::{Coefficients, Embedding, PcaModel, EMBEDDING_DIM};

pub const MAGIC: [u8; 4] = *b"EVVF";
pub const VERSION: u32 = 1;
pub const FIXED_HEADER_LEN: usize = 44;
/// File extension used for downloads.
pub const EXTENSION: &str = "evvf";

const MAX_COEFFS: u32 = EMBEDDING_DIM as u32;
const MAX_HINT_LEN: u32 = 1024;
const CONSISTENCY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VoiceFileError {
    #[error("malformed voice file at byte {offset}: {reason}")]
    Format { offset: usize, reason: String },
    #[error("checksum mismatch at byte {offset}: stored {stored:#010x}, computed {computed:#010x}")]
    Integrity {
        offset: usize,
        stored: u32,
        computed: u32,
    },
    #[error("inconsistent voice: {0}")]
    Inconsistent(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoiceFile {
    pub version: u32,
    pub embedding: Embedding<f64>,
    pub pca_coeffs: Coefficients<f64>,
    pub generations: u64,
    pub rng_seed: u64,
    pub created_at: DateTime<Utc>,
    pub backend_hint: String,
}

impl VoiceFile {
    /// Builds a file for `coeffs`, deriving the embedding through `pca`.
    pub fn from_coefficients(
        pca: &PcaModel<f64>,
        coeffs: Coefficients<f64>,
        generations: u64,
        rng_seed: u64,
        created_at: DateTime<Utc>,
        backend_hint: impl Into<String>,
    ) -> Result<Self, VoiceFileError> {
        let embedding = pca
            .inverse(&coeffs)
            .map_err(|e| VoiceFileError::Inconsistent(e.to_string()))?;
        Ok(Self {
            version: VERSION,
            embedding,
            pca_coeffs: coeffs,
            generations,
            rng_seed,
            // the format stores milliseconds
            created_at: truncate_to_millis(created_at),
            backend_hint: backend_hint.into(),
        })
    }

    /// Largest per-element deviation between the stored embedding and the
    /// one reconstructed from the stored coefficients.
    pub fn consistency_error(&self, pca: &PcaModel<f64>) -> Result<f64, VoiceFileError> {
        let rebuilt = pca
            .inverse(&self.pca_coeffs)
            .map_err(|e| VoiceFileError::Inconsistent(e.to_string()))?;
        Ok(rebuilt
            .as_slice()
            .iter()
            .zip(self.embedding.as_slice())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    pub fn check_consistency(&self, pca: &PcaModel<f64>) -> Result<(), VoiceFileError> {
        let err = self.consistency_error(pca)?;
        if err > CONSISTENCY_TOLERANCE {
            return Err(VoiceFileError::Inconsistent(format!(
                "embedding deviates from inverse(pca, coeffs) by {err:e}"
            )));
        }
        Ok(())
    }

    pub fn encode(&self) -> Vec<u8> {
        encode_voicefile(self)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, VoiceFileError> {
        decode_voicefile(bytes)
    }
}

pub fn truncate_to_millis(t: DateTime<Utc>) -> DateTime<Utc> {
    Utc.timestamp_millis_opt(t.timestamp_millis())
        .single()
        .expect("millisecond timestamp in range")
}

pub fn encode_voicefile(v: &VoiceFile) -> Vec<u8> {
    let hint = v.backend_hint.as_bytes();
    let k = v.pca_coeffs.len();
    let mut out = Vec::with_capacity(FIXED_HEADER_LEN + hint.len() + 8 * (EMBEDDING_DIM + k) + 4);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&v.version.to_le_bytes());
    out.extend_from_slice(&(EMBEDDING_DIM as u32).to_le_bytes());
    out.extend_from_slice(&(k as u32).to_le_bytes());
    out.extend_from_slice(&v.generations.to_le_bytes());
    out.extend_from_slice(&v.rng_seed.to_le_bytes());
    out.extend_from_slice(&v.created_at.timestamp_millis().to_le_bytes());
    out.extend_from_slice(&(hint.len() as u32).to_le_bytes());
    out.extend_from_slice(hint);
    for x in v.embedding.as_slice() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    for x in v.pca_coeffs.as_slice() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], VoiceFileError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(VoiceFileError::Format {
                offset: self.bytes.len(),
                reason: format!("truncated while reading {what}"),
            }),
        }
    }

    fn u32(&mut self, what: &str) -> Result<u32, VoiceFileError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64, VoiceFileError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize, what: &str) -> Result<Vec<f64>, VoiceFileError> {
        let raw = self.take(8 * n, what)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

fn format_err(offset: usize, reason: impl Into<String>) -> VoiceFileError {
    VoiceFileError::Format {
        offset,
        reason: reason.into(),
    }
}

pub fn decode_voicefile(bytes: &[u8]) -> Result<VoiceFile, VoiceFileError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(format_err(0, "bad magic, expected \"EVVF\""));
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(format_err(4, format!("unknown version {version}")));
    }
    let dim = r.u32("embedding_dim")?;
    if dim as usize != EMBEDDING_DIM {
        return Err(format_err(8, format!("embedding_dim {dim}, expected {EMBEDDING_DIM}")));
    }
    let k = r.u32("coeff_count")?;
    if k == 0 || k > MAX_COEFFS {
        return Err(format_err(12, format!("coeff_count {k} out of range")));
    }
    let generations = r.u64("generations")?;
    let rng_seed = r.u64("rng_seed")?;
    let millis = r.u64("created_at")? as i64;
    let created_at = Utc
        .timestamp_millis_opt(millis)
        .single()
        .ok_or_else(|| format_err(32, "timestamp out of range"))?;
    let hint_len = r.u32("backend_hint length")?;
    if hint_len > MAX_HINT_LEN {
        return Err(format_err(40, format!("backend_hint length {hint_len} too large")));
    }
    let hint_bytes = r.take(hint_len as usize, "backend_hint")?;
    let backend_hint = std::str::from_utf8(hint_bytes)
        .map_err(|e| format_err(FIXED_HEADER_LEN + e.valid_up_to(), "backend_hint is not UTF-8"))?
        .to_string();
    let emb_offset = r.pos;
    let embedding = r.f64s(EMBEDDING_DIM, "embedding")?;
    let coeff_offset = r.pos;
    let coeffs = r.f64s(k as usize, "pca_coeffs")?;
    let crc_offset = r.pos;
    let stored = r.u32("checksum")?;
    if r.pos != bytes.len() {
        return Err(format_err(r.pos, "trailing bytes after checksum"));
    }
    let computed = crc32fast::hash(&bytes[..crc_offset]);
    if stored != computed {
        return Err(VoiceFileError::Integrity {
            offset: crc_offset,
            stored,
            computed,
        });
    }
    let embedding = Embedding::new(embedding).map_err(|e| format_err(emb_offset, e.to_string()))?;
    let pca_coeffs = Coefficients::new(coeffs).map_err(|e| format_err(coeff_offset, e.to_string()))?;
    Ok(VoiceFile {
        version,
        embedding,
        pca_coeffs,
        generations,
        rng_seed,
        created_at,
        backend_hint,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::VoiceSpace;
    use proptest::prelude::*;

    fn sample(space: &VoiceSpace) -> VoiceFile {
        VoiceFile::from_coefficients(
            &space.pca,
            space.high_seed.clone(),
            12,
            77,
            Utc.with_ymd_and_hms(2024, 5, 1, 12, 0, 0).unwrap(),
            "parametric-v1",
        )
        .unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let space = VoiceSpace::reference();
        let v = sample(&space);
        let bytes = v.encode();
        assert_eq!(bytes.len(), FIXED_HEADER_LEN + 13 + 8 * 266 + 4);
        let back = VoiceFile::decode(&bytes).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.encode(), bytes);
        back.check_consistency(&space.pca).unwrap();
    }

    #[test]
    fn flipped_embedding_byte_fails_checksum() {
        let space = VoiceSpace::reference();
        let mut bytes = sample(&space).encode();
        let at = FIXED_HEADER_LEN + 13 + 100;
        bytes[at] ^= 0x01;
        match VoiceFile::decode(&bytes) {
            Err(VoiceFileError::Integrity { offset, .. }) => assert_eq!(offset, bytes.len() - 4),
            other => panic!("expected integrity error, got {other:?}"),
        }
    }

    #[test]
    fn structural_errors_carry_offsets() {
        let space = VoiceSpace::reference();
        let good = sample(&space).encode();

        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(decode_voicefile(&bad), Err(VoiceFileError::Format { offset: 0, .. })));

        let mut bad = good.clone();
        bad[4] = 2;
        assert!(matches!(decode_voicefile(&bad), Err(VoiceFileError::Format { offset: 4, .. })));

        for cut in [3, 20, 60, good.len() - 1] {
            match decode_voicefile(&good[..cut]) {
                Err(VoiceFileError::Format { offset, .. }) => assert_eq!(offset, cut),
                other => panic!("cut {cut}: {other:?}"),
            }
        }

        let mut long = good.clone();
        long.push(0);
        assert!(matches!(decode_voicefile(&long), Err(VoiceFileError::Format { .. })));
    }

    #[test]
    fn tampered_coefficients_are_inconsistent() {
        let space = VoiceSpace::reference();
        let mut v = sample(&space);
        let mut c = v.pca_coeffs.clone().into_vec();
        c[0] += 1e-3;
        v.pca_coeffs = Coefficients::new(c).unwrap();
        assert!(v.check_consistency(&space.pca).is_err());
    }

    proptest! {
        #[test]
        fn arbitrary_files_round_trip(
            emb in prop::collection::vec(-1e6f64..1e6, EMBEDDING_DIM),
            coeffs in prop::collection::vec(-1e3f64..1e3, 1..16),
            generations in any::<u64>(),
            seed in any::<u64>(),
            millis in 0i64..4_000_000_000_000,
            hint in "[a-z0-9-]{0,24}",
        ) {
            let v = VoiceFile {
                version: VERSION,
                embedding: Embedding::new(emb).unwrap(),
                pca_coeffs: Coefficients::new(coeffs).unwrap(),
                generations,
                rng_seed: seed,
                created_at: Utc.timestamp_millis_opt(millis).unwrap(),
                backend_hint: hint,
            };
            let bytes = v.encode();
            prop_assert_eq!(decode_voicefile(&bytes).unwrap(), v);
        }
    }
}
