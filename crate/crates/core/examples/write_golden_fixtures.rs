//! Regenerates `tests/fixtures/golden.evvf` and `tests/fixtures/golden.wav`.
//! Only needed when the voice-file layout or the renderer changes on purpose.
//!
//! cargo run -p evoforge-core --example write_golden_fixtures

use chrono::{TimeZone, Utc};
use evoforge_core::corpus::VoiceSpace;
use evoforge_core::pca::Coefficients;
use evoforge_core::synth::{encode_wav, synthesize, ParametricBackend, SynthesisRequest, PARAMETRIC_V1};
use evoforge_core::voicefile::VoiceFile;

fn main() {
    let space = VoiceSpace::reference();
    let coeffs = Coefficients::new(vec![1.5, -0.75, 0.5, -0.25, 0.125, 0.0, 0.0, 0.0, 0.0, -0.0625]).unwrap();
    let created = Utc.timestamp_millis_opt(1_735_732_800_123).unwrap();
    let voice = VoiceFile::from_coefficients(&space.pca, coeffs, 7, 0x00C0_FFEE, created, PARAMETRIC_V1).unwrap();
    let bytes = voice.encode();
    let request = SynthesisRequest::new(voice.embedding.clone(), "golden fixture", 16000).unwrap();
    let wav = encode_wav(&synthesize(&request, &ParametricBackend).unwrap()).unwrap();

    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    std::fs::create_dir_all(&dir).unwrap();
    std::fs::write(dir.join("golden.evvf"), &bytes).unwrap();
    std::fs::write(dir.join("golden.wav"), &wav).unwrap();
    let crc = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().unwrap());
    println!("golden.evvf: {} bytes, crc32 {crc:#010x}", bytes.len());
    println!("golden.wav: {} bytes", wav.len());
    println!("embedding[0..3] = {:?}", &voice.embedding.as_slice()[..3]);
}
