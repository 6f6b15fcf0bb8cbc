//! Writes a tone to a 16-bit WAV, reads it back and reports the worst
//! quantization error.
//!
//! ```text
//! cargo run --example wav_roundtrip -- [out.wav]
//! ```

use hgcn::audio_io::{read_wav, write_wav, AudioClip};
use hgcn::synth::harmonic_complex;

fn main() -> hgcn::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| std::env::temp_dir().join("hgcn_tone.wav").display().to_string());
    let tone = harmonic_complex(220.0, 4, 0.2, 16_000, 16_000, 7);
    let clip = AudioClip::new(tone, 16_000)?;
    write_wav(&clip, &path)?;

    let back = read_wav(&path)?;
    let worst = clip
        .samples()
        .iter()
        .zip(back.samples())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!("{path}: {} samples, {:.2} s", back.len(), back.duration_secs());
    println!("max error {worst:.3e} (one step is {:.3e})", 1.0 / 32768.0);
    Ok(())
}
