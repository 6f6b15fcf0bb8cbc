//! Full gate analysis of one clip against corpus statistics, written out as
//! PGM images and CSV tracks.
//!
//! ```text
//! cargo run --example gate_pipeline -- [outdir]
//! ```

use std::fs;
use std::path::PathBuf;

use hgcn::audio_io::AudioClip;
use hgcn::pipeline::{analyze_magnitude, PipelineConfig};
use hgcn::sed::corpus_stats;
use hgcn::stft::stft_forward;
use hgcn::synth::{harmonic_series, mix_at_snr, white_noise};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let outdir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("hgcn_gate"));
    let cfg = PipelineConfig::default();
    let stft = cfg.stft()?;
    let len = 16_000;

    let speechy = |f0: f64, seed: u64| {
        let amps: Vec<f64> = (1..=(4000.0 / f0) as usize).map(|k| 0.4 / k as f64).collect();
        let v = harmonic_series(f0, &amps, 16_000, len, seed);
        let gated: Vec<f64> = v
            .iter()
            .enumerate()
            .map(|(n, s)| if n > len / 4 && n < 3 * len / 4 { *s } else { 0.0 })
            .collect();
        mix_at_snr(&gated, &white_noise(len, seed + 9), 45.0)
    };
    let mags = (0..8u64)
        .map(|i| {
            let clip = AudioClip::from_unbounded(speechy(100.0 + 20.0 * i as f64, i), 16_000)?;
            Ok(stft_forward(&clip, &stft)?.magnitude())
        })
        .collect::<hgcn::Result<Vec<_>>>()?;
    let stats = corpus_stats(&mags, cfg.log_floor)?;

    let a = analyze_magnitude(&mags[3], 8000, &stats, &cfg)?;
    fs::create_dir_all(&outdir)?;
    fs::write(outdir.join("rh.pgm"), a.r_h.to_pgm())?;
    fs::write(outdir.join("ra.pgm"), a.r_a.to_pgm())?;
    fs::write(outdir.join("gate.pgm"), a.gate.to_pgm())?;
    fs::write(outdir.join("vad.csv"), a.vad.to_csv("vad"))?;
    fs::write(outdir.join("pitch.csv"), a.pitch.to_csv())?;

    println!("frames {}, active {}, voiced {}", a.vad.len(), a.vad.count_ones(), a.vrd.count_ones());
    println!("open cells: R_H {}, R_A {}, gate {}", a.r_h.count_ones(), a.r_a.count_ones(), a.gate.count_ones());
    println!("images and tracks in {}", outdir.display());
    Ok(())
}
