//! Per-frame pitch of a noisy harmonic complex, with the harmonic-location
//! raster for the first frame.
//!
//! ```text
//! cargo run --example harmonic_pitch -- [f0_hz] [snr_db]
//! ```

use hgcn::audio_io::AudioClip;
use hgcn::harmonic::{harmonic_raster, pick_pitch, significance_spectrum, IntegralMatrix, LOG_FLOOR};
use hgcn::stft::{stft_forward, StftConfig};
use hgcn::synth::{harmonic_complex, mix_at_snr, white_noise};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let f0: f64 = args.next().map(|a| a.parse()).transpose()?.unwrap_or(180.0);
    let snr: f64 = args.next().map(|a| a.parse()).transpose()?.unwrap_or(10.0);

    let len = 8000;
    let x = mix_at_snr(&harmonic_complex(f0, 8, 1.0, 16_000, len, 3), &white_noise(len, 4), snr);
    let clip = AudioClip::from_unbounded(x, 16_000)?;
    let mag = stft_forward(&clip, &StftConfig::default())?.magnitude();

    let u = IntegralMatrix::build(8000, mag.ncols())?;
    let track = pick_pitch(&significance_spectrum(&mag, &u, LOG_FLOOR)?);
    print!("{}", track.to_csv().lines().take(8).collect::<Vec<_>>().join("\n"));
    println!("\n...");

    let hits = track.pitch_hz().iter().filter(|p| (*p / f0 - 1.0).abs() <= 0.1).count();
    println!("{hits}/{} frames within 10% of {f0} Hz", track.len());

    let raster = harmonic_raster(&track, 8000, mag.ncols());
    let bins: Vec<usize> = (0..raster.bins()).filter(|&b| raster.get(0, b)).take(10).collect();
    println!("frame 0 harmonic bins: {bins:?} ...");
    Ok(())
}
