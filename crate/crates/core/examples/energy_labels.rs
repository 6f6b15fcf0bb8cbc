//! Corpus statistics, strict energy labels at both offsets, and the frame
//! activity/voicing decisions they imply.

use hgcn::audio_io::AudioClip;
use hgcn::harmonic::LOG_FLOOR;
use hgcn::sed::{
    corpus_stats, energy_labels, make_thresholds, vad_track, vrd_track, EPSILON_A, EPSILON_B,
    VAD_COUNT_THRESHOLD,
};
use hgcn::stft::{stft_forward, StftConfig};
use hgcn::synth::{harmonic_series, white_noise};

fn mag(x: Vec<f64>) -> ndarray::Array2<f64> {
    let clip = AudioClip::from_unbounded(x, 16_000).unwrap();
    stft_forward(&clip, &StftConfig::default()).unwrap().magnitude()
}

fn main() -> hgcn::Result<()> {
    let len = 8000;
    let amps: Vec<f64> = (1..=30).map(|k| 0.3 / k as f64).collect();
    let corpus: Vec<_> = (0..12u64)
        .map(|i| {
            let voice = harmonic_series(110.0 + 15.0 * i as f64, &amps, 16_000, len, i);
            let hiss = white_noise(len, 100 + i);
            let level = if i % 3 == 0 { 0.0 } else { 1.0 };
            mag(voice.iter().zip(&hiss).map(|(v, n)| level * v + 0.003 * n).collect())
        })
        .collect();
    let stats = corpus_stats(&corpus, LOG_FLOOR)?;
    println!("{} clips, mu[10] = {:.3}, sigma[10] = {:.3}", stats.clip_count(), stats.mu()[10], stats.sigma()[10]);

    let probe = &corpus[1];
    let ra = energy_labels(probe, &make_thresholds(&stats, EPSILON_A), LOG_FLOOR)?;
    let rb = energy_labels(probe, &make_thresholds(&stats, EPSILON_B), LOG_FLOOR)?;
    let vad = vad_track(&rb, VAD_COUNT_THRESHOLD);
    let vrd = vrd_track(&rb);
    println!("R_A ones {}, R_B ones {}", ra.count_ones(), rb.count_ones());
    println!("VAD {}/{} frames, VRD {}/{} frames", vad.count_ones(), vad.len(), vrd.count_ones(), vrd.len());
    print!("{}", stats.to_csv().lines().take(4).collect::<Vec<_>>().join("\n"));
    println!("\n...");
    Ok(())
}
