//! Deterministic test signals: harmonic complexes and white noise.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Sum of `harmonics` cosines at integer multiples of `f0`, each with
/// amplitude `amplitude` and a phase drawn from `seed`. Harmonics above
/// Nyquist are dropped.
pub fn harmonic_complex(
    f0: f64,
    harmonics: usize,
    amplitude: f64,
    sample_rate: u32,
    len: usize,
    seed: u64,
) -> Vec<f64> {
    harmonic_series(f0, &vec![amplitude; harmonics], sample_rate, len, seed)
}

/// Like [`harmonic_complex`] with one amplitude per partial; `amplitudes[k-1]`
/// scales harmonic `k`.
pub fn harmonic_series(
    f0: f64,
    amplitudes: &[f64],
    sample_rate: u32,
    len: usize,
    seed: u64,
) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nyquist = sample_rate as f64 / 2.0;
    let partials: Vec<(f64, f64, f64)> = amplitudes
        .iter()
        .enumerate()
        .map(|(i, &a)| ((i + 1) as f64 * f0, a, rng.gen_range(0.0..2.0 * PI)))
        .filter(|(f, _, _)| *f < nyquist)
        .collect();
    let sr = sample_rate as f64;
    (0..len)
        .map(|n| {
            let t = n as f64 / sr;
            partials
                .iter()
                .map(|(f, a, phi)| a * (2.0 * PI * f * t + phi).cos())
                .sum()
        })
        .collect()
}

/// Zero-mean unit-variance Gaussian noise.
pub fn white_noise(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// `signal + g * noise` with `g` chosen so the mix has the requested SNR.
pub fn mix_at_snr(signal: &[f64], noise: &[f64], snr_db: f64) -> Vec<f64> {
    let (es, en) = (energy(signal), energy(noise));
    let gain = if en > 0.0 {
        (es / (en * 10f64.powf(snr_db / 10.0))).sqrt()
    } else {
        0.0
    };
    signal
        .iter()
        .zip(noise)
        .map(|(s, n)| s + gain * n)
        .collect()
}

/// Scales `x` so its largest absolute sample equals `peak`.
pub fn normalize_peak(x: &[f64], peak: f64) -> Vec<f64> {
    let m = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if m == 0.0 {
        return x.to_vec();
    }
    x.iter().map(|v| v * peak / m).collect()
}
