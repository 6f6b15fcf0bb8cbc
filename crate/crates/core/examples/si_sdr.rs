//! SI-SDR of a noisy harmonic signal at several mixing levels, plus its
//! insensitivity to gain.

use hgcn::metrics::si_sdr_samples;
use hgcn::synth::{harmonic_complex, mix_at_snr, white_noise};

fn main() -> hgcn::Result<()> {
    let clean = harmonic_complex(200.0, 6, 0.1, 16_000, 16_000, 1);
    let noise = white_noise(16_000, 2);
    for snr in [-5.0, 0.0, 5.0, 20.0] {
        let noisy = mix_at_snr(&clean, &noise, snr);
        let loud: Vec<f64> = noisy.iter().map(|v| 4.0 * v).collect();
        println!(
            "mixed at {snr:>5.1} dB -> SI-SDR {:>7.3} dB (x4 gain: {:>7.3} dB)",
            si_sdr_samples(&noisy, &clean)?,
            si_sdr_samples(&loud, &clean)?
        );
    }
    Ok(())
}
