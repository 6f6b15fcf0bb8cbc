//! Analysis and resynthesis with both overlap settings, reporting the
//! interior reconstruction SNR.

use hgcn::audio_io::AudioClip;
use hgcn::stft::{istft_inverse, power_compress, stft_forward, StftConfig};
use hgcn::synth::{normalize_peak, white_noise};

fn snr_db(x: &[f64], y: &[f64], skip: usize) -> f64 {
    let (mut s, mut e) = (0.0, 0.0);
    for n in skip..y.len() - skip {
        s += x[n] * x[n];
        e += (x[n] - y[n]).powi(2);
    }
    10.0 * (s / e).log10()
}

fn main() -> hgcn::Result<()> {
    let x = normalize_peak(&white_noise(16_000, 1), 0.8);
    let clip = AudioClip::new(x.clone(), 16_000)?;

    for (name, cfg) in [
        ("hop 128", StftConfig::default()),
        ("hop 384", StftConfig::quarter_overlap(512, 512)?),
    ] {
        let spec = stft_forward(&clip, &cfg)?;
        let y = istft_inverse(&spec)?;
        println!(
            "{name}: {} frames x {} bins, {} samples back, interior SNR {:.1} dB",
            spec.frames(),
            spec.bins(),
            y.len(),
            snr_db(&x, y.samples(), cfg.win_length())
        );
    }

    let spec = stft_forward(&clip, &StftConfig::default())?;
    let compressed = power_compress(&spec, 0.3)?;
    let peak = |m: ndarray::Array2<f64>| m.iter().cloned().fold(0.0, f64::max);
    println!(
        "power 0.3: peak magnitude {:.2} -> {:.2}",
        peak(spec.magnitude()),
        peak(compressed.magnitude())
    );
    Ok(())
}
