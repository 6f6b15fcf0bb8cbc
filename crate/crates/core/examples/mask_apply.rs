//! Both masking schemes on one spectrogram: the bounded complex mask and the
//! additive magnitude compensation.

use hgcn::audio_io::AudioClip;
use hgcn::masking::{mask_apply_e, mask_apply_e_with, mask_apply_m, ComplexMask, MagnitudeMask};
use hgcn::stft::{stft_forward, StftConfig};
use hgcn::synth::harmonic_complex;
use ndarray::Array2;

fn energy(m: &Array2<f64>) -> f64 {
    m.iter().map(|v| v * v).sum()
}

fn main() -> hgcn::Result<()> {
    let x = harmonic_complex(150.0, 10, 0.05, 16_000, 8000, 2);
    let spec = stft_forward(&AudioClip::new(x, 16_000)?, &StftConfig::default())?;
    let dim = (spec.frames(), spec.bins());

    // A real mask of 0.5 everywhere: magnitude scaled by tanh(0.5), phase kept.
    let half = ComplexMask::new(Array2::from_elem(dim, 0.5), Array2::zeros(dim))?;
    let e = mask_apply_e(&spec, &half)?;
    println!("complex mask: energy ratio {:.4} (tanh(0.5)^2 = {:.4})",
        energy(&e.magnitude()) / energy(&spec.magnitude()), 0.5f64.tanh().powi(2));

    let hard = mask_apply_e_with(&spec, &half, |r| r.min(1.0))?;
    println!("clipped-linear activation: energy ratio {:.4}", energy(&hard.magnitude()) / energy(&spec.magnitude()));

    let boost = MagnitudeMask::new(Array2::from_shape_fn(dim, |(_, f)| if f < 64 { 1.0 } else { 0.0 }))?;
    let m = mask_apply_m(&spec, &boost)?;
    println!("additive mask: energy ratio {:.4}", energy(&m.magnitude()) / energy(&spec.magnitude()));

    let zero = mask_apply_m(&spec, &MagnitudeMask::zeros(dim.0, dim.1))?;
    println!("zero additive mask is the identity: {}", zero.data() == spec.data());
    Ok(())
}
