//! Runs the gated compensation blocks on a random magnitude spectrogram,
//! checks causality, and round-trips the weights through a bundle file.

use hgcn::compensator::{
    default_blocks, ghcm_forward, read_weight_bundle, write_weight_bundle, DEFAULT_PRELU_SLOPE,
};
use hgcn::harmonic::BinaryRaster;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (frames, bins) = (20, 257);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = Array2::from_shape_fn((frames, bins), |_| rng.gen_range(0.0..1.5));
    let gate = BinaryRaster::from_fn(frames, bins, |t, f| t > 4 && f % 7 == 0);
    let blocks = default_blocks(42);

    let mask = ghcm_forward(&x, &gate, &blocks)?;
    let (lo, hi) = mask.values().iter().fold((1.0f64, 0.0f64), |(l, h), &v| (l.min(v), h.max(v)));
    println!("mask {}x{} in [{lo:.4}, {hi:.4}]", frames, bins);

    let mut poked = x.clone();
    poked.row_mut(12).mapv_inplace(|v| v + 1.0);
    let moved = ghcm_forward(&poked, &gate, &blocks)?;
    let before = (0..12)
        .flat_map(|t| (0..bins).map(move |f| (t, f)))
        .map(|(t, f)| (mask.values()[[t, f]] - moved.values()[[t, f]]).abs())
        .fold(0.0, f64::max);
    println!("changing frame 12 moves earlier frames by {before}");

    let mut bytes = Vec::new();
    write_weight_bundle(&mut bytes, &blocks)?;
    let loaded = read_weight_bundle(bytes.as_slice(), DEFAULT_PRELU_SLOPE)?;
    let again = ghcm_forward(&x, &gate, &loaded)?;
    println!("bundle {} bytes, reload reproduces mask: {}", bytes.len(), again == mask);
    Ok(())
}
