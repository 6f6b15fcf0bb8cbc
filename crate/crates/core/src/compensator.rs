//! Forward pass of the gated compensation blocks.
//!
//! Feature maps are `T x F x C` arrays (time, frequency, channel). Every
//! convolution is causal in time: output frame `t` reads input frames
//! `t - kernel_time + 1 ..= t`, with zeros before the first frame. Batch
//! normalisation is folded to identity, so a block is
//!
//! ```text
//! alpha = sigmoid(prelu(attn_conv(cat(gate, x))))      // T x F x 1
//! h     = main_conv(x * alpha)
//! out   = act(h + residual_conv(h))                    // act = prelu, or sigmoid on the last block
//! ```

use std::io::{Read, Write};

use ndarray::{Array1, Array2, Array3, Array4, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::harmonic::BinaryRaster;
use crate::masking::MagnitudeMask;

pub const DEFAULT_PRELU_SLOPE: f64 = 0.25;
/// Output channels of the three default blocks.
pub const DEFAULT_CHANNELS: [usize; 3] = [8, 16, 8];
/// Default `(time, frequency)` kernel for the main and residual convolutions.
pub const DEFAULT_KERNEL: (usize, usize) = (2, 5);

const BUNDLE_MAGIC: &[u8; 4] = b"HGCW";
const BUNDLE_VERSION: u8 = 1;

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn prelu(x: f64, slope: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        slope * x
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvSpec {
    /// `[out, in, kernel_time, kernel_freq]`
    weights: Array4<f64>,
    bias: Array1<f64>,
    stride_freq: usize,
}

impl ConvSpec {
    pub fn new(weights: Array4<f64>, bias: Array1<f64>, stride_freq: usize) -> Result<Self> {
        let (out, _, kt, kf) = weights.dim();
        if bias.len() != out {
            return Err(Error::shape("channel", out, bias.len()));
        }
        if kt == 0 || kf == 0 || stride_freq == 0 {
            return Err(Error::Validation("kernel sizes and stride must be positive".into()));
        }
        if weights.iter().chain(bias.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Validation("convolution weights must be finite".into()));
        }
        Ok(Self {
            weights,
            bias,
            stride_freq,
        })
    }

    /// Weights and biases uniform in `[-scale, scale]`, drawn at `f32`
    /// precision so they survive a bundle round trip unchanged.
    pub fn random(
        rng: &mut impl Rng,
        in_channels: usize,
        out_channels: usize,
        kernel: (usize, usize),
        scale: f64,
    ) -> Self {
        let mut draw = || rng.gen_range(-scale..=scale) as f32 as f64;
        let weights =
            Array4::from_shape_simple_fn((out_channels, in_channels, kernel.0, kernel.1), &mut draw);
        let bias = Array1::from_shape_simple_fn(out_channels, draw);
        Self {
            weights,
            bias,
            stride_freq: 1,
        }
    }

    pub fn zeros(in_channels: usize, out_channels: usize, kernel: (usize, usize)) -> Self {
        Self {
            weights: Array4::zeros((out_channels, in_channels, kernel.0, kernel.1)),
            bias: Array1::zeros(out_channels),
            stride_freq: 1,
        }
    }

    pub fn weights(&self) -> &Array4<f64> {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut Array4<f64> {
        &mut self.weights
    }

    pub fn bias(&self) -> &Array1<f64> {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut Array1<f64> {
        &mut self.bias
    }

    pub fn in_channels(&self) -> usize {
        self.weights.dim().1
    }

    pub fn out_channels(&self) -> usize {
        self.weights.dim().0
    }

    pub fn kernel_time(&self) -> usize {
        self.weights.dim().2
    }

    pub fn kernel_freq(&self) -> usize {
        self.weights.dim().3
    }

    pub fn stride_freq(&self) -> usize {
        self.stride_freq
    }

    /// Zero padding `(before, after)` on the frequency axis.
    pub fn freq_padding(&self) -> (usize, usize) {
        let total = self.kernel_freq() - 1;
        (total / 2, total - total / 2)
    }

    pub fn output_bins(&self, bins: usize) -> usize {
        let (lo, hi) = self.freq_padding();
        (bins + lo + hi - self.kernel_freq()) / self.stride_freq + 1
    }
}

pub fn causal_conv2d(x: &Array3<f64>, spec: &ConvSpec) -> Result<Array3<f64>> {
    let (frames, bins, channels) = x.dim();
    if channels != spec.in_channels() {
        return Err(Error::shape("channel", spec.in_channels(), channels));
    }
    let (out_ch, in_ch, kt, kf) = spec.weights.dim();
    let (pad_lo, _) = spec.freq_padding();
    let out_bins = spec.output_bins(bins);
    let stride = spec.stride_freq;

    let mut out = Array3::<f64>::zeros((frames, out_bins, out_ch));
    out.axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(t, mut plane)| {
            for fo in 0..out_bins {
                for o in 0..out_ch {
                    let mut acc = spec.bias[o];
                    for dt in 0..kt {
                        // dt = kt - 1 is the current frame.
                        let Some(ti) = (t + dt).checked_sub(kt - 1) else {
                            continue;
                        };
                        for df in 0..kf {
                            let Some(fi) = (fo * stride + df).checked_sub(pad_lo) else {
                                continue;
                            };
                            if fi >= bins {
                                continue;
                            }
                            for i in 0..in_ch {
                                acc += spec.weights[[o, i, dt, df]] * x[[ti, fi, i]];
                            }
                        }
                    }
                    plane[[fo, o]] = acc;
                }
            }
        });
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GcbState {
    /// `1 x 1` convolution from `in + 1` channels (gate first) to one.
    pub attn_conv: ConvSpec,
    pub main_conv: ConvSpec,
    pub residual_conv: ConvSpec,
    pub prelu_slope: f64,
}

impl GcbState {
    pub fn random(
        rng: &mut impl Rng,
        in_channels: usize,
        out_channels: usize,
        kernel: (usize, usize),
    ) -> Self {
        let scale = 0.1;
        Self {
            attn_conv: ConvSpec::random(rng, in_channels + 1, 1, (1, 1), scale),
            main_conv: ConvSpec::random(rng, in_channels, out_channels, kernel, scale),
            residual_conv: ConvSpec::random(rng, out_channels, out_channels, kernel, scale),
            prelu_slope: DEFAULT_PRELU_SLOPE,
        }
    }

    pub fn in_channels(&self) -> usize {
        self.main_conv.in_channels()
    }

    pub fn out_channels(&self) -> usize {
        self.main_conv.out_channels()
    }

    pub fn validate(&self) -> Result<()> {
        let a = &self.attn_conv;
        if a.kernel_time() != 1 || a.kernel_freq() != 1 || a.out_channels() != 1 {
            return Err(Error::Validation("attention conv must be 1x1 with one output".into()));
        }
        if a.in_channels() != self.in_channels() + 1 {
            return Err(Error::shape("channel", self.in_channels() + 1, a.in_channels()));
        }
        let r = &self.residual_conv;
        if r.in_channels() != self.out_channels() || r.out_channels() != self.out_channels() {
            return Err(Error::shape("channel", self.out_channels(), r.in_channels()));
        }
        if self.main_conv.stride_freq() != 1 || r.stride_freq() != 1 {
            return Err(Error::Validation("block convolutions must have unit stride".into()));
        }
        Ok(())
    }
}

/// Three blocks `1 -> 8 -> 16 -> 8` with seeded uniform weights.
pub fn default_blocks(seed: u64) -> Vec<GcbState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut blocks = Vec::with_capacity(DEFAULT_CHANNELS.len());
    let mut prev = 1;
    for &c in &DEFAULT_CHANNELS {
        blocks.push(GcbState::random(&mut rng, prev, c, DEFAULT_KERNEL));
        prev = c;
    }
    blocks
}

/// Attention map `alpha`, `T x F`.
pub fn attention_map(x: &Array3<f64>, gate: &BinaryRaster, state: &GcbState) -> Result<Array2<f64>> {
    let (frames, bins, channels) = x.dim();
    if gate.frames() != frames {
        return Err(Error::shape("time", frames, gate.frames()));
    }
    if gate.bins() != bins {
        return Err(Error::shape("frequency", bins, gate.bins()));
    }
    let mut cat = Array3::<f64>::zeros((frames, bins, channels + 1));
    for ((t, f, c), v) in cat.indexed_iter_mut() {
        *v = if c == 0 {
            gate.values()[[t, f]] as f64
        } else {
            x[[t, f, c - 1]]
        };
    }
    let a = causal_conv2d(&cat, &state.attn_conv)?;
    Ok(a.index_axis(Axis(2), 0)
        .mapv(|v| sigmoid(prelu(v, state.prelu_slope))))
}

pub fn gcb_forward(
    x: &Array3<f64>,
    gate: &BinaryRaster,
    state: &GcbState,
    final_block: bool,
) -> Result<Array3<f64>> {
    state.validate()?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("block input must be finite".into()));
    }
    let alpha = attention_map(x, gate, state)?;
    let mut gated = x.clone();
    for ((t, f, _), v) in gated.indexed_iter_mut() {
        *v *= alpha[[t, f]];
    }
    let h = causal_conv2d(&gated, &state.main_conv)?;
    let r = causal_conv2d(&h, &state.residual_conv)?;
    let slope = state.prelu_slope;
    let mut out = h + r;
    if final_block {
        out.mapv_inplace(sigmoid);
    } else {
        out.mapv_inplace(|v| prelu(v, slope));
    }
    Ok(out)
}

/// Runs the blocks in series on `|S'|` and averages the last block's
/// sigmoid channels into a `T x F` compensation mask.
pub fn ghcm_forward(
    coarse_mag: &Array2<f64>,
    gate: &BinaryRaster,
    blocks: &[GcbState],
) -> Result<MagnitudeMask> {
    if blocks.is_empty() {
        return Err(Error::Validation("need at least one block".into()));
    }
    let mut channels = 1;
    for b in blocks {
        b.validate()?;
        if b.in_channels() != channels {
            return Err(Error::shape("channel", channels, b.in_channels()));
        }
        channels = b.out_channels();
    }

    let (t, f) = coarse_mag.dim();
    let mut x = coarse_mag.clone().into_shape_with_order((t, f, 1)).expect("same size");
    for (i, b) in blocks.iter().enumerate() {
        x = gcb_forward(&x, gate, b, i + 1 == blocks.len())?;
    }
    let c = x.dim().2 as f64;
    let mut mask = Array2::<f64>::zeros((t, f));
    for ((ti, fi, _), v) in x.indexed_iter() {
        mask[[ti, fi]] += v;
    }
    mask.mapv_inplace(|v| v / c);
    MagnitudeMask::new(mask)
}

fn write_conv(w: &mut impl Write, conv: &ConvSpec) -> std::io::Result<()> {
    let (o, i, kt, kf) = conv.weights.dim();
    for d in [o, i, kt, kf] {
        w.write_all(&(d as u32).to_le_bytes())?;
    }
    for v in conv.weights.iter().chain(conv.bias.iter()) {
        w.write_all(&(*v as f32).to_le_bytes())?;
    }
    Ok(())
}

/// `HGCW`, a version byte, then for every block its attention, main and
/// residual convolutions: `u32` out/in/kernel_time/kernel_freq, the `f32`
/// weights in that axis order, and `out` `f32` biases.
pub fn write_weight_bundle(mut w: impl Write, blocks: &[GcbState]) -> std::io::Result<()> {
    w.write_all(BUNDLE_MAGIC)?;
    w.write_all(&[BUNDLE_VERSION])?;
    for b in blocks {
        write_conv(&mut w, &b.attn_conv)?;
        write_conv(&mut w, &b.main_conv)?;
        write_conv(&mut w, &b.residual_conv)?;
    }
    Ok(())
}

fn read_f32s(bytes: &[u8], pos: &mut usize, n: usize) -> Result<Vec<f64>> {
    let end = *pos + 4 * n;
    if end > bytes.len() {
        return Err(Error::format("weights", "truncated weight bundle"));
    }
    let out = bytes[*pos..end]
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
        .collect();
    *pos = end;
    Ok(out)
}

/// Reads a bundle written by [`write_weight_bundle`]; PReLU slopes are set
/// to `prelu_slope` since the file does not carry them.
pub fn read_weight_bundle(mut r: impl Read, prelu_slope: f64) -> Result<Vec<GcbState>> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)
        .map_err(|e| Error::format("bundle", e.to_string()))?;
    if bytes.len() < 5 || &bytes[..4] != BUNDLE_MAGIC {
        return Err(Error::format("magic", "expected HGCW"));
    }
    if bytes[4] != BUNDLE_VERSION {
        return Err(Error::format("version", format!("unsupported version {}", bytes[4])));
    }
    let mut pos = 5;
    let mut convs = Vec::new();
    while pos < bytes.len() {
        if pos + 16 > bytes.len() {
            return Err(Error::format("shape", "truncated shape header"));
        }
        let dims: Vec<usize> = bytes[pos..pos + 16]
            .chunks_exact(4)
            .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
            .collect();
        pos += 16;
        let (o, i, kt, kf) = (dims[0], dims[1], dims[2], dims[3]);
        let w = read_f32s(&bytes, &mut pos, o * i * kt * kf)?;
        let b = read_f32s(&bytes, &mut pos, o)?;
        let weights = Array4::from_shape_vec((o, i, kt, kf), w)
            .map_err(|e| Error::format("shape", e.to_string()))?;
        convs.push(ConvSpec::new(weights, Array1::from(b), 1)?);
    }
    if convs.len() % 3 != 0 {
        return Err(Error::format("blocks", "convolution count is not a multiple of 3"));
    }
    let blocks: Vec<GcbState> = convs
        .chunks_exact(3)
        .map(|c| GcbState {
            attn_conv: c[0].clone(),
            main_conv: c[1].clone(),
            residual_conv: c[2].clone(),
            prelu_slope,
        })
        .collect();
    for b in &blocks {
        b.validate()?;
    }
    Ok(blocks)
}
