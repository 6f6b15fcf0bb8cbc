//! Short-time Fourier analysis and overlap-add synthesis.
//!
//! Frames are taken without centre padding: frame `t` covers samples
//! `[t * hop, t * hop + win_length)` and only fully covered frames are kept.
//! Synthesis divides the overlap-added, synthesis-windowed frames by the
//! summed squared window, so any window/hop pair whose squared-window sum is
//! nonzero reconstructs exactly.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::{Array2, Axis};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::audio_io::AudioClip;
use crate::error::{Error, Result};

/// DFT-even Hann window, `w[n] = 0.5 - 0.5 cos(2 pi n / len)`, mirror
/// symmetric about `len / 2` (`w[n] == w[len - n]`). Sums to a constant under
/// overlap-add at any hop dividing `len / 2`.
pub fn hann(len: usize) -> Vec<f64> {
    let mut w = vec![0.0; len];
    for n in 0..=len / 2 {
        let v = 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos();
        w[n] = v;
        if n > 0 && n < len {
            w[len - n] = v;
        }
    }
    w
}

#[derive(Debug, Clone, PartialEq)]
pub struct StftConfig {
    fft_size: usize,
    win_length: usize,
    hop: usize,
    window: Vec<f64>,
}

impl Default for StftConfig {
    /// 512-point transform, 32 ms Hann window at 16 kHz, hop of a quarter window.
    fn default() -> Self {
        Self::new(512, 512, 128).expect("default STFT config is valid")
    }
}

impl StftConfig {
    /// Hann-windowed configuration.
    pub fn new(fft_size: usize, win_length: usize, hop: usize) -> Result<Self> {
        Self::with_window(fft_size, hop, hann(win_length))
    }

    /// Frames that overlap by only a quarter of the window (`hop = 3 * win / 4`).
    pub fn quarter_overlap(fft_size: usize, win_length: usize) -> Result<Self> {
        Self::new(fft_size, win_length, 3 * win_length / 4)
    }

    pub fn with_window(fft_size: usize, hop: usize, window: Vec<f64>) -> Result<Self> {
        let win_length = window.len();
        if win_length == 0 {
            return Err(Error::Config("window must be non-empty".into()));
        }
        if hop == 0 || hop > win_length {
            return Err(Error::Config(format!(
                "hop {hop} must be in 1..={win_length}"
            )));
        }
        if fft_size < win_length {
            return Err(Error::Config(format!(
                "fft_size {fft_size} is shorter than window {win_length}"
            )));
        }
        if window.iter().any(|w| !w.is_finite()) {
            return Err(Error::Config("window has non-finite coefficients".into()));
        }
        Ok(Self {
            fft_size,
            win_length,
            hop,
            window,
        })
    }

    pub fn fft_size(&self) -> usize {
        self.fft_size
    }

    pub fn win_length(&self) -> usize {
        self.win_length
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn window(&self) -> &[f64] {
        &self.window
    }

    /// One-sided bin count, `fft_size / 2 + 1`.
    pub fn bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// Number of fully covered frames for a signal of `len` samples.
    pub fn frame_count(&self, len: usize) -> usize {
        if len < self.win_length {
            0
        } else {
            (len - self.win_length) / self.hop + 1
        }
    }

    /// Length of the signal produced by [`istft_inverse`] for `frames` frames.
    pub fn output_len(&self, frames: usize) -> usize {
        if frames == 0 {
            0
        } else {
            (frames - 1) * self.hop + self.win_length
        }
    }
}

/// A `T x F` one-sided complex spectrogram.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrogram {
    data: Array2<Complex64>,
    config: StftConfig,
    sample_rate: u32,
}

impl ComplexSpectrogram {
    pub fn new(data: Array2<Complex64>, config: StftConfig, sample_rate: u32) -> Result<Self> {
        if data.ncols() != config.bins() {
            return Err(Error::shape("frequency", config.bins(), data.ncols()));
        }
        if data.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::Validation("spectrogram has non-finite entries".into()));
        }
        Ok(Self {
            data,
            config,
            sample_rate,
        })
    }

    pub fn zeros(frames: usize, config: StftConfig, sample_rate: u32) -> Self {
        let bins = config.bins();
        Self {
            data: Array2::zeros((frames, bins)),
            config,
            sample_rate,
        }
    }

    pub fn frames(&self) -> usize {
        self.data.nrows()
    }

    pub fn bins(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &Array2<Complex64> {
        &self.data
    }

    pub fn config(&self) -> &StftConfig {
        &self.config
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn real(&self) -> Array2<f64> {
        self.data.mapv(|c| c.re)
    }

    pub fn imag(&self) -> Array2<f64> {
        self.data.mapv(|c| c.im)
    }

    pub fn magnitude(&self) -> Array2<f64> {
        self.data.mapv(|c| c.norm())
    }

    /// Same config and sample rate, new cell values.
    pub(crate) fn with_data(&self, data: Array2<Complex64>) -> Self {
        debug_assert_eq!(data.dim(), self.data.dim());
        Self {
            data,
            config: self.config.clone(),
            sample_rate: self.sample_rate,
        }
    }
}

fn forward_plan(n: usize) -> Arc<dyn Fft<f64>> {
    FftPlanner::new().plan_fft_forward(n)
}

pub fn stft_forward(clip: &AudioClip, cfg: &StftConfig) -> Result<ComplexSpectrogram> {
    let x = clip.samples();
    let frames = cfg.frame_count(x.len());
    if frames == 0 {
        return Err(Error::EmptyInput(format!(
            "clip of {} samples is shorter than one {}-sample window",
            x.len(),
            cfg.win_length
        )));
    }
    let fft = forward_plan(cfg.fft_size);
    let bins = cfg.bins();

    let mut data = Array2::<Complex64>::zeros((frames, bins));
    data.axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(t, mut row)| {
            let start = t * cfg.hop;
            let mut buf = vec![Complex64::new(0.0, 0.0); cfg.fft_size];
            for (n, (b, w)) in buf.iter_mut().zip(&cfg.window).enumerate() {
                *b = Complex64::new(x[start + n] * w, 0.0);
            }
            fft.process(&mut buf);
            for (dst, src) in row.iter_mut().zip(&buf[..bins]) {
                *dst = *src;
            }
        });

    Ok(ComplexSpectrogram {
        data,
        config: cfg.clone(),
        sample_rate: clip.sample_rate(),
    })
}

/// Overlap-add inverse. Output length is `(T - 1) * hop + win_length`.
///
/// Samples whose squared-window sum is zero are an error, except within the
/// first and last `hop` samples where a single frame provides coverage and
/// the window may legitimately taper to zero; those are set to zero.
pub fn istft_inverse(spec: &ComplexSpectrogram) -> Result<AudioClip> {
    let cfg = &spec.config;
    let frames = spec.frames();
    let len = cfg.output_len(frames);
    let n_fft = cfg.fft_size;
    let bins = cfg.bins();
    let ifft = FftPlanner::new().plan_fft_inverse(n_fft);

    let time_frames: Vec<Vec<f64>> = spec
        .data
        .axis_iter(Axis(0))
        .into_par_iter()
        .map(|row| {
            let mut buf = vec![Complex64::new(0.0, 0.0); n_fft];
            for (k, c) in row.iter().enumerate() {
                buf[k] = *c;
            }
            // Hermitian completion; DC and Nyquist imaginary parts drop out.
            buf[0].im = 0.0;
            if n_fft.is_multiple_of(2) {
                buf[bins - 1].im = 0.0;
            }
            for k in bins..n_fft {
                buf[k] = buf[n_fft - k].conj();
            }
            ifft.process(&mut buf);
            let scale = 1.0 / n_fft as f64;
            buf[..cfg.win_length]
                .iter()
                .zip(&cfg.window)
                .map(|(c, w)| c.re * scale * w)
                .collect()
        })
        .collect();

    let mut out = vec![0.0; len];
    let mut norm = vec![0.0; len];
    for (t, frame) in time_frames.iter().enumerate() {
        let start = t * cfg.hop;
        for (n, (v, w)) in frame.iter().zip(&cfg.window).enumerate() {
            out[start + n] += v;
            norm[start + n] += w * w;
        }
    }

    let peak = norm.iter().cloned().fold(0.0, f64::max);
    let tiny = peak * 1e-12;
    for (n, (o, z)) in out.iter_mut().zip(&norm).enumerate() {
        if *z > tiny {
            *o /= z;
        } else if n < cfg.hop || n >= len.saturating_sub(cfg.hop) {
            *o = 0.0;
        } else {
            return Err(Error::Degenerate(format!(
                "window overlap normalizer vanishes at sample {n}"
            )));
        }
    }
    AudioClip::from_unbounded(out, spec.sample_rate)
}

/// Replaces every magnitude with `magnitude^exponent`, keeping the phase.
pub fn power_compress(spec: &ComplexSpectrogram, exponent: f64) -> Result<ComplexSpectrogram> {
    if !(exponent > 0.0 && exponent <= 1.0) {
        return Err(Error::Validation(format!(
            "compression exponent {exponent} is outside (0, 1]"
        )));
    }
    let data = spec.data.mapv(|c| {
        let mag = c.norm();
        if mag == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            c * mag.powf(exponent - 1.0)
        }
    });
    Ok(spec.with_data(data))
}
