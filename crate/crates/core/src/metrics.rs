//! Scale-invariant signal-to-distortion ratio.

use crate::audio_io::AudioClip;
use crate::error::{Error, Result};

/// Reported values are clamped to `[-SI_SDR_LIMIT_DB, SI_SDR_LIMIT_DB]`.
pub const SI_SDR_LIMIT_DB: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub si_sdr_db: f64,
    pub frames_evaluated: usize,
}

fn zero_mean(x: &[f64]) -> Vec<f64> {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    x.iter().map(|v| v - mean).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// SI-SDR of `estimate` against `reference` on raw sample slices.
pub fn si_sdr_samples(estimate: &[f64], reference: &[f64]) -> Result<f64> {
    if estimate.len() != reference.len() {
        return Err(Error::shape("time", reference.len(), estimate.len()));
    }
    if reference.is_empty() {
        return Err(Error::EmptyInput("no samples to compare".into()));
    }
    let e = zero_mean(estimate);
    let r = zero_mean(reference);
    let rr = dot(&r, &r);
    if rr <= f64::MIN_POSITIVE {
        return Err(Error::Validation("reference has zero energy".into()));
    }
    let scale = dot(&e, &r) / rr;
    let (mut target, mut resid) = (0.0, 0.0);
    for (ev, rv) in e.iter().zip(&r) {
        let s = scale * rv;
        target += s * s;
        resid += (ev - s) * (ev - s);
    }
    let db = if resid == 0.0 {
        SI_SDR_LIMIT_DB
    } else if target == 0.0 {
        -SI_SDR_LIMIT_DB
    } else {
        10.0 * (target / resid).log10()
    };
    Ok(db.clamp(-SI_SDR_LIMIT_DB, SI_SDR_LIMIT_DB))
}

pub fn si_sdr(estimate: &AudioClip, reference: &AudioClip) -> Result<f64> {
    si_sdr_samples(estimate.samples(), reference.samples())
}
