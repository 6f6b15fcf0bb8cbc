//! Speech-energy detection from explicit per-bin thresholds.
//!
//! Corpus statistics give, per frequency bin, the mean over clips of each
//! clip's time-averaged log magnitude and the population standard deviation
//! of those per-clip means. A threshold `kappa = mu + epsilon * sigma` then
//! labels the cells of a clean magnitude spectrogram, and frame decisions
//! (activity, voicing) are read off the row sums of the stricter labels.

use std::fmt::Write as _;

use ndarray::{Array1, Array2, Axis};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::harmonic::{BinaryRaster, LOG_FLOOR};

/// Offset for the permissive labels used directly in the gate.
pub const EPSILON_A: f64 = 0.0;
/// Offset for the strict labels that drive activity and voicing decisions.
pub const EPSILON_B: f64 = 4.0 / 3.0;
/// A frame is active when more than this many strict labels are set.
pub const VAD_COUNT_THRESHOLD: usize = 24;

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyStats {
    mu: Array1<f64>,
    sigma: Array1<f64>,
    clip_count: usize,
}

impl EnergyStats {
    pub fn new(mu: Array1<f64>, sigma: Array1<f64>, clip_count: usize) -> Result<Self> {
        if mu.len() != sigma.len() {
            return Err(Error::shape("frequency", mu.len(), sigma.len()));
        }
        if clip_count == 0 {
            return Err(Error::Validation("clip count must be at least 1".into()));
        }
        if mu.iter().any(|v| !v.is_finite()) || sigma.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Validation(
                "statistics must be finite with non-negative sigma".into(),
            ));
        }
        Ok(Self {
            mu,
            sigma,
            clip_count,
        })
    }

    pub fn mu(&self) -> &Array1<f64> {
        &self.mu
    }

    pub fn sigma(&self) -> &Array1<f64> {
        &self.sigma
    }

    pub fn clip_count(&self) -> usize {
        self.clip_count
    }

    pub fn bins(&self) -> usize {
        self.mu.len()
    }

    /// `bin,mu,sigma` with a header line. The clip count is not stored.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin,mu,sigma\n");
        for (f, (m, s)) in self.mu.iter().zip(&self.sigma).enumerate() {
            writeln!(out, "{f},{m},{s}").unwrap();
        }
        out
    }

    /// Parses the output of [`EnergyStats::to_csv`]; `clip_count` is set to 1
    /// since the file does not carry it.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        match lines.next() {
            Some(h) if h.trim() == "bin,mu,sigma" => {}
            _ => return Err(Error::format("header", "expected `bin,mu,sigma`")),
        }
        let (mut mu, mut sigma) = (Vec::new(), Vec::new());
        for (row, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(Error::format("row", format!("line {}: expected 3 fields", row + 2)));
            }
            let bin: usize = fields[0]
                .parse()
                .map_err(|_| Error::format("bin", format!("line {}: bad bin index", row + 2)))?;
            if bin != row {
                return Err(Error::format("bin", format!("line {}: expected bin {row}", row + 2)));
            }
            let parse = |s: &str, field| {
                s.parse::<f64>()
                    .map_err(|_| Error::format(field, format!("line {}: `{s}`", row + 2)))
            };
            mu.push(parse(fields[1], "mu")?);
            sigma.push(parse(fields[2], "sigma")?);
        }
        if mu.is_empty() {
            return Err(Error::format("row", "no bins"));
        }
        Self::new(Array1::from(mu), Array1::from(sigma), 1)
    }
}

/// Per-bin time average of `log(max(mag, floor))`.
fn clip_log_means(mag: &Array2<f64>, floor: f64) -> Array1<f64> {
    let frames = mag.nrows() as f64;
    mag.mapv(|m| m.max(floor).ln()).sum_axis(Axis(0)) / frames
}

/// Sums vectors by a fixed pairwise tree so the result does not depend on
/// how the inputs were produced.
fn pairwise_sum(items: &[Array1<f64>]) -> Array1<f64> {
    match items.len() {
        1 => items[0].clone(),
        n => {
            let (a, b) = items.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

pub fn corpus_stats(clips: &[Array2<f64>], floor: f64) -> Result<EnergyStats> {
    let first = clips
        .first()
        .ok_or_else(|| Error::EmptyInput("corpus has no clips".into()))?;
    let bins = first.ncols();
    for c in clips {
        if c.ncols() != bins {
            return Err(Error::shape("frequency", bins, c.ncols()));
        }
        if c.nrows() == 0 {
            return Err(Error::EmptyInput("clip has no frames".into()));
        }
    }

    let means: Vec<Array1<f64>> = clips.par_iter().map(|c| clip_log_means(c, floor)).collect();
    let d = means.len() as f64;
    let mu = pairwise_sum(&means) / d;
    let sq: Vec<Array1<f64>> = means.iter().map(|m| (m - &mu).mapv(|v| v * v)).collect();
    let sigma = (pairwise_sum(&sq) / d).mapv(f64::sqrt);
    EnergyStats::new(mu, sigma, clips.len())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Thresholds {
    kappa: Array1<f64>,
    epsilon_offset: f64,
}

impl Thresholds {
    pub fn kappa(&self) -> &Array1<f64> {
        &self.kappa
    }

    pub fn epsilon_offset(&self) -> f64 {
        self.epsilon_offset
    }
}

pub fn make_thresholds(stats: &EnergyStats, epsilon_offset: f64) -> Thresholds {
    Thresholds {
        kappa: &stats.mu + &(&stats.sigma * epsilon_offset),
        epsilon_offset,
    }
}

/// 1 where the floored log magnitude strictly exceeds the bin's threshold.
pub fn energy_labels(clean_mag: &Array2<f64>, thr: &Thresholds, floor: f64) -> Result<BinaryRaster> {
    if clean_mag.ncols() != thr.kappa.len() {
        return Err(Error::shape("frequency", thr.kappa.len(), clean_mag.ncols()));
    }
    let (t, f) = clean_mag.dim();
    Ok(BinaryRaster::from_fn(t, f, |i, j| {
        clean_mag[[i, j]].max(floor).ln() > thr.kappa[j]
    }))
}

/// Shorthand for [`energy_labels`] with the shared log floor.
pub fn energy_labels_default(clean_mag: &Array2<f64>, thr: &Thresholds) -> Result<BinaryRaster> {
    energy_labels(clean_mag, thr, LOG_FLOOR)
}

/// A `T x 1` column of binary frame decisions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameFlags {
    values: Vec<u8>,
}

impl FrameFlags {
    pub fn new(values: Vec<u8>) -> Result<Self> {
        if let Some(v) = values.iter().find(|&&v| v > 1) {
            return Err(Error::Validation(format!("frame flag {v} is not binary")));
        }
        Ok(Self { values })
    }

    pub fn filled(len: usize, on: bool) -> Self {
        Self {
            values: vec![on as u8; len],
        }
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, t: usize) -> bool {
        self.values[t] == 1
    }

    pub fn count_ones(&self) -> usize {
        self.values.iter().map(|&v| v as usize).sum()
    }

    /// `frame,<column>` header followed by one `t,flag` line per frame.
    pub fn to_csv(&self, column: &str) -> String {
        let mut out = format!("frame,{column}\n");
        for (t, v) in self.values.iter().enumerate() {
            writeln!(out, "{t},{v}").unwrap();
        }
        out
    }
}

/// Active when the row holds more than `epsilon_count` ones.
pub fn vad_track(rb: &BinaryRaster, epsilon_count: usize) -> FrameFlags {
    FrameFlags {
        values: (0..rb.frames())
            .map(|t| (rb.row_sum(t) > epsilon_count) as u8)
            .collect(),
    }
}

/// Voiced when the upper half `[F/2, F)` holds no more ones than the lower
/// half `[0, F/2)`.
pub fn vrd_track(rb: &BinaryRaster) -> FrameFlags {
    let half = rb.bins() / 2;
    FrameFlags {
        values: rb
            .values()
            .rows()
            .into_iter()
            .map(|row| {
                let low: usize = row.iter().take(half).map(|&v| v as usize).sum();
                let high: usize = row.iter().skip(half).map(|&v| v as usize).sum();
                (high <= low) as u8
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_mag(rng: &mut ChaCha8Rng, t: usize, f: usize) -> Array2<f64> {
        Array2::from_shape_fn((t, f), |_| rng.gen_range(1e-4..5.0))
    }

    #[test]
    fn single_constant_clip() {
        let clip = Array2::from_elem((5, 9), std::f64::consts::E);
        let stats = corpus_stats(&[clip], LOG_FLOOR).unwrap();
        assert!(stats.mu().iter().all(|&m| (m - 1.0).abs() < 1e-15));
        assert!(stats.sigma().iter().all(|&s| s == 0.0));
        assert_eq!(stats.clip_count(), 1);
    }

    #[test]
    fn two_point_population_std() {
        let m = 1.7f64;
        let a = Array2::from_elem((3, 2), m.exp());
        let b = Array2::from_elem((4, 2), (-m).exp());
        let stats = corpus_stats(&[a, b], LOG_FLOOR).unwrap();
        for (mu, s) in stats.mu().iter().zip(stats.sigma()) {
            assert!(mu.abs() < 1e-12);
            assert!((s - m).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_naive_two_pass() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let clips: Vec<_> = (0..8)
            .map(|i| random_mag(&mut rng, 10 + i * 3, 17))
            .collect();
        let stats = corpus_stats(&clips, LOG_FLOOR).unwrap();
        for f in 0..17 {
            let means: Vec<f64> = clips
                .iter()
                .map(|c| {
                    let mut s = 0.0;
                    for t in 0..c.nrows() {
                        s += c[[t, f]].max(LOG_FLOOR).ln();
                    }
                    s / c.nrows() as f64
                })
                .collect();
            let mu = means.iter().sum::<f64>() / 8.0;
            let var = means.iter().map(|m| (m - mu).powi(2)).sum::<f64>() / 8.0;
            assert!((stats.mu()[f] - mu).abs() < 1e-9);
            assert!((stats.sigma()[f] - var.sqrt()).abs() < 1e-9);
        }
    }

    #[test]
    fn corpus_errors() {
        assert!(matches!(corpus_stats(&[], LOG_FLOOR), Err(Error::EmptyInput(_))));
        let a = Array2::ones((2, 3));
        let b = Array2::ones((2, 4));
        assert!(matches!(
            corpus_stats(&[a, b], LOG_FLOOR),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn thresholds() {
        let stats = EnergyStats::new(array![1.0, -2.0], array![3.0, 0.0], 4).unwrap();
        let a = make_thresholds(&stats, EPSILON_A);
        assert_eq!(a.kappa(), stats.mu());
        let b = make_thresholds(&stats, EPSILON_B);
        assert!((b.kappa()[0] - 5.0).abs() < 1e-12);
        assert_eq!(b.kappa()[1], -2.0);
    }

    #[test]
    fn labels_are_strict() {
        let stats = EnergyStats::new(array![0.0, 0.0, 0.0], array![0.0, 0.0, 0.0], 1).unwrap();
        let thr = make_thresholds(&stats, 0.0);
        // log(1) == 0 == kappa exactly.
        let mag = array![[1.0, 1.5, 0.0]];
        let r = energy_labels_default(&mag, &thr).unwrap();
        assert_eq!(r.values().row(0).to_vec(), vec![0, 1, 0]);
        assert!(energy_labels_default(&Array2::zeros((1, 2)), &thr).is_err());
    }

    #[test]
    fn labels_match_scalar_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mag = random_mag(&mut rng, 6, 33);
        let mu = Array1::from_shape_fn(33, |_| rng.gen_range(-2.0..1.0));
        let sigma = Array1::from_shape_fn(33, |_| rng.gen_range(0.0..1.0));
        let stats = EnergyStats::new(mu.clone(), sigma.clone(), 5).unwrap();
        let thr = make_thresholds(&stats, 0.7);
        let r = energy_labels_default(&mag, &thr).unwrap();
        for t in 0..6 {
            for f in 0..33 {
                let want = mag[[t, f]].ln() > mu[f] + 0.7 * sigma[f];
                assert_eq!(r.get(t, f), want);
            }
        }
    }

    #[test]
    fn vad_boundary() {
        let rb = BinaryRaster::from_fn(3, 257, |t, f| match t {
            0 => false,
            1 => f < 25,
            _ => f < 24,
        });
        assert_eq!(vad_track(&rb, VAD_COUNT_THRESHOLD).values(), &[0, 1, 0]);
    }

    #[test]
    fn vrd_cases() {
        let f = 20;
        let rb = BinaryRaster::from_fn(3, f, |t, j| match t {
            0 => j <= 10 || j == 11, // L = 10, H = 2
            1 => j == 0 || (10..15).contains(&j), // L = 1, H = 5
            _ => false,
        });
        assert_eq!(vrd_track(&rb).values(), &[1, 0, 1]);
    }

    #[test]
    fn stats_csv_round_trip() {
        let stats = EnergyStats::new(array![0.1, -3.25, 1e-17], array![0.0, 2.5, 0.3], 2).unwrap();
        let text = stats.to_csv();
        assert!(text.starts_with("bin,mu,sigma\n0,0.1,0\n"));
        let back = EnergyStats::from_csv(&text).unwrap();
        assert_eq!(back.mu(), stats.mu());
        assert_eq!(back.sigma(), stats.sigma());
        assert!(EnergyStats::from_csv("bin,mu\n").is_err());
        assert!(EnergyStats::from_csv("bin,mu,sigma\n0,1,-1\n").is_err());
        assert!(EnergyStats::from_csv("bin,mu,sigma\n1,1,1\n").is_err());
    }

    #[test]
    fn flags_csv() {
        let flags = FrameFlags::new(vec![0, 1]).unwrap();
        assert_eq!(flags.to_csv("vad"), "frame,vad\n0,0\n1,1\n");
        assert!(FrameFlags::new(vec![2]).is_err());
    }
}
