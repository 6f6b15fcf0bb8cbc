//! File-level pipelines: corpus statistics, gate analysis of one input, and
//! the oracle-gate enhancement run.
//!
//! Every stage is deterministic. Parallel work is per frame or per file with
//! fixed reduction order, so outputs do not depend on the thread count.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::{info, warn};
use ndarray::Array2;
use rayon::prelude::*;

use crate::audio_io::{read_wav, write_wav, AudioClip};
use crate::error::{Error, Result};
use crate::gate::{compose_gate, GateInputs};
use crate::harmonic::{
    harmonic_raster, pick_pitch, significance_spectrum, BinaryRaster, IntegralMatrix,
    IntegralOptions, PitchTrack, ValleyAnchor, ValleyParity, LOG_FLOOR,
};
use crate::masking::{mask_apply_m, MagnitudeMask};
use crate::metrics::si_sdr_samples;
use crate::sed::{
    corpus_stats, energy_labels, make_thresholds, vad_track, vrd_track, EnergyStats, FrameFlags,
    EPSILON_A, EPSILON_B, VAD_COUNT_THRESHOLD,
};
use crate::stft::{istft_inverse, stft_forward, ComplexSpectrogram, StftConfig};

/// Forces the activity decision instead of deriving it from the labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VadOverride {
    #[default]
    Auto,
    /// Every frame inactive, which closes the gate everywhere.
    Off,
    On,
}

impl FromStr for VadOverride {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Self::Auto),
            "off" => Ok(Self::Off),
            "on" => Ok(Self::On),
            _ => Err(Error::Config(format!("vad_override: unknown value `{s}`"))),
        }
    }
}

impl fmt::Display for VadOverride {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Auto => "auto",
            Self::Off => "off",
            Self::On => "on",
        })
    }
}

fn anchor_name(a: ValleyAnchor) -> &'static str {
    match a {
        ValleyAnchor::PreviousPeak => "previous_peak",
        ValleyAnchor::Origin => "origin",
    }
}

fn parity_name(p: ValleyParity) -> &'static str {
    match p {
        ValleyParity::OddSplit => "odd_split",
        ValleyParity::EvenSplit => "even_split",
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub fft_size: usize,
    pub win_length: usize,
    pub hop: usize,
    pub epsilon_a: f64,
    pub epsilon_b: f64,
    pub vad_count_threshold: usize,
    pub log_floor: f64,
    pub valley_anchor: ValleyAnchor,
    pub valley_parity: ValleyParity,
    pub vad_override: VadOverride,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            fft_size: 512,
            win_length: 512,
            hop: 128,
            epsilon_a: EPSILON_A,
            epsilon_b: EPSILON_B,
            vad_count_threshold: VAD_COUNT_THRESHOLD,
            log_floor: LOG_FLOOR,
            valley_anchor: ValleyAnchor::default(),
            valley_parity: ValleyParity::default(),
            vad_override: VadOverride::default(),
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse `{value}`")))
}

impl PipelineConfig {
    /// Parses `key = value` lines. Blank lines and `#` comments are ignored;
    /// unknown keys are errors. Missing keys keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", n + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "fft_size" => cfg.fft_size = parse_value(key, value)?,
                "win_length" => cfg.win_length = parse_value(key, value)?,
                "hop" => cfg.hop = parse_value(key, value)?,
                "epsilon_a" => cfg.epsilon_a = parse_value(key, value)?,
                "epsilon_b" => cfg.epsilon_b = parse_value(key, value)?,
                "vad_count_threshold" => cfg.vad_count_threshold = parse_value(key, value)?,
                "log_floor" => cfg.log_floor = parse_value(key, value)?,
                "valley_anchor" => {
                    cfg.valley_anchor = match value {
                        "previous_peak" => ValleyAnchor::PreviousPeak,
                        "origin" => ValleyAnchor::Origin,
                        _ => return Err(Error::Config(format!("valley_anchor: `{value}`"))),
                    }
                }
                "valley_parity" => {
                    cfg.valley_parity = match value {
                        "odd_split" => ValleyParity::OddSplit,
                        "even_split" => ValleyParity::EvenSplit,
                        _ => return Err(Error::Config(format!("valley_parity: `{value}`"))),
                    }
                }
                "vad_override" => cfg.vad_override = value.parse()?,
                _ => return Err(Error::Config(format!("unknown key `{key}`"))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.stft()?;
        if !(self.log_floor > 0.0 && self.log_floor.is_finite()) {
            return Err(Error::Config(format!("log_floor {} must be positive", self.log_floor)));
        }
        if !self.epsilon_a.is_finite() || !self.epsilon_b.is_finite() {
            return Err(Error::Config("epsilon offsets must be finite".into()));
        }
        Ok(())
    }

    pub fn stft(&self) -> Result<StftConfig> {
        StftConfig::new(self.fft_size, self.win_length, self.hop)
    }

    pub fn integral_options(&self) -> IntegralOptions {
        IntegralOptions {
            anchor: self.valley_anchor,
            parity: self.valley_parity,
        }
    }
}

impl fmt::Display for PipelineConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "fft_size = {}", self.fft_size)?;
        writeln!(f, "win_length = {}", self.win_length)?;
        writeln!(f, "hop = {}", self.hop)?;
        writeln!(f, "epsilon_a = {}", self.epsilon_a)?;
        writeln!(f, "epsilon_b = {}", self.epsilon_b)?;
        writeln!(f, "vad_count_threshold = {}", self.vad_count_threshold)?;
        writeln!(f, "log_floor = {}", self.log_floor)?;
        writeln!(f, "valley_anchor = {}", anchor_name(self.valley_anchor))?;
        writeln!(f, "valley_parity = {}", parity_name(self.valley_parity))?;
        writeln!(f, "vad_override = {}", self.vad_override)
    }
}

/// Runs `f` on a dedicated pool of `jobs` threads.
pub fn with_jobs<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn magnitude_of(clip: &AudioClip, stft: &StftConfig) -> Result<Array2<f64>> {
    Ok(stft_forward(clip, stft)?.magnitude())
}

/// Half the sample rate, the top of the analysed band.
fn half_rate(clip: &AudioClip) -> u32 {
    clip.sample_rate() / 2
}

/// Reads every `*.wav` in `dir` (sorted by name) and computes corpus
/// statistics. Unreadable files are skipped with a warning.
pub fn corpus_stats_from_dir(dir: &Path, cfg: &PipelineConfig) -> Result<EnergyStats> {
    cfg.validate()?;
    let stft = cfg.stft()?;
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .is_some_and(|x| x.eq_ignore_ascii_case("wav"))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::EmptyInput(format!("no .wav files in {}", dir.display())));
    }

    let mags: Vec<Option<Array2<f64>>> = paths
        .par_iter()
        .map(|p| match read_wav(p).and_then(|c| magnitude_of(&c, &stft)) {
            Ok(m) => Some(m),
            Err(e) => {
                warn!("skipping {}: {e}", p.display());
                None
            }
        })
        .collect();
    let mags: Vec<Array2<f64>> = mags.into_iter().flatten().collect();
    if mags.is_empty() {
        return Err(Error::EmptyInput(format!(
            "none of the {} files in {} could be used",
            paths.len(),
            dir.display()
        )));
    }
    corpus_stats(&mags, cfg.log_floor)
}

pub fn run_stats(dir: &Path, out: &Path, cfg: &PipelineConfig) -> Result<EnergyStats> {
    let stats = corpus_stats_from_dir(dir, cfg)?;
    write_file(out, stats.to_csv())?;
    info!("wrote {} ({} clips)", out.display(), stats.clip_count());
    Ok(stats)
}

pub fn load_stats(path: &Path) -> Result<EnergyStats> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    EnergyStats::from_csv(&text)
}

/// Every intermediate of the gate computation for one input.
#[derive(Debug, Clone)]
pub struct GateAnalysis {
    pub pitch: PitchTrack,
    pub r_h: BinaryRaster,
    pub r_a: BinaryRaster,
    pub r_b: BinaryRaster,
    pub vad: FrameFlags,
    pub vrd: FrameFlags,
    pub gate: BinaryRaster,
}

/// Gate factors computed from one magnitude spectrogram: pitch and harmonic
/// locations from the significance argmax, energy labels against the corpus
/// thresholds, and frame decisions from the strict labels.
pub fn analyze_magnitude(
    mag: &Array2<f64>,
    sr: u32,
    stats: &EnergyStats,
    cfg: &PipelineConfig,
) -> Result<GateAnalysis> {
    let bins = mag.ncols();
    if stats.bins() != bins {
        return Err(Error::shape("frequency", bins, stats.bins()));
    }
    let u = IntegralMatrix::build_with(sr, bins, cfg.integral_options())?;
    let q = significance_spectrum(mag, &u, cfg.log_floor)?;
    let pitch = pick_pitch(&q);
    let r_h = harmonic_raster(&pitch, sr, bins);

    let r_a = energy_labels(mag, &make_thresholds(stats, cfg.epsilon_a), cfg.log_floor)?;
    let r_b = energy_labels(mag, &make_thresholds(stats, cfg.epsilon_b), cfg.log_floor)?;
    let frames = mag.nrows();
    let vad = match cfg.vad_override {
        VadOverride::Auto => vad_track(&r_b, cfg.vad_count_threshold),
        VadOverride::Off => FrameFlags::filled(frames, false),
        VadOverride::On => FrameFlags::filled(frames, true),
    };
    let vrd = vrd_track(&r_b);
    let gate = compose_gate(&GateInputs {
        r_vad: vad.clone(),
        r_vrd: vrd.clone(),
        r_a: r_a.clone(),
        r_h: r_h.clone(),
    })?;
    Ok(GateAnalysis {
        pitch,
        r_h,
        r_a,
        r_b,
        vad,
        vrd,
        gate,
    })
}

/// File names written by [`run_analyze`].
pub const ANALYZE_OUTPUTS: [&str; 7] = [
    "pitch.csv", "rh.pgm", "ra.pgm", "rb.pgm", "vad.csv", "vrd.csv", "gate.pgm",
];

pub fn run_analyze(
    input: &Path,
    stats: &Path,
    outdir: &Path,
    cfg: &PipelineConfig,
) -> Result<GateAnalysis> {
    cfg.validate()?;
    let clip = read_wav(input)?;
    let stats = load_stats(stats)?;
    let mag = magnitude_of(&clip, &cfg.stft()?)?;
    let a = analyze_magnitude(&mag, half_rate(&clip), &stats, cfg)?;

    fs::create_dir_all(outdir).map_err(|e| Error::io(outdir, e))?;
    write_file(&outdir.join("pitch.csv"), a.pitch.to_csv())?;
    write_file(&outdir.join("rh.pgm"), a.r_h.to_pgm())?;
    write_file(&outdir.join("ra.pgm"), a.r_a.to_pgm())?;
    write_file(&outdir.join("rb.pgm"), a.r_b.to_pgm())?;
    write_file(&outdir.join("vad.csv"), a.vad.to_csv("vad"))?;
    write_file(&outdir.join("vrd.csv"), a.vrd.to_csv("vrd"))?;
    write_file(&outdir.join("gate.pgm"), a.gate.to_pgm())?;
    Ok(a)
}

/// Clipped ideal magnitude ratio, `clamp(|clean| / |noisy| - 1, 0, 1)` on
/// open gate cells and 0 elsewhere.
pub fn oracle_compensation_mask(
    clean_mag: &Array2<f64>,
    noisy_mag: &Array2<f64>,
    gate: &BinaryRaster,
) -> Result<MagnitudeMask> {
    if clean_mag.dim() != noisy_mag.dim() {
        return Err(Error::shape("time", clean_mag.nrows(), noisy_mag.nrows()));
    }
    let values = Array2::from_shape_fn(clean_mag.dim(), |(t, f)| {
        if !gate.get(t, f) {
            return 0.0;
        }
        let (c, n) = (clean_mag[[t, f]], noisy_mag[[t, f]]);
        if n == 0.0 {
            if c > 0.0 {
                1.0
            } else {
                0.0
            }
        } else {
            (c / n - 1.0).clamp(0.0, 1.0)
        }
    });
    MagnitudeMask::new(values)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub si_sdr_before_db: f64,
    pub si_sdr_after_db: f64,
    pub frames_evaluated: usize,
    pub samples_evaluated: usize,
    pub gate_open_cells: usize,
}

impl OracleReport {
    pub fn improvement_db(&self) -> f64 {
        self.si_sdr_after_db - self.si_sdr_before_db
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "si_sdr_before_db = {}", self.si_sdr_before_db).unwrap();
        writeln!(out, "si_sdr_after_db = {}", self.si_sdr_after_db).unwrap();
        writeln!(out, "si_sdr_delta_db = {}", self.improvement_db()).unwrap();
        writeln!(out, "frames_evaluated = {}", self.frames_evaluated).unwrap();
        writeln!(out, "samples_evaluated = {}", self.samples_evaluated).unwrap();
        writeln!(out, "gate_open_cells = {}", self.gate_open_cells).unwrap();
        out
    }
}

#[derive(Debug, Clone)]
pub struct OracleOutcome {
    pub enhanced: AudioClip,
    pub analysis: GateAnalysis,
    pub mask: MagnitudeMask,
    pub report: OracleReport,
}

/// Range scored by SI-SDR: the synthesis output minus one window at each end,
/// where fewer than all overlapping frames contribute.
fn scored_range(len: usize, win: usize) -> (usize, usize) {
    if len > 4 * win {
        (win, len - win)
    } else {
        (0, len)
    }
}

/// Gate from the clean reference, oracle compensation applied to the noisy
/// spectrogram, inverse transform, and SI-SDR before and after.
pub fn oracle_gate(
    noisy: &AudioClip,
    clean: &AudioClip,
    stats: &EnergyStats,
    cfg: &PipelineConfig,
) -> Result<OracleOutcome> {
    cfg.validate()?;
    if noisy.len() != clean.len() {
        return Err(Error::shape("time", clean.len(), noisy.len()));
    }
    if noisy.sample_rate() != clean.sample_rate() {
        return Err(Error::Validation("noisy and clean sample rates differ".into()));
    }
    if clean.samples().iter().all(|&s| s == 0.0) {
        return Err(Error::Validation("clean reference has zero energy".into()));
    }
    let stft = cfg.stft()?;
    let noisy_spec: ComplexSpectrogram = stft_forward(noisy, &stft)?;
    let clean_mag = magnitude_of(clean, &stft)?;
    let noisy_mag = noisy_spec.magnitude();

    let analysis = analyze_magnitude(&clean_mag, half_rate(clean), stats, cfg)?;
    let mask = oracle_compensation_mask(&clean_mag, &noisy_mag, &analysis.gate)?;
    let enhanced_spec = mask_apply_m(&noisy_spec, &mask)?;
    let enhanced = istft_inverse(&enhanced_spec)?;

    let (lo, hi) = scored_range(enhanced.len(), stft.win_length());
    let reference = &clean.samples()[lo..hi];
    let report = OracleReport {
        si_sdr_before_db: si_sdr_samples(&noisy.samples()[lo..hi], reference)?,
        si_sdr_after_db: si_sdr_samples(&enhanced.samples()[lo..hi], reference)?,
        frames_evaluated: noisy_spec.frames(),
        samples_evaluated: hi - lo,
        gate_open_cells: analysis.gate.count_ones(),
    };
    Ok(OracleOutcome {
        enhanced,
        analysis,
        mask,
        report,
    })
}

pub fn run_oracle_gate(
    noisy: &Path,
    clean: &Path,
    stats: &Path,
    out_wav: &Path,
    report: &Path,
    cfg: &PipelineConfig,
) -> Result<OracleReport> {
    let noisy = read_wav(noisy)?;
    let clean = read_wav(clean)?;
    let stats = load_stats(stats)?;
    let outcome = oracle_gate(&noisy, &clean, &stats, cfg)?;
    write_wav(&outcome.enhanced, out_wav)?;
    write_file(report, outcome.report.to_text())?;
    Ok(outcome.report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trip() {
        let cfg = PipelineConfig {
            hop: 384,
            valley_parity: ValleyParity::EvenSplit,
            vad_override: VadOverride::Off,
            ..PipelineConfig::default()
        };
        let text = cfg.to_string();
        assert_eq!(PipelineConfig::parse(&text).unwrap(), cfg);
    }

    #[test]
    fn config_rejects_unknown_and_invalid() {
        assert!(matches!(
            PipelineConfig::parse("colour = blue"),
            Err(Error::Config(_))
        ));
        assert!(PipelineConfig::parse("hop = x").is_err());
        assert!(PipelineConfig::parse("hop").is_err());
        assert!(PipelineConfig::parse("fft_size = 256").is_err());
        assert!(PipelineConfig::parse("log_floor = 0").is_err());
        assert!(PipelineConfig::parse("vad_override = maybe").is_err());
        let cfg = PipelineConfig::parse("# comment\n\n epsilon_b = 2 \n").unwrap();
        assert_eq!(cfg.epsilon_b, 2.0);
        assert_eq!(PipelineConfig::parse("colour = blue").unwrap_err().exit_code(), 2);
    }

    #[test]
    fn oracle_mask_rules() {
        let clean = Array2::from_shape_vec((1, 5), vec![2.0, 0.5, 3.0, 1.0, 0.0]).unwrap();
        let noisy = Array2::from_shape_vec((1, 5), vec![1.0, 1.0, 1.0, 0.0, 0.0]).unwrap();
        let open = BinaryRaster::ones(1, 5);
        let m = oracle_compensation_mask(&clean, &noisy, &open).unwrap();
        assert_eq!(m.values().row(0).to_vec(), vec![1.0, 0.0, 1.0, 1.0, 0.0]);
        let closed = BinaryRaster::zeros(1, 5);
        let m = oracle_compensation_mask(&clean, &noisy, &closed).unwrap();
        assert!(m.values().iter().all(|&v| v == 0.0));
    }
}
