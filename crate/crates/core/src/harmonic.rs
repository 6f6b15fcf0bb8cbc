//! High-resolution harmonic integral spectrum.
//!
//! Pitch candidates sit on a 0.1 Hz grid. Candidate row `c` (pitch `c / 10`
//! Hz) of the integral matrix holds `+1/sqrt(k)` at the bin of its `k`-th
//! harmonic and `-1/sqrt(k)` spread over the valley bin(s) below it, so the
//! product of a log-magnitude frame with the matrix integrates peaks minus
//! valleys for every candidate at once. Rows below [`MIN_CANDIDATE`] are
//! zero, which keeps candidate indices equal to tenths of a hertz.

use std::fmt::Write as _;
use std::io::{Read, Write};

use ndarray::{Array2, ArrayView1, Axis};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Total number of candidate rows, including the unused low rows.
pub const CANDIDATE_ROWS: usize = 4200;
/// First candidate in use (60.0 Hz).
pub const MIN_CANDIDATE: usize = 600;
/// Clamp applied to magnitudes before taking logarithms.
pub const LOG_FLOOR: f64 = 1e-8;

const MATRIX_MAGIC: &[u8; 4] = b"HGCU";
const MATRIX_VERSION: u8 = 1;

/// Rounds `num / den` half away from zero for non-negative operands.
fn round_div(num: u64, den: u64) -> u64 {
    (2 * num + den) / (2 * den)
}

/// Where the valley bins of harmonic `k` are measured from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ValleyAnchor {
    /// `last_index` stays at bin 0 for every harmonic, so the valley of
    /// harmonic `k` lies halfway between bin 0 and its peak.
    Origin,
    /// `last_index` follows the previous harmonic's peak, so the valley lies
    /// between consecutive peaks.
    #[default]
    PreviousPeak,
}

/// How a valley is split when the peak gap is odd or even.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ValleyParity {
    /// Odd gap: half the weight on each of `i` and `i + 1`; even gap: all of
    /// it on `i`, where `i` is the rounded half gap.
    #[default]
    OddSplit,
    /// Odd gap: all on `i`; even gap: split over `i` and `i + 1`.
    EvenSplit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct IntegralOptions {
    pub anchor: ValleyAnchor,
    pub parity: ValleyParity,
}

/// One step of the integral walk: a peak bin, the valley bins with their
/// share of the weight, and the harmonic weight itself.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicTap {
    pub k: u32,
    pub peak: usize,
    pub weight: f64,
    /// `(bin, fraction)` pairs; the fractions sum to 1.
    pub valleys: Vec<(usize, f64)>,
}

/// Walks the harmonics of candidate `candidate` (in tenths of a hertz),
/// yielding peak and valley placements. Harmonics whose peak lands at or
/// beyond `bins` are skipped whole so each row still sums to zero.
pub fn harmonic_taps(
    candidate: usize,
    sr: u32,
    bins: usize,
    opts: IntegralOptions,
) -> Vec<HarmonicTap> {
    let (c, sr, f) = (candidate as u64, sr as u64, bins as u64);
    // [sr / (0.1 c)] = [10 sr / c]
    let harmonics = round_div(10 * sr, c);
    let mut taps = Vec::with_capacity(harmonics as usize);
    let mut last = 0usize;
    for k in 1..=harmonics {
        // [0.1 c k F / sr] = [c k F / (10 sr)]
        let peak = round_div(c * k * f, 10 * sr) as usize;
        if peak >= bins {
            continue;
        }
        let gap = peak - last;
        let valleys = if gap > 1 {
            let mut i = round_div(gap as u64, 2) as usize;
            if opts.anchor == ValleyAnchor::PreviousPeak {
                i += last;
            }
            let split = match opts.parity {
                ValleyParity::OddSplit => !gap.is_multiple_of(2),
                ValleyParity::EvenSplit => gap.is_multiple_of(2),
            };
            if split && i + 1 < bins {
                vec![(i, 0.5), (i + 1, 0.5)]
            } else {
                vec![(i, 1.0)]
            }
        } else {
            vec![(peak, 0.5), (last, 0.5)]
        };
        taps.push(HarmonicTap {
            k: k as u32,
            peak,
            weight: 1.0 / (k as f64).sqrt(),
            valleys,
        });
        if opts.anchor == ValleyAnchor::PreviousPeak {
            last = peak;
        }
    }
    taps
}

/// The `4200 x F` integral matrix with a compressed-row copy for products.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralMatrix {
    values: Array2<f64>,
    sr: u32,
    opts: IntegralOptions,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl IntegralMatrix {
    pub fn build(sr: u32, bins: usize) -> Result<Self> {
        Self::build_with(sr, bins, IntegralOptions::default())
    }

    pub fn build_with(sr: u32, bins: usize, opts: IntegralOptions) -> Result<Self> {
        if sr <= 420 {
            return Err(Error::Validation(format!(
                "half sample rate {sr} Hz must exceed the 420 Hz candidate ceiling"
            )));
        }
        if bins < 2 {
            return Err(Error::Validation(format!("need at least 2 bins, got {bins}")));
        }
        let mut values = Array2::<f64>::zeros((CANDIDATE_ROWS, bins));
        values
            .axis_iter_mut(Axis(0))
            .into_par_iter()
            .enumerate()
            .skip(MIN_CANDIDATE)
            .for_each(|(cand, mut row)| {
                for tap in harmonic_taps(cand, sr, bins, opts) {
                    row[tap.peak] += tap.weight;
                    for (bin, frac) in tap.valleys {
                        row[bin] -= tap.weight * frac;
                    }
                }
            });
        Ok(Self::from_dense(values, sr, opts))
    }

    fn from_dense(values: Array2<f64>, sr: u32, opts: IntegralOptions) -> Self {
        let mut row_ptr = Vec::with_capacity(values.nrows() + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for row in values.rows() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    cols.push(j);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self {
            values,
            sr,
            opts,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn sr(&self) -> u32 {
        self.sr
    }

    pub fn bins(&self) -> usize {
        self.values.ncols()
    }

    pub fn options(&self) -> IntegralOptions {
        self.opts
    }

    pub fn nonzeros(&self) -> usize {
        self.vals.len()
    }

    /// Dot product of candidate row `cand` with `x`.
    pub fn row_dot(&self, cand: usize, x: ArrayView1<f64>) -> f64 {
        let (lo, hi) = (self.row_ptr[cand], self.row_ptr[cand + 1]);
        self.cols[lo..hi]
            .iter()
            .zip(&self.vals[lo..hi])
            .map(|(&j, &v)| v * x[j])
            .sum()
    }

    /// Writes `HGCU`, a version byte, `u32` rows/cols/sr, then row-major `f32`.
    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(MATRIX_MAGIC)?;
        w.write_all(&[MATRIX_VERSION])?;
        w.write_all(&(self.values.nrows() as u32).to_le_bytes())?;
        w.write_all(&(self.values.ncols() as u32).to_le_bytes())?;
        w.write_all(&self.sr.to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.values.len() * 4);
        for &v in self.values.iter() {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
        w.write_all(&buf)
    }

    /// Reads a matrix written by [`IntegralMatrix::write_to`]. Values come
    /// back at `f32` precision; the options are not stored and read as default.
    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut head = [0u8; 17];
        r.read_exact(&mut head)
            .map_err(|_| Error::format("header", "truncated integral matrix header"))?;
        if &head[0..4] != MATRIX_MAGIC {
            return Err(Error::format("magic", "expected HGCU"));
        }
        if head[4] != MATRIX_VERSION {
            return Err(Error::format("version", format!("unsupported version {}", head[4])));
        }
        let word = |at: usize| u32::from_le_bytes(head[at..at + 4].try_into().unwrap());
        let (rows, cols, sr) = (word(5) as usize, word(9) as usize, word(13));
        let mut body = vec![0u8; rows * cols * 4];
        r.read_exact(&mut body)
            .map_err(|_| Error::format("values", "truncated integral matrix body"))?;
        let data = body
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
            .collect();
        let values = Array2::from_shape_vec((rows, cols), data)
            .map_err(|e| Error::format("values", e.to_string()))?;
        Ok(Self::from_dense(values, sr, IntegralOptions::default()))
    }
}

/// Per-frame candidate significances, `T x 4200`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignificanceSpectrum {
    values: Array2<f64>,
}

impl SignificanceSpectrum {
    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn frames(&self) -> usize {
        self.values.nrows()
    }
}

/// `log(max(mag, floor))` times the transposed integral matrix.
pub fn significance_spectrum(
    mag: &Array2<f64>,
    u: &IntegralMatrix,
    floor: f64,
) -> Result<SignificanceSpectrum> {
    if floor.is_nan() || floor <= 0.0 {
        return Err(Error::Validation(format!("log floor {floor} must be positive")));
    }
    if mag.ncols() != u.bins() {
        return Err(Error::shape("frequency", u.bins(), mag.ncols()));
    }
    if let Some(v) = mag.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::Validation(format!(
            "magnitude {v} is not a finite non-negative value"
        )));
    }

    let mut q = Array2::<f64>::zeros((mag.nrows(), CANDIDATE_ROWS));
    q.axis_iter_mut(Axis(0))
        .into_par_iter()
        .zip(mag.axis_iter(Axis(0)))
        .for_each(|(mut out, frame)| {
            let logmag = frame.mapv(|m| m.max(floor).ln());
            for cand in MIN_CANDIDATE..CANDIDATE_ROWS {
                out[cand] = u.row_dot(cand, logmag.view());
            }
        });
    Ok(SignificanceSpectrum { values: q })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PitchTrack {
    candidate_index: Vec<u32>,
    pitch_hz: Vec<f64>,
    significance: Vec<f64>,
}

impl PitchTrack {
    /// Builds a track from candidate indices; index 0 means no pitch.
    pub fn from_candidates(candidate_index: Vec<u32>, significance: Vec<f64>) -> Result<Self> {
        if candidate_index.len() != significance.len() {
            return Err(Error::shape("time", candidate_index.len(), significance.len()));
        }
        if let Some(c) = candidate_index
            .iter()
            .find(|&&c| c != 0 && !(MIN_CANDIDATE..CANDIDATE_ROWS).contains(&(c as usize)))
        {
            return Err(Error::Validation(format!(
                "candidate {c} outside {MIN_CANDIDATE}..{CANDIDATE_ROWS}"
            )));
        }
        let pitch_hz = candidate_index.iter().map(|&c| c as f64 / 10.0).collect();
        Ok(Self {
            candidate_index,
            pitch_hz,
            significance,
        })
    }

    pub fn len(&self) -> usize {
        self.pitch_hz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pitch_hz.is_empty()
    }

    pub fn pitch_hz(&self) -> &[f64] {
        &self.pitch_hz
    }

    pub fn candidate_index(&self) -> &[u32] {
        &self.candidate_index
    }

    pub fn significance(&self) -> &[f64] {
        &self.significance
    }

    /// Zeroes the pitch of every frame where `keep` is false.
    pub fn masked(&self, keep: impl Fn(usize) -> bool) -> Self {
        let candidate_index = self
            .candidate_index
            .iter()
            .enumerate()
            .map(|(t, &c)| if keep(t) { c } else { 0 })
            .collect();
        Self::from_candidates(candidate_index, self.significance.clone())
            .expect("masking preserves validity")
    }

    /// `frame,pitch_hz,significance` with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("frame,pitch_hz,significance\n");
        for (t, (p, s)) in self.pitch_hz.iter().zip(&self.significance).enumerate() {
            writeln!(out, "{t},{p:.1},{s}").unwrap();
        }
        out
    }
}

/// Per frame, the highest-significance candidate in `600..4200`; ties go to
/// the lowest index.
pub fn pick_pitch(q: &SignificanceSpectrum) -> PitchTrack {
    let (cands, sig): (Vec<u32>, Vec<f64>) = q
        .values
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = MIN_CANDIDATE;
            let mut best_v = row[MIN_CANDIDATE];
            for c in MIN_CANDIDATE + 1..CANDIDATE_ROWS {
                if row[c] > best_v {
                    best = c;
                    best_v = row[c];
                }
            }
            (best as u32, best_v)
        })
        .unzip();
    PitchTrack::from_candidates(cands, sig).expect("argmax lies in candidate range")
}

/// A `T x F` grid of zeros and ones.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryRaster {
    values: Array2<u8>,
}

impl BinaryRaster {
    pub fn new(values: Array2<u8>) -> Result<Self> {
        if let Some(v) = values.iter().find(|&&v| v > 1) {
            return Err(Error::Validation(format!("raster entry {v} is not binary")));
        }
        Ok(Self { values })
    }

    pub fn zeros(frames: usize, bins: usize) -> Self {
        Self {
            values: Array2::zeros((frames, bins)),
        }
    }

    pub fn ones(frames: usize, bins: usize) -> Self {
        Self {
            values: Array2::ones((frames, bins)),
        }
    }

    /// Entry is 1 where `pred(t, f)` holds.
    pub fn from_fn(frames: usize, bins: usize, pred: impl Fn(usize, usize) -> bool) -> Self {
        Self {
            values: Array2::from_shape_fn((frames, bins), |(t, f)| pred(t, f) as u8),
        }
    }

    pub fn values(&self) -> &Array2<u8> {
        &self.values
    }

    pub fn frames(&self) -> usize {
        self.values.nrows()
    }

    pub fn bins(&self) -> usize {
        self.values.ncols()
    }

    pub fn get(&self, t: usize, f: usize) -> bool {
        self.values[[t, f]] == 1
    }

    pub fn row_sum(&self, t: usize) -> usize {
        self.values.row(t).iter().map(|&v| v as usize).sum()
    }

    pub fn count_ones(&self) -> usize {
        self.values.iter().map(|&v| v as usize).sum()
    }

    /// Rows of comma-separated 0/1, one line per frame.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.values.len() * 2);
        for row in self.values.rows() {
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                out.push(if *v == 1 { '1' } else { '0' });
            }
            out.push('\n');
        }
        out
    }

    /// Binary PGM (`P5`): width = frames, height = bins, lowest bin on the
    /// bottom row, 255 where the entry is 1.
    pub fn to_pgm(&self) -> Vec<u8> {
        let (t, f) = self.values.dim();
        let mut out = format!("P5\n{t} {f}\n255\n").into_bytes();
        out.reserve(t * f);
        for bin in (0..f).rev() {
            for frame in 0..t {
                out.push(if self.values[[frame, bin]] == 1 { 255 } else { 0 });
            }
        }
        out
    }
}

/// Marks bin `[p k F / sr]` for `k = 1..floor(sr / p)` on every frame with a
/// pitch; pitchless frames stay zero.
pub fn harmonic_raster(track: &PitchTrack, sr: u32, bins: usize) -> BinaryRaster {
    let mut values = Array2::<u8>::zeros((track.len(), bins));
    for (t, &cand) in track.candidate_index.iter().enumerate() {
        if cand == 0 {
            continue;
        }
        let (c, sr64, f) = (cand as u64, sr as u64, bins as u64);
        // floor(sr / p) with p = c / 10
        let harmonics = 10 * sr64 / c;
        for k in 1..=harmonics {
            let bin = round_div(c * k * f, 10 * sr64) as usize;
            if bin < bins {
                values[[t, bin]] = 1;
            }
        }
    }
    BinaryRaster { values }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array1;

    fn matrix() -> IntegralMatrix {
        IntegralMatrix::build(8000, 257).unwrap()
    }

    #[test]
    fn low_rows_are_zero_and_rows_sum_to_zero() {
        let u = matrix();
        for (c, row) in u.values().rows().into_iter().enumerate() {
            let s: f64 = row.sum();
            if c < MIN_CANDIDATE {
                assert!(row.iter().all(|&v| v == 0.0));
            } else {
                assert!(s.abs() < 1e-6, "row {c} sums to {s}");
                assert!(row.iter().any(|&v| v != 0.0));
            }
        }
    }

    #[test]
    fn row_for_100_hz() {
        let taps = harmonic_taps(1000, 8000, 257, IntegralOptions::default());
        assert_eq!(taps.len(), 79, "k = 80 lands on bin 257 and is skipped");
        assert_eq!(taps[0].peak, 3);
        assert_eq!(taps[0].weight, 1.0);
        assert_eq!(round_div(10 * 8000, 1000), 80);
    }

    #[test]
    fn rounding_is_half_away_from_zero() {
        assert_eq!(round_div(5, 2), 3);
        assert_eq!(round_div(3, 2), 2);
        assert_eq!(round_div(7, 4), 2);
        assert_eq!(round_div(5, 4), 1);
    }

    #[test]
    fn constant_magnitude_gives_zero_significance() {
        let u = matrix();
        let mag = Array2::from_elem((3, 257), 0.37);
        let q = significance_spectrum(&mag, &u, LOG_FLOOR).unwrap();
        assert!(q.values().iter().all(|v| v.abs() < 1e-6));
        for row in q.values().rows() {
            assert!(row.iter().take(MIN_CANDIDATE).all(|&v| v == 0.0));
        }
    }

    #[test]
    fn significance_validates_input() {
        let u = matrix();
        let mut mag = Array2::from_elem((1, 257), 1.0);
        mag[[0, 4]] = f64::NAN;
        assert!(significance_spectrum(&mag, &u, LOG_FLOOR).is_err());
        let mag = Array2::from_elem((1, 256), 1.0);
        assert!(matches!(
            significance_spectrum(&mag, &u, LOG_FLOOR),
            Err(Error::ShapeMismatch { axis: "frequency", .. })
        ));
        let mag = Array2::from_elem((1, 257), 1.0);
        assert!(significance_spectrum(&mag, &u, 0.0).is_err());
    }

    #[test]
    fn zero_significance_picks_lowest_candidate() {
        let q = SignificanceSpectrum {
            values: Array2::zeros((2, CANDIDATE_ROWS)),
        };
        let track = pick_pitch(&q);
        assert_eq!(track.candidate_index(), &[600, 600]);
        assert_eq!(track.pitch_hz(), &[60.0, 60.0]);
    }

    #[test]
    fn raster_for_100_hz() {
        let track = PitchTrack::from_candidates(vec![1000, 0], vec![1.0, 0.0]).unwrap();
        let r = harmonic_raster(&track, 8000, 257);
        let ones: Vec<usize> = (0..257).filter(|&f| r.get(0, f)).collect();
        let expected: Vec<usize> = (1..=80)
            .map(|k| (3.2125 * k as f64).round() as usize)
            .filter(|&b| b < 257)
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        assert_eq!(&ones[..4], &[3, 6, 10, 13]);
        assert_eq!(ones, expected);
        assert_eq!(r.row_sum(1), 0);
    }

    #[test]
    fn raster_for_top_candidate() {
        let track = PitchTrack::from_candidates(vec![4199], vec![0.0]).unwrap();
        let r = harmonic_raster(&track, 8000, 257);
        let first = (0..257).find(|&f| r.get(0, f)).unwrap();
        assert_eq!(first, 13);
    }

    #[test]
    fn track_rejects_out_of_range() {
        assert!(PitchTrack::from_candidates(vec![599], vec![0.0]).is_err());
        assert!(PitchTrack::from_candidates(vec![4200], vec![0.0]).is_err());
        assert!(PitchTrack::from_candidates(vec![0, 600, 4199], vec![0.0; 3]).is_ok());
    }

    #[test]
    fn pitch_csv_format() {
        let track = PitchTrack::from_candidates(vec![1000, 0], vec![2.5, 0.0]).unwrap();
        assert_eq!(track.to_csv(), "frame,pitch_hz,significance\n0,100.0,2.5\n1,0.0,0\n");
    }

    #[test]
    fn matrix_file_round_trip() {
        let u = IntegralMatrix::build(8000, 33).unwrap();
        let mut buf = Vec::new();
        u.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..5], b"HGCU\x01");
        assert_eq!(buf.len(), 17 + 4200 * 33 * 4);
        let back = IntegralMatrix::read_from(buf.as_slice()).unwrap();
        assert_eq!(back.sr(), 8000);
        for (a, b) in back.values().iter().zip(u.values()) {
            assert_eq!(*a, *b as f32 as f64);
        }
        buf[4] = 2;
        assert!(IntegralMatrix::read_from(buf.as_slice()).is_err());
    }

    #[test]
    fn pgm_layout() {
        let r = BinaryRaster::from_fn(3, 2, |t, f| t == 1 && f == 0);
        let pgm = r.to_pgm();
        let header = b"P5\n3 2\n255\n";
        assert_eq!(&pgm[..header.len()], header);
        // Top row is the highest bin.
        assert_eq!(&pgm[header.len()..], &[0, 0, 0, 0, 255, 0]);
        assert_eq!(r.to_csv(), "0,0\n1,0\n0,0\n");
    }

    #[test]
    fn raster_rejects_non_binary() {
        let mut v = Array2::zeros((1, 2));
        v[[0, 1]] = 2;
        assert!(BinaryRaster::new(v).is_err());
    }

    #[test]
    fn row_dot_matches_dense() {
        let u = matrix();
        let x = Array1::from_shape_fn(257, |j| ((j * 7919) % 101) as f64 / 17.0);
        for cand in [600, 1000, 2345, 4199] {
            let dense: f64 = u.values().row(cand).dot(&x);
            assert!((u.row_dot(cand, x.view()) - dense).abs() < 1e-9);
        }
    }
}
