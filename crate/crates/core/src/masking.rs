//! Mask application.
//!
//! * Complex masking ([`mask_apply_e`]): output magnitude is `|S| * tanh(|M|)`
//!   and output phase is `phase(S) + phase(M)`.
//! * Magnitude compensation ([`mask_apply_m`]): output magnitude is
//!   `|S'| * (1 + M)` with the phase of `S'` kept.

use ndarray::{Array2, Zip};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::stft::ComplexSpectrogram;

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMask {
    real: Array2<f64>,
    imag: Array2<f64>,
}

impl ComplexMask {
    pub fn new(real: Array2<f64>, imag: Array2<f64>) -> Result<Self> {
        if real.nrows() != imag.nrows() {
            return Err(Error::shape("time", real.nrows(), imag.nrows()));
        }
        if real.ncols() != imag.ncols() {
            return Err(Error::shape("frequency", real.ncols(), imag.ncols()));
        }
        if real.iter().chain(imag.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Validation("complex mask has non-finite entries".into()));
        }
        Ok(Self { real, imag })
    }

    pub fn real(&self) -> &Array2<f64> {
        &self.real
    }

    pub fn imag(&self) -> &Array2<f64> {
        &self.imag
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MagnitudeMask {
    values: Array2<f64>,
}

impl MagnitudeMask {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Validation(format!(
                "magnitude mask entry {v} is outside [0, 1]"
            )));
        }
        Ok(Self { values })
    }

    pub fn zeros(frames: usize, bins: usize) -> Self {
        Self {
            values: Array2::zeros((frames, bins)),
        }
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }
}

/// `atan2(im, re)`, with the phase of zero taken as zero.
fn phase(re: f64, im: f64) -> f64 {
    if re == 0.0 && im == 0.0 {
        0.0
    } else {
        im.atan2(re)
    }
}

fn check_shape(spec: &ComplexSpectrogram, dim: (usize, usize)) -> Result<()> {
    if spec.frames() != dim.0 {
        return Err(Error::shape("time", spec.frames(), dim.0));
    }
    if spec.bins() != dim.1 {
        return Err(Error::shape("frequency", spec.bins(), dim.1));
    }
    Ok(())
}

pub fn mask_apply_e(spec: &ComplexSpectrogram, mask: &ComplexMask) -> Result<ComplexSpectrogram> {
    mask_apply_e_with(spec, mask, f64::tanh)
}

/// [`mask_apply_e`] with a caller-supplied bounding activation in place of `tanh`.
pub fn mask_apply_e_with(
    spec: &ComplexSpectrogram,
    mask: &ComplexMask,
    activation: impl Fn(f64) -> f64 + Sync,
) -> Result<ComplexSpectrogram> {
    check_shape(spec, mask.real.dim())?;
    let mut out = Array2::<Complex64>::zeros(spec.data().dim());
    Zip::from(&mut out)
        .and(spec.data())
        .and(&mask.real)
        .and(&mask.imag)
        .par_for_each(|o, s, &mr, &mi| {
            let mag = s.norm() * activation(mr.hypot(mi));
            let ph = phase(s.re, s.im) + phase(mr, mi);
            *o = Complex64::from_polar(mag, ph);
        });
    Ok(spec.with_data(out))
}

pub fn mask_apply_m(
    coarse: &ComplexSpectrogram,
    mask: &MagnitudeMask,
) -> Result<ComplexSpectrogram> {
    check_shape(coarse, mask.values.dim())?;
    let mut out = Array2::<Complex64>::zeros(coarse.data().dim());
    Zip::from(&mut out)
        .and(coarse.data())
        .and(&mask.values)
        .par_for_each(|o, s, &m| {
            // Scaling both parts keeps the phase bit-exact.
            *o = s * (1.0 + m);
        });
    Ok(coarse.with_data(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stft::StftConfig;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> StftConfig {
        StftConfig::new(8, 8, 2).unwrap()
    }

    fn random_spec(rng: &mut ChaCha8Rng, t: usize) -> ComplexSpectrogram {
        let data = Array2::from_shape_fn((t, 5), |_| {
            Complex64::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0))
        });
        ComplexSpectrogram::new(data, cfg(), 16_000).unwrap()
    }

    #[test]
    fn zero_complex_mask_silences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let spec = random_spec(&mut rng, 3);
        let mask = ComplexMask::new(Array2::zeros((3, 5)), Array2::zeros((3, 5))).unwrap();
        let out = mask_apply_e(&spec, &mask).unwrap();
        assert!(out.data().iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn saturated_real_mask_passes_through() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let spec = random_spec(&mut rng, 3);
        let mask = ComplexMask::new(Array2::from_elem((3, 5), 100.0), Array2::zeros((3, 5))).unwrap();
        let out = mask_apply_e(&spec, &mask).unwrap();
        for (o, s) in out.data().iter().zip(spec.data()) {
            assert!((o.norm() - s.norm()).abs() <= 1e-8 * s.norm());
            assert!((o.arg() - s.arg()).abs() < 1e-12);
        }
    }

    #[test]
    fn complex_mask_matches_scalar_route() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let spec = random_spec(&mut rng, 20);
        let real = Array2::from_shape_fn((20, 5), |_| rng.gen_range(-2.0..2.0));
        let imag = Array2::from_shape_fn((20, 5), |_| rng.gen_range(-2.0..2.0));
        let mask = ComplexMask::new(real.clone(), imag.clone()).unwrap();
        let out = mask_apply_e(&spec, &mask).unwrap();
        for ((idx, o), s) in out.data().indexed_iter().zip(spec.data()) {
            // S * M / |M| * tanh(|M|): rotation by the mask phase via multiplication.
            let m = Complex64::new(real[idx], imag[idx]);
            let want = s * m / m.norm() * m.norm().tanh();
            assert!((o - want).norm() < 1e-9);
            assert!(o.norm() <= s.norm() + 1e-12);
        }
    }

    #[test]
    fn custom_activation_hook() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let spec = random_spec(&mut rng, 2);
        let mask = ComplexMask::new(Array2::ones((2, 5)), Array2::zeros((2, 5))).unwrap();
        let out = mask_apply_e_with(&spec, &mask, |x| 0.5 * x).unwrap();
        for (o, s) in out.data().iter().zip(spec.data()) {
            assert!((o - s * 0.5).norm() < 1e-12);
        }
    }

    #[test]
    fn magnitude_mask_identity_and_doubling() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let spec = random_spec(&mut rng, 4);
        let out = mask_apply_m(&spec, &MagnitudeMask::zeros(4, 5)).unwrap();
        assert_eq!(out, spec);
        let out = mask_apply_m(&spec, &MagnitudeMask::new(Array2::ones((4, 5))).unwrap()).unwrap();
        for (o, s) in out.data().iter().zip(spec.data()) {
            assert_eq!(o.arg(), s.arg());
            assert!((o.norm() - 2.0 * s.norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn shape_and_range_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let spec = random_spec(&mut rng, 4);
        assert!(MagnitudeMask::new(Array2::from_elem((1, 1), 1.5)).is_err());
        assert!(MagnitudeMask::new(Array2::from_elem((1, 1), -0.1)).is_err());
        assert!(matches!(
            mask_apply_m(&spec, &MagnitudeMask::zeros(3, 5)),
            Err(Error::ShapeMismatch { axis: "time", .. })
        ));
        let mask = ComplexMask::new(Array2::zeros((4, 4)), Array2::zeros((4, 4))).unwrap();
        assert!(matches!(
            mask_apply_e(&spec, &mask),
            Err(Error::ShapeMismatch { axis: "frequency", .. })
        ));
        assert!(ComplexMask::new(Array2::zeros((4, 4)), Array2::zeros((4, 5))).is_err());
    }

    #[test]
    fn zero_spectrogram_stays_zero() {
        let spec = ComplexSpectrogram::zeros(3, cfg(), 16_000);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mm = MagnitudeMask::new(Array2::from_shape_fn((3, 5), |_| rng.gen())).unwrap();
        assert_eq!(mask_apply_m(&spec, &mm).unwrap(), spec);
        let cm = ComplexMask::new(Array2::ones((3, 5)), Array2::ones((3, 5))).unwrap();
        assert!(mask_apply_e(&spec, &cm).unwrap().data().iter().all(|c| c.norm() == 0.0));
    }
}
