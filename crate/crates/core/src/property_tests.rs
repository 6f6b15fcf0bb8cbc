use crate::audio_io::{decode_wav, encode_wav, AudioClip};
use crate::compensator::{default_blocks, ghcm_forward};
use crate::gate::{compose_gate, GateInputs};
use crate::harmonic::{BinaryRaster, LOG_FLOOR};
use crate::masking::{mask_apply_m, MagnitudeMask};
use crate::pipeline::with_jobs;
use crate::sed::{energy_labels, make_thresholds, EnergyStats, FrameFlags};
use crate::stft::{ComplexSpectrogram, StftConfig};
use ndarray::{Array1, Array2};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn raster(frames: usize, bins: usize, bits: &[bool]) -> BinaryRaster {
    BinaryRaster::from_fn(frames, bins, |t, f| bits[t * bins + f])
}

fn flags(bits: &[bool]) -> FrameFlags {
    FrameFlags::new(bits.iter().map(|&b| b as u8).collect()).unwrap()
}

fn random_stats(bins: usize, seed: u64) -> EnergyStats {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mu = Array1::from_shape_fn(bins, |_| rng.gen_range(-6.0..1.0));
    let sigma = Array1::from_shape_fn(bins, |_| rng.gen_range(0.0..2.0));
    EnergyStats::new(mu, sigma, 3).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn labels_shrink_as_epsilon_grows(seed in 0u64..1000, e1 in -2.0f64..3.0, de in 0.0f64..3.0) {
        let bins = 17;
        let stats = random_stats(bins, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
        let mag = Array2::from_shape_fn((9, bins), |_| 10f64.powf(rng.gen_range(-4.0..1.0)));
        let lo = energy_labels(&mag, &make_thresholds(&stats, e1), LOG_FLOOR).unwrap();
        let hi = energy_labels(&mag, &make_thresholds(&stats, e1 + de), LOG_FLOOR).unwrap();
        for (a, b) in lo.values().iter().zip(hi.values()) {
            prop_assert!(b <= a);
        }
    }

    #[test]
    fn labels_grow_with_magnitude(seed in 0u64..1000, gain in 1.0f64..100.0) {
        let bins = 17;
        let stats = random_stats(bins, seed);
        let thr = make_thresholds(&stats, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 2);
        let mag = Array2::from_shape_fn((9, bins), |_| 10f64.powf(rng.gen_range(-4.0..1.0)));
        let base = energy_labels(&mag, &thr, LOG_FLOOR).unwrap();
        let louder = energy_labels(&mag.mapv(|m| m * gain), &thr, LOG_FLOOR).unwrap();
        for (a, b) in base.values().iter().zip(louder.values()) {
            prop_assert!(a <= b);
        }
    }

    #[test]
    fn gate_bounded_by_factors_and_order_free(
        bits in proptest::collection::vec(any::<bool>(), 4 * 6 * 2 + 4 * 2)
    ) {
        let (t, f) = (4, 6);
        let ra = raster(t, f, &bits[..t * f]);
        let rh = raster(t, f, &bits[t * f..2 * t * f]);
        let vad = flags(&bits[2 * t * f..2 * t * f + t]);
        let vrd = flags(&bits[2 * t * f + t..]);
        let g = compose_gate(&GateInputs { r_vad: vad.clone(), r_vrd: vrd.clone(), r_a: ra.clone(), r_h: rh.clone() }).unwrap();
        let swapped = compose_gate(&GateInputs { r_vad: vrd.clone(), r_vrd: vad.clone(), r_a: rh.clone(), r_h: ra.clone() }).unwrap();
        prop_assert_eq!(&g, &swapped);
        for ((ti, fi), &v) in g.values().indexed_iter() {
            prop_assert!(v <= ra.values()[[ti, fi]] && v <= rh.values()[[ti, fi]]);
            prop_assert!(v <= vad.values()[ti] && v <= vrd.values()[ti]);
        }
    }

    #[test]
    fn additive_mask_never_shrinks(seed in 0u64..1000) {
        let cfg = StftConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = Array2::from_shape_fn((5, cfg.bins()), |_| {
            Complex64::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0))
        });
        let spec = ComplexSpectrogram::new(data, cfg.clone(), 16_000).unwrap();
        let mask = MagnitudeMask::new(Array2::from_shape_fn((5, cfg.bins()), |_| rng.gen_range(0.0..=1.0))).unwrap();
        let out = mask_apply_m(&spec, &mask).unwrap();
        for (a, b) in spec.data().iter().zip(out.data()) {
            prop_assert!(b.norm() >= a.norm());
            prop_assert!(b.norm() <= 2.0 * a.norm() + 1e-12);
        }
    }

    #[test]
    fn wav_round_trip_within_one_step(samples in proptest::collection::vec(-1.0f64..=1.0, 1..2000)) {
        let clip = AudioClip::new(samples.clone(), 16_000).unwrap();
        let bytes = encode_wav(&clip);
        prop_assert_eq!(bytes.len(), 44 + 2 * samples.len());
        let back = decode_wav(&bytes).unwrap();
        prop_assert_eq!(back.len(), samples.len());
        for (a, b) in samples.iter().zip(back.samples()) {
            prop_assert!((a - b).abs() <= 1.0 / 32768.0);
        }
        prop_assert_eq!(encode_wav(&back), bytes);
    }
}

#[test]
fn compensator_output_ignores_thread_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let x = Array2::from_shape_fn((16, 257), |_| rng.gen_range(0.0..2.0));
    let gate = BinaryRaster::new(Array2::from_shape_fn((16, 257), |_| rng.gen_range(0..2))).unwrap();
    let blocks = default_blocks(4);
    let one = with_jobs(1, || ghcm_forward(&x, &gate, &blocks)).unwrap().unwrap();
    let four = with_jobs(4, || ghcm_forward(&x, &gate, &blocks)).unwrap().unwrap();
    assert_eq!(one, four);
    assert!(one.values().iter().all(|&v| v > 0.0 && v < 1.0));
}
