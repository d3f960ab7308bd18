use fieldrx::frontend::{capture, capture_with, detect_intensity, quantize, CaptureOptions};
use fieldrx::sigcore::{seeded_rng, ComplexWaveform, DispersionOperator, MdmWaveform, SignalGrid};
use fieldrx::txgen::pulse_shape;
use num_complex::Complex;
use proptest::prelude::*;
use rand::Rng;

type C = Complex<f64>;

fn qpsk_fields(n_sym: usize, k: usize, seed: u64) -> MdmWaveform<f64> {
    let grid = SignalGrid::standard(n_sym * 2).unwrap();
    let mut rng = seeded_rng(seed, "qpsk");
    let a = std::f64::consts::FRAC_1_SQRT_2;
    let tribs = (0..k)
        .map(|_| {
            let s: Vec<C> = (0..n_sym)
                .map(|_| C::new(if rng.gen() { a } else { -a }, if rng.gen() { a } else { -a }))
                .collect();
            pulse_shape(&s, &grid, grid.rolloff).unwrap()
        })
        .collect();
    MdmWaveform::new(tribs).unwrap()
}

/// Signal-to-noise-and-distortion of a quantised full-scale sine.
fn sinad_db(enob: f64) -> f64 {
    let n = 1 << 16;
    let cycles = 1237.0;
    let x: Vec<f64> = (0..n)
        .map(|t| 0.5 + 0.5 * (std::f64::consts::TAU * cycles * t as f64 / n as f64).sin())
        .collect();
    let q = quantize(&x, enob, 3).unwrap();
    let ps = 0.125;
    let pe = x.iter().zip(&q).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n as f64;
    10.0 * (ps / pe).log10()
}

#[test]
fn sinad_tracks_enob() {
    for enob in [5.0, 6.0, 8.0, 10.0, 12.0, 6.5, 7.3] {
        let s = sinad_db(enob);
        let ideal = 6.02 * enob + 1.76;
        assert!((s - ideal).abs() < 0.5, "enob {enob}: {s} vs {ideal}");
    }
}

#[test]
fn square_law() {
    let grid = SignalGrid::standard(16).unwrap();
    let c = C::new(1.0, 1.0) / 2f64.sqrt();
    let x = ComplexWaveform::new(grid, vec![c; 16]).unwrap();
    assert!(detect_intensity(&x).iter().all(|v| (v - 1.0).abs() < 1e-15));
    assert!(detect_intensity(&ComplexWaveform::<f64>::zeros(grid)).iter().all(|&v| v == 0.0));
    let y = x.map(|v| v * C::new(0.0, 3.0));
    assert!(detect_intensity(&y).iter().all(|v| (v - 9.0).abs() < 1e-12));
}

#[test]
fn zero_dispersion_gives_equal_traces() {
    let x = qpsk_fields(512, 2, 1);
    let cap = capture(&x, &DispersionOperator::for_grid(0.0, x.grid()), None, 1).unwrap();
    assert_eq!(cap.direct, cap.dispersed);
}

#[test]
fn dispersed_trace_keeps_energy() {
    let x = qpsk_fields(1024, 3, 2);
    let cap = capture_with(&x, &DispersionOperator::for_grid(650.0, x.grid()), &CaptureOptions::default(), 1).unwrap();
    for (a, b) in cap.direct.iter().zip(&cap.dispersed) {
        let ea: f64 = a.iter().sum();
        let eb: f64 = b.iter().sum();
        assert!(((ea - eb) / ea).abs() < 1e-10);
        assert_eq!(a.len(), b.len());
    }
}

#[test]
fn path_losses_are_calibrated_out() {
    let x = qpsk_fields(256, 1, 3);
    let d = DispersionOperator::for_grid(650.0, x.grid());
    let plain = capture_with(&x, &d, &CaptureOptions::default(), 1).unwrap();
    let lossy = capture_with(
        &x,
        &d,
        &CaptureOptions {
            direct_path_loss_db: 3.0,
            dispersed_path_loss_db: 7.0,
            ..CaptureOptions::default()
        },
        1,
    )
    .unwrap();
    for (a, b) in plain.direct[0].iter().zip(lossy.calibrated_direct(0)) {
        assert!((a - b).abs() < 1e-12 * a.max(1.0));
    }
    for (a, b) in plain.dispersed[0].iter().zip(lossy.calibrated_dispersed(0)) {
        assert!((a - b).abs() < 1e-12 * a.max(1.0));
    }
}

#[test]
fn backward_operator_is_rejected() {
    let x = qpsk_fields(64, 1, 4);
    let d = DispersionOperator::for_grid(650.0, x.grid()).inverse();
    assert!(capture(&x, &d, None, 1).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn traces_are_non_negative(seed in 0u64..10_000, enob in proptest::option::of(1.0f64..12.0), psnm in 0.0f64..2000.0) {
        let x = qpsk_fields(256, 2, seed);
        let cap = capture(&x, &DispersionOperator::for_grid(psnm, x.grid()), enob, seed).unwrap();
        prop_assert!(cap.direct.iter().chain(&cap.dispersed).flatten().all(|&v| v >= 0.0));
    }

    #[test]
    fn quantiser_error_is_bounded(seed in 0u64..10_000, bits in 2u32..12) {
        let mut rng = seeded_rng(seed, "t");
        let mut t: Vec<f64> = (0..512).map(|_| rng.gen::<f64>()).collect();
        t[0] = 1.0;
        let q = quantize(&t, bits as f64, seed).unwrap();
        let lsb = 1.0 / (1u64 << bits) as f64;
        prop_assert!(t.iter().zip(&q).all(|(a, b)| (a - b).abs() <= lsb / 2.0 + 1e-12));
    }
}
