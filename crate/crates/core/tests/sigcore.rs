use fieldrx::sigcore::{
    apply_dispersion, from_frequency, psnm_to_beta2_l, seeded_rng, to_frequency, ComplexWaveform,
    DispersionOperator, SignalGrid,
};
use num_complex::Complex;
use proptest::prelude::*;
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use std::f64::consts::PI;

type C = Complex<f64>;

fn noise(grid: SignalGrid, seed: u64) -> ComplexWaveform<f64> {
    let mut rng = seeded_rng(seed, "sig");
    let s = (0..grid.n_samples)
        .map(|_| C::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    ComplexWaveform::new(grid, s).unwrap()
}

fn rel_l2(a: &[C], b: &[C]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(p, q)| (p - q).norm_sqr()).sum();
    let den: f64 = b.iter().map(|q| q.norm_sqr()).sum();
    (num / den).sqrt()
}

fn naive_dft(x: &[C]) -> Vec<C> {
    let n = x.len();
    (0..n)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(t, v)| v * C::from_polar(1.0, -2.0 * PI * (k * t % n) as f64 / n as f64))
                .sum()
        })
        .collect()
}

#[test]
fn spectrum_matches_direct_dft() {
    let grid = SignalGrid::standard(256).unwrap();
    let x = noise(grid, 1);
    let fast = to_frequency(&x);
    assert!(rel_l2(fast.bins(), &naive_dft(x.samples())) < 1e-12);
}

#[test]
fn zero_and_impulse() {
    let grid = SignalGrid::standard(64).unwrap();
    let z = to_frequency(&ComplexWaveform::<f64>::zeros(grid));
    assert!(z.bins().iter().all(|v| v.norm() == 0.0));
    let mut imp = vec![C::new(0.0, 0.0); 64];
    imp[0] = C::new(1.0, 0.0);
    let s = to_frequency(&ComplexWaveform::new(grid, imp).unwrap());
    assert!(s.bins().iter().all(|v| (v - C::new(1.0, 0.0)).norm() < 1e-15));
}

#[test]
fn operating_dispersion_round_trip() {
    let grid = SignalGrid::standard(1 << 14).unwrap();
    let x = noise(grid, 2);
    let d = DispersionOperator::for_grid(650.0, &grid);
    let y = apply_dispersion(&x, &d);
    assert!(rel_l2(y.samples(), x.samples()) > 0.1);
    let back = apply_dispersion(&y, &d.inverse());
    assert!(rel_l2(back.samples(), x.samples()) < 1e-9);
    assert!(((y.energy() - x.energy()) / x.energy()).abs() < 1e-12);
}

#[test]
fn dispersion_phase_follows_beta2() {
    let grid = SignalGrid::standard(1024).unwrap();
    let d = DispersionOperator::for_grid(650.0, &grid);
    let b2l = psnm_to_beta2_l(650.0, grid.center_wavelength);
    let c = 299_792_458.0;
    let expect = -650e-3 * grid.center_wavelength.powi(2) / (2.0 * PI * c);
    assert!(((b2l - expect) / expect).abs() < 1e-12);
    let h = d.transfer::<f64>(1024, grid.sample_rate());
    for (k, w) in grid.angular_frequencies().iter().enumerate().step_by(37) {
        let phase = 0.5 * b2l * w * w;
        let want = C::from_polar(1.0, phase);
        let alt = C::from_polar(1.0, -phase);
        assert!((h[k] - want).norm() < 1e-9 || (h[k] - alt).norm() < 1e-9);
        assert!((h[k].norm() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn tone_keeps_shape() {
    let grid = SignalGrid::standard(512).unwrap();
    let s: Vec<C> = (0..512).map(|t| C::from_polar(1.0, 2.0 * PI * 19.0 * t as f64 / 512.0)).collect();
    let x = ComplexWaveform::new(grid, s).unwrap();
    let y = apply_dispersion(&x, &DispersionOperator::for_grid(1000.0, &grid));
    let rot = y.samples()[0] / x.samples()[0];
    for (a, b) in x.samples().iter().zip(y.samples()) {
        assert!((a * rot - b).norm() < 1e-9);
    }
}

#[test]
fn zero_dispersion_is_exact() {
    let grid = SignalGrid::standard(256).unwrap();
    let x = noise(grid, 3);
    assert_eq!(apply_dispersion(&x, &DispersionOperator::for_grid(0.0, &grid)), x);
}

#[test]
fn rng_streams() {
    let draws = |seed, label| {
        let mut r = seeded_rng(seed, label);
        (0..1000).map(|_| r.next_u64()).collect::<Vec<_>>()
    };
    assert_eq!(draws(42, "bits"), draws(42, "bits"));
    assert_ne!(draws(42, "bits"), draws(42, "noise"));
    assert_ne!(draws(42, "bits"), draws(43, "bits"));
}

#[test]
fn grid_invariants() {
    let g = SignalGrid::standard(4096).unwrap();
    assert_eq!(g.sample_rate(), 60e9);
    assert_eq!(g.n_symbols(), 2048);
    assert!(g.symbol_period() > 0.0);
    assert!(g.with_len(1000).is_err());
    assert!(SignalGrid::standard(3000).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn round_trip_any_dispersion(seed in 0u64..100_000, psnm in -3000.0f64..3000.0, log_n in 4u32..=13) {
        let grid = SignalGrid::standard(1 << log_n).unwrap();
        let x = noise(grid, seed);
        let d = DispersionOperator::for_grid(psnm, &grid);
        let y = apply_dispersion(&x, &d);
        prop_assert!(((y.energy() - x.energy()) / x.energy()).abs() < 1e-12);
        let back = apply_dispersion(&y, &d.inverse());
        prop_assert!(rel_l2(back.samples(), x.samples()) < 1e-9);
    }

    #[test]
    fn parseval(seed in 0u64..100_000, log_n in 1u32..=14) {
        let grid = SignalGrid::standard(1 << log_n).unwrap();
        let x = noise(grid, seed);
        let spec = to_frequency(&x);
        let e_f: f64 = spec.bins().iter().map(|v| v.norm_sqr()).sum::<f64>() / grid.n_samples as f64;
        prop_assert!(((e_f - x.energy()) / x.energy()).abs() < 1e-12);
        let back = from_frequency(&spec);
        prop_assert!(rel_l2(back.samples(), x.samples()) < 1e-12);
    }
}
