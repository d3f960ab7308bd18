use fieldrx::channel::{
    add_noise, apply_channel, impulse_response, mdl_of, mdl_of_matrix, measured_snr_db, synthesize_channel,
    ChannelParams, MatrixLabel, MdlMode, ModeGroup, TransferMatrix,
};
use fieldrx::linalg::{haar_unitary, CMat};
use fieldrx::sigcore::{seeded_rng, ComplexWaveform, MdmWaveform, SignalGrid};
use num_complex::Complex;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

type C = Complex<f64>;

fn random_samples(n: usize, seed: u64, label: &str) -> Vec<C> {
    let mut rng = seeded_rng(seed, label);
    (0..n)
        .map(|_| C::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect()
}

fn random_fields(grid: SignalGrid, k: usize, seed: u64) -> MdmWaveform<f64> {
    let rows = (0..k).map(|i| random_samples(grid.n_samples, seed, &format!("x{i}"))).collect();
    MdmWaveform::from_samples(grid, rows).unwrap()
}

fn random_matrix(k: usize, l: usize, origin: usize, grid: SignalGrid, seed: u64) -> TransferMatrix<f64> {
    let taps = (0..k * k).map(|e| random_samples(l, seed, &format!("h{e}"))).collect();
    TransferMatrix::new(k, taps, origin, grid, MatrixLabel::TrueChannel).unwrap()
}

/// Direct time-domain circular convolution.
fn convolve_oracle(x: &MdmWaveform<f64>, h: &TransferMatrix<f64>) -> Vec<Vec<C>> {
    let n = x.grid().n_samples;
    let k = h.k();
    let o = h.origin() as isize;
    (0..k)
        .map(|i| {
            (0..n)
                .map(|t| {
                    let mut acc = C::new(0.0, 0.0);
                    for j in 0..k {
                        let xs = x.tributary(j).samples();
                        for (l, v) in h.taps(i, j).iter().enumerate() {
                            let src = (t as isize - (l as isize - o)).rem_euclid(n as isize) as usize;
                            acc += v * xs[src];
                        }
                    }
                    acc
                })
                .collect()
        })
        .collect()
}

fn max_rel_err(a: &MdmWaveform<f64>, b: &[Vec<C>]) -> f64 {
    let mut worst = 0.0f64;
    for (t, r) in a.tributaries().iter().zip(b) {
        let num: f64 = t.samples().iter().zip(r).map(|(p, q)| (p - q).norm_sqr()).sum();
        let den: f64 = r.iter().map(|q| q.norm_sqr()).sum();
        worst = worst.max((num / den).sqrt());
    }
    worst
}

#[test]
fn ideal_params_give_identity_taps() {
    let grid = SignalGrid::standard(1024).unwrap();
    let h = synthesize_channel::<f64>(&ChannelParams::ideal(), &grid).unwrap();
    let x = random_fields(grid, 6, 3);
    let y = apply_channel(&x, &h).unwrap();
    for (a, b) in x.tributaries().iter().zip(y.tributaries()) {
        for (p, q) in a.samples().iter().zip(b.samples()) {
            assert!((p - q).norm() < 1e-9);
        }
    }
    assert!(mdl_of(&h, MdlMode::FrequencyAveraged) < 1e-9);
}

#[test]
fn identity_channel_is_transparent() {
    let grid = SignalGrid::standard(256).unwrap();
    let x = random_fields(grid, 6, 1);
    let y = apply_channel(&x, &TransferMatrix::identity(6, grid)).unwrap();
    assert!(max_rel_err(&y, &x.tributaries().iter().map(|t| t.samples().to_vec()).collect::<Vec<_>>()) < 1e-12);
}

#[test]
fn diagonal_delay_shifts_each_tributary() {
    let grid = SignalGrid::standard(256).unwrap();
    let k = 3;
    let l = 9;
    let delays = [0usize, 2, 5];
    let taps = (0..k * k)
        .map(|e| {
            let mut t = vec![C::new(0.0, 0.0); l];
            if e / k == e % k {
                t[delays[e / k]] = C::new(1.0, 0.0);
            }
            t
        })
        .collect();
    let h = TransferMatrix::new(k, taps, 0, grid, MatrixLabel::TrueChannel).unwrap();
    let x = random_fields(grid, k, 5);
    let y = apply_channel(&x, &h).unwrap();
    for i in 0..k {
        let xs = x.tributary(i).samples();
        for (t, v) in y.tributary(i).samples().iter().enumerate() {
            assert!((v - xs[(t + 256 - delays[i]) % 256]).norm() < 1e-9);
        }
    }
}

#[test]
fn apply_channel_matches_convolution_oracle() {
    for (n, l, seed) in [(256, 16, 1u64), (512, 33, 2), (1024, 64, 3), (64, 64, 4), (128, 1, 5)] {
        let grid = SignalGrid::standard(n).unwrap();
        let x = random_fields(grid, 6, seed);
        let h = random_matrix(6, l, l / 2, grid, seed);
        let y = apply_channel(&x, &h).unwrap();
        let err = max_rel_err(&y, &convolve_oracle(&x, &h));
        assert!(err < 1e-9, "N={n} L={l}: {err:e}");
    }
}

#[test]
fn apply_then_invert_recovers_input() {
    let grid = SignalGrid::standard(512).unwrap();
    let mut rng = seeded_rng(9, "u");
    let u: CMat<f64> = haar_unitary(6, &mut rng);
    let h = TransferMatrix::from_single_tap(&u, grid, MatrixLabel::TrueChannel);
    let hi = TransferMatrix::from_single_tap(&u.adjoint(), grid, MatrixLabel::TrueChannel);
    let x = random_fields(grid, 6, 2);
    let back = apply_channel(&apply_channel(&x, &h).unwrap(), &hi).unwrap();
    let orig: Vec<Vec<C>> = x.tributaries().iter().map(|t| t.samples().to_vec()).collect();
    assert!(max_rel_err(&back, &orig) < 1e-6);
}

#[test]
fn unitary_sections_without_mdl_are_lossless() {
    let grid = SignalGrid::standard(4096).unwrap();
    for seed in 1..=5 {
        let p = ChannelParams {
            mdl_db: 0.0,
            n_sections: 2,
            section_group_delays: vec![1.0 / 30e9, -1.0 / 30e9],
            dgd_compensated: true,
            seed,
            ..ChannelParams::default()
        };
        let h = synthesize_channel::<f64>(&p, &grid).unwrap();
        assert!(mdl_of(&h, MdlMode::FrequencyAveraged) < 0.05);
    }
}

#[test]
fn synthesized_mdl_tracks_target() {
    let grid = SignalGrid::standard(4096).unwrap();
    let ts = 1.0 / 30e9;
    for seed in 1..=100 {
        let target = 0.5 + (seed % 4) as f64 * 0.5;
        let p = ChannelParams {
            mdl_db: target,
            n_sections: 2,
            section_group_delays: vec![2.0 * ts, -2.0 * ts],
            dgd_compensated: true,
            seed,
            ..ChannelParams::default()
        };
        let h = synthesize_channel::<f64>(&p, &grid).unwrap();
        let m = mdl_of(&h, MdlMode::FrequencyAveraged);
        assert!((m - target).abs() < 0.2, "seed {seed}: {m} vs {target}");
    }
}

#[test]
fn opposite_section_delays_cancel() {
    let grid = SignalGrid::standard(4096).unwrap();
    let ts = 1.0 / 30e9;
    let p = ChannelParams {
        n_sections: 2,
        section_group_delays: vec![2.0 * ts, -2.0 * ts],
        dgd_compensated: true,
        intra_group_coupling: 0.0,
        inter_group_coupling_db: f64::NEG_INFINITY,
        mdl_db: 0.0,
        ..ChannelParams::default()
    };
    let h = synthesize_channel::<f64>(&p, &grid).unwrap();
    let d01 = impulse_response(&h, ModeGroup::Lp01, ModeGroup::Lp01).peak_delay_ts();
    let d11 = impulse_response(&h, ModeGroup::Lp11, ModeGroup::Lp11).peak_delay_ts();
    assert!((d11 - d01).abs() < 0.1, "{d01} vs {d11}");
}

#[test]
fn mdl_of_diagonal_matrix() {
    let m = CMat::<f64>::from_diag(&[2.0, 1.0, 1.0, 1.0, 1.0, 1.0]);
    assert!((mdl_of_matrix(&m) - 20.0 * 2f64.log10()).abs() < 1e-9);
    let grid = SignalGrid::standard(256).unwrap();
    let h = TransferMatrix::from_single_tap(&m, grid, MatrixLabel::TrueChannel);
    assert!((mdl_of(&h, MdlMode::FrequencyAveraged) - 6.0206).abs() < 1e-3);
    assert!((mdl_of(&h, MdlMode::WorstCase) - 6.0206).abs() < 1e-3);
}

#[test]
fn unitary_has_zero_mdl() {
    let mut rng = seeded_rng(4, "u");
    let u: CMat<f64> = haar_unitary(6, &mut rng);
    assert!(mdl_of_matrix(&u) < 1e-9);
}

#[test]
fn impulse_profiles() {
    let grid = SignalGrid::standard(256).unwrap();
    let id = TransferMatrix::<f64>::identity(6, grid);
    let p = impulse_response(&id, ModeGroup::All, ModeGroup::All);
    assert_eq!(p.power.len(), 1);
    assert_eq!(p.peak_delay_ts(), 0.0);
    assert!((p.total_energy() - 6.0).abs() < 1e-12);

    let l = 11;
    let taps = (0..36)
        .map(|e| {
            let (i, j) = (e / 6, e % 6);
            let mut t = vec![C::new(0.0, 0.0); l];
            if i == j {
                t[if i >= 2 { 5 + 4 } else { 5 }] = C::new(1.0, 0.0);
            }
            t
        })
        .collect();
    let h = TransferMatrix::new(6, taps, 5, grid, MatrixLabel::TrueChannel).unwrap();
    let lp11 = impulse_response(&h, ModeGroup::Lp11, ModeGroup::Lp11);
    assert_eq!(lp11.peak_delay_ts(), 2.0);
    let all = impulse_response(&h, ModeGroup::All, ModeGroup::All);
    assert!((all.total_energy() - h.tap_energy()).abs() < 1e-12);
}

#[test]
fn noise_power_matches_snr() {
    let grid = SignalGrid::standard(1 << 20).unwrap();
    let s: Vec<C> = (0..grid.n_samples)
        .map(|n| C::from_polar(1.0, n as f64 * 0.37))
        .collect();
    let x = MdmWaveform::new(vec![ComplexWaveform::new(grid, s).unwrap()]).unwrap();
    let y = add_noise(&x, Some(10.0), 8).unwrap();
    let p: f64 = x
        .tributary(0)
        .samples()
        .iter()
        .zip(y.tributary(0).samples())
        .map(|(a, b)| (b - a).norm_sqr())
        .sum::<f64>()
        / grid.n_samples as f64;
    assert!((p - 0.1).abs() < 0.005, "{p}");
    assert!((measured_snr_db(x.tributary(0), y.tributary(0)) - 10.0).abs() < 0.1);
    let again = add_noise(&x, Some(10.0), 8).unwrap();
    assert_eq!(y, again);
    assert_eq!(add_noise(&x, Some(f64::INFINITY), 8).unwrap(), x);
    assert_eq!(add_noise(&x, None, 8).unwrap(), x);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mdl_is_unitarily_invariant(seed in 0u64..10_000) {
        let mut rng = seeded_rng(seed, "m");
        let m = CMat::<f64>::from_fn(6, 6, |_, _| C::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
        let u1: CMat<f64> = haar_unitary(6, &mut rng);
        let u2: CMat<f64> = haar_unitary(6, &mut rng);
        let rotated = &(&u1 * &m) * &u2;
        prop_assert!((mdl_of_matrix(&m) - mdl_of_matrix(&rotated)).abs() < 1e-6);
    }

    #[test]
    fn convolution_oracle_holds(seed in 0u64..10_000, l in 1usize..=64, log_n in 6u32..=10) {
        let n = 1usize << log_n;
        prop_assume!(l <= n);
        let grid = SignalGrid::standard(n).unwrap();
        let x = random_fields(grid, 2, seed);
        let h = random_matrix(2, l, seed as usize % l, grid, seed);
        let y = apply_channel(&x, &h).unwrap();
        prop_assert!(max_rel_err(&y, &convolve_oracle(&x, &h)) < 1e-9);
    }
}
