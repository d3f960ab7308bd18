use fieldrx::chanest::{
    align_with_cd_search, common_lag, estimate_transfer_matrix, ls_channel_fit, propagate_pilots, split_dispersion,
    time_align, training_intensity, EstimatorOptions, Estimation,
};
use fieldrx::channel::{apply_channel, mdl_of, synthesize_channel, MatrixLabel, MdlMode, TransferMatrix};
use fieldrx::frontend::capture;
use fieldrx::runner::{Profile, ScenarioConfig};
use fieldrx::sigcore::{seeded_rng, DispersionOperator, MdmWaveform, SignalGrid};
use fieldrx::chanest::InitialMatrix;
use fieldrx::linalg::{haar_unitary, CMat};
use fieldrx::txgen::{build_frame, matched_filter, shape_frame, FrameSpec, MdmFrame};
use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;

type C = Complex<f64>;

struct Case {
    frame: MdmFrame,
    grid: SignalGrid,
    tx: MdmWaveform<f64>,
    truth: TransferMatrix<f64>,
    est: Estimation<f64>,
    lag: isize,
}

fn run_case(profile: Profile, seed: u64) -> Case {
    let mut c = ScenarioConfig::for_profile(profile).with_seed(seed);
    c.frame.payload_length = 1024;
    let frame = build_frame(&c.frame, 6).unwrap();
    let grid = c.grid.grid(frame.total_symbols() * 2).unwrap();
    let tx = shape_frame::<f64>(&frame, &grid).unwrap();
    let truth = synthesize_channel::<f64>(&c.channel, &grid).unwrap();
    let rx = apply_channel(&tx, &truth).unwrap();
    let cap = capture(&rx, &DispersionOperator::for_grid(650.0, &grid), None, 1).unwrap();
    let (lags, _) = align_with_cd_search(&cap, &frame, &c.receiver.align_candidates()).unwrap();
    let lag = (common_lag(&lags) as f64 / 2.0).round() as isize * 2;
    let opts = EstimatorOptions {
        lag,
        ..c.estimator.clone()
    };
    let est = estimate_transfer_matrix(&cap, &frame, &opts).unwrap();
    Case {
        frame,
        grid,
        tx,
        truth,
        est,
        lag,
    }
}

/// Worst relative error between the true and estimated outputs over the
/// payload, after removing the receiver lag and one phase per output.
fn prediction_error(c: &Case) -> f64 {
    let n = c.grid.n_samples as isize;
    let y = apply_channel(&c.tx, &c.truth).unwrap();
    let h = c.est.h.clone();
    let h = TransferMatrix::new(h.k(), h.all_taps().to_vec(), h.origin(), c.grid, MatrixLabel::FinalEstimate).unwrap();
    let z = apply_channel(&c.tx, &h).unwrap();
    let l = c.frame.layout;
    let range = l.payload_start * 2..l.payload_end * 2;
    let mut worst = 0.0f64;
    for i in 0..6 {
        let a = y.tributary(i).samples();
        let b = z.tributary(i).samples();
        let pairs: Vec<(C, C)> = range
            .clone()
            .map(|t| (a[(t as isize + c.lag).rem_euclid(n) as usize], b[t]))
            .collect();
        let dot: C = pairs.iter().map(|(p, q)| q.conj() * p).sum();
        let rot = dot / dot.norm();
        let num: f64 = pairs.iter().map(|(p, q)| (p - q * rot).norm_sqr()).sum();
        let den: f64 = pairs.iter().map(|(p, _)| p.norm_sqr()).sum();
        worst = worst.max((num / den).sqrt());
    }
    worst
}

fn white(grid: SignalGrid, k: usize, seed: u64) -> MdmWaveform<f64> {
    let mut rng = seeded_rng(seed, "white");
    let rows = (0..k)
        .map(|_| {
            (0..grid.n_samples)
                .map(|_| C::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
                .collect()
        })
        .collect();
    MdmWaveform::from_samples(grid, rows).unwrap()
}

fn response_error(a: &TransferMatrix<f64>, b: &TransferMatrix<f64>, n: usize) -> f64 {
    let ra = a.frequency_response(n).unwrap();
    let rb = b.frequency_response(n).unwrap();
    let num: f64 = ra.iter().zip(&rb).map(|(x, y)| x.add(&y.scale(C::new(-1.0, 0.0))).frobenius().powi(2)).sum();
    let den: f64 = rb.iter().map(|y| y.frobenius().powi(2)).sum();
    (num / den).sqrt()
}

#[test]
fn ls_fit_recovers_identity() {
    let grid = SignalGrid::standard(1024).unwrap();
    let tx = white(grid, 6, 1);
    let h = ls_channel_fit(&tx, &tx, 8, 0.0).unwrap();
    assert!(response_error(&h, &TransferMatrix::identity(6, grid), 64) < 1e-9);
}

#[test]
fn ls_fit_recovers_random_channel() {
    let grid = SignalGrid::standard(1024).unwrap();
    for seed in 1..=3 {
        let mut rng = seeded_rng(seed, "taps");
        let taps = (0..36)
            .map(|_| (0..8).map(|_| C::new(rng.sample(StandardNormal), rng.sample(StandardNormal))).collect())
            .collect();
        let truth = TransferMatrix::new(6, taps, 4, grid, MatrixLabel::TrueChannel).unwrap();
        let tx = white(grid, 6, seed + 10);
        let rx = apply_channel(&tx, &truth).unwrap();
        let est = ls_channel_fit(&rx, &tx, 8, 0.0).unwrap();
        assert!(response_error(&est, &truth, 64) < 1e-8);
    }
}

#[test]
fn ls_fit_needs_enough_symbols() {
    let grid = SignalGrid::standard(64).unwrap();
    let tx = white(grid, 6, 1);
    assert!(matches!(
        ls_channel_fit(&tx, &tx, 8, 0.0),
        Err(fieldrx::Error::Identifiability(_))
    ));
}

fn small_frame(seed: u64) -> (MdmFrame, SignalGrid, MdmWaveform<f64>) {
    let spec = FrameSpec {
        ts_length: 512,
        payload_length: 1024,
        seed,
        ..FrameSpec::default()
    };
    let frame = build_frame(&spec, 6).unwrap();
    let grid = SignalGrid::standard(frame.total_symbols() * 2).unwrap();
    let tx = shape_frame::<f64>(&frame, &grid).unwrap();
    (frame, grid, tx)
}

fn delayed(x: &MdmWaveform<f64>, by: usize, gain: f64) -> MdmWaveform<f64> {
    let rows = x
        .tributaries()
        .iter()
        .map(|t| {
            let mut s: Vec<C> = t.samples().iter().map(|v| v * gain).collect();
            s.rotate_right(by);
            s
        })
        .collect();
    MdmWaveform::from_samples(*x.grid(), rows).unwrap()
}

#[test]
fn alignment_finds_inserted_delay() {
    let (frame, grid, tx) = small_frame(2);
    let d = DispersionOperator::for_grid(650.0, &grid);
    let reference = training_intensity::<f64>(&frame, &grid).unwrap();
    let at = |by: usize, gain: f64| {
        let cap = capture(&delayed(&tx, by, gain), &d, None, 1).unwrap();
        time_align(&cap, &reference).unwrap()
    };
    assert!(at(0, 1.0).iter().all(|&l| l == 0));
    assert!(at(37, 1.0).iter().all(|&l| l == 37));
    assert_eq!(at(37, 1.0), at(37, 0.01));
}

#[test]
fn unitary_start_has_zero_mdl() {
    let c = run_case(Profile::Btb, 4);
    assert!(c.est.mdl_history[0].abs() < 1e-9);
    assert_eq!(c.est.mdl_history.len(), 16);
}

#[test]
fn identity_channel_estimated_in_one_iteration() {
    let (frame, grid, tx) = small_frame(3);
    let cap = capture(&tx, &DispersionOperator::for_grid(650.0, &grid), None, 1).unwrap();
    let opts = EstimatorOptions {
        initial_matrix: InitialMatrix::Identity,
        n_outer_iterations: 1,
        ls_regularization: 1e-9,
        ..EstimatorOptions::default()
    };
    let est = estimate_transfer_matrix(&cap, &frame, &opts).unwrap();
    assert!(est.fit_residuals[0] < 1e-8, "{:?}", est.fit_residuals);
    let h = est.h.clone();
    let wide = TransferMatrix::new(6, h.all_taps().to_vec(), h.origin(), grid, MatrixLabel::FinalEstimate).unwrap();
    let id = TransferMatrix::identity(6, grid);
    let n = 4 * wide.tap_len();
    let mask = fieldrx::sigcore::in_band_mask(n, grid.sample_rate(), grid.symbol_rate, grid.rolloff);
    let ra = wide.frequency_response(n).unwrap();
    let rb = id.frequency_response(n).unwrap();
    let mut num = 0.0;
    let mut den = 0.0;
    for ((a, b), _) in ra.iter().zip(&rb).zip(&mask).filter(|(_, &m)| m) {
        num += a.add(&b.scale(C::new(-1.0, 0.0))).frobenius().powi(2);
        den += b.frobenius().powi(2);
    }
    assert!((num / den).sqrt() < 1e-3, "{}", (num / den).sqrt());
}

#[test]
fn span_channel_estimate_is_consistent() {
    for seed in 1..=3 {
        let c = run_case(Profile::Span30km, seed);
        let m_est = mdl_of(&c.est.h, MdlMode::FrequencyAveraged);
        let m_true = mdl_of(&c.truth, MdlMode::FrequencyAveraged);
        assert!((m_true - 2.0).abs() < 0.2);
        assert!((m_est - m_true).abs() < 0.3, "seed {seed}: {m_est} vs {m_true}");
        assert!(c.est.converged_at.is_some_and(|i| i <= 15));
        let e = prediction_error(&c);
        assert!(e < 5e-2, "seed {seed}: {e}");
    }
}

#[test]
fn fit_residual_does_not_grow() {
    let mut good = 0;
    let runs = 10;
    for seed in 1..=runs {
        let c = run_case(Profile::Btb, seed);
        let floor = 1e-6;
        let ok = c.est.fit_residuals.windows(2).all(|w| w[1] <= w[0] || w[1] < floor);
        good += u64::from(ok);
    }
    assert!(good * 100 >= 95 * runs, "{good}/{runs}");
}

#[test]
fn split_finds_pure_dispersion() {
    let grid = SignalGrid::standard(1 << 12).unwrap();
    let h = TransferMatrix::<f64>::identity(6, grid).with_common_cd(510.0).materialize(256).unwrap();
    let s = split_dispersion(&h, None).unwrap();
    assert!((s.cd_psnm() - 510.0).abs() < 5.1, "{}", s.cd_psnm());
    let n = 4 * s.h_md.tap_len();
    let mask = fieldrx::sigcore::in_band_mask(n, grid.sample_rate(), grid.symbol_rate, grid.rolloff);
    let resp = s.h_md.frequency_response(n).unwrap();
    for (r, _) in resp.iter().zip(&mask).filter(|(_, &m)| m) {
        let dev = r.add(&CMat::identity(6).scale(C::new(-1.0, 0.0))).frobenius();
        assert!(dev < 0.1, "{dev}");
    }
}

#[test]
fn split_of_dispersion_free_channel() {
    let grid = SignalGrid::standard(1 << 12).unwrap();
    let mut rng = seeded_rng(5, "u");
    let u: CMat<f64> = haar_unitary(6, &mut rng);
    let h = TransferMatrix::centred(&u, 64, grid, MatrixLabel::TrueChannel);
    let s = split_dispersion(&h, None).unwrap();
    assert!(s.cd_psnm().abs() < 1.0, "{}", s.cd_psnm());
}

#[test]
fn split_recomposes_exactly() {
    let grid = SignalGrid::standard(1 << 12).unwrap();
    let mut c = ScenarioConfig::for_profile(Profile::Span30km).with_seed(3).channel;
    c.seed = 3;
    let h = synthesize_channel::<f64>(&c, &grid).unwrap().materialize(512).unwrap();
    let s = split_dispersion(&h, None).unwrap();
    let n = fieldrx::chanest::split_grid_len(h.tap_len());
    assert!(response_error(&s.recompose(), &h, n) < 1e-10);
    let oracle = split_dispersion(&h, Some(510.0)).unwrap();
    assert_eq!(oracle.cd_psnm(), 510.0);
    assert!(response_error(&oracle.recompose(), &h, n) < 1e-10);
}

fn identity_split(grid: SignalGrid) -> fieldrx::DispersionSplit<f64> {
    split_dispersion(&TransferMatrix::identity(6, grid), Some(0.0)).unwrap()
}

#[test]
fn pilots_through_identity() {
    let (frame, grid, _) = small_frame(4);
    let table = propagate_pilots(&frame, &identity_split(grid), 1).unwrap();
    assert_eq!(table.shift_symbols, 0);
    for i in 0..6 {
        let want = frame.pilot_symbols(i);
        assert_eq!(table.tributaries[i].len(), want.len());
        for (a, b) in table.tributaries[i].iter().zip(&want) {
            assert_eq!(a.0, b.0);
            assert!((a.1 - b.1).norm() < 1e-9);
        }
    }
    assert!(propagate_pilots(&frame, &identity_split(grid), 3).is_err());
}

#[test]
fn pilots_follow_a_one_symbol_delay() {
    let (frame, grid, _) = small_frame(5);
    let taps = (0..36)
        .map(|e| {
            let mut t = vec![C::new(0.0, 0.0); 8];
            if e / 6 == e % 6 {
                t[4 + 2] = C::new(1.0, 0.0);
            }
            t
        })
        .collect();
    let h = TransferMatrix::new(6, taps, 4, grid, MatrixLabel::Modal).unwrap();
    let split = split_dispersion(&h, Some(0.0)).unwrap();
    let table = propagate_pilots(&frame, &split, 1).unwrap();
    assert_eq!(table.shift_symbols, 1);
    for i in 0..6 {
        for (a, b) in table.tributaries[i].iter().zip(frame.pilot_symbols(i)) {
            assert_eq!(a.0, b.0 + 1);
            assert!((a.1 - b.1).norm() < 1e-9);
        }
    }
}

#[test]
fn grouped_pilots_match_full_propagation() {
    let mut cfg = ScenarioConfig::for_profile(Profile::Span30km).with_seed(6);
    cfg.frame.payload_length = 2048;
    cfg.channel.cd_psnm = 0.0;
    let frame = build_frame(&cfg.frame, 6).unwrap();
    let grid = cfg.grid.grid(frame.total_symbols() * 2).unwrap();
    let h = synthesize_channel::<f64>(&cfg.channel, &grid).unwrap();
    let split = split_dispersion(&h, Some(0.0)).unwrap();
    let table = propagate_pilots(&frame, &split, 3).unwrap();
    let rx = apply_channel(&shape_frame::<f64>(&frame, &grid).unwrap(), &split.h_md).unwrap();
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..6 {
        let y = matched_filter(rx.tributary(i), 0);
        for &(q, v) in &table.tributaries[i] {
            num += (v - y[q]).norm_sqr();
            den += y[q].norm_sqr();
        }
    }
    let rel = (num / den).sqrt();
    assert!(rel < 5e-2, "{rel}");
}
