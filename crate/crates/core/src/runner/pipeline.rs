use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ScenarioConfig;
use crate::chanest::{
    align_with_cd_search, common_lag, estimate_transfer_matrix, propagate_pilots, split_dispersion,
    DispersionSplit, Estimation, EstimatorOptions, PilotTable,
};
use crate::channel::{
    add_noise, apply_channel, impulse_response, mdl_of, synthesize_channel, write_tap_heatmap_csv, MdlMode,
    ModeGroup, TransferMatrix, K_MODES,
};
use crate::error::Result;
use crate::frontend::{capture_with, IntensityCapture};
use crate::io::Dump;
use crate::mimodsp::{compensate_cd, compute_ber, demap_qpsk, export_constellation, mimo_equalize, BerReport};
use crate::retrieval::{retrieve, RetrievalOptions, RetrievalResult};
use crate::sigcore::{seeded_rng, DispersionOperator, MdmWaveform};
use crate::txgen::{build_frame, shape_frame, MdmFrame};

/// Everything one scenario produced, in memory.
#[derive(Clone, Debug)]
pub struct ScenarioOutcome {
    pub config: ScenarioConfig,
    pub frame: MdmFrame,
    pub truth: TransferMatrix<f64>,
    pub capture: IntensityCapture<f64>,
    /// Receiver lag (samples, a whole number of symbols).
    pub lag: isize,
    pub estimation: Estimation<f64>,
    pub split: DispersionSplit<f64>,
    pub pilots: PilotTable,
    pub retrievals: Vec<RetrievalResult<f64>>,
    /// Equalised symbols indexed like the transmitted frame.
    pub symbols: Vec<Vec<Complex<f64>>>,
    pub ber: BerReport,
    pub timings: Vec<(String, f64)>,
}

impl ScenarioOutcome {
    /// Data symbols per tributary (pilots and training excluded).
    pub fn data_symbols(&self) -> Vec<Vec<Complex<f64>>> {
        let mask = self.frame.data_mask();
        self.symbols
            .iter()
            .map(|s| s.iter().zip(&mask).filter(|(_, &m)| m).map(|(v, _)| *v).collect())
            .collect()
    }

    pub fn blocks_converged(&self) -> (usize, usize) {
        let all = self.retrievals.iter().flat_map(|r| &r.blocks);
        let (c, n) = all.fold((0, 0), |(c, n), b| (c + usize::from(b.converged), n + 1));
        (c, n)
    }

    pub fn mean_residual(&self) -> f64 {
        let n = self.retrievals.len().max(1) as f64;
        self.retrievals.iter().map(|r| r.residual()).sum::<f64>() / n
    }
}

struct Stopwatch {
    at: Instant,
    laps: Vec<(String, f64)>,
}

impl Stopwatch {
    fn new() -> Self {
        Self {
            at: Instant::now(),
            laps: Vec::new(),
        }
    }

    fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        self.laps.push((stage.to_string(), (now - self.at).as_secs_f64()));
        self.at = now;
    }
}

/// Runs the whole chain without touching the disk.
pub fn simulate(config: &ScenarioConfig) -> Result<ScenarioOutcome> {
    config.validate()?;
    let mut sw = Stopwatch::new();
    let frame = build_frame(&config.frame, K_MODES)?;
    let grid = config.grid.grid(frame.total_symbols() * config.grid.samples_per_symbol)?;
    let sps = grid.samples_per_symbol;
    let tx = shape_frame::<f64>(&frame, &grid)?;
    sw.lap("transmit");

    let truth = synthesize_channel::<f64>(&config.channel, &grid)?;
    let rx = apply_channel(&tx, &truth)?;
    let rx = add_noise(&rx, config.channel.snr_db, config.channel.seed)?;
    sw.lap("channel");

    let d = DispersionOperator::for_grid(config.frontend.dispersion_psnm, &grid);
    let capture_seed = seeded_rng(config.seed, "runner/capture").gen::<u64>();
    let capture = capture_with(&rx, &d, &config.frontend.capture, capture_seed)?;
    sw.lap("capture");

    let (lags, _) = align_with_cd_search(&capture, &frame, &config.receiver.align_candidates())?;
    let raw_lag = common_lag(&lags);
    let lag_sym = (raw_lag as f64 / sps as f64).round() as isize;
    let lag = lag_sym * sps as isize;
    sw.lap("align");

    let est_opts = EstimatorOptions {
        lag,
        ..config.estimator.clone()
    };
    let estimation = estimate_transfer_matrix(&capture, &frame, &est_opts)?;
    sw.lap("estimate");

    let oracle = config.receiver.oracle_cd.then_some(config.channel.cd_psnm);
    let split = split_dispersion(&estimation.h, oracle)?;
    let pilots = propagate_pilots(&frame, &split, frame.spec.pilot_group_size)?;
    sw.lap("split");

    let total = frame.total_symbols() as isize;
    let n = grid.n_samples;
    let layout = frame.layout;
    let tail = (layout.total - layout.payload_end).min(config.receiver.tail_symbols);
    let region_start = (layout.ts_end as isize + lag_sym).rem_euclid(total) as usize * sps;
    let region_end = (layout.payload_end as isize + tail as isize + lag_sym).rem_euclid(total) as usize * sps;
    let retrievals = (0..K_MODES)
        .into_par_iter()
        .map(|i| {
            let opts = RetrievalOptions {
                pilots: pilots.tributaries[i]
                    .iter()
                    .map(|&(q, v)| ((q as isize + lag_sym).rem_euclid(total) as usize, v))
                    .collect(),
                pilot_cd_psnm: split.cd_psnm(),
                region: Some((region_start, region_end)),
                ..config.retrieval.clone()
            };
            retrieve(&capture, i, &opts)
        })
        .collect::<Result<Vec<_>>>()?;
    sw.lap("retrieve");

    let mut rows: Vec<Vec<Complex<f64>>> = retrievals.iter().map(|r| r.field.samples().to_vec()).collect();
    for (row, ts) in rows.iter_mut().zip(&estimation.ts_fields) {
        for (j, v) in ts.iter().enumerate() {
            row[(estimation.ts_window_start + j) % n] = *v;
        }
    }
    let fields = MdmWaveform::from_samples(grid, rows)?;
    let fields = compensate_cd(&fields, &split.h_cd)?;
    let eq = mimo_equalize(&fields, &split.h_md, &config.equalizer)?;
    let symbols: Vec<Vec<Complex<f64>>> = eq
        .iter()
        .map(|s| (0..total).map(|t| s[(t + lag_sym).rem_euclid(total) as usize]).collect())
        .collect();
    sw.lap("equalize");

    let rx_bits: Vec<Vec<u8>> = symbols.iter().map(|s| demap_qpsk(s)).collect();
    let tx_bits: Vec<Vec<u8>> = frame.tributaries.iter().map(|s| demap_qpsk(s)).collect();
    let ber = compute_ber(&rx_bits, &tx_bits, &frame.data_mask(), frame.spec.pilot_percentage)?;
    sw.lap("metrics");

    Ok(ScenarioOutcome {
        config: config.clone(),
        frame,
        truth,
        capture,
        lag,
        estimation,
        split,
        pilots,
        retrievals,
        symbols,
        ber,
        timings: sw.laps,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub seed: u64,
    pub profile: String,
    pub pilot_group_size: usize,
    pub cd_psnm: f64,
    pub estimated_cd_psnm: f64,
    pub mdl_true_db: f64,
    pub mdl_estimated_db: f64,
    pub mean_ber: f64,
    pub blocks_converged: usize,
    pub blocks_total: usize,
    /// Wall-clock seconds per stage, in pipeline order.
    pub timings: Vec<(String, f64)>,
    pub artifacts: Vec<String>,
    pub version: String,
}

/// Run directory plus what was written into it.
#[derive(Clone, Debug)]
pub struct ReportBundle {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub outcome: ScenarioOutcome,
}

fn create<P: AsRef<Path>>(path: P) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Runs a scenario and writes its artifacts into `config.output_dir`.
pub fn run_scenario(config: &ScenarioConfig) -> Result<ReportBundle> {
    let outcome = simulate(config)?;
    let dir = config.output_dir.clone();
    let manifest = write_artifacts(&outcome, &dir)?;
    Ok(ReportBundle { dir, manifest, outcome })
}

fn write_artifacts(o: &ScenarioOutcome, dir: &Path) -> Result<Manifest> {
    fs::create_dir_all(dir)?;
    let mut names = Vec::new();
    let mut file = |name: String| -> Result<BufWriter<File>> {
        let w = create(dir.join(&name))?;
        names.push(name);
        Ok(w)
    };

    file("config.toml".into())?.write_all(o.config.to_toml_string()?.as_bytes())?;
    Dump::from_matrix(&o.truth).write(file("channel_true.bin".into())?)?;
    Dump::from_matrix(&o.estimation.h).write(file("channel_estimate.bin".into())?)?;
    Dump::from_matrix(&o.split.h_md).write(file("channel_modal.bin".into())?)?;

    let mut w = file("mdl_history.csv".into())?;
    writeln!(w, "iteration,mdl_db,fit_residual")?;
    for (it, m) in o.estimation.mdl_history.iter().enumerate() {
        let r = it
            .checked_sub(1)
            .and_then(|i| o.estimation.fit_residuals.get(i))
            .map_or(String::new(), |r| format!("{r:e}"));
        writeln!(w, "{it},{m},{r}")?;
    }
    w.flush()?;

    let pairs = [
        (ModeGroup::Lp01, ModeGroup::Lp01),
        (ModeGroup::Lp11, ModeGroup::Lp11),
        (ModeGroup::Lp01, ModeGroup::Lp11),
        (ModeGroup::Lp11, ModeGroup::Lp01),
    ];
    let before_cd = o.split.recompose();
    for (stage, h) in [("pre_cd", &before_cd), ("post_cd", &o.split.h_md)] {
        for (from, to) in pairs {
            let name = format!("impulse_{stage}_{}_{}.csv", from.name(), to.name());
            impulse_response(h, from, to).write_csv(file(name)?)?;
        }
    }
    write_tap_heatmap_csv(&o.split.h_md, file("tap_heatmap.csv".into())?)?;

    for (i, r) in o.retrievals.iter().enumerate() {
        r.write_residual_csv(file(format!("residual_{i}.csv"))?)?;
    }
    export_constellation(&o.data_symbols(), file("constellation.csv".into())?)?;
    file("ber.json".into())?.write_all(o.ber.to_json()?.as_bytes())?;

    let (conv, total) = o.blocks_converged();
    let manifest = Manifest {
        config_hash: o.config.hash()?,
        seed: o.config.seed,
        profile: o.config.profile.name().to_string(),
        pilot_group_size: o.config.frame.pilot_group_size,
        cd_psnm: o.config.channel.cd_psnm,
        estimated_cd_psnm: o.split.cd_psnm(),
        mdl_true_db: mdl_of(&o.truth, MdlMode::FrequencyAveraged),
        mdl_estimated_db: mdl_of(&o.estimation.h, MdlMode::FrequencyAveraged),
        mean_ber: o.ber.mean,
        blocks_converged: conv,
        blocks_total: total,
        timings: o.timings.clone(),
        artifacts: {
            names.push("manifest.json".into());
            names.clone()
        },
        version: env!("CARGO_PKG_VERSION").to_string(),
    };
    let mut w = create(dir.join("manifest.json"))?;
    serde_json::to_writer_pretty(&mut w, &manifest)?;
    w.flush()?;
    Ok(manifest)
}

/// Files whose bytes depend only on config and seed.
pub fn numeric_artifacts(m: &Manifest) -> Vec<&str> {
    m.artifacts
        .iter()
        .map(String::as_str)
        .filter(|a| *a != "manifest.json" && *a != "config.toml")
        .collect()
}
