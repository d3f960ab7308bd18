use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ScenarioConfig;
use super::pipeline::{run_scenario, simulate, ScenarioOutcome};
use crate::error::{Error, Result};

/// One aggregated sweep point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub seed: u64,
    pub mean_ber: f64,
    pub ber_variance: f64,
    pub bit_errors: u64,
    pub bits_compared: u64,
    pub blocks_converged: usize,
    pub blocks_total: usize,
    pub mean_residual: f64,
    pub estimator_converged_at: Option<usize>,
}

impl SweepRow {
    fn from_outcome(value: f64, o: &ScenarioOutcome) -> Self {
        let (c, n) = o.blocks_converged();
        Self {
            value,
            seed: o.config.seed,
            mean_ber: o.ber.mean,
            ber_variance: o.ber.variance,
            bit_errors: o.ber.total_errors(),
            bits_compared: o.ber.total_bits(),
            blocks_converged: c,
            blocks_total: n,
            mean_residual: o.mean_residual(),
            estimator_converged_at: o.estimation.converged_at,
        }
    }
}

/// Per-point configurations: `axis` set to each value, seed `base + index`,
/// output in `point_<index>` under the base output directory.
pub fn sweep_configs(config: &ScenarioConfig, axis: &str, values: &[f64]) -> Result<Vec<ScenarioConfig>> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let mut c = config.with_numeric(axis, v)?.with_seed(config.seed + i as u64);
            c.output_dir = config.output_dir.join(format!("point_{i}"));
            Ok(c)
        })
        .collect()
}

/// Runs every point (at most `workers` at a time), writing each run's
/// artifacts when `write` is set.
pub fn sweep(
    config: &ScenarioConfig,
    axis: &str,
    values: &[f64],
    workers: usize,
    write: bool,
) -> Result<Vec<SweepRow>> {
    let configs = sweep_configs(config, axis, values)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    pool.install(|| {
        configs
            .par_iter()
            .zip(values.par_iter())
            .map(|(c, &v)| {
                let o = if write { run_scenario(c)?.outcome } else { simulate(c)? };
                Ok(SweepRow::from_outcome(v, &o))
            })
            .collect()
    })
}

pub fn write_sweep_csv<W: Write>(axis: &str, rows: &[SweepRow], mut w: W) -> Result<()> {
    writeln!(
        w,
        "{axis},seed,mean_ber,ber_variance,bit_errors,bits_compared,blocks_converged,blocks_total,mean_residual,estimator_converged_at"
    )?;
    for r in rows {
        writeln!(
            w,
            "{},{},{:e},{:e},{},{},{},{},{:e},{}",
            r.value,
            r.seed,
            r.mean_ber,
            r.ber_variance,
            r.bit_errors,
            r.bits_compared,
            r.blocks_converged,
            r.blocks_total,
            r.mean_residual,
            r.estimator_converged_at.map_or(String::new(), |i| i.to_string())
        )?;
    }
    Ok(())
}

/// Runs the sweep and writes `sweep.csv` into the base output directory.
pub fn sweep_to_dir(config: &ScenarioConfig, axis: &str, values: &[f64], workers: usize) -> Result<Vec<SweepRow>> {
    let rows = sweep(config, axis, values, workers, true)?;
    let dir: &Path = &config.output_dir;
    std::fs::create_dir_all(dir)?;
    let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("sweep.csv"))?);
    write_sweep_csv(axis, &rows, &mut f)?;
    f.flush()?;
    Ok(rows)
}
