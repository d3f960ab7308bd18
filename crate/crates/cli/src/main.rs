use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fieldrx::io::Dump;
use fieldrx::runner::{run_scenario, sweep_to_dir, Profile, ScenarioConfig, FULL_SCALE_PAYLOAD};
use fieldrx::Error;

#[derive(Parser)]
#[command(name = "fieldrx", version, about = "Direct-detection MDM receiver simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileArg {
    Btb,
    #[value(name = "span_30km")]
    Span30km,
}

impl From<ProfileArg> for Profile {
    fn from(p: ProfileArg) -> Self {
        match p {
            ProfileArg::Btb => Profile::Btb,
            ProfileArg::Span30km => Profile::Span30km,
        }
    }
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML); profile defaults when absent.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides the profile named in the config.
    #[arg(long, value_enum)]
    profile: Option<ProfileArg>,
    /// Master seed; every module seed is derived from it.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Full-scale payload (2^19 symbols).
    #[arg(long)]
    full_scale: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Runs one scenario and writes its artifacts.
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Runs a scenario for each value of one numeric parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Dotted parameter path, e.g. frame.pilot_percentage.
        #[arg(long)]
        axis: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long, value_name = "N", default_value_t = 1)]
        workers: usize,
    },
    /// Pretty-prints a binary dump.
    Inspect { path: PathBuf },
    /// Checks a config and prints the resolved scenario.
    Validate {
        #[command(flatten)]
        common: Common,
    },
}

fn resolve(c: &Common) -> Result<ScenarioConfig, Error> {
    let profile = c.profile.map(Profile::from);
    let mut cfg = match &c.config {
        Some(p) => ScenarioConfig::load(p, profile)?,
        None => ScenarioConfig::for_profile(profile.unwrap_or_default()),
    };
    let seed = c.seed.unwrap_or(cfg.seed);
    if c.seed.is_some() || c.config.is_none() {
        cfg = cfg.with_seed(seed);
    }
    if let Some(o) = &c.out {
        cfg.output_dir = o.clone();
    }
    if c.full_scale {
        cfg.frame.payload_length = FULL_SCALE_PAYLOAD;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cmd: Command) -> Result<(), Error> {
    match cmd {
        Command::Run { common } => {
            let cfg = resolve(&common)?;
            let b = run_scenario(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&b.outcome.ber)?);
            eprintln!("artifacts in {}", b.dir.display());
        }
        Command::Sweep {
            common,
            axis,
            values,
            workers,
        } => {
            let cfg = resolve(&common)?;
            let rows = sweep_to_dir(&cfg, &axis, &values, workers)?;
            for r in &rows {
                println!("{axis}={} mean_ber={:e} variance={:e}", r.value, r.mean_ber, r.ber_variance);
            }
            eprintln!("sweep.csv in {}", cfg.output_dir.display());
        }
        Command::Inspect { path } => {
            let f = std::fs::File::open(&path)?;
            print!("{}", Dump::read(std::io::BufReader::new(f))?.summary());
        }
        Command::Validate { common } => {
            let cfg = resolve(&common)?;
            println!("# config hash {}", cfg.hash()?);
            print!("{}", cfg.to_toml_string()?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let body = serde_json::json!({ "error": { "kind": e.kind(), "message": e.to_string() } });
            println!("{body}");
            ExitCode::from(2)
        }
    }
}
