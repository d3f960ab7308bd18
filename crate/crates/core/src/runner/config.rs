use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::chanest::EstimatorOptions;
use crate::channel::ChannelParams;
use crate::error::{Error, Result};
use crate::frontend::CaptureOptions;
use crate::mimodsp::EqualizerConfig;
use crate::retrieval::RetrievalOptions;
use crate::sigcore::{seeded_rng, SignalGrid};
use crate::txgen::FrameSpec;

/// Payload of the full-scale option, in symbols.
pub const FULL_SCALE_PAYLOAD: usize = 1 << 19;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    #[default]
    Btb,
    #[serde(rename = "span_30km")]
    Span30km,
    Custom,
}

impl Profile {
    pub fn name(self) -> &'static str {
        match self {
            Profile::Btb => "btb",
            Profile::Span30km => "span_30km",
            Profile::Custom => "custom",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "btb" => Ok(Profile::Btb),
            "span_30km" => Ok(Profile::Span30km),
            "custom" => Ok(Profile::Custom),
            _ => Err(Error::Config(format!("unknown profile `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub symbol_rate: f64,
    pub samples_per_symbol: usize,
    pub center_wavelength: f64,
    pub rolloff: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            symbol_rate: 30e9,
            samples_per_symbol: 2,
            center_wavelength: 1555e-9,
            rolloff: 0.1,
        }
    }
}

impl GridConfig {
    pub fn grid(&self, n_samples: usize) -> Result<SignalGrid> {
        SignalGrid::new(
            self.symbol_rate,
            self.samples_per_symbol,
            self.center_wavelength,
            n_samples,
            self.rolloff,
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrontendConfig {
    /// Magnitude of the dispersive element, ps/nm.
    pub dispersion_psnm: f64,
    pub capture: CaptureOptions,
}

impl Default for FrontendConfig {
    fn default() -> Self {
        Self {
            dispersion_psnm: 650.0,
            capture: CaptureOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReceiverConfig {
    /// Use the synthesised span dispersion instead of fitting it.
    pub oracle_cd: bool,
    /// Frame-tail symbols retrieved after the payload.
    pub tail_symbols: usize,
    /// Span dispersion hypotheses tried during alignment: `±range` in `step` increments, ps/nm.
    pub align_cd_range_psnm: f64,
    pub align_cd_step_psnm: f64,
}

impl ReceiverConfig {
    pub fn align_candidates(&self) -> Vec<f64> {
        if self.align_cd_step_psnm <= 0.0 || self.align_cd_range_psnm <= 0.0 {
            return vec![0.0];
        }
        let m = (self.align_cd_range_psnm / self.align_cd_step_psnm).floor() as i64;
        (-m..=m).map(|i| i as f64 * self.align_cd_step_psnm).collect()
    }
}

impl Default for ReceiverConfig {
    fn default() -> Self {
        Self {
            oracle_cd: false,
            tail_symbols: 256,
            align_cd_range_psnm: 1000.0,
            align_cd_step_psnm: 100.0,
        }
    }
}

/// Complete description of one experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub profile: Profile,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub grid: GridConfig,
    pub frame: FrameSpec,
    pub channel: ChannelParams,
    pub frontend: FrontendConfig,
    pub retrieval: RetrievalOptions,
    pub estimator: EstimatorOptions,
    pub equalizer: EqualizerConfig,
    pub receiver: ReceiverConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self::for_profile(Profile::Btb)
    }
}

impl ScenarioConfig {
    /// Defaults of a profile, pins applied.
    pub fn for_profile(profile: Profile) -> Self {
        let mut c = Self {
            profile,
            seed: 1,
            output_dir: PathBuf::from("out"),
            grid: GridConfig::default(),
            frame: FrameSpec::default(),
            channel: ChannelParams::default(),
            frontend: FrontendConfig::default(),
            retrieval: RetrievalOptions::default(),
            estimator: EstimatorOptions::default(),
            equalizer: EqualizerConfig::default(),
            receiver: ReceiverConfig::default(),
        };
        if profile == Profile::Span30km {
            let ts = 1.0 / c.grid.symbol_rate;
            c.channel.mdl_db = 2.0;
            c.channel.intra_group_dgd = 2.0 * ts;
        }
        for (path, v) in pins(profile, &c.grid) {
            set_path(&mut c, path, v);
        }
        c
    }

    /// Parses TOML over the defaults of its `profile` (or `profile_override`).
    pub fn from_toml_str(text: &str, profile_override: Option<Profile>) -> Result<Self> {
        let user: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        let profile = match (profile_override, user.get("profile")) {
            (Some(p), _) => p,
            (None, Some(v)) => Profile::parse(
                v.as_str()
                    .ok_or_else(|| Error::Config("`profile` must be a string".into()))?,
            )?,
            (None, None) => Profile::Btb,
        };
        let mut user = user;
        user.insert("profile".into(), toml::Value::String(profile.name().into()));
        Self::merge_table(profile, user)
    }

    pub fn load(path: &Path, profile_override: Option<Profile>) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text, profile_override)
    }

    fn merge_table(profile: Profile, user: toml::Table) -> Result<Self> {
        let mut base = Self::for_profile(profile).to_table()?;
        deep_merge(&mut base, user);
        let cfg: Self = toml::Value::Table(base)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_table(&self) -> Result<toml::Table> {
        toml::Table::try_from(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Sets a numeric parameter named by a dotted path.
    pub fn with_numeric(&self, path: &str, value: f64) -> Result<Self> {
        let mut table = self.to_table()?;
        let slot = lookup_mut(&mut table, path)?;
        *slot = match slot {
            toml::Value::Integer(_) => {
                if value.fract() != 0.0 || value < 0.0 {
                    return Err(Error::Config(format!("`{path}` takes non-negative integers, got {value}")));
                }
                toml::Value::Integer(value as i64)
            }
            toml::Value::Float(_) => toml::Value::Float(value),
            _ => return Err(Error::Config(format!("`{path}` is not numeric"))),
        };
        Self::merge_table(self.profile, table)
    }

    /// Checks ranges and the profile pins.
    pub fn validate(&self) -> Result<()> {
        let cfg = |e: Error| Error::Config(e.to_string());
        self.frame.validate().map_err(cfg)?;
        let layout = self.frame.layout().map_err(cfg)?;
        let grid = self.grid.grid(layout.total * self.grid.samples_per_symbol).map_err(cfg)?;
        self.channel.validate(&grid).map_err(cfg)?;
        self.retrieval.validate().map_err(cfg)?;
        self.estimator.validate().map_err(cfg)?;
        if !(self.frontend.dispersion_psnm > 0.0 && self.frontend.dispersion_psnm.is_finite()) {
            return Err(Error::Config("frontend.dispersion_psnm must be positive".into()));
        }
        if let Some(e) = self.frontend.capture.enob {
            if !(e >= 1.0) {
                return Err(Error::Config(format!("frontend.capture.enob must be at least 1, got {e}")));
            }
        }
        let rc = &self.receiver;
        if !(rc.align_cd_range_psnm.is_finite() && rc.align_cd_step_psnm.is_finite()) {
            return Err(Error::Config("receiver alignment range and step must be finite".into()));
        }
        if rc.align_cd_step_psnm > 0.0 && rc.align_cd_range_psnm / rc.align_cd_step_psnm > 1000.0 {
            return Err(Error::Config("receiver alignment grid exceeds 2001 candidates".into()));
        }
        let seeds = [self.seed, self.frame.seed, self.channel.seed, self.retrieval.seed, self.estimator.seed];
        if seeds.iter().any(|&s| s > i64::MAX as u64) {
            return Err(Error::Config("seeds must be below 2^63".into()));
        }
        if self.equalizer.n_taps == Some(0) {
            return Err(Error::Config("equalizer.n_taps must be positive".into()));
        }
        let pinned = Self::for_profile(self.profile);
        for (path, _) in pins(self.profile, &self.grid) {
            let want = get_path(&pinned, path);
            let got = get_path(self, path);
            if want != got {
                return Err(Error::Config(format!(
                    "profile {} pins `{path}` to {want}, config sets {got}",
                    self.profile.name()
                )));
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form (output directory excluded), hex.
    pub fn hash(&self) -> Result<String> {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        let json = serde_json::to_vec(&c)?;
        Ok(Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect())
    }

    /// Same configuration with every module seed drawn from `seed`. Derived
    /// seeds are 63-bit so the snapshot stays valid TOML.
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut c = self.clone();
        c.seed = seed;
        let draw = |label: &str| seeded_rng(seed, label).gen::<u64>() >> 1;
        c.frame.seed = draw("runner/frame");
        c.channel.seed = draw("runner/channel");
        c.retrieval.seed = draw("runner/retrieval");
        c.estimator.seed = draw("runner/estimator");
        c
    }

    pub fn n_samples(&self) -> Result<usize> {
        Ok(self.frame.layout()?.total * self.grid.samples_per_symbol)
    }
}

#[derive(Clone, Copy, Debug)]
enum Pin {
    Usize(usize),
    F64(f64),
    Bool(bool),
    Delays([f64; 2]),
    None,
}

fn pins(profile: Profile, grid: &GridConfig) -> Vec<(&'static str, Pin)> {
    let ts = 1.0 / grid.symbol_rate;
    match profile {
        Profile::Btb => vec![
            ("frame.pilot_group_size", Pin::Usize(1)),
            ("channel.cd_psnm", Pin::F64(0.0)),
            ("channel.n_sections", Pin::Usize(0)),
            ("channel.section_group_delays", Pin::None),
            ("channel.intra_group_dgd", Pin::F64(0.0)),
        ],
        Profile::Span30km => vec![
            ("frame.pilot_group_size", Pin::Usize(3)),
            ("channel.cd_psnm", Pin::F64(510.0)),
            ("channel.n_sections", Pin::Usize(2)),
            ("channel.section_group_delays", Pin::Delays([2.0 * ts, -2.0 * ts])),
            ("channel.dgd_compensated", Pin::Bool(true)),
        ],
        Profile::Custom => Vec::new(),
    }
}

fn set_path(c: &mut ScenarioConfig, path: &str, v: Pin) {
    match (path, v) {
        ("frame.pilot_group_size", Pin::Usize(m)) => c.frame.pilot_group_size = m,
        ("channel.cd_psnm", Pin::F64(x)) => c.channel.cd_psnm = x,
        ("channel.n_sections", Pin::Usize(n)) => c.channel.n_sections = n,
        ("channel.section_group_delays", Pin::None) => c.channel.section_group_delays.clear(),
        ("channel.section_group_delays", Pin::Delays(d)) => c.channel.section_group_delays = d.to_vec(),
        ("channel.intra_group_dgd", Pin::F64(x)) => c.channel.intra_group_dgd = x,
        ("channel.dgd_compensated", Pin::Bool(b)) => c.channel.dgd_compensated = b,
        _ => unreachable!("pin table and setter disagree on {path}"),
    }
}

fn get_path(c: &ScenarioConfig, path: &str) -> String {
    match path {
        "frame.pilot_group_size" => c.frame.pilot_group_size.to_string(),
        "channel.cd_psnm" => c.channel.cd_psnm.to_string(),
        "channel.n_sections" => c.channel.n_sections.to_string(),
        "channel.section_group_delays" => format!("{:?}", c.channel.section_group_delays),
        "channel.intra_group_dgd" => c.channel.intra_group_dgd.to_string(),
        "channel.dgd_compensated" => c.channel.dgd_compensated.to_string(),
        _ => unreachable!("unknown pinned path {path}"),
    }
}

fn deep_merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => deep_merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn lookup_mut<'a>(table: &'a mut toml::Table, path: &str) -> Result<&'a mut toml::Value> {
    let mut parts = path.split('.');
    let first = parts.next().unwrap_or_default();
    let mut cur = table
        .get_mut(first)
        .ok_or_else(|| Error::Config(format!("unknown parameter `{path}`")))?;
    for p in parts {
        cur = cur
            .as_table_mut()
            .and_then(|t| t.get_mut(p))
            .ok_or_else(|| Error::Config(format!("unknown parameter `{path}`")))?;
    }
    Ok(cur)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_btb_defaults() {
        let c = ScenarioConfig::from_toml_str("", None).unwrap();
        assert_eq!(c, ScenarioConfig::default());
        assert_eq!(c.frame.pilot_group_size, 1);
    }

    #[test]
    fn unknown_keys_rejected() {
        let e = ScenarioConfig::from_toml_str("[frame]\npilot_percentag = 0.1\n", None).unwrap_err();
        assert!(matches!(e, Error::Config(_)));
    }

    #[test]
    fn pinned_field_conflict() {
        let e = ScenarioConfig::from_toml_str("profile = \"btb\"\n[frame]\npilot_group_size = 3\n", None)
            .unwrap_err();
        assert!(e.to_string().contains("pilot_group_size"));
        assert!(ScenarioConfig::from_toml_str("profile = \"custom\"\n[frame]\npilot_group_size = 3\n", None).is_ok());
    }

    #[test]
    fn span_profile_pins() {
        let c = ScenarioConfig::from_toml_str("", Some(Profile::Span30km)).unwrap();
        assert_eq!(c.frame.pilot_group_size, 3);
        assert_eq!(c.channel.cd_psnm, 510.0);
        assert!(c.channel.dgd_compensated);
    }

    #[test]
    fn snapshot_round_trips() {
        let c = ScenarioConfig::for_profile(Profile::Span30km).with_seed(9);
        let back = ScenarioConfig::from_toml_str(&c.to_toml_string().unwrap(), None).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash().unwrap(), c.hash().unwrap());
    }

    #[test]
    fn numeric_override() {
        let c = ScenarioConfig::default();
        let d = c.with_numeric("frame.pilot_percentage", 0.05).unwrap();
        assert_eq!(d.frame.pilot_percentage, 0.05);
        assert!(c.with_numeric("frame.nothing", 1.0).is_err());
        assert!(c.with_numeric("frame.payload_length", 1.5).is_err());
        assert!(c.with_numeric("profile", 1.0).is_err());
    }
}
