//! Experiment configuration: TOML parsing, dotted-key overrides, validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use slerb_core::dynsim::{ErrorInjection, MsGateParams, ResetPolicy};
use slerb_core::errmodel::AnalyticNoiseChannel;
use slerb_core::fitkit::FitModel;

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    CliffordMc,
    Hamiltonian,
    TwirledChannel,
    AnalyzeOnly,
    CalibrationScan,
    RandomUnitaryCampaign,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanParameter {
    Detuning,
    Rabi,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub parameter: ScanParameter,
    pub values: Vec<f64>,
    #[serde(default = "default_scan_length")]
    pub length: usize,
}

fn default_scan_length() -> usize {
    100
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignSection {
    #[serde(default = "default_channels")]
    pub n_channels: usize,
    #[serde(default = "default_sigma2")]
    pub sigma2: f64,
}

fn default_channels() -> usize {
    1000
}

fn default_sigma2() -> f64 {
    0.01
}

impl Default for CampaignSection {
    fn default() -> Self {
        Self {
            n_channels: default_channels(),
            sigma2: default_sigma2(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "schema_version")]
    pub version: u32,
    pub mode: Mode,
    #[serde(default = "default_lengths")]
    pub lengths: Vec<usize>,
    #[serde(default = "default_randomizations")]
    pub randomizations: usize,
    /// Shots per randomization; 0 keeps exact populations.
    #[serde(default)]
    pub shots: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_model")]
    pub fit_model: FitModel,
    /// Bootstrap resamples; 0 skips the intervals.
    #[serde(default)]
    pub bootstrap: usize,
    #[serde(default = "default_policy")]
    pub reset_policy: ResetPolicy,
    /// Error unitaries applied after every Clifford, in order.
    #[serde(default)]
    pub noise: Vec<AnalyticNoiseChannel>,
    #[serde(default)]
    pub gate: MsGateParams,
    #[serde(default)]
    pub injection: ErrorInjection,
    pub scan: Option<ScanConfig>,
    #[serde(default)]
    pub campaign: CampaignSection,
    /// Curve file for `analyze_only`, relative to the config file.
    pub input: Option<PathBuf>,
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

pub fn default_lengths() -> Vec<usize> {
    vec![0, 1, 2, 4, 8, 16, 32, 64, 128, 200]
}

fn default_randomizations() -> usize {
    50
}

fn default_model() -> FitModel {
    FitModel::NoSpam
}

fn default_policy() -> ResetPolicy {
    ResetPolicy::ResetEachGate
}

fn default_output() -> PathBuf {
    PathBuf::from("slerb-out")
}

fn invalid(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {msg}"))
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.version != SCHEMA_VERSION {
            return Err(invalid(
                "version",
                format!("unsupported schema version {}", self.version),
            ));
        }
        if self.lengths.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("lengths", "must be strictly increasing"));
        }
        if self.lengths.is_empty() && !matches!(self.mode, Mode::AnalyzeOnly | Mode::CalibrationScan) {
            return Err(invalid("lengths", "must not be empty"));
        }
        if self.randomizations == 0 {
            return Err(invalid("randomizations", "must be at least 1"));
        }
        self.gate.validate().map_err(|e| invalid("gate", e))?;
        self.injection.validate().map_err(|e| invalid("injection", e))?;
        match self.mode {
            Mode::AnalyzeOnly if self.input.is_none() => return Err(invalid("input", "required for analyze_only")),
            Mode::CalibrationScan => {
                let scan = self
                    .scan
                    .as_ref()
                    .ok_or_else(|| invalid("scan", "required for calibration_scan"))?;
                if scan.values.len() < 2 {
                    return Err(invalid(
                        "scan.values",
                        format!("need at least 2 values, got {}", scan.values.len()),
                    ));
                }
                if scan.values.iter().any(|v| !v.is_finite()) {
                    return Err(invalid("scan.values", "must be finite"));
                }
            }
            Mode::RandomUnitaryCampaign => {
                if self.campaign.n_channels < 10 {
                    return Err(invalid("campaign.n_channels", "must be at least 10"));
                }
                if !(self.campaign.sigma2 >= 0.0 && self.campaign.sigma2.is_finite()) {
                    return Err(invalid("campaign.sigma2", "must be non-negative"));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// Parses `value` as a TOML literal, falling back to a bare string.
fn parse_literal(value: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {value}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()))
}

/// Applies a `dotted.key=value` override to a parsed document.
pub fn apply_override(doc: &mut toml::Table, spec: &str) -> Result<(), CliError> {
    let (key, value) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override '{spec}' is not of the form key=value")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("override key '{key}' is malformed")));
    }
    let mut table = doc;
    for p in &parts[..parts.len() - 1] {
        let entry = table
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("override '{key}': '{p}' is not a table")))?;
    }
    table.insert(parts[parts.len() - 1].to_string(), parse_literal(value.trim()));
    Ok(())
}

pub fn parse_config(text: &str, overrides: &[String]) -> Result<ExperimentConfig, CliError> {
    let mut doc: toml::Table = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    for o in overrides {
        apply_override(&mut doc, o)?;
    }
    let cfg: ExperimentConfig = doc
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

/// A validated configuration together with the exact text it was read from.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub text: String,
    pub overrides: Vec<String>,
    pub base_dir: PathBuf,
}

impl LoadedConfig {
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let config = parse_config(&text, overrides)?;
        Ok(Self {
            config,
            text,
            overrides: overrides.to_vec(),
            base_dir: path.parent().map(Path::to_path_buf).unwrap_or_default(),
        })
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}
