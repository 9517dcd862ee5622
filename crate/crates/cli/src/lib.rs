//! Config-driven runner for SLERB simulations, fits and reports.

pub mod config;
pub mod io;

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use slerb_core::campaign::{random_unitary_campaign, twirled_populations, CampaignConfig, EstimatorStats};
use slerb_core::clifford_mc::{simulate_clifford_mc, CliffordMcConfig};
use slerb_core::dynsim::{simulate_hamiltonian_curve, HamiltonianSimulator};
use slerb_core::errmodel::make_error_unitary;
use slerb_core::fitkit::{
    asymptote_diagnostic, fit_slerb, fit_with_bootstrap, mean_std, AsymptoteReport, BootstrapSummary, DecayFit,
    EstimatorPair, FitModel, PopulationCurve,
};
use slerb_core::grouprep::{slerb_group, twirl};
use slerb_core::msgates::{build_clifford_catalogue, CliffordCatalogue};
use slerb_core::qcore::{unitary_to_process, GateUnitary};
use slerb_core::seeding::{derive_seed, stage_rng};
use slerb_core::SlerbError;
use thiserror::Error;

use config::{ExperimentConfig, LoadedConfig, Mode, ScanParameter};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl From<SlerbError> for CliError {
    fn from(e: SlerbError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub catalogue_sha256: String,
    pub core_version: String,
    pub cli_version: String,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub value: f64,
    pub survival: f64,
    pub survival_err: f64,
    pub flip: f64,
    pub flip_err: f64,
    pub leak: f64,
    pub leak_err: f64,
    pub best_survival: bool,
    pub min_leak: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignSummary {
    pub n_fitted: usize,
    pub n_failed: usize,
    pub group: EstimatorStats,
    pub transfer: EstimatorStats,
    pub mean_true_fidelity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultBundle {
    pub mode: Mode,
    /// The configuration text exactly as read.
    pub config_echo: String,
    pub overrides: Vec<String>,
    pub curve: Option<PopulationCurve>,
    pub fit: Option<DecayFit>,
    pub bootstrap: Option<BootstrapSummary>,
    pub estimators: Option<EstimatorPair>,
    pub asymptotes: Option<AsymptoteReport>,
    pub scan: Option<Vec<ScanRow>>,
    pub campaign: Option<CampaignSummary>,
    /// Files written, relative to the output directory.
    pub files: Vec<String>,
    pub provenance: Provenance,
}

pub fn catalogue_hash(cat: &CliffordCatalogue) -> String {
    hex::encode(Sha256::digest(cat.export().as_bytes()))
}

struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    fn new(dir: PathBuf) -> Result<Self, CliError> {
        std::fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        Ok(Self { dir, files: Vec::new() })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }
}

fn simulate_curve(cfg: &ExperimentConfig, cat: &CliffordCatalogue) -> Result<PopulationCurve, CliError> {
    Ok(match cfg.mode {
        Mode::CliffordMc => simulate_clifford_mc(
            cat,
            &CliffordMcConfig {
                lengths: cfg.lengths.clone(),
                circuits: cfg.randomizations,
                shots: cfg.shots,
                errors: cfg.noise.clone(),
                seed: cfg.seed,
            },
        )?,
        Mode::Hamiltonian => {
            let sim = HamiltonianSimulator::new(cfg.gate, cfg.injection)?;
            simulate_hamiltonian_curve(
                cat,
                &sim,
                &cfg.lengths,
                cfg.randomizations,
                cfg.shots,
                cfg.reset_policy,
                cfg.seed,
            )?
        }
        Mode::TwirledChannel => {
            let mut u = GateUnitary::identity(4);
            for (k, ch) in cfg.noise.iter().enumerate() {
                let mut rng = stage_rng(cfg.seed, "twirled_channel", k as u64);
                u = make_error_unitary(ch, &mut rng)?.then_after(&u);
            }
            let group = slerb_group()?;
            let pops = twirled_populations(&twirl(&unitary_to_process(&u)?, &group), &cfg.lengths);
            let model = |l: usize| pops[cfg.lengths.binary_search(&l).unwrap()];
            let mut curve = if cfg.shots == 0 {
                PopulationCurve::from_model(&cfg.lengths, cfg.randomizations, model)
            } else {
                let mut rng = stage_rng(cfg.seed, "shots", 0);
                PopulationCurve::sample_from_model(&cfg.lengths, cfg.randomizations, cfg.shots, &mut rng, model)
            };
            curve.seed = Some(cfg.seed);
            curve
        }
        _ => unreachable!("not a curve-producing mode"),
    })
}

/// Fit with optional bootstrap; the bootstrap seed is derived from `seed`.
pub fn fit_curve(
    curve: &PopulationCurve,
    model: FitModel,
    bootstrap: usize,
    seed: u64,
) -> Result<(DecayFit, Option<BootstrapSummary>), CliError> {
    if bootstrap > 0 {
        let (fit, boot) = fit_with_bootstrap(curve, model, bootstrap, derive_seed(seed, "bootstrap", 0))?;
        Ok((fit, Some(boot)))
    } else {
        Ok((fit_slerb(curve, model)?, None))
    }
}

fn analyze_into(
    bundle: &mut ResultBundle,
    out: &mut Outputs,
    curve: PopulationCurve,
    model: FitModel,
    bootstrap: usize,
    seed: u64,
) -> Result<(), CliError> {
    io::write_curve_table(&out.path("plot_curve.csv"), &curve)?;
    let (fit, boot) = fit_curve(&curve, model, bootstrap, seed)?;
    io::write_json(&out.path("fit.json"), &fit)?;
    io::write_model_table(&out.path("plot_model.csv"), &fit, *curve.lengths.last().unwrap())?;
    bundle.estimators = Some(fit.estimates);
    bundle.asymptotes = asymptote_diagnostic(&curve).ok();
    bundle.fit = Some(fit);
    bundle.bootstrap = boot;
    bundle.curve = Some(curve);
    Ok(())
}

fn calibration_scan(cfg: &ExperimentConfig, cat: &CliffordCatalogue) -> Result<Vec<ScanRow>, CliError> {
    let scan = cfg.scan.as_ref().expect("validated");
    let mut rows = Vec::with_capacity(scan.values.len());
    for &v in &scan.values {
        let mut inj = cfg.injection;
        match scan.parameter {
            ScanParameter::Detuning => inj.fractional_detuning_offset = v,
            ScanParameter::Rabi => inj.fractional_rabi_offset = v,
        }
        let sim = HamiltonianSimulator::new(cfg.gate, inj)?;
        // Same seed at every value: each point sees the same sequences.
        let curve = simulate_hamiltonian_curve(
            cat,
            &sim,
            &[scan.length],
            cfg.randomizations,
            cfg.shots,
            cfg.reset_policy,
            cfg.seed,
        )?;
        let ps = curve.populations(0);
        let col = |k: usize| mean_std(&ps.iter().map(|p| p.as_array()[k]).collect::<Vec<_>>());
        let ((s, se), (f, fe), (l, le)) = (col(0), col(1), col(2));
        rows.push(ScanRow {
            value: v,
            survival: s,
            survival_err: se,
            flip: f,
            flip_err: fe,
            leak: l,
            leak_err: le,
            best_survival: false,
            min_leak: false,
        });
    }
    let best = (0..rows.len())
        .max_by(|&a, &b| rows[a].survival.total_cmp(&rows[b].survival))
        .unwrap();
    let low = (0..rows.len())
        .min_by(|&a, &b| rows[a].leak.total_cmp(&rows[b].leak))
        .unwrap();
    rows[best].best_survival = true;
    rows[low].min_leak = true;
    Ok(rows)
}

/// Executes the configured pipeline and writes every output file.
pub fn run(loaded: &LoadedConfig) -> Result<ResultBundle, CliError> {
    let start = Instant::now();
    let cfg = &loaded.config;
    let cat = build_clifford_catalogue()?;
    let mut out = Outputs::new(loaded.resolve(&cfg.output))?;
    let mut bundle = ResultBundle {
        mode: cfg.mode,
        config_echo: loaded.text.clone(),
        overrides: loaded.overrides.clone(),
        curve: None,
        fit: None,
        bootstrap: None,
        estimators: None,
        asymptotes: None,
        scan: None,
        campaign: None,
        files: Vec::new(),
        provenance: Provenance {
            catalogue_sha256: catalogue_hash(&cat),
            core_version: slerb_core::VERSION.to_string(),
            cli_version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_s: 0.0,
        },
    };
    match cfg.mode {
        Mode::CliffordMc | Mode::Hamiltonian | Mode::TwirledChannel => {
            let curve = simulate_curve(cfg, &cat)?;
            io::write_curve(&out.path("curve.csv"), &curve)?;
            analyze_into(&mut bundle, &mut out, curve, cfg.fit_model, cfg.bootstrap, cfg.seed)?;
        }
        Mode::AnalyzeOnly => {
            let curve = io::read_curve(&loaded.resolve(cfg.input.as_ref().expect("validated")))?;
            analyze_into(&mut bundle, &mut out, curve, cfg.fit_model, cfg.bootstrap, cfg.seed)?;
        }
        Mode::CalibrationScan => {
            let rows = calibration_scan(cfg, &cat)?;
            io::write_rows(&out.path("scan.csv"), &rows)?;
            bundle.scan = Some(rows);
        }
        Mode::RandomUnitaryCampaign => {
            let res = random_unitary_campaign(
                &slerb_group()?,
                &CampaignConfig {
                    n_channels: cfg.campaign.n_channels,
                    sigma2: cfg.campaign.sigma2,
                    lengths: cfg.lengths.clone(),
                    seed: cfg.seed,
                },
            )?;
            io::write_rows(&out.path("campaign.csv"), &res.rows)?;
            bundle.campaign = Some(CampaignSummary {
                n_fitted: res.rows.len(),
                n_failed: res.n_failed,
                group: res.group,
                transfer: res.transfer,
                mean_true_fidelity: res.mean_true_fidelity,
            });
        }
    }
    out.files.push("bundle.json".into());
    bundle.files = out.files.clone();
    bundle.provenance.wall_time_s = start.elapsed().as_secs_f64();
    io::write_json(&out.dir.join("bundle.json"), &bundle)?;
    Ok(bundle)
}

/// Fits a stored curve file. The bundle echoes an equivalent `analyze_only`
/// configuration.
pub fn analyze(
    curve_file: &Path,
    model: FitModel,
    bootstrap: usize,
    seed: u64,
    output: &Path,
) -> Result<ResultBundle, CliError> {
    let model_name = serde_json::to_value(model).unwrap();
    let text = format!(
        "mode = \"analyze_only\"\ninput = {}\nfit_model = {}\nbootstrap = {bootstrap}\nseed = {seed}\noutput = {}\n",
        toml::Value::String(curve_file.display().to_string()),
        toml::Value::String(model_name.as_str().unwrap().to_string()),
        toml::Value::String(output.display().to_string()),
    );
    let loaded = LoadedConfig {
        config: config::parse_config(&text, &[])?,
        text,
        overrides: Vec::new(),
        base_dir: PathBuf::new(),
    };
    run(&loaded)
}
