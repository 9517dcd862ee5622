use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use slerb_cli::config::LoadedConfig;
use slerb_cli::{analyze, catalogue_hash, run, CliError, ResultBundle};
use slerb_core::fitkit::FitModel;
use slerb_core::grouprep::{irrep_projectors, slerb_group};
use slerb_core::msgates::build_clifford_catalogue;
use slerb_core::qcore::{identity, max_abs, CMatrix};

#[derive(Parser)]
#[command(name = "slerb", version, about = "Simulate, fit and report SLERB experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipeline selected by the config's `mode`.
    Run {
        config: PathBuf,
        /// Override a config field, e.g. `--set injection.fractional_rabi_offset=0.05`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Run a calibration scan.
    Scan {
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Run the random-unitary estimator campaign.
    Campaign {
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Fit a stored curve file.
    Analyze {
        curve: PathBuf,
        #[arg(long, default_value = "no_spam")]
        model: String,
        #[arg(long, default_value_t = 0)]
        bootstrap: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "slerb-out")]
        out: PathBuf,
    },
    /// Write the Clifford catalogue.
    Catalogue {
        #[arg(long)]
        export: PathBuf,
    },
    /// Check the benchmarking group and its irrep decomposition.
    Group {
        #[arg(long)]
        verify: bool,
    },
}

fn load(config: &PathBuf, mut overrides: Vec<String>, mode: Option<&str>) -> Result<LoadedConfig, CliError> {
    if let Some(m) = mode {
        overrides.push(format!("mode={m}"));
    }
    LoadedConfig::load(config, &overrides)
}

fn report(b: &ResultBundle) {
    if let Some(fit) = &b.fit {
        for (name, v) in fit.summary() {
            println!("{name:>16} = {v:.4e}");
        }
    }
    if let Some(rows) = &b.scan {
        for r in rows {
            let mark = match (r.best_survival, r.min_leak) {
                (true, true) => "  <- max survival, min leak",
                (true, false) => "  <- max survival",
                (false, true) => "  <- min leak",
                _ => "",
            };
            println!(
                "{:>10.4}  S {:.4}  F {:.4}  L {:.4}{mark}",
                r.value, r.survival, r.flip, r.leak
            );
        }
    }
    if let Some(c) = &b.campaign {
        println!(
            "group e_F {:.3} ± {:.3}, transfer e_F {:.3} ± {:.3} ({} channels, {} failed)",
            c.group.mean_e, c.group.std_e, c.transfer.mean_e, c.transfer.std_e, c.n_fitted, c.n_failed
        );
    }
    println!("wrote {} ({:.1} s)", b.files.join(", "), b.provenance.wall_time_s);
}

fn verify_group() -> Result<(), CliError> {
    let g = slerb_group()?;
    let cat = build_clifford_catalogue()?;
    let projectors = irrep_projectors();
    let ranks: Vec<usize> = projectors.iter().map(|p| p.rank()).collect();
    let sum = projectors
        .iter()
        .fold(CMatrix::zeros(16, 16), |acc, p| acc + &p.projector);
    let completeness = max_abs(&(sum - identity(16)));
    println!("group order       {}", g.order());
    println!(
        "catalogue size    {} (avg pulses {}/{})",
        cat.len(),
        cat.avg_pulses().0,
        cat.avg_pulses().1
    );
    println!("projector ranks   {ranks:?}");
    println!("completeness      {completeness:.2e}");
    println!("catalogue sha256  {}", catalogue_hash(&cat));
    if g.order() != 96 || cat.len() != 24 || ranks != [3, 3, 1, 1, 4, 4] || completeness > 1e-9 {
        return Err(CliError::Numeric("group structure check failed".into()));
    }
    println!("ok");
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, overrides } => report(&run(&load(&config, overrides, None)?)?),
        Command::Scan { config, overrides } => report(&run(&load(&config, overrides, Some("calibration_scan"))?)?),
        Command::Campaign { config, overrides } => {
            report(&run(&load(&config, overrides, Some("random_unitary_campaign"))?)?)
        }
        Command::Analyze {
            curve,
            model,
            bootstrap,
            seed,
            out,
        } => {
            let model: FitModel = model.parse().map_err(|e| CliError::Config(format!("--model: {e}")))?;
            report(&analyze(&curve, model, bootstrap, seed, &out)?)
        }
        Command::Catalogue { export } => {
            let cat = build_clifford_catalogue()?;
            std::fs::write(&export, cat.export()).map_err(|e| CliError::Io(format!("{}: {e}", export.display())))?;
            println!("wrote {} Cliffords to {}", cat.len(), export.display());
        }
        Command::Group { verify } => {
            if verify {
                verify_group()?;
            } else {
                println!("order {}", slerb_group()?.order());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
