//! `toa-obfuscate`: pilot distortion design and Monte Carlo sweeps.

mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use toa_obfuscation::harness::{
    capacity_sweep, design, range_profile, rmse_sweep, sort_records, tradeoff_sweep, SweepLabel,
};
use toa_obfuscation::maf::MetricKind;

use config::{parse_snr_range, RunConfig};
use error::CliError;
use output::{emit, OptimizeReportFile, Table};

#[derive(Debug, Parser)]
#[command(
    name = "toa-obfuscate",
    version,
    about = "OFDM pilot distortion against ToA ranging"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimize the distortion for one metric and ε; writes a JSON report.
    Optimize,
    /// MAF power versus range around the true delay.
    RangeProfile,
    /// Monte Carlo MML RMSE versus SNR with bootstrap bands.
    RmseSweep,
    /// Capacity lower bound versus SNR.
    CapacitySweep,
    /// Capacity and RMSE for every configured metric and ε.
    Tradeoff,
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file (default: standard output).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// slpr or isl.
    #[arg(long, global = true)]
    metric: Option<MetricKind>,
    /// Proximity radius; 0 selects the undistorted pilot in sweeps.
    #[arg(long, global = true, allow_hyphen_values = true)]
    epsilon: Option<f64>,
    /// SNR grid in dB as lo:step:hi.
    #[arg(long, global = true, allow_hyphen_values = true)]
    snr: Option<String>,
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Range-profile sample count.
    #[arg(long, global = true)]
    points: Option<usize>,
    /// Restrict the distortion to real values.
    #[arg(long, global = true)]
    real_z: bool,
    /// Extra τ* re-anchoring rounds for SLPR (at most 3).
    #[arg(long = "refresh-taustar", global = true)]
    refresh_taustar: Option<usize>,
}

impl CommonArgs {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(p) = &self.out {
            cfg.output.path = Some(p.clone());
        }
        if let Some(s) = self.seed {
            cfg.scenario.seed = s;
        }
        if let Some(m) = self.metric {
            cfg.metric = m;
        }
        if let Some(e) = self.epsilon {
            cfg.optimizer.epsilon = e;
        }
        if let Some(s) = &self.snr {
            cfg.scenario.snr_grid_db = parse_snr_range(s)?;
        }
        if let Some(t) = self.trials {
            cfg.scenario.trials = t;
        }
        if let Some(p) = self.points {
            cfg.profile_points = p;
        }
        if self.real_z {
            cfg.optimizer.real_z = true;
        }
        if let Some(r) = self.refresh_taustar {
            cfg.optimizer.refresh_tau_star = r;
        }
        Ok(cfg)
    }
}

fn check_epsilon(eps: f64) -> Result<(), CliError> {
    if eps.is_finite() && eps >= 0.0 {
        Ok(())
    } else {
        Err(CliError::Config(format!(
            "epsilon must be finite and non-negative, got {eps}"
        )))
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = cli.common.resolve()?;
    let spec = cfg.scenario_spec()?;
    let region = cfg.sidelobe_region(&spec.config)?;
    let eps = cfg.optimizer.epsilon;
    let out = cfg.output.path.as_deref();
    let format = cfg.output.format;

    match cli.command {
        Command::Optimize => {
            if eps.is_nan() || eps <= 0.0 {
                return Err(CliError::Config(format!("epsilon must be positive, got {eps}")));
            }
            let d = design(&spec, cfg.metric, eps, &region, &cfg.optimizer)?;
            let report = d.report.expect("ε > 0 always runs the optimizer");
            let file = OptimizeReportFile::new(
                cfg.metric,
                eps,
                cfg.optimizer.real_z,
                spec.config.power_budget(),
                &report,
            );
            emit(out, &file.to_json())
        }
        Command::RangeProfile => {
            check_epsilon(eps)?;
            let d = design(&spec, cfg.metric, eps, &region, &cfg.optimizer)?;
            let prof = range_profile(&d.z, &spec, cfg.profile_points)?;
            emit(out, &Table::range_profile(&prof).render(format))
        }
        Command::RmseSweep => {
            check_epsilon(eps)?;
            let d = design(&spec, cfg.metric, eps, &region, &cfg.optimizer)?;
            let label = SweepLabel {
                metric: cfg.metric,
                epsilon: eps,
            };
            let mut recs = rmse_sweep(&spec, &d.z, label)?;
            sort_records(&mut recs);
            emit(out, &Table::rmse(&recs).render(format))
        }
        Command::CapacitySweep => {
            check_epsilon(eps)?;
            let d = design(&spec, cfg.metric, eps, &region, &cfg.optimizer)?;
            let label = SweepLabel {
                metric: cfg.metric,
                epsilon: eps,
            };
            let mut recs = capacity_sweep(&spec, &d.z, label, cfg.scenario.capacity_mode)?;
            sort_records(&mut recs);
            emit(out, &Table::capacity(&recs).render(format))
        }
        Command::Tradeoff => {
            let recs = tradeoff_sweep(&spec, &region, &cfg.optimizer)?;
            emit(out, &Table::tradeoff(&recs).render(format))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("toa-obfuscate: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
