//! `cvqkd`: secret-key-rate reports, noise-model fits, calibration
//! simulations, and WDM/SDM spectrum plans from one binary.

mod commands;
mod error;
mod settings;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cvqkd::AttackModel;

use error::{CliError, Result};
use settings::Settings;

#[derive(Parser)]
#[command(
    name = "cvqkd",
    version,
    about = "CV-QKD key rates, crosstalk calibration, and spectrum planning"
)]
struct Cli {
    /// Key-value config file; command-line flags override its entries
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Override one config entry, e.g. --set link.t=0.25 (repeatable)
    #[arg(long, global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Write the report to a file instead of stdout
    #[arg(short, long, global = true, value_name = "FILE")]
    output: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Secret-key-rate report for one link, as JSON
    Skr(SkrArgs),
    /// Key-rate sweep over launch power or wavelength, as CSV
    Sweep(SweepArgs),
    /// Spectrum plan and aggregate throughput, as JSON
    Plan(PlanArgs),
    /// Fit the crosstalk model to measured power/noise points, as JSON
    Fit(FitArgs),
    /// Simulate a three-stage calibration run, as JSON
    CalibrateSim(CalibrateArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AttackChoice {
    Individual,
    Collective,
    Both,
}

impl AttackChoice {
    pub fn models(self) -> Vec<AttackModel> {
        match self {
            AttackChoice::Individual => vec![AttackModel::Individual],
            AttackChoice::Collective => vec![AttackModel::Collective],
            AttackChoice::Both => vec![AttackModel::Individual, AttackModel::Collective],
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepAxisChoice {
    Power,
    Wavelength,
}

#[derive(Args)]
pub struct SkrArgs {
    /// Channel transmittance in (0, 1]
    #[arg(long)]
    pub t: Option<f64>,

    /// Excess noise at the channel input, shot-noise units
    #[arg(long)]
    pub eps: Option<f64>,

    /// Detection efficiency in (0, 1]
    #[arg(long)]
    pub eta: Option<f64>,

    /// Electrical noise, shot-noise units
    #[arg(long)]
    pub nu_el: Option<f64>,

    /// Fixed modulation variance; omit to optimize it per combination
    #[arg(long)]
    pub v_a: Option<f64>,

    /// Reconciliation efficiency (repeatable; default 1.0 and 0.898)
    #[arg(long)]
    pub beta: Vec<f64>,

    /// Symbol rate in Hz for the bits/s conversion
    #[arg(long)]
    pub symbol_rate_hz: Option<f64>,

    /// Which eavesdropper model(s) to evaluate
    #[arg(long, value_enum, default_value = "both")]
    pub attack: AttackChoice,

    /// Also report the largest tolerable excess noise per combination
    #[arg(long)]
    pub report_max_eps: bool,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
pub struct SweepArgs {
    /// Sweep axis
    #[arg(long, value_enum)]
    pub axis: Option<SweepAxisChoice>,

    /// Wavelength/noise CSV table (wavelength axis)
    #[arg(long, value_name = "FILE")]
    pub table: Option<PathBuf>,

    /// Resample the table on a regular grid with this step in nm
    #[arg(long)]
    pub step_nm: Option<f64>,

    /// Fit the crosstalk model from this power/noise CSV (power axis)
    #[arg(long, value_name = "FILE")]
    pub fit_from: Option<PathBuf>,

    /// Crosstalk model noise floor, shot-noise units (power axis)
    #[arg(long)]
    pub eps_floor: Option<f64>,

    /// Crosstalk model slope, shot-noise units per mW (power axis)
    #[arg(long)]
    pub k_xt: Option<f64>,

    /// Lowest launch power in dBm
    #[arg(long)]
    pub min_dbm: Option<f64>,

    /// Highest launch power in dBm
    #[arg(long)]
    pub max_dbm: Option<f64>,

    /// Power step in dB
    #[arg(long)]
    pub step_db: Option<f64>,

    /// Channel transmittance in (0, 1]
    #[arg(long)]
    pub t: Option<f64>,

    /// Detection efficiency in (0, 1]
    #[arg(long)]
    pub eta: Option<f64>,

    /// Electrical noise, shot-noise units
    #[arg(long)]
    pub nu_el: Option<f64>,

    /// Reconciliation efficiency for the non-ideal columns
    #[arg(long)]
    pub beta: Option<f64>,

    /// Fixed modulation variance; omit to optimize it per point
    #[arg(long)]
    pub v_a: Option<f64>,

    /// Symbol rate in Hz for the bits/s conversion
    #[arg(long)]
    pub symbol_rate_hz: Option<f64>,
}

#[derive(Args)]
pub struct PlanArgs {
    /// Number of classical carriers
    #[arg(long)]
    pub n_channels: Option<usize>,

    /// Classical carrier spacing in GHz
    #[arg(long)]
    pub spacing_ghz: Option<f64>,

    /// Classical symbol rate in GBd
    #[arg(long)]
    pub symbol_rate_gbd: Option<f64>,

    /// Information bits per classical symbol
    #[arg(long)]
    pub bits_per_symbol: Option<u32>,

    /// Band start in nm
    #[arg(long)]
    pub band_start_nm: Option<f64>,

    /// Band end in nm
    #[arg(long)]
    pub band_end_nm: Option<f64>,

    /// QKD channel bandwidth in GHz
    #[arg(long)]
    pub channel_bw_ghz: Option<f64>,

    /// QKD slot width in GHz
    #[arg(long)]
    pub slot_ghz: Option<f64>,

    /// Cap on QKD slots per guard band
    #[arg(long)]
    pub max_slots_per_band: Option<usize>,

    /// Cores carrying quantum channels
    #[arg(long)]
    pub qkd_cores: Option<usize>,

    /// Cores loaded with the classical system
    #[arg(long)]
    pub classical_cores: Option<usize>,

    /// Per-channel secret key rate in bits/s for the aggregate throughput report
    #[arg(long)]
    pub per_channel_skr_bps: Option<f64>,
}

#[derive(Args)]
pub struct FitArgs {
    /// Measured power/noise CSV (`power_dbm,eps_snu`)
    #[arg(long, value_name = "FILE")]
    pub input: Option<PathBuf>,
}

#[derive(Args)]
pub struct CalibrateArgs {
    /// Samples per stage
    #[arg(long)]
    pub n_samples: Option<usize>,

    /// Shot-noise variance in raw detector units
    #[arg(long)]
    pub n0: Option<f64>,

    /// Electrical noise, shot-noise units
    #[arg(long)]
    pub nu_el: Option<f64>,

    /// Detection efficiency in (0, 1]
    #[arg(long)]
    pub eta: Option<f64>,

    /// Channel transmittance in (0, 1]
    #[arg(long)]
    pub t: Option<f64>,

    /// Planted excess noise, shot-noise units
    #[arg(long)]
    pub eps: Option<f64>,

    /// RNG seed; required so runs are reproducible
    #[arg(long)]
    pub seed: Option<u64>,
}

fn run(cli: &Cli) -> Result<()> {
    let settings = Settings::load(cli.config.as_deref(), &cli.set)?;
    let report = match &cli.command {
        Command::Skr(args) => commands::skr(args, &settings)?,
        Command::Sweep(args) => commands::sweep(args, &settings)?,
        Command::Plan(args) => commands::plan(args, &settings)?,
        Command::Fit(args) => commands::fit(args, &settings)?,
        Command::CalibrateSim(args) => commands::calibrate_sim(args, &settings)?,
    };

    let output = cli
        .output
        .clone()
        .or_else(|| settings.str("output.path").map(PathBuf::from));
    match output {
        Some(path) => std::fs::write(&path, report)
            .map_err(|err| CliError::Io(format!("cannot write {}: {err}", path.display()))),
        None => {
            print!("{report}");
            Ok(())
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(&cli) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
