//! `pals`: phenomenology estimates, synthetic lifetime spectra and lifetime fits.
//!
//! Exit status: 0 on success, 1 on invalid input or configuration, 2 on a
//! runtime or fit failure.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pals_core::Profile;

#[derive(Debug, Parser)]
#[command(
    name = "pals",
    version,
    about = "Orthopositronium lifetime-spectrum toolkit"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML configuration file; omitted keys take their defaults.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Override one configuration key, e.g. `--set gas.pressure_atm=75`
    /// (values in the key's own unit, see the key suffix). Repeatable.
    #[arg(long = "set", global = true, value_name = "SECTION.KEY=VALUE")]
    pub set: Vec<String>,
    /// Directory receiving all output files.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    pub out_dir: PathBuf,
    /// Base RNG seed [integer, dimensionless]; overrides simulation.seed.
    #[arg(long, global = true, value_name = "SEED")]
    pub seed: Option<u64>,
    /// Physical-constant profile; overrides the config's `profile`.
    #[arg(long, global = true, value_enum)]
    pub profile: Option<ProfileArg>,
    /// Format of the summary printed to stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProfileArg {
    Paper,
    Codata,
}

impl From<ProfileArg> for Profile {
    fn from(p: ProfileArg) -> Self {
        match p {
            ProfileArg::Paper => Profile::Paper,
            ProfileArg::Codata => Profile::Codata,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the collective-state estimates with units and formulas.
    Estimate,
    /// Generate a synthetic lifetime spectrum.
    Simulate(SimulateArgs),
    /// Fit a lifetime spectrum and extract the o-Ps rate anomaly.
    Fit(FitArgs),
    /// Simulate and fit many seeds; report the pull distribution of the o-Ps rate.
    Replicas(ReplicaArgs),
    /// Estimate, simulate (or read) and fit in one go; write a text report and
    /// plot-ready CSVs.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Number of true coincidences to record [count]; overrides simulation.events.
    #[arg(long, value_name = "N")]
    pub events: Option<u64>,
    /// Spectrum CSV path, relative to --out-dir.
    #[arg(long, value_name = "PATH", default_value = "spectrum.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Spectrum CSV (t_bin_center_ns in ns, counts per bin).
    #[arg(long = "in", value_name = "PATH")]
    pub input: PathBuf,
    /// TOML fit model; keys as in the config's [fit] section (rates in 1/ns,
    /// times in ns, background in counts/bin). Defaults to the config's [fit].
    #[arg(long, value_name = "PATH")]
    pub model: Option<PathBuf>,
    /// Result JSON path, relative to --out-dir.
    #[arg(long, value_name = "PATH", default_value = "fit.json")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReplicaArgs {
    /// Number of replicas [count]; replica i uses seed base + i.
    #[arg(long, value_name = "N", default_value_t = 200)]
    pub replicas: u64,
    /// True coincidences per replica [count]; defaults to simulation.events.
    #[arg(long, value_name = "N")]
    pub events: Option<u64>,
    /// Worker threads [count]; 0 uses all cores.
    #[arg(long, value_name = "N", default_value_t = 0)]
    pub workers: usize,
    /// Per-replica CSV path, relative to --out-dir.
    #[arg(long, value_name = "PATH", default_value = "replicas.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Spectrum CSV to analyze; simulated from the config when omitted.
    #[arg(long = "in", value_name = "PATH")]
    pub input: Option<PathBuf>,
    /// True coincidences to simulate when --in is omitted [count].
    #[arg(long, value_name = "N")]
    pub events: Option<u64>,
    /// Text report path, relative to --out-dir.
    #[arg(long, value_name = "PATH", default_value = "report.txt")]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match commands::run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
