use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dpi_audit::attacks::AttackKind;
use dpi_audit::Metric;

#[derive(Debug, Parser)]
#[command(
    name = "dpi-audit",
    version,
    about = "Membership-inference privacy audit for tabular synthetic data"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Audit a synthetic dataset against its training, holdout and reference data.
    Audit(AuditArgs),
    /// Run replicated audits on simulated data drawn from an oracle distribution.
    Simulate(SimulateArgs),
    /// Sweep dataset size, K and distance metric and tabulate attack AUCs.
    Ablate(AblateArgs),
}

#[derive(Debug, Args)]
pub struct AttackOptions {
    /// Neighbourhood size for the DPI score.
    #[arg(long, default_value_t = 20)]
    pub k: usize,
    #[arg(long, default_value = "l2", value_parser = parse_metric)]
    pub metric: Metric,
    /// Comma-separated attacks: dpi, gan_leaks, gan_leaks_cal, mc, logan_cal, dcr.
    #[arg(long, value_delimiter = ',', value_parser = parse_attack)]
    pub attacks: Option<Vec<AttackKind>>,
    /// Binary label column; enables the downstream utility probe.
    #[arg(long)]
    pub label_column: Option<String>,
    /// Percentile of training rows exported as most copied.
    #[arg(long, default_value_t = 1.0)]
    pub percentile: f64,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub holdout: Option<PathBuf>,
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long)]
    pub synthetic: Option<PathBuf>,
    /// Single real dataset to split three ways into train, holdout and reference.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Seed for the three-way split.
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub attack: AttackOptions,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum GeneratorArg {
    Perfect,
    Copier,
}

#[derive(Debug, Args)]
pub struct GeneratorOptions {
    /// Oracle distribution config (TOML).
    #[arg(long)]
    pub oracle: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub generator: Option<GeneratorArg>,
    /// Copier noise scale, relative to each training column's sd.
    #[arg(long, default_value_t = 0.01)]
    pub noise: f64,
    /// Share of copier rows that are noisy copies of training rows.
    #[arg(long, default_value_t = 1.0)]
    pub copy_fraction: f64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub source: GeneratorOptions,
    /// Rows per set (train, holdout, reference, synthetic).
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 5)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub attack: AttackOptions,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub source: GeneratorOptions,
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub holdout: Option<PathBuf>,
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long)]
    pub synthetic: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "5,10,20,30")]
    pub k_grid: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "l1,l2", value_parser = parse_metric)]
    pub metrics: Vec<Metric>,
    #[arg(long, value_delimiter = ',', default_value = "250,500,1000,2000")]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_delimiter = ',', default_value = "dpi", value_parser = parse_attack)]
    pub attacks: Vec<AttackKind>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

fn parse_metric(s: &str) -> Result<Metric, String> {
    s.parse::<Metric>().map_err(|e| e.to_string())
}

fn parse_attack(s: &str) -> Result<AttackKind, String> {
    s.parse::<AttackKind>().map_err(|e| e.to_string())
}
