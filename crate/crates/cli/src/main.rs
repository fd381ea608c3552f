mod commands;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sincere::audit::{AverageClaim, SettingClaim, Task};
use sincere::perturb::SwapScope;
use sincere::{Average, Criterion};

/// Evaluation, statistics and audit toolkit for end-to-end relation
/// extraction.
///
/// Exit status: 0 when nothing was found, 1 when findings were reported
/// (violations, discrepancies, non-comparable results, misalignment), 2 on
/// usage, I/O or schema errors.
#[derive(Debug, Parser)]
#[command(name = "sincere", version)]
struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    format: Format,
    /// Seed for randomized commands; overrides seeds in profile files.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Json,
    Tsv,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Score predictions against gold.
    Score(ScoreArgs),
    /// Corpus statistics, optionally checked against a reference manifest.
    Stats(StatsArgs),
    /// Validate canonical files.
    Check(CheckArgs),
    /// Decide which published results can be compared directly.
    Compare(CompareArgs),
    /// Write a seeded, perturbed copy of a gold corpus.
    Perturb(PerturbArgs),
    /// Strict versus Boundaries gap over a grid of perturbation profiles.
    Sweep(SweepArgs),
    /// Find which settings reproduce a reported score.
    Fingerprint(FingerprintArgs),
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    pub gold: PathBuf,
    pub pred: PathBuf,
    #[arg(long, default_value = "strict", value_parser = parse_criterion)]
    pub criterion: Criterion,
    #[arg(long, default_value = "micro", value_parser = parse_average)]
    pub average: Average,
    #[arg(long = "exclude-entity-type", value_name = "TYPE")]
    pub exclude_entity_types: Vec<String>,
    #[arg(long = "exclude-relation-type", value_name = "TYPE")]
    pub exclude_relation_types: Vec<String>,
    /// Relation type whose argument order is irrelevant.
    #[arg(long = "symmetric-type", value_name = "TYPE")]
    pub symmetric_types: Vec<String>,
    /// Report all four criteria.
    #[arg(long)]
    pub all_settings: bool,
    /// Score even when sentences do not line up.
    #[arg(long)]
    pub allow_misaligned: bool,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Canonical files, typically one per split.
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
    /// Reference manifest: a file, or one of the bundled names (conll04, ace05).
    #[arg(long)]
    pub manifest: Option<String>,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false, id = "source")]
pub struct CompareArgs {
    /// Claims file (JSON array of results).
    #[arg(group = "source")]
    pub claims: Option<PathBuf>,
    /// Use the bundled table of published results.
    #[arg(long, group = "source")]
    pub bundled: bool,
    /// Also list comparable pairs.
    #[arg(long)]
    pub all: bool,
}

#[derive(Debug, Args)]
pub struct ProfileArgs {
    /// Profile file; inline flags override its fields.
    #[arg(long)]
    pub profile: Option<PathBuf>,
    #[arg(long)]
    pub p_ent_type_swap: Option<f64>,
    #[arg(long)]
    pub p_ent_boundary_shift: Option<f64>,
    #[arg(long)]
    pub p_ent_drop: Option<f64>,
    #[arg(long)]
    pub p_ent_spurious: Option<f64>,
    #[arg(long)]
    pub p_rel_type_swap: Option<f64>,
    #[arg(long)]
    pub p_rel_drop: Option<f64>,
    #[arg(long)]
    pub p_rel_spurious: Option<f64>,
    #[arg(long)]
    pub max_spurious_len: Option<usize>,
    #[arg(long, value_enum)]
    pub swap_scope: Option<ScopeArg>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ScopeArg {
    All,
    NonArguments,
}

impl From<ScopeArg> for SwapScope {
    fn from(s: ScopeArg) -> Self {
        match s {
            ScopeArg::All => SwapScope::All,
            ScopeArg::NonArguments => SwapScope::NonArguments,
        }
    }
}

#[derive(Debug, Args)]
pub struct PerturbArgs {
    pub gold: PathBuf,
    #[command(flatten)]
    pub profile: ProfileArgs,
    /// Output file; stdout when omitted.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    pub gold: PathBuf,
    /// JSON array of perturbation profiles.
    pub grid: PathBuf,
    /// Average every row over this many consecutive seeds.
    #[arg(long)]
    pub seeds: Option<u64>,
}

#[derive(Debug, Args)]
pub struct FingerprintArgs {
    pub gold: PathBuf,
    pub pred: PathBuf,
    /// Reported F1, as a fraction or a percentage.
    #[arg(long)]
    pub value: f64,
    #[arg(long, default_value = "re", value_parser = parse_task)]
    pub task: Task,
    #[arg(long, default_value = "unknown", value_parser = parse_setting)]
    pub setting: SettingClaim,
    #[arg(long, default_value = "unknown", value_parser = parse_average_claim)]
    pub average: AverageClaim,
    #[arg(long = "exclude-entity-type", value_name = "TYPE")]
    pub exclude_entity_types: Vec<String>,
    #[arg(long, default_value_t = sincere::audit::DEFAULT_FINGERPRINT_TOLERANCE)]
    pub tolerance: f64,
    #[arg(long, default_value = "reported")]
    pub label: String,
}

fn parse_criterion(s: &str) -> Result<Criterion, String> {
    s.parse().map_err(|e: sincere::Error| e.to_string())
}

fn parse_average(s: &str) -> Result<Average, String> {
    s.parse().map_err(|e: sincere::Error| e.to_string())
}

fn parse_enum<T: serde::de::DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.replace('-', "_").to_lowercase())).map_err(|e| e.to_string())
}

fn parse_task(s: &str) -> Result<Task, String> {
    parse_enum(s)
}

fn parse_setting(s: &str) -> Result<SettingClaim, String> {
    parse_enum(s)
}

fn parse_average_claim(s: &str) -> Result<AverageClaim, String> {
    parse_enum(s)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ctx = commands::Context {
        format: cli.format,
        seed: cli.seed,
    };
    let result = match &cli.command {
        Command::Score(a) => commands::score(&ctx, a),
        Command::Stats(a) => commands::stats(&ctx, a),
        Command::Check(a) => commands::check(&ctx, a),
        Command::Compare(a) => commands::compare(&ctx, a),
        Command::Perturb(a) => commands::perturb(&ctx, a),
        Command::Sweep(a) => commands::sweep(&ctx, a),
        Command::Fingerprint(a) => commands::fingerprint(&ctx, a),
    };
    match result {
        Ok(commands::Status::Clean) => ExitCode::SUCCESS,
        Ok(commands::Status::Findings) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
