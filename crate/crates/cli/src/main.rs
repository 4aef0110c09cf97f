//! `accum`: build certified entropy models, check them, realize them as
//! interval maps and estimate entropy.
//!
//! Exit codes: 0 on success (for `construct` and `verify`, only when every
//! certificate claim holds), 1 when verification fails, 2 on any error. Errors
//! are written to stderr as `{"error": {"code", "message"}}`.

mod commands;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "accum", version, about = "Orders of accumulation of entropy: models, certificates, realizations")]
struct Cli {
    /// Largest ordinal tower height accepted (sets ACCUM_ORDINAL_MAX_HEIGHT).
    #[arg(long, global = true)]
    max_height: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a model with its certificate and verify it.
    Construct(ConstructArgs),
    /// Re-check the certificate stored in a model file.
    Verify(FileArg),
    /// Tables derived from a model file.
    Report(ReportArgs),
    /// Realize a model file as a piecewise map of [-1, 1] and run the numeric checks.
    Realize(RealizeArgs),
    /// Entropy estimates as CSV.
    Estimate(EstimateArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    General,
    SZero,
    BaseFinite,
    Powers,
    Irreducible,
}

#[derive(Args, Debug)]
pub struct ConstructArgs {
    #[arg(long, value_enum, default_value = "general")]
    pub kind: Kind,
    /// Target order of accumulation, e.g. "w^2*3 + w + 4".
    #[arg(long)]
    pub alpha: Option<String>,
    /// Target norm, a rational such as "1/2".
    #[arg(long)]
    pub a: Option<String>,
    /// Entropy cap of the construction.
    #[arg(long)]
    pub cap: Option<String>,
    /// Number of layers for base-finite and powers.
    #[arg(long)]
    pub p: Option<u64>,
    #[arg(long)]
    pub beta: Option<String>,
    #[arg(long)]
    pub delta: Option<String>,
    #[arg(long)]
    pub epsilon: Option<String>,
    /// Entropy of the single atom for s-zero.
    #[arg(long)]
    pub h: Option<String>,
    /// Write the document here instead of stdout.
    #[arg(long, short)]
    pub out: Option<String>,
}

#[derive(Args, Debug)]
pub struct FileArg {
    pub file: String,
}

#[derive(Args, Debug, Clone)]
pub struct PlanArgs {
    /// Children sewn in (M).
    #[arg(long, default_value_t = 3)]
    pub orbits: usize,
    /// Sewing levels realized (D).
    #[arg(long, default_value_t = 1)]
    pub depth: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 64)]
    pub max_period: usize,
}

#[derive(Args, Debug, Clone)]
pub struct EstimatorArgs {
    /// Comma-separated scales.
    #[arg(long, default_value = "1e-3", value_delimiter = ',')]
    pub eps: Vec<f64>,
    /// Horizon.
    #[arg(long, default_value_t = 12)]
    pub n: usize,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long = "sample-seed", default_value_t = 1)]
    pub sample_seed: u64,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    pub file: String,
    /// Emit the u_γ table at this ordinal (repeatable).
    #[arg(long = "u-gamma")]
    pub u_gamma: Vec<String>,
    /// Emit h and h_sex at the sample points.
    #[arg(long)]
    pub h_sex: bool,
    /// Realize the model and emit entropy estimates.
    #[arg(long)]
    pub estimate_entropy: bool,
    /// Emit the stored certificate.
    #[arg(long)]
    pub certificate: bool,
    /// Largest copy index among sample points.
    #[arg(long, default_value_t = 3)]
    pub max_copy: u64,
    /// Deepest copy nesting among sample points.
    #[arg(long, default_value_t = 2)]
    pub point_depth: usize,
    /// Print the entropy table as CSV instead of JSON.
    #[arg(long)]
    pub csv: bool,
    #[command(flatten)]
    pub plan: PlanArgs,
    #[command(flatten)]
    pub est: EstimatorArgs,
}

#[derive(Args, Debug)]
pub struct RealizeArgs {
    pub file: String,
    #[command(flatten)]
    pub plan: PlanArgs,
    /// Samples used by the numeric checks.
    #[arg(long, default_value_t = 10_000)]
    pub check_samples: usize,
    /// Write the map as a JSON formula tree.
    #[arg(long)]
    pub map_out: Option<String>,
    /// Write sampled orbits as CSV.
    #[arg(long)]
    pub orbits_csv: Option<String>,
    #[arg(long, default_value_t = 20)]
    pub steps: usize,
    #[arg(long, default_value_t = 16)]
    pub starts: usize,
}

#[derive(Args, Debug)]
pub struct EstimateArgs {
    /// Estimate for the N-tent.
    #[arg(long, conflicts_with = "model")]
    pub tent: Option<u64>,
    /// Estimate for the realization of this model file.
    #[arg(long)]
    pub model: Option<String>,
    #[command(flatten)]
    pub plan: PlanArgs,
    #[command(flatten)]
    pub est: EstimatorArgs,
    #[arg(long, short)]
    pub out: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(h) = cli.max_height {
        std::env::set_var(accum_core::ordinal::HEIGHT_ENV, h.to_string());
    }
    let outcome = match &cli.command {
        Command::Construct(a) => commands::construct(a),
        Command::Verify(a) => commands::verify(&a.file),
        Command::Report(a) => commands::report(a),
        Command::Realize(a) => commands::realize(a),
        Command::Estimate(a) => commands::estimate(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("{}", serde_json::json!({"error": {"code": e.code(), "message": e.to_string()}}));
            ExitCode::from(2)
        }
    }
}
