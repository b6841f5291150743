//! `mcar`: tests of Missing Completely At Random through the compatibility
//! of observed marginal distributions.
//!
//! Reports go to stdout as JSON with sorted keys; diagnostics go to stderr.
//! Exit codes: 0 retain or success, 3 reject, 2 usage error, 1 runtime error.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "mcar", version, about = "Test MCAR by the compatibility of observed marginals")]
pub struct Cli {
    /// Worker threads (default: all available cores)
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,

    /// Output format; `text` applies to `facets` only
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Test a CSV dataset for MCAR
    Test(TestArgs),
    /// Compute the incompatibility index of a marginal sequence
    Index(IndexArgs),
    /// Print critical values and the facet catalog hit
    Critical(CriticalArgs),
    /// Enumerate the essential facets of a pattern family
    Facets(FacetsArgs),
    /// Run a power study and write its CSV
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMethod {
    Universal,
    Improved,
    Bootstrap,
    Continuous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleArg {
    Standard,
    Literal,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    /// CSV file with a header row
    pub data: PathBuf,

    /// Schema descriptor: one `cat:<m>` or `cont` per column
    #[arg(long, value_name = "FILE")]
    pub schema: PathBuf,

    /// JSON file with defaults for the options below
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Significance level [default: 0.05]
    #[arg(long)]
    pub alpha: Option<f64>,

    /// Test to run [default: bootstrap]
    #[arg(long, value_enum)]
    pub method: Option<TestMethod>,

    /// Bootstrap replicates [default: 99]
    #[arg(long = "B", value_name = "B")]
    pub replicates: Option<usize>,

    /// Bootstrap seed [default: 1]
    #[arg(long)]
    pub seed: Option<u64>,

    /// Bootstrap comparison rule [default: standard]
    #[arg(long, value_enum)]
    pub rule: Option<RuleArg>,

    /// Bandwidths for the continuous columns, one or one per column
    #[arg(long, value_delimiter = ',', value_name = "H")]
    pub bandwidth: Option<Vec<f64>>,

    /// Hölder exponent of the continuous coordinates [default: 1]
    #[arg(long, value_name = "R")]
    pub holder_exponent: Option<f64>,

    /// Hölder constant [default: 1]
    #[arg(long, value_name = "L")]
    pub holder_constant: Option<f64>,

    /// Use the improved critical value after binning
    #[arg(long)]
    pub improved: bool,

    /// Number of functionals F' for the improved test
    #[arg(long, value_name = "F", requires = "d_r")]
    pub f_prime: Option<u64>,

    /// Constant D_R for the improved test
    #[arg(long, value_name = "D", requires = "f_prime")]
    pub d_r: Option<f64>,

    /// Solve the LP directly, without hypergraph reductions
    #[arg(long)]
    pub no_reduce: bool,

    /// Condition on common variables even if their marginals disagree
    #[arg(long)]
    pub force_condition: bool,

    /// Write the (binned) empirical marginals as JSON
    #[arg(long, value_name = "FILE")]
    pub dump_marginals: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    /// Marginal sequence JSON
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,

    /// Also print the reduction plan
    #[arg(long)]
    pub explain: bool,

    /// Evaluate this closed-form family as well
    #[arg(long, value_name = "TAG")]
    pub closed_form: Option<String>,

    /// Solve the LP directly, without hypergraph reductions
    #[arg(long)]
    pub no_reduce: bool,

    /// Condition on common variables even if their marginals disagree
    #[arg(long)]
    pub force_condition: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticalMethod {
    Universal,
    Improved,
    Min,
}

#[derive(Debug, Args)]
pub struct CriticalArgs {
    /// Significance level
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,

    /// Which critical value to report
    #[arg(long, value_enum, default_value_t = CriticalMethod::Min)]
    pub method: CriticalMethod,

    /// Take the shape and sample sizes from a marginal sequence JSON
    #[arg(long, value_name = "FILE", conflicts_with_all = ["patterns", "sizes", "n"])]
    pub input: Option<PathBuf>,

    /// Patterns, e.g. `12,23,13` (use `.` between labels above 9)
    #[arg(long, requires_all = ["sizes", "n"])]
    pub patterns: Option<String>,

    /// Alphabet sizes, e.g. `2,2,2`
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,

    /// Sample sizes, one or one per pattern
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<u64>>,

    /// Number of functionals F' (overrides the catalog)
    #[arg(long, value_name = "F", requires = "d_r")]
    pub f_prime: Option<u64>,

    /// Constant D_R (overrides the catalog)
    #[arg(long, value_name = "D", requires = "f_prime")]
    pub d_r: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FacetsArgs {
    /// Patterns, e.g. `12,23,13` (use `.` between labels above 9)
    #[arg(long)]
    pub patterns: String,

    /// Alphabet sizes, e.g. `2,2,2`
    #[arg(long, value_delimiter = ',')]
    pub sizes: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyMethodArg {
    Bootstrap,
    Universal,
    Improved,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// `rs2-power`, `d5-power`, or a study JSON file
    #[arg(long)]
    pub study: String,

    /// Simulated datasets per grid point [default: 1000]
    #[arg(long)]
    pub reps: Option<usize>,

    /// Master seed [default: 1]
    #[arg(long)]
    pub seed: Option<u64>,

    /// First alphabet size of the rs2 family [default: 2]
    #[arg(long)]
    pub r: Option<usize>,

    /// Test to run on each dataset
    #[arg(long, value_enum)]
    pub method: Option<StudyMethodArg>,

    /// Bootstrap replicates per test
    #[arg(long = "B", value_name = "B")]
    pub replicates: Option<usize>,

    /// Significance level
    #[arg(long)]
    pub alpha: Option<f64>,

    /// CSV output path
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
