//! `dpmarg`: differentially private k-way parity and marginal release.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "dpmarg", version, about = "Private release of k-way parities and marginals")]
struct Cli {
    /// Directory that relative output paths are resolved against.
    #[arg(long, env = "DPMARG_OUT_DIR", global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic database as CSV.
    Generate(GenerateArgs),
    /// Run the projection mechanism and write the released answers.
    Release(ReleaseArgs),
    /// Compress a release (written with --raw-point) into a synopsis file.
    Compress(CompressArgs),
    /// Answer queries from a synopsis file.
    Answer(AnswerArgs),
    /// Compare released answers with the true answers of a database.
    Evaluate(EvaluateArgs),
    /// Boosted release with worst-case error guarantees.
    Boost(BoostArgs),
    /// Monte Carlo width estimates.
    Width(WidthArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "snake_case")]
enum GeneratorKind {
    Uniform,
    Planted,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    d: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = GeneratorKind::Uniform)]
    generator: GeneratorKind,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Clone)]
struct DataArgs {
    /// CSV database with a header line.
    #[arg(long)]
    input: PathBuf,
    /// Accept 0/1 values and map 0 to -1.
    #[arg(long)]
    binary: bool,
}

#[derive(Args, Debug, Clone)]
struct DistributionArgs {
    /// JSON distribution specification.
    #[arg(long, conflicts_with_all = ["uniform_subsets", "uniform_tuples"])]
    distribution: Option<PathBuf>,
    /// All k-way marginals, equally weighted.
    #[arg(long, value_name = "K", conflicts_with = "uniform_tuples")]
    uniform_subsets: Option<usize>,
    /// Uniform over all k-tuples of attribute indices.
    #[arg(long, value_name = "K")]
    uniform_tuples: Option<usize>,
}

#[derive(Args, Debug, Clone)]
struct SdpArgs {
    #[arg(long, default_value_t = 20)]
    sdp_restarts: usize,
    #[arg(long)]
    sdp_rank: Option<usize>,
    #[arg(long, default_value_t = 1e-7)]
    sdp_tol: f64,
    #[arg(long, default_value_t = 500)]
    sdp_max_sweeps: usize,
}

#[derive(Args, Debug)]
struct ReleaseArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    dist: DistributionArgs,
    #[arg(long)]
    epsilon: f64,
    #[arg(long)]
    delta: f64,
    /// Frank-Wolfe iterations (default from n, d, k and the privacy multiplier).
    #[arg(long)]
    iterations: Option<usize>,
    /// Choose the iteration count from a Monte Carlo width estimate of L.
    #[arg(long, conflicts_with = "iterations")]
    width_estimate: bool,
    #[arg(long, default_value_t = 50)]
    width_samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Test mode: add no noise. The output is not private.
    #[arg(long)]
    no_noise: bool,
    #[command(flatten)]
    sdp: SdpArgs,
    /// Include the convex-combination point (needed by `compress`).
    #[arg(long)]
    raw_point: bool,
    /// Also write a synopsis to this path.
    #[arg(long)]
    synopsis: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    chi: f64,
    #[arg(long, default_value_t = 0.1)]
    beta: f64,
    /// Record wall-clock time in the output (makes it non-deterministic).
    #[arg(long)]
    timing: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CompressArgs {
    /// Release JSON written with --raw-point.
    #[arg(long)]
    release: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    chi: f64,
    #[arg(long, default_value_t = 0.1)]
    beta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct AnswerArgs {
    #[arg(long)]
    synopsis: PathBuf,
    /// Tuples such as 1,2 (repeatable). Default: every cataloged tuple.
    #[arg(long = "tuple", value_name = "I,J,..")]
    tuples: Vec<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// Release or answer JSON.
    #[arg(long)]
    answers: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    /// Weights for the MSE (default: the release's own distribution, else uniform over the answers).
    #[arg(long)]
    distribution: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    bins: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BoostArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Query order; the query set is every k-tuple.
    #[arg(long)]
    k: usize,
    /// Total privacy budget, split evenly over the rounds.
    #[arg(long)]
    epsilon: f64,
    #[arg(long)]
    delta: f64,
    /// Default: ceil(3 ln m).
    #[arg(long)]
    rounds: Option<usize>,
    /// Queries sampled per round. Default: 4m.
    #[arg(long)]
    samples: Option<usize>,
    /// Hit threshold. Default: twice the first round's root-MSE.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    eta: f64,
    #[arg(long, default_value_t = 1.0)]
    chi: f64,
    #[arg(long, default_value_t = 0.1)]
    beta: f64,
    #[arg(long)]
    iterations: Option<usize>,
    /// Wire rounds, samples, chi, beta and the per-round budget as in the worst-case analysis.
    #[arg(long, conflicts_with_all = ["rounds", "samples", "chi", "beta"])]
    worst_case_params: bool,
    #[arg(long)]
    no_noise: bool,
    #[command(flatten)]
    sdp: SdpArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "snake_case")]
enum Body {
    /// Exact parity polytope (enumerates 2^d rows).
    K,
    /// Sign-vector body (enumerates the smaller side of the reshaped direction).
    L0,
    /// Vector relaxation (SDP).
    L,
    /// Stub whose dual norm is 1 in every direction.
    Constant,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "snake_case")]
enum Directions {
    /// P^{1/2} g with g standard Gaussian and p uniform over all tuples.
    Gaussian,
    /// D_p over all tuples.
    Dp,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug)]
struct WidthArgs {
    #[arg(long)]
    d: usize,
    #[arg(long)]
    k: usize,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "l0")]
    body: Vec<Body>,
    #[arg(long, value_enum, default_value_t = Directions::Gaussian)]
    directions: Directions,
    /// D_p parameter (fraction of nonzero coordinates).
    #[arg(long)]
    p_param: Option<f64>,
    #[arg(long, default_value_t = 200)]
    samples: usize,
    #[command(flatten)]
    sdp: SdpArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dpmarg: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
