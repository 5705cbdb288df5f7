use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "mdpde", version, about = "Robust minimum DPD estimation and inference for finite Markov chains")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate sequences from a built-in family, optionally contaminated.
    Simulate(SimulateArgs),
    /// Fit a family to observed sequences at one or more alpha values.
    Estimate(EstimateArgs),
    /// Wald-type test of a simple null or the Bernoulli-Laplace null.
    Wald(WaldArgs),
    /// Two-sample Wald-type test of equal parameters.
    TwoSample(TwoSampleArgs),
    /// Influence function and sensitivity of the estimator.
    Influence(InfluenceArgs),
    /// Asymptotic relative efficiencies of the binomial-walk estimators.
    AreTable(AreTableArgs),
    /// Monte-Carlo MSE of the estimators under contamination.
    MseExperiment(MseArgs),
    /// Fit the clubbed rating chain to credit migration rates.
    Credit(CreditArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    /// Sequence text format; `simulate` only.
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VarianceChoice {
    /// Σ evaluated at the fitted model.
    Model,
    /// Sandwich evaluated at the empirical transition matrix.
    Robust,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Write to this file instead of standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Args)]
pub struct FamilyArgs {
    /// binomial-walk, multi-binomial-walk, greenwood, bernoulli-laplace,
    /// reflecting-walk or credit-clubbed.
    #[arg(long)]
    pub family: String,
    /// Number of states (for greenwood, the population size).
    #[arg(long = "K")]
    pub k: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// Sequence file: text format or the JSON written by `simulate`.
    #[arg(long)]
    pub input: PathBuf,
    /// Read one sequence per line instead of a single sequence.
    #[arg(long)]
    pub bundle: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub family: FamilyArgs,
    /// Parameter vector, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub theta: Vec<f64>,
    /// Number of transitions per sequence.
    #[arg(long, default_value_t = 100)]
    pub steps: usize,
    /// Initial state, 1-based.
    #[arg(long, default_value_t = 1)]
    pub x0: usize,
    #[arg(long, default_value_t = 1)]
    pub sequences: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.0)]
    pub epsilon: f64,
    /// sequential (steps drawn from the family at its upper bound),
    /// forward (post-hoc one step up) or absorb:<state>.
    #[arg(long, default_value = "sequential")]
    pub scheme: String,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub family: FamilyArgs,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub alpha: Vec<f64>,
    /// Confidence level of the reported intervals.
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Bonferroni-adjusted simultaneous intervals.
    #[arg(long)]
    pub simultaneous: bool,
    /// Chain order; orders above 1 need a higher-order family
    /// (momentum-binomial).
    #[arg(long, default_value_t = 1)]
    pub order: usize,
    #[arg(long, value_enum, default_value = "model")]
    pub variance: VarianceChoice,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct WaldArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub family: FamilyArgs,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub alpha: Vec<f64>,
    /// Null value θ₀ (comma separated) or `bernoulli-laplace`.
    #[arg(long)]
    pub null: String,
    #[arg(long, value_enum, default_value = "model")]
    pub variance: VarianceChoice,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct TwoSampleArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Second sample.
    #[arg(long)]
    pub input2: PathBuf,
    #[command(flatten)]
    pub family: FamilyArgs,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub alpha: Vec<f64>,
    #[arg(long, value_enum, default_value = "model")]
    pub variance: VarianceChoice,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct InfluenceArgs {
    #[command(flatten)]
    pub family: FamilyArgs,
    /// Parameter at which the model is evaluated (ignored with --input).
    #[arg(long, value_delimiter = ',')]
    pub theta: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0,0.5,1")]
    pub alpha: Vec<f64>,
    /// Evaluate at the empirical transition matrix of this sequence instead.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Contamination target per row, 1-based and comma separated.
    #[arg(long, value_delimiter = ',')]
    pub target: Vec<usize>,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct AreTableArgs {
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct MseArgs {
    /// binomial-walk or greenwood.
    #[arg(long, default_value = "binomial-walk")]
    pub family: String,
    /// Defaults to 10 for the binomial walk and 9 for greenwood.
    #[arg(long = "K")]
    pub k: Option<usize>,
    #[arg(long, default_value_t = 0.25)]
    pub theta: f64,
    #[arg(long, value_delimiter = ',', default_value = "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1")]
    pub alpha: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0,0.1,0.15,0.2")]
    pub epsilon: Vec<f64>,
    /// Sequence lengths T (number of transitions).
    #[arg(long, value_delimiter = ',', default_value = "50,100")]
    pub steps: Vec<usize>,
    #[arg(long, default_value_t = 1000)]
    pub replicates: usize,
    #[arg(long, default_value_t = 20240601)]
    pub seed: u64,
    /// sequential or forward / absorb:<state> (post-hoc replacement).
    #[arg(long, default_value = "sequential")]
    pub scheme: String,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CreditArgs {
    /// CSV with columns market,state,down,up,steady (percentages).
    #[arg(long, conflicts_with = "packaged_credit")]
    pub input: Option<PathBuf>,
    /// Use the bundled 2018 migration rates.
    #[arg(long)]
    pub packaged_credit: bool,
    #[arg(long, value_delimiter = ',', default_value = "0.5")]
    pub alpha: Vec<f64>,
    #[command(flatten)]
    pub out: OutputArgs,
}
