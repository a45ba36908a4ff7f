mod commands;
mod settings;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

#[derive(Parser, Debug)]
#[command(name = "probe", version, about = "Parameter-corruption robustness lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a model with the plain objective.
    Train(TrainCmd),
    /// Train with the corruption-resistant objective.
    AcrtTrain(AcrtCmd),
    /// Apply one gradient-based or random corruption and report the loss change.
    Corrupt(CorruptCmd),
    /// Monte-Carlo summary of random-corruption loss changes.
    McRandom(McCmd),
    /// Per-group vulnerability scan.
    Scan(ScanCmd),
    /// Distribution and bound calculators.
    #[command(subcommand)]
    Theory(TheoryCmd),
    /// Post-corruption metrics of a baseline and a robust checkpoint.
    RobustnessTable(TableCmd),
    /// Checkpoint utilities.
    #[command(subcommand)]
    Checkpoint(CheckpointCmd),
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
pub struct Common {
    /// Seed for every random choice; falls back to PROBE_SEED, then 0.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JSON file supplying values for flags not given on the command line.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
pub struct DataArgs {
    /// two-moons | spiral | xor | idx-pair | csv
    #[arg(long)]
    pub dataset: Option<String>,
    /// Data files: IDX images then labels, or one CSV.
    #[arg(long = "data-path")]
    pub data_path: Option<Vec<PathBuf>>,
    /// Synthetic sample count [default: 1000].
    #[arg(long)]
    pub points: Option<usize>,
    /// Synthetic noise level.
    #[arg(long)]
    pub noise: Option<f64>,
    /// Training fraction of the split [default: 0.8].
    #[arg(long)]
    pub split_fraction: Option<f64>,
    /// Seed for data generation and the split [default: --seed].
    #[arg(long)]
    pub data_seed: Option<u64>,
    /// classes | values
    #[arg(long)]
    pub targets: Option<String>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
pub struct ModelArgs {
    /// Load model and parameters from a checkpoint instead of building them.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// mlp | convnet-small | linear-softmax
    #[arg(long)]
    pub arch: Option<String>,
    /// Comma-separated layer sizes [default: from the data].
    #[arg(long, value_delimiter = ',')]
    pub layers: Option<Vec<usize>>,
    /// tanh | relu | softplus
    #[arg(long)]
    pub activation: Option<String>,
    /// none | per-layer-scale-bias
    #[arg(long)]
    pub normalization: Option<String>,
    /// cross-entropy | mse
    #[arg(long)]
    pub loss: Option<String>,
    /// Initialization seed [default: --seed].
    #[arg(long)]
    pub model_seed: Option<u64>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
pub struct ScheduleArgs {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// sgd-momentum | adam-lite
    #[arg(long)]
    pub optimizer: Option<String>,
    #[arg(long)]
    pub momentum: Option<f64>,
    /// Checkpoint to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Newline-delimited JSON run log, one object per epoch.
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
pub struct CorruptionArgs {
    /// Norm order p >= 1, or `inf`.
    #[arg(long)]
    pub p: Option<String>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Maximum corrupted parameters [default: all in the subspace].
    #[arg(long)]
    pub n: Option<usize>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrainCmd {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub schedule: ScheduleArgs,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
pub struct AcrtCmd {
    #[command(flatten)]
    #[serde(flatten)]
    pub train: TrainCmd,
    #[command(flatten)]
    #[serde(flatten)]
    pub corruption: CorruptionArgs,
    /// direct-lstar | grad-reg | baseline
    #[arg(long)]
    pub variant: Option<String>,
    /// Mixing weight of the corrupted loss [default: 0.5].
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Gradient-norm weight for grad-reg [default: alpha * epsilon].
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Plain epochs before the robust objective engages.
    #[arg(long)]
    pub warmup: Option<usize>,
    /// Finite-difference step of the Hessian-vector product.
    #[arg(long)]
    pub hvp_delta: Option<f64>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
pub struct SubspaceArgs {
    /// kind | layer
    #[arg(long)]
    pub axis: Option<String>,
    /// Restrict the corruption to this group label on --axis.
    #[arg(long)]
    pub group: Option<String>,
    /// train | eval: split supplying the gradient
    #[arg(long)]
    pub grad_split: Option<String>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
pub struct CorruptCmd {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub corruption: CorruptionArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub subspace: SubspaceArgs,
    /// gradient | random
    #[arg(long)]
    pub mode: Option<String>,
    /// Write the corrupted parameters to this checkpoint.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
pub struct ReportArgs {
    /// csv | json | svg-heatmap
    #[arg(long)]
    pub format: Option<String>,
    /// Report file [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
pub struct McCmd {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub corruption: CorruptionArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub subspace: SubspaceArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub report: ReportArgs,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Worker threads; output does not depend on this.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Pair every draw with its negation.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub antithetic: Option<bool>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
pub struct ScanCmd {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub report: ReportArgs,
    /// kind | layer
    #[arg(long)]
    pub axis: Option<String>,
    /// Comma-separated epsilons.
    #[arg(long, value_delimiter = ',')]
    pub eps: Option<Vec<f64>>,
    /// Norm order p >= 1, or `inf`.
    #[arg(long)]
    pub p: Option<String>,
    /// Maximum corrupted parameters per group [default: group size].
    #[arg(long)]
    pub n: Option<usize>,
    /// train | eval
    #[arg(long)]
    pub grad_split: Option<String>,
    /// Fixed heatmap color bounds `low,high`.
    #[arg(long, value_delimiter = ',')]
    pub svg_bounds: Option<Vec<f64>>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
pub struct TableCmd {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub report: ReportArgs,
    /// Baseline checkpoint.
    #[arg(long)]
    pub baseline: Option<PathBuf>,
    /// Corruption-resistant checkpoint.
    #[arg(long)]
    pub acrt: Option<PathBuf>,
    /// Comma-separated epsilons, strictly increasing.
    #[arg(long, value_delimiter = ',')]
    pub eps: Option<Vec<f64>>,
    /// Norm order p >= 1, or `inf`.
    #[arg(long)]
    pub p: Option<String>,
    /// train | eval
    #[arg(long)]
    pub grad_split: Option<String>,
}

#[derive(Subcommand, Debug)]
enum TheoryCmd {
    /// P(eta <= x) for k corrupted parameters.
    EtaCdf(EtaCmd),
    /// Density of eta at x.
    EtaDensity(EtaCmd),
    /// Error bound of the gradient-based estimate.
    Bound(BoundCmd),
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
pub struct EtaCmd {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Number of corrupted parameters, at least 2.
    #[arg(long)]
    pub k: Option<usize>,
    /// Comma-separated points in [0, 1].
    #[arg(long, value_delimiter = ',')]
    pub x: Option<Vec<f64>>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
pub struct BoundCmd {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Norm order p >= 1, or `inf`.
    #[arg(long)]
    pub p: Option<String>,
    /// Corrupted parameters [default: k].
    #[arg(long)]
    pub n: Option<usize>,
    /// Parameters in the model.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Smoothness constant L.
    #[arg(long)]
    pub smoothness: Option<f64>,
    /// Gradient norm G.
    #[arg(long)]
    pub grad_norm: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum CheckpointCmd {
    /// Print the header and parameter statistics.
    Inspect(InspectCmd),
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
pub struct InspectCmd {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    pub path: PathBuf,
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Train(c) => commands::train(&c),
        Command::AcrtTrain(c) => commands::acrt_train(&c),
        Command::Corrupt(c) => commands::corrupt(&c),
        Command::McRandom(c) => commands::mc_random(&c),
        Command::Scan(c) => commands::scan(&c),
        Command::Theory(TheoryCmd::EtaCdf(c)) => commands::eta(&c, true),
        Command::Theory(TheoryCmd::EtaDensity(c)) => commands::eta(&c, false),
        Command::Theory(TheoryCmd::Bound(c)) => commands::bound(&c),
        Command::RobustnessTable(c) => commands::robustness_table(&c),
        Command::Checkpoint(CheckpointCmd::Inspect(c)) => commands::inspect(&c),
    }
}
