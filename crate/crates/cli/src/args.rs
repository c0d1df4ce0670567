use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qudio::ansatz::VqeRotation;
use qudio::engine::{GlobalConfig, MomentumPolicy};
use qudio::statevector::NoiseModel;

#[derive(Debug, Parser)]
#[command(name = "qudio", version, about = "Bulk-synchronous distributed training of variational quantum circuits")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the 6-qubit MNIST 0-vs-1 classifier.
    QnnTrain(QnnTrainArgs),
    /// Estimate H₂ ground energies over a set of bond distances.
    Vqe(VqeArgs),
    /// Monte Carlo check of the estimated-gradient bias formula.
    BiasCheck(BiasCheckArgs),
    /// Wall-clock sweep over node counts.
    Bench(BenchArgs),
    /// Download the MNIST IDX files.
    FetchMnist(FetchArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    /// Number of local nodes Q.
    #[arg(short = 'Q', long, default_value_t = 1)]
    pub nodes: usize,
    /// Local steps W between synchronizations.
    #[arg(short = 'W', long, default_value_t = 1)]
    pub local_steps: usize,
    /// Global rounds T.
    #[arg(short = 'T', long, default_value_t = 200)]
    pub global_steps: usize,
    #[arg(long, default_value_t = 0.2)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.9)]
    pub momentum: f64,
    /// Multiplier applied to the learning rate every decay period.
    #[arg(long, default_value_t = 1.0)]
    pub decay_factor: f64,
    /// Rounds between decays.
    #[arg(long, default_value_t = 40)]
    pub decay_period: usize,
    /// Keep momentum buffers across synchronizations instead of zeroing them.
    #[arg(long)]
    pub carry_momentum: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub noise: NoiseArgs,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write 0 in the wall_clock_s column so traces are byte-reproducible.
    #[arg(long)]
    pub no_wall_clock: bool,
}

#[derive(Debug, Clone, Args)]
pub struct NoiseArgs {
    /// Measurements per expectation value.
    #[arg(short = 'K', long, conflicts_with = "ideal")]
    pub shots: Option<u32>,
    /// Depolarization rate per circuit layer.
    #[arg(short = 'p', long, visible_alias = "p", default_value_t = 0.0, conflicts_with = "ideal")]
    pub depolarize: f64,
    /// Exact expectations, no noise.
    #[arg(long)]
    pub ideal: bool,
}

pub const DEFAULT_SHOTS: u32 = 100;

impl NoiseArgs {
    pub fn model(&self) -> qudio::Result<NoiseModel> {
        if self.ideal {
            Ok(NoiseModel::ideal())
        } else {
            NoiseModel::new(self.depolarize, Some(self.shots.unwrap_or(DEFAULT_SHOTS)))
        }
    }
}

impl TrainArgs {
    pub fn config(&self) -> qudio::Result<GlobalConfig> {
        let config = GlobalConfig {
            nodes: self.nodes,
            local_steps: self.local_steps,
            global_steps: self.global_steps,
            lr: self.lr,
            momentum: self.momentum,
            decay_factor: self.decay_factor,
            decay_period: self.decay_period,
            momentum_policy: if self.carry_momentum { MomentumPolicy::Carry } else { MomentumPolicy::ResetEachRound },
            noise: self.noise.model()?,
            seed: self.seed,
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Clone, Args)]
pub struct DatasetArgs {
    /// Directory holding the MNIST IDX files (raw or .gz).
    #[arg(long, env = "QUDIO_DATA", default_value = "data/mnist")]
    pub dataset_dir: PathBuf,
    /// Fail instead of downloading when the files are missing.
    #[arg(long)]
    pub no_fetch: bool,
}

#[derive(Debug, Clone, Args)]
pub struct QnnTrainArgs {
    #[command(flatten)]
    pub train: TrainArgs,
    #[command(flatten)]
    pub data: DatasetArgs,
    /// L2 regularization weight λ.
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 256)]
    pub train_count: usize,
    #[arg(long, default_value_t = 500)]
    pub test_count: usize,
    /// Sample the distilled sets without equalizing the two classes.
    #[arg(long)]
    pub no_balance: bool,
    /// Ansatz blocks.
    #[arg(long, default_value_t = 4)]
    pub blocks: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RotationArg {
    Euler,
    SingleRy,
}

impl From<RotationArg> for VqeRotation {
    fn from(r: RotationArg) -> Self {
        match r {
            RotationArg::Euler => VqeRotation::Euler,
            RotationArg::SingleRy => VqeRotation::SingleRy,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct HamiltonianArgs {
    /// Directory of h2_<distance>A.txt files.
    #[arg(long, default_value = "data/hamiltonians")]
    pub hamiltonian_dir: PathBuf,
    /// Comma-separated distances in Å; all files in the directory when omitted.
    #[arg(long, value_delimiter = ',')]
    pub bond_distances: Vec<f64>,
    #[arg(long, value_enum, default_value_t = RotationArg::Euler)]
    pub rotation: RotationArg,
    /// Shuffle terms before splitting them over nodes.
    #[arg(long)]
    pub partition_seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct VqeArgs {
    #[command(flatten)]
    pub train: TrainArgs,
    #[command(flatten)]
    pub hamiltonians: HamiltonianArgs,
}

#[derive(Debug, Clone, Args)]
pub struct BiasCheckArgs {
    #[command(flatten)]
    pub noise: NoiseArgs,
    #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(2..))]
    pub trials: u64,
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Use a seeded random 6-qubit input state instead of an MNIST image.
    #[arg(long)]
    pub synthetic: bool,
    /// Index into the distilled training set.
    #[arg(long, default_value_t = 0)]
    pub example: usize,
    #[command(flatten)]
    pub data: DatasetArgs,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WorkloadArg {
    Qnn,
    Vqe,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[arg(long, value_enum, default_value_t = WorkloadArg::Vqe)]
    pub workload: WorkloadArg,
    /// Node counts to sweep.
    #[arg(long, value_delimiter = ',', default_value = "1,2,4")]
    pub sweep: Vec<usize>,
    /// Metric threshold for time-to-target: accuracy to reach (qnn) or
    /// energy to get below (vqe). Defaults to 0.95 or exact + 0.1 Ha.
    #[arg(long, allow_negative_numbers = true)]
    pub target: Option<f64>,
    #[arg(short = 'W', long, default_value_t = 1)]
    pub local_steps: usize,
    #[arg(short = 'T', long, default_value_t = 50)]
    pub global_steps: usize,
    #[arg(long, default_value_t = 0.2)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.9)]
    pub momentum: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub noise: NoiseArgs,
    #[command(flatten)]
    pub data: DatasetArgs,
    /// Bond distance for the vqe workload.
    #[arg(long, default_value_t = 0.7)]
    pub bond_distance: f64,
    #[arg(long, default_value = "data/hamiltonians")]
    pub hamiltonian_dir: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct FetchArgs {
    #[arg(long, env = "QUDIO_DATA", default_value = "data/mnist")]
    pub dataset_dir: PathBuf,
    /// Gzipped tarball containing the four IDX files.
    #[arg(long)]
    pub url: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
    /// Output directory for the replay; defaults to the recorded one.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
