use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "diffreg", version, about = "Diffeomorphic registration of periodic 2D/3D images")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Register --template onto --reference at a fixed alpha.
    Register(SolveArgs),
    /// Find the smallest alpha whose solution keeps det(grad y) inside (eps, 1/eps).
    SearchAlpha(SolveArgs),
    /// Deform --template (image or i32 labels) with a velocity field.
    Transport(TransportArgs),
    /// Determinant of the deformation gradient of a velocity field.
    Detgrad(DetgradArgs),
    /// Label-overlap metrics.
    #[command(subcommand)]
    Metrics(MetricsCommand),
    /// Write a synthetic template/reference pair with its true velocity.
    Synth(SynthArgs),
}

#[derive(Subcommand, Debug)]
pub enum MetricsCommand {
    /// Per-label and union Dice between --template and --reference label volumes.
    Dice(DiceArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DistanceArg {
    Ssd,
    Ncc,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PrecondArg {
    Reg,
    H0,
    #[value(name = "2level")]
    TwoLevel,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum InterpArg {
    Nearest,
    Linear,
    Cubic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ForcingArg {
    Superlinear,
    Quadratic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PrecisionArg {
    F32,
    F64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CaseArg {
    Translation,
    Rotation,
    Swirl,
    Compress,
}

/// Flags shared by every command.
#[derive(Args, Debug, Clone)]
pub struct Common {
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Worker threads for voxel loops (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, value_enum, default_value = "f64")]
    pub precision: PrecisionArg,
    #[arg(long, default_value_t = 4)]
    pub nt: usize,
    #[arg(long, value_enum, default_value = "cubic")]
    pub interp: InterpArg,
}

#[derive(Args, Debug, Clone)]
pub struct SolveArgs {
    #[arg(long)]
    pub template: PathBuf,
    #[arg(long)]
    pub reference: PathBuf,
    /// Regularization weight (register) or starting weight (search-alpha).
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Near-incompressible penalty weight; 0 disables the penalty.
    #[arg(long, default_value_t = 1e-4)]
    pub beta: f64,
    #[arg(long, value_enum, default_value = "ssd")]
    pub distance: DistanceArg,
    #[arg(long, value_enum, default_value = "h0")]
    pub precond: PrecondArg,
    /// Relative reduction of the gradient norm.
    #[arg(long, default_value_t = 5e-2)]
    pub tol: f64,
    #[arg(long, default_value_t = 0.1)]
    pub eps_det: f64,
    #[arg(long, default_value_t = 50)]
    pub maxit: usize,
    #[arg(long, value_enum, default_value = "superlinear")]
    pub forcing: ForcingArg,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Clone)]
pub struct TransportArgs {
    /// Velocity field (vector volume).
    pub velocity: PathBuf,
    #[arg(long)]
    pub template: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Clone)]
pub struct DetgradArgs {
    pub velocity: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    pub eps_det: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Clone)]
pub struct DiceArgs {
    #[arg(long)]
    pub template: PathBuf,
    #[arg(long)]
    pub reference: PathBuf,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct SynthArgs {
    #[arg(value_enum)]
    pub case: CaseArg,
    /// Points per axis (power of two, >= 32).
    #[arg(default_value_t = 64)]
    pub n: usize,
    /// Spatial dimension.
    #[arg(default_value_t = 2, value_parser = clap::value_parser!(u8).range(2..=3))]
    pub d: u8,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub common: Common,
}
