use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use ricker_allee::{CoupledParams, DetectorSettings, LocalParams, PatchState};

use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "ricker-allee",
    version,
    about = "Two-patch Ricker map with a strong Allee effect"
)]
pub struct Cli {
    /// Worker threads for grid sweeps (0 = all available cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub workers: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Critical point, maximum, largest preimage of A and regime of the local map.
    Regime(RegimeArgs),
    /// Growth rate at which f(f(D)) = A.
    Rth(RthArgs),
    /// Coupled orbit as CSV: t,x,y.
    Orbit(OrbitArgs),
    /// Attractor reached from one initial condition.
    Attractor(AttractorArgs),
    /// Distinct attractors reached from a set of seeds.
    Census(CensusArgs),
    /// Tail states over a range of growth rates: r,ic,x,y.
    Bifurcation(BifurcationArgs),
    /// Period code over the (r, d) plane: r,d,code,error.
    Plane(PlaneArgs),
    /// Whether random initial conditions reach an asymmetric attractor: r,d,asymmetric,error.
    RegionProbe(RegionProbeArgs),
    /// Basin labels over an initial-condition grid: x0,y0,label,period,error.
    Basin(BasinArgs),
    /// Time to extinction over an initial-condition grid: x0,y0,time,error.
    ExtTime(ExtTimeArgs),
    /// Nullcline polylines of the first or second iterate: family,curve,vertex,x,y.
    Nullclines(NullclineArgs),
    /// Fixed points of the first or second iterate: x,y,spectral_radius,stable.
    FixedPoints(FixedPointArgs),
    /// Orbit until extinction with regime segments: t,x,y,label.
    Transient(TransientArgs),
    /// Re-runs the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
pub struct LocalArgs {
    /// Intrinsic growth rate.
    #[arg(long)]
    pub r: f64,
    /// Allee threshold.
    #[arg(long = "A", default_value_t = 0.2)]
    pub a: f64,
    /// Carrying capacity.
    #[arg(long = "K", default_value_t = 1.0)]
    pub k: f64,
}

impl LocalArgs {
    pub fn params(&self) -> CliResult<LocalParams> {
        Ok(LocalParams::new(self.r, self.k, self.a)?)
    }
}

#[derive(Debug, Args)]
pub struct CoupledArgs {
    #[command(flatten)]
    pub local: LocalArgs,
    /// Dispersal fraction in [0, 0.5].
    #[arg(long)]
    pub d: f64,
}

impl CoupledArgs {
    pub fn params(&self) -> CliResult<CoupledParams> {
        Ok(CoupledParams::new(self.local.params()?, self.d)?)
    }
}

#[derive(Debug, Args)]
pub struct StartArgs {
    #[arg(long)]
    pub x0: f64,
    #[arg(long)]
    pub y0: f64,
}

impl StartArgs {
    pub fn state(&self) -> PatchState {
        PatchState::new(self.x0, self.y0)
    }
}

#[derive(Debug, Args)]
pub struct DetectorArgs {
    /// Steps discarded before the tail is examined.
    #[arg(long)]
    pub transient: Option<usize>,
    #[arg(long, default_value_t = 8)]
    pub max_period: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub match_tol: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub extinct_tol: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub dedup_tol: f64,
}

impl DetectorArgs {
    pub fn settings(&self, default_transient: usize) -> DetectorSettings {
        DetectorSettings {
            transient: self.transient.unwrap_or(default_transient),
            max_period: self.max_period,
            match_tol: self.match_tol,
            extinct_tol: self.extinct_tol,
            dedup_tol: self.dedup_tol,
        }
    }
}

#[derive(Debug, Args)]
pub struct OutArgs {
    /// CSV destination; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ImageArgs {
    /// Also write a graymap next to the CSV as <out>.pgm.
    #[arg(long)]
    pub pgm: bool,
    /// Binary graymap (P5) instead of plain (P2).
    #[arg(long)]
    pub binary: bool,
}

#[derive(Debug, Args)]
pub struct IcGridArgs {
    /// Nodes per axis.
    #[arg(long, default_value_t = 500)]
    pub grid: usize,
    #[arg(long, default_value_t = 0.0)]
    pub lo: f64,
    #[arg(long, default_value_t = 1.5)]
    pub hi: f64,
}

/// `x,y` pair.
pub fn parse_state(s: &str) -> Result<PatchState, String> {
    let (x, y) = s
        .split_once(',')
        .ok_or_else(|| format!("expected x,y but got '{s}'"))?;
    let x: f64 = x
        .trim()
        .parse()
        .map_err(|e| format!("bad x in '{s}': {e}"))?;
    let y: f64 = y
        .trim()
        .parse()
        .map_err(|e| format!("bad y in '{s}': {e}"))?;
    Ok(PatchState::new(x, y))
}

#[derive(Debug, Args)]
pub struct RegimeArgs {
    #[command(flatten)]
    pub local: LocalArgs,
    /// Half-width of the semistability band around f(M) = A.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct RthArgs {
    #[arg(long = "A", default_value_t = 0.2)]
    pub a: f64,
    #[arg(long = "K", default_value_t = 1.0)]
    pub k: f64,
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct OrbitArgs {
    #[command(flatten)]
    pub cp: CoupledArgs,
    #[command(flatten)]
    pub start: StartArgs,
    #[arg(long, default_value_t = 2000)]
    pub steps: usize,
    /// First time step written.
    #[arg(long, default_value_t = 0)]
    pub record_from: usize,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct AttractorArgs {
    #[command(flatten)]
    pub cp: CoupledArgs,
    #[command(flatten)]
    pub start: StartArgs,
    #[command(flatten)]
    pub detector: DetectorArgs,
}

#[derive(Debug, Args)]
pub struct CensusArgs {
    #[command(flatten)]
    pub cp: CoupledArgs,
    /// Seed as x,y; repeatable. Defaults to six seeds spread over the
    /// four threshold quadrants.
    #[arg(long = "ic", value_parser = parse_state)]
    pub ics: Vec<PatchState>,
    /// Seeds near the periodic points of the uncoupled product map instead.
    #[arg(long, conflicts_with = "ics")]
    pub product_seeds: bool,
    /// Perturbation size for --product-seeds.
    #[arg(long, default_value_t = 1e-3)]
    pub eps: f64,
    #[command(flatten)]
    pub detector: DetectorArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct BifurcationArgs {
    #[arg(long)]
    pub d: f64,
    #[arg(long = "A", default_value_t = 0.2)]
    pub a: f64,
    #[arg(long = "K", default_value_t = 1.0)]
    pub k: f64,
    #[arg(long, default_value_t = 0.3)]
    pub r_min: f64,
    #[arg(long, default_value_t = 1.0)]
    pub r_max: f64,
    #[arg(long, default_value_t = 141)]
    pub r_count: usize,
    /// Initial condition as x,y; repeatable.
    #[arg(long = "ic", value_parser = parse_state)]
    pub ics: Vec<PatchState>,
    #[arg(long, default_value_t = 8000)]
    pub steps: usize,
    #[arg(long, default_value_t = 300)]
    pub tail: usize,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct PlaneAxesArgs {
    #[arg(long = "A", default_value_t = 0.2)]
    pub a: f64,
    #[arg(long = "K", default_value_t = 1.0)]
    pub k: f64,
    #[arg(long, default_value_t = 0.3)]
    pub r_min: f64,
    #[arg(long, default_value_t = 1.0)]
    pub r_max: f64,
    #[arg(long, default_value_t = 71)]
    pub r_count: usize,
    #[arg(long, default_value_t = 0.0)]
    pub d_min: f64,
    #[arg(long, default_value_t = 0.5)]
    pub d_max: f64,
    #[arg(long, default_value_t = 51)]
    pub d_count: usize,
}

#[derive(Debug, Args)]
pub struct PlaneArgs {
    #[command(flatten)]
    pub axes: PlaneAxesArgs,
    /// Fixed initial conditions cycled over the cells; random per cell when absent.
    #[arg(long = "ic", value_parser = parse_state)]
    pub ics: Vec<PatchState>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub detector: DetectorArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct RegionProbeArgs {
    #[command(flatten)]
    pub axes: PlaneAxesArgs,
    #[arg(long, default_value_t = 100)]
    pub n_random: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub detector: DetectorArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct BasinArgs {
    #[command(flatten)]
    pub cp: CoupledArgs,
    #[command(flatten)]
    pub grid: IcGridArgs,
    #[command(flatten)]
    pub detector: DetectorArgs,
    #[command(flatten)]
    pub out: OutArgs,
    #[command(flatten)]
    pub image: ImageArgs,
}

#[derive(Debug, Args)]
pub struct ExtTimeArgs {
    #[command(flatten)]
    pub cp: CoupledArgs,
    #[command(flatten)]
    pub grid: IcGridArgs,
    #[arg(long, default_value_t = 2000)]
    pub cap: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub extinct_tol: f64,
    #[command(flatten)]
    pub out: OutArgs,
    #[command(flatten)]
    pub image: ImageArgs,
}

#[derive(Debug, Args)]
pub struct NullclineArgs {
    #[command(flatten)]
    pub cp: CoupledArgs,
    /// 1 or 2.
    #[arg(long, default_value_t = 1)]
    pub iterate: usize,
    /// Marching nodes per axis.
    #[arg(long, default_value_t = 800)]
    pub grid: usize,
    #[arg(long, default_value_t = 0.0)]
    pub lo: f64,
    #[arg(long, default_value_t = 1.5)]
    pub hi: f64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct FixedPointArgs {
    #[command(flatten)]
    pub cp: CoupledArgs,
    #[arg(long, default_value_t = 1)]
    pub iterate: usize,
    /// Seed-search nodes per axis.
    #[arg(long, default_value_t = 301)]
    pub grid: usize,
    #[arg(long, default_value_t = 0.0)]
    pub lo: f64,
    #[arg(long, default_value_t = 1.5)]
    pub hi: f64,
    /// Extra Newton seed as x,y; repeatable.
    #[arg(long = "ic", value_parser = parse_state)]
    pub ics: Vec<PatchState>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct TransientArgs {
    #[command(flatten)]
    pub cp: CoupledArgs,
    #[command(flatten)]
    pub start: StartArgs,
    #[arg(long, default_value_t = 100_000)]
    pub cap: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub extinct_tol: f64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Write the data here instead of the recorded path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}
