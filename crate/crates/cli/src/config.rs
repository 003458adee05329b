use std::path::PathBuf;

use affinduce_core::{Budgets, Rat};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "affinduce", version, about = "Induced Markov maps of piecewise affine interval maps")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a map spec, check it and print its critical set.
    Validate { spec: PathBuf },
    /// Build a nice neighborhood, enumerate good intervals and judge residual decay.
    Induce(RunArgs),
    /// Bad-set approximations, tubes, near-invariance and absorbing-set detection.
    Badset(RunArgs),
    /// Ulam densities, conservativity, ergodicity and the coherence verdict.
    Ergodic(RunArgs),
    /// induce, badset and ergodic in sequence.
    All(RunArgs),
}

fn parse_rat(s: &str) -> Result<Rat, String> {
    let r: Rat = s.parse().map_err(|e| format!("{e}"))?;
    if r.is_positive() {
        Ok(r)
    } else {
        Err(format!("{s} must be positive"))
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Map spec (JSON).
    pub spec: PathBuf,
    /// Largest allowed component length of the nice neighborhood.
    #[arg(long, default_value = "1/4", value_parser = parse_rat)]
    pub mesh: Rat,
    #[arg(long, default_value_t = 12)]
    pub horizon: usize,
    #[arg(long, default_value_t = 64)]
    pub cells: usize,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long, default_value_t = 24301)]
    pub seed: u64,
    #[arg(long, default_value_t = 1 << 20)]
    pub lap_budget: usize,
    #[arg(long, default_value_t = 400)]
    pub digit_budget: u64,
    #[arg(long, default_value_t = 10_000)]
    pub orbit_cap: usize,
    /// Steps allowed for conservativity hits.
    #[arg(long, default_value_t = 1000)]
    pub hit_horizon: usize,
    /// Orbits compared by the ergodicity test.
    #[arg(long, default_value_t = 8)]
    pub erg_samples: usize,
    /// Orbit length for the ergodicity test.
    #[arg(long, default_value_t = 100_000)]
    pub erg_horizon: usize,
    #[arg(long, default_value_t = 32)]
    pub erg_cells: usize,
    /// Discarded iterates before an orbit tail is observed.
    #[arg(long, default_value_t = 100)]
    pub burn: usize,
    #[arg(long, default_value_t = 100)]
    pub tail: usize,
    #[arg(long, env = "AFFINDUCE_OUT", default_value = "affinduce-out")]
    pub out: PathBuf,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Analyze maps with a restrictive interval instead of rejecting them.
    #[arg(long)]
    pub allow_renormalizable: bool,
    /// Let badset compute a fresh forest when none is on disk.
    #[arg(long)]
    pub induce_first: bool,
}

/// Effective configuration, echoed into every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub spec: String,
    pub command: String,
    pub mesh_target: Rat,
    pub horizon: usize,
    pub cells: usize,
    pub samples: usize,
    pub seed: u64,
    pub budgets: Budgets,
    pub hit_horizon: usize,
    pub erg_samples: usize,
    pub erg_horizon: usize,
    pub erg_cells: usize,
    pub burn: usize,
    pub tail: usize,
    pub allow_renormalizable: bool,
    pub induce_first: bool,
    /// Residual-curve horizons, `2..=horizon` (or just `horizon` when smaller).
    pub horizons: Vec<usize>,
    /// Deepest chain level `n` of the extended bad sets.
    pub level: usize,
    /// Periods searched for a restrictive interval.
    pub renormalization_period: usize,
    #[serde(skip)]
    pub out: PathBuf,
}

impl RunConfig {
    pub fn new(command: &str, a: &RunArgs) -> Self {
        let horizons = if a.horizon >= 2 { (2..=a.horizon).collect() } else { vec![a.horizon] };
        RunConfig {
            spec: a.spec.display().to_string(),
            command: command.to_string(),
            mesh_target: a.mesh.clone(),
            horizon: a.horizon,
            cells: a.cells,
            samples: a.samples,
            seed: a.seed,
            budgets: Budgets { laps: a.lap_budget, digits: a.digit_budget, orbit_cap: a.orbit_cap },
            hit_horizon: a.hit_horizon,
            erg_samples: a.erg_samples,
            erg_horizon: a.erg_horizon,
            erg_cells: a.erg_cells,
            burn: a.burn,
            tail: a.tail,
            allow_renormalizable: a.allow_renormalizable,
            induce_first: a.induce_first,
            horizons,
            level: 4,
            renormalization_period: 8,
            out: a.out.clone(),
        }
    }
}
