use std::fmt;
use std::fs;
use std::path::Path;

use affinduce_core::badset::{
    absorbing_detect, bad_set, d_infty_profile, defect_nonincreasing, extended_bad, near_invariance_check, tube,
    v_interval, AbsorbingEstimate, BadSetApprox, DInftyProfile, NearInvariance,
};
use affinduce_core::ergodic::{
    coherence, conservativity_test, ergodicity_test, ergodicity_test_from, refinement_gap, ulam_model, Coherence,
    CoherenceThresholds, ErgodicityReport, HittingStats, UlamModel,
};
use affinduce_core::inducer::{
    critical_type, enumerate_good, induced_map, residual_curve, BudgetHit, CriticalType, GoodForest,
    InducedMarkovMap, MarkovThresholds, ResidualCurve,
};
use affinduce_core::nice::{build_nice, NiceNbhd};
use affinduce_core::pamap::{ExpansionReport, MapSpec, Renormalization};
use affinduce_core::sample::{Sampler, SamplerConfig};
use affinduce_core::{Error, IntervalQ, PAMap, Rat};
use anyhow::{anyhow, Context as _};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::report::Bundle;

/// Retries of the whole construction with a halved mesh when the forest
/// comes out inconsistent.
const MESH_RETRIES: usize = 4;
const EXPANSION_DEPTH: usize = 5;
const FOREST_FILE: &str = "forest.json";

#[derive(Debug)]
pub enum Failure {
    Invalid(anyhow::Error),
    Budget(anyhow::Error),
    Gate(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => 1,
            Failure::Budget(_) => 2,
            Failure::Gate(_) => 3,
        }
    }
}

/// The error chain, skipping causes already spelled out by their parent.
fn chain(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if !out.contains(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
    }
    out
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Invalid(e) => write!(f, "{}", chain(e)),
            Failure::Budget(e) => write!(f, "budget exhausted: {}", chain(e)),
            Failure::Gate(msg) => write!(f, "{msg}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::LapBudget { .. } | Error::DigitBudget { .. } | Error::Construction(_) => Failure::Budget(e.into()),
            _ => Failure::Invalid(e.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Invalid(e)
    }
}

pub fn load_map(path: &Path) -> Result<PAMap, Failure> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let spec: MapSpec =
        serde_json::from_str(&text).map_err(|e| anyhow!("parse error in {}: {e}", path.display()))?;
    Ok(PAMap::from_spec(spec).map_err(Error::from)?)
}

#[derive(Debug, Serialize)]
pub struct Validation {
    pub valid: bool,
    pub phase: IntervalQ,
    pub breakpoints: Vec<Rat>,
    pub critical_points: Vec<Rat>,
    pub expansion: ExpansionReport,
}

pub fn validate(path: &Path) -> Result<Validation, Failure> {
    let m = load_map(path)?;
    Ok(Validation {
        valid: true,
        phase: m.phase().clone(),
        breakpoints: m.breakpoints().to_vec(),
        critical_points: m.critical_points().to_vec(),
        expansion: m.expansion_report(EXPANSION_DEPTH, 1 << 16),
    })
}

pub struct Context {
    pub map: PAMap,
    pub config: RunConfig,
    pub renormalization: Option<Renormalization>,
}

impl Context {
    /// Loads the map and applies the renormalization gate.
    pub fn open(config: RunConfig) -> Result<Self, Failure> {
        let map = load_map(Path::new(&config.spec))?;
        let renormalization = map.find_renormalization(config.renormalization_period, config.budgets.laps);
        if let Some(r) = &renormalization {
            if !config.allow_renormalizable {
                return Err(Failure::Gate(format!(
                    "renormalization detected at period {}: {} is restrictive around {} \
                     (pass --allow-renormalizable to analyze anyway)",
                    r.period, r.interval, r.critical
                )));
            }
        }
        Ok(Context { map, config, renormalization })
    }

    pub fn watermark(&self) -> Option<String> {
        self.renormalization.as_ref().map(|r| {
            format!(
                "HYPOTHESIS GATE OVERRIDDEN: the map is renormalizable (restrictive interval {} of period {})",
                r.interval, r.period
            )
        })
    }

    fn sampler(&self) -> SamplerConfig {
        SamplerConfig { seed: self.config.seed, ..SamplerConfig::default() }
    }
}

#[derive(Debug, Serialize)]
pub struct InduceReport {
    pub nice: NiceNbhd,
    /// Mesh targets tried, the last one succeeding.
    pub mesh_attempts: Vec<Rat>,
    pub horizon: usize,
    pub complete_horizon: usize,
    pub truncated: Option<BudgetHit>,
    pub members: usize,
    pub branches: usize,
    pub domain_measure: Rat,
    pub residual: Rat,
    pub curve: ResidualCurve,
    pub critical: Vec<CriticalType>,
}

pub struct Induced {
    pub forest: GoodForest,
    pub map: InducedMarkovMap,
    pub report: InduceReport,
}

#[derive(Serialize)]
struct ForestDoc<'a> {
    forest: &'a GoodForest,
}

#[derive(Deserialize)]
struct ForestFile {
    forest: GoodForest,
}

#[derive(Serialize)]
struct InducedDoc<'a> {
    induced: &'a InducedMarkovMap,
}

#[derive(Serialize)]
struct ResidualCsvRow {
    horizon: usize,
    residual: String,
    residual_approx: f64,
    branches: usize,
}

pub fn induce(ctx: &Context) -> Result<Induced, Failure> {
    let cfg = &ctx.config;
    let m = &ctx.map;
    let mut mesh = cfg.mesh_target.clone();
    let mut attempts = Vec::new();
    let (nice, forest) = loop {
        attempts.push(mesh.clone());
        let u = build_nice(m, &mesh, cfg.budgets.orbit_cap, &cfg.budgets)?;
        match enumerate_good(m, &u, cfg.horizon, &cfg.budgets) {
            Ok(f) => break (u, f),
            Err(Error::Inconsistent(_)) if attempts.len() < MESH_RETRIES => mesh = mesh / Rat::from_integer(2),
            Err(e) => return Err(e.into()),
        }
    };
    let complete = forest.complete_horizon();
    let horizons: Vec<usize> = cfg.horizons.iter().copied().filter(|&h| h <= complete).collect();
    let curve = residual_curve(&forest, &horizons, &MarkovThresholds::default())?;
    let induced = induced_map(&forest.restrict(complete));
    let critical = m
        .critical_points()
        .iter()
        .map(|c| critical_type(m, &forest, c, &cfg.budgets))
        .collect::<Result<Vec<_>, _>>()?;
    let report = InduceReport {
        nice,
        mesh_attempts: attempts,
        horizon: cfg.horizon,
        complete_horizon: complete,
        truncated: forest.truncated().cloned(),
        members: forest.members().len(),
        branches: induced.branches.len(),
        domain_measure: induced.domain_measure.clone(),
        residual: induced.residual.clone(),
        curve,
        critical,
    };
    Ok(Induced { forest, map: induced, report })
}

pub fn write_induce(bundle: &Bundle, run: &Induced) -> Result<(), Failure> {
    bundle.json(FOREST_FILE, &ForestDoc { forest: &run.forest })?;
    bundle.json("induced.json", &InducedDoc { induced: &run.map })?;
    bundle.json("verdict.json", &run.report)?;
    bundle.csv(
        "residual.csv",
        run.report.curve.rows.iter().map(|r| ResidualCsvRow {
            horizon: r.horizon,
            residual: r.residual.to_string(),
            residual_approx: r.residual.to_f64(),
            branches: r.branches,
        }),
    )?;
    budget_status(&run.forest)
}

/// Outputs are written either way; a truncated forest still fails the run.
pub fn budget_status(forest: &GoodForest) -> Result<(), Failure> {
    match forest.truncated() {
        Some(hit) => Err(Failure::Budget(anyhow!(
            "{}; outputs cover horizons up to {}",
            hit.to_error(),
            forest.complete_horizon()
        ))),
        None => Ok(()),
    }
}

/// The forest a previous `induce` left in the output directory.
pub fn load_forest(ctx: &Context) -> Result<Option<GoodForest>, Failure> {
    let path = ctx.config.out.join(FOREST_FILE);
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let file: ForestFile = serde_json::from_str(&text).map_err(|e| anyhow!("parse error in {}: {e}", path.display()))?;
    let forest = file.forest;
    forest.check()?;
    let same_map = forest.phase() == ctx.map.phase()
        && forest.nice().components().len() == ctx.map.critical_points().len()
        && forest.nice().verify(&ctx.map, ctx.config.budgets.orbit_cap)?;
    if !same_map {
        return Err(Failure::Invalid(anyhow!("{} was built for a different map", path.display())));
    }
    Ok(Some(forest))
}

#[derive(Debug, Serialize)]
pub struct TubeSummary {
    pub critical: Rat,
    pub depth: usize,
    pub base: IntervalQ,
    pub time: usize,
    pub slices: usize,
    pub measure: Rat,
    pub v_interval: IntervalQ,
}

#[derive(Debug, Serialize)]
pub struct HorizonRow {
    pub horizon: usize,
    pub measure: Rat,
    pub measure_approx: f64,
    pub pieces: usize,
    /// Evidence for zero-dimensionality: should shrink under refinement.
    pub max_piece: f64,
}

#[derive(Debug, Serialize)]
pub struct BadsetReport {
    pub horizon: usize,
    pub bad: BadSetApprox,
    pub levels: Vec<HorizonRow>,
    pub extended: BadSetApprox,
    pub tubes: Vec<TubeSummary>,
    pub near_invariance: Vec<NearInvariance>,
    pub defect_nonincreasing: bool,
    pub profile: DInftyProfile,
    pub refinement: Vec<HorizonRow>,
    pub absorbing: AbsorbingEstimate,
}

fn horizon_row(horizon: usize, b: &BadSetApprox) -> HorizonRow {
    HorizonRow {
        horizon,
        measure: b.measure.clone(),
        measure_approx: b.measure.to_f64(),
        pieces: b.pieces.pieces().len(),
        max_piece: b.pieces.max_piece_length().to_f64(),
    }
}

pub fn badset(ctx: &Context, forest: &GoodForest) -> Result<BadsetReport, Failure> {
    let cfg = &ctx.config;
    let m = &ctx.map;
    let h = forest.complete_horizon();
    let forest = forest.restrict(h);
    let bad = bad_set(&forest);

    let mut tubes = Vec::new();
    for chain in forest.chains() {
        for (d, &i) in chain.members.iter().enumerate().take(cfg.level + 1) {
            let g = &forest.members()[i];
            let t = tube(m, &forest, g)?;
            tubes.push(TubeSummary {
                critical: chain.critical.clone(),
                depth: d,
                base: g.interval.clone(),
                time: g.time,
                slices: t.slices.len(),
                measure: t.union.measure.clone(),
                v_interval: v_interval(m, &forest, &chain.critical, d)?,
            });
        }
    }

    let levels: Vec<BadSetApprox> = (0..=cfg.level).map(|n| extended_bad(m, &forest, n)).collect::<Result<_, _>>()?;
    let level_rows = levels.iter().enumerate().map(|(n, b)| horizon_row(n, b)).collect();
    let extended = levels.last().expect("level 0 always exists").clone();

    let mut near = vec![near_invariance_check(m, &extended_bad(m, &forest.restrict(h / 2), cfg.level)?)];
    near.push(near_invariance_check(m, &extended));

    let refinement = cfg
        .horizons
        .iter()
        .filter(|&&k| k <= h)
        .map(|&k| horizon_row(k, &bad_set(&forest.restrict(k))))
        .collect();

    let absorbing = absorbing_detect(m, &bad, cfg.samples, cfg.burn, cfg.tail, &ctx.sampler(), None);
    Ok(BadsetReport {
        horizon: h,
        bad,
        levels: level_rows,
        extended,
        tubes,
        defect_nonincreasing: defect_nonincreasing(&near),
        near_invariance: near,
        profile: d_infty_profile(&forest, h + 1),
        refinement,
        absorbing,
    })
}

#[derive(Serialize)]
struct ProfileRow {
    k: usize,
    measure: String,
    measure_approx: f64,
}

pub fn write_badset(bundle: &Bundle, report: &BadsetReport) -> Result<(), Failure> {
    bundle.json("badset.json", report)?;
    bundle.csv("levels.csv", &report.levels)?;
    bundle.csv("bad_refinement.csv", &report.refinement)?;
    bundle.csv(
        "profile.csv",
        report.profile.measures.iter().enumerate().map(|(k, v)| ProfileRow {
            k,
            measure: v.to_string(),
            measure_approx: v.to_f64(),
        }),
    )?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct UlamSummary {
    pub cells: usize,
    pub tv: f64,
    pub mass: f64,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

impl From<&UlamModel> for UlamSummary {
    fn from(u: &UlamModel) -> Self {
        UlamSummary {
            cells: u.cells,
            tv: u.tv,
            mass: u.mass(),
            iterations: u.iterations,
            residual: u.residual,
            converged: u.converged(),
        }
    }
}

/// Ergodicity of `f^period` with starts spread over the restrictive cycle.
#[derive(Debug, Serialize)]
pub struct CycleErgodicity {
    pub period: usize,
    pub cycle: Vec<IntervalQ>,
    pub report: ErgodicityReport,
}

#[derive(Debug, Serialize)]
pub struct ErgodicReport {
    pub ulam: UlamSummary,
    pub ulam_refined: UlamSummary,
    pub refinement_gap: f64,
    pub conservativity: HittingStats,
    pub ergodicity: ErgodicityReport,
    pub cycle_ergodicity: Option<CycleErgodicity>,
    pub coherence: Coherence,
    #[serde(skip)]
    density: Vec<(f64, f64, f64, f64)>,
}

pub fn ergodic(ctx: &Context, forest: &GoodForest) -> Result<ErgodicReport, Failure> {
    let cfg = &ctx.config;
    let m = &ctx.map;
    let sampler = ctx.sampler();
    let ulam = ulam_model(m, cfg.cells);
    let fine = ulam_model(m, 2 * cfg.cells);
    let target = forest.nice().components()[0].interval.clone();
    let hits = conservativity_test(m, &target, cfg.samples, cfg.hit_horizon, &sampler)?;
    let erg = ergodicity_test(m, cfg.erg_samples, cfg.erg_horizon, cfg.erg_cells, &sampler);

    let cycle = match &ctx.renormalization {
        Some(r) => {
            let g = m.iterate(r.period, cfg.budgets.laps)?;
            let mut pieces = vec![r.interval.clone()];
            for _ in 1..r.period {
                let next = m.image_of_interval(pieces.last().expect("nonempty"));
                pieces.push(next);
            }
            let per_piece = (cfg.erg_samples / r.period).max(1);
            let s = Sampler::new(&g, sampler.clone());
            let starts: Vec<Rat> = pieces
                .iter()
                .enumerate()
                .flat_map(|(k, j)| (0..per_piece).map(move |i| (k * per_piece + i, j)))
                .map(|(idx, j)| s.start_in(idx as u64, j))
                .collect();
            let report = ergodicity_test_from(&g, &starts, (cfg.erg_horizon / r.period).max(1), cfg.erg_cells, &sampler);
            Some(CycleErgodicity { period: r.period, cycle: pieces, report })
        }
        None => None,
    };

    let complete = forest.complete_horizon();
    let horizons: Vec<usize> = cfg.horizons.iter().copied().filter(|&h| h <= complete).collect();
    let curve = residual_curve(forest, &horizons, &MarkovThresholds::default())?;
    let expansion = m.expansion_report(EXPANSION_DEPTH, cfg.budgets.laps);
    let verdict = coherence(&expansion, &curve, &hits, &ulam, &fine, &CoherenceThresholds::default());

    let width = m.phase().length().to_f64() / cfg.cells as f64;
    let lo = m.phase().lo().to_f64();
    let projected = fine.coarsen(2);
    let density = (0..cfg.cells)
        .map(|i| (lo + width * i as f64, lo + width * (i + 1) as f64, ulam.density[i], projected[i]))
        .collect();
    Ok(ErgodicReport {
        refinement_gap: refinement_gap(&ulam, &fine),
        ulam: (&ulam).into(),
        ulam_refined: (&fine).into(),
        conservativity: hits,
        ergodicity: erg,
        cycle_ergodicity: cycle,
        coherence: verdict,
        density,
    })
}

#[derive(Serialize)]
struct DensityRow {
    cell: usize,
    lo: f64,
    hi: f64,
    density: f64,
    refined_density: f64,
}

#[derive(Serialize)]
struct CoherenceDoc<'a> {
    coherence: &'a Coherence,
}

pub fn write_ergodic(bundle: &Bundle, report: &ErgodicReport) -> Result<(), Failure> {
    bundle.json("ergodic.json", report)?;
    bundle.json("coherence.json", &CoherenceDoc { coherence: &report.coherence })?;
    bundle.csv(
        "density.csv",
        report.density.iter().enumerate().map(|(cell, &(lo, hi, density, refined_density))| DensityRow {
            cell,
            lo,
            hi,
            density,
            refined_density,
        }),
    )?;
    Ok(())
}
