use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith::{IntervalQ, Rat};
use crate::badset::{default_epsilon, BadSetApprox};
use crate::error::{Error, Result};
use crate::pamap::PAMap;
use crate::sample::{Sampler, SamplerConfig};

/// Pairwise L1 distance above which two empirical measures are taken to
/// come from different ergodic components.
pub const SPLIT_THRESHOLD: f64 = 0.5;

/// First `k ≤ horizon` with `f^k(x) ∈ target`.
pub fn hitting_time(sampler: &Sampler<'_>, x: Rat, target: &IntervalQ, horizon: usize) -> Option<usize> {
    sampler.orbit(x, horizon + 1).position(|y| target.contains(&y))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub p50: usize,
    pub p90: usize,
    pub p99: usize,
    pub max: usize,
}

impl Quantiles {
    fn of(mut xs: Vec<usize>) -> Option<Self> {
        if xs.is_empty() {
            return None;
        }
        xs.sort_unstable();
        let at = |p: f64| xs[((xs.len() - 1) as f64 * p).round() as usize];
        Some(Quantiles { p50: at(0.5), p90: at(0.9), p99: at(0.99), max: xs[xs.len() - 1] })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HittingStats {
    pub target: IntervalQ,
    pub samples: usize,
    pub horizon: usize,
    pub seed: u64,
    pub hits: usize,
    pub fraction: f64,
    /// Hitting times over the samples that hit.
    pub quantiles: Option<Quantiles>,
}

/// Fraction of seeded sample orbits entering `target` within `horizon` steps.
pub fn conservativity_test(
    m: &PAMap,
    target: &IntervalQ,
    samples: usize,
    horizon: usize,
    config: &SamplerConfig,
) -> Result<HittingStats> {
    if target.is_degenerate() {
        return Err(Error::Inconsistent(format!("target {target} has zero length")));
    }
    let s = Sampler::new(m, config.clone());
    let times: Vec<Option<usize>> = (0..samples as u64)
        .into_par_iter()
        .map(|i| hitting_time(&s, s.start(i), target, horizon))
        .collect();
    let hit: Vec<usize> = times.into_iter().flatten().collect();
    Ok(HittingStats {
        target: target.clone(),
        samples,
        horizon,
        seed: config.seed,
        hits: hit.len(),
        fraction: hit.len() as f64 / samples.max(1) as f64,
        quantiles: Quantiles::of(hit),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgodicityReport {
    pub starts: Vec<Rat>,
    pub horizon: usize,
    pub cells: usize,
    /// Empirical cell-visit frequencies of `f(x), …, f^horizon(x)` per start.
    pub frequencies: Vec<Vec<f64>>,
    /// Fraction of cells visited by each start.
    pub coverage: Vec<f64>,
    pub max_l1: f64,
    /// Some pair of starts sits further apart than [`SPLIT_THRESHOLD`].
    pub split_suspected: bool,
}

pub fn ergodicity_test(m: &PAMap, samples: usize, horizon: usize, cells: usize, config: &SamplerConfig) -> ErgodicityReport {
    let s = Sampler::new(m, config.clone());
    let starts: Vec<Rat> = (0..samples as u64).map(|i| s.start(i)).collect();
    ergodicity_test_from(m, &starts, horizon, cells, config)
}

/// [`ergodicity_test`] from chosen starting points.
pub fn ergodicity_test_from(
    m: &PAMap,
    starts: &[Rat],
    horizon: usize,
    cells: usize,
    config: &SamplerConfig,
) -> ErgodicityReport {
    assert!(cells >= 1 && horizon >= 1, "need at least one cell and one step");
    let s = Sampler::new(m, config.clone());
    let lo = m.phase().lo().to_f64();
    let width = m.phase().length().to_f64();
    let frequencies: Vec<Vec<f64>> = starts
        .par_iter()
        .map(|x| {
            let mut counts = vec![0usize; cells];
            for y in s.orbit(x.clone(), horizon + 1).skip(1) {
                let k = (((y.to_f64() - lo) / width) * cells as f64).floor();
                counts[(k.max(0.0) as usize).min(cells - 1)] += 1;
            }
            counts.into_iter().map(|c| c as f64 / horizon as f64).collect()
        })
        .collect();
    let coverage = frequencies
        .iter()
        .map(|f| f.iter().filter(|v| **v > 0.0).count() as f64 / cells as f64)
        .collect();
    let mut max_l1: f64 = 0.0;
    for (i, a) in frequencies.iter().enumerate() {
        for b in &frequencies[i + 1..] {
            let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum();
            max_l1 = max_l1.max(d);
        }
    }
    ErgodicityReport {
        starts: starts.to_vec(),
        horizon,
        cells,
        frequencies,
        coverage,
        max_l1,
        split_suspected: max_l1 > SPLIT_THRESHOLD,
    }
}

/// Smallest level whose fattened set holds the whole observed tail of `x`.
///
/// Each level is fattened by its [`default_epsilon`]. Only forward orbits
/// are observed.
pub fn component_index(
    m: &PAMap,
    x: &Rat,
    family: &[BadSetApprox],
    burn: usize,
    tail: usize,
    config: &SamplerConfig,
) -> Option<usize> {
    let s = Sampler::new(m, config.clone());
    let observed: Vec<Rat> = s.orbit(x.clone(), burn + tail).skip(burn).collect();
    family.iter().position(|a| {
        let eps = default_epsilon(m, a);
        observed
            .iter()
            .all(|y| a.pieces.distance(y).is_some_and(|d| d <= eps))
    })
}
