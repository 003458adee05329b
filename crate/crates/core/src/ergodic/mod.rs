//! Invariant densities, orbit statistics and the coherence verdict.
//!
//! This is the only module that uses floating point: transition matrices are
//! assembled exactly, then iterated in `f64`. Sampled statistics depend only
//! on the seed and parameters, never on the worker count.

mod orbits;
mod ulam;

pub use orbits::{
    component_index, conservativity_test, ergodicity_test, ergodicity_test_from, hitting_time, ErgodicityReport,
    HittingStats, Quantiles, SPLIT_THRESHOLD,
};
pub use ulam::{refinement_gap, ulam_model, UlamModel};

use serde::{Deserialize, Serialize};

use crate::arith::{IntervalQ, Rat};
use crate::inducer::{GoodForest, MarkovVerdict, ResidualCurve};
use crate::pamap::ExpansionReport;

/// `|D ∩ W| / |W|` with `D` the union of the induced branches.
pub fn good_fill_fraction(forest: &GoodForest, w: &IntervalQ) -> Rat {
    assert!(!w.is_degenerate(), "W must have positive length");
    let covered: Rat = forest
        .branches()
        .filter_map(|g| g.interval.intersect(w))
        .map(|j| j.length())
        .sum();
    covered / w.length()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceThresholds {
    pub min_hit_fraction: f64,
    /// Largest allowed ratio of `tv` at twice the cells to `tv` at the base resolution.
    pub tv_growth: f64,
    /// Additive allowance on that bound, for flat densities.
    pub tv_slack: f64,
}

impl Default for CoherenceThresholds {
    fn default() -> Self {
        CoherenceThresholds { min_hit_fraction: 0.99, tv_growth: 1.5, tv_slack: 1e-6 }
    }
}

/// An eventually expanding map should show Markov-consistent residual decay,
/// conservative orbits and a density of stable finite variation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coherence {
    /// Smallest `k` with `|Df^k| > 1` everywhere, if found.
    pub expanding_at: Option<usize>,
    pub markov: MarkovVerdict,
    pub hit_fraction: f64,
    pub tv: f64,
    pub tv_refined: f64,
    pub tv_stable: bool,
    /// False when the map is not known to be eventually expanding; the verdict is then vacuous.
    pub applicable: bool,
    pub pass: bool,
}

pub fn coherence(
    expansion: &ExpansionReport,
    curve: &ResidualCurve,
    hits: &HittingStats,
    ulam: &UlamModel,
    ulam_refined: &UlamModel,
    thresholds: &CoherenceThresholds,
) -> Coherence {
    let tv_stable = ulam.tv.is_finite()
        && ulam_refined.tv.is_finite()
        && ulam_refined.tv <= thresholds.tv_growth * ulam.tv + thresholds.tv_slack;
    let applicable = expansion.verdict.is_some();
    let holds = curve.verdict == MarkovVerdict::ConsistentWithMarkov
        && hits.fraction >= thresholds.min_hit_fraction
        && tv_stable;
    Coherence {
        expanding_at: expansion.verdict,
        markov: curve.verdict,
        hit_fraction: hits.fraction,
        tv: ulam.tv,
        tv_refined: ulam_refined.tv,
        tv_stable,
        applicable,
        pass: !applicable || holds,
    }
}
