//! Outer approximations of the bad set and its pullback tubes.
//!
//! At horizon `h` the bad set `B₀ = N − D` is approximated from outside by
//! the closed complement of the enumerated induced branches. Tubes pull that
//! approximation back along the orbit intervals of a good interval, and the
//! extended sets `Bₙ` add the tubes over the critical chains `T_d(c)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith::{AffineQ, ClosedUnion, IntervalQ, Rat};
use crate::error::{Error, Result};
use crate::inducer::{GoodForest, GoodInterval};
use crate::pamap::PAMap;
use crate::sample::{Sampler, SamplerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "set", content = "n")]
pub enum Level {
    /// `B₀`.
    Bad,
    /// `Bₙ`.
    Extended(usize),
    /// A tube `P_T`.
    Tube,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BadSetApprox {
    pub pieces: ClosedUnion,
    pub measure: Rat,
    pub horizon: usize,
    pub level: Level,
}

impl BadSetApprox {
    pub fn new(pieces: ClosedUnion, horizon: usize, level: Level) -> Self {
        let measure = pieces.measure();
        BadSetApprox { pieces, measure, horizon, level }
    }

    pub fn contains(&self, x: &Rat) -> bool {
        self.pieces.contains(x)
    }
}

/// Closed complement in `N` of the induced branches.
pub fn bad_set(forest: &GoodForest) -> BadSetApprox {
    let branches: Vec<&IntervalQ> = forest.branches().map(|g| &g.interval).collect();
    let pieces = ClosedUnion::complement_in(forest.phase(), branches);
    BadSetApprox::new(pieces, forest.horizon(), Level::Bad)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TubeApprox {
    pub base: GoodInterval,
    /// `f^k(T)` for `k = 0..=n`.
    pub orbit: Vec<IntervalQ>,
    /// Slice `i` lives in `f^{n−i}(T)` and maps onto slice 0 under `f^i`.
    pub slices: Vec<ClosedUnion>,
    pub union: BadSetApprox,
}

/// `P_T = ⋃_{i≤n} closure(f^{−i}(B₀ ∩ U_c) ∩ f^{n−i}(T))`.
pub fn tube(m: &PAMap, forest: &GoodForest, t: &GoodInterval) -> Result<TubeApprox> {
    tube_with(m, forest, &bad_set(forest), t)
}

fn tube_with(m: &PAMap, forest: &GoodForest, b0: &BadSetApprox, t: &GoodInterval) -> Result<TubeApprox> {
    let u_c = forest
        .nice()
        .component(&t.target)
        .ok_or_else(|| Error::Inconsistent(format!("{} is not a critical point of the neighborhood", t.target)))?;

    // orbit intervals and the affine step on each
    let mut orbit = vec![t.interval.clone()];
    let mut steps: Vec<AffineQ> = Vec::with_capacity(t.time);
    for _ in 0..t.time {
        let j = orbit.last().expect("nonempty orbit");
        let lap = m
            .lap_containing(j)
            .ok_or_else(|| Error::Inconsistent(format!("orbit interval {j} crosses a breakpoint")))?;
        let branch = m.branches()[lap].clone();
        orbit.push(branch.image(j));
        steps.push(branch);
    }
    if orbit.last() != Some(&u_c.interval) {
        return Err(Error::Inconsistent(format!("{} is not mapped onto {}", t.interval, u_c.interval)));
    }

    let slice0 = b0.pieces.intersect_interval(&u_c.interval.closure());
    let mut slices = vec![slice0];
    for i in 1..=t.time {
        let step = &steps[t.time - i];
        let prev = slices.last().expect("slice 0 exists");
        let domain = orbit[t.time - i].closure();
        let pulled = prev.pieces().iter().map(|p| step.preimage(p));
        slices.push(ClosedUnion::from_intervals(pulled).intersect_interval(&domain));
    }
    let all = slices.iter().fold(ClosedUnion::empty(), |acc, s| acc.union(s));
    let union = BadSetApprox::new(all, forest.horizon(), Level::Tube);
    Ok(TubeApprox { base: t.clone(), orbit, slices, union })
}

/// `Bₙ = B₀ ∪ ⋃_{d≤n} ⋃_c P_{T_d(c)}` over the chain entries that exist.
pub fn extended_bad(m: &PAMap, forest: &GoodForest, n: usize) -> Result<BadSetApprox> {
    let b0 = bad_set(forest);
    let mut pieces = b0.pieces.clone();
    for chain in forest.chains() {
        for &i in chain.members.iter().take(n + 1) {
            let t = tube_with(m, forest, &b0, &forest.members()[i])?;
            pieces = pieces.union(&t.union.pieces);
        }
    }
    Ok(BadSetApprox::new(pieces, forest.horizon(), Level::Extended(n)))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NearInvariance {
    pub level: Level,
    pub horizon: usize,
    pub measure: Rat,
    pub image_measure: Rat,
    /// `|f(B̂ − C_f) − B̂|`.
    pub defect: Rat,
}

/// Measures how far `f(B̂ − C_f) ⊆ B̂` fails for a finite-level set.
pub fn near_invariance_check(m: &PAMap, bhat: &BadSetApprox) -> NearInvariance {
    let images = bhat
        .pieces
        .pieces()
        .iter()
        .filter(|p| !(p.is_degenerate() && m.is_critical(p.lo())))
        .map(|p| m.image_of_interval(p));
    let image = ClosedUnion::from_intervals(images);
    NearInvariance {
        level: bhat.level,
        horizon: bhat.horizon,
        measure: bhat.measure.clone(),
        image_measure: image.measure(),
        defect: image.measure_outside(&bhat.pieces),
    }
}

/// True when the defects, ordered by horizon, never increase.
pub fn defect_nonincreasing(checks: &[NearInvariance]) -> bool {
    let mut sorted: Vec<&NearInvariance> = checks.iter().collect();
    sorted.sort_by_key(|c| c.horizon);
    sorted.windows(2).all(|w| w[1].defect <= w[0].defect)
}

/// `V_d(c) = f^{−1}(T_d(c)) ∩ U_c`, the component around `c`.
pub fn v_interval(m: &PAMap, forest: &GoodForest, c: &Rat, d: usize) -> Result<IntervalQ> {
    if !m.is_critical(c) {
        return Err(Error::NotCritical(c.clone()));
    }
    let t = forest.chain_entry(c, d)?;
    let u_c = &forest
        .nice()
        .component(c)
        .ok_or_else(|| Error::Inconsistent(format!("no component around {c}")))?
        .interval;
    let left = &m.branches()[m.lap_index(c) - 1];
    let right = &m.branches()[m.lap_index(c)];
    let pl = left.preimage(&t.interval);
    let pr = right.preimage(&t.interval);
    let lo = std::cmp::max(u_c.lo(), pl.lo()).clone();
    let hi = std::cmp::min(u_c.hi(), pr.hi()).clone();
    Ok(IntervalQ::open(lo, hi))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DInftyProfile {
    pub horizon: usize,
    /// Entry `k` is the measure of points in at least `k` enumerated good intervals.
    pub measures: Vec<Rat>,
}

impl DInftyProfile {
    /// The deepest value, an upper estimate for `|D_∞|` at this horizon.
    pub fn limit_estimate(&self) -> &Rat {
        self.measures.last().expect("k = 0 is always present")
    }
}

pub fn d_infty_profile(forest: &GoodForest, k_max: usize) -> DInftyProfile {
    // members of equal depth are pairwise disjoint, and a point lies in
    // k members exactly when it lies in one of depth k − 1
    let mut by_depth = vec![Rat::zero(); k_max];
    for g in forest.members() {
        if g.depth < k_max {
            by_depth[g.depth] = &by_depth[g.depth] + g.interval.length();
        }
    }
    let mut measures = vec![forest.phase().length()];
    measures.extend(by_depth);
    DInftyProfile { horizon: forest.horizon(), measures }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbsorbingEstimate {
    pub samples: usize,
    /// Samples whose whole tail stayed within `epsilon` of the set.
    pub retained: usize,
    pub fraction: f64,
    pub epsilon: Rat,
    pub burn: usize,
    pub tail: usize,
    pub seed: u64,
    /// Mean fraction of tail iterates inside the fattened set.
    pub mean_tail_occupancy: f64,
}

/// Half the smallest gap between pieces, or `|N|/1024` for a single piece.
pub fn default_epsilon(m: &PAMap, a: &BadSetApprox) -> Rat {
    match a.pieces.min_gap() {
        Some(g) => g / Rat::from_integer(2),
        None => m.phase().length() / Rat::from_integer(1024),
    }
}

/// Fraction of sampled orbits whose tail stays near `a`, a statistical proxy
/// for `ω(x) ⊆ A`. `epsilon` defaults to [`default_epsilon`].
pub fn absorbing_detect(
    m: &PAMap,
    a: &BadSetApprox,
    samples: usize,
    burn: usize,
    tail: usize,
    sampler: &SamplerConfig,
    epsilon: Option<Rat>,
) -> AbsorbingEstimate {
    assert!(burn >= 1 && tail >= 1, "burn and tail must be positive");
    let epsilon = epsilon.unwrap_or_else(|| default_epsilon(m, a));
    let s = Sampler::new(m, sampler.clone());
    let inside: Vec<usize> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            s.orbit(s.start(i), burn + tail)
                .skip(burn)
                .filter(|y| a.pieces.distance(y).is_some_and(|d| d <= epsilon))
                .count()
        })
        .collect();
    let retained = inside.iter().filter(|&&k| k == tail).count();
    let occupancy = inside.iter().map(|&k| k as f64 / tail as f64).sum::<f64>() / samples.max(1) as f64;
    AbsorbingEstimate {
        samples,
        retained,
        fraction: retained as f64 / samples.max(1) as f64,
        epsilon,
        burn,
        tail,
        seed: sampler.seed,
        mean_tail_occupancy: occupancy,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::q;
    use crate::inducer::enumerate_good;
    use crate::nice::{build_nice, certify_nice};
    use crate::{zoo, Budgets};

    fn tent_forest(h: usize) -> (PAMap, GoodForest) {
        let t = zoo::full_tent();
        let u = certify_nice(&t, &[(q(1, 2), IntervalQ::open(q(2, 5), q(3, 5)))], 100)
            .unwrap()
            .certified()
            .unwrap();
        let f = enumerate_good(&t, &u, h, &Budgets::default()).unwrap();
        (t, f)
    }

    #[test]
    fn bad_set_at_small_horizons() {
        let (_, f1) = tent_forest(1);
        let b = bad_set(&f1);
        assert_eq!(b.measure, q(4, 5));
        assert_eq!(b.pieces.pieces().len(), 3);
        let (_, f0) = tent_forest(0);
        assert_eq!(bad_set(&f0).measure, q(1, 1));
    }

    #[test]
    fn tube_of_a_time_one_interval() {
        let (t, f) = tent_forest(1);
        let g = f.members().iter().find(|g| g.interval == IntervalQ::open(q(1, 5), q(3, 10))).unwrap();
        let tb = tube(&t, &f, g).unwrap();
        assert_eq!(tb.slices.len(), 2);
        let u = IntervalQ::closed(q(2, 5), q(3, 5));
        assert_eq!(tb.slices[0], bad_set(&f).pieces.intersect_interval(&u));
        let halved = ClosedUnion::from_intervals(
            tb.slices[0].pieces().iter().map(|p| IntervalQ::closed(p.lo() / q(2, 1), p.hi() / q(2, 1))),
        );
        assert_eq!(tb.slices[1], halved);

        let u_c = f.members().iter().find(|g| g.time == 0).unwrap();
        let t0 = tube(&t, &f, u_c).unwrap();
        assert_eq!(t0.slices.len(), 1);
    }

    #[test]
    fn near_invariance_trivial_sets() {
        let t = zoo::full_tent();
        let all = BadSetApprox::new(ClosedUnion::from_intervals([t.phase().clone()]), 0, Level::Bad);
        assert!(near_invariance_check(&t, &all).defect.is_zero());
        let none = BadSetApprox::new(ClosedUnion::empty(), 0, Level::Bad);
        assert!(near_invariance_check(&t, &none).defect.is_zero());
    }

    #[test]
    fn profile_at_horizon_one() {
        let (_, f) = tent_forest(1);
        let p = d_infty_profile(&f, 3);
        assert_eq!(p.measures, vec![q(1, 1), q(2, 5), q(0, 1), q(0, 1)]);
    }

    #[test]
    fn chains_tubes_and_v_intervals_on_an_interior_critical_value() {
        let m = zoo::tent(q(3, 2));
        let budgets = Budgets::default();
        let u = build_nice(&m, &q(1, 4), 64, &budgets).unwrap();
        let f = enumerate_good(&m, &u, 10, &budgets).unwrap();
        let c = q(1, 2);
        let chain = f.chain(&c).unwrap();
        assert!(!chain.members.is_empty());
        let mut prev: Option<IntervalQ> = None;
        for d in 0..chain.members.len() {
            let v = v_interval(&m, &f, &c, d).unwrap();
            assert!(v.contains(&c));
            if let Some(p) = &prev {
                assert!(p.contains_interval(&v));
            }
            prev = Some(v);
        }
        let first = v_interval(&m, &f, &c, 0).unwrap();
        assert!(prev.unwrap().length() * q(10, 1) < first.length());
        assert!(matches!(v_interval(&m, &f, &c, chain.members.len()), Err(Error::MissingChainEntry { .. })));
        let levels: Vec<Rat> = (0..4).map(|n| extended_bad(&m, &f, n).unwrap().measure).collect();
        assert!(levels.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn absorbing_controls() {
        let t = zoo::full_tent();
        let all = BadSetApprox::new(ClosedUnion::from_intervals([t.phase().clone()]), 0, Level::Bad);
        let cfg = SamplerConfig::default();
        assert_eq!(absorbing_detect(&t, &all, 50, 10, 10, &cfg, None).fraction, 1.0);
        let fixed = BadSetApprox::new(ClosedUnion::from_intervals([IntervalQ::point(q(0, 1))]), 0, Level::Bad);
        assert_eq!(absorbing_detect(&t, &fixed, 200, 20, 50, &cfg, None).retained, 0);
        let again = absorbing_detect(&t, &fixed, 200, 20, 50, &cfg, None);
        assert_eq!(again, absorbing_detect(&t, &fixed, 200, 20, 50, &cfg, None));
    }
}
