//! Continuous piecewise affine self-maps of a closed interval.
//!
//! A [`PAMap`] is validated once at construction (ordering, continuity,
//! nonzero slopes, `f(N) ⊆ N`) and immutable afterwards. The critical set is
//! the set of interior breakpoints where the slope changes sign.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arith::{AffineQ, IntervalQ, Rat};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MapViolation {
    #[error("phase must be a closed nondegenerate interval")]
    Phase,
    #[error("breakpoints must start at the phase's left end, end at its right end and increase strictly")]
    BreakpointOrder,
    #[error("expected {expected} branches for the given breakpoints, found {found}")]
    BranchCount { expected: usize, found: usize },
    #[error("nonzero-slope violation: branch {lap} has slope 0")]
    ZeroSlope { lap: usize },
    #[error("continuity violation at breakpoint {at}: left value {left}, right value {right}")]
    Continuity { at: Rat, left: Rat, right: Rat },
    #[error("invariance violation: branch {lap} sends {x} to {y}, outside the phase")]
    Escapes { lap: usize, x: Rat, y: Rat },
}

/// JSON map-spec document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MapSpec {
    pub phase: IntervalQ,
    pub breakpoints: Vec<Rat>,
    pub branches: Vec<AffineQ>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PAMap {
    phase: IntervalQ,
    breakpoints: Vec<Rat>,
    branches: Vec<AffineQ>,
    critical: Vec<Rat>,
}

/// One maximal affine piece of an iterate `f^k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lap {
    /// Closed domain of the piece.
    pub domain: IntervalQ,
    pub map: AffineQ,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrbitRecord {
    pub start: Rat,
    /// `points[0] = start`, `points[i+1] = f(points[i])`; when a repeat was
    /// found the repeated point is the last entry.
    pub points: Vec<Rat>,
    pub preperiod: Option<usize>,
    pub period: Option<usize>,
}

impl OrbitRecord {
    pub fn is_closed(&self) -> bool {
        self.period.is_some()
    }

    /// Distinct points of the orbit (the full orbit once closed).
    pub fn distinct_points(&self) -> &[Rat] {
        match self.period {
            Some(_) => &self.points[..self.points.len() - 1],
            None => &self.points,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpansionRow {
    pub k: usize,
    pub laps: usize,
    pub min_abs_slope: Rat,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpansionReport {
    pub table: Vec<ExpansionRow>,
    /// First `k` with `min |Df^k| > 1`.
    pub verdict: Option<usize>,
    /// Set when the lap budget stopped the table early.
    pub truncated: bool,
}

impl ExpansionReport {
    pub fn min_for(&self, k: usize) -> Option<&Rat> {
        self.table.iter().find(|r| r.k == k).map(|r| &r.min_abs_slope)
    }
}

/// A restrictive interval: `f^period(interval) ⊆ interval`, the interval
/// contains `critical` in its interior, and the interiors of
/// `interval, f(interval), …, f^{period-1}(interval)` are pairwise disjoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Renormalization {
    pub interval: IntervalQ,
    pub period: usize,
    pub critical: Rat,
}

impl PAMap {
    pub fn new(phase: IntervalQ, breakpoints: Vec<Rat>, branches: Vec<AffineQ>) -> std::result::Result<Self, MapViolation> {
        if phase.openness() != (false, false) || phase.is_degenerate() {
            return Err(MapViolation::Phase);
        }
        let ordered = breakpoints.len() >= 2
            && breakpoints.first() == Some(phase.lo())
            && breakpoints.last() == Some(phase.hi())
            && breakpoints.windows(2).all(|w| w[0] < w[1]);
        if !ordered {
            return Err(MapViolation::BreakpointOrder);
        }
        if branches.len() + 1 != breakpoints.len() {
            return Err(MapViolation::BranchCount { expected: breakpoints.len() - 1, found: branches.len() });
        }
        if let Some(lap) = branches.iter().position(|b| b.slope.is_zero()) {
            return Err(MapViolation::ZeroSlope { lap });
        }
        for (i, w) in branches.windows(2).enumerate() {
            let at = &breakpoints[i + 1];
            let (left, right) = (w[0].apply(at), w[1].apply(at));
            if left != right {
                return Err(MapViolation::Continuity { at: at.clone(), left, right });
            }
        }
        for (lap, b) in branches.iter().enumerate() {
            for x in [&breakpoints[lap], &breakpoints[lap + 1]] {
                let y = b.apply(x);
                if !phase.contains(&y) {
                    return Err(MapViolation::Escapes { lap, x: x.clone(), y });
                }
            }
        }

        // merge breakpoints separating identical branches
        let mut bps = vec![breakpoints[0].clone()];
        let mut brs: Vec<AffineQ> = Vec::with_capacity(branches.len());
        for (i, b) in branches.into_iter().enumerate() {
            if brs.last() == Some(&b) {
                *bps.last_mut().unwrap() = breakpoints[i + 1].clone();
            } else {
                brs.push(b);
                bps.push(breakpoints[i + 1].clone());
            }
        }
        let critical = (1..brs.len())
            .filter(|&i| brs[i - 1].slope.is_positive() != brs[i].slope.is_positive())
            .map(|i| bps[i].clone())
            .collect();
        Ok(PAMap { phase, breakpoints: bps, branches: brs, critical })
    }

    /// The continuous map interpolating `values[i]` at `xs[i]`, affine in between.
    pub fn from_values(xs: &[Rat], values: &[Rat]) -> std::result::Result<Self, MapViolation> {
        if xs.len() < 2 || xs.len() != values.len() || xs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(MapViolation::BreakpointOrder);
        }
        let branches = xs
            .windows(2)
            .zip(values.windows(2))
            .map(|(x, y)| {
                let slope = (&y[1] - &y[0]) / (&x[1] - &x[0]);
                let offset = &y[0] - &slope * &x[0];
                AffineQ { slope, offset }
            })
            .collect();
        let phase = IntervalQ::closed(xs[0].clone(), xs[xs.len() - 1].clone());
        PAMap::new(phase, xs.to_vec(), branches)
    }

    pub fn from_spec(spec: MapSpec) -> std::result::Result<Self, MapViolation> {
        PAMap::new(spec.phase, spec.breakpoints, spec.branches)
    }

    pub fn spec(&self) -> MapSpec {
        MapSpec {
            phase: self.phase.clone(),
            breakpoints: self.breakpoints.clone(),
            branches: self.branches.clone(),
        }
    }

    pub fn phase(&self) -> &IntervalQ {
        &self.phase
    }

    pub fn breakpoints(&self) -> &[Rat] {
        &self.breakpoints
    }

    pub fn interior_breakpoints(&self) -> &[Rat] {
        &self.breakpoints[1..self.breakpoints.len() - 1]
    }

    pub fn branches(&self) -> &[AffineQ] {
        &self.branches
    }

    pub fn critical_points(&self) -> &[Rat] {
        &self.critical
    }

    pub fn is_critical(&self, x: &Rat) -> bool {
        self.critical.binary_search(x).is_ok()
    }

    /// Closed domain of branch `i`.
    pub fn lap_domain(&self, i: usize) -> IntervalQ {
        IntervalQ::closed(self.breakpoints[i].clone(), self.breakpoints[i + 1].clone())
    }

    pub fn laps(&self) -> Vec<Lap> {
        (0..self.branches.len())
            .map(|i| Lap { domain: self.lap_domain(i), map: self.branches[i].clone() })
            .collect()
    }

    /// Index of a branch whose closed domain contains `x` (the right-hand one
    /// at an interior breakpoint). `x` must lie in the phase.
    pub fn lap_index(&self, x: &Rat) -> usize {
        let k = self.breakpoints.partition_point(|b| b <= x);
        k.saturating_sub(1).min(self.branches.len() - 1)
    }

    /// Index of the branch whose domain contains the nondegenerate interval `j`, if any.
    pub fn lap_containing(&self, j: &IntervalQ) -> Option<usize> {
        let i = self.lap_index(&j.midpoint());
        self.lap_domain(i).contains_interval(&j.closure()).then_some(i)
    }

    pub fn eval(&self, x: &Rat) -> Result<Rat> {
        if !self.phase.contains(x) {
            return Err(Error::OutOfPhase(x.clone()));
        }
        Ok(self.apply(x))
    }

    /// `eval` without the phase check.
    pub fn apply(&self, x: &Rat) -> Rat {
        self.branches[self.lap_index(x)].apply(x)
    }

    pub fn iterate_point(&self, x: &Rat, n: usize) -> Rat {
        (0..n).fold(x.clone(), |y, _| self.apply(&y))
    }

    /// Exact image of an interval: `f` is continuous, so the image is the
    /// closed hull of the values at the endpoints and interior breakpoints.
    pub fn image_of_interval(&self, j: &IntervalQ) -> IntervalQ {
        let mut lo = self.apply(j.lo());
        let mut hi = lo.clone();
        let inner = self.breakpoints.iter().filter(|b| j.lo() < *b && *b < j.hi());
        for x in std::iter::once(j.hi()).chain(inner) {
            let y = self.apply(x);
            if y < lo {
                lo = y;
            } else if y > hi {
                hi = y;
            }
        }
        IntervalQ::closed(lo, hi)
    }

    pub fn orbit(&self, x: &Rat, cap: usize) -> Result<OrbitRecord> {
        self.orbit_with_budget(x, cap, u64::MAX)
    }

    /// Iterates until an exact repeat, `cap` steps, or a point whose digit
    /// count exceeds `digit_budget`. In the latter two cases the record is open.
    pub fn orbit_with_budget(&self, x: &Rat, cap: usize, digit_budget: u64) -> Result<OrbitRecord> {
        if !self.phase.contains(x) {
            return Err(Error::OutOfPhase(x.clone()));
        }
        let mut seen: HashMap<Rat, usize> = HashMap::new();
        let mut points = vec![x.clone()];
        seen.insert(x.clone(), 0);
        for step in 1..=cap {
            let y = self.apply(&points[step - 1]);
            if let Some(&first) = seen.get(&y) {
                points.push(y);
                return Ok(OrbitRecord {
                    start: x.clone(),
                    points,
                    preperiod: Some(first),
                    period: Some(step - first),
                });
            }
            if y.digits() > digit_budget {
                break;
            }
            seen.insert(y.clone(), step);
            points.push(y);
        }
        Ok(OrbitRecord { start: x.clone(), points, preperiod: None, period: None })
    }

    /// Refines the laps of `f^k` into the laps of `f^{k+1}`.
    pub fn refine_laps(&self, laps: &[Lap]) -> Vec<Lap> {
        laps.par_iter().flat_map_iter(|lap| self.refine_lap(lap)).collect()
    }

    fn refine_lap(&self, lap: &Lap) -> Vec<Lap> {
        let image = lap.map.image(&lap.domain);
        let inv = lap.map.invert();
        let mut cuts: Vec<Rat> = vec![lap.domain.lo().clone(), lap.domain.hi().clone()];
        cuts.extend(
            self.interior_breakpoints()
                .iter()
                .filter(|b| image.lo() < *b && *b < image.hi())
                .map(|b| inv.apply(b)),
        );
        cuts.sort();
        cuts.windows(2)
            .map(|w| {
                let domain = IntervalQ::closed(w[0].clone(), w[1].clone());
                let branch = &self.branches[self.lap_index(&lap.map.apply(&domain.midpoint()))];
                Lap { domain, map: branch.compose(&lap.map) }
            })
            .collect()
    }

    /// Maximal affine pieces of `f^k`, left to right, with composed data.
    pub fn laps_of_iterate(&self, k: usize, lap_budget: usize) -> Result<Vec<Lap>> {
        assert!(k >= 1, "laps_of_iterate needs k >= 1");
        let mut laps = self.laps();
        if laps.len() > lap_budget {
            return Err(Error::LapBudget { iterate: 1, budget: lap_budget });
        }
        for i in 2..=k {
            laps = self.refine_laps(&laps);
            if laps.len() > lap_budget {
                return Err(Error::LapBudget { iterate: i, budget: lap_budget });
            }
        }
        Ok(laps)
    }

    /// `f^k` as a map in its own right.
    pub fn iterate(&self, k: usize, lap_budget: usize) -> Result<PAMap> {
        let laps = self.laps_of_iterate(k, lap_budget)?;
        let mut bps: Vec<Rat> = laps.iter().map(|l| l.domain.lo().clone()).collect();
        bps.push(self.phase.hi().clone());
        Ok(PAMap::new(self.phase.clone(), bps, laps.into_iter().map(|l| l.map).collect())?)
    }

    pub fn expansion_report(&self, k_max: usize, lap_budget: usize) -> ExpansionReport {
        let mut table = Vec::new();
        let mut verdict = None;
        let mut truncated = false;
        let mut laps = self.laps();
        for k in 1..=k_max {
            if k > 1 {
                laps = self.refine_laps(&laps);
            }
            if laps.len() > lap_budget {
                truncated = true;
                break;
            }
            let min_abs_slope = laps.iter().map(|l| l.map.slope.abs()).min().expect("at least one lap");
            if verdict.is_none() && min_abs_slope > Rat::one() {
                verdict = Some(k);
            }
            table.push(ExpansionRow { k, laps: laps.len(), min_abs_slope });
        }
        ExpansionReport { table, verdict, truncated }
    }

    /// Searches periods `2..=p_max` for a restrictive interval around a
    /// critical point. Candidates are built from the two laps of `f^p`
    /// adjacent to the critical point: the union of those laps, and every
    /// interval bounded by a fixed point of `f^p` in one lap and its
    /// same-value partner in the other. `None` is not a proof that the map
    /// is non-renormalizable.
    pub fn find_renormalization(&self, p_max: usize, lap_budget: usize) -> Option<Renormalization> {
        let mut laps = self.laps();
        for p in 1..=p_max {
            if p > 1 {
                laps = self.refine_laps(&laps);
            }
            if laps.len() > lap_budget {
                return None;
            }
            if p < 2 {
                continue;
            }
            for c in &self.critical {
                for j in self.restrictive_candidates(&laps, c) {
                    if self.is_restrictive(&j, c, p) {
                        return Some(Renormalization { interval: j, period: p, critical: c.clone() });
                    }
                }
            }
        }
        None
    }

    fn restrictive_candidates(&self, laps: &[Lap], c: &Rat) -> Vec<IntervalQ> {
        let i = laps.partition_point(|l| l.domain.hi() <= c);
        if i == 0 || i >= laps.len() || laps[i].domain.lo() != c {
            return Vec::new();
        }
        let (left, right) = (&laps[i - 1], &laps[i]);
        let mut out = vec![IntervalQ::closed(left.domain.lo().clone(), right.domain.hi().clone())];
        for (own, other) in [(left, right), (right, left)] {
            let one = Rat::one();
            if own.map.slope == one {
                continue;
            }
            // fixed point of the lap's affine data
            let fixed = &own.map.offset / (one - &own.map.slope);
            if !own.domain.contains(&fixed) || &fixed == c {
                continue;
            }
            let partner = other.map.invert().apply(&fixed);
            if !other.domain.contains(&partner) || &partner == c {
                continue;
            }
            let (lo, hi) = if fixed < partner { (fixed, partner) } else { (partner, fixed) };
            out.push(IntervalQ::closed(lo, hi));
        }
        out
    }

    /// Exact check of the restrictive-interval conditions for `j` at period `p`.
    pub fn is_restrictive(&self, j: &IntervalQ, c: &Rat, p: usize) -> bool {
        if !(j.lo() < c && c < j.hi()) || (j.lo() == self.phase.lo() && j.hi() == self.phase.hi()) {
            return false;
        }
        let mut orbit = vec![j.clone()];
        for _ in 0..p {
            let next = self.image_of_interval(orbit.last().unwrap());
            orbit.push(next);
        }
        if !j.contains_interval(&orbit[p]) {
            return false;
        }
        let interiors: Vec<Option<IntervalQ>> = orbit[..p].iter().map(|k| k.interior()).collect();
        for a in 0..p {
            for b in a + 1..p {
                if let (Some(x), Some(y)) = (&interiors[a], &interiors[b]) {
                    if !x.is_disjoint(y) {
                        return false;
                    }
                }
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::q;
    use crate::zoo;

    const BUDGET: usize = 1 << 20;

    #[test]
    fn eval_examples() {
        let t = zoo::full_tent();
        assert_eq!(t.eval(&q(1, 4)).unwrap(), q(1, 2));
        assert_eq!(t.eval(&q(1, 2)).unwrap(), q(1, 1));
        assert_eq!(t.eval(&q(2, 5)).unwrap(), q(4, 5));
        assert!(matches!(t.eval(&q(3, 2)), Err(Error::OutOfPhase(_))));
    }

    #[test]
    fn orbit_examples() {
        let t = zoo::full_tent();
        let o = t.orbit(&q(2, 5), 100).unwrap();
        assert_eq!((o.preperiod, o.period), (Some(0), Some(2)));
        assert_eq!(o.points, vec![q(2, 5), q(4, 5), q(2, 5)]);
        let o = t.orbit(&q(0, 1), 100).unwrap();
        assert_eq!((o.preperiod, o.period), (Some(0), Some(1)));
        let o = t.orbit(&q(1, 7), 100).unwrap();
        assert_eq!((o.preperiod, o.period), (Some(1), Some(3)));
        assert_eq!(o.points, vec![q(1, 7), q(2, 7), q(4, 7), q(6, 7), q(2, 7)]);
        assert_eq!(o.distinct_points().len(), 4);
    }

    #[test]
    fn orbit_cap_leaves_record_open() {
        let t = zoo::tent(q(3, 2));
        let o = t.orbit(&q(1, 3), 5).unwrap();
        assert!(!o.is_closed());
        assert_eq!(o.points.len(), 6);
    }

    #[test]
    fn validation_names_the_violation() {
        let phase = IntervalQ::closed(q(0, 1), q(1, 1));
        let bps = vec![q(0, 1), q(1, 2), q(1, 1)];
        let broken = PAMap::new(
            phase.clone(),
            bps.clone(),
            vec![AffineQ { slope: q(2, 1), offset: q(0, 1) }, AffineQ { slope: q(-2, 1), offset: q(9, 5) }],
        );
        assert!(matches!(broken, Err(MapViolation::Continuity { .. })));
        let flat = PAMap::new(
            phase.clone(),
            bps.clone(),
            vec![AffineQ { slope: q(0, 1), offset: q(1, 2) }, AffineQ { slope: q(-1, 1), offset: q(1, 1) }],
        );
        assert_eq!(flat.unwrap_err(), MapViolation::ZeroSlope { lap: 0 });
        let escapes = PAMap::new(
            phase,
            bps,
            vec![AffineQ { slope: q(3, 1), offset: q(0, 1) }, AffineQ { slope: q(-3, 1), offset: q(3, 1) }],
        );
        assert!(matches!(escapes, Err(MapViolation::Escapes { .. })));
    }

    #[test]
    fn redundant_breakpoints_merge() {
        let m = PAMap::from_values(&[q(0, 1), q(1, 4), q(1, 2), q(1, 1)], &[q(0, 1), q(1, 2), q(1, 1), q(0, 1)]).unwrap();
        assert_eq!(m.breakpoints(), &[q(0, 1), q(1, 2), q(1, 1)]);
        assert_eq!(m, zoo::full_tent());
    }

    #[test]
    fn critical_set() {
        assert_eq!(zoo::full_tent().critical_points(), &[q(1, 2)]);
        assert_eq!(zoo::bimodal().critical_points(), &[q(1, 4), q(3, 4)]);
        assert_eq!(zoo::bimodal().interior_breakpoints().len(), 3);
    }

    #[test]
    fn laps_of_tent_iterates() {
        let t = zoo::full_tent();
        assert_eq!(t.laps_of_iterate(1, BUDGET).unwrap().len(), 2);
        let l2 = t.laps_of_iterate(2, BUDGET).unwrap();
        assert_eq!(l2.len(), 4);
        assert!(l2.iter().all(|l| l.map.slope.abs() == q(4, 1)));
        assert_eq!(l2[1].domain, IntervalQ::closed(q(1, 4), q(1, 2)));
        assert_eq!(t.laps_of_iterate(3, BUDGET).unwrap().len(), 8);
        assert!(matches!(t.laps_of_iterate(4, 10), Err(Error::LapBudget { iterate: 4, .. })));
    }

    #[test]
    fn expansion_examples() {
        let r = zoo::full_tent().expansion_report(3, BUDGET);
        assert_eq!(r.verdict, Some(1));
        assert_eq!(r.min_for(1), Some(&q(2, 1)));
        let r = zoo::tent(q(6, 5)).expansion_report(3, BUDGET);
        assert_eq!(r.verdict, Some(1));
        assert_eq!(r.min_for(1), Some(&q(6, 5)));
        let r = zoo::eventually_expanding().expansion_report(3, BUDGET);
        assert_eq!(r.min_for(1), Some(&q(1, 2)));
        assert_eq!(r.min_for(2), Some(&q(2, 1)));
        assert_eq!(r.verdict, Some(2));
        assert!(!r.truncated);
        assert!(zoo::full_tent().expansion_report(6, 20).truncated);
    }

    #[test]
    fn renormalization_detection() {
        assert_eq!(zoo::full_tent().find_renormalization(8, BUDGET), None);
        let r = zoo::tent(q(13, 10)).find_renormalization(2, BUDGET).expect("period-2 restrictive interval");
        assert_eq!(r.period, 2);
        assert_eq!(r.interval, IntervalQ::closed(q(10, 23), q(13, 23)));
    }

    #[test]
    fn iterate_agrees_with_repeated_eval() {
        let m = zoo::bimodal();
        let m3 = m.iterate(3, BUDGET).unwrap();
        for k in 0..=40 {
            let x = q(k, 40);
            assert_eq!(m3.apply(&x), m.iterate_point(&x, 3));
        }
    }

    #[test]
    fn image_of_interval_covers_turning_points() {
        let t = zoo::full_tent();
        assert_eq!(t.image_of_interval(&IntervalQ::closed(q(1, 4), q(3, 4))), IntervalQ::closed(q(1, 2), q(1, 1)));
        assert_eq!(t.image_of_interval(&IntervalQ::closed(q(0, 1), q(1, 4))), IntervalQ::closed(q(0, 1), q(1, 2)));
    }

    #[test]
    fn spec_json_round_trip() {
        let m = zoo::skew_tent_3();
        let s = serde_json::to_string(&m.spec()).unwrap();
        assert!(s.contains(r#""slope":"-3/2""#));
        let back = PAMap::from_spec(serde_json::from_str(&s).unwrap()).unwrap();
        assert_eq!(back, m);
    }
}
