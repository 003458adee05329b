//! Nice neighborhoods of the critical set.
//!
//! `U = ⋃ U_c` is nice when no boundary point of any `U_c` ever returns
//! into `U` under forward iteration. Boundary points are taken preperiodic so
//! the check closes after finitely many exact steps; the orbit records are
//! kept as certificates and serialized with the neighborhood.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::arith::{IntervalQ, Rat};
use crate::error::{Error, Result};
use crate::pamap::{OrbitRecord, PAMap};
use crate::Budgets;

/// Orbit of `f(point)` for a boundary point of some `U_c`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryCertificate {
    pub point: Rat,
    pub orbit: OrbitRecord,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NiceComponent {
    pub critical: Rat,
    pub interval: IntervalQ,
    pub certificates: Vec<BoundaryCertificate>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NiceNbhd {
    components: Vec<NiceComponent>,
    mesh: Rat,
}

/// Outcome of [`certify_nice`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NiceCheck {
    Certified(NiceNbhd),
    /// `f^step(boundary)` lands at `landing ∈ U`.
    Counterexample { boundary: Rat, step: usize, landing: Rat },
    /// The boundary orbit neither cycled nor entered `U` within the cap.
    Unknown { boundary: Rat },
}

impl NiceCheck {
    pub fn certified(self) -> Option<NiceNbhd> {
        match self {
            NiceCheck::Certified(u) => Some(u),
            _ => None,
        }
    }
}

impl NiceNbhd {
    pub fn components(&self) -> &[NiceComponent] {
        &self.components
    }

    pub fn mesh(&self) -> &Rat {
        &self.mesh
    }

    pub fn intervals(&self) -> impl Iterator<Item = &IntervalQ> {
        self.components.iter().map(|c| &c.interval)
    }

    pub fn component(&self, critical: &Rat) -> Option<&NiceComponent> {
        self.components.iter().find(|c| &c.critical == critical)
    }

    /// Index of the component containing `x`.
    pub fn component_of(&self, x: &Rat) -> Option<usize> {
        self.components.iter().position(|c| c.interval.contains(x))
    }

    pub fn contains(&self, x: &Rat) -> bool {
        self.component_of(x).is_some()
    }

    pub fn measure(&self) -> Rat {
        self.components.iter().map(|c| c.interval.length()).sum()
    }

    /// Re-runs the certification from scratch.
    pub fn verify(&self, m: &PAMap, cap: usize) -> Result<bool> {
        let parts: Vec<(Rat, IntervalQ)> =
            self.components.iter().map(|c| (c.critical.clone(), c.interval.clone())).collect();
        Ok(matches!(certify_nice(m, &parts, cap)?, NiceCheck::Certified(ref u) if u == self))
    }
}

fn check_shape(m: &PAMap, parts: &[(Rat, IntervalQ)]) -> Result<()> {
    let crit = m.critical_points();
    if parts.len() != crit.len() || parts.iter().zip(crit).any(|((c, _), k)| c != k) {
        return Err(Error::Inconsistent("one component per critical point, in increasing order".into()));
    }
    for (c, u) in parts {
        if u.openness() != (true, true) || !u.contains(c) || !m.phase().contains_interval(u) {
            return Err(Error::Inconsistent(format!("component {u} must be an open subinterval of the phase around {c}")));
        }
        if let Some(b) = m.interior_breakpoints().iter().find(|b| *b != c && u.contains(b)) {
            return Err(Error::Inconsistent(format!("component {u} contains the breakpoint {b}")));
        }
    }
    if parts.windows(2).any(|w| !w[0].1.is_disjoint(&w[1].1)) {
        return Err(Error::Inconsistent("components must be pairwise disjoint".into()));
    }
    Ok(())
}

/// Certifies `U` given as `(critical point, open interval)` pairs, sorted by
/// critical point. Each boundary orbit gets at most `cap` steps.
pub fn certify_nice(m: &PAMap, parts: &[(Rat, IntervalQ)], cap: usize) -> Result<NiceCheck> {
    check_shape(m, parts)?;
    let in_u = |x: &Rat| parts.iter().any(|(_, u)| u.contains(x));
    let mut components = Vec::with_capacity(parts.len());
    for (c, u) in parts {
        let mut certificates = Vec::with_capacity(2);
        for b in [u.lo(), u.hi()] {
            if cap == 0 {
                return Ok(NiceCheck::Unknown { boundary: b.clone() });
            }
            let orbit = m.orbit(&m.apply(b), cap - 1)?;
            if let Some((i, y)) = orbit.distinct_points().iter().enumerate().find(|(_, y)| in_u(y)) {
                return Ok(NiceCheck::Counterexample { boundary: b.clone(), step: i + 1, landing: y.clone() });
            }
            if !orbit.is_closed() {
                return Ok(NiceCheck::Unknown { boundary: b.clone() });
            }
            certificates.push(BoundaryCertificate { point: b.clone(), orbit });
        }
        components.push(NiceComponent { critical: c.clone(), interval: u.clone(), certificates });
    }
    let mesh = components.iter().map(|c| c.interval.length()).max().unwrap_or_else(Rat::zero);
    Ok(NiceCheck::Certified(NiceNbhd { components, mesh }))
}

/// Longest period searched for periodic anchor points.
const MAX_PERIOD: usize = 4;
/// Deepest preimage level searched.
const MAX_PREIMAGE_DEPTH: usize = 8;
/// Cap on the anchor-point pool.
const POINT_POOL: usize = 4_000;
/// Per-critical-point candidates kept for the joint search.
const PER_CRITICAL: usize = 48;
const WINDOW_HALVINGS: usize = 6;

/// Exactly detected periodic points of periods `1..=max_period`.
pub fn periodic_points(m: &PAMap, max_period: usize, lap_budget: usize) -> BTreeSet<Rat> {
    let mut out = BTreeSet::new();
    let mut laps = m.laps();
    for p in 1..=max_period {
        if p > 1 {
            laps = m.refine_laps(&laps);
        }
        if laps.len() > lap_budget {
            break;
        }
        for lap in &laps {
            let one = Rat::one();
            if lap.map.slope == one {
                continue;
            }
            let x = &lap.map.offset / (&one - &lap.map.slope);
            if lap.domain.contains(&x) {
                out.insert(x);
            }
        }
    }
    out
}

/// All `x` with `f(x) = y`.
pub fn preimages(m: &PAMap, y: &Rat) -> Vec<Rat> {
    m.branches()
        .iter()
        .enumerate()
        .filter_map(|(i, b)| {
            let x = b.invert().apply(y);
            m.lap_domain(i).contains(&x).then_some(x)
        })
        .collect()
}

/// Periodic points and their iterated preimages, in breadth-first order,
/// up to `depth` levels and `limit` points.
fn anchor_points(m: &PAMap, depth: usize, period: usize, limit: usize, lap_budget: usize) -> BTreeSet<Rat> {
    let mut all = periodic_points(m, period, lap_budget);
    let mut frontier: Vec<Rat> = all.iter().cloned().collect();
    for _ in 0..depth {
        let mut next = Vec::new();
        for y in &frontier {
            for x in preimages(m, y) {
                if all.len() >= limit {
                    return all;
                }
                if all.insert(x.clone()) {
                    next.push(x);
                }
            }
        }
        frontier = next;
    }
    all
}

struct Anchor {
    point: Rat,
    /// Nearest points of the boundary orbit strictly below and above the anchor.
    below: Option<Rat>,
    above: Option<Rat>,
    orbit: Vec<Rat>,
}

fn anchor(m: &PAMap, point: Rat, cap: usize) -> Option<Anchor> {
    if cap == 0 {
        return None;
    }
    let orbit = m.orbit(&m.apply(&point), cap - 1).ok()?;
    if !orbit.is_closed() {
        return None;
    }
    let pts = orbit.distinct_points().to_vec();
    let below = pts.iter().filter(|y| *y < &point).max().cloned();
    let above = pts.iter().filter(|y| *y > &point).min().cloned();
    Some(Anchor { point, below, above, orbit: pts })
}

/// Searches for a certified nice neighborhood with `mesh ≤ mesh_target`.
///
/// Candidates are preperiodic anchor points (preimages of exactly detected
/// periodic points, search depth bounded by `cap`); for each critical point the
/// certified pairs are ranked longest first, ties broken by left then right
/// endpoint, and the first jointly certified combination wins.
pub fn build_nice(m: &PAMap, mesh_target: &Rat, cap: usize, budgets: &Budgets) -> Result<NiceNbhd> {
    if !mesh_target.is_positive() {
        return Err(Error::Construction("mesh target must be positive".into()));
    }
    let crit = m.critical_points();
    if crit.is_empty() {
        return Err(Error::Construction("the map has no critical points".into()));
    }
    let depth = cap.min(MAX_PREIMAGE_DEPTH);
    let period = cap.min(MAX_PERIOD);
    let pool = anchor_points(m, depth, period, POINT_POOL, budgets.laps);

    // long components tend to swallow each other's boundary orbits; shrink and retry
    let mut window = mesh_target.clone();
    let mut last = None;
    for _ in 0..WINDOW_HALVINGS {
        match search_window(m, &pool, &window, cap) {
            Ok(u) => return Ok(u),
            Err(e) => last = Some(e),
        }
        window = &window / Rat::from_integer(2);
    }
    Err(last.expect("at least one window is searched"))
}

fn search_window(m: &PAMap, pool: &BTreeSet<Rat>, mesh_target: &Rat, cap: usize) -> Result<NiceNbhd> {
    let crit = m.critical_points();
    let interior = m.interior_breakpoints();
    let mut per_critical: Vec<Vec<(IntervalQ, Vec<Rat>)>> = Vec::with_capacity(crit.len());
    for c in crit {
        // U_c may not reach past the neighboring breakpoints
        let floor = interior.iter().filter(|b| *b < c).max().unwrap_or(m.phase().lo());
        let ceil = interior.iter().filter(|b| *b > c).min().unwrap_or(m.phase().hi());
        let lo_bound = std::cmp::max(floor.clone(), c - mesh_target);
        let hi_bound = std::cmp::min(ceil.clone(), c + mesh_target);
        let lefts: Vec<Anchor> = pool
            .range(lo_bound..c.clone())
            .filter_map(|x| anchor(m, x.clone(), cap))
            .collect();
        let rights: Vec<Anchor> = pool
            .range((std::ops::Bound::Excluded(c.clone()), std::ops::Bound::Included(hi_bound)))
            .filter_map(|x| anchor(m, x.clone(), cap))
            .collect();
        let mut pairs: Vec<(Rat, usize, usize)> = Vec::new();
        for (i, l) in lefts.iter().enumerate() {
            // no orbit point of l may fall inside (l, r)
            let limit = match &l.above {
                Some(a) => std::cmp::min(a.clone(), &l.point + mesh_target),
                None => &l.point + mesh_target,
            };
            let end = rights.partition_point(|r| r.point <= limit);
            let mut kept = 0;
            for k in (0..end).rev() {
                let r = &rights[k];
                if r.below.as_ref().is_none_or(|b| b <= &l.point) {
                    pairs.push((&r.point - &l.point, i, k));
                    kept += 1;
                    if kept == PER_CRITICAL {
                        break;
                    }
                }
            }
        }
        pairs.sort_by(|a, b| {
            b.0.cmp(&a.0)
                .then(lefts[a.1].point.cmp(&lefts[b.1].point))
                .then(rights[a.2].point.cmp(&rights[b.2].point))
        });
        let ranked: Vec<(IntervalQ, Vec<Rat>)> = pairs
            .into_iter()
            .take(PER_CRITICAL)
            .map(|(_, i, k)| {
                let u = IntervalQ::open(lefts[i].point.clone(), rights[k].point.clone());
                let mut orbit = lefts[i].orbit.clone();
                orbit.extend(rights[k].orbit.iter().cloned());
                (u, orbit)
            })
            .collect();
        if ranked.is_empty() {
            return Err(Error::Construction(format!(
                "no certified candidate around {c} (mesh target {mesh_target}, cap {cap})"
            )));
        }
        per_critical.push(ranked);
    }

    let chosen = joint_search(&per_critical).ok_or_else(|| {
        Error::Construction(format!("no jointly certified combination (mesh target {mesh_target}, cap {cap})"))
    })?;
    let parts: Vec<(Rat, IntervalQ)> = crit.iter().cloned().zip(chosen).collect();
    match certify_nice(m, &parts, cap)? {
        NiceCheck::Certified(u) => Ok(u),
        other => Err(Error::Construction(format!("re-certification failed: {other:?}"))),
    }
}

/// First index tuple (lexicographic) whose components are disjoint and whose
/// boundary orbits avoid every component.
fn joint_search(per_critical: &[Vec<(IntervalQ, Vec<Rat>)>]) -> Option<Vec<IntervalQ>> {
    const MAX_COMBINATIONS: usize = 1 << 16;
    let n = per_critical.len();
    let mut idx = vec![0usize; n];
    for _ in 0..MAX_COMBINATIONS {
        let picked: Vec<&(IntervalQ, Vec<Rat>)> = (0..n).map(|i| &per_critical[i][idx[i]]).collect();
        let disjoint = picked.windows(2).all(|w| w[0].0.is_disjoint(&w[1].0));
        let avoids = picked.iter().all(|(_, orbit)| orbit.iter().all(|y| picked.iter().all(|(u, _)| !u.contains(y))));
        if disjoint && avoids {
            return Some(picked.into_iter().map(|(u, _)| u.clone()).collect());
        }
        // odometer increment, last position fastest
        let mut pos = n;
        loop {
            if pos == 0 {
                return None;
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < per_critical[pos].len() {
                break;
            }
            idx[pos] = 0;
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::q;
    use crate::zoo;

    fn single(c: Rat, lo: Rat, hi: Rat) -> Vec<(Rat, IntervalQ)> {
        vec![(c, IntervalQ::open(lo, hi))]
    }

    #[test]
    fn certify_examples() {
        let t = zoo::full_tent();
        let u = certify_nice(&t, &single(q(1, 2), q(2, 5), q(3, 5)), 100).unwrap().certified().unwrap();
        let cert = &u.components()[0].certificates;
        assert_eq!(cert[0].orbit.distinct_points(), &[q(4, 5), q(2, 5)]);
        assert_eq!(u.mesh(), &q(1, 5));

        match certify_nice(&t, &single(q(1, 2), q(1, 4), q(3, 4)), 100).unwrap() {
            NiceCheck::Counterexample { boundary, step, landing } => {
                assert_eq!((boundary, step, landing), (q(1, 4), 1, q(1, 2)));
            }
            other => panic!("expected a counterexample, got {other:?}"),
        }

        let u = certify_nice(&t, &single(q(1, 2), q(9, 20), q(11, 20)), 100).unwrap().certified().unwrap();
        assert_eq!(
            u.components()[0].certificates[0].orbit.points,
            vec![q(9, 10), q(1, 5), q(2, 5), q(4, 5), q(2, 5)]
        );
    }

    #[test]
    fn certify_reports_unknown_when_capped() {
        let t = zoo::full_tent();
        let r = certify_nice(&t, &single(q(1, 2), q(9, 20), q(11, 20)), 2).unwrap();
        assert_eq!(r, NiceCheck::Unknown { boundary: q(9, 20) });
    }

    #[test]
    fn certify_rejects_malformed_candidates() {
        let b = zoo::bimodal();
        let parts = vec![
            (q(1, 4), IntervalQ::open(q(1, 8), q(3, 8))),
            (q(3, 4), IntervalQ::open(q(5, 8), q(15, 16))),
        ];
        assert!(matches!(certify_nice(&b, &parts, 100), Err(Error::Inconsistent(_))));
        assert!(certify_nice(&b, &parts[..1], 100).is_err());
    }

    #[test]
    fn build_examples() {
        let t = zoo::full_tent();
        let budgets = Budgets::default();
        let u = build_nice(&t, &q(1, 4), 64, &budgets).unwrap();
        assert!(u.mesh() <= &q(1, 4));
        assert!(u.verify(&t, 64).unwrap());
        assert!(matches!(build_nice(&t, &q(1, 5), 0, &budgets), Err(Error::Construction(_))));
        let wide = build_nice(&t, &q(2, 1), 64, &budgets).unwrap();
        assert!(wide.verify(&t, 64).unwrap());
    }

    #[test]
    fn build_handles_every_zoo_map() {
        let budgets = Budgets::default();
        for (name, m) in zoo::acceptance_zoo() {
            let u = build_nice(&m, &q(1, 4), 64, &budgets).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(u.components().len(), m.critical_points().len());
            assert!(u.verify(&m, 64).unwrap(), "{name}");
        }
    }

    #[test]
    fn shrinking_to_certified_anchors_stays_nice() {
        let t = zoo::full_tent();
        let outer = single(q(1, 2), q(2, 5), q(3, 5));
        let inner = single(q(1, 2), q(9, 20), q(11, 20));
        assert!(certify_nice(&t, &outer, 100).unwrap().certified().is_some());
        assert!(certify_nice(&t, &inner, 100).unwrap().certified().is_some());
    }

    #[test]
    fn periodic_points_of_tent() {
        let p = periodic_points(&zoo::full_tent(), 2, 1 << 10);
        let expected: BTreeSet<Rat> = [q(0, 1), q(2, 3), q(2, 5), q(4, 5)].into_iter().collect();
        assert_eq!(p, expected);
        let mut pre = preimages(&zoo::full_tent(), &q(2, 5));
        pre.sort();
        assert_eq!(pre, vec![q(1, 5), q(4, 5)]);
    }
}
