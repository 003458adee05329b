//! Brute-force good-interval enumeration, independent of the pullback search.
//!
//! For each time `n` the phase is cut at every point whose orbit meets a
//! breakpoint before time `n`. On each resulting piece `f^n` is affine; its
//! data is read off from two `n`-fold evaluations, and each component of `U`
//! is solved for directly.

use std::collections::BTreeSet;

use affinduce_core::{AffineQ, IntervalQ, PAMap, Rat};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Found {
    pub lo: Rat,
    pub hi: Rat,
    pub time: usize,
    pub target: Rat,
    pub slope: Rat,
    pub offset: Rat,
}

fn preimages(m: &PAMap, y: &Rat) -> Vec<Rat> {
    let bps = m.breakpoints();
    let mut out = Vec::new();
    for (i, b) in m.branches().iter().enumerate() {
        let x = (y - &b.offset) / &b.slope;
        if bps[i] <= x && x <= bps[i + 1] {
            out.push(x);
        }
    }
    out
}

/// Every `(T, n, c)` with `f^n|T` affine onto `U_c`, for `n ≤ horizon`.
pub fn brute_force(m: &PAMap, parts: &[(Rat, IntervalQ)], horizon: usize) -> BTreeSet<Found> {
    let mut found = BTreeSet::new();
    for (c, u) in parts {
        found.insert(Found {
            lo: u.lo().clone(),
            hi: u.hi().clone(),
            time: 0,
            target: c.clone(),
            slope: Rat::one(),
            offset: Rat::zero(),
        });
    }
    let mut cuts: BTreeSet<Rat> = m.breakpoints().iter().cloned().collect();
    let mut frontier: BTreeSet<Rat> = cuts.clone();
    for n in 1..=horizon {
        for w in cuts.iter().collect::<Vec<_>>().windows(2) {
            let (a, b) = (w[0], w[1]);
            let (fa, fb) = (m.iterate_point(a, n), m.iterate_point(b, n));
            let slope = (&fb - &fa) / (b - a);
            if slope.is_zero() {
                continue;
            }
            let offset = &fa - &slope * a;
            let g = AffineQ::new(slope.clone(), offset.clone());
            let (ilo, ihi) = if fa < fb { (fa, fb) } else { (fb, fa) };
            for (c, u) in parts {
                if &ilo <= u.lo() && u.hi() <= &ihi {
                    let t = g.preimage(u);
                    found.insert(Found {
                        lo: t.lo().clone(),
                        hi: t.hi().clone(),
                        time: n,
                        target: c.clone(),
                        slope: slope.clone(),
                        offset: offset.clone(),
                    });
                }
            }
        }
        frontier = frontier.iter().flat_map(|y| preimages(m, y)).collect();
        cuts.extend(frontier.iter().cloned());
    }
    found
}
