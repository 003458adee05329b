//! Good intervals, their containment forest and the induced Markov map.
//!
//! `T` is good with time `n` when `f^n|T` is an affine bijection onto some
//! component `U_c` of a nice neighborhood. Good intervals are found by
//! pulling back: every time-`n` interval is a single-branch preimage of a
//! time-`n−1` interval, and the `U_c` themselves are the time-0 members.
//!
//! A member containing another always has strictly smaller time, so parents,
//! depths and critical chains computed at one horizon stay valid at every
//! larger horizon. Restricting a forest to a smaller horizon is a filter.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith::{AffineQ, IntervalQ, Rat};
use crate::error::{Error, Result};
use crate::nice::NiceNbhd;
use crate::pamap::PAMap;
use crate::Budgets;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoodInterval {
    pub interval: IntervalQ,
    pub time: usize,
    /// Critical point whose component `f^time` maps this interval onto.
    pub target: Rat,
    /// `f^time` restricted to the interval.
    pub map_data: AffineQ,
    /// Number of members strictly containing this one.
    pub depth: usize,
    /// Smallest strictly containing member.
    pub parent: Option<usize>,
}

/// Where enumeration stopped early.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum BudgetHit {
    Laps { time: usize, count: usize, budget: usize },
    Digits { time: usize, digits: u64, budget: u64 },
}

impl BudgetHit {
    pub fn time(&self) -> usize {
        match self {
            BudgetHit::Laps { time, .. } | BudgetHit::Digits { time, .. } => *time,
        }
    }

    pub fn to_error(&self) -> Error {
        match *self {
            BudgetHit::Laps { time, budget, .. } => Error::LapBudget { iterate: time, budget },
            BudgetHit::Digits { time, digits, budget } => Error::DigitBudget { time, digits, budget },
        }
    }
}

/// Members containing the critical value `f(c)`, outermost first; entry `d` is `T_d(c)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriticalChain {
    pub critical: Rat,
    pub value: Rat,
    pub members: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoodForest {
    phase: IntervalQ,
    nice: NiceNbhd,
    horizon: usize,
    members: Vec<GoodInterval>,
    chains: Vec<CriticalChain>,
    truncated: Option<BudgetHit>,
}

struct Raw {
    interval: IntervalQ,
    time: usize,
    target: Rat,
    map_data: AffineQ,
}

impl GoodForest {
    pub fn phase(&self) -> &IntervalQ {
        &self.phase
    }

    pub fn nice(&self) -> &NiceNbhd {
        &self.nice
    }

    /// Requested horizon.
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Largest time up to which every good interval is present.
    pub fn complete_horizon(&self) -> usize {
        match &self.truncated {
            Some(hit) => hit.time() - 1,
            None => self.horizon,
        }
    }

    pub fn truncated(&self) -> Option<&BudgetHit> {
        self.truncated.as_ref()
    }

    /// Members in nesting order: left endpoint ascending, containers first.
    pub fn members(&self) -> &[GoodInterval] {
        &self.members
    }

    pub fn chains(&self) -> &[CriticalChain] {
        &self.chains
    }

    pub fn chain(&self, c: &Rat) -> Option<&CriticalChain> {
        self.chains.iter().find(|ch| &ch.critical == c)
    }

    /// `T_d(c)`.
    pub fn chain_entry(&self, c: &Rat, d: usize) -> Result<&GoodInterval> {
        self.chain(c)
            .and_then(|ch| ch.members.get(d))
            .map(|&i| &self.members[i])
            .ok_or_else(|| Error::MissingChainEntry { critical: c.clone(), depth: d })
    }

    /// Induced branches: members of time ≥ 1 not inside another such member.
    pub fn is_branch(&self, i: usize) -> bool {
        let g = &self.members[i];
        g.time >= 1 && g.parent.is_none_or(|p| self.members[p].time == 0)
    }

    pub fn branches(&self) -> impl Iterator<Item = &GoodInterval> {
        (0..self.members.len()).filter(|&i| self.is_branch(i)).map(|i| &self.members[i])
    }

    /// The forest of members with time at most `h`.
    pub fn restrict(&self, h: usize) -> GoodForest {
        if h >= self.horizon {
            return self.clone();
        }
        let raw = self
            .members
            .iter()
            .filter(|g| g.time <= h)
            .map(|g| Raw {
                interval: g.interval.clone(),
                time: g.time,
                target: g.target.clone(),
                map_data: g.map_data.clone(),
            })
            .collect();
        let values: Vec<(Rat, Rat)> = self.chains.iter().map(|c| (c.critical.clone(), c.value.clone())).collect();
        let truncated = self.truncated.clone().filter(|hit| hit.time() <= h);
        assemble(self.phase.clone(), self.nice.clone(), h, raw, &values, truncated)
            .expect("a subfamily of a laminar family is laminar")
    }

    /// Re-runs the disjoint-or-nested check and the depth bookkeeping, for
    /// forests read back from disk.
    pub fn check(&self) -> Result<()> {
        let raw = self
            .members
            .iter()
            .map(|g| Raw {
                interval: g.interval.clone(),
                time: g.time,
                target: g.target.clone(),
                map_data: g.map_data.clone(),
            })
            .collect();
        let values: Vec<(Rat, Rat)> = self.chains.iter().map(|c| (c.critical.clone(), c.value.clone())).collect();
        let rebuilt = assemble(self.phase.clone(), self.nice.clone(), self.horizon, raw, &values, self.truncated.clone())?;
        if &rebuilt != self {
            return Err(Error::Inconsistent("stored depths or chains disagree with the intervals".into()));
        }
        Ok(())
    }
}

fn assemble(
    phase: IntervalQ,
    nice: NiceNbhd,
    horizon: usize,
    mut raw: Vec<Raw>,
    values: &[(Rat, Rat)],
    truncated: Option<BudgetHit>,
) -> Result<GoodForest> {
    raw.sort_by(|a, b| a.interval.nesting_cmp(&b.interval).then(a.time.cmp(&b.time)));
    let mut members: Vec<GoodInterval> = Vec::with_capacity(raw.len());
    let mut stack: Vec<usize> = Vec::new();
    for r in raw {
        while let Some(&top) = stack.last() {
            let outer = &members[top].interval;
            if outer == &r.interval {
                return Err(Error::Inconsistent(format!("good interval {outer} enumerated twice")));
            }
            if outer.contains_interval(&r.interval) {
                break;
            }
            if !outer.is_disjoint(&r.interval) {
                return Err(Error::Inconsistent(format!(
                    "good intervals {outer} and {} overlap without nesting",
                    r.interval
                )));
            }
            stack.pop();
        }
        let parent = stack.last().copied();
        if let Some(p) = parent {
            if members[p].time >= r.time {
                return Err(Error::Inconsistent(format!(
                    "{} (time {}) contains {} (time {})",
                    members[p].interval, members[p].time, r.interval, r.time
                )));
            }
        }
        stack.push(members.len());
        members.push(GoodInterval {
            interval: r.interval,
            time: r.time,
            target: r.target,
            map_data: r.map_data,
            depth: stack.len() - 1,
            parent,
        });
    }
    let chains = values
        .iter()
        .map(|(c, v)| CriticalChain {
            critical: c.clone(),
            value: v.clone(),
            members: (0..members.len()).filter(|&i| members[i].interval.contains(v)).collect(),
        })
        .collect();
    Ok(GoodForest { phase, nice, horizon, members, chains, truncated })
}

/// All good intervals of time at most `horizon`.
///
/// Exceeding the lap or digit budget stops enumeration before the offending
/// time step; the partial forest is returned with [`GoodForest::truncated`] set.
pub fn enumerate_good(m: &PAMap, u: &NiceNbhd, horizon: usize, budgets: &Budgets) -> Result<GoodForest> {
    let crit = m.critical_points();
    let targets: Vec<&Rat> = u.components().iter().map(|c| &c.critical).collect();
    if targets.len() != crit.len() || targets.iter().zip(crit).any(|(a, b)| *a != b) {
        return Err(Error::Inconsistent("the neighborhood does not match the critical set".into()));
    }
    let laps: Vec<(IntervalQ, AffineQ)> = m
        .laps()
        .into_iter()
        .map(|lap| (lap.map.image(&lap.domain), lap.map))
        .collect();

    let mut level: Vec<Raw> = u
        .components()
        .iter()
        .map(|c| Raw {
            interval: c.interval.clone(),
            time: 0,
            target: c.critical.clone(),
            map_data: AffineQ::identity(),
        })
        .collect();
    let mut all: Vec<Raw> = Vec::new();
    let mut truncated = None;
    for n in 1..=horizon {
        let next: Vec<Raw> = level
            .par_iter()
            .flat_map_iter(|g| {
                let hull = g.interval.closure();
                laps.iter().filter(move |(image, _)| image.contains_interval(&hull)).map(move |(_, branch)| Raw {
                    interval: branch.preimage(&g.interval),
                    time: n,
                    target: g.target.clone(),
                    map_data: g.map_data.compose(branch),
                })
            })
            .collect();
        if next.len() > budgets.laps {
            truncated = Some(BudgetHit::Laps { time: n, count: next.len(), budget: budgets.laps });
            break;
        }
        let digits = next
            .iter()
            .map(|g| g.interval.lo().digits().max(g.interval.hi().digits()))
            .max()
            .unwrap_or(0);
        if digits > budgets.digits {
            truncated = Some(BudgetHit::Digits { time: n, digits, budget: budgets.digits });
            break;
        }
        all.append(&mut level);
        level = next;
    }
    all.append(&mut level);

    let values: Vec<(Rat, Rat)> = crit.iter().map(|c| (c.clone(), m.apply(c))).collect();
    assemble(m.phase().clone(), u.clone(), horizon, all, &values, truncated)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Branch {
    pub interval: IntervalQ,
    pub time: usize,
    pub target: Rat,
    pub map: AffineQ,
}

/// `M|T = f^n|T` on each component `T` of the enumerated domain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InducedMarkovMap {
    pub branches: Vec<Branch>,
    pub domain_measure: Rat,
    /// `|N| − |D|`, an outer bound on the measure of the bad set.
    pub residual: Rat,
    pub horizon: usize,
}

impl InducedMarkovMap {
    pub fn branch_at(&self, x: &Rat) -> Option<&Branch> {
        let k = self.branches.partition_point(|b| b.interval.hi() <= x);
        self.branches.get(k).filter(|b| b.interval.contains(x))
    }

    /// `M(x)`, or `None` off the enumerated domain.
    pub fn apply(&self, x: &Rat) -> Option<Rat> {
        self.branch_at(x).map(|b| b.map.apply(x))
    }
}

pub fn induced_map(forest: &GoodForest) -> InducedMarkovMap {
    let branches: Vec<Branch> = forest
        .branches()
        .map(|g| Branch {
            interval: g.interval.clone(),
            time: g.time,
            target: g.target.clone(),
            map: g.map_data.clone(),
        })
        .collect();
    let domain_measure: Rat = branches.iter().map(|b| b.interval.length()).sum();
    let residual = forest.phase().length() - &domain_measure;
    InducedMarkovMap { branches, domain_measure, residual, horizon: forest.horizon() }
}

/// Decision thresholds for [`markov_residual_curve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovThresholds {
    /// Residual target as a fraction of `|N|`.
    pub residual_fraction: f64,
    /// Largest fitted per-step decay ratio still counted as geometric decay.
    pub max_ratio: f64,
    /// How many horizons past the last one the fitted decay may be projected.
    pub extrapolation: usize,
}

impl Default for MarkovThresholds {
    fn default() -> Self {
        MarkovThresholds { residual_fraction: 1e-3, max_ratio: 0.95, extrapolation: 100 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MarkovVerdict {
    ConsistentWithMarkov,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualRow {
    pub horizon: usize,
    pub residual: Rat,
    pub branches: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualCurve {
    pub rows: Vec<ResidualRow>,
    pub phase_length: Rat,
    /// `exp` of the least-squares slope of `ln residual` against horizon.
    pub fitted_ratio: Option<f64>,
    /// Horizon at which the fitted decay reaches the residual target.
    pub projected_horizon: Option<f64>,
    pub thresholds: MarkovThresholds,
    pub verdict: MarkovVerdict,
}

impl ResidualCurve {
    pub fn is_strictly_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].residual < w[0].residual)
    }
}

/// Exact residuals `|N| − |D_h|` for each requested horizon and a heuristic
/// decay verdict. The verdict never asserts the measure-zero limit.
pub fn markov_residual_curve(
    m: &PAMap,
    u: &NiceNbhd,
    horizons: &[usize],
    budgets: &Budgets,
    thresholds: &MarkovThresholds,
) -> Result<ResidualCurve> {
    let top = horizons.last().copied().unwrap_or(0);
    let forest = enumerate_good(m, u, top, budgets)?;
    residual_curve(&forest, horizons, thresholds)
}

/// [`markov_residual_curve`] on an already enumerated forest.
pub fn residual_curve(forest: &GoodForest, horizons: &[usize], thresholds: &MarkovThresholds) -> Result<ResidualCurve> {
    if horizons.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Inconsistent("horizons must be strictly increasing".into()));
    }
    if let Some(&h) = horizons.iter().find(|&&h| h > forest.complete_horizon()) {
        return Err(match forest.truncated() {
            Some(hit) => hit.to_error(),
            None => Error::Inconsistent(format!("horizon {h} exceeds the forest horizon {}", forest.horizon())),
        });
    }
    let total = forest.phase().length();
    let rows: Vec<ResidualRow> = horizons
        .iter()
        .map(|&h| {
            let mut covered = Rat::zero();
            let mut branches = 0;
            for (i, g) in forest.members().iter().enumerate() {
                if g.time <= h && forest.is_branch(i) {
                    covered = covered + g.interval.length();
                    branches += 1;
                }
            }
            ResidualRow { horizon: h, residual: &total - covered, branches }
        })
        .collect();
    Ok(judge(rows, total, thresholds.clone()))
}

fn judge(rows: Vec<ResidualRow>, phase_length: Rat, thresholds: MarkovThresholds) -> ResidualCurve {
    let mut curve = ResidualCurve {
        rows,
        phase_length,
        fitted_ratio: None,
        projected_horizon: None,
        thresholds,
        verdict: MarkovVerdict::Inconclusive,
    };
    if curve.rows.iter().any(|r| r.residual.is_zero() && r.horizon > 0) {
        curve.verdict = MarkovVerdict::ConsistentWithMarkov;
        return curve;
    }
    if curve.rows.len() < 3 || !curve.is_strictly_decreasing() {
        return curve;
    }
    let pts: Vec<(f64, f64)> = curve
        .rows
        .iter()
        .map(|r| (r.horizon as f64, r.residual.to_f64().ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let ratio = slope.exp();
    curve.fitted_ratio = Some(ratio);

    let target = curve.thresholds.residual_fraction * curve.phase_length.to_f64();
    let last = curve.rows.last().expect("at least three rows");
    let last_h = last.horizon as f64;
    let last_r = last.residual.to_f64();
    let projected = if last_r < target { last_h } else { last_h + (target / last_r).ln() / slope };
    curve.projected_horizon = Some(projected);
    if ratio < curve.thresholds.max_ratio && projected <= last_h + curve.thresholds.extrapolation as f64 {
        curve.verdict = MarkovVerdict::ConsistentWithMarkov;
    }
    curve
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CriticalClass {
    /// The orbit of `f(c)` is eventually periodic outside `U` and every
    /// visit to `U` happens within the horizon, so the chain is complete.
    FiniteWitness,
    /// The chain kept growing over the second half of the horizon.
    InfiniteUpToHorizon,
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriticalType {
    pub critical: Rat,
    pub value: Rat,
    /// `T_0(c) ⊋ T_1(c) ⊋ …`
    pub chain: Vec<GoodInterval>,
    pub class: CriticalClass,
    /// Times at which the orbit of `f(c)` lies in `U`, when the orbit closed.
    pub entry_times: Option<Vec<usize>>,
}

pub fn critical_type(m: &PAMap, forest: &GoodForest, c: &Rat, budgets: &Budgets) -> Result<CriticalType> {
    if !m.is_critical(c) {
        return Err(Error::NotCritical(c.clone()));
    }
    let ch = forest
        .chain(c)
        .ok_or_else(|| Error::Inconsistent(format!("the forest has no chain for {c}")))?;
    let chain: Vec<GoodInterval> = ch.members.iter().map(|&i| forest.members()[i].clone()).collect();
    let u = forest.nice();
    let orbit = m.orbit_with_budget(&ch.value, budgets.orbit_cap, budgets.digits)?;
    let entry_times = orbit.is_closed().then(|| {
        let pts = orbit.distinct_points();
        (0..pts.len()).filter(|&j| u.contains(&pts[j])).collect::<Vec<usize>>()
    });
    let h = forest.complete_horizon();
    let class = match (&entry_times, orbit.preperiod) {
        (Some(times), Some(pre)) if times.iter().all(|&t| t < pre && t <= h) => CriticalClass::FiniteWitness,
        _ => {
            let half = chain.iter().filter(|g| g.time <= h / 2).count();
            match chain.len().cmp(&half) {
                Ordering::Greater => CriticalClass::InfiniteUpToHorizon,
                _ => CriticalClass::Undetermined,
            }
        }
    };
    Ok(CriticalType { critical: c.clone(), value: ch.value.clone(), chain, class, entry_times })
}
