use std::collections::BTreeMap;

use num_bigint::BigInt;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith::{IntervalQ, Rat};
use crate::pamap::PAMap;

const TOLERANCE: f64 = 1e-12;
const MAX_ITERATIONS: usize = 1_000_000;

/// Ulam discretization of the transfer operator on `cells` equal cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UlamModel {
    pub phase: IntervalQ,
    pub cells: usize,
    /// Column `j` lists `(i, P_ij)` with `P_ij` the exact fraction of cell `j`
    /// mapped into cell `i`.
    pub columns: Vec<Vec<(usize, Rat)>>,
    /// Invariant density, one value per cell.
    pub density: Vec<f64>,
    /// `Σ |density_{i+1} − density_i|`.
    pub tv: f64,
    pub iterations: usize,
    /// Final L1 change of the mass vector.
    pub residual: f64,
}

impl UlamModel {
    pub fn entry(&self, i: usize, j: usize) -> Rat {
        self.columns[j]
            .iter()
            .find(|(k, _)| *k == i)
            .map(|(_, p)| p.clone())
            .unwrap_or_else(Rat::zero)
    }

    pub fn column_sum(&self, j: usize) -> Rat {
        self.columns[j].iter().map(|(_, p)| p).sum()
    }

    pub fn cell_length(&self) -> f64 {
        self.phase.length().to_f64() / self.cells as f64
    }

    /// `∫ density`, which should be 1.
    pub fn mass(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.cell_length()
    }

    /// Density averaged onto `cells / factor` cells.
    pub fn coarsen(&self, factor: usize) -> Vec<f64> {
        assert!(factor >= 1 && self.cells.is_multiple_of(factor), "factor must divide the cell count");
        self.density
            .chunks(factor)
            .map(|c| c.iter().sum::<f64>() / factor as f64)
            .collect()
    }

    pub fn converged(&self) -> bool {
        self.residual < TOLERANCE
    }
}

struct Grid {
    lo: Rat,
    width: Rat,
    cells: usize,
}

impl Grid {
    fn boundary(&self, k: usize) -> Rat {
        &self.lo + &self.width * Rat::new(k as i64, self.cells as i64)
    }

    fn cell_of(&self, y: &Rat) -> usize {
        let t = (y - &self.lo) * Rat::from_integer(self.cells as i64) / &self.width;
        let k = t.floor();
        if k < BigInt::from(0) {
            0
        } else {
            usize::try_from(k).unwrap_or(usize::MAX).min(self.cells - 1)
        }
    }
}

pub fn ulam_model(m: &PAMap, cells: usize) -> UlamModel {
    assert!(cells >= 2, "Ulam's method needs at least two cells");
    let phase = m.phase().clone();
    let grid = Grid { lo: phase.lo().clone(), width: phase.length(), cells };
    let columns: Vec<Vec<(usize, Rat)>> = (0..cells).into_par_iter().map(|j| column(m, &grid, j)).collect();
    let (mass, iterations, residual) = stationary(&columns, cells);
    let cell_len = phase.length().to_f64() / cells as f64;
    let density: Vec<f64> = mass.iter().map(|p| p / cell_len).collect();
    let tv = density.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    UlamModel { phase, cells, columns, density, tv, iterations, residual }
}

fn column(m: &PAMap, grid: &Grid, j: usize) -> Vec<(usize, Rat)> {
    let a = grid.boundary(j);
    let b = grid.boundary(j + 1);
    let cell_len = &b - &a;
    let mut cuts = vec![a.clone()];
    cuts.extend(m.interior_breakpoints().iter().filter(|x| &a < *x && *x < &b).cloned());
    cuts.push(b);
    let mut acc: BTreeMap<usize, Rat> = BTreeMap::new();
    for w in cuts.windows(2) {
        let branch = &m.branches()[m.lap_index(&w[0].midpoint(&w[1]))];
        let (y0, y1) = {
            let (p, q) = (branch.apply(&w[0]), branch.apply(&w[1]));
            if p < q { (p, q) } else { (q, p) }
        };
        let scale = branch.slope.abs() * &cell_len;
        for i in grid.cell_of(&y0)..=grid.cell_of(&y1) {
            let lo = std::cmp::max(y0.clone(), grid.boundary(i));
            let hi = std::cmp::min(y1.clone(), grid.boundary(i + 1));
            if lo < hi {
                let share = (hi - lo) / &scale;
                let slot = acc.entry(i).or_insert_with(Rat::zero);
                *slot = &*slot + share;
            }
        }
    }
    acc.into_iter().collect()
}

/// Lazy power iteration `p ← (p + Pp)/2` from the uniform vector.
fn stationary(columns: &[Vec<(usize, Rat)>], cells: usize) -> (Vec<f64>, usize, f64) {
    let cols: Vec<Vec<(usize, f64)>> = columns
        .iter()
        .map(|c| c.iter().map(|(i, p)| (*i, p.to_f64())).collect())
        .collect();
    let mut p = vec![1.0 / cells as f64; cells];
    let mut next = vec![0.0; cells];
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        next.iter_mut().zip(&p).for_each(|(n, v)| *n = 0.5 * v);
        for (j, col) in cols.iter().enumerate() {
            let half = 0.5 * p[j];
            for (i, w) in col {
                next[*i] += half * w;
            }
        }
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= total);
        residual = next.iter().zip(&p).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut p, &mut next);
        iterations += 1;
        if residual < TOLERANCE {
            break;
        }
    }
    (p, iterations, residual)
}

/// L1 distance, as an integral over the phase, between the density at
/// `cells` and the density at `2·cells` averaged back onto `cells`.
pub fn refinement_gap(coarse: &UlamModel, fine: &UlamModel) -> f64 {
    assert_eq!(fine.cells, 2 * coarse.cells, "the fine model must have twice the cells");
    let projected = fine.coarsen(2);
    coarse
        .density
        .iter()
        .zip(&projected)
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        * coarse.cell_length()
}
