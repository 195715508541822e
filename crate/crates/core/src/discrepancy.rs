//! Star discrepancy of point sets in the unit cube, its L2 variant, and the
//! uniformity test that decides whether a partition cell is split.
//!
//! The local discrepancy of a point set at anchor `a` is
//! `#{x in [0,a)}/n - vol([0,a))`. Its supremum is attained (as a limit) on the
//! grid whose axes are the distinct point coordinates plus `1`: the "too few
//! points" side at open boxes, the "too many points" side at closed boxes
//! `[0,a]` approached from above. A box reaching `a_j = 1` is closed on that
//! face, as partition cells are. Both the exact and the grid routines share
//! one prefix-sum evaluator over an axis grid.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::geometry::SampleSet;
use crate::par::{self, Parallelism};

/// Largest anchor grid (product of axis lengths) the exact path will enumerate.
pub const DEFAULT_EXACT_GUARD: usize = 2_000_000;
/// Default resolution of the grid lower bound.
pub const DEFAULT_GRID_RESOLUTION: usize = 64;
/// Largest grid `k^d` the automatic mode evaluates before falling back to L2.
pub const GRID_BUDGET: usize = 1 << 24;

/// `D* = 1/(2n) + max_i |x_(i) - (2i-1)/(2n)|`, exact in one dimension.
pub fn star_discrepancy_1d(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(domain("star discrepancy of an empty set"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted_star_discrepancy_1d(&sorted))
}

fn sorted_star_discrepancy_1d(sorted: &[f64]) -> f64 {
    let n = sorted.len() as f64;
    let worst = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| (x - (2 * i + 1) as f64 / (2.0 * n)).abs())
        .fold(0.0, f64::max);
    1.0 / (2.0 * n) + worst
}

/// Sorted distinct coordinates of each dimension with `1` appended.
fn critical_axes(points: &SampleSet) -> Vec<Vec<f64>> {
    (0..points.dim())
        .map(|j| {
            let mut axis: Vec<f64> = points.iter().map(|x| x[j]).collect();
            axis.push(1.0);
            axis.sort_by(f64::total_cmp);
            axis.dedup();
            axis
        })
        .collect()
}

/// Number of anchors the exact routine would enumerate.
pub fn exact_anchor_count(points: &SampleSet) -> f64 {
    critical_axes(points).iter().map(|a| a.len() as f64).product()
}

/// Maximum local discrepancy over the anchors of an axis grid.
///
/// Every axis must be strictly increasing and end at `1`. The closed side
/// counts `x <= c`; at `c = 1` that is the box closed at the boundary of the
/// cube, the same convention cells use.
fn grid_sup(points: &SampleSet, axes: &[Vec<f64>]) -> f64 {
    let d = axes.len();
    let n = points.len() as f64;
    let mut strides = vec![1usize; d];
    for j in (0..d.saturating_sub(1)).rev() {
        strides[j] = strides[j + 1] * axes[j + 1].len();
    }
    let total = strides[0] * axes[0].len();
    let mut open = vec![0u32; total];
    let mut closed = vec![0u32; total];

    for x in points.iter() {
        let mut open_idx = Some(0usize);
        let mut closed_idx = Some(0usize);
        for (j, axis) in axes.iter().enumerate() {
            let v = x[j];
            // first anchor strictly above v
            let o = axis.partition_point(|&c| c <= v);
            open_idx = open_idx.filter(|_| o < axis.len()).map(|acc| acc + o * strides[j]);
            // first anchor at or above v
            let c = axis.partition_point(|&c| c < v);
            closed_idx = closed_idx.filter(|_| c < axis.len()).map(|acc| acc + c * strides[j]);
        }
        if let Some(i) = open_idx {
            open[i] += 1;
        }
        if let Some(i) = closed_idx {
            closed[i] += 1;
        }
    }

    for j in 0..d {
        let stride = strides[j];
        let len = axes[j].len();
        for idx in 0..total {
            if !(idx / stride).is_multiple_of(len) {
                open[idx] += open[idx - stride];
                closed[idx] += closed[idx - stride];
            }
        }
    }

    let mut best: f64 = 0.0;
    let mut multi = vec![0usize; d];
    for idx in 0..total {
        let vol: f64 = multi.iter().zip(axes).map(|(&i, a)| a[i]).product();
        let too_few = vol - f64::from(open[idx]) / n;
        let too_many = f64::from(closed[idx]) / n - vol;
        best = best.max(too_few).max(too_many);
        for j in (0..d).rev() {
            multi[j] += 1;
            if multi[j] < axes[j].len() {
                break;
            }
            multi[j] = 0;
        }
    }
    best.clamp(0.0, 1.0)
}

/// Exact star discrepancy by enumerating the critical anchor grid.
///
/// Refuses with [`Error::TooLarge`] when the grid exceeds `guard` anchors.
pub fn star_discrepancy_exact(points: &SampleSet, guard: usize) -> Result<f64> {
    let axes = critical_axes(points);
    let anchors: f64 = axes.iter().map(|a| a.len() as f64).product();
    if anchors > guard as f64 {
        return Err(Error::TooLarge { anchors, guard });
    }
    Ok(grid_sup(points, &axes))
}

/// Lower bound on the star discrepancy from anchors in `{1/k, ..., 1}^d`.
pub fn star_discrepancy_grid(points: &SampleSet, k: usize) -> Result<f64> {
    if k < 2 {
        return Err(domain("grid resolution must be at least 2"));
    }
    let cells = (k as f64).powi(points.dim() as i32);
    if cells > (GRID_BUDGET * 4) as f64 {
        return Err(Error::TooLarge { anchors: cells, guard: GRID_BUDGET * 4 });
    }
    let axis: Vec<f64> = (1..=k).map(|i| i as f64 / k as f64).collect();
    let axes = vec![axis; points.dim()];
    Ok(grid_sup(points, &axes))
}

/// L2 star discrepancy by Warnock's formula, evaluated directly in `O(n^2 d)`.
pub fn l2_star_discrepancy(points: &SampleSet) -> f64 {
    l2_star_discrepancy_with(points, Parallelism::Sequential)
}

pub fn l2_star_discrepancy_with(points: &SampleSet, mode: Parallelism) -> f64 {
    let n = points.len();
    let d = points.dim() as i32;
    let single: f64 = points
        .iter()
        .map(|x| x.iter().map(|v| 1.0 - v * v).product::<f64>())
        .sum();
    let rows = par::map_range(mode, n, |i| {
        let xi = points.point(i);
        points
            .iter()
            .map(|xj| {
                xi.iter()
                    .zip(xj)
                    .map(|(a, b)| 1.0 - a.max(*b))
                    .product::<f64>()
            })
            .sum::<f64>()
    });
    let pair: f64 = rows.iter().sum();
    let nf = n as f64;
    let sq = 3f64.powi(-d) - 2f64.powi(1 - d) / nf * single + pair / (nf * nf);
    sq.max(0.0).sqrt()
}

/// Largest one-dimensional discrepancy over the coordinate projections.
pub fn projection_lower_bound(points: &SampleSet) -> f64 {
    (0..points.dim())
        .map(|j| {
            let mut col: Vec<f64> = points.iter().map(|x| x[j]).collect();
            col.sort_by(f64::total_cmp);
            sorted_star_discrepancy_1d(&col)
        })
        .fold(0.0, f64::max)
}

/// How the discrepancy of a cell is evaluated once the cheap rungs are exhausted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscrepancyMode {
    /// Exact when the anchor grid fits the guard, else the grid lower bound.
    Exact,
    /// Grid lower bound at the given resolution.
    Grid(usize),
    /// L2 star discrepancy compared directly against the threshold.
    L2Surrogate,
    /// Exact, then a grid refined to the threshold within [`GRID_BUDGET`], then L2.
    Auto,
}

/// Parameters of the per-cell uniformity test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitDecisionConfig {
    pub theta: f64,
    /// Multiplicative constant of the uniform bound `D*_{n,d} <= c sqrt(d/n)`.
    pub c: f64,
    /// Below this threshold a cell is split without evaluating its discrepancy.
    pub epsilon: f64,
    pub mode: DiscrepancyMode,
    /// Resolution used when the exact path falls back to the grid.
    pub grid_resolution: usize,
    pub exact_guard: usize,
}

impl Default for SplitDecisionConfig {
    fn default() -> Self {
        Self {
            theta: 1.0,
            c: 10.0,
            epsilon: 1e-3,
            mode: DiscrepancyMode::Auto,
            grid_resolution: DEFAULT_GRID_RESOLUTION,
            exact_guard: DEFAULT_EXACT_GUARD,
        }
    }
}

impl SplitDecisionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return Err(domain("theta must be positive"));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(domain("c must be positive"));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(domain("epsilon must lie in (0, 1)"));
        }
        if self.grid_resolution < 2 {
            return Err(domain("grid resolution must be at least 2"));
        }
        if let DiscrepancyMode::Grid(k) = self.mode {
            if k < 2 {
                return Err(domain("grid resolution must be at least 2"));
            }
        }
        Ok(())
    }

    /// Per-cell factor `alpha_i = sqrt(N / (n_i d)) theta / c`.
    pub fn alpha(&self, n_total: usize, n_cell: usize, dim: usize) -> f64 {
        (n_total as f64 / (n_cell as f64 * dim as f64)).sqrt() * self.theta / self.c
    }
}

/// `theta sqrt(N) / n_i`, the bound the cell's star discrepancy is held to.
pub fn split_threshold(theta: f64, n_total: usize, n_cell: usize) -> f64 {
    theta * (n_total as f64).sqrt() / n_cell as f64
}

/// Grid resolution for the automatic mode. A grid of resolution `k` can miss
/// up to about `d/k` of the true supremum, so the resolution is raised until
/// that slack is a quarter of the threshold, within [`GRID_BUDGET`] anchors.
fn auto_resolution(dim: usize, threshold: f64, floor: usize) -> usize {
    let wanted = ((4 * dim) as f64 / threshold).ceil().max(floor as f64);
    let cap = (GRID_BUDGET as f64).powf(1.0 / dim as f64).floor();
    wanted.min(cap).max(floor as f64) as usize
}

/// Which step of the decision ladder settled a split decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rung {
    /// Threshold at least 1; star discrepancy never exceeds 1.
    Trivial,
    /// Threshold at most epsilon; split without checking.
    Shortcut,
    /// Projection lower bound already exceeds the threshold.
    Projection,
    Exact,
    Grid,
    L2,
    /// Leaf at the depth limit; never evaluated.
    DepthLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitDiagnostic {
    pub rung: Rung,
    pub value: Option<f64>,
    pub threshold: f64,
    pub split: bool,
}

/// Decides whether a cell whose points have been rescaled to the unit cube
/// is non-uniform enough to split. `n_total` is the full sample size.
pub fn should_split(cell: &SampleSet, n_total: usize, cfg: &SplitDecisionConfig) -> SplitDiagnostic {
    let threshold = split_threshold(cfg.theta, n_total, cell.len());
    let settle = |rung, value: Option<f64>, split| SplitDiagnostic { rung, value, threshold, split };
    if threshold >= 1.0 {
        return settle(Rung::Trivial, None, false);
    }
    if threshold <= cfg.epsilon {
        return settle(Rung::Shortcut, None, true);
    }
    let projected = projection_lower_bound(cell);
    if projected > threshold {
        return settle(Rung::Projection, Some(projected), true);
    }
    let (rung, value) = evaluate(cell, threshold, cfg);
    settle(rung, Some(value), value > threshold)
}

fn evaluate(cell: &SampleSet, threshold: f64, cfg: &SplitDecisionConfig) -> (Rung, f64) {
    let grid_fits = |k: usize| (k as f64).powi(cell.dim() as i32) <= GRID_BUDGET as f64;
    let grid = |k: usize| {
        star_discrepancy_grid(cell, k).map(|v| (Rung::Grid, v))
    };
    let exact = || star_discrepancy_exact(cell, cfg.exact_guard).map(|v| (Rung::Exact, v));
    let l2 = || (Rung::L2, l2_star_discrepancy(cell));
    match cfg.mode {
        DiscrepancyMode::Exact => exact()
            .or_else(|_| grid(cfg.grid_resolution))
            .unwrap_or_else(|_| l2()),
        DiscrepancyMode::Grid(k) => grid(k).unwrap_or_else(|_| l2()),
        DiscrepancyMode::L2Surrogate => l2(),
        DiscrepancyMode::Auto => exact()
            .or_else(|e| {
                if grid_fits(cfg.grid_resolution) {
                    grid(auto_resolution(cell.dim(), threshold, cfg.grid_resolution))
                } else {
                    Err(e)
                }
            })
            .unwrap_or_else(|_| l2()),
    }
}
