//! Sequential build of the binary partition.
//!
//! Each sweep visits the unsettled non-empty leaves. A leaf whose rescaled
//! points fail the uniformity test is cut at the largest gap between the
//! empirical and uniform marginal fractions on an `m`-bin grid; its mass is
//! shared between the children in proportion to their counts. Leaves that pass
//! are settled: their points never change, so the test is not repeated. The
//! build stops after a sweep that splits nothing.

use serde::{Deserialize, Serialize};

use crate::discrepancy::{should_split, Rung, SplitDecisionConfig, SplitDiagnostic};
use crate::error::{domain, Result};
use crate::geometry::{HyperRect, SampleSet};
use crate::par::{self, Parallelism};
use crate::partition::{Node, PartitionTree, PiecewiseDensity, Split};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    /// Bins per dimension for the gap grid.
    pub m: usize,
    /// Laplace pseudo-count added to each child's count when sharing mass.
    pub pseudo_count: f64,
    pub max_depth: usize,
    pub split: SplitDecisionConfig,
    /// Recorded in the run report; the build itself draws no random numbers.
    pub seed: u64,
    #[serde(skip)]
    pub parallelism: Parallelism,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            m: 3,
            pseudo_count: 0.0,
            max_depth: 50,
            split: SplitDecisionConfig::default(),
            seed: 0,
            parallelism: Parallelism::default(),
        }
    }
}

impl EstimatorConfig {
    pub fn with_theta(theta: f64) -> Self {
        let mut cfg = Self::default();
        cfg.split.theta = theta;
        cfg
    }

    pub fn theta(&self) -> f64 {
        self.split.theta
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 2 {
            return Err(domain("m must be at least 2"));
        }
        if self.max_depth < 1 {
            return Err(domain("max_depth must be at least 1"));
        }
        if !(self.pseudo_count >= 0.0 && self.pseudo_count.is_finite()) {
            return Err(domain("pseudo-count must be a finite non-negative value"));
        }
        self.split.validate()
    }
}

/// Gaps `g_jk = |#{x_j < a_j + (b_j - a_j) k/m}/n - k/m|` for `k = 1..m-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct GapTable {
    m: usize,
    count: usize,
    cell: HyperRect,
    gaps: Vec<f64>,
}

impl GapTable {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn cell(&self) -> &HyperRect {
        &self.cell
    }

    /// Gap at cut `k` (1-based, `1..m`) of dimension `j`.
    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.gaps[j * (self.m - 1) + (k - 1)]
    }

    /// Absolute position of cut `k` in dimension `j`.
    pub fn cut_location(&self, j: usize, k: usize) -> f64 {
        let lo = self.cell.lower()[j];
        lo + self.cell.width(j) * k as f64 / self.m as f64
    }
}

pub fn compute_gaps<'a, I>(points: I, cell: &HyperRect, m: usize) -> Result<GapTable>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    if m < 2 {
        return Err(domain("m must be at least 2"));
    }
    let d = cell.dim();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); d];
    for x in points {
        for (col, &v) in columns.iter_mut().zip(x) {
            col.push(v);
        }
    }
    let n = columns[0].len();
    if n == 0 {
        return Err(domain("gaps of an empty cell"));
    }
    let mut table = GapTable {
        m,
        count: n,
        cell: cell.clone(),
        gaps: Vec::with_capacity(d * (m - 1)),
    };
    for (j, col) in columns.iter_mut().enumerate() {
        col.sort_by(f64::total_cmp);
        for k in 1..m {
            let cut = table.cut_location(j, k);
            let below = col.partition_point(|&v| v < cut);
            let frac = k as f64 / m as f64;
            table.gaps.push((below as f64 / n as f64 - frac).abs());
        }
    }
    Ok(table)
}

/// Chosen cut: dimension, 1-based bin boundary and absolute location.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitChoice {
    pub dim: usize,
    pub bin: usize,
    pub loc: f64,
}

/// Largest gap; ties go to the smallest dimension, then the smallest cut.
pub fn select_split(gaps: &GapTable) -> SplitChoice {
    let d = gaps.cell.dim();
    let mut best = (0, 1);
    for j in 0..d {
        for k in 1..gaps.m {
            if gaps.get(j, k) > gaps.get(best.0, best.1) {
                best = (j, k);
            }
        }
    }
    SplitChoice {
        dim: best.0,
        bin: best.1,
        loc: gaps.cut_location(best.0, best.1),
    }
}

/// A leaf during the build, holding indices of its points.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkingCell {
    pub rect: HyperRect,
    pub indices: Vec<usize>,
    pub mass: f64,
    pub depth: usize,
}

impl WorkingCell {
    pub fn root(samples: &SampleSet) -> Self {
        Self {
            rect: HyperRect::unit(samples.dim()),
            indices: (0..samples.len()).collect(),
            mass: 1.0,
            depth: 0,
        }
    }

    pub fn count(&self) -> usize {
        self.indices.len()
    }

    pub fn density(&self) -> f64 {
        self.mass / self.rect.volume()
    }
}

/// Cuts `cell` at `x[dim] = loc`, routing points left when `x[dim] < loc`.
///
/// The left child receives `mass * (n_left + alpha) / (n + 2 alpha)` and the
/// right child the remainder.
pub fn split_cell(
    cell: &WorkingCell,
    samples: &SampleSet,
    dim: usize,
    loc: f64,
    pseudo_count: f64,
) -> Result<(WorkingCell, WorkingCell)> {
    if cell.indices.is_empty() {
        return Err(domain("cannot split an empty cell"));
    }
    let (left_rect, right_rect) = cell.rect.split(dim, loc)?;
    let (left_idx, right_idx): (Vec<usize>, Vec<usize>) =
        cell.indices.iter().partition(|&&i| samples.point(i)[dim] < loc);
    let n = cell.indices.len() as f64;
    let left_mass = cell.mass * (left_idx.len() as f64 + pseudo_count) / (n + 2.0 * pseudo_count);
    let right_mass = cell.mass - left_mass;
    let depth = cell.depth + 1;
    Ok((
        WorkingCell { rect: left_rect, indices: left_idx, mass: left_mass, depth },
        WorkingCell { rect: right_rect, indices: right_idx, mass: right_mass, depth },
    ))
}

/// One evaluation of the uniformity test on a leaf.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub leaf_id: usize,
    pub sweep: usize,
    pub count: usize,
    pub depth: usize,
    pub rung: Rung,
    pub value: Option<f64>,
    pub threshold: f64,
    pub split: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: EstimatorConfig,
    pub samples: usize,
    pub sweeps: usize,
    pub leaves: usize,
    pub decisions: Vec<DecisionRecord>,
}

impl RunReport {
    /// Decisions of leaves that ended up unsplit.
    pub fn final_decisions(&self) -> impl Iterator<Item = &DecisionRecord> {
        self.decisions.iter().filter(|d| !d.split)
    }

    /// Ids of split decisions made on a leaf with `n_i <= theta sqrt(N)`;
    /// such a split contradicts `D* <= 1`.
    pub fn premature_splits(&self) -> Vec<usize> {
        let limit = self.config.theta() * (self.samples as f64).sqrt();
        self.decisions
            .iter()
            .filter(|d| d.split && d.count as f64 <= limit)
            .map(|d| d.leaf_id)
            .collect()
    }

    /// True when every unsplit leaf was settled without an approximate rung.
    pub fn all_rigorous(&self) -> bool {
        self.final_decisions().all(|d| matches!(d.rung, Rung::Trivial | Rung::Exact))
    }
}

/// Output of [`estimate_density`].
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub tree: PartitionTree,
    pub density: PiecewiseDensity,
    pub report: RunReport,
}

struct Outcome {
    diagnostic: SplitDiagnostic,
    choice: Option<SplitChoice>,
}

fn decide(cell: &WorkingCell, samples: &SampleSet, cfg: &EstimatorConfig) -> Result<Outcome> {
    if cell.depth >= cfg.max_depth {
        let threshold = crate::discrepancy::split_threshold(cfg.theta(), samples.len(), cell.count());
        let diagnostic = SplitDiagnostic { rung: Rung::DepthLimit, value: None, threshold, split: false };
        return Ok(Outcome { diagnostic, choice: None });
    }
    let d = samples.dim();
    let mut flat = Vec::with_capacity(cell.count() * d);
    for &i in &cell.indices {
        flat.extend(cell.rect.to_unit(samples.point(i)));
    }
    let rescaled = SampleSet::from_flat(d, flat)?;
    let diagnostic = should_split(&rescaled, samples.len(), &cfg.split);
    let choice = if diagnostic.split {
        let gaps = compute_gaps(cell.indices.iter().map(|&i| samples.point(i)), &cell.rect, cfg.m)?;
        Some(select_split(&gaps))
    } else {
        None
    };
    Ok(Outcome { diagnostic, choice })
}

/// Builds the partition, calling `on_sweep` with a snapshot after every sweep.
pub fn estimate_density_observed<F>(samples: &SampleSet, cfg: &EstimatorConfig, mut on_sweep: F) -> Result<Estimate>
where
    F: FnMut(usize, &PartitionTree),
{
    cfg.validate()?;
    let dim = samples.dim();
    let root = WorkingCell::root(samples);
    let mut arena = vec![node_of(&root)];
    let mut frontier: Vec<(usize, WorkingCell)> = vec![(0, root)];
    let mut decisions = Vec::new();
    let mut sweeps = 0;

    loop {
        sweeps += 1;
        let outcomes = par::map(cfg.parallelism, &frontier, |(_, cell)| decide(cell, samples, cfg));
        let mut next = Vec::new();
        let mut changed = false;
        for ((id, cell), outcome) in frontier.into_iter().zip(outcomes) {
            let Outcome { diagnostic, choice } = outcome?;
            decisions.push(DecisionRecord {
                leaf_id: id,
                sweep: sweeps,
                count: cell.count(),
                depth: cell.depth,
                rung: diagnostic.rung,
                value: diagnostic.value,
                threshold: diagnostic.threshold,
                split: diagnostic.split,
            });
            let Some(choice) = choice else { continue };
            let (left, right) = split_cell(&cell, samples, choice.dim, choice.loc, cfg.pseudo_count)?;
            let (l, r) = (arena.len(), arena.len() + 1);
            arena.push(node_of(&left));
            arena.push(node_of(&right));
            arena[id].split = Some(Split { dim: choice.dim, loc: choice.loc, left: l, right: r });
            changed = true;
            for (child_id, child) in [(l, left), (r, right)] {
                if !child.indices.is_empty() {
                    next.push((child_id, child));
                }
            }
        }
        frontier = next;
        if changed {
            let (snapshot, _) = PartitionTree::from_arena(dim, cfg.theta(), arena.clone(), 0);
            on_sweep(sweeps, &snapshot);
        } else {
            break;
        }
    }

    let (tree, remap) = PartitionTree::from_arena(dim, cfg.theta(), arena, 0);
    for d in &mut decisions {
        d.leaf_id = remap[d.leaf_id];
    }
    let density = tree.to_density();
    let report = RunReport {
        config: cfg.clone(),
        samples: samples.len(),
        sweeps,
        leaves: tree.leaf_count(),
        decisions,
    };
    Ok(Estimate { tree, density, report })
}

/// Estimates a piecewise-constant density from samples in `[0,1]^d`.
pub fn estimate_density(samples: &SampleSet, cfg: &EstimatorConfig) -> Result<Estimate> {
    estimate_density_observed(samples, cfg, |_, _| {})
}

fn node_of(cell: &WorkingCell) -> Node {
    Node {
        cell: cell.rect.clone(),
        depth: cell.depth,
        count: cell.count(),
        mass: cell.mass,
        density: cell.density(),
        split: None,
    }
}
