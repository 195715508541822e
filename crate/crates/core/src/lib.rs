//! Piecewise-constant density estimation on adaptive binary partitions of
//! `[0,1]^d`.
//!
//! A cell is split, at the largest gap between its empirical and uniform
//! marginal fractions, whenever the star discrepancy of its rescaled points
//! exceeds `theta * sqrt(N) / n_i`. The resulting partition doubles as a
//! compact summary of the data: it can be queried pointwise, integrated over
//! boxes, searched for modes and arranged into a level-set tree.
//!
//! ```
//! use disctree::{estimate_density, EstimatorConfig, MixtureSpec, sample_mixture};
//!
//! let spec = MixtureSpec::four_corners(2);
//! let samples = sample_mixture(&spec, 2_000, 7).unwrap();
//! let est = estimate_density(&samples, &EstimatorConfig::default()).unwrap();
//! assert!((est.density.total_mass() - 1.0).abs() < 1e-12);
//! ```
// `!(x > 0.0)` is used on purpose throughout: it rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod discrepancy;
mod error;
pub mod estimator;
pub mod eval;
pub mod geometry;
pub mod par;
pub mod partition;

pub use analysis::{
    build_adjacency_graph, build_level_set_tree, detect_modes, is_adjacent, AdjacencyGraph, LevelSetTree,
};
pub use discrepancy::{
    l2_star_discrepancy, projection_lower_bound, should_split, star_discrepancy_1d, star_discrepancy_exact,
    star_discrepancy_grid, DiscrepancyMode, Rung, SplitDecisionConfig, SplitDiagnostic,
};
pub use error::{Error, Result};
pub use estimator::{
    compute_gaps, estimate_density, select_split, split_cell, Estimate, EstimatorConfig, GapTable, RunReport,
};
pub use eval::{sample_mixture, MixtureSpec, ReferenceFunction, TargetDensity};
pub use geometry::{rect_volume, rescale_to_unit, HyperRect, SampleSet};
pub use par::Parallelism;
pub use partition::{DensityCell, DensityModel, PartitionDoc, PartitionTree, PiecewiseDensity};
