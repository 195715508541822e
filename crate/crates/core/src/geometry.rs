//! Axis-aligned boxes in the unit cube and validated sample sets.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, domain, Error, Result};

/// An axis-aligned box `[lower, upper]` inside `[0,1]^d` with positive volume.
///
/// Point membership is half-open, `[lower, upper)` per dimension, except that a
/// side lying on the domain boundary `upper = 1` is closed. With this rule the
/// two children of a split receive every point of the parent exactly once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperRect {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl HyperRect {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        check_dim(lower.len(), upper.len())?;
        if lower.is_empty() {
            return Err(domain("hyper-rectangle needs at least one dimension"));
        }
        for (j, (&lo, &hi)) in lower.iter().zip(&upper).enumerate() {
            if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo >= hi {
                return Err(domain(format!(
                    "side {j} = [{lo}, {hi}] is not a non-degenerate sub-interval of [0,1]"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The unit cube `[0,1]^dim`.
    pub fn unit(dim: usize) -> Self {
        assert!(dim > 0, "unit cube needs at least one dimension");
        Self {
            lower: vec![0.0; dim],
            upper: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn width(&self, j: usize) -> f64 {
        self.upper[j] - self.lower[j]
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| 0.5 * (lo + hi))
            .collect()
    }

    /// Product of side lengths.
    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|j| self.width(j)).product()
    }

    /// Half-open membership test, closed on the global upper boundary.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter().enumerate().all(|(j, &v)| {
                v >= self.lower[j] && (v < self.upper[j] || (self.upper[j] >= 1.0 && v <= 1.0))
            })
    }

    /// Volume of the intersection with `other` (zero when they only touch).
    pub fn intersection_volume(&self, other: &HyperRect) -> f64 {
        let mut vol = 1.0;
        for j in 0..self.dim() {
            let lo = self.lower[j].max(other.lower[j]);
            let hi = self.upper[j].min(other.upper[j]);
            if hi <= lo {
                return 0.0;
            }
            vol *= hi - lo;
        }
        vol
    }

    /// True when the closed boxes share at least one point (faces and corners count).
    pub fn touches(&self, other: &HyperRect) -> bool {
        (0..self.dim())
            .all(|j| self.lower[j] <= other.upper[j] && other.lower[j] <= self.upper[j])
    }

    /// Cuts the box by the hyperplane `x[dim] = loc`; returns `(left, right)`.
    pub fn split(&self, dim: usize, loc: f64) -> Result<(HyperRect, HyperRect)> {
        if dim >= self.dim() {
            return Err(domain(format!("split dimension {dim} out of range")));
        }
        if !(loc > self.lower[dim] && loc < self.upper[dim]) {
            return Err(domain(format!(
                "split location {loc} outside the open interval ({}, {})",
                self.lower[dim], self.upper[dim]
            )));
        }
        let mut left = self.clone();
        let mut right = self.clone();
        left.upper[dim] = loc;
        right.lower[dim] = loc;
        Ok((left, right))
    }

    /// Affine image of `x` under the map taking this box onto `[0,1]^d`.
    pub fn to_unit(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(j, &v)| ((v - self.lower[j]) / self.width(j)).clamp(0.0, 1.0))
            .collect()
    }
}

/// Volume of a box; always positive for a valid [`HyperRect`].
pub fn rect_volume(rect: &HyperRect) -> f64 {
    rect.volume()
}

/// Maps points lying in `rect` onto the unit cube, coordinate-wise
/// `(x_j - lower_j) / (upper_j - lower_j)`.
pub fn rescale_to_unit<'a, I>(points: I, rect: &HyperRect) -> Result<Vec<Vec<f64>>>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    points
        .into_iter()
        .map(|x| {
            check_dim(rect.dim(), x.len())?;
            let inside = x
                .iter()
                .enumerate()
                .all(|(j, &v)| v >= rect.lower[j] && v <= rect.upper[j]);
            if !inside {
                return Err(domain(format!("point {x:?} lies outside {rect:?}")));
            }
            Ok(rect.to_unit(x))
        })
        .collect()
}

/// A non-empty set of points in `[0,1]^d`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    dim: usize,
    data: Vec<f64>,
}

impl SampleSet {
    /// Builds a sample set from rows; every row must have the same length and
    /// every coordinate must be finite and lie in `[0,1]`.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.first().map(Vec::len).ok_or_else(|| domain("no samples"))?;
        let mut data = Vec::with_capacity(dim * rows.len());
        for row in &rows {
            check_dim(dim, row.len())?;
            data.extend_from_slice(row);
        }
        Self::from_flat(dim, data)
    }

    pub fn from_flat(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(domain("dimension must be positive"));
        }
        if data.is_empty() {
            return Err(domain("no samples"));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(domain("flat buffer length is not a multiple of the dimension"));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(domain(format!(
                "non-finite coordinate at row {}, column {}",
                pos / dim,
                pos % dim
            )));
        }
        if let Some(pos) = data.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(domain(format!(
                "coordinate {} at row {}, column {} lies outside [0,1]",
                data[pos],
                pos / dim,
                pos % dim
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// Per-coordinate sample mean.
    pub fn mean(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.dim];
        for x in self.iter() {
            for (a, v) in acc.iter_mut().zip(x) {
                *a += v;
            }
        }
        let n = self.len() as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        acc
    }
}

impl TryFrom<Vec<Vec<f64>>> for SampleSet {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        SampleSet::new(rows)
    }
}
