use serde::{Deserialize, Serialize};

use super::mixture::{draw_samples, TargetDensity};
use crate::error::Result;
use crate::geometry::HyperRect;
use crate::par::Parallelism;

/// Test integrands on `[0,1]^d` with closed-form box integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceFunction {
    Constant(f64),
    /// `sum_j sqrt(x_j)`
    SqrtSum,
    /// `sum_j x_j`
    LinearSum,
    /// `(sum_j sqrt(x_j))^2`
    SqrtSumSquared,
}

/// Mean of `sqrt(x)` over `[a, b]`.
fn mean_sqrt(a: f64, b: f64) -> f64 {
    2.0 / 3.0 * (b.powf(1.5) - a.powf(1.5)) / (b - a)
}

impl ReferenceFunction {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            ReferenceFunction::Constant(c) => c,
            ReferenceFunction::SqrtSum => x.iter().map(|v| v.sqrt()).sum(),
            ReferenceFunction::LinearSum => x.iter().sum(),
            ReferenceFunction::SqrtSumSquared => {
                let s: f64 = x.iter().map(|v| v.sqrt()).sum();
                s * s
            }
        }
    }

    /// `int_rect f(x) dx`, exact.
    pub fn box_integral(&self, rect: &HyperRect) -> f64 {
        let (lo, hi) = (rect.lower(), rect.upper());
        let vol = rect.volume();
        let dims = 0..rect.dim();
        let mean = match *self {
            ReferenceFunction::Constant(c) => c,
            ReferenceFunction::LinearSum => dims.map(|j| 0.5 * (lo[j] + hi[j])).sum(),
            ReferenceFunction::SqrtSum => dims.map(|j| mean_sqrt(lo[j], hi[j])).sum(),
            ReferenceFunction::SqrtSumSquared => {
                // E(sum s_j)^2 = sum E x_j + sum_{j != k} E s_j E s_k for independent uniform coordinates
                let roots: Vec<f64> = dims.clone().map(|j| mean_sqrt(lo[j], hi[j])).collect();
                let lin: f64 = dims.map(|j| 0.5 * (lo[j] + hi[j])).sum();
                let s: f64 = roots.iter().sum();
                lin + s * s - roots.iter().map(|r| r * r).sum::<f64>()
            }
        };
        vol * mean
    }

    /// Hardy-Krause variation on `[0,1]^d` (anchored at 1).
    pub fn hardy_krause_variation(&self, dim: usize) -> f64 {
        let d = dim as f64;
        match self {
            ReferenceFunction::Constant(_) => 0.0,
            ReferenceFunction::SqrtSum | ReferenceFunction::LinearSum => d,
            // single-coordinate terms give d(2d - 1), pairwise mixed partials d(d - 1)
            ReferenceFunction::SqrtSumSquared => 3.0 * d * d - 2.0 * d,
        }
    }
}

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub stderr: f64,
}

/// `E[f(X)]` under `target` from `draws` fixed-seed samples.
pub fn mc_expectation<T: TargetDensity + ?Sized>(
    target: &T,
    f: &ReferenceFunction,
    draws: usize,
    seed: u64,
    mode: Parallelism,
) -> Result<McEstimate> {
    let samples = draw_samples(target, draws, seed, mode)?;
    let n = samples.len() as f64;
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for x in samples.iter() {
        let v = f.eval(x);
        sum += v;
        sum_sq += v * v;
    }
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0) * n / (n - 1.0).max(1.0);
    Ok(McEstimate { value: mean, stderr: (var / n).sqrt() })
}
