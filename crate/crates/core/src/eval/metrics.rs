use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mixture::{draw_samples, TargetDensity};
use super::reference::ReferenceFunction;
use super::{stream_rng, CHUNK};
use crate::error::{domain, Result};
use crate::geometry::{HyperRect, SampleSet};
use crate::par::{self, Parallelism};
use crate::partition::{DensityModel, PiecewiseDensity};

/// `int f(x) p(x) dx` for a piecewise-constant density, cell by cell.
pub fn integral_against(pd: &PiecewiseDensity, f: &ReferenceFunction) -> f64 {
    pd.cells().iter().map(|c| c.density * f.box_integral(&c.rect)).sum()
}

/// `|int f p - (1/N) sum f(x_i)|`.
pub fn integration_error(pd: &PiecewiseDensity, samples: &SampleSet, f: &ReferenceFunction) -> f64 {
    let empirical = samples.iter().map(|x| f.eval(x)).sum::<f64>() / samples.len() as f64;
    (integral_against(pd, f) - empirical).abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HellingerEstimate {
    pub distance: f64,
    /// Standard error of the squared distance.
    pub stderr_sq: f64,
    /// Standard error of the distance (delta method; infinite at zero distance).
    pub stderr: f64,
    pub draws: usize,
    /// Draws where the target density evaluated to zero.
    pub skipped: usize,
}

/// Hellinger distance `H^2 = 1 - int sqrt(p_hat p)`, with the integral
/// estimated by importance sampling from the target:
/// `1 - mean sqrt(p_hat(y)/p(y))`, `y ~ p`. Clamped to `[0,1]`.
pub fn hellinger_distance<M, T>(
    model: &M,
    target: &T,
    draws: usize,
    seed: u64,
    mode: Parallelism,
) -> Result<HellingerEstimate>
where
    M: DensityModel + ?Sized,
    T: TargetDensity + ?Sized,
{
    if model.dim() != target.dim() {
        return Err(crate::error::Error::DimensionMismatch { expected: target.dim(), found: model.dim() });
    }
    let ys = draw_samples(target, draws, seed, mode)?;
    let chunks = ys.len().div_ceil(CHUNK);
    let parts = par::map_range(mode, chunks, |c| -> Result<(f64, f64, usize, usize)> {
        let (mut sum, mut sum_sq, mut used, mut skipped) = (0.0, 0.0, 0, 0);
        for i in c * CHUNK..((c + 1) * CHUNK).min(ys.len()) {
            let y = ys.point(i);
            let p = target.pdf(y);
            if !(p > 0.0) {
                skipped += 1;
                continue;
            }
            let r = (model.density_at(y)? / p).sqrt();
            sum += r;
            sum_sq += r * r;
            used += 1;
        }
        Ok((sum, sum_sq, used, skipped))
    });
    let (mut sum, mut sum_sq, mut used, mut skipped) = (0.0, 0.0, 0usize, 0usize);
    for part in parts {
        let (s, q, u, k) = part?;
        sum += s;
        sum_sq += q;
        used += u;
        skipped += k;
    }
    if used == 0 {
        return Err(domain("target density vanished at every draw"));
    }
    let n = used as f64;
    let affinity = sum / n;
    let var = (sum_sq / n - affinity * affinity).max(0.0) * n / (n - 1.0).max(1.0);
    let stderr_sq = (var / n).sqrt();
    let h2 = (1.0 - affinity).clamp(0.0, 1.0);
    let distance = h2.sqrt();
    let stderr = if distance > 0.0 { stderr_sq / (2.0 * distance) } else { f64::INFINITY };
    Ok(HellingerEstimate { distance, stderr_sq, stderr, draws, skipped })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RectErrorReport {
    pub max_error: f64,
    pub worst_lower: Vec<f64>,
    pub worst_upper: Vec<f64>,
    /// Largest standard error of the reference probabilities (0 when exact).
    pub reference_stderr: f64,
    pub trials: usize,
}

/// Random boxes inside `(0,1)^d`, reproducible per seed.
pub(crate) fn random_boxes(dim: usize, trials: usize, seed: u64) -> Vec<HyperRect> {
    let mut rng = stream_rng(seed, u64::MAX);
    (0..trials)
        .map(|_| loop {
            let mut lo = Vec::with_capacity(dim);
            let mut hi = Vec::with_capacity(dim);
            for _ in 0..dim {
                let (a, b): (f64, f64) = (rng.random(), rng.random());
                lo.push(a.min(b));
                hi.push(a.max(b));
            }
            if let Ok(r) = HyperRect::new(lo, hi) {
                break r;
            }
        })
        .collect()
}

/// Largest `|P_hat(A) - P(A)|` over `trials` random boxes. `P(A)` is exact
/// when the target provides it, otherwise estimated from `reference_draws`
/// fixed-seed draws.
pub fn rect_probability_error<T: TargetDensity + ?Sized>(
    pd: &PiecewiseDensity,
    target: &T,
    trials: usize,
    seed: u64,
    reference_draws: usize,
    mode: Parallelism,
) -> Result<RectErrorReport> {
    if trials == 0 {
        return Err(domain("need at least one trial"));
    }
    let boxes = random_boxes(pd.dim(), trials, seed);
    let exact: Option<Vec<f64>> = boxes.iter().map(|b| target.box_probability(b)).collect();
    let (truth, reference_stderr) = match exact {
        Some(p) => (p, 0.0),
        None => {
            let refs = draw_samples(target, reference_draws, super::derive_seed(seed, 1, 0), mode)?;
            let n = refs.len() as f64;
            let probs = par::map(mode, &boxes, |b| refs.iter().filter(|x| b.contains(x)).count() as f64 / n);
            let se = probs.iter().map(|p| (p * (1.0 - p) / n).sqrt()).fold(0.0, f64::max);
            (probs, se)
        }
    };
    let mut worst = (0.0, 0);
    for (i, (b, p)) in boxes.iter().zip(&truth).enumerate() {
        let err = (pd.integrate_over_rect(b)? - p).abs();
        if err > worst.0 {
            worst = (err, i);
        }
    }
    Ok(RectErrorReport {
        max_error: worst.0,
        worst_lower: boxes[worst.1].lower().to_vec(),
        worst_upper: boxes[worst.1].upper().to_vec(),
        reference_stderr,
        trials,
    })
}

/// Draws `n` points from the estimate: a cell by mass, then a uniform point in it.
pub fn sample_from_estimate(pd: &PiecewiseDensity, n: usize, seed: u64) -> Result<SampleSet> {
    if n == 0 {
        return Err(domain("sample size must be positive"));
    }
    let mut cumulative = Vec::with_capacity(pd.len());
    let mut acc = 0.0;
    for c in pd.cells() {
        acc += c.density * c.rect.volume();
        cumulative.push(acc);
    }
    let d = pd.dim();
    let mut rng = stream_rng(seed, 0);
    let mut data = Vec::with_capacity(n * d);
    for _ in 0..n {
        let u: f64 = rng.random::<f64>() * acc;
        let idx = cumulative.partition_point(|&c| c <= u).min(pd.len() - 1);
        let rect = &pd.cells()[idx].rect;
        for j in 0..d {
            let t: f64 = rng.random();
            data.push(rect.lower()[j] + t * rect.width(j));
        }
    }
    SampleSet::from_flat(d, data)
}
