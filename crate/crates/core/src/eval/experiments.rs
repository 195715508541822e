use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::metrics::{hellinger_distance, integral_against, rect_probability_error};
use super::mixture::{draw_samples, TargetDensity};
use super::reference::{mc_expectation, McEstimate, ReferenceFunction};
use super::derive_seed;
use crate::error::{domain, Error, Result};
use crate::estimator::{estimate_density, Estimate, EstimatorConfig};
use crate::par::{self, Parallelism};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub sizes: Vec<usize>,
    pub replicas: usize,
    pub seed: u64,
    pub estimator: EstimatorConfig,
    /// Draws behind Monte Carlo reference values when no closed form exists.
    pub reference_draws: usize,
    /// Importance-sampling draws per Hellinger evaluation.
    pub hellinger_draws: usize,
    /// Random boxes per rectangle-probability evaluation.
    pub rect_trials: usize,
    #[serde(skip)]
    pub parallelism: Parallelism,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            sizes: vec![1_000, 10_000, 100_000],
            replicas: 5,
            seed: 0,
            estimator: EstimatorConfig::default(),
            reference_draws: 1_000_000,
            hellinger_draws: 100_000,
            rect_trials: 200,
            parallelism: Parallelism::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub size: usize,
    pub replica: usize,
    pub error: f64,
}

/// Least-squares line through `(log N, log error)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope; `None` with fewer than three sizes.
    pub stderr: Option<f64>,
}

pub fn fit_log_log(points: &[(f64, f64)]) -> Result<LogLogFit> {
    if points.len() < 2 {
        return Err(domain("a log-log fit needs at least two sizes"));
    }
    if points.iter().any(|&(n, e)| !(n > 0.0) || !(e > 0.0)) {
        return Err(Error::Degenerate("log-log slope undefined for zero error".into()));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("all sizes are equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let stderr = (points.len() > 2).then(|| {
        let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
        (rss / (k - 2.0) / sxx).sqrt()
    });
    Ok(LogLogFit { slope, intercept, stderr })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub experiment: String,
    pub rows: Vec<ErrorRow>,
    /// Replica-mean error per size.
    pub mean_errors: Vec<(usize, f64)>,
    pub fit: Option<LogLogFit>,
    /// Reference value the errors were measured against, when one was used.
    pub reference: Option<McEstimate>,
    pub seed: u64,
}

#[derive(Serialize)]
struct Summary<'a> {
    experiment: &'a str,
    seed: u64,
    slope: Option<f64>,
    intercept: Option<f64>,
    stderr: Option<f64>,
    mean_errors: &'a [(usize, f64)],
    reference: Option<McEstimate>,
}

impl SweepReport {
    fn new(experiment: &str, seed: u64, rows: Vec<ErrorRow>, reference: Option<McEstimate>) -> Self {
        let mut sizes: Vec<usize> = rows.iter().map(|r| r.size).collect();
        sizes.dedup();
        let mean_errors: Vec<(usize, f64)> = sizes
            .iter()
            .map(|&n| {
                let errs: Vec<f64> = rows.iter().filter(|r| r.size == n).map(|r| r.error).collect();
                (n, errs.iter().sum::<f64>() / errs.len() as f64)
            })
            .collect();
        let pts: Vec<(f64, f64)> = mean_errors.iter().map(|&(n, e)| (n as f64, e)).collect();
        let fit = fit_log_log(&pts).ok();
        Self {
            experiment: experiment.to_string(),
            rows,
            mean_errors,
            fit,
            reference,
            seed,
        }
    }

    pub fn mean_error(&self, size: usize) -> Option<f64> {
        self.mean_errors.iter().find(|(n, _)| *n == size).map(|p| p.1)
    }

    /// `size,replica,error` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("size,replica,error\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{}", r.size, r.replica, r.error);
        }
        out
    }

    pub fn summary_json(&self) -> String {
        let summary = Summary {
            experiment: &self.experiment,
            seed: self.seed,
            slope: self.fit.map(|f| f.slope),
            intercept: self.fit.map(|f| f.intercept),
            stderr: self.fit.and_then(|f| f.stderr),
            mean_errors: &self.mean_errors,
            reference: self.reference,
        };
        serde_json::to_string_pretty(&summary).expect("summary always serializes")
    }
}

fn validate(cfg: &ExperimentConfig) -> Result<()> {
    if cfg.sizes.is_empty() || cfg.sizes.contains(&0) {
        return Err(domain("sizes must be positive"));
    }
    if cfg.replicas == 0 {
        return Err(domain("need at least one replica"));
    }
    cfg.estimator.validate()
}

/// Runs `metric` on a fresh estimate for every (size, replica) pair.
fn sweep<T, F>(target: &T, cfg: &ExperimentConfig, metric: F) -> Result<Vec<ErrorRow>>
where
    T: TargetDensity + ?Sized,
    F: Fn(&Estimate, u64) -> Result<f64> + Sync + Send,
{
    validate(cfg)?;
    let jobs: Vec<(usize, usize, usize)> = cfg
        .sizes
        .iter()
        .enumerate()
        .flat_map(|(si, &n)| (0..cfg.replicas).map(move |r| (si, n, r)))
        .collect();
    let rows = par::map(cfg.parallelism, &jobs, |&(si, n, replica)| {
        let seed = derive_seed(cfg.seed, si as u64 + 1, replica as u64 + 1);
        let samples = draw_samples(target, n, seed, cfg.estimator.parallelism)?;
        let estimate = estimate_density(&samples, &cfg.estimator)?;
        let error = metric(&estimate, seed)?;
        Ok(ErrorRow { size: n, replica, error })
    });
    rows.into_iter().collect()
}

/// Error `|int f p_hat - int f p|` against sample size, with its log-log slope.
/// `int f p` is the closed form when the target provides one, else a
/// fixed-seed Monte Carlo estimate.
pub fn convergence_slope<T: TargetDensity + ?Sized>(
    target: &T,
    f: &ReferenceFunction,
    cfg: &ExperimentConfig,
) -> Result<SweepReport> {
    let mut distinct = cfg.sizes.clone();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(domain("a convergence slope needs at least two distinct sizes"));
    }
    let reference = match target.expectation(f) {
        Some(value) => McEstimate { value, stderr: 0.0 },
        None => mc_expectation(target, f, cfg.reference_draws, derive_seed(cfg.seed, 0, 0), cfg.parallelism)?,
    };
    let rows = sweep(target, cfg, |est, _| Ok((integral_against(&est.density, f) - reference.value).abs()))?;
    Ok(SweepReport::new("slope", cfg.seed, rows, Some(reference)))
}

/// Hellinger distance between estimate and target against sample size.
pub fn hellinger_sweep<T: TargetDensity + ?Sized>(target: &T, cfg: &ExperimentConfig) -> Result<SweepReport> {
    let rows = sweep(target, cfg, |est, seed| {
        let h = hellinger_distance(&est.tree, target, cfg.hellinger_draws, derive_seed(seed, 2, 0), cfg.estimator.parallelism)?;
        Ok(h.distance)
    })?;
    Ok(SweepReport::new("hellinger", cfg.seed, rows, None))
}

/// Largest box-probability error against sample size. The same boxes are
/// used for every size and replica.
pub fn rect_error_sweep<T: TargetDensity + ?Sized>(target: &T, cfg: &ExperimentConfig) -> Result<SweepReport> {
    let box_seed = derive_seed(cfg.seed, 3, 0);
    let rows = sweep(target, cfg, |est, _| {
        let r = rect_probability_error(
            &est.density,
            target,
            cfg.rect_trials,
            box_seed,
            cfg.reference_draws,
            cfg.estimator.parallelism,
        )?;
        Ok(r.max_error)
    })?;
    Ok(SweepReport::new("rect", cfg.seed, rows, None))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_exact_power_law() {
        let pts: Vec<(f64, f64)> = [1e3, 1e4, 1e5].iter().map(|&n: &f64| (n, 3.0 * n.powf(-0.5))).collect();
        let fit = fit_log_log(&pts).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-12);
        assert!(fit.stderr.unwrap() < 1e-10);
        let doubled: Vec<(f64, f64)> = pts.iter().map(|&(n, e)| (n, 2.0 * e)).collect();
        assert!((fit_log_log(&doubled).unwrap().slope - fit.slope).abs() < 1e-12);
    }

    #[test]
    fn zero_error_is_degenerate() {
        let pts = [(1e3, 0.1), (1e4, 0.0), (1e5, 0.01)];
        assert!(matches!(fit_log_log(&pts), Err(Error::Degenerate(_))));
        assert!(fit_log_log(&[(1e3, 0.1)]).is_err());
    }

    #[test]
    fn csv_layout() {
        let rows = vec![
            ErrorRow { size: 10, replica: 0, error: 0.5 },
            ErrorRow { size: 10, replica: 1, error: 0.25 },
        ];
        let rep = SweepReport::new("x", 7, rows, None);
        assert_eq!(rep.to_csv(), "size,replica,error\n10,0,0.5\n10,1,0.25\n");
        assert_eq!(rep.mean_error(10), Some(0.375));
        assert!(rep.fit.is_none());
        assert!(rep.summary_json().contains("\"seed\": 7"));
    }
}
