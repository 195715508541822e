use rand::distr::Distribution;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, StandardNormal};
use statrs::distribution::{Beta as BetaDist, Continuous, ContinuousCDF, Normal};
use statrs::function::gamma::ln_gamma;

use super::reference::ReferenceFunction;
use super::{stream_rng, CHUNK};
use crate::error::{domain, Error, Result};
use crate::geometry::{HyperRect, SampleSet};
use crate::par::{self, Parallelism};

/// Draws used to estimate the truncation constant when it has no closed form.
const NORMALIZER_DRAWS: usize = 400_000;
const NORMALIZER_SEED: u64 = 0x005e_ed0f_c0de;
/// Rejection sampling gives up when fewer than this fraction of draws land in the cube.
const MIN_ACCEPTANCE: f64 = 1e-3;

/// A density on `[0,1]^d` that can be sampled and evaluated pointwise.
pub trait TargetDensity: Sync {
    fn dim(&self) -> usize;

    fn pdf(&self, x: &[f64]) -> f64;

    /// One proposal; returns false when it was rejected.
    fn propose(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) -> bool;

    /// Closed-form `P(A)`, when available.
    fn box_probability(&self, _rect: &HyperRect) -> Option<f64> {
        None
    }

    /// Closed-form `E[f(X)]`, when available.
    fn expectation(&self, _f: &ReferenceFunction) -> Option<f64> {
        None
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Covariance {
    Diagonal(Vec<f64>),
    /// Row-major symmetric positive-definite matrix.
    Full(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Component {
    Gaussian { mean: Vec<f64>, covariance: Covariance },
    /// Independent coordinates, coordinate `j` distributed as Beta(a_j, b_j).
    BetaProduct { shapes: Vec<(f64, f64)> },
}

impl Component {
    fn dim(&self) -> usize {
        match self {
            Component::Gaussian { mean, .. } => mean.len(),
            Component::BetaProduct { shapes } => shapes.len(),
        }
    }
}

/// Precomputed per-component quantities.
#[derive(Debug, Clone)]
struct Prepared {
    /// Lower Cholesky factor, row-major.
    chol: Vec<f64>,
    log_norm: f64,
    /// Probability that an untruncated draw lands in the cube.
    inside: f64,
}

/// Mixture on `[0,1]^d`, truncated to the cube as a whole: a draw picks a
/// component, samples it, and restarts from scratch if it leaves the cube.
#[derive(Debug, Clone)]
pub struct MixtureSpec {
    dim: usize,
    weights: Vec<f64>,
    cumulative: Vec<f64>,
    components: Vec<Component>,
    prepared: Vec<Prepared>,
    normalizer: f64,
}

fn cholesky(a: &[Vec<f64>]) -> Option<Vec<f64>> {
    let d = a.len();
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i * d + k] * l[j * d + k]).sum();
            if i == j {
                let v = a[i][i] - s;
                if v <= 0.0 {
                    return None;
                }
                l[i * d + i] = v.sqrt();
            } else {
                l[i * d + j] = (a[i][j] - s) / l[j * d + j];
            }
        }
    }
    Some(l)
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

impl MixtureSpec {
    pub fn new(weights: Vec<f64>, components: Vec<Component>) -> Result<Self> {
        if weights.is_empty() || weights.len() != components.len() {
            return Err(domain("need one positive weight per component"));
        }
        if weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(domain("mixture weights must be positive"));
        }
        if (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(domain("mixture weights must sum to 1"));
        }
        let dim = components[0].dim();
        if dim == 0 {
            return Err(domain("components need at least one dimension"));
        }
        let mut prepared = Vec::with_capacity(components.len());
        for comp in &components {
            if comp.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: comp.dim() });
            }
            prepared.push(prepare(comp, dim)?);
        }
        let cumulative = weights
            .iter()
            .scan(0.0, |acc, w| {
                *acc += w;
                Some(*acc)
            })
            .collect();
        let mut spec = Self { dim, weights, cumulative, components, prepared, normalizer: 1.0 };
        spec.estimate_missing_truncation();
        spec.normalizer = spec
            .weights
            .iter()
            .zip(&spec.prepared)
            .map(|(w, p)| w * p.inside)
            .sum();
        if !(spec.normalizer > 0.0) {
            return Err(domain("mixture puts no mass on the unit cube"));
        }
        Ok(spec)
    }

    /// Four equally weighted Gaussians with covariance `0.01 I`, centered at
    /// `(1/4|3/4, 1/4|3/4, 1/2, ..., 1/2)`.
    pub fn four_corners(dim: usize) -> Self {
        assert!(dim >= 2, "the four-corner mixture needs at least two dimensions");
        let corners = [(0.25, 0.25), (0.25, 0.75), (0.75, 0.25), (0.75, 0.75)];
        let components = corners
            .iter()
            .map(|&(a, b)| {
                let mut mean = vec![0.5; dim];
                mean[0] = a;
                mean[1] = b;
                Component::Gaussian { mean, covariance: Covariance::Diagonal(vec![0.01; dim]) }
            })
            .collect();
        Self::new(vec![0.25; 4], components).expect("static mixture is valid")
    }

    /// `(prod Beta(15,5) + prod Beta(5,15)) / 2`.
    pub fn beta_bimodal(dim: usize) -> Self {
        let comps = vec![
            Component::BetaProduct { shapes: vec![(15.0, 5.0); dim] },
            Component::BetaProduct { shapes: vec![(5.0, 15.0); dim] },
        ];
        Self::new(vec![0.5, 0.5], comps).expect("static mixture is valid")
    }

    pub fn uniform(dim: usize) -> Self {
        Self::new(vec![1.0], vec![Component::BetaProduct { shapes: vec![(1.0, 1.0); dim] }])
            .expect("static mixture is valid")
    }

    /// Single correlated Gaussian at the center of the square.
    pub fn tilted_gaussian() -> Self {
        let cov = Covariance::Full(vec![vec![0.08, 0.02], vec![0.02, 0.02]]);
        Self::new(vec![1.0], vec![Component::Gaussian { mean: vec![0.5, 0.5], covariance: cov }])
            .expect("static mixture is valid")
    }

    /// Two correlated Gaussians stacked vertically.
    pub fn twin_gaussians() -> Self {
        let cov = || Covariance::Full(vec![vec![0.04, 0.01], vec![0.01, 0.01]]);
        Self::new(
            vec![0.5, 0.5],
            vec![
                Component::Gaussian { mean: vec![0.5, 0.25], covariance: cov() },
                Component::Gaussian { mean: vec![0.5, 0.75], covariance: cov() },
            ],
        )
        .expect("static mixture is valid")
    }

    /// Three beta products with skewed marginals.
    pub fn beta_triple() -> Self {
        let comp = |a: (f64, f64), b: (f64, f64)| Component::BetaProduct { shapes: vec![a, b] };
        Self::new(
            vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
            vec![
                comp((2.0, 5.0), (5.0, 2.0)),
                comp((4.0, 2.0), (2.0, 4.0)),
                comp((1.0, 3.0), (3.0, 1.0)),
            ],
        )
        .expect("static mixture is valid")
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    /// Means of the Gaussian components (the nominal mode locations).
    pub fn gaussian_means(&self) -> Vec<Vec<f64>> {
        self.components
            .iter()
            .filter_map(|c| match c {
                Component::Gaussian { mean, .. } => Some(mean.clone()),
                Component::BetaProduct { .. } => None,
            })
            .collect()
    }

    /// Probability mass of the untruncated mixture inside the cube.
    pub fn truncation_constant(&self) -> f64 {
        self.normalizer
    }

    fn estimate_missing_truncation(&mut self) {
        for i in 0..self.components.len() {
            if self.prepared[i].inside.is_nan() {
                let comp = &self.components[i];
                let prep = &self.prepared[i];
                let mut rng = stream_rng(NORMALIZER_SEED, i as u64);
                let mut buf = vec![0.0; self.dim];
                let hits = (0..NORMALIZER_DRAWS)
                    .filter(|_| draw_component(comp, prep, self.dim, &mut rng, &mut buf))
                    .count();
                self.prepared[i].inside = hits as f64 / NORMALIZER_DRAWS as f64;
            }
        }
    }

    fn component_pdf(&self, i: usize, x: &[f64]) -> f64 {
        let prep = &self.prepared[i];
        match &self.components[i] {
            Component::Gaussian { mean, .. } => {
                let d = self.dim;
                let mut z = vec![0.0; d];
                for r in 0..d {
                    let s: f64 = (0..r).map(|k| prep.chol[r * d + k] * z[k]).sum();
                    z[r] = (x[r] - mean[r] - s) / prep.chol[r * d + r];
                }
                let q: f64 = z.iter().map(|v| v * v).sum();
                (prep.log_norm - 0.5 * q).exp()
            }
            Component::BetaProduct { shapes } => shapes
                .iter()
                .zip(x)
                .map(|(&(a, b), &v)| BetaDist::new(a, b).expect("validated shapes").pdf(v))
                .product(),
        }
    }

    /// `E[g(X_j)]` for one component conditioned on the cube, `g` linear or square root.
    fn coordinate_moment(&self, i: usize, j: usize, sqrt: bool) -> Option<f64> {
        match &self.components[i] {
            Component::BetaProduct { shapes } => {
                let (a, b) = shapes[j];
                Some(if sqrt {
                    (ln_gamma(a + 0.5) + ln_gamma(a + b) - ln_gamma(a) - ln_gamma(a + b + 0.5)).exp()
                } else {
                    a / (a + b)
                })
            }
            Component::Gaussian { mean, covariance: Covariance::Diagonal(var) } if !sqrt => {
                let n = std_normal();
                let sd = var[j].sqrt();
                let (lo, hi) = (-mean[j] / sd, (1.0 - mean[j]) / sd);
                let mass = n.cdf(hi) - n.cdf(lo);
                Some(mean[j] + sd * (n.pdf(lo) - n.pdf(hi)) / mass)
            }
            Component::Gaussian { .. } => None,
        }
    }

    fn component_expectation(&self, i: usize, f: &ReferenceFunction) -> Option<f64> {
        let d = self.dim;
        let moments = |sqrt: bool| -> Option<Vec<f64>> {
            (0..d).map(|j| self.coordinate_moment(i, j, sqrt)).collect()
        };
        match *f {
            ReferenceFunction::Constant(c) => Some(c),
            ReferenceFunction::LinearSum => Some(moments(false)?.iter().sum()),
            ReferenceFunction::SqrtSum => Some(moments(true)?.iter().sum()),
            ReferenceFunction::SqrtSumSquared => {
                let lin: f64 = moments(false)?.iter().sum();
                let roots = moments(true)?;
                let s: f64 = roots.iter().sum();
                let sq: f64 = roots.iter().map(|r| r * r).sum();
                Some(lin + s * s - sq)
            }
        }
    }
}

fn prepare(comp: &Component, dim: usize) -> Result<Prepared> {
    match comp {
        Component::Gaussian { mean, covariance } => {
            let matrix: Vec<Vec<f64>> = match covariance {
                Covariance::Diagonal(v) => {
                    if v.len() != dim || v.iter().any(|&s| !(s > 0.0)) {
                        return Err(domain("diagonal covariance entries must be positive"));
                    }
                    (0..dim)
                        .map(|i| (0..dim).map(|j| if i == j { v[i] } else { 0.0 }).collect())
                        .collect()
                }
                Covariance::Full(m) => {
                    if m.len() != dim || m.iter().any(|r| r.len() != dim) {
                        return Err(domain("covariance must be a d x d matrix"));
                    }
                    m.clone()
                }
            };
            let chol = cholesky(&matrix).ok_or_else(|| domain("covariance is not positive definite"))?;
            let log_det: f64 = (0..dim).map(|i| 2.0 * chol[i * dim + i].ln()).sum();
            let log_norm = -0.5 * (dim as f64 * (2.0 * std::f64::consts::PI).ln() + log_det);
            let inside = match covariance {
                Covariance::Diagonal(v) => {
                    let n = std_normal();
                    (0..dim)
                        .map(|j| {
                            let sd = v[j].sqrt();
                            n.cdf((1.0 - mean[j]) / sd) - n.cdf(-mean[j] / sd)
                        })
                        .product()
                }
                Covariance::Full(_) => f64::NAN,
            };
            Ok(Prepared { chol, log_norm, inside })
        }
        Component::BetaProduct { shapes } => {
            if shapes.iter().any(|&(a, b)| !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite())) {
                return Err(domain("beta shapes must be positive"));
            }
            Ok(Prepared { chol: Vec::new(), log_norm: 0.0, inside: 1.0 })
        }
    }
}

/// One untruncated component draw; returns whether it landed in the cube.
fn draw_component(comp: &Component, prep: &Prepared, d: usize, rng: &mut ChaCha8Rng, out: &mut [f64]) -> bool {
    match comp {
        Component::Gaussian { mean, .. } => {
            let z: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
            for r in 0..d {
                out[r] = mean[r] + (0..=r).map(|k| prep.chol[r * d + k] * z[k]).sum::<f64>();
            }
            out.iter().all(|v| (0.0..=1.0).contains(v))
        }
        Component::BetaProduct { shapes } => {
            for (o, &(a, b)) in out.iter_mut().zip(shapes) {
                *o = Beta::new(a, b).expect("validated shapes").sample(rng);
            }
            true
        }
    }
}

impl TargetDensity for MixtureSpec {
    fn dim(&self) -> usize {
        self.dim
    }

    fn pdf(&self, x: &[f64]) -> f64 {
        if x.len() != self.dim || x.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return 0.0;
        }
        let raw: f64 = (0..self.components.len())
            .map(|i| self.weights[i] * self.component_pdf(i, x))
            .sum();
        raw / self.normalizer
    }

    fn propose(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) -> bool {
        let u: f64 = rng.random::<f64>() * self.cumulative[self.cumulative.len() - 1];
        let pick = self.cumulative.partition_point(|&c| c <= u).min(self.components.len() - 1);
        draw_component(&self.components[pick], &self.prepared[pick], self.dim, rng, out)
    }

    fn box_probability(&self, rect: &HyperRect) -> Option<f64> {
        let mut total = 0.0;
        for (i, comp) in self.components.iter().enumerate() {
            let p: f64 = match comp {
                Component::Gaussian { mean, covariance: Covariance::Diagonal(var) } => {
                    let n = std_normal();
                    (0..self.dim)
                        .map(|j| {
                            let sd = var[j].sqrt();
                            n.cdf((rect.upper()[j] - mean[j]) / sd) - n.cdf((rect.lower()[j] - mean[j]) / sd)
                        })
                        .product()
                }
                Component::Gaussian { .. } => return None,
                Component::BetaProduct { shapes } => (0..self.dim)
                    .map(|j| {
                        let beta = BetaDist::new(shapes[j].0, shapes[j].1).expect("validated shapes");
                        beta.cdf(rect.upper()[j]) - beta.cdf(rect.lower()[j])
                    })
                    .product(),
            };
            total += self.weights[i] * p;
        }
        Some(total / self.normalizer)
    }

    fn expectation(&self, f: &ReferenceFunction) -> Option<f64> {
        let mut acc = 0.0;
        for i in 0..self.components.len() {
            let w = self.weights[i] * self.prepared[i].inside;
            acc += w * self.component_expectation(i, f)?;
        }
        Some(acc / self.normalizer)
    }
}

/// `n` draws from `target`, generated in fixed chunks with independent streams
/// so the result depends only on `seed`, never on the parallelism strategy.
pub fn draw_samples<T: TargetDensity + ?Sized>(target: &T, n: usize, seed: u64, mode: Parallelism) -> Result<SampleSet> {
    if n == 0 {
        return Err(domain("sample size must be positive"));
    }
    let d = target.dim();
    let chunks = n.div_ceil(CHUNK);
    let parts = par::map_range(mode, chunks, |c| {
        let want = CHUNK.min(n - c * CHUNK);
        let mut rng = stream_rng(seed, c as u64);
        let mut out = Vec::with_capacity(want * d);
        let mut buf = vec![0.0; d];
        let (mut accepted, mut attempts) = (0usize, 0usize);
        while accepted < want {
            attempts += 1;
            if target.propose(&mut rng, &mut buf) {
                out.extend_from_slice(&buf);
                accepted += 1;
            }
            if attempts >= 10_000 && (accepted as f64) < MIN_ACCEPTANCE * attempts as f64 {
                return Err(Error::LowAcceptance { accepted, attempts });
            }
        }
        Ok(out)
    });
    let mut data = Vec::with_capacity(n * d);
    for part in parts {
        data.extend(part?);
    }
    SampleSet::from_flat(d, data)
}

/// `n` i.i.d. draws from the truncated mixture; deterministic per seed.
pub fn sample_mixture(spec: &MixtureSpec, n: usize, seed: u64) -> Result<SampleSet> {
    draw_samples(spec, n, seed, Parallelism::default())
}
