//! Helpers shared by the integration tests.
#![allow(dead_code, clippy::needless_range_loop)]

use disctree::eval::{Component, Covariance};
use disctree::{is_adjacent, LevelSetTree, MixtureSpec, PiecewiseDensity};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One to three components, each a diagonal Gaussian or a beta product,
/// drawn from `seed`.
pub fn random_mixture(seed: u64, dim: usize) -> MixtureSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = rng.random_range(1..=3);
    let components = (0..k)
        .map(|_| {
            if rng.random_bool(0.5) {
                let mean = (0..dim).map(|_| rng.random_range(0.2..0.8)).collect();
                let var = (0..dim).map(|_| rng.random_range(0.005..0.05)).collect();
                Component::Gaussian { mean, covariance: Covariance::Diagonal(var) }
            } else {
                let shapes = (0..dim).map(|_| (rng.random_range(1.0..8.0), rng.random_range(1.0..8.0))).collect();
                Component::BetaProduct { shapes }
            }
        })
        .collect();
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.2..1.0)).collect();
    let total: f64 = raw.iter().sum();
    MixtureSpec::new(raw.iter().map(|w| w / total).collect(), components).unwrap()
}

/// Connected components of `{cells with density >= level}` by flood fill over
/// pairwise adjacency. Each member cell is labeled with the smallest cell id
/// of its component.
pub fn flood_fill(pd: &PiecewiseDensity, level: f64) -> Vec<Option<usize>> {
    let cells = pd.cells();
    let mut label = vec![None; cells.len()];
    for start in 0..cells.len() {
        if cells[start].density < level || label[start].is_some() {
            continue;
        }
        label[start] = Some(start);
        let mut stack = vec![start];
        while let Some(i) = stack.pop() {
            for j in 0..cells.len() {
                if label[j].is_none() && cells[j].density >= level && is_adjacent(&cells[i].rect, &cells[j].rect).unwrap() {
                    label[j] = Some(start);
                    stack.push(j);
                }
            }
        }
    }
    label
}

/// Checks at every density level of `pd` that two cells share a tree label
/// exactly when the flood fill puts them in one component.
pub fn check_level_sets(pd: &PiecewiseDensity, tree: &LevelSetTree) -> Result<(), String> {
    let mut levels: Vec<f64> = pd.cells().iter().map(|c| c.density).collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let n = pd.len();
    for &level in &levels {
        let oracle = flood_fill(pd, level);
        let labels = tree.components_at(level);
        for i in 0..n {
            if oracle[i].is_some() != labels[i].is_some() {
                return Err(format!("cell {i} membership differs at level {level}"));
            }
            for j in 0..i {
                if oracle[i].is_none() || oracle[j].is_none() {
                    continue;
                }
                if (oracle[i] == oracle[j]) != (labels[i] == labels[j]) {
                    return Err(format!("cells {i} and {j} disagree at level {level}"));
                }
            }
        }
    }
    Ok(())
}

/// Sup of the local discrepancy by direct counting at every candidate anchor.
/// Anchor coordinates are the point coordinates and 1. At an anchor the open
/// box `[0,a)` gives `vol - #{x < a}/n`; boxes slightly larger than `[0,a]`
/// give `#{x <= a}/n - vol` in the limit; at `a_j = 1` the box is closed at
/// the boundary of the cube.
pub fn brute_star(points: &[Vec<f64>]) -> f64 {
    let d = points[0].len();
    let n = points.len() as f64;
    let axes: Vec<Vec<f64>> = (0..d)
        .map(|j| {
            let mut a: Vec<f64> = points.iter().map(|p| p[j]).collect();
            a.push(1.0);
            a
        })
        .collect();
    let mut idx = vec![0usize; d];
    let mut best: f64 = 0.0;
    loop {
        let a: Vec<f64> = (0..d).map(|j| axes[j][idx[j]]).collect();
        let vol: f64 = a.iter().product();
        let open = points.iter().filter(|p| p.iter().zip(&a).all(|(x, c)| x < c)).count() as f64;
        let closed = points
            .iter()
            .filter(|p| p.iter().zip(&a).all(|(x, c)| x <= c))
            .count() as f64;
        best = best.max(vol - open / n).max(closed / n - vol);
        let mut j = 0;
        loop {
            if j == d {
                return best;
            }
            idx[j] += 1;
            if idx[j] < axes[j].len() {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
    }
}

/// Warnock's formula written as the literal triple sum.
pub fn naive_warnock(points: &[Vec<f64>]) -> f64 {
    let n = points.len();
    let d = points[0].len();
    let mut single = 0.0;
    for x in points {
        let mut p = 1.0;
        for k in 0..d {
            p *= 1.0 - x[k] * x[k];
        }
        single += p;
    }
    let mut pair = 0.0;
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            let mut p = 1.0;
            for k in 0..d {
                p *= 1.0 - points[i][k].max(points[j][k]);
            }
            row += p;
        }
        pair += row;
    }
    let nf = n as f64;
    let sq = 3f64.powi(-(d as i32)) - 2f64.powi(1 - d as i32) / nf * single + pair / (nf * nf);
    sq.max(0.0).sqrt()
}

const GAUSS3: [(f64, f64); 3] = [(-0.774_596_669_241_483_4, 5.0 / 9.0), (0.0, 8.0 / 9.0), (0.774_596_669_241_483_4, 5.0 / 9.0)];

/// `sqrt(int (#{x < a}/n - vol(a))^2 da)` by Gauss-Legendre on the cells cut by
/// the point coordinates. The integrand is a polynomial of degree two per
/// coordinate inside each cell, so three nodes per axis integrate it exactly.
pub fn quadrature_l2(points: &[Vec<f64>]) -> f64 {
    let d = points[0].len();
    let n = points.len() as f64;
    let breaks: Vec<Vec<f64>> = (0..d)
        .map(|j| {
            let mut b: Vec<f64> = points.iter().map(|p| p[j]).chain([0.0, 1.0]).collect();
            b.sort_by(f64::total_cmp);
            b.dedup();
            b
        })
        .collect();
    let f = |a: &[f64]| {
        let count = points.iter().filter(|p| p.iter().zip(a).all(|(x, c)| x < c)).count() as f64;
        let vol: f64 = a.iter().product();
        (count / n - vol).powi(2)
    };
    let mut total = 0.0;
    match d {
        1 => {
            for w in breaks[0].windows(2) {
                let (h, m) = ((w[1] - w[0]) / 2.0, (w[1] + w[0]) / 2.0);
                for (t, wt) in GAUSS3 {
                    total += h * wt * f(&[m + h * t]);
                }
            }
        }
        2 => {
            for u in breaks[0].windows(2) {
                for v in breaks[1].windows(2) {
                    let (hu, mu) = ((u[1] - u[0]) / 2.0, (u[1] + u[0]) / 2.0);
                    let (hv, mv) = ((v[1] - v[0]) / 2.0, (v[1] + v[0]) / 2.0);
                    for (s, ws) in GAUSS3 {
                        for (t, wt) in GAUSS3 {
                            total += hu * hv * ws * wt * f(&[mu + hu * s, mv + hv * t]);
                        }
                    }
                }
            }
        }
        _ => unreachable!("quadrature oracle covers d <= 2"),
    }
    total.sqrt()
}
