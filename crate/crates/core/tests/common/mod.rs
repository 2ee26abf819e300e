//! Test-side reference implementations, written with plain loops and no
//! calls into the library's numerical code.

#![allow(dead_code)]

use grpglm::{Dataset, ExponentialFamily, GroupStructure, PenaltyKind, PenaltySpec};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

pub use ExponentialFamily::{Bernoulli, Gaussian, Poisson as PoissonFamily};

pub fn psi(family: ExponentialFamily, t: f64) -> f64 {
    match family {
        ExponentialFamily::Poisson => t.exp(),
        ExponentialFamily::Bernoulli => t.max(0.0) + (-t.abs()).exp().ln_1p(),
        ExponentialFamily::Gaussian => 0.5 * t * t,
    }
}

pub fn mean(family: ExponentialFamily, t: f64) -> f64 {
    match family {
        ExponentialFamily::Poisson => t.exp(),
        ExponentialFamily::Bernoulli => 1.0 / (1.0 + (-t).exp()),
        ExponentialFamily::Gaussian => t,
    }
}

fn predictor(x: &Array2<f64>, beta: &[f64], i: usize) -> f64 {
    (0..beta.len()).map(|j| x[[i, j]] * beta[j]).sum()
}

pub fn risk(family: ExponentialFamily, data: &Dataset, beta: &[f64]) -> f64 {
    let x = data.x().to_owned();
    let y = data.y();
    let n = data.n();
    (0..n)
        .map(|i| {
            let t = predictor(&x, beta, i);
            -y[i] * t + psi(family, t)
        })
        .sum::<f64>()
        / n as f64
}

pub fn gradient(family: ExponentialFamily, data: &Dataset, beta: &[f64]) -> Vec<f64> {
    let x = data.x().to_owned();
    let y = data.y();
    let n = data.n();
    let mut g = vec![0.0; beta.len()];
    for i in 0..n {
        let r = mean(family, predictor(&x, beta, i)) - y[i];
        for (j, gj) in g.iter_mut().enumerate() {
            *gj += r * x[[i, j]];
        }
    }
    g.iter().map(|v| v / n as f64).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn groups(gs: &GroupStructure) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for &d in gs.sizes() {
        out.push(start..start + d);
        start += d;
    }
    out
}

pub fn penalty(spec: &PenaltySpec, gs: &GroupStructure, beta: &[f64]) -> f64 {
    let r = spec.r_n;
    match spec.kind {
        PenaltyKind::GroupLasso => {
            2.0 * r
                * groups(gs)
                    .into_iter()
                    .map(|g| (g.len() as f64).sqrt() * norm(&beta[g]))
                    .sum::<f64>()
        }
        PenaltyKind::Lasso => 2.0 * r * beta.iter().map(|b| b.abs()).sum::<f64>(),
        PenaltyKind::ElasticNet { t_n } => {
            2.0 * r * beta.iter().map(|b| b.abs()).sum::<f64>()
                + t_n * beta.iter().map(|b| b * b).sum::<f64>()
        }
    }
}

pub fn objective(
    family: ExponentialFamily,
    data: &Dataset,
    gs: &GroupStructure,
    spec: &PenaltySpec,
    beta: &[f64],
) -> f64 {
    risk(family, data, beta) + penalty(spec, gs, beta)
}

/// Largest distance from `-grad` to the penalty subdifferential, per block.
pub fn kkt(
    family: ExponentialFamily,
    data: &Dataset,
    gs: &GroupStructure,
    spec: &PenaltySpec,
    beta: &[f64],
) -> f64 {
    let g = gradient(family, data, beta);
    let r = spec.r_n;
    match spec.kind {
        PenaltyKind::GroupLasso => groups(gs)
            .into_iter()
            .map(|rg| {
                let w = 2.0 * r * (rg.len() as f64).sqrt();
                let b = &beta[rg.clone()];
                let gg = &g[rg];
                let nb = norm(b);
                if nb == 0.0 {
                    (norm(gg) - w).max(0.0)
                } else {
                    let v: Vec<f64> = gg.iter().zip(b).map(|(gj, bj)| gj + w * bj / nb).collect();
                    norm(&v)
                }
            })
            .fold(0.0, f64::max),
        PenaltyKind::Lasso | PenaltyKind::ElasticNet { .. } => {
            let t = match spec.kind {
                PenaltyKind::ElasticNet { t_n } => t_n,
                _ => 0.0,
            };
            beta.iter()
                .zip(&g)
                .map(|(&b, &gj)| {
                    if b == 0.0 {
                        (gj.abs() - 2.0 * r).max(0.0)
                    } else {
                        (gj + 2.0 * r * b.signum() + 2.0 * t * b).abs()
                    }
                })
                .fold(0.0, f64::max)
        }
    }
}

/// Smallest `r` with zero optimal, from the gradient at zero.
pub fn zero_threshold(
    family: ExponentialFamily,
    data: &Dataset,
    gs: &GroupStructure,
    kind: PenaltyKind,
) -> f64 {
    let g = gradient(family, data, &vec![0.0; data.p()]);
    match kind {
        PenaltyKind::GroupLasso => groups(gs)
            .into_iter()
            .map(|rg| norm(&g[rg.clone()]) / (2.0 * (rg.len() as f64).sqrt()))
            .fold(0.0, f64::max),
        _ => g.iter().fold(0.0_f64, |m, v| m.max(v.abs())) / 2.0,
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random sizes summing to `p`.
pub fn random_groups(rng: &mut ChaCha8Rng, p: usize) -> GroupStructure {
    let mut sizes = Vec::new();
    let mut left = p;
    while left > 0 {
        let d = rng.random_range(1..=left.min(5));
        sizes.push(d);
        left -= d;
    }
    GroupStructure::new(sizes).unwrap()
}

/// Covariates in `[-1, 1]`, a sparse truth and a response drawn from `family`.
pub fn random_dataset(
    rng: &mut ChaCha8Rng,
    family: ExponentialFamily,
    n: usize,
    p: usize,
) -> Dataset {
    let x = Array2::from_shape_fn((n, p), |_| rng.random_range(-1.0..1.0));
    let beta: Vec<f64> = (0..p)
        .map(|_| {
            if rng.random_bool(0.4) {
                rng.random_range(-1.0..1.0)
            } else {
                0.0
            }
        })
        .collect();
    let y = Array1::from_shape_fn(n, |i| {
        let t = predictor(&x, &beta, i);
        match family {
            ExponentialFamily::Poisson => Poisson::new(t.exp()).unwrap().sample(rng),
            ExponentialFamily::Bernoulli => f64::from(u8::from(rng.random_bool(mean(family, t)))),
            ExponentialFamily::Gaussian => t + rng.sample::<f64, _>(StandardNormal),
        }
    });
    Dataset::new(x, y).unwrap()
}

/// Golden-section minimum of a convex function on `[lo, hi]`.
pub fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let ratio = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - ratio * (hi - lo);
    let mut b = lo + ratio * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    while hi - lo > tol {
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - ratio * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + ratio * (hi - lo);
            fb = f(b);
        }
    }
    0.5 * (lo + hi)
}

/// Minimizer of a convex function of one or two variables on `[-w, w]^p`.
/// Minimizing out the second coordinate leaves a convex function of the
/// first, so nested golden-section search is exact up to `tol`.
pub fn brute_force_min(f: &dyn Fn(&[f64]) -> f64, p: usize, w: f64) -> Vec<f64> {
    let tol = 1e-11;
    match p {
        1 => vec![golden_min(|t| f(&[t]), -w, w, tol)],
        2 => {
            let inner = |b0: f64| golden_min(|b1| f(&[b0, b1]), -w, w, tol);
            let b0 = golden_min(|b0| f(&[b0, inner(b0)]), -w, w, tol);
            vec![b0, inner(b0)]
        }
        _ => panic!("brute force only for p <= 2"),
    }
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
