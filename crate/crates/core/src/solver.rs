//! Penalized maximum-likelihood fitting.
//!
//! The engine is accelerated proximal gradient (FISTA) with a backtracking
//! line search on the smooth part and a function-value restart, so accepted
//! iterates never increase the objective. Convergence is declared on the KKT
//! residual, which doubles as an optimality certificate.

use ndarray::{Array1, ArrayView1, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glm::{
    gradient_from_predictor, risk_change, risk_from_predictor, Dataset, ExponentialFamily,
};
use crate::penalty::{
    penalty_change, penalty_unchecked, prox_in_place, GroupStructure, PenaltyKind, PenaltySpec,
};

const STEP_GROWTH: f64 = 1.25;
const MIN_STEP: f64 = 1e-30;
const DIVERGENCE_FACTOR: f64 = 1e6;
const LINE_SEARCH_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub max_iter: usize,
    /// Target KKT residual.
    pub tol: f64,
    /// Initial step size of the line search.
    pub step: f64,
    /// Backtracking shrink factor in (0, 1).
    pub shrink: f64,
    pub accelerate: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            max_iter: 10_000,
            tol: 1e-7,
            step: 1.0,
            shrink: 0.5,
            accelerate: true,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::Argument("max_iter must be positive".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Argument(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(Error::Argument(format!(
                "step must be positive, got {}",
                self.step
            )));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::Argument(format!(
                "shrink factor must lie in (0, 1), got {}",
                self.shrink
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub beta_hat: Array1<f64>,
    pub active_groups: Vec<usize>,
    /// Objective at the starting point followed by one entry per iteration.
    pub objective_trace: Vec<f64>,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Last accepted step size, reused to start the next fit on a path.
    pub step: f64,
}

impl FitResult {
    pub fn objective(&self) -> f64 {
        *self.objective_trace.last().unwrap()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathResult {
    pub lambda_grid: Vec<f64>,
    pub fits: Vec<FitResult>,
    pub lambda_max: f64,
}

impl PathResult {
    pub fn all_converged(&self) -> bool {
        self.fits.iter().all(|f| f.converged)
    }
}

/// Result of validation-based tuning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub index: usize,
    pub lambda_opt: f64,
    pub beta_opt: Array1<f64>,
    /// Mean squared deviation between validation responses and fitted means.
    pub validation_error: f64,
}

fn check_inputs(data: &Dataset, gs: &GroupStructure) -> Result<()> {
    if gs.p() != data.p() {
        return Err(Error::Shape(format!(
            "group structure covers p = {} but the design has {} columns",
            gs.p(),
            data.p()
        )));
    }
    Ok(())
}

/// KKT residual given the gradient of the smooth part at `beta`.
pub(crate) fn kkt_from_gradient(
    spec: &PenaltySpec,
    gs: &GroupStructure,
    beta: ArrayView1<f64>,
    grad: ArrayView1<f64>,
) -> f64 {
    let two_r = 2.0 * spec.r_n;
    match spec.kind {
        PenaltyKind::GroupLasso => gs
            .ranges()
            .enumerate()
            .map(|(g, r)| {
                let b = beta.slice(ndarray::s![r.clone()]);
                let gr = grad.slice(ndarray::s![r]);
                let w = two_r * gs.weight(g);
                let nb = b.dot(&b).sqrt();
                if nb > 0.0 {
                    b.iter()
                        .zip(gr.iter())
                        .map(|(bj, gj)| {
                            let v = gj + w * bj / nb;
                            v * v
                        })
                        .sum::<f64>()
                        .sqrt()
                } else {
                    (gr.dot(&gr).sqrt() - w).max(0.0)
                }
            })
            .fold(0.0, f64::max),
        PenaltyKind::Lasso | PenaltyKind::ElasticNet { .. } => {
            let two_t = 2.0 * spec.t_n();
            beta.iter()
                .zip(grad.iter())
                .map(|(&b, &g)| {
                    if b != 0.0 {
                        (g + two_r * b.signum() + two_t * b).abs()
                    } else {
                        (g.abs() - two_r).max(0.0)
                    }
                })
                .fold(0.0, f64::max)
        }
    }
}

/// First-order optimality violation of `empirical_risk + penalty` at `beta`.
pub fn kkt_residual(
    family: ExponentialFamily,
    data: &Dataset,
    gs: &GroupStructure,
    spec: &PenaltySpec,
    beta: ArrayView1<f64>,
) -> Result<f64> {
    check_inputs(data, gs)?;
    let grad = crate::glm::risk_gradient(family, beta, data)?;
    Ok(kkt_from_gradient(spec, gs, beta, grad.view()))
}

/// Smallest `r_n` at which the zero vector is optimal.
pub fn lambda_max(
    family: ExponentialFamily,
    data: &Dataset,
    gs: &GroupStructure,
    kind: PenaltyKind,
) -> Result<f64> {
    check_inputs(data, gs)?;
    let zero = Array1::zeros(data.p());
    let grad = crate::glm::risk_gradient(family, zero.view(), data)?;
    Ok(match kind {
        PenaltyKind::GroupLasso => gs
            .ranges()
            .enumerate()
            .map(|(g, r)| {
                let gr = grad.slice(ndarray::s![r]);
                gr.dot(&gr).sqrt() / (2.0 * gs.weight(g))
            })
            .fold(0.0, f64::max),
        PenaltyKind::Lasso | PenaltyKind::ElasticNet { .. } => {
            grad.iter().fold(0.0_f64, |m, g| m.max(g.abs())) / 2.0
        }
    })
}

/// Smooth part evaluated at one point; the gradient is filled in on demand.
struct Point {
    beta: Array1<f64>,
    eta: Array1<f64>,
    grad: Option<Array1<f64>>,
}

struct Problem<'a> {
    family: ExponentialFamily,
    data: &'a Dataset,
    gs: &'a GroupStructure,
    spec: &'a PenaltySpec,
}

impl Problem<'_> {
    fn predictor(&self, beta: &Array1<f64>) -> Option<Array1<f64>> {
        let eta = self.data.x().dot(beta);
        self.family.check_predictor(eta.view()).ok().map(|_| eta)
    }

    fn point(&self, beta: Array1<f64>, eta: Array1<f64>) -> Point {
        Point {
            beta,
            eta,
            grad: None,
        }
    }

    fn with_grad(&self, mut pt: Point) -> Point {
        self.fill_grad(&mut pt);
        pt
    }

    fn fill_grad(&self, pt: &mut Point) {
        if pt.grad.is_none() {
            pt.grad = Some(gradient_from_predictor(
                self.family,
                pt.eta.view(),
                self.data,
            ));
        }
    }

    fn penalty(&self, beta: &Array1<f64>) -> f64 {
        penalty_unchecked(self.spec, self.gs, beta.view())
    }

    /// Objective change from `from` to `beta`, whose predictor is
    /// `from.eta + delta`, computed from differences so that decreases far
    /// below `|F|` are still resolved.
    fn objective_change(&self, from: &Point, beta: &Array1<f64>, delta: &Array1<f64>) -> f64 {
        risk_change(self.family, from.eta.view(), delta.view(), self.data.y()).0
            + penalty_change(self.spec, self.gs, from.beta.view(), beta.view())
    }

    fn kkt(&self, pt: &mut Point) -> f64 {
        self.fill_grad(pt);
        kkt_from_gradient(
            self.spec,
            self.gs,
            pt.beta.view(),
            pt.grad.as_ref().unwrap().view(),
        )
    }
}

// With momentum on, the KKT residual at x costs an extra gradient, so it is
// only checked every few iterations.
const KKT_INTERVAL: usize = 4;

/// Minimizes `empirical_risk + penalty_value` starting from `warm_start` (or zero).
pub fn fit(
    family: ExponentialFamily,
    data: &Dataset,
    gs: &GroupStructure,
    spec: &PenaltySpec,
    config: &FitConfig,
    warm_start: Option<ArrayView1<f64>>,
) -> Result<FitResult> {
    config.validate()?;
    check_inputs(data, gs)?;
    if spec.r_n == 0.0 && data.p() > data.n() {
        return Err(Error::Argument(format!(
            "an unpenalized fit needs p <= n (p = {}, n = {})",
            data.p(),
            data.n()
        )));
    }
    let problem = Problem {
        family,
        data,
        gs,
        spec,
    };

    let start = match warm_start {
        Some(b) => {
            data.check_beta(b)?;
            b.to_owned()
        }
        None => Array1::zeros(data.p()),
    };
    let eta = problem.predictor(&start).ok_or_else(|| Error::Divergence {
        iteration: 0,
        reason: "starting point leaves the overflow-safe region".into(),
    })?;
    let mut x = problem.point(start, eta);
    let mut fx = risk_from_predictor(family, x.eta.view(), data.y()) + problem.penalty(&x.beta);
    let f0 = fx;
    let mut trace = vec![fx];
    let mut kkt = problem.kkt(&mut x);
    let mut step = config.step;

    let finish = |x: Point, trace: Vec<f64>, kkt: f64, iterations: usize, step: f64| {
        let active_groups = gs
            .ranges()
            .enumerate()
            .filter(|(_, r)| {
                x.beta
                    .slice(ndarray::s![r.clone()])
                    .iter()
                    .any(|&v| v != 0.0)
            })
            .map(|(g, _)| g)
            .collect();
        FitResult {
            beta_hat: x.beta,
            active_groups,
            objective_trace: trace,
            kkt_residual: kkt,
            iterations,
            converged: kkt <= config.tol,
            step,
        }
    };

    if kkt <= config.tol {
        return Ok(finish(x, trace, kkt, 0, step));
    }

    // extrapolated point; `None` means it coincides with `x`
    let mut y: Option<Point> = None;
    let mut theta = 1.0_f64;
    let mut iterations = 0;
    let mut kkt_fresh = true;

    for it in 1..=config.max_iter {
        iterations = it;
        if y.is_none() {
            problem.fill_grad(&mut x);
        }
        let base = y.as_ref().unwrap_or(&x);
        let base_grad = base.grad.as_ref().expect("gradient at the base point");

        let (z, eta_z, delta) = loop {
            let mut z = &base.beta - &(base_grad * step);
            prox_in_place(spec, gs, &mut z, step);
            let d = &z - &base.beta;
            let delta = data.x().dot(&d);
            let eta_z = &base.eta + &delta;
            if z == base.beta {
                break (z, eta_z, delta);
            }
            if family.check_predictor(eta_z.view()).is_ok() {
                let (rise, scale) = risk_change(family, base.eta.view(), delta.view(), data.y());
                let lin = base_grad.dot(&d);
                let quad = d.dot(&d) / (2.0 * step);
                // differences below the rounding scale of the cancelling terms count as satisfied
                if rise <= lin + quad + LINE_SEARCH_SLACK * scale {
                    break (z, eta_z, delta);
                }
            }
            step *= config.shrink;
            if step < MIN_STEP {
                return Err(Error::Divergence {
                    iteration: it,
                    reason: "line search step underflow".into(),
                });
            }
        };
        let moved = z != x.beta;
        let change = if y.is_some() {
            problem.objective_change(&x, &z, &(&eta_z - &x.eta))
        } else {
            problem.objective_change(&x, &z, &delta)
        };

        let momentum = y.is_some();
        if moved && change <= 0.0 {
            let prev = std::mem::replace(&mut x, problem.point(z, eta_z));
            fx += change;
            y = None;
            if config.accelerate {
                let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
                let coef = (theta - 1.0) / theta_next;
                theta = theta_next;
                if coef > 0.0 {
                    let mut yb = x.beta.clone();
                    Zip::from(&mut yb)
                        .and(&prev.beta)
                        .for_each(|a, &b| *a += coef * (*a - b));
                    let mut ye = x.eta.clone();
                    Zip::from(&mut ye)
                        .and(&prev.eta)
                        .for_each(|a, &b| *a += coef * (*a - b));
                    if family.check_predictor(ye.view()).is_ok() {
                        y = Some(problem.with_grad(problem.point(yb, ye)));
                    } else {
                        theta = 1.0;
                    }
                }
            }
            step *= STEP_GROWTH;
            kkt_fresh = false;
        } else if momentum {
            // objective went up: drop the momentum and retry from x
            y = None;
            theta = 1.0;
        } else {
            // a plain proximal step from x no longer decreases the objective:
            // the floating-point floor
            trace.push(fx);
            kkt = problem.kkt(&mut x);
            kkt_fresh = true;
            break;
        }

        if !fx.is_finite() || fx > f0.abs() * DIVERGENCE_FACTOR + f0 {
            return Err(Error::Divergence {
                iteration: it,
                reason: format!("objective {fx} exceeds the starting value {f0} by 1e6x"),
            });
        }
        trace.push(fx);
        if y.is_none() || it % KKT_INTERVAL == 0 || it == config.max_iter {
            kkt = problem.kkt(&mut x);
            kkt_fresh = true;
            if kkt <= config.tol {
                break;
            }
        }
    }
    if !kkt_fresh {
        kkt = problem.kkt(&mut x);
    }

    Ok(finish(x, trace, kkt, iterations, step))
}

/// Logarithmic grid from `lambda_max` down to `ratio * lambda_max`.
pub fn lambda_grid(lambda_max: f64, n_lambda: usize, ratio: f64) -> Result<Vec<f64>> {
    if n_lambda < 2 {
        return Err(Error::Argument(format!(
            "n_lambda must be >= 2, got {n_lambda}"
        )));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Argument(format!(
            "ratio must lie in (0, 1), got {ratio}"
        )));
    }
    if !(lambda_max > 0.0) || !lambda_max.is_finite() {
        return Err(Error::Argument(format!(
            "lambda_max = {lambda_max}: the null model is optimal for every penalty level"
        )));
    }
    let last = (n_lambda - 1) as f64;
    Ok((0..n_lambda)
        .map(|k| {
            if k == 0 {
                lambda_max
            } else {
                lambda_max * ratio.powf(k as f64 / last)
            }
        })
        .collect())
}

/// Regularization path with warm starts.
pub fn path(
    family: ExponentialFamily,
    data: &Dataset,
    gs: &GroupStructure,
    kind: PenaltyKind,
    n_lambda: usize,
    ratio: f64,
    config: &FitConfig,
) -> Result<PathResult> {
    let lmax = lambda_max(family, data, gs, kind)?;
    let grid = lambda_grid(lmax, n_lambda, ratio)?;
    path_on_grid(family, data, gs, kind, lmax, grid, config)
}

pub(crate) fn path_on_grid(
    family: ExponentialFamily,
    data: &Dataset,
    gs: &GroupStructure,
    kind: PenaltyKind,
    lmax: f64,
    grid: Vec<f64>,
    config: &FitConfig,
) -> Result<PathResult> {
    let mut fits: Vec<FitResult> = Vec::with_capacity(grid.len());
    let mut cfg = *config;
    for (index, &lambda) in grid.iter().enumerate() {
        let wrap = |e: Error| Error::Path {
            index,
            lambda,
            source: Box::new(e),
        };
        let spec = PenaltySpec::new(kind, lambda).map_err(wrap)?;
        let warm = fits.last().map(|f| f.beta_hat.view());
        let res = fit(family, data, gs, &spec, &cfg, warm).map_err(wrap)?;
        cfg.step = res.step;
        fits.push(res);
    }
    Ok(PathResult {
        lambda_grid: grid,
        fits,
        lambda_max: lmax,
    })
}

/// Mean squared deviation between responses and fitted means.
pub fn validation_error(
    family: ExponentialFamily,
    beta: ArrayView1<f64>,
    data: &Dataset,
) -> Result<f64> {
    data.check_beta(beta)?;
    let eta = data.x().dot(&beta);
    let n = data.n() as f64;
    let sse: f64 = eta
        .iter()
        .zip(data.y().iter())
        .map(|(&t, &y)| {
            let mu = if t.is_finite()
                && (family != ExponentialFamily::Poisson || t <= crate::glm::MAX_EXP_ARG)
            {
                family.psi_prime_unchecked(t)
            } else {
                f64::INFINITY
            };
            (y - mu).powi(2)
        })
        .sum();
    Ok(if sse.is_finite() {
        sse / n
    } else {
        f64::INFINITY
    })
}

/// Picks the path point with the smallest validation error; exact ties go to the larger lambda.
pub fn select_lambda(
    path: &PathResult,
    family: ExponentialFamily,
    valid: &Dataset,
) -> Result<Selection> {
    if path.fits.is_empty() {
        return Err(Error::Argument("empty path".into()));
    }
    let mut best: Option<(usize, f64)> = None;
    for (k, f) in path.fits.iter().enumerate() {
        let err = validation_error(family, f.beta_hat.view(), valid)?;
        if best.is_none_or(|(_, b)| err < b) {
            best = Some((k, err));
        }
    }
    let (index, validation_error) = best.unwrap();
    Ok(Selection {
        index,
        lambda_opt: path.lambda_grid[index],
        beta_opt: path.fits[index].beta_hat.clone(),
        validation_error,
    })
}
