//! Constants and oracle-inequality bounds for the Group Lasso, Lasso and
//! Elastic net GLM estimators, plus empirical diagnostics for the Group
//! Stabil condition and the Poisson moment bound.
//!
//! Every calculator is a closed-form expression of its inputs. The universal
//! constant `K` has no known value; it is an input (default 1) and is echoed
//! in every report.

use ndarray::{Array1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glm::{sigmoid, ExponentialFamily, MAX_EXP_ARG};
use crate::penalty::{GroupStructure, SparsityProfile};

/// Inputs shared by the bound calculators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub family: ExponentialFamily,
    /// Sup-norm bound on the covariates.
    pub l: f64,
    /// Bound on the regularizer norm of the true coefficients.
    pub b: f64,
    /// Must exceed sqrt(2).
    pub a: f64,
    /// Universal constant of the concentration step.
    pub k_const: f64,
    pub n: usize,
    pub gs: GroupStructure,
    pub profile: SparsityProfile,
    /// Group Stabil constant (k, and k' for the l2 bounds), in (0, 1).
    pub k_stabil: f64,
}

impl BoundInputs {
    pub fn new(
        family: ExponentialFamily,
        l: f64,
        b: f64,
        n: usize,
        gs: GroupStructure,
        profile: SparsityProfile,
    ) -> Result<Self> {
        let inputs = BoundInputs {
            family,
            l,
            b,
            a: 2.0,
            k_const: 1.0,
            n,
            gs,
            profile,
            k_stabil: 0.5,
        };
        inputs.validate()?;
        Ok(inputs)
    }

    pub fn with_a(mut self, a: f64) -> Result<Self> {
        self.a = a;
        self.validate()?;
        Ok(self)
    }

    pub fn with_k_const(mut self, k: f64) -> Result<Self> {
        self.k_const = k;
        self.validate()?;
        Ok(self)
    }

    pub fn with_k_stabil(mut self, k: f64) -> Result<Self> {
        self.k_stabil = k;
        self.validate()?;
        Ok(self)
    }

    pub fn with_n(mut self, n: usize) -> Result<Self> {
        self.n = n;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.l >= 0.0) || !self.l.is_finite() {
            return Err(Error::Argument(format!(
                "L must be finite and >= 0, got {}",
                self.l
            )));
        }
        if !(self.b > 0.0) || !self.b.is_finite() {
            return Err(Error::Argument(format!(
                "B must be positive, got {}",
                self.b
            )));
        }
        if !(self.a > std::f64::consts::SQRT_2) {
            return Err(Error::Argument(format!(
                "A must exceed sqrt(2), got {}",
                self.a
            )));
        }
        if !(self.k_const > 0.0) {
            return Err(Error::Argument(format!(
                "K must be positive, got {}",
                self.k_const
            )));
        }
        if self.n == 0 {
            return Err(Error::Argument("n must be >= 1".into()));
        }
        if !(self.k_stabil > 0.0 && self.k_stabil < 1.0) {
            return Err(Error::Argument(format!(
                "stabil constant must lie in (0, 1), got {}",
                self.k_stabil
            )));
        }
        if self
            .profile
            .active_groups
            .iter()
            .any(|&g| g >= self.gs.n_groups())
        {
            return Err(Error::Argument(
                "sparsity profile references a missing group".into(),
            ));
        }
        Ok(())
    }

    /// Soft assumption violations; reported, never fatal.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        let ratio = (2.0 * self.gs.n_groups() as f64).ln() / self.n as f64;
        if ratio > 1.0 {
            w.push(format!("log(2 G_n) / n = {ratio} exceeds 1"));
        }
        w
    }

    fn c_n(&self) -> Result<f64> {
        c_n(self.family, self.l, self.b, self.n)
    }
}

/// `17 B + 2 / n`.
pub fn kappa_n(b: f64, n: usize) -> f64 {
    17.0 * b + 2.0 / n as f64
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v >= 0.0) || !v.is_finite() {
        return Err(Error::Argument(format!(
            "{name} must be finite and >= 0, got {v}"
        )));
    }
    Ok(())
}

fn guarded_exp(x: f64) -> Result<f64> {
    if x > MAX_EXP_ARG {
        return Err(Error::Range(format!("exp({x}) overflows")));
    }
    Ok(x.exp())
}

/// Half the minimum of `psi''` over `|x| <= L (9 B + 1/n)`.
pub fn c_n(family: ExponentialFamily, l: f64, b: f64, n: usize) -> Result<f64> {
    check_positive("L", l)?;
    check_positive("B", b)?;
    if n == 0 {
        return Err(Error::Argument("n must be >= 1".into()));
    }
    let radius = l * (9.0 * b + 1.0 / n as f64);
    Ok(match family {
        ExponentialFamily::Poisson => {
            if radius > MAX_EXP_ARG {
                return Err(Error::Range(format!("exp(-{radius}) underflows")));
            }
            0.5 * (-radius).exp()
        }
        ExponentialFamily::Gaussian => 0.5,
        ExponentialFamily::Bernoulli => {
            let s = sigmoid(radius);
            0.5 * s * (1.0 - s)
        }
    })
}

/// Moment constant `C_{L,B}` with `E|Y|^k <= k! C^k`.
///
/// Poisson uses `exp(L B)`; Bernoulli responses are bounded by one. The
/// Gaussian value `max(1, exp(L B + 1/2))` is a surrogate: unit-variance
/// normal moments satisfy `E|Y|^k <= k! e^{k(|mu| + 1/2)}` with `|mu| <= L B`,
/// which is looser than the optimal constant.
pub fn moment_constant(family: ExponentialFamily, l: f64, b: f64) -> Result<f64> {
    check_positive("L", l)?;
    check_positive("B", b)?;
    match family {
        ExponentialFamily::Poisson => guarded_exp(l * b),
        ExponentialFamily::Bernoulli => Ok(1.0),
        ExponentialFamily::Gaussian => Ok(guarded_exp(l * b + 0.5)?.max(1.0)),
    }
}

/// Supremum of `|psi'(x)|` over `|x| <= radius`.
pub fn psi_prime_sup(family: ExponentialFamily, radius: f64) -> Result<f64> {
    check_positive("radius", radius)?;
    match family {
        ExponentialFamily::Poisson => guarded_exp(radius),
        ExponentialFamily::Bernoulli => Ok(sigmoid(radius)),
        ExponentialFamily::Gaussian => Ok(radius),
    }
}

fn threshold_for_count(inputs: &BoundInputs, count: usize) -> Result<f64> {
    inputs.validate()?;
    let c = moment_constant(inputs.family, inputs.l, inputs.b)?;
    let sup = psi_prime_sup(inputs.family, inputs.l * kappa_n(inputs.b, inputs.n))?;
    let rate = ((2.0 * count as f64).ln() / inputs.n as f64).sqrt();
    Ok(inputs.a * inputs.k_const * inputs.l * c.max(sup) * rate)
}

/// Lower bound on `r_n` required by the group lasso bounds (uses `G_n`).
pub fn tuning_threshold(inputs: &BoundInputs) -> Result<f64> {
    threshold_for_count(inputs, inputs.gs.n_groups())
}

/// Lasso / elastic net version of the threshold (uses `p` in place of `G_n`).
pub fn lasso_tuning_threshold(inputs: &BoundInputs) -> Result<f64> {
    threshold_for_count(inputs, inputs.gs.p())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupLassoBounds {
    /// Bound on `||beta_hat - beta*||_R`.
    pub bound_r: f64,
    /// Bound on `||beta_hat - beta*||_{2,1}` (and on the l2 error).
    pub bound_21: f64,
    /// Bound on the expected squared prediction error.
    pub bound_pred: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoBounds {
    pub bound_l1: f64,
    pub bound_pred: f64,
    /// Squared l2 error bound (needs the stronger restricted condition).
    pub bound_l2: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElasticNetBounds {
    pub bound_l1: f64,
    pub bound_pred: f64,
    pub warnings: Vec<String>,
}

fn check_r(r_n: f64, allow_zero: bool) -> Result<()> {
    let ok = if allow_zero { r_n >= 0.0 } else { r_n > 0.0 };
    if !ok || !r_n.is_finite() {
        return Err(Error::Argument(format!("invalid r_n = {r_n}")));
    }
    Ok(())
}

fn threshold_warning(estimator: &str, r_n: f64, threshold: f64) -> Option<String> {
    (r_n < threshold)
        .then(|| format!("r_n = {r_n} is below the {estimator} tuning threshold {threshold}"))
}

// Shared formula bodies. `sparsity` is gamma* for groups and s* for the lasso.

fn estimation_bound(c: f64, k: f64, r: f64, sparsity: f64, n: f64) -> f64 {
    4.0 / (c * k) * r * sparsity + (1.0 + 1.0 / r) / (2.0 * n)
}

fn prediction_bound(c: f64, k: f64, r: f64, sparsity: f64, n: f64) -> f64 {
    16.0 / (c * c * k) * r * r * sparsity + (2.0 * r + 1.0) / (2.0 * c * n)
}

fn l2_bound(c: f64, k: f64, r: f64, sparsity: f64, n: f64, size_ratio: f64) -> f64 {
    10.0 * size_ratio
        * (16.0 / (k * k * c * c) * r * r * sparsity
            + (2.0 * r + 1.0) / (2.0 * k * c * n)
            + 1.0 / (2.0 * k * n))
}

/// Estimation and prediction bounds for the group lasso.
pub fn theorem1_bounds(inputs: &BoundInputs, r_n: f64) -> Result<GroupLassoBounds> {
    check_r(r_n, false)?;
    let c = inputs.c_n()?;
    let (k, n) = (inputs.k_stabil, inputs.n as f64);
    let gamma = inputs.profile.gamma_star as f64;
    let sqrt_dmin = (inputs.gs.d_min() as f64).sqrt();
    let bound_r = estimation_bound(c, k, r_n, gamma, n);
    let bound_21 =
        4.0 / (c * k * sqrt_dmin) * r_n * gamma + (1.0 + 1.0 / r_n) / (2.0 * n * sqrt_dmin);
    let mut warnings = inputs.warnings();
    warnings.extend(threshold_warning(
        "group lasso",
        r_n,
        tuning_threshold(inputs)?,
    ));
    Ok(GroupLassoBounds {
        bound_r,
        bound_21,
        bound_pred: prediction_bound(c, k, r_n, gamma, n),
        warnings,
    })
}

/// Squared l2 estimation bound for the group lasso under the restricted
/// condition over sets of at most `2 m*` groups (with `k' = k_stabil`).
pub fn theorem2_l2_bound(inputs: &BoundInputs, r_n: f64) -> Result<f64> {
    check_r(r_n, true)?;
    let c = inputs.c_n()?;
    let ratio = inputs.gs.d_max() as f64 / inputs.gs.d_min() as f64;
    Ok(l2_bound(
        c,
        inputs.k_stabil,
        r_n,
        inputs.profile.gamma_star as f64,
        inputs.n as f64,
        ratio,
    ))
}

/// Lasso bounds: the group lasso formulas with singleton groups and `s*`.
pub fn theorem3_lasso_bounds(inputs: &BoundInputs, r_n: f64) -> Result<LassoBounds> {
    check_r(r_n, false)?;
    let c = inputs.c_n()?;
    let (k, n) = (inputs.k_stabil, inputs.n as f64);
    let s = inputs.profile.s_star as f64;
    let mut warnings = inputs.warnings();
    warnings.extend(threshold_warning(
        "lasso",
        r_n,
        lasso_tuning_threshold(inputs)?,
    ));
    Ok(LassoBounds {
        bound_l1: estimation_bound(c, k, r_n, s, n),
        bound_pred: prediction_bound(c, k, r_n, s, n),
        bound_l2: l2_bound(c, k, r_n, s, n, 1.0),
        warnings,
    })
}

/// Elastic net bounds; the two levels are assumed coupled through `2 t_n B = r_n`.
pub fn theorem6_elasticnet_bounds(
    inputs: &BoundInputs,
    r_n: f64,
    t_n: f64,
) -> Result<ElasticNetBounds> {
    check_r(r_n, false)?;
    if !(t_n >= 0.0) || !t_n.is_finite() {
        return Err(Error::Argument(format!("invalid t_n = {t_n}")));
    }
    let c = inputs.c_n()?;
    let (k, n) = (inputs.k_stabil, inputs.n as f64);
    let s = inputs.profile.s_star as f64;
    let ck = c * k;
    let bound_l1 = 6.25 / (t_n + ck) * r_n * s + (1.0 + 1.0 / r_n) / (2.0 * n);
    let bound_pred =
        2.0 * 6.25 / (ck * (t_n + ck)) * r_n * r_n * s + (2.0 * r_n + 3.0) / (2.0 * c * n);
    let mut warnings = inputs.warnings();
    let coupled = 2.0 * t_n * inputs.b;
    if (coupled - r_n).abs() > 1e-9 * r_n.max(coupled) {
        warnings.push(format!("2 t_n B = {coupled} differs from r_n = {r_n}"));
    }
    warnings.extend(threshold_warning(
        "lasso",
        r_n,
        lasso_tuning_threshold(inputs)?,
    ));
    Ok(ElasticNetBounds {
        bound_l1,
        bound_pred,
        warnings,
    })
}

/// Flat report of constants and bounds with every input echoed back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub family: ExponentialFamily,
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "K")]
    pub k_const: f64,
    pub n: usize,
    pub g_n: usize,
    pub p: usize,
    pub d_min: usize,
    pub d_max: usize,
    pub m_star: usize,
    pub gamma_star: usize,
    pub s_star: usize,
    pub k_stabil: f64,
    pub r_n: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub t_n: Option<f64>,
    pub epsilon_n: f64,
    pub kappa_n: f64,
    pub c_n: f64,
    pub moment_constant: f64,
    pub tuning_threshold: f64,
    pub lasso_tuning_threshold: f64,
    pub group_lasso_r: f64,
    pub group_lasso_2_1: f64,
    pub group_lasso_pred: f64,
    pub group_lasso_l2_sq: f64,
    pub lasso_l1: f64,
    pub lasso_pred: f64,
    pub lasso_l2_sq: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub elastic_net_l1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub elastic_net_pred: Option<f64>,
    pub warnings: Vec<String>,
}

pub fn bound_report(inputs: &BoundInputs, r_n: f64, t_n: Option<f64>) -> Result<BoundReport> {
    inputs.validate()?;
    let gl = theorem1_bounds(inputs, r_n)?;
    let lasso = theorem3_lasso_bounds(inputs, r_n)?;
    let en = t_n
        .map(|t| theorem6_elasticnet_bounds(inputs, r_n, t))
        .transpose()?;
    let mut warnings = gl.warnings.clone();
    for w in lasso
        .warnings
        .iter()
        .chain(en.iter().flat_map(|e| e.warnings.iter()))
    {
        if !warnings.contains(w) {
            warnings.push(w.clone());
        }
    }
    Ok(BoundReport {
        family: inputs.family,
        l: inputs.l,
        b: inputs.b,
        a: inputs.a,
        k_const: inputs.k_const,
        n: inputs.n,
        g_n: inputs.gs.n_groups(),
        p: inputs.gs.p(),
        d_min: inputs.gs.d_min(),
        d_max: inputs.gs.d_max(),
        m_star: inputs.profile.m_star,
        gamma_star: inputs.profile.gamma_star,
        s_star: inputs.profile.s_star,
        k_stabil: inputs.k_stabil,
        r_n,
        t_n,
        epsilon_n: 1.0 / inputs.n as f64,
        kappa_n: kappa_n(inputs.b, inputs.n),
        c_n: inputs.c_n()?,
        moment_constant: moment_constant(inputs.family, inputs.l, inputs.b)?,
        tuning_threshold: tuning_threshold(inputs)?,
        lasso_tuning_threshold: lasso_tuning_threshold(inputs)?,
        group_lasso_r: gl.bound_r,
        group_lasso_2_1: gl.bound_21,
        group_lasso_pred: gl.bound_pred,
        group_lasso_l2_sq: theorem2_l2_bound(inputs, r_n)?,
        lasso_l1: lasso.bound_l1,
        lasso_pred: lasso.bound_pred,
        lasso_l2_sq: lasso.bound_l2,
        elastic_net_l1: en.as_ref().map(|e| e.bound_l1),
        elastic_net_pred: en.as_ref().map(|e| e.bound_pred),
        warnings,
    })
}

/// Outcome of the sampled Group Stabil search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GSCheckResult {
    /// Smallest ratio `(d^T S d + eps) / sum_{g in H} ||d^g||^2` found; an upper bound on k.
    pub k_hat: f64,
    pub c0: f64,
    pub epsilon: f64,
    pub n_samples: usize,
    pub min_witness: Array1<f64>,
    /// Always true: sampling cannot certify the condition.
    pub heuristic: bool,
}

struct StabilProblem<'a> {
    sigma: ArrayView2<'a, f64>,
    gs: &'a GroupStructure,
    in_h: Vec<bool>,
    c0: f64,
    epsilon: f64,
}

impl StabilProblem<'_> {
    fn weighted(&self, d: &Array1<f64>, inside: bool) -> f64 {
        self.gs
            .ranges()
            .enumerate()
            .filter(|(g, _)| self.in_h[*g] == inside)
            .map(|(g, r)| {
                let b = d.slice(ndarray::s![r]);
                self.gs.weight(g) * b.dot(&b).sqrt()
            })
            .sum()
    }

    fn h_energy(&self, d: &Array1<f64>) -> f64 {
        self.gs
            .ranges()
            .enumerate()
            .filter(|(g, _)| self.in_h[*g])
            .map(|(_, r)| {
                let b = d.slice(ndarray::s![r]);
                b.dot(&b)
            })
            .sum()
    }

    fn ratio(&self, d: &Array1<f64>) -> f64 {
        let denom = self.h_energy(d);
        if denom <= 0.0 {
            return f64::INFINITY;
        }
        (d.dot(&self.sigma.dot(d)) + self.epsilon) / denom
    }

    /// Shrinks the off-support part until the cone constraint holds.
    fn project(&self, d: &mut Array1<f64>) {
        let budget = self.c0 * self.weighted(d, true) + self.epsilon;
        let outside = self.weighted(d, false);
        if outside > budget && outside > 0.0 {
            let s = budget / outside;
            for (g, r) in self.gs.ranges().enumerate() {
                if !self.in_h[g] {
                    d.slice_mut(ndarray::s![r]).mapv_inplace(|v| v * s);
                }
            }
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Array1<f64> {
        let p = self.gs.p();
        let scale = rng.random_range(-3.0f64..3.0).exp();
        let mut d = Array1::<f64>::zeros(p);
        for (g, r) in self.gs.ranges().enumerate() {
            if self.in_h[g] {
                for j in r {
                    d[j] = scale * rng.sample::<f64, _>(StandardNormal);
                }
            }
        }
        let budget = self.c0 * self.weighted(&d, true) + self.epsilon;
        let u: f64 = rng.random_range(0.0..1.0);
        let mut off = Array1::<f64>::zeros(p);
        for (g, r) in self.gs.ranges().enumerate() {
            if !self.in_h[g] {
                for j in r {
                    off[j] = rng.sample::<f64, _>(StandardNormal);
                }
            }
        }
        let w = self.weighted(&off, false);
        if w > 0.0 {
            d += &(off * (u * budget / w));
        }
        d
    }
}

// Keeps the ratio finite when the infimum is only approached at infinity.
const MAX_WITNESS_NORM: f64 = 1e8;

/// Sampled search for the Group Stabil constant `k` of `sigma` on `H*`.
///
/// Draws random directions in the restricted set, refines the best one by a
/// local random search, and reports the smallest ratio found. The result is
/// an upper bound on the true constant, not a certificate.
pub fn check_group_stabil(
    sigma: ArrayView2<f64>,
    gs: &GroupStructure,
    h_star: &[usize],
    c0: f64,
    epsilon: f64,
    n_samples: usize,
    seed: u64,
) -> Result<GSCheckResult> {
    let p = gs.p();
    if sigma.dim() != (p, p) {
        return Err(Error::Shape(format!(
            "sigma is {:?}, expected {p} x {p}",
            sigma.dim()
        )));
    }
    for i in 0..p {
        for j in 0..i {
            if (sigma[[i, j]] - sigma[[j, i]]).abs() > 1e-10 {
                return Err(Error::Argument(format!(
                    "sigma is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    if h_star.is_empty() {
        return Err(Error::Argument(
            "H* is empty; the stabil ratio is undefined".into(),
        ));
    }
    if n_samples == 0 {
        return Err(Error::Argument("n_samples must be >= 1".into()));
    }
    if !(c0 >= 0.0) || !(epsilon >= 0.0) {
        return Err(Error::Argument("c0 and epsilon must be >= 0".into()));
    }
    let mut in_h = vec![false; gs.n_groups()];
    for &g in h_star {
        if g >= gs.n_groups() {
            return Err(Error::Argument(format!("group {g} out of range")));
        }
        in_h[g] = true;
    }
    let prob = StabilProblem {
        sigma,
        gs,
        in_h,
        c0,
        epsilon,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = prob.sample(&mut rng);
    let mut best_ratio = prob.ratio(&best);
    for _ in 1..n_samples {
        let d = prob.sample(&mut rng);
        let r = prob.ratio(&d);
        if r < best_ratio {
            best = d;
            best_ratio = r;
        }
    }

    // local refinement: random perturbations plus rescaling, shrinking radius
    let mut radius = 0.5;
    for _ in 0..2000 {
        let norm = best.dot(&best).sqrt().max(1e-300);
        let mut cand = best.clone();
        for v in cand.iter_mut() {
            *v += radius * norm * rng.sample::<f64, _>(StandardNormal) / (p as f64).sqrt();
        }
        prob.project(&mut cand);
        let mut improved = false;
        for factor in [1.0, 2.0] {
            let mut c = cand.clone() * factor;
            prob.project(&mut c);
            if c.dot(&c).sqrt() > MAX_WITNESS_NORM {
                continue;
            }
            let r = prob.ratio(&c);
            if r < best_ratio {
                best = c;
                best_ratio = r;
                improved = true;
            }
        }
        if !improved {
            radius = (radius * 0.97).max(1e-4);
        }
    }

    Ok(GSCheckResult {
        k_hat: prob.ratio(&best),
        c0,
        epsilon,
        n_samples,
        min_witness: best,
        heuristic: true,
    })
}

/// The restricted condition over several index sets (e.g. every set of at
/// most `2 m*` groups); returns the worst set's result.
pub fn check_group_stabil_sets(
    sigma: ArrayView2<f64>,
    gs: &GroupStructure,
    sets: &[Vec<usize>],
    c0: f64,
    epsilon: f64,
    n_samples: usize,
    seed: u64,
) -> Result<GSCheckResult> {
    let mut worst: Option<GSCheckResult> = None;
    for (i, set) in sets.iter().enumerate() {
        let res = check_group_stabil(
            sigma,
            gs,
            set,
            c0,
            epsilon,
            n_samples,
            seed.wrapping_add(i as u64),
        )?;
        if worst.as_ref().is_none_or(|w| res.k_hat < w.k_hat) {
            worst = Some(res);
        }
    }
    worst.ok_or_else(|| Error::Argument("no index sets given".into()))
}

pub const MAX_BELL_INDEX: u32 = 25;

/// Bell number via the Bell triangle, exact for `k <= 25`.
pub fn bell_number(k: u32) -> Result<u128> {
    if k > MAX_BELL_INDEX {
        return Err(Error::Argument(format!(
            "bell_number supports k <= {MAX_BELL_INDEX}, got {k}"
        )));
    }
    let mut row: Vec<u128> = vec![1];
    for _ in 0..k {
        let mut next = Vec::with_capacity(row.len() + 1);
        next.push(*row.last().unwrap());
        for &v in &row {
            let last = *next.last().unwrap();
            next.push(last + v);
        }
        row = next;
    }
    Ok(row[0])
}

pub fn factorial(k: u32) -> u128 {
    (1..=k as u128).product()
}

/// Whether `B_k <= k!`.
pub fn bell_bound_holds(k: u32) -> Result<bool> {
    Ok(bell_number(k)? <= factorial(k))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub k: u32,
    pub empirical: f64,
    pub std_error: f64,
    /// `k! e^{k L B}`.
    pub bound: f64,
    /// Empirical moment above the bound by more than three standard errors.
    pub violated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub l: f64,
    pub b: f64,
    pub n_samples: usize,
    pub rows: Vec<MomentRow>,
}

impl MomentReport {
    pub fn all_hold(&self) -> bool {
        self.rows.iter().all(|r| !r.violated)
    }
}

/// Monte Carlo check of `E|Y|^k <= k! e^{k L B}` for `Y ~ Poisson(e^theta)`,
/// `theta ~ U(-L B, L B)`.
pub fn poisson_moment_check(
    l: f64,
    b: f64,
    k_max: u32,
    n_samples: usize,
    seed: u64,
) -> Result<MomentReport> {
    check_positive("L", l)?;
    check_positive("B", b)?;
    if !(1..=6).contains(&k_max) {
        return Err(Error::Argument(format!(
            "k_max must lie in 1..=6, got {k_max}"
        )));
    }
    if n_samples < 2 {
        return Err(Error::Argument("need at least two samples".into()));
    }
    let half = l * b;
    guarded_exp(half)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sums = vec![0.0_f64; k_max as usize];
    let mut sq = vec![0.0_f64; k_max as usize];
    for _ in 0..n_samples {
        let theta = if half > 0.0 {
            rng.random_range(-half..=half)
        } else {
            0.0
        };
        let y: f64 = Poisson::new(theta.exp())
            .map_err(|e| Error::Argument(e.to_string()))?
            .sample(&mut rng);
        let mut pow = 1.0;
        for k in 0..k_max as usize {
            pow *= y;
            sums[k] += pow;
            sq[k] += pow * pow;
        }
    }
    let n = n_samples as f64;
    let rows = (0..k_max as usize)
        .map(|i| {
            let k = i as u32 + 1;
            let mean = sums[i] / n;
            let var = ((sq[i] / n - mean * mean) * n / (n - 1.0)).max(0.0);
            let se = (var / n).sqrt();
            let bound = factorial(k) as f64 * (k as f64 * half).exp();
            MomentRow {
                k,
                empirical: mean,
                std_error: se,
                bound,
                violated: mean - bound > 3.0 * se,
            }
        })
        .collect();
    Ok(MomentReport {
        l,
        b,
        n_samples,
        rows,
    })
}
