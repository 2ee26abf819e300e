//! Exponential families, the GLM loss and the empirical risk.
//!
//! The model is canonical and has no intercept: the linear predictor is
//! `theta = beta^T x`, and the per-observation loss is
//! `-y * theta + psi(theta)` where `psi` is the log-partition function.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Largest linear predictor for which `exp` is evaluated (Poisson).
pub const MAX_EXP_ARG: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExponentialFamily {
    Poisson,
    Bernoulli,
    /// Unit dispersion, `psi(theta) = theta^2 / 2`.
    Gaussian,
}

impl ExponentialFamily {
    pub const ALL: [ExponentialFamily; 3] = [
        ExponentialFamily::Poisson,
        ExponentialFamily::Bernoulli,
        ExponentialFamily::Gaussian,
    ];

    /// Natural parameter space. All three supported families live on the real line.
    pub fn theta_domain(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }

    fn check(&self, theta: f64) -> Result<()> {
        if !theta.is_finite() {
            return Err(Error::Domain(format!(
                "non-finite linear predictor {theta}"
            )));
        }
        if *self == ExponentialFamily::Poisson && theta > MAX_EXP_ARG {
            return Err(Error::Range(format!(
                "exp({theta}) overflows (linear predictor above {MAX_EXP_ARG})"
            )));
        }
        Ok(())
    }

    /// Log-partition function.
    pub fn psi(&self, theta: f64) -> Result<f64> {
        self.check(theta)?;
        Ok(self.psi_unchecked(theta))
    }

    pub fn psi_prime(&self, theta: f64) -> Result<f64> {
        self.check(theta)?;
        Ok(self.psi_prime_unchecked(theta))
    }

    pub fn psi_second(&self, theta: f64) -> Result<f64> {
        self.check(theta)?;
        Ok(self.psi_second_unchecked(theta))
    }

    /// Conditional mean `E(Y | theta)`; identical to `psi_prime`.
    pub fn mean(&self, theta: f64) -> Result<f64> {
        self.psi_prime(theta)
    }

    pub(crate) fn psi_unchecked(&self, theta: f64) -> f64 {
        match self {
            ExponentialFamily::Poisson => theta.exp(),
            ExponentialFamily::Bernoulli => {
                if theta > 0.0 {
                    theta + (-theta).exp().ln_1p()
                } else {
                    theta.exp().ln_1p()
                }
            }
            ExponentialFamily::Gaussian => 0.5 * theta * theta,
        }
    }

    pub(crate) fn psi_prime_unchecked(&self, theta: f64) -> f64 {
        match self {
            ExponentialFamily::Poisson => theta.exp(),
            ExponentialFamily::Bernoulli => sigmoid(theta),
            ExponentialFamily::Gaussian => theta,
        }
    }

    pub(crate) fn psi_second_unchecked(&self, theta: f64) -> f64 {
        match self {
            ExponentialFamily::Poisson => theta.exp(),
            ExponentialFamily::Bernoulli => {
                let s = sigmoid(theta);
                s * (1.0 - s)
            }
            ExponentialFamily::Gaussian => 1.0,
        }
    }

    /// `psi(a + d) - psi(a)` without cancellation when `d` is small.
    pub(crate) fn psi_change_unchecked(&self, a: f64, d: f64) -> f64 {
        match self {
            ExponentialFamily::Poisson => a.exp() * d.exp_m1(),
            ExponentialFamily::Gaussian => d * (a + 0.5 * d),
            ExponentialFamily::Bernoulli => {
                if d.abs() > 30.0 {
                    self.psi_unchecked(a + d) - self.psi_unchecked(a)
                } else if a > 0.0 {
                    // psi(t) = t + log1p(e^-t)
                    d + (sigmoid(-a) * (-d).exp_m1()).ln_1p()
                } else {
                    (sigmoid(a) * d.exp_m1()).ln_1p()
                }
            }
        }
    }

    /// Checks every entry of a linear predictor against the family's overflow policy.
    pub(crate) fn check_predictor(&self, eta: ArrayView1<f64>) -> Result<()> {
        for &t in eta.iter() {
            self.check(t)?;
        }
        Ok(())
    }
}

pub(crate) fn sigmoid(theta: f64) -> f64 {
    if theta >= 0.0 {
        1.0 / (1.0 + (-theta).exp())
    } else {
        let e = theta.exp();
        e / (1.0 + e)
    }
}

impl fmt::Display for ExponentialFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ExponentialFamily::Poisson => "poisson",
            ExponentialFamily::Bernoulli => "bernoulli",
            ExponentialFamily::Gaussian => "gaussian",
        };
        f.write_str(s)
    }
}

impl FromStr for ExponentialFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "poisson" => Ok(ExponentialFamily::Poisson),
            "bernoulli" | "binomial" | "logistic" => Ok(ExponentialFamily::Bernoulli),
            "gaussian" | "normal" => Ok(ExponentialFamily::Gaussian),
            other => Err(Error::Argument(format!("unknown family '{other}'"))),
        }
    }
}

/// Design matrix (rows are observations) and response.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Array2<f64>,
    // contiguous transpose for gradient products
    xt: Array2<f64>,
    y: Array1<f64>,
    l_bound: Option<f64>,
}

impl Dataset {
    pub fn new(x: Array2<f64>, y: Array1<f64>) -> Result<Self> {
        let (n, p) = x.dim();
        if n == 0 || p == 0 {
            return Err(Error::Shape(format!("empty design matrix ({n} x {p})")));
        }
        if y.len() != n {
            return Err(Error::Shape(format!(
                "response has length {} but design has {n} rows",
                y.len()
            )));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Domain("dataset contains non-finite entries".into()));
        }
        let xt = x.t().as_standard_layout().into_owned();
        Ok(Dataset {
            x,
            xt,
            y,
            l_bound: None,
        })
    }

    /// Attaches the sup-norm bound `L` on the covariates; fails if any entry exceeds it.
    pub fn with_l_bound(mut self, l: f64) -> Result<Self> {
        if !(l >= 0.0) {
            return Err(Error::Argument(format!(
                "covariate bound must be >= 0, got {l}"
            )));
        }
        let max = self.max_abs_covariate();
        if max > l {
            return Err(Error::Argument(format!(
                "max |X_ij| = {max} exceeds the stated bound {l}"
            )));
        }
        self.l_bound = Some(l);
        Ok(self)
    }

    pub fn x(&self) -> ArrayView2<'_, f64> {
        self.x.view()
    }

    pub fn y(&self) -> ArrayView1<'_, f64> {
        self.y.view()
    }

    pub fn l_bound(&self) -> Option<f64> {
        self.l_bound
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn max_abs_covariate(&self) -> f64 {
        self.x.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Reorders the covariate columns (`order[j]` is the old index of new column `j`).
    pub fn permute_columns(&self, order: &[usize]) -> Result<Dataset> {
        if order.len() != self.p() {
            return Err(Error::Shape("permutation length differs from p".into()));
        }
        let x = self.x.select(ndarray::Axis(1), order);
        let xt = x.t().as_standard_layout().into_owned();
        Ok(Dataset {
            x,
            xt,
            y: self.y.clone(),
            l_bound: self.l_bound,
        })
    }

    pub(crate) fn check_beta(&self, beta: ArrayView1<f64>) -> Result<()> {
        if beta.len() != self.p() {
            return Err(Error::Shape(format!(
                "coefficient vector has length {} but the design has {} columns",
                beta.len(),
                self.p()
            )));
        }
        Ok(())
    }
}

/// Per-observation loss `-y * beta^T x + psi(beta^T x)`.
pub fn loss(
    family: ExponentialFamily,
    beta: ArrayView1<f64>,
    x: ArrayView1<f64>,
    y: f64,
) -> Result<f64> {
    if beta.len() != x.len() {
        return Err(Error::Shape(format!(
            "beta has length {} but x has length {}",
            beta.len(),
            x.len()
        )));
    }
    let theta = beta.dot(&x);
    Ok(-y * theta + family.psi(theta)?)
}

/// Mean loss over the rows of `data`.
pub fn empirical_risk(
    family: ExponentialFamily,
    beta: ArrayView1<f64>,
    data: &Dataset,
) -> Result<f64> {
    data.check_beta(beta)?;
    let eta = data.x.dot(&beta);
    family.check_predictor(eta.view())?;
    Ok(risk_from_predictor(family, eta.view(), data.y.view()))
}

/// Analytic gradient `(1/n) sum_i (psi'(beta^T x_i) - y_i) x_i`.
pub fn risk_gradient(
    family: ExponentialFamily,
    beta: ArrayView1<f64>,
    data: &Dataset,
) -> Result<Array1<f64>> {
    data.check_beta(beta)?;
    let eta = data.x.dot(&beta);
    family.check_predictor(eta.view())?;
    Ok(gradient_from_predictor(family, eta.view(), data))
}

pub(crate) fn risk_from_predictor(
    family: ExponentialFamily,
    eta: ArrayView1<f64>,
    y: ArrayView1<f64>,
) -> f64 {
    let n = eta.len() as f64;
    eta.iter()
        .zip(y.iter())
        .map(|(&t, &yi)| -yi * t + family.psi_unchecked(t))
        .sum::<f64>()
        / n
}

/// Change in empirical risk when the predictor moves from `eta` to `eta + delta`,
/// together with `sum (|y| + |psi'|) |delta| / n`, the size of the terms that
/// cancel in it (its rounding scale).
pub(crate) fn risk_change(
    family: ExponentialFamily,
    eta: ArrayView1<f64>,
    delta: ArrayView1<f64>,
    y: ArrayView1<f64>,
) -> (f64, f64) {
    let n = eta.len() as f64;
    let (mut net, mut gross) = (0.0, 0.0);
    for ((&a, &d), &yi) in eta.iter().zip(delta.iter()).zip(y.iter()) {
        net += -yi * d + family.psi_change_unchecked(a, d);
        gross += (yi.abs() + family.psi_prime_unchecked(a).abs()) * d.abs();
    }
    (net / n, gross / n)
}

pub(crate) fn gradient_from_predictor(
    family: ExponentialFamily,
    eta: ArrayView1<f64>,
    data: &Dataset,
) -> Array1<f64> {
    let n = data.n() as f64;
    let resid: Array1<f64> = eta
        .iter()
        .zip(data.y.iter())
        .map(|(&t, &yi)| family.psi_prime_unchecked(t) - yi)
        .collect();
    data.xt.dot(&resid) / n
}
