use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, ArrayView1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::design::{generate, SimData, SimDesign};
use crate::error::{Error, Result};
use crate::glm::{risk_gradient, Dataset, ExponentialFamily};
use crate::penalty::PenaltyKind;
use crate::solver::{path, select_lambda, FitConfig};

/// Coefficients with magnitude at or below this count as zero.
pub const NONZERO_THRESHOLD: f64 = 1e-10;

/// Length of the selection-curve grid.
pub const ROC_POINTS: usize = 10_000;
pub const ROC_MIN_RATIO: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Lasso,
    GroupLasso,
}

impl Estimator {
    pub const ALL: [Estimator; 2] = [Estimator::Lasso, Estimator::GroupLasso];

    pub fn kind(&self) -> PenaltyKind {
        match self {
            Estimator::Lasso => PenaltyKind::Lasso,
            Estimator::GroupLasso => PenaltyKind::GroupLasso,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Estimator::Lasso => "lasso",
            Estimator::GroupLasso => "grouplasso",
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Estimator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s
            .trim()
            .to_ascii_lowercase()
            .replace(['-', '_', ' '], "")
            .as_str()
        {
            "lasso" => Ok(Estimator::Lasso),
            "grouplasso" | "gplasso" => Ok(Estimator::GroupLasso),
            _ => Err(Error::Argument(format!(
                "unknown estimator '{s}' (expected lasso or grouplasso)"
            ))),
        }
    }
}

/// Path settings for the train/validate/test protocol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub n_lambda: usize,
    pub lambda_min_ratio: f64,
    pub fit: FitConfig,
    /// Multiply `fit.tol` by `max(1, |grad R(0)|_inf)` of each training set.
    /// Simulated Poisson counts span several orders of magnitude across
    /// designs, so a fixed absolute KKT target is either loose or unreachable.
    pub scale_tol: bool,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            n_lambda: 100,
            lambda_min_ratio: 0.01,
            fit: FitConfig {
                tol: 1e-6,
                ..FitConfig::default()
            },
            scale_tol: true,
        }
    }
}

/// Tolerance actually used on `data` under `config`.
pub fn effective_tol(data: &Dataset, config: &ProtocolConfig) -> Result<f64> {
    if !config.scale_tol {
        return Ok(config.fit.tol);
    }
    let zero = Array1::zeros(data.p());
    let g = risk_gradient(ExponentialFamily::Poisson, zero.view(), data)?;
    Ok(config.fit.tol * g.iter().fold(1.0_f64, |m, v| m.max(v.abs())))
}

/// Per-replicate selection and error metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicateMetrics {
    pub hit_pct: f64,
    pub fp_pct: f64,
    pub nonzero: f64,
    pub pred_error: f64,
    pub est_error: f64,
}

impl ReplicateMetrics {
    pub fn compute(data: &SimData, beta_hat: ArrayView1<f64>) -> Result<Self> {
        let p = data.beta_star.len();
        if beta_hat.len() != p {
            return Err(Error::Shape(format!(
                "estimate has length {}, expected {p}",
                beta_hat.len()
            )));
        }
        let (mut hits, mut signal, mut fps, mut nonzero) = (0usize, 0usize, 0usize, 0usize);
        for (b, s) in beta_hat.iter().zip(data.beta_star.iter()) {
            let selected = b.abs() > NONZERO_THRESHOLD;
            nonzero += selected as usize;
            if *s != 0.0 {
                signal += 1;
                hits += selected as usize;
            } else {
                fps += selected as usize;
            }
        }
        let pct = |num: usize, den: usize| {
            if den == 0 {
                0.0
            } else {
                100.0 * num as f64 / den as f64
            }
        };
        let diff = &data.beta_star - &beta_hat;
        let pred = data.test.x().dot(&diff);
        Ok(ReplicateMetrics {
            hit_pct: pct(hits, signal),
            fp_pct: pct(fps, p - signal),
            nonzero: nonzero as f64,
            pred_error: pred.dot(&pred).sqrt(),
            est_error: diff.iter().map(|v| v.abs()).sum(),
        })
    }
}

/// Means over replicates, with the protocol settings echoed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimMetrics {
    pub design: super::DesignId,
    pub estimator: String,
    pub seed: u64,
    pub reps: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub n_lambda: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub lambda_min_ratio: Option<f64>,
    pub hit_pct: f64,
    pub fp_pct: f64,
    pub nonzero: f64,
    pub pred_error: f64,
    pub est_error: f64,
}

/// Neumaier-compensated sum.
pub(crate) fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Runs `estimate` on `reps` replicates and averages the metrics.
///
/// Replicates may run in parallel; results are combined in replicate order.
pub fn run_with_estimator<F>(
    design: &SimDesign,
    label: &str,
    reps: usize,
    estimate: F,
) -> Result<SimMetrics>
where
    F: Fn(&SimData) -> Result<Array1<f64>> + Sync,
{
    if reps == 0 {
        return Err(Error::Argument("reps must be >= 1".into()));
    }
    let per_rep: Vec<ReplicateMetrics> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let data = generate(design, r as u64);
            estimate(&data)
                .and_then(|b| ReplicateMetrics::compute(&data, b.view()))
                .map_err(|e| Error::Replicate {
                    replicate: r,
                    source: Box::new(e),
                })
        })
        .collect::<Result<_>>()?;
    let mean =
        |f: fn(&ReplicateMetrics) -> f64| compensated_sum(per_rep.iter().map(f)) / reps as f64;
    Ok(SimMetrics {
        design: design.id,
        estimator: label.to_string(),
        seed: design.seed,
        reps,
        n_lambda: None,
        lambda_min_ratio: None,
        hit_pct: mean(|m| m.hit_pct),
        fp_pct: mean(|m| m.fp_pct),
        nonzero: mean(|m| m.nonzero),
        pred_error: mean(|m| m.pred_error),
        est_error: mean(|m| m.est_error),
    })
}

/// Coefficients selected on the validation split from a path fitted on the training split.
pub fn select_on_validation(
    data: &SimData,
    estimator: Estimator,
    config: &ProtocolConfig,
) -> Result<Array1<f64>> {
    let fam = ExponentialFamily::Poisson;
    let fit = FitConfig {
        tol: effective_tol(&data.train, config)?,
        ..config.fit
    };
    let p = path(
        fam,
        &data.train,
        &data.gs,
        estimator.kind(),
        config.n_lambda,
        config.lambda_min_ratio,
        &fit,
    )?;
    Ok(select_lambda(&p, fam, &data.valid)?.beta_opt)
}

/// Train / validate / test protocol for one design and estimator.
pub fn run_protocol(
    design: &SimDesign,
    estimator: Estimator,
    reps: usize,
    config: &ProtocolConfig,
) -> Result<SimMetrics> {
    config.fit.validate()?;
    let mut m = run_with_estimator(design, estimator.name(), reps, |d| {
        select_on_validation(d, estimator, config)
    })?;
    m.n_lambda = Some(config.n_lambda);
    m.lambda_min_ratio = Some(config.lambda_min_ratio);
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub lambda: f64,
    pub tp_fraction: f64,
    pub fp_fraction: f64,
}

/// Selected-signal and selected-null fractions along a log grid of
/// `n_lambda` points from `lambda_max` down to `1e-4 * lambda_max`, fitted on
/// the training split. Only `config.fit` and `config.scale_tol` are used.
pub fn roc_curve(
    design: &SimDesign,
    estimator: Estimator,
    replicate: u64,
    n_lambda: usize,
    config: &ProtocolConfig,
) -> Result<Vec<RocPoint>> {
    if !design.id.is_roc() {
        return Err(Error::Argument(format!(
            "design {} is not a selection-curve design",
            design.id
        )));
    }
    let data = generate(design, replicate);
    let fit = FitConfig {
        tol: effective_tol(&data.train, config)?,
        ..config.fit
    };
    let res = path(
        ExponentialFamily::Poisson,
        &data.train,
        &data.gs,
        estimator.kind(),
        n_lambda,
        ROC_MIN_RATIO,
        &fit,
    )?;
    let mask = design.signal_mask();
    let n_signal = design.s_star() as f64;
    let n_null = (design.p() - design.s_star()) as f64;
    Ok(res
        .lambda_grid
        .iter()
        .zip(&res.fits)
        .map(|(&lambda, f)| {
            let (mut tp, mut fp) = (0usize, 0usize);
            for (b, &sig) in f.beta_hat.iter().zip(&mask) {
                if b.abs() > NONZERO_THRESHOLD {
                    if sig {
                        tp += 1;
                    } else {
                        fp += 1;
                    }
                }
            }
            RocPoint {
                lambda,
                tp_fraction: tp as f64 / n_signal,
                fp_fraction: fp as f64 / n_null,
            }
        })
        .collect())
}
