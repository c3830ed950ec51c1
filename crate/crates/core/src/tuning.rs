//! BIC-driven choice of the penalty level.
//!
//! `BIC = n ln(sigma^2 sum rho1(r_i / sigma)) + trace(H) ln(n)`, with no `1/n`
//! inside the logarithm.

use nalgebra::DVector;
use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::losses::LossFamily;
use crate::mm::MmFit;
use crate::mmbr::{fit_from_coefficients, lqa_fit, one_step, BrFit, LqaConfig, PenaltySpec};

/// Returned in place of `-inf` when the robust loss is exactly zero.
pub const PERFECT_FIT_BIC: f64 = -1e30;
/// BIC differences at or below this count as ties.
pub const TIE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bic {
    pub value: f64,
    pub perfect_fit: bool,
}

pub fn bic_value(n: usize, robust_loss: f64, hat_trace: f64) -> Bic {
    if robust_loss <= 0.0 {
        return Bic {
            value: PERFECT_FIT_BIC,
            perfect_fit: true,
        };
    }
    let ln_n = (n as f64).ln();
    Bic {
        value: n as f64 * robust_loss.ln() + hat_trace * ln_n,
        perfect_fit: false,
    }
}

pub fn bic(data: &Dataset, fit: &BrFit, rho1: &LossFamily) -> Bic {
    bic_value(data.n(), fit.robust_loss(data, rho1), fit.hat_trace)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub lambda: f64,
    pub gamma: f64,
    pub bic: f64,
    pub hat_trace: f64,
    pub n_active: usize,
    pub objective: f64,
    pub iterations: usize,
    /// Why this grid point produced no usable fit.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneResult {
    /// One entry per grid value, in ascending lambda order.
    pub grid: Vec<GridPoint>,
    pub selected_index: usize,
    pub selected: BrFit,
    pub selected_bic: f64,
}

/// `count` log-spaced values from `2 ||X^T y||_inf` down to `ratio` times that,
/// preceded by zero. Ascending.
pub fn default_grid(data: &Dataset, count: usize, ratio: f64) -> Vec<f64> {
    let lambda_max = 2.0 * data.x.tr_mul(&data.y).amax();
    log_grid(lambda_max * ratio, lambda_max, count, true)
}

/// Like [`default_grid`] but anchored at `2 ||X^T W y||_inf`, with `W` the
/// IRLS weights of the MM fit, so gross outliers in `y` do not set the range.
pub fn robust_grid(data: &Dataset, mm: &MmFit, rho1: &LossFamily, count: usize, ratio: f64) -> Vec<f64> {
    if mm.sigma <= 0.0 {
        return default_grid(data, count, ratio);
    }
    let r = data.residuals(&mm.beta);
    let wy = DVector::from_fn(data.n(), |i, _| rho1.weight(r[i] / mm.sigma) * data.y[i]);
    let lambda_max = 2.0 * data.x.tr_mul(&wy).amax();
    if !(lambda_max > 0.0) {
        return default_grid(data, count, ratio);
    }
    log_grid(lambda_max * ratio, lambda_max, count, true)
}

/// `count` log-spaced values on `[lo, hi]`, optionally preceded by zero.
pub fn log_grid(lo: f64, hi: f64, count: usize, with_zero: bool) -> Vec<f64> {
    let mut grid = Vec::with_capacity(count + 1);
    if with_zero {
        grid.push(0.0);
    }
    if count == 1 || !(hi > lo) {
        grid.push(hi);
        return grid;
    }
    let (a, b) = (lo.ln(), hi.ln());
    for k in 0..count {
        let t = k as f64 / (count - 1) as f64;
        grid.push((a + t * (b - a)).exp());
    }
    grid
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("lambda grid is empty".into()));
    }
    if grid.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
        return Err(Error::InvalidInput("lambda grid values must be finite and >= 0".into()));
    }
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidInput("lambda grid must be sorted ascending".into()));
    }
    Ok(())
}

/// Index of the smallest BIC; near-ties go to the later (larger-lambda) entry.
fn argmin_bic(values: &[Option<f64>]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.iter().enumerate() {
        let Some(v) = *v else { continue };
        best = match best {
            None => Some((i, v)),
            Some((_, b)) if v <= b + TIE_TOL => Some((i, v.min(b))),
            keep => keep,
        };
    }
    best.map(|(i, _)| i)
}

fn select_from(
    data: &Dataset,
    rho1: &LossFamily,
    grid: &[f64],
    gamma: f64,
    fits: Vec<Result<BrFit>>,
) -> Result<TuneResult> {
    let mut points = Vec::with_capacity(grid.len());
    let mut scores = Vec::with_capacity(grid.len());
    let mut kept = Vec::with_capacity(grid.len());
    for (&lambda, fit) in grid.iter().zip(fits) {
        match fit {
            Ok(fit) if fit.converged => {
                let b = bic(data, &fit, rho1);
                points.push(GridPoint {
                    lambda,
                    gamma,
                    bic: b.value,
                    hat_trace: fit.hat_trace,
                    n_active: fit.active_set.len(),
                    objective: fit.objective,
                    iterations: fit.iterations,
                    failure: None,
                });
                scores.push(Some(b.value));
                kept.push(Some(fit));
            }
            Ok(fit) => {
                points.push(failed_point(lambda, gamma, format!(
                    "no convergence in {} iterations",
                    fit.iterations
                )));
                scores.push(None);
                kept.push(None);
            }
            Err(e) => {
                points.push(failed_point(lambda, gamma, e.to_string()));
                scores.push(None);
                kept.push(None);
            }
        }
    }
    let Some(idx) = argmin_bic(&scores) else {
        return Err(Error::SelectionFailed(
            points
                .iter()
                .map(|p| (p.lambda, p.failure.clone().unwrap_or_default()))
                .collect(),
        ));
    };
    let selected = kept[idx].take().expect("selected fit exists");
    Ok(TuneResult {
        selected_bic: points[idx].bic,
        grid: points,
        selected_index: idx,
        selected,
    })
}

fn failed_point(lambda: f64, gamma: f64, why: String) -> GridPoint {
    GridPoint {
        lambda,
        gamma,
        bic: f64::NAN,
        hat_trace: f64::NAN,
        n_active: 0,
        objective: f64::NAN,
        iterations: 0,
        failure: Some(why),
    }
}

/// Fit the LQA estimator at every grid value (from the same start) and keep the BIC minimizer.
pub fn select_lambda(
    data: &Dataset,
    sigma_s: f64,
    rho1: &LossFamily,
    gamma: f64,
    lambda_grid: &[f64],
    beta_init: &DVector<f64>,
    cfg: &LqaConfig,
) -> Result<TuneResult> {
    validate_grid(lambda_grid)?;
    let fits: Vec<Result<BrFit>> = lambda_grid
        .par_iter()
        .map(|&lambda| {
            let penalty = PenaltySpec::new(lambda, gamma)?;
            lqa_fit(data, sigma_s, rho1, &penalty, beta_init, cfg)
        })
        .collect();
    select_from(data, rho1, lambda_grid, gamma, fits)
}

/// Joint search over `gammas`; the best BIC across all `(lambda, gamma)` wins.
pub fn select_lambda_gamma(
    data: &Dataset,
    sigma_s: f64,
    rho1: &LossFamily,
    gammas: &[f64],
    lambda_grid: &[f64],
    beta_init: &DVector<f64>,
    cfg: &LqaConfig,
) -> Result<TuneResult> {
    if gammas.is_empty() {
        return Err(Error::InvalidInput("gamma list is empty".into()));
    }
    let mut best: Option<TuneResult> = None;
    let mut failures = Vec::new();
    for &gamma in gammas {
        match select_lambda(data, sigma_s, rho1, gamma, lambda_grid, beta_init, cfg) {
            Ok(res) => {
                if best.as_ref().is_none_or(|b| res.selected_bic < b.selected_bic - TIE_TOL) {
                    best = Some(res);
                }
            }
            Err(e) => failures.push((gamma, e.to_string())),
        }
    }
    best.ok_or(Error::SelectionFailed(failures))
}

/// BIC selection for the one-step estimator, scored with the same criterion.
pub fn select_one_step(
    data: &Dataset,
    mm: &MmFit,
    rho1: &LossFamily,
    gamma: f64,
    lambda_grid: &[f64],
    cutoff: f64,
) -> Result<TuneResult> {
    validate_grid(lambda_grid)?;
    let fits: Vec<Result<BrFit>> = lambda_grid
        .par_iter()
        .map(|&lambda| {
            let penalty = PenaltySpec::new(lambda, gamma)?;
            let beta = one_step(mm, data, rho1, &penalty, cutoff)?;
            fit_from_coefficients(data, beta, mm.sigma, rho1, &penalty)
        })
        .collect();
    select_from(data, rho1, lambda_grid, gamma, fits)
}
