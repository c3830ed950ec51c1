//! Least-squares LASSO by cyclic coordinate descent.
//!
//! Minimizes `sum (y_i - x_i^T beta)^2 + lambda sum |beta_j|` (sum of squares
//! not halved), so the zero solution is optimal once `lambda >= 2 ||X^T y||_inf`.

use nalgebra::DVector;
use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::tuning::{bic_value, GridPoint, TIE_TOL};

pub const LASSO_TOL: f64 = 1e-8;
const MAX_SWEEPS: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct LassoFit {
    pub beta: DVector<f64>,
    pub lambda: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after each full sweep.
    pub objective_trace: Vec<f64>,
}

pub fn lasso_objective(data: &Dataset, beta: &DVector<f64>, lambda: f64) -> f64 {
    data.residuals(beta).norm_squared() + lambda * beta.lp_norm(1)
}

fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

pub fn lasso_cd(data: &Dataset, lambda: f64) -> Result<LassoFit> {
    lasso_cd_from(data, lambda, &DVector::zeros(data.p()))
}

/// Coordinate descent started from `start`.
pub fn lasso_cd_from(data: &Dataset, lambda: f64, start: &DVector<f64>) -> Result<LassoFit> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidInput(format!("lambda = {lambda} must be >= 0")));
    }
    let p = data.p();
    if start.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: start.len(),
        });
    }
    let x = &data.x;
    let col_sq: Vec<f64> = (0..p).map(|j| x.column(j).norm_squared()).collect();
    let mut beta = start.clone();
    let mut resid = data.residuals(&beta);
    let half = 0.5 * lambda;
    let mut trace = vec![lasso_objective(data, &beta, lambda)];
    let mut converged = false;
    let mut sweeps = 0;

    while sweeps < MAX_SWEEPS {
        sweeps += 1;
        let mut max_change: f64 = 0.0;
        for j in 0..p {
            if col_sq[j] == 0.0 {
                beta[j] = 0.0;
                continue;
            }
            let col = x.column(j);
            let old = beta[j];
            // x_j^T (partial residual without j)
            let z = col.dot(&resid) + col_sq[j] * old;
            let new = soft_threshold(z, half) / col_sq[j];
            if new != old {
                resid.axpy(old - new, &col, 1.0);
                beta[j] = new;
                max_change = max_change.max((new - old).abs());
            }
        }
        trace.push(resid.norm_squared() + lambda * beta.lp_norm(1));
        if max_change <= LASSO_TOL {
            converged = true;
            break;
        }
    }
    Ok(LassoFit {
        beta,
        lambda,
        iterations: sweeps,
        converged,
        objective_trace: trace,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoTune {
    pub grid: Vec<GridPoint>,
    pub selected_index: usize,
    pub selected: LassoFit,
}

/// `n ln(RSS) + |active| ln(n)`; ties go to the larger lambda.
pub fn lasso_bic(data: &Dataset, fit: &LassoFit) -> f64 {
    let rss = data.residuals(&fit.beta).norm_squared();
    let df = fit.beta.iter().filter(|&&b| b != 0.0).count() as f64;
    bic_value(data.n(), rss, df).value
}

pub fn select_lasso(data: &Dataset, lambda_grid: &[f64]) -> Result<LassoTune> {
    if lambda_grid.is_empty() {
        return Err(Error::InvalidInput("lambda grid is empty".into()));
    }
    let fits: Vec<Result<LassoFit>> = lambda_grid.par_iter().map(|&l| lasso_cd(data, l)).collect();
    let mut grid = Vec::with_capacity(fits.len());
    let mut best: Option<(usize, f64)> = None;
    let mut kept = Vec::with_capacity(fits.len());
    let mut failures = Vec::new();
    for (i, (fit, &lambda)) in fits.into_iter().zip(lambda_grid).enumerate() {
        match fit {
            Ok(fit) => {
                let b = lasso_bic(data, &fit);
                grid.push(GridPoint {
                    lambda,
                    gamma: 1.0,
                    bic: b,
                    hat_trace: fit.beta.iter().filter(|&&v| v != 0.0).count() as f64,
                    n_active: fit.beta.iter().filter(|&&v| v != 0.0).count(),
                    objective: lasso_objective(data, &fit.beta, lambda),
                    iterations: fit.iterations,
                    failure: None,
                });
                best = match best {
                    None => Some((i, b)),
                    Some((_, m)) if b <= m + TIE_TOL => Some((i, b.min(m))),
                    keep => keep,
                };
                kept.push(Some(fit));
            }
            Err(e) => {
                failures.push((lambda, e.to_string()));
                kept.push(None);
            }
        }
    }
    let (idx, _) = best.ok_or(Error::SelectionFailed(failures))?;
    Ok(LassoTune {
        grid,
        selected_index: idx,
        selected: kept[idx].take().expect("selected fit exists"),
    })
}
