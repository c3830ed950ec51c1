//! M-estimator of residual scale.
//!
//! Solves `(1/n) sum rho0(r_i / sigma) = b` for `sigma`. The left side is
//! nonincreasing in `sigma`, running from the fraction of nonzero residuals
//! (as `sigma -> 0`) down to 0, so a positive root exists iff fewer than
//! `(1 - b) n` residuals are exactly zero.

use crate::error::{Error, Result};
use crate::losses::LossFamily;

pub const SCALE_TOL: f64 = 1e-10;
const MAX_FIXED_POINT: usize = 200;
const MAX_BISECTION: usize = 200;
/// `Phi^{-1}(3/4)`; makes the MAD consistent at the normal.
const MAD_CONSISTENCY: f64 = 0.6745;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleEstimate {
    pub sigma: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Set when the scale equation has no unique positive root (exact fit).
    pub degenerate: bool,
}

fn mean_rho(residuals: &[f64], rho0: &LossFamily, sigma: f64) -> f64 {
    residuals.iter().map(|r| rho0.rho(r / sigma)).sum::<f64>() / residuals.len() as f64
}

/// Median of `|r|`; `values` is reordered.
pub(crate) fn median_abs(values: &[f64]) -> f64 {
    let mut abs: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    median_in_place(&mut abs)
}

pub fn median_in_place(values: &mut [f64]) -> f64 {
    let n = values.len();
    if n == 0 {
        return f64::NAN;
    }
    values.sort_by(|a, b| a.total_cmp(b));
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Normalized MAD about zero.
pub fn mad_scale(residuals: &[f64]) -> f64 {
    median_abs(residuals) / MAD_CONSISTENCY
}

/// Solve the scale equation with breakdown constant `b`.
pub fn m_scale(residuals: &[f64], rho0: &LossFamily, b: f64) -> Result<ScaleEstimate> {
    if residuals.is_empty() {
        return Err(Error::InvalidInput("m_scale needs at least one residual".into()));
    }
    if !(b > 0.0 && b < 1.0) {
        return Err(Error::InvalidInput(format!("scale constant b = {b} outside (0, 1)")));
    }
    if residuals.iter().any(|r| r.is_nan()) {
        return Err(Error::InvalidInput("NaN residual".into()));
    }
    let n = residuals.len() as f64;
    let zeros = residuals.iter().filter(|&&r| r == 0.0).count() as f64;
    let zero_budget = (1.0 - b) * n;

    if zeros > zero_budget + 1e-9 {
        return Ok(ScaleEstimate {
            sigma: 0.0,
            iterations: 0,
            converged: true,
            degenerate: true,
        });
    }
    if (zeros - zero_budget).abs() <= 1e-9 {
        // Every sigma in (0, min_nonzero / c] solves the equation; take the supremum.
        let r_min = residuals
            .iter()
            .filter(|&&r| r != 0.0)
            .fold(f64::INFINITY, |m, r| m.min(r.abs()));
        return Ok(ScaleEstimate {
            sigma: r_min / rho0.c,
            iterations: 0,
            converged: true,
            degenerate: true,
        });
    }

    let mut sigma = mad_scale(residuals);
    if !(sigma > 0.0 && sigma.is_finite()) {
        let finite_max = residuals
            .iter()
            .filter(|r| r.is_finite())
            .fold(0.0_f64, |m, r| m.max(r.abs()));
        sigma = if finite_max > 0.0 { finite_max / rho0.c } else { 1.0 };
    }

    let mut iterations = 0;
    for _ in 0..MAX_FIXED_POINT {
        let m = mean_rho(residuals, rho0, sigma);
        if (m - b).abs() <= SCALE_TOL {
            return Ok(ScaleEstimate {
                sigma,
                iterations,
                converged: true,
                degenerate: false,
            });
        }
        iterations += 1;
        sigma *= (m / b).sqrt();
    }

    // Fixed point stalled: bracket by doubling/halving, then bisect.
    let f = |s: f64| mean_rho(residuals, rho0, s) - b;
    let (mut lo, mut hi) = (sigma, sigma);
    while f(lo) < 0.0 {
        lo *= 0.5;
        iterations += 1;
    }
    while f(hi) > 0.0 {
        hi *= 2.0;
        iterations += 1;
    }
    let mut converged = false;
    for _ in 0..MAX_BISECTION {
        iterations += 1;
        sigma = 0.5 * (lo + hi);
        let v = f(sigma);
        if v.abs() <= SCALE_TOL {
            converged = true;
            break;
        }
        if v > 0.0 {
            lo = sigma;
        } else {
            hi = sigma;
        }
        if hi - lo <= 4.0 * f64::EPSILON * sigma {
            converged = f(sigma).abs() <= SCALE_TOL;
            break;
        }
    }
    Ok(ScaleEstimate {
        sigma,
        iterations,
        converged,
        degenerate: false,
    })
}

/// A fixed number of fixed-point steps from `start`, used to rank candidates cheaply.
pub fn approx_scale(residuals: &[f64], rho0: &LossFamily, b: f64, start: f64, steps: usize) -> f64 {
    let mut sigma = if start > 0.0 && start.is_finite() {
        start
    } else {
        mad_scale(residuals)
    };
    if sigma <= 0.0 {
        return 0.0;
    }
    for _ in 0..steps {
        let m = mean_rho(residuals, rho0, sigma);
        sigma *= (m / b).sqrt();
        if sigma == 0.0 {
            break;
        }
    }
    sigma
}
