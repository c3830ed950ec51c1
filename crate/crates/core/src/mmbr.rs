//! MM-bridge estimation: the bounded MM loss at a fixed scale plus an
//! `L_gamma` penalty,
//!
//! ```text
//! L(beta) = sigma^2 sum rho1(r_i / sigma) + lambda sum |beta_j|^gamma
//! ```
//!
//! minimized by local quadratic approximation of the penalty (a sequence of
//! weighted ridge solves), with near-zero coordinates deleted as they appear.
//! Also provides the hat-matrix trace used for BIC and the closed-form
//! one-step estimator built from a quadratic expansion at the MM fit.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{lu_solve, offending_coordinates, select_columns, weighted_cross, weighted_gram};
use crate::losses::LossFamily;
use crate::mm::MmFit;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltySpec {
    pub lambda: f64,
    pub gamma: f64,
}

impl PenaltySpec {
    pub fn new(lambda: f64, gamma: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidInput(format!("lambda = {lambda} must be >= 0")));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidInput(format!("gamma = {gamma} must be > 0")));
        }
        Ok(Self { lambda, gamma })
    }

    pub fn value(&self, beta: &DVector<f64>) -> f64 {
        if self.lambda == 0.0 {
            return 0.0;
        }
        self.lambda * beta.iter().map(|b| b.abs().powf(self.gamma)).sum::<f64>()
    }

    fn is_active(&self) -> bool {
        self.lambda > 0.0
    }
}

/// How the LQA handles coordinates that approach zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ZeroHandling {
    /// Set `|beta_j| < cutoff` to zero and drop the column for good.
    Delete,
    /// Keep every column and use `(|beta_j| + eps)^(gamma - 2)` as the penalty weight.
    Perturb(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LqaConfig {
    pub cutoff: f64,
    /// Stop when no coordinate moves more than this.
    pub tol: f64,
    pub max_iter: usize,
    pub zero_handling: ZeroHandling,
}

pub const DEFAULT_CUTOFF: f64 = 1e-5;

impl Default for LqaConfig {
    fn default() -> Self {
        Self {
            cutoff: DEFAULT_CUTOFF,
            tol: DEFAULT_CUTOFF,
            max_iter: 500,
            zero_handling: ZeroHandling::Delete,
        }
    }
}

impl LqaConfig {
    /// Default configuration with the stopping tolerance tied to `cutoff`.
    pub fn with_cutoff(cutoff: f64) -> Self {
        Self {
            cutoff,
            tol: cutoff,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BrFit {
    /// Full-length coefficients; exactly zero off the active set.
    pub beta: DVector<f64>,
    pub active_set: Vec<usize>,
    pub sigma: f64,
    pub penalty: PenaltySpec,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub hat_trace: f64,
    /// Objective at the start and after every iteration.
    pub objective_trace: Vec<f64>,
    /// Iterations whose objective went up. Not fatal: deletion and the
    /// inexact inner step void the descent guarantee.
    pub non_monotone_steps: usize,
}

impl BrFit {
    /// Robust part of the objective, `sigma^2 sum rho1(r_i / sigma)`.
    pub fn robust_loss(&self, data: &Dataset, rho1: &LossFamily) -> f64 {
        robust_loss(data, &self.beta, self.sigma, rho1)
    }
}

pub fn robust_loss(data: &Dataset, beta: &DVector<f64>, sigma: f64, rho1: &LossFamily) -> f64 {
    let s2 = sigma * sigma;
    s2 * data
        .residuals(beta)
        .iter()
        .map(|r| rho1.rho(r / sigma))
        .sum::<f64>()
}

/// Penalized objective `L(beta)`.
pub fn br_objective(
    data: &Dataset,
    beta: &DVector<f64>,
    sigma: f64,
    rho1: &LossFamily,
    penalty: &PenaltySpec,
) -> f64 {
    robust_loss(data, beta, sigma, rho1) + penalty.value(beta)
}

/// Gradient of [`br_objective`]; valid where every `beta_j` is nonzero (or `gamma > 1`).
pub fn objective_gradient(
    data: &Dataset,
    beta: &DVector<f64>,
    sigma: f64,
    rho1: &LossFamily,
    penalty: &PenaltySpec,
) -> DVector<f64> {
    let psi = data.residuals(beta).map(|r| rho1.psi(r / sigma));
    let mut g = data.x.tr_mul(&psi) * (-sigma);
    if penalty.is_active() {
        for (gj, bj) in g.iter_mut().zip(beta.iter()) {
            if *bj != 0.0 {
                *gj += penalty.lambda * penalty.gamma * bj.abs().powf(penalty.gamma - 1.0) * bj.signum();
            }
        }
    }
    g
}

/// Solve `(X^T W X + lam_gamma W0) beta = X^T W y` for diagonal `W`, `W0`.
pub fn weighted_penalized_solve(
    x: &DMatrix<f64>,
    w: &DVector<f64>,
    w0: &DVector<f64>,
    lam_gamma: f64,
    y: &DVector<f64>,
) -> Result<DVector<f64>> {
    if w.len() != x.nrows() || y.len() != x.nrows() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            found: w.len().min(y.len()),
        });
    }
    if w0.len() != x.ncols() {
        return Err(Error::DimensionMismatch {
            expected: x.ncols(),
            found: w0.len(),
        });
    }
    if w.iter().chain(w0.iter()).any(|v| !(v.is_finite() && *v >= 0.0)) || !(lam_gamma >= 0.0) {
        return Err(Error::InvalidInput("weights must be finite and nonnegative".into()));
    }
    let system = penalized_system(x, w, w0, lam_gamma);
    let rhs = weighted_cross(x, w, y);
    let chol = Cholesky::new(system.clone()).ok_or_else(|| Error::SingularSystem {
        coords: offending_coordinates(&system),
    })?;
    let beta = chol.solve(&rhs);
    if beta.iter().all(|v| v.is_finite()) {
        Ok(beta)
    } else {
        Err(Error::SingularSystem {
            coords: offending_coordinates(&system),
        })
    }
}

fn penalized_system(
    x: &DMatrix<f64>,
    w: &DVector<f64>,
    w0: &DVector<f64>,
    lam_gamma: f64,
) -> DMatrix<f64> {
    let mut system = weighted_gram(x, w);
    if lam_gamma > 0.0 {
        for j in 0..system.nrows() {
            system[(j, j)] += lam_gamma * w0[j];
        }
    }
    system
}

/// `|beta_j|^(gamma - 2)` (or the perturbed form) on the given coordinates.
fn penalty_weights(beta: &[f64], gamma: f64, handling: ZeroHandling) -> DVector<f64> {
    DVector::from_iterator(
        beta.len(),
        beta.iter().map(|b| {
            if gamma == 2.0 {
                1.0
            } else {
                match handling {
                    ZeroHandling::Delete => b.abs().powf(gamma - 2.0),
                    ZeroHandling::Perturb(eps) => (b.abs() + eps).powf(gamma - 2.0),
                }
            }
        }),
    )
}

fn deletes(penalty: &PenaltySpec, cfg: &LqaConfig) -> bool {
    penalty.is_active() && penalty.gamma < 2.0 && cfg.zero_handling == ZeroHandling::Delete
}

fn inflate(p: usize, active: &[usize], values: &DVector<f64>) -> DVector<f64> {
    let mut full = DVector::zeros(p);
    for (k, &j) in active.iter().enumerate() {
        full[j] = values[k];
    }
    full
}

/// LQA iteration started at `beta_init` (normally the MM estimate).
pub fn lqa_fit(
    data: &Dataset,
    sigma_s: f64,
    rho1: &LossFamily,
    penalty: &PenaltySpec,
    beta_init: &DVector<f64>,
    cfg: &LqaConfig,
) -> Result<BrFit> {
    let p = data.p();
    if beta_init.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: beta_init.len(),
        });
    }
    if !(sigma_s > 0.0 && sigma_s.is_finite()) {
        return Err(Error::InvalidInput(format!("LQA needs a positive scale, got {sigma_s}")));
    }
    let delete = deletes(penalty, cfg);
    let lam_gamma = if penalty.is_active() {
        penalty.lambda * penalty.gamma
    } else {
        0.0
    };

    let mut beta = beta_init.clone();
    let mut active: Vec<usize> = Vec::with_capacity(p);
    for j in 0..p {
        if delete && beta[j].abs() < cfg.cutoff {
            beta[j] = 0.0;
        } else {
            active.push(j);
        }
    }

    let mut objective = br_objective(data, &beta, sigma_s, rho1, penalty);
    let mut trace = vec![objective];
    let mut non_monotone = 0;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < cfg.max_iter {
        if active.is_empty() {
            converged = true;
            break;
        }
        iterations += 1;
        let w = data.residuals(&beta).map(|r| rho1.weight(r / sigma_s));
        let beta_active: Vec<f64> = active.iter().map(|&j| beta[j]).collect();
        let w0 = if lam_gamma > 0.0 {
            penalty_weights(&beta_active, penalty.gamma, cfg.zero_handling)
        } else {
            DVector::zeros(active.len())
        };
        if w.iter().chain(w0.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvariantViolation(
                "non-finite LQA weight on the active set".into(),
            ));
        }
        let xa = select_columns(&data.x, &active);
        let solved = weighted_penalized_solve(&xa, &w, &w0, lam_gamma, &data.y).map_err(|e| {
            match e {
                Error::SingularSystem { coords } => Error::SingularSystem {
                    coords: coords.into_iter().map(|k| active[k]).collect(),
                },
                other => other,
            }
        })?;
        let mut next = inflate(p, &active, &solved);
        if delete {
            active.retain(|&j| {
                if next[j].abs() < cfg.cutoff {
                    next[j] = 0.0;
                    false
                } else {
                    true
                }
            });
        }

        let step = (&next - &beta).amax();
        beta = next;
        let obj = br_objective(data, &beta, sigma_s, rho1, penalty);
        if obj > objective * (1.0 + 1e-12) + 1e-300 {
            non_monotone += 1;
        }
        objective = obj;
        trace.push(objective);
        if step <= cfg.tol {
            converged = true;
            break;
        }
    }
    if active.is_empty() {
        converged = true;
    }

    let mut fit = BrFit {
        beta,
        active_set: active,
        sigma: sigma_s,
        penalty: *penalty,
        objective,
        iterations,
        converged,
        hat_trace: 0.0,
        objective_trace: trace,
        non_monotone_steps: non_monotone,
    };
    fit.hat_trace = hat_trace_with(data, &fit, rho1, cfg.zero_handling)?;
    Ok(fit)
}

/// `trace(X (X^T W X + lambda gamma W0)^{-1} X^T W)` on the active columns.
pub fn hat_trace(data: &Dataset, fit: &BrFit, rho1: &LossFamily) -> Result<f64> {
    hat_trace_with(data, fit, rho1, ZeroHandling::Delete)
}

fn hat_trace_with(
    data: &Dataset,
    fit: &BrFit,
    rho1: &LossFamily,
    handling: ZeroHandling,
) -> Result<f64> {
    if fit.active_set.is_empty() {
        return Ok(0.0);
    }
    let sigma = fit.sigma;
    let w = data.residuals(&fit.beta).map(|r| rho1.weight(r / sigma));
    let xa = select_columns(&data.x, &fit.active_set);
    let gram = weighted_gram(&xa, &w);
    let lam_gamma = if fit.penalty.is_active() {
        fit.penalty.lambda * fit.penalty.gamma
    } else {
        0.0
    };
    let beta_active: Vec<f64> = fit.active_set.iter().map(|&j| fit.beta[j]).collect();
    let w0 = if lam_gamma > 0.0 {
        penalty_weights(&beta_active, fit.penalty.gamma, handling)
    } else {
        DVector::zeros(beta_active.len())
    };
    let system = penalized_system(&xa, &w, &w0, lam_gamma);
    let chol = Cholesky::new(system.clone()).ok_or_else(|| Error::SingularSystem {
        coords: offending_coordinates(&system)
            .into_iter()
            .map(|k| fit.active_set[k])
            .collect(),
    })?;
    // trace(A^{-1} M) where M = X^T W X
    let prod = chol.solve(&gram);
    Ok(prod.trace())
}

/// One-step estimator `(D + lambda gamma W0(beta_mm))^{-1} D beta_mm`,
/// with `D = X^T diag(psi1'(r_i / sigma)) X` at the MM fit.
pub fn one_step(
    mm: &MmFit,
    data: &Dataset,
    rho1: &LossFamily,
    penalty: &PenaltySpec,
    cutoff: f64,
) -> Result<DVector<f64>> {
    let p = data.p();
    if mm.beta.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: mm.beta.len(),
        });
    }
    if !penalty.is_active() {
        return Ok(mm.beta.clone());
    }
    if !(mm.sigma > 0.0) {
        return Err(Error::InvalidInput("one-step estimator needs a positive scale".into()));
    }
    let delete = penalty.gamma < 2.0;
    let active: Vec<usize> = (0..p)
        .filter(|&j| !(delete && mm.beta[j].abs() < cutoff))
        .collect();
    if active.is_empty() {
        return Ok(DVector::zeros(p));
    }
    let curvature = data.residuals(&mm.beta).map(|r| rho1.psi_prime(r / mm.sigma));
    let xa = select_columns(&data.x, &active);
    let d = weighted_gram(&xa, &curvature);
    let beta_a = DVector::from_iterator(active.len(), active.iter().map(|&j| mm.beta[j]));
    let w0 = penalty_weights(beta_a.as_slice(), penalty.gamma, ZeroHandling::Delete);
    let mut system = d.clone();
    for k in 0..active.len() {
        system[(k, k)] += penalty.lambda * penalty.gamma * w0[k];
    }
    let rhs = &d * &beta_a;
    let solved = lu_solve(&system, &rhs).map_err(|e| match e {
        Error::SingularSystem { coords } => Error::SingularSystem {
            coords: coords.into_iter().map(|k| active[k]).collect(),
        },
        other => other,
    })?;
    Ok(inflate(p, &active, &solved))
}

/// Wrap a coefficient vector (e.g. a one-step estimate) as a [`BrFit`] so it
/// can be scored like an LQA fit.
pub fn fit_from_coefficients(
    data: &Dataset,
    beta: DVector<f64>,
    sigma: f64,
    rho1: &LossFamily,
    penalty: &PenaltySpec,
) -> Result<BrFit> {
    let active_set: Vec<usize> = (0..beta.len()).filter(|&j| beta[j] != 0.0).collect();
    let objective = br_objective(data, &beta, sigma, rho1, penalty);
    let mut fit = BrFit {
        beta,
        active_set,
        sigma,
        penalty: *penalty,
        objective,
        iterations: 1,
        converged: true,
        hat_trace: 0.0,
        objective_trace: vec![objective],
        non_monotone_steps: 0,
    };
    fit.hat_trace = hat_trace(data, &fit, rho1)?;
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn rho1() -> LossFamily {
        LossFamily::bisquare(3.44)
    }

    fn random_data(n: usize, p: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let beta = DVector::from_fn(p, |j, _| if j % 2 == 0 { 1.5 } else { 0.0 });
        let noise = DVector::from_fn(n, |_, _| 0.5 * rng.sample::<f64, _>(StandardNormal));
        let y = &x * beta + noise;
        Dataset::new(x, y).unwrap()
    }

    #[test]
    fn solve_reduces_to_ols() {
        let data = random_data(12, 3, 1);
        let w = DVector::from_element(12, 1.0);
        let beta =
            weighted_penalized_solve(&data.x, &w, &DVector::zeros(3), 0.0, &data.y).unwrap();
        let ols = crate::sinit::ols(&data.x, &data.y).unwrap();
        assert!((beta - ols).amax() < 1e-12);
    }

    #[test]
    fn solve_identity_fixture() {
        let x = DMatrix::identity(2, 2);
        let beta = weighted_penalized_solve(
            &x,
            &DVector::from_element(2, 1.0),
            &DVector::from_element(2, 1.0),
            1.0,
            &DVector::from_vec(vec![2.0, 4.0]),
        )
        .unwrap();
        assert_relative_eq!(beta[0], 1.0);
        assert_relative_eq!(beta[1], 2.0);
    }

    #[test]
    fn solve_matches_dense_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = DMatrix::from_fn(5, 3, |_, _| rng.random_range(-1.0..1.0));
        let w = DVector::from_fn(5, |_, _| rng.random_range(0.1..2.0));
        let w0 = DVector::from_fn(3, |_, _| rng.random_range(0.0..3.0));
        let y = DVector::from_fn(5, |_, _| rng.random_range(-2.0..2.0));
        let lg = 0.7;
        let beta = weighted_penalized_solve(&x, &w, &w0, lg, &y).unwrap();
        let wm = DMatrix::from_diagonal(&w);
        let a = x.transpose() * &wm * &x + DMatrix::from_diagonal(&w0) * lg;
        let oracle = a.try_inverse().unwrap() * x.transpose() * &wm * &y;
        assert!((beta - oracle).amax() < 1e-12);
    }

    #[test]
    fn solve_reports_singular_coordinates() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        let err = weighted_penalized_solve(
            &x,
            &DVector::from_element(3, 1.0),
            &DVector::zeros(2),
            0.0,
            &DVector::zeros(3),
        )
        .unwrap_err();
        assert!(matches!(err, Error::SingularSystem { coords } if coords == vec![1]));
    }

    #[test]
    fn huge_lambda_zeroes_everything() {
        let data = random_data(40, 4, 2);
        let init = DVector::from_vec(vec![1.5, 0.1, 1.4, -0.05]);
        let pen = PenaltySpec::new(1e6, 1.0).unwrap();
        let fit = lqa_fit(&data, 0.5, &rho1(), &pen, &init, &LqaConfig::default()).unwrap();
        assert!(fit.beta.iter().all(|&b| b == 0.0));
        assert!(fit.active_set.is_empty());
        assert!(fit.converged);
        assert_eq!(fit.hat_trace, 0.0);
    }

    #[test]
    fn deleted_coordinates_are_exact_zeros() {
        let data = random_data(100, 6, 3);
        let init = crate::sinit::ols(&data.x, &data.y).unwrap();
        let pen = PenaltySpec::new(5.0, 1.0).unwrap();
        let fit = lqa_fit(&data, 0.5, &rho1(), &pen, &init, &LqaConfig::default()).unwrap();
        for j in 0..6 {
            if !fit.active_set.contains(&j) {
                assert_eq!(fit.beta[j].to_bits(), 0.0_f64.to_bits());
            }
        }
        let recomputed = br_objective(&data, &fit.beta, fit.sigma, &rho1(), &fit.penalty);
        assert_relative_eq!(fit.objective, recomputed, max_relative = 1e-10);
        assert!(fit.objective <= fit.objective_trace[0]);
    }

    #[test]
    fn ridge_case_is_stationary() {
        let data = random_data(80, 4, 5);
        let init = crate::sinit::ols(&data.x, &data.y).unwrap();
        let pen = PenaltySpec::new(3.0, 2.0).unwrap();
        let cfg = LqaConfig {
            tol: 1e-12,
            ..LqaConfig::default()
        };
        let fit = lqa_fit(&data, 0.6, &rho1(), &pen, &init, &cfg).unwrap();
        let w = data.residuals(&fit.beta).map(|r| rho1().weight(r / 0.6));
        let lhs = weighted_gram(&data.x, &w) * &fit.beta + &fit.beta * 6.0;
        let rhs = weighted_cross(&data.x, &w, &data.y);
        assert!((lhs - rhs).amax() <= 1e-6);
    }

    #[test]
    fn hat_trace_limits_and_dense_oracle() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.5, -0.3, 2.0, 0.8, 1.1]);
        let y = DVector::from_vec(vec![0.2, -0.1, 0.3]);
        let data = Dataset::new(x.clone(), y).unwrap();
        let beta = DVector::from_vec(vec![0.4, -0.2]);
        let sigma = 1.0;
        let mk = |lambda: f64, gamma: f64| BrFit {
            beta: beta.clone(),
            active_set: vec![0, 1],
            sigma,
            penalty: PenaltySpec::new(lambda, gamma).unwrap(),
            objective: 0.0,
            iterations: 1,
            converged: true,
            hat_trace: 0.0,
            objective_trace: vec![],
            non_monotone_steps: 0,
        };
        let r1 = LossFamily::bisquare(100.0); // nearly constant weights
        assert_relative_eq!(hat_trace(&data, &mk(0.0, 1.0), &r1).unwrap(), 2.0, epsilon = 1e-12);
        assert!(hat_trace(&data, &mk(1e12, 1.0), &r1).unwrap() <= 1e-3);

        let r1 = LossFamily::bisquare(0.8);
        let (lambda, gamma) = (0.3, 0.7);
        let got = hat_trace(&data, &mk(lambda, gamma), &r1).unwrap();
        let w = DMatrix::from_diagonal(&data.residuals(&beta).map(|r| r1.weight(r / sigma)));
        let w0 = DMatrix::from_diagonal(&beta.map(|b| b.abs().powf(gamma - 2.0)));
        let h = &x
            * (x.transpose() * &w * &x + w0 * (lambda * gamma)).try_inverse().unwrap()
            * x.transpose()
            * &w;
        assert_relative_eq!(got, h.trace(), epsilon = 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let data = random_data(30, 3, 8);
        let pen = PenaltySpec::new(2.0, 0.8).unwrap();
        let beta = DVector::from_vec(vec![1.2, -0.4, 0.9]);
        let g = objective_gradient(&data, &beta, 0.7, &rho1(), &pen);
        let h = 1e-6;
        for j in 0..3 {
            let mut up = beta.clone();
            let mut dn = beta.clone();
            up[j] += h;
            dn[j] -= h;
            let fd = (br_objective(&data, &up, 0.7, &rho1(), &pen)
                - br_objective(&data, &dn, 0.7, &rho1(), &pen))
                / (2.0 * h);
            assert!((g[j] - fd).abs() <= 1e-5 * g[j].abs().max(1.0));
        }
    }
}
