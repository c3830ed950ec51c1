//! Unpenalized MM regression at a fixed scale, and its sandwich covariance.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{spd_solve_jittered, weighted_cross, weighted_gram};
use crate::losses::LossFamily;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmConfig {
    /// Largest coefficient step at convergence, in units of the scale.
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
}

impl Default for MmConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 500,
            max_halvings: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MmFit {
    pub beta: DVector<f64>,
    /// Scale carried over from the initial fit; never updated here.
    pub sigma: f64,
    /// `sum rho1(r_i / sigma)` at `beta`.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective before the first step and after every accepted step.
    pub objective_trace: Vec<f64>,
}

/// `sum rho1(r_i(beta) / sigma)`.
pub fn mm_objective(data: &Dataset, beta: &DVector<f64>, sigma: f64, rho1: &LossFamily) -> f64 {
    data.residuals(beta).iter().map(|r| rho1.rho(r / sigma)).sum()
}

/// `(sigma / n) sum psi1(r_i / sigma) x_i`, which vanishes at an MM solution.
pub fn estimating_equation(
    data: &Dataset,
    beta: &DVector<f64>,
    sigma: f64,
    rho1: &LossFamily,
) -> DVector<f64> {
    let psi = data.residuals(beta).map(|r| rho1.psi(r / sigma));
    data.x.tr_mul(&psi) * (sigma / data.n() as f64)
}

/// IRLS from `beta_s` with step-halving so the objective never increases.
pub fn mm_fit(
    data: &Dataset,
    beta_s: &DVector<f64>,
    sigma_s: f64,
    rho1: &LossFamily,
    cfg: &MmConfig,
) -> Result<MmFit> {
    if beta_s.len() != data.p() {
        return Err(Error::DimensionMismatch {
            expected: data.p(),
            found: beta_s.len(),
        });
    }
    if !(sigma_s >= 0.0 && sigma_s.is_finite()) {
        return Err(Error::InvalidInput(format!("invalid scale {sigma_s}")));
    }
    if sigma_s == 0.0 {
        return Ok(MmFit {
            beta: beta_s.clone(),
            sigma: 0.0,
            objective: 0.0,
            iterations: 0,
            converged: true,
            objective_trace: vec![0.0],
        });
    }
    data.require_tall()?;

    let mut beta = beta_s.clone();
    let mut objective = mm_objective(data, &beta, sigma_s, rho1);
    let mut trace = vec![objective];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.max_iter {
        iterations += 1;
        let w = data.residuals(&beta).map(|r| rho1.weight(r / sigma_s));
        let gram = weighted_gram(&data.x, &w);
        let rhs = weighted_cross(&data.x, &w, &data.y);
        let target = spd_solve_jittered(&gram, &rhs)?;

        let mut direction = &target - &beta;
        let mut candidate = target;
        let mut cand_obj = mm_objective(data, &candidate, sigma_s, rho1);
        let mut halvings = 0;
        while cand_obj > objective && halvings < cfg.max_halvings {
            direction *= 0.5;
            candidate = &beta + &direction;
            cand_obj = mm_objective(data, &candidate, sigma_s, rho1);
            halvings += 1;
        }
        if cand_obj > objective {
            // No descent along the IRLS direction: beta is as good as it gets.
            converged = true;
            break;
        }
        let step = (&candidate - &beta).amax();
        beta = candidate;
        objective = cand_obj;
        trace.push(objective);
        if step <= cfg.tol * sigma_s {
            converged = true;
            break;
        }
    }

    Ok(MmFit {
        beta,
        sigma: sigma_s,
        objective,
        iterations,
        converged,
        objective_trace: trace,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SandwichCov {
    /// Mean of `psi1^2`.
    pub a_hat: f64,
    /// Mean of `psi1'`.
    pub b_hat: f64,
    /// `(1/n) sum x_i x_i^T`.
    pub c_hat: DMatrix<f64>,
    /// Finite-sample covariance of `beta`.
    pub cov: DMatrix<f64>,
}

impl SandwichCov {
    pub fn std_errors(&self) -> DVector<f64> {
        self.cov.diagonal().map(|v| v.max(0.0).sqrt())
    }
}

/// Plug-in `sigma^2 (A / B^2) C^{-1} / n`.
pub fn sandwich_cov(fit: &MmFit, data: &Dataset, rho1: &LossFamily) -> Result<SandwichCov> {
    let n = data.n() as f64;
    let sigma = fit.sigma;
    if !(sigma > 0.0) {
        return Err(Error::InvalidInput("sandwich covariance needs a positive scale".into()));
    }
    let t = data.residuals(&fit.beta) / sigma;
    let a_hat = t.iter().map(|&v| rho1.psi(v).powi(2)).sum::<f64>() / n;
    let b_hat = t.iter().map(|&v| rho1.psi_prime(v)).sum::<f64>() / n;
    if b_hat <= 1e-8 {
        return Err(Error::DegenerateCurvature(b_hat));
    }
    let c_hat = data.x.tr_mul(&data.x) / n;
    let c_inv = Cholesky::new(c_hat.clone())
        .ok_or_else(|| Error::SingularSystem {
            coords: crate::linalg::offending_coordinates(&c_hat),
        })?
        .inverse();
    let mut cov = c_inv * (sigma * sigma * a_hat / (b_hat * b_hat) / n);
    // exact symmetry
    let sym = (&cov + cov.transpose()) * 0.5;
    cov.copy_from(&sym);
    Ok(SandwichCov {
        a_hat,
        b_hat,
        c_hat,
        cov,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn rho1() -> LossFamily {
        LossFamily::bisquare(3.44)
    }

    fn instance(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = DVector::from_fn(n, |i, _| {
            x[(i, 0)] - 2.0 * x[(i, 1)] + rng.sample::<f64, _>(StandardNormal)
        });
        Dataset::new(x, y).unwrap()
    }

    #[test]
    fn zero_scale_short_circuits() {
        let data = instance(10, 1);
        let b = DVector::from_vec(vec![1.0, 2.0]);
        let fit = mm_fit(&data, &b, 0.0, &rho1(), &MmConfig::default()).unwrap();
        assert_eq!(fit.beta, b);
        assert_eq!(fit.iterations, 0);
    }

    #[test]
    fn stationary_start_is_kept() {
        let data = instance(60, 2);
        let start = DVector::from_vec(vec![1.0, -2.0]);
        let first = mm_fit(&data, &start, 1.0, &rho1(), &MmConfig::default()).unwrap();
        let again = mm_fit(&data, &first.beta, 1.0, &rho1(), &MmConfig::default()).unwrap();
        assert_eq!(again.iterations, 1);
        assert!((again.beta - first.beta).amax() <= 1e-8);
    }

    #[test]
    fn descent_and_estimating_equation() {
        for seed in 0..10 {
            let data = instance(80, seed);
            let start = DVector::from_vec(vec![3.0, 1.0]);
            let fit = mm_fit(&data, &start, 1.2, &rho1(), &MmConfig::default()).unwrap();
            assert!(fit.converged);
            assert!(fit.objective_trace.windows(2).all(|w| w[1] <= w[0]));
            let ee = estimating_equation(&data, &fit.beta, 1.2, &rho1());
            assert!(ee.amax() <= 1e-6, "seed {seed}: {}", ee.amax());
        }
    }

    #[test]
    fn sandwich_scales_with_design() {
        let data = instance(100, 5);
        let start = DVector::from_vec(vec![1.0, -2.0]);
        let fit = mm_fit(&data, &start, 1.0, &rho1(), &MmConfig::default()).unwrap();
        let cov = sandwich_cov(&fit, &data, &rho1()).unwrap();

        let scaled = Dataset::new(&data.x * 2.0, data.y.clone()).unwrap();
        let mut fit2 = fit.clone();
        fit2.beta = &fit.beta / 2.0;
        let cov2 = sandwich_cov(&fit2, &scaled, &rho1()).unwrap();
        assert!((&cov2.c_hat - &cov.c_hat * 4.0).amax() < 1e-12);
        assert!((&cov2.cov - &cov.cov / 4.0).amax() < 1e-14);
        assert!(cov.a_hat >= 0.0);
        assert_eq!(cov.cov, cov.cov.transpose());
    }

    #[test]
    fn flat_region_is_degenerate() {
        let data = instance(20, 5);
        let fit = MmFit {
            beta: DVector::from_vec(vec![100.0, 100.0]),
            sigma: 0.01,
            objective: 0.0,
            iterations: 1,
            converged: true,
            objective_trace: vec![],
        };
        assert!(matches!(
            sandwich_cov(&fit, &data, &rho1()),
            Err(Error::DegenerateCurvature(_))
        ));
    }
}
