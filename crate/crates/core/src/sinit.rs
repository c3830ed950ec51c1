//! High-breakdown initial fit by fast-S style elemental subsampling.
//!
//! Each candidate starts from an exact fit through `p` random observations,
//! takes a few IRLS steps under the scale loss, and is ranked by an
//! approximate M-scale of its residuals. The best few are refined to
//! convergence and the one with the smallest exact M-scale wins.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{spd_solve_jittered, weighted_cross, weighted_gram};
use crate::losses::LossFamily;
use crate::scale::{approx_scale, m_scale, ScaleEstimate};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SConfig {
    pub n_subsamples: usize,
    /// IRLS steps applied to every candidate before screening.
    pub n_refine_steps: usize,
    /// Candidates carried into full refinement.
    pub n_keep: usize,
    pub rng_seed: u64,
    /// Right-hand side of the scale equation.
    pub b: f64,
    pub max_refine_iter: usize,
}

impl Default for SConfig {
    fn default() -> Self {
        Self {
            n_subsamples: 500,
            n_refine_steps: 2,
            n_keep: 5,
            rng_seed: 0,
            b: 0.5,
            max_refine_iter: 200,
        }
    }
}

impl SConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            rng_seed: seed,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_subsamples == 0 {
            return Err(Error::InvalidInput("n_subsamples must be >= 1".into()));
        }
        if self.n_keep == 0 || self.n_keep > self.n_subsamples {
            return Err(Error::InvalidInput(format!(
                "n_keep = {} must lie in 1..={}",
                self.n_keep, self.n_subsamples
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SFit {
    pub beta: DVector<f64>,
    pub scale: ScaleEstimate,
}

const SCREEN_SCALE_STEPS: usize = 20;
const EXACT_FIT_RTOL: f64 = 1e-10;
const REFINE_TOL: f64 = 1e-10;

struct Candidate {
    index: usize,
    beta: DVector<f64>,
    sigma: f64,
}

pub fn s_fit(data: &Dataset, rho0: &LossFamily, cfg: &SConfig) -> Result<SFit> {
    cfg.validate()?;
    data.require_tall()?;
    let (n, p) = (data.n(), data.p());
    if let Some(j) = (0..p).find(|&j| data.x.column(j).iter().all(|&v| v == 0.0)) {
        return Err(Error::InvalidInput(format!("column {j} is identically zero")));
    }
    let zero_tol = EXACT_FIT_RTOL * data.y.amax().max(f64::MIN_POSITIVE);

    // Draw all elemental fits up front so the result does not depend on scheduling.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let max_attempts = 100 * cfg.n_subsamples;
    let mut attempts = 0;
    let mut starts = Vec::with_capacity(cfg.n_subsamples);
    while starts.len() < cfg.n_subsamples {
        if attempts >= max_attempts {
            return Err(Error::SingularSubsets { attempts });
        }
        attempts += 1;
        let idx = sample(&mut rng, n, p).into_vec();
        if let Some(beta) = elemental_fit(data, &idx) {
            starts.push(beta);
        }
    }

    let mut screened: Vec<Candidate> = starts
        .into_par_iter()
        .enumerate()
        .map(|(index, beta)| screen(data, rho0, cfg, zero_tol, index, beta))
        .collect();
    screened.sort_by(|a, b| a.sigma.total_cmp(&b.sigma).then(a.index.cmp(&b.index)));

    if screened[0].sigma == 0.0 {
        let best = &screened[0];
        let r = snapped_residuals(data, &best.beta, zero_tol);
        let scale = m_scale(r.as_slice(), rho0, cfg.b)?;
        return Ok(SFit {
            beta: best.beta.clone(),
            scale,
        });
    }

    let refined: Vec<Result<(usize, SFit)>> = screened
        .into_iter()
        .take(cfg.n_keep)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|c| refine(data, rho0, cfg, zero_tol, c.beta).map(|fit| (c.index, fit)))
        .collect();

    let mut best: Option<(usize, SFit)> = None;
    let mut last_err = None;
    for r in refined {
        match r {
            Ok((index, fit)) => {
                let better = match &best {
                    None => true,
                    Some((bi, bf)) => {
                        fit.scale.sigma < bf.scale.sigma
                            || (fit.scale.sigma == bf.scale.sigma && index < *bi)
                    }
                };
                if better {
                    best = Some((index, fit));
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    match best {
        Some((_, fit)) => Ok(fit),
        None => Err(last_err.unwrap_or_else(|| Error::InvariantViolation("no S candidate".into()))),
    }
}

fn elemental_fit(data: &Dataset, idx: &[usize]) -> Option<DVector<f64>> {
    let sub = data.subset(idx);
    let lu = sub.x.clone().lu();
    let u = lu.u();
    let diag = u.diagonal();
    let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0_f64), |(lo, hi), v| {
        (lo.min(v.abs()), hi.max(v.abs()))
    });
    if !(lo > 1e-12 * hi) {
        return None;
    }
    lu.solve(&sub.y).filter(|b| b.iter().all(|v| v.is_finite()))
}

fn snapped_residuals(data: &Dataset, beta: &DVector<f64>, zero_tol: f64) -> DVector<f64> {
    data.residuals(beta)
        .map(|r| if r.abs() <= zero_tol { 0.0 } else { r })
}

fn is_exact_fit(r: &DVector<f64>, b: f64) -> bool {
    let zeros = r.iter().filter(|&&v| v == 0.0).count() as f64;
    zeros >= (1.0 - b) * r.len() as f64
}

fn irls_step(
    data: &Dataset,
    rho0: &LossFamily,
    r: &DVector<f64>,
    sigma: f64,
) -> Option<DVector<f64>> {
    let w = r.map(|v| rho0.weight(v / sigma));
    if w.iter().filter(|&&v| v > 0.0).count() < data.p() {
        return None;
    }
    let gram = weighted_gram(&data.x, &w);
    let rhs = weighted_cross(&data.x, &w, &data.y);
    spd_solve_jittered(&gram, &rhs).ok()
}

fn screen(
    data: &Dataset,
    rho0: &LossFamily,
    cfg: &SConfig,
    zero_tol: f64,
    index: usize,
    mut beta: DVector<f64>,
) -> Candidate {
    let mut r = snapped_residuals(data, &beta, zero_tol);
    if is_exact_fit(&r, cfg.b) {
        return Candidate {
            index,
            beta,
            sigma: 0.0,
        };
    }
    let mut sigma = approx_scale(r.as_slice(), rho0, cfg.b, 0.0, SCREEN_SCALE_STEPS);
    for _ in 0..cfg.n_refine_steps {
        if sigma <= 0.0 {
            break;
        }
        match irls_step(data, rho0, &r, sigma) {
            Some(next) => beta = next,
            None => break,
        }
        r = snapped_residuals(data, &beta, zero_tol);
        if is_exact_fit(&r, cfg.b) {
            sigma = 0.0;
            break;
        }
        sigma = approx_scale(r.as_slice(), rho0, cfg.b, sigma, 1);
    }
    if sigma > 0.0 {
        sigma = approx_scale(r.as_slice(), rho0, cfg.b, sigma, SCREEN_SCALE_STEPS);
    }
    Candidate {
        index,
        beta,
        sigma: if sigma.is_finite() { sigma } else { f64::INFINITY },
    }
}

fn refine(
    data: &Dataset,
    rho0: &LossFamily,
    cfg: &SConfig,
    zero_tol: f64,
    mut beta: DVector<f64>,
) -> Result<SFit> {
    let mut r = snapped_residuals(data, &beta, zero_tol);
    let mut scale = m_scale(r.as_slice(), rho0, cfg.b)?;
    for _ in 0..cfg.max_refine_iter {
        if scale.sigma == 0.0 {
            break;
        }
        let Some(next) = irls_step(data, rho0, &r, scale.sigma) else {
            break;
        };
        let next_r = snapped_residuals(data, &next, zero_tol);
        let next_scale = m_scale(next_r.as_slice(), rho0, cfg.b)?;
        // S-refinement should not raise the scale; stop if it would.
        if next_scale.sigma > scale.sigma * (1.0 + 1e-12) {
            break;
        }
        let step = (&next - &beta).amax();
        let size = beta.amax().max(1.0);
        beta = next;
        r = next_r;
        scale = next_scale;
        if step <= REFINE_TOL * size {
            break;
        }
    }
    Ok(SFit { beta, scale })
}

/// Ordinary least squares by Cholesky on the normal equations.
pub fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    let w = DVector::from_element(x.nrows(), 1.0);
    crate::linalg::spd_solve(&weighted_gram(x, &w), &weighted_cross(x, &w, y))
}
