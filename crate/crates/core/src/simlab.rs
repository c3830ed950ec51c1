//! Contaminated-regression data generators, scoring metrics, and the Monte
//! Carlo study runner.
//!
//! Clean rows: `x ~ N_p(0, V)` with `v_ij = 0.5^|i-j|`, `y = x^T beta + sigma e`.
//! Contaminated rows depend on the case:
//!
//! | variant   | count         | rows                                           |
//! |-----------|---------------|------------------------------------------------|
//! | heavy     | `floor(eps n)`| `x ~ N_p(mu, I)`, `y = x^T beta2`              |
//! | vertical  | `ceil(eps n)` | clean `x`, error `~ N(25, sigma^2)`            |
//! | leverage  | `ceil(eps n)` | `x ~ N_p(mu, I)`, `y = x^T beta2`              |
//! | case 3    | `ceil(eps n)` | `x ~ N_p(mu, I)`, `y = K x^T beta2`            |
//!
//! with `mu = (5, ..., 5)` and `beta2 = (-1/p, ..., -1/p)`.
//!
//! Every replication draws from its own ChaCha stream `(seed, replication)`,
//! so serial and parallel runs give the same numbers.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, Normal, StandardNormal};
use rayon::prelude::*;

use crate::baseline::select_lasso;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::losses::{LossFamily, Target, DEFAULT_BREAKDOWN, DEFAULT_EFFICIENCY};
use crate::mm::{mm_fit, MmConfig};
use crate::mmbr::{lqa_fit, LqaConfig, PenaltySpec};
use crate::scale::median_in_place;
use crate::sinit::{s_fit, SConfig};
use crate::tuning::{default_grid, robust_grid, select_lambda, select_one_step};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Case {
    Case1Heavy,
    Case1Vertical,
    Case1Leverage,
    Case2Heavy,
    Case2Vertical,
    Case2Leverage,
    Case3,
}

impl Case {
    pub fn name(&self) -> &'static str {
        match self {
            Case::Case1Heavy => "case1-heavy",
            Case::Case1Vertical => "case1-vertical",
            Case::Case1Leverage => "case1-leverage",
            Case::Case2Heavy => "case2-heavy",
            Case::Case2Vertical => "case2-vertical",
            Case::Case2Leverage => "case2-leverage",
            Case::Case3 => "case3",
        }
    }

    pub fn parse(s: &str) -> Option<Case> {
        [
            Case::Case1Heavy,
            Case::Case1Vertical,
            Case::Case1Leverage,
            Case::Case2Heavy,
            Case::Case2Vertical,
            Case::Case2Leverage,
            Case::Case3,
        ]
        .into_iter()
        .find(|c| c.name() == s)
    }

    /// Predictor count fixed by the case (Case 3 accepts 8 or 50).
    pub fn default_p(&self) -> usize {
        match self {
            Case::Case2Heavy | Case::Case2Vertical | Case::Case2Leverage => 50,
            _ => 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ErrorDist {
    StudentT(f64),
    Normal,
}

impl ErrorDist {
    pub fn name(&self) -> String {
        match self {
            ErrorDist::StudentT(df) => format!("t{df}"),
            ErrorDist::Normal => "normal".into(),
        }
    }

    pub fn parse(s: &str) -> Option<ErrorDist> {
        match s {
            "normal" => Some(ErrorDist::Normal),
            _ => s
                .strip_prefix('t')
                .and_then(|d| d.parse::<f64>().ok())
                .filter(|d| *d > 0.0)
                .map(ErrorDist::StudentT),
        }
    }

    /// Normal over the root of a scaled chi-square for `t`.
    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        match *self {
            ErrorDist::Normal => z,
            ErrorDist::StudentT(df) => {
                let chi = ChiSquared::new(df).expect("positive df").sample(rng);
                z / (chi / df).sqrt()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub case: Case,
    pub n: usize,
    pub p: usize,
    pub epsilon: f64,
    pub sigma: f64,
    pub errors: ErrorDist,
    /// Leverage magnitude; Case 3 only.
    pub k: f64,
    pub seed: u64,
}

impl Scenario {
    pub fn new(case: Case, n: usize, epsilon: f64, sigma: f64, errors: ErrorDist, seed: u64) -> Self {
        Self {
            case,
            n,
            p: case.default_p(),
            epsilon,
            sigma,
            errors,
            k: 1.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..0.5).contains(&self.epsilon) {
            return Err(Error::InvalidInput(format!(
                "contamination {} outside [0, 0.5)",
                self.epsilon
            )));
        }
        if self.n <= self.p {
            return Err(Error::UnsupportedDimension { n: self.n, p: self.p });
        }
        if !(self.sigma > 0.0) {
            return Err(Error::InvalidInput("sigma must be positive".into()));
        }
        let p_ok = match self.case {
            Case::Case3 => self.p == 8 || self.p == 50,
            c => self.p == c.default_p(),
        };
        if !p_ok {
            return Err(Error::InvalidInput(format!(
                "{} does not support p = {}",
                self.case.name(),
                self.p
            )));
        }
        if self.case == Case::Case3 && !(self.k >= 1.0) {
            return Err(Error::InvalidInput("K must be >= 1".into()));
        }
        Ok(())
    }

    /// Number of contaminated rows.
    pub fn contaminated_rows(&self) -> usize {
        let raw = self.epsilon * self.n as f64;
        // guard against 0.1 * 50 = 5.000000000000001
        let snapped = if (raw - raw.round()).abs() < 1e-9 { raw.round() } else { raw };
        match self.case {
            Case::Case1Heavy | Case::Case2Heavy => snapped.floor() as usize,
            _ => snapped.ceil() as usize,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub data: Dataset,
    pub beta_true: DVector<f64>,
    /// `E[x x^T]` of the clean predictors.
    pub v: DMatrix<f64>,
    /// Row indices (after shuffling) of contaminated observations.
    pub contaminated: Vec<usize>,
}

pub fn ar_covariance(p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(p, p, |i, j| 0.5_f64.powi((i as i32 - j as i32).abs()))
}

pub fn case1_beta() -> DVector<f64> {
    DVector::from_vec(vec![3.0, 1.5, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0])
}

pub fn case2_beta() -> DVector<f64> {
    DVector::from_fn(50, |i, _| if i < 10 { 2.0 } else { 0.0 })
}

/// RNG for replication `stream` of a master seed.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn gen_case1(s: &Scenario) -> Result<Generated> {
    if !matches!(s.case, Case::Case1Heavy | Case::Case1Vertical | Case::Case1Leverage) {
        return Err(Error::InvalidInput(format!("{} is not a Case 1 scenario", s.case.name())));
    }
    generate_stream(s, 0)
}

pub fn gen_case2(s: &Scenario) -> Result<Generated> {
    if !matches!(s.case, Case::Case2Heavy | Case::Case2Vertical | Case::Case2Leverage) {
        return Err(Error::InvalidInput(format!("{} is not a Case 2 scenario", s.case.name())));
    }
    generate_stream(s, 0)
}

pub fn gen_case3(s: &Scenario) -> Result<Generated> {
    if s.case != Case::Case3 {
        return Err(Error::InvalidInput(format!("{} is not a Case 3 scenario", s.case.name())));
    }
    generate_stream(s, 0)
}

pub fn generate(s: &Scenario) -> Result<Generated> {
    generate_stream(s, 0)
}

/// Dataset for replication `stream`.
pub fn generate_stream(s: &Scenario, stream: u64) -> Result<Generated> {
    s.validate()?;
    let mut rng = stream_rng(s.seed, stream);
    let (n, p) = (s.n, s.p);
    let beta = if p == 8 { case1_beta() } else { case2_beta() };
    let v = ar_covariance(p);
    let chol = Cholesky::new(v.clone()).expect("AR(1) covariance is positive definite");
    let l = chol.l();
    let m = s.contaminated_rows();

    let mut x = DMatrix::zeros(n, p);
    let mut y = DVector::zeros(n);
    let clean_row = |rng: &mut ChaCha8Rng| -> DVector<f64> {
        let z = DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
        &l * z
    };
    let leverage_row = |rng: &mut ChaCha8Rng| -> DVector<f64> {
        DVector::from_fn(p, |_, _| 5.0 + rng.sample::<f64, _>(StandardNormal))
    };
    let beta2 = DVector::from_element(p, -1.0 / p as f64);

    let mut is_bad = vec![false; n];
    for i in 0..n {
        let contaminated = i < m;
        is_bad[i] = contaminated;
        let (row, yi) = if !contaminated {
            let row = clean_row(&mut rng);
            let yi = row.dot(&beta) + s.sigma * s.errors.sample(&mut rng);
            (row, yi)
        } else {
            match s.case {
                Case::Case1Vertical | Case::Case2Vertical => {
                    let row = clean_row(&mut rng);
                    let shift = Normal::new(25.0, s.sigma).expect("valid normal").sample(&mut rng);
                    let yi = row.dot(&beta) + shift;
                    (row, yi)
                }
                Case::Case3 => {
                    let row = leverage_row(&mut rng);
                    let yi = s.k * row.dot(&beta2);
                    (row, yi)
                }
                _ => {
                    let row = leverage_row(&mut rng);
                    let yi = row.dot(&beta2);
                    (row, yi)
                }
            }
        };
        x.row_mut(i).copy_from(&row.transpose());
        y[i] = yi;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let xs = x.select_rows(order.iter());
    let ys = DVector::from_iterator(n, order.iter().map(|&i| y[i]));
    let contaminated = order
        .iter()
        .enumerate()
        .filter(|(_, &src)| is_bad[src])
        .map(|(dst, _)| dst)
        .collect();
    Ok(Generated {
        data: Dataset::new(xs, ys)?,
        beta_true: beta,
        v,
        contaminated,
    })
}

/// `(b - b0)^T V (b - b0)`.
pub fn model_error(beta_hat: &DVector<f64>, beta_true: &DVector<f64>, v: &DMatrix<f64>) -> Result<f64> {
    let p = beta_true.len();
    if beta_hat.len() != p {
        return Err(Error::DimensionMismatch { expected: p, found: beta_hat.len() });
    }
    if v.nrows() != p || v.ncols() != p {
        return Err(Error::DimensionMismatch { expected: p, found: v.nrows() });
    }
    let d = beta_hat - beta_true;
    Ok(d.dot(&(v * &d)).max(0.0))
}

pub const ZERO_TOL: f64 = 1e-8;

/// `(correct, incorrect)` zero counts.
pub fn count_zeros(beta_hat: &DVector<f64>, beta_true: &DVector<f64>, zero_tol: f64) -> Result<(usize, usize)> {
    if beta_hat.len() != beta_true.len() {
        return Err(Error::DimensionMismatch {
            expected: beta_true.len(),
            found: beta_hat.len(),
        });
    }
    let mut correct = 0;
    let mut incorrect = 0;
    for (b, t) in beta_hat.iter().zip(beta_true.iter()) {
        if b.abs() <= zero_tol {
            if *t == 0.0 {
                correct += 1;
            } else {
                incorrect += 1;
            }
        }
    }
    Ok((correct, incorrect))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Lasso,
    Mm,
    OneStep,
    MmBr,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Lasso, Method::Mm, Method::OneStep, Method::MmBr];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Lasso => "LASSO",
            Method::Mm => "MM",
            Method::OneStep => "OneStep",
            Method::MmBr => "MM-BR",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        let key = |t: &str| t.replace(['-', '_'], "").to_ascii_lowercase();
        Method::ALL.into_iter().find(|m| key(m.name()) == key(s))
    }
}

/// Estimator settings shared by the study runner and the CLI.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    pub gamma: f64,
    pub breakdown: f64,
    pub efficiency: f64,
    pub s: SConfig,
    pub mm: MmConfig,
    pub lqa: LqaConfig,
    pub grid_count: usize,
    pub grid_ratio: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            breakdown: DEFAULT_BREAKDOWN,
            efficiency: DEFAULT_EFFICIENCY,
            s: SConfig::default(),
            mm: MmConfig::default(),
            lqa: LqaConfig::default(),
            grid_count: 50,
            grid_ratio: 1e-4,
        }
    }
}

impl EstimatorConfig {
    pub fn losses(&self) -> Result<(LossFamily, LossFamily)> {
        let rho0 = LossFamily::calibrated(Target::BreakdownPoint(self.breakdown))?;
        let rho1 = LossFamily::calibrated(Target::GaussianEfficiency(self.efficiency))?;
        Ok((rho0, rho1))
    }
}

/// Coefficients from every requested method on one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodEstimates {
    pub estimates: Vec<(Method, std::result::Result<DVector<f64>, String>)>,
}

/// Fit the requested methods on `data`; `seed` drives the S subsampling.
pub fn fit_methods(
    data: &Dataset,
    methods: &[Method],
    cfg: &EstimatorConfig,
    rho0: &LossFamily,
    rho1: &LossFamily,
    seed: u64,
) -> MethodEstimates {
    let grid = default_grid(data, cfg.grid_count, cfg.grid_ratio);
    let needs_mm = methods.iter().any(|m| *m != Method::Lasso);
    let mm = if needs_mm {
        let s_cfg = SConfig {
            rng_seed: seed,
            ..cfg.s
        };
        s_fit(data, rho0, &s_cfg)
            .and_then(|s| mm_fit(data, &s.beta, s.scale.sigma, rho1, &cfg.mm))
            .map_err(|e| e.to_string())
    } else {
        Err("not requested".into())
    };

    let estimates = methods
        .iter()
        .map(|&method| {
            let est = match method {
                Method::Lasso => select_lasso(data, &grid)
                    .map(|t| t.selected.beta)
                    .map_err(|e| e.to_string()),
                Method::Mm => mm.as_ref().map(|f| f.beta.clone()).map_err(Clone::clone),
                Method::OneStep => mm.as_ref().map_err(Clone::clone).and_then(|f| {
                    let grid = robust_grid(data, f, rho1, cfg.grid_count, cfg.grid_ratio);
                    select_one_step(data, f, rho1, cfg.gamma, &grid, cfg.lqa.cutoff)
                        .map(|t| t.selected.beta)
                        .map_err(|e| e.to_string())
                }),
                Method::MmBr => mm.as_ref().map_err(Clone::clone).and_then(|f| {
                    if f.sigma == 0.0 {
                        return Ok(f.beta.clone());
                    }
                    let grid = robust_grid(data, f, rho1, cfg.grid_count, cfg.grid_ratio);
                    select_lambda(data, f.sigma, rho1, cfg.gamma, &grid, &f.beta, &cfg.lqa)
                        .map(|t| t.selected.beta)
                        .map_err(|e| e.to_string())
                }),
            };
            (method, est)
        })
        .collect();
    MethodEstimates { estimates }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodRow {
    pub method: Method,
    pub correct: f64,
    pub incorrect: f64,
    pub mean_mse: f64,
    pub median_mse: f64,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateRecord {
    pub replication: usize,
    pub method: Method,
    pub beta: DVector<f64>,
    pub mse: f64,
    pub correct: usize,
    pub incorrect: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub scenario: Scenario,
    pub reps: usize,
    pub rows: Vec<MethodRow>,
    /// Raw per-replication estimates, for external plotting.
    pub replicates: Vec<ReplicateRecord>,
}

impl SimReport {
    pub fn row(&self, method: Method) -> Option<&MethodRow> {
        self.rows.iter().find(|r| r.method == method)
    }
}

/// Seed of the S subsampler for one replication.
fn replicate_seed(seed: u64, rep: usize) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ (rep as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn run_study(
    scenario: &Scenario,
    reps: usize,
    methods: &[Method],
    cfg: &EstimatorConfig,
) -> Result<SimReport> {
    if reps == 0 {
        return Err(Error::InvalidInput("reps must be >= 1".into()));
    }
    if methods.is_empty() {
        return Err(Error::InvalidInput("no methods requested".into()));
    }
    scenario.validate()?;
    let (rho0, rho1) = cfg.losses()?;

    let per_rep: Vec<Result<(Generated, MethodEstimates)>> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let g = generate_stream(scenario, rep as u64)?;
            let est = fit_methods(&g.data, methods, cfg, &rho0, &rho1, replicate_seed(scenario.seed, rep));
            Ok((g, est))
        })
        .collect();

    let mut replicates = Vec::new();
    let mut failures = vec![0usize; methods.len()];
    for (rep, outcome) in per_rep.into_iter().enumerate() {
        let (g, est) = outcome?;
        for (k, (method, beta)) in est.estimates.into_iter().enumerate() {
            match beta {
                Ok(beta) => {
                    let mse = model_error(&beta, &g.beta_true, &g.v)?;
                    let (correct, incorrect) = count_zeros(&beta, &g.beta_true, ZERO_TOL)?;
                    replicates.push(ReplicateRecord {
                        replication: rep,
                        method,
                        beta,
                        mse,
                        correct,
                        incorrect,
                    });
                }
                Err(_) => failures[k] += 1,
            }
        }
    }

    let rows = methods
        .iter()
        .enumerate()
        .map(|(k, &method)| {
            let recs: Vec<&ReplicateRecord> = replicates.iter().filter(|r| r.method == method).collect();
            let count = recs.len().max(1) as f64;
            let mut mses: Vec<f64> = recs.iter().map(|r| r.mse).collect();
            let mean_mse = if recs.is_empty() { f64::NAN } else { mses.iter().sum::<f64>() / count };
            MethodRow {
                method,
                correct: recs.iter().map(|r| r.correct as f64).sum::<f64>() / count,
                incorrect: recs.iter().map(|r| r.incorrect as f64).sum::<f64>() / count,
                mean_mse,
                median_mse: median_in_place(&mut mses),
                failures: failures[k],
            }
        })
        .collect();

    Ok(SimReport {
        scenario: *scenario,
        reps,
        rows,
        replicates,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparsityPoint {
    pub n: usize,
    pub lambda: f64,
    /// Mean fraction of truly-zero coefficients estimated as exactly zero.
    pub fraction: f64,
    /// Replications where every true zero was recovered.
    pub all_zero_fraction: f64,
}

/// Zero-recovery rate of the fixed-rate fit `lambda_n = n^exponent` on clean
/// Case 1 designs with normal errors.
pub fn sparsity_curve(
    gamma: f64,
    n_grid: &[usize],
    reps: usize,
    exponent: f64,
    sigma: f64,
    seed: u64,
    cfg: &EstimatorConfig,
) -> Result<Vec<SparsityPoint>> {
    if !(exponent > 0.5 && exponent < 1.0) {
        return Err(Error::InvalidInput(format!("rate exponent {exponent} outside (0.5, 1)")));
    }
    if reps == 0 {
        return Err(Error::InvalidInput("reps must be >= 1".into()));
    }
    let (rho0, rho1) = cfg.losses()?;
    n_grid
        .iter()
        .map(|&n| {
            let lambda = (n as f64).powf(exponent);
            let scenario = Scenario::new(Case::Case1Vertical, n, 0.0, sigma, ErrorDist::Normal, seed ^ n as u64);
            let penalty = PenaltySpec::new(lambda, gamma)?;
            let outcomes: Vec<Result<(f64, bool)>> = (0..reps)
                .into_par_iter()
                .map(|rep| {
                    let g = generate_stream(&scenario, rep as u64)?;
                    let s_cfg = SConfig {
                        rng_seed: replicate_seed(scenario.seed, rep),
                        ..cfg.s
                    };
                    let s = s_fit(&g.data, &rho0, &s_cfg)?;
                    let mm = mm_fit(&g.data, &s.beta, s.scale.sigma, &rho1, &cfg.mm)?;
                    let fit = lqa_fit(&g.data, mm.sigma, &rho1, &penalty, &mm.beta, &cfg.lqa)?;
                    let (correct, _) = count_zeros(&fit.beta, &g.beta_true, ZERO_TOL)?;
                    let zeros = g.beta_true.iter().filter(|&&b| b == 0.0).count();
                    Ok((correct as f64 / zeros as f64, correct == zeros))
                })
                .collect();
            let mut sum = 0.0;
            let mut all = 0.0;
            for o in outcomes {
                let (f, a) = o?;
                sum += f;
                all += if a { 1.0 } else { 0.0 };
            }
            Ok(SparsityPoint {
                n,
                lambda,
                fraction: sum / reps as f64,
                all_zero_fraction: all / reps as f64,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn contamination_counts() {
        let s = Scenario::new(Case::Case1Heavy, 50, 0.1, 0.5, ErrorDist::StudentT(3.0), 1);
        assert_eq!(s.contaminated_rows(), 5);
        let s = Scenario::new(Case::Case1Heavy, 55, 0.1, 0.5, ErrorDist::StudentT(3.0), 1);
        assert_eq!(s.contaminated_rows(), 5);
        let s = Scenario::new(Case::Case1Vertical, 55, 0.1, 0.5, ErrorDist::Normal, 1);
        assert_eq!(s.contaminated_rows(), 6);
        let s = Scenario::new(Case::Case2Vertical, 100, 0.2, 0.5, ErrorDist::Normal, 1);
        assert_eq!(s.contaminated_rows(), 20);
        let s = Scenario::new(Case::Case1Heavy, 50, 0.0, 0.5, ErrorDist::Normal, 1);
        assert_eq!(s.contaminated_rows(), 0);
    }

    #[test]
    fn clean_scenario_has_no_contamination() {
        let s = Scenario::new(Case::Case1Heavy, 60, 0.0, 0.5, ErrorDist::StudentT(3.0), 4);
        let g = gen_case1(&s).unwrap();
        assert!(g.contaminated.is_empty());
        assert_eq!(g.data.n(), 60);
    }

    #[test]
    fn case3_contaminated_rows() {
        let mut s = Scenario::new(Case::Case3, 100, 0.2, 0.5, ErrorDist::Normal, 4);
        s.k = 10.0;
        let g = gen_case3(&s).unwrap();
        assert_eq!(g.contaminated.len(), 20);
        assert_eq!(g.beta_true, case1_beta());
    }

    #[test]
    fn generator_rejects_mismatched_case() {
        let s = Scenario::new(Case::Case2Heavy, 100, 0.1, 0.5, ErrorDist::Normal, 4);
        assert!(gen_case1(&s).is_err());
        let mut s = Scenario::new(Case::Case1Heavy, 100, 0.1, 0.5, ErrorDist::Normal, 4);
        s.p = 9;
        assert!(generate(&s).is_err());
        let s = Scenario::new(Case::Case1Heavy, 100, 0.5, 0.5, ErrorDist::Normal, 4);
        assert!(generate(&s).is_err());
    }

    #[test]
    fn model_error_values() {
        let v = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        let b0 = DVector::from_vec(vec![1.0, -1.0]);
        let b = DVector::from_vec(vec![2.0, 0.0]);
        assert_relative_eq!(model_error(&b, &b0, &v).unwrap(), 3.0);
        assert_eq!(model_error(&b0, &b0, &v).unwrap(), 0.0);
        let id = DMatrix::identity(2, 2);
        assert_relative_eq!(model_error(&b, &b0, &id).unwrap(), 2.0);
        assert!(model_error(&DVector::zeros(3), &b0, &v).is_err());
    }

    #[test]
    fn zero_counts() {
        let b1 = case1_beta();
        assert_eq!(count_zeros(&b1, &b1, ZERO_TOL).unwrap(), (5, 0));
        assert_eq!(count_zeros(&DVector::zeros(8), &b1, ZERO_TOL).unwrap(), (5, 3));
        let b2 = case2_beta();
        assert_eq!(count_zeros(&b2, &b2, ZERO_TOL).unwrap(), (40, 0));
        assert_eq!(b2.iter().filter(|&&b| b == 0.0).count(), 40);
    }

    #[test]
    fn parse_names() {
        assert_eq!(ErrorDist::parse("t3"), Some(ErrorDist::StudentT(3.0)));
        assert_eq!(ErrorDist::parse("normal"), Some(ErrorDist::Normal));
        assert_eq!(ErrorDist::parse("x"), None);
        assert_eq!(Case::parse("case3"), Some(Case::Case3));
        assert_eq!(Method::parse("mm-br"), Some(Method::MmBr));
    }
}
