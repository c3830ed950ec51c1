//! Independent oracles and Monte Carlo checks against the estimators.

use mmbridge::losses::{LossFamily, Target};
use mmbridge::mm::MmConfig;
use mmbridge::mmbr::one_step;
use mmbridge::simlab::{ar_covariance, count_zeros, generate_stream, Case, ErrorDist, Scenario, ZERO_TOL};
use mmbridge::sinit::ols;
use mmbridge::tuning::{robust_grid, select_lambda};
use mmbridge::{lqa_fit, mm_fit, s_fit, Dataset, LqaConfig, PenaltySpec, SConfig};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

/// `E[Z^k 1{|Z| <= c}]` for k = 0, 2, 4, ..., 12 via the truncated-normal recursion
/// `M_k = (k-1) M_{k-2} - 2 c^{k-1} phi(c)`.
fn truncated_moments(c: f64) -> [f64; 7] {
    let n = Normal::new(0.0, 1.0).unwrap();
    let phi = n.pdf(c);
    let mut m = [0.0; 7];
    m[0] = 2.0 * n.cdf(c) - 1.0;
    for i in 1..7 {
        let k = 2 * i;
        m[i] = (k as f64 - 1.0) * m[i - 1] - 2.0 * c.powi(k as i32 - 1) * phi;
    }
    m
}

/// `E rho(Z / c)` by expanding `1 - (1 - u)^3` in moments.
fn oracle_expected_rho(c: f64) -> f64 {
    let m = truncated_moments(c);
    let c2 = c * c;
    let inside = 3.0 * m[1] / c2 - 3.0 * m[2] / c2.powi(2) + m[3] / c2.powi(3);
    inside + (1.0 - m[0])
}

/// Gaussian efficiency `(E psi')^2 / E psi^2` from polynomial moments.
fn oracle_efficiency(c: f64) -> f64 {
    let m = truncated_moments(c);
    let c2 = c * c;
    // psi = (6/c^2) t (1 - t^2/c^2)^2, psi' = (6/c^2)(1 - 6 t^2/c^2 + 5 t^4/c^4)
    let e_dpsi = m[0] - 6.0 * m[1] / c2 + 5.0 * m[2] / c2.powi(2);
    let e_psi2 = m[1] - 4.0 * m[2] / c2 + 6.0 * m[3] / c2.powi(2) - 4.0 * m[4] / c2.powi(3) + m[5] / c2.powi(4);
    e_dpsi * e_dpsi / e_psi2
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn tuning_constants_match_moment_oracle() {
    let c0 = bisect(|c| oracle_expected_rho(c) - 0.5, 0.5, 5.0);
    let c1 = bisect(|c| oracle_efficiency(c) - 0.95, 2.0, 10.0);
    assert!((c0 - 1.5476).abs() < 1e-3, "{c0}");
    assert!((c1 - 4.685).abs() < 1e-2, "{c1}");
    let r0 = LossFamily::calibrated(Target::BreakdownPoint(0.5)).unwrap();
    let r1 = LossFamily::calibrated(Target::GaussianEfficiency(0.95)).unwrap();
    assert!((r0.c - c0).abs() < 1e-6, "{} vs {c0}", r0.c);
    assert!((r1.c - c1).abs() < 1e-6, "{} vs {c1}", r1.c);
    for c in [1.0, 2.5, 3.44, 6.0] {
        let f = LossFamily::bisquare(c);
        // statrs' normal cdf carries ~2e-10 absolute error, which the moment
        // recursion multiplies by up to 9!! for the efficiency.
        let d = (f.expected_rho() - oracle_expected_rho(c)).abs();
        assert!(d < 1e-9, "c = {c}: {d:e}");
        let d = (f.gaussian_efficiency() - oracle_efficiency(c)).abs();
        assert!(d < 1e-6, "c = {c}: {d:e}");
    }
}

#[test]
fn breakdown_constant_below_efficiency_constants() {
    let c0 = LossFamily::calibrated(Target::BreakdownPoint(0.5)).unwrap().c;
    for e in [0.85, 0.9, 0.95, 0.99] {
        assert!(c0 < LossFamily::calibrated(Target::GaussianEfficiency(e)).unwrap().c);
    }
}

fn gaussian_data(rng: &mut ChaCha8Rng, n: usize, beta: &[f64], sigma: f64) -> Dataset {
    let p = beta.len();
    let x = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let b = DVector::from_column_slice(beta);
    let e = DVector::from_fn(n, |_, _| sigma * rng.sample::<f64, _>(StandardNormal));
    Dataset::new(x.clone(), x * b + e).unwrap()
}

#[test]
fn s_fit_is_close_on_clean_data() {
    let rho0 = LossFamily::calibrated(Target::BreakdownPoint(0.5)).unwrap();
    let mut ok = 0;
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = gaussian_data(&mut rng, 200, &[1.0, -1.0], 1.0);
        let s = s_fit(&d, &rho0, &SConfig::with_seed(seed)).unwrap();
        if (s.beta - DVector::from_vec(vec![1.0, -1.0])).amax() <= 0.3 {
            ok += 1;
        }
    }
    assert!(ok >= 95, "{ok}/100");
}

#[test]
fn s_fit_resists_forty_percent_leverage() {
    let rho0 = LossFamily::calibrated(Target::BreakdownPoint(0.5)).unwrap();
    let mut s = Scenario::new(Case::Case3, 200, 0.4, 0.5, ErrorDist::Normal, 21);
    s.k = 10.0;
    for rep in 0..5 {
        let g = generate_stream(&s, rep).unwrap();
        let fit = s_fit(&g.data, &rho0, &SConfig::with_seed(rep)).unwrap();
        let ls = ols(&g.data.x, &g.data.y).unwrap();
        let s_err = (&fit.beta - &g.beta_true).norm();
        let ls_err = (&ls - &g.beta_true).norm();
        // Least squares is dragged along the ones direction until the leverage
        // cluster at x = 5 1 is fit: |K 5 + 5 sum(beta)| / (5 sqrt(p)).
        let p = g.data.p() as f64;
        let pulled = (s.k * 5.0 + 5.0 * g.beta_true.sum()).abs() / (5.0 * p.sqrt());
        assert!(s_err <= 5.0, "S error {s_err}");
        assert!(ls_err >= 0.8 * pulled, "OLS error {ls_err} vs {pulled}");
        assert!(s_err < ls_err / 10.0, "S error {s_err}, OLS error {ls_err}");
    }
}

#[test]
fn mm_matches_ols_on_clean_data() {
    let rho0 = LossFamily::calibrated(Target::BreakdownPoint(0.5)).unwrap();
    let rho1 = LossFamily::calibrated(Target::GaussianEfficiency(0.85)).unwrap();
    let mut ok = 0;
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let d = gaussian_data(&mut rng, 500, &[1.0, 0.5, -2.0], 1.0);
        let s = s_fit(&d, &rho0, &SConfig::with_seed(seed)).unwrap();
        let mm = mm_fit(&d, &s.beta, s.scale.sigma, &rho1, &MmConfig::default()).unwrap();
        assert!(mm.objective <= mmbridge::mm::mm_objective(&d, &s.beta, s.scale.sigma, &rho1));
        assert!(mm.objective_trace.windows(2).all(|w| w[1] <= w[0]));
        let ls = ols(&d.x, &d.y).unwrap();
        if (mm.beta - ls).amax() <= 0.05 {
            ok += 1;
        }
    }
    assert!(ok >= 95, "{ok}/100");
}

#[test]
fn clean_covariance_matches_ar_structure() {
    let s = Scenario::new(Case::Case1Heavy, 100_000, 0.0, 0.5, ErrorDist::Normal, 5);
    let g = generate_stream(&s, 0).unwrap();
    let n = g.data.n() as f64;
    let cov = g.data.x.tr_mul(&g.data.x) / n;
    let v = ar_covariance(8);
    assert!((cov - &v).amax() <= 0.02);
    assert_eq!(g.v, v);
}

#[test]
fn case3_contaminated_response_mean() {
    let s = Scenario::new(Case::Case3, 2000, 0.2, 0.5, ErrorDist::Normal, 9);
    let mut sum = 0.0;
    let mut count = 0.0;
    for rep in 0..5 {
        let g = generate_stream(&s, rep).unwrap();
        for &i in &g.contaminated {
            sum += g.data.y[i];
            count += 1.0;
        }
    }
    assert_eq!(count, 5.0 * 400.0);
    assert!((sum / count + 5.0).abs() < 0.2, "{}", sum / count);
}

#[test]
fn case2_truth_has_forty_zeros() {
    let s = Scenario::new(Case::Case2Vertical, 100, 0.2, 0.5, ErrorDist::Normal, 1);
    let g = generate_stream(&s, 0).unwrap();
    assert_eq!(g.beta_true.iter().filter(|b| **b == 0.0).count(), 40);
    assert_eq!(g.contaminated.len(), 20);
    assert_eq!(count_zeros(&g.beta_true, &g.beta_true, ZERO_TOL).unwrap(), (40, 0));
}

#[test]
fn one_step_scalar_formula() {
    let rho0 = LossFamily::calibrated(Target::BreakdownPoint(0.5)).unwrap();
    let rho1 = LossFamily::calibrated(Target::GaussianEfficiency(0.85)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let d = gaussian_data(&mut rng, 50, &[2.0], 0.5);
    let s = s_fit(&d, &rho0, &SConfig::with_seed(3)).unwrap();
    let mm = mm_fit(&d, &s.beta, s.scale.sigma, &rho1, &MmConfig::default()).unwrap();
    let r = d.residuals(&mm.beta);
    let dd: f64 = (0..50).map(|i| rho1.psi_prime(r[i] / mm.sigma) * d.x[(i, 0)].powi(2)).sum();
    for (lambda, gamma) in [(3.0, 1.0), (10.0, 0.5), (1.0, 2.0)] {
        let pen = PenaltySpec::new(lambda, gamma).unwrap();
        let b = mm.beta[0];
        let expect = dd * b / (dd + lambda * gamma * b.abs().powf(gamma - 2.0));
        let got = one_step(&mm, &d, &rho1, &pen, 1e-5).unwrap()[0];
        assert!((got - expect).abs() <= 1e-12 * expect.abs(), "{got} vs {expect}");
    }
}

#[test]
fn bic_selection_finds_at_least_as_many_zeros_as_mm() {
    let rho0 = LossFamily::calibrated(Target::BreakdownPoint(0.5)).unwrap();
    let rho1 = LossFamily::calibrated(Target::GaussianEfficiency(0.85)).unwrap();
    let s = Scenario::new(Case::Case1Heavy, 200, 0.0, 0.5, ErrorDist::StudentT(3.0), 31);
    let mut wins = 0;
    for rep in 0..50 {
        let g = generate_stream(&s, rep).unwrap();
        let sf = s_fit(&g.data, &rho0, &SConfig::with_seed(rep)).unwrap();
        let mm = mm_fit(&g.data, &sf.beta, sf.scale.sigma, &rho1, &MmConfig::default()).unwrap();
        let grid = robust_grid(&g.data, &mm, &rho1, 50, 1e-4);
        let t = select_lambda(&g.data, mm.sigma, &rho1, 1.0, &grid, &mm.beta, &LqaConfig::default()).unwrap();
        let base = lqa_fit(&g.data, mm.sigma, &rho1, &PenaltySpec::new(0.0, 1.0).unwrap(), &mm.beta, &LqaConfig::default()).unwrap();
        let (sel, _) = count_zeros(&t.selected.beta, &g.beta_true, ZERO_TOL).unwrap();
        let (zero, _) = count_zeros(&base.beta, &g.beta_true, ZERO_TOL).unwrap();
        if sel >= zero {
            wins += 1;
        }
    }
    assert!(wins > 25, "{wins}/50");
}
