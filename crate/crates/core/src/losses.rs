//! Bisquare loss family.
//!
//! `rho(t) = min{1, 1 - (1 - (t/c)^2)^3}` is bounded by 1, reaches it exactly at
//! `|t| = c`, and has a redescending derivative. Two instances are used by the
//! MM construction: a low-constant one for the high-breakdown scale and a
//! high-constant one for the efficient M-step.

use std::sync::OnceLock;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Bisquare,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossFamily {
    /// Tuning constant in residual-scale units.
    pub c: f64,
    pub kind: LossKind,
}

/// Calibration target for [`tuning_constant`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target {
    /// `E[rho(Z/c)] = b` under standard normal `Z`.
    BreakdownPoint(f64),
    /// Asymptotic efficiency of the M-estimator of location at the normal.
    GaussianEfficiency(f64),
}

/// Default breakdown point of the scale step.
pub const DEFAULT_BREAKDOWN: f64 = 0.5;
/// Default Gaussian efficiency of the M-step. 0.95 is the other common choice.
pub const DEFAULT_EFFICIENCY: f64 = 0.85;

const BRACKET: (f64, f64) = (0.1, 100.0);
const ROOT_TOL: f64 = 1e-10;

impl LossFamily {
    pub fn bisquare(c: f64) -> Self {
        assert!(c > 0.0 && c.is_finite(), "tuning constant must be positive");
        Self {
            c,
            kind: LossKind::Bisquare,
        }
    }

    pub fn calibrated(target: Target) -> Result<Self> {
        tuning_constant(target).map(Self::bisquare)
    }

    pub fn rho(&self, t: f64) -> f64 {
        let u = (t / self.c).powi(2);
        if u >= 1.0 {
            1.0
        } else {
            1.0 - (1.0 - u).powi(3)
        }
    }

    pub fn psi(&self, t: f64) -> f64 {
        let u = (t / self.c).powi(2);
        if u >= 1.0 {
            0.0
        } else {
            6.0 * t / (self.c * self.c) * (1.0 - u).powi(2)
        }
    }

    pub fn psi_prime(&self, t: f64) -> f64 {
        let u = (t / self.c).powi(2);
        if u >= 1.0 {
            0.0
        } else {
            6.0 / (self.c * self.c) * (1.0 - u) * (1.0 - 5.0 * u)
        }
    }

    /// `psi(t) / t`, with its limit `6/c^2` at the origin.
    pub fn weight(&self, t: f64) -> f64 {
        let u = (t / self.c).powi(2);
        if u >= 1.0 {
            0.0
        } else {
            6.0 / (self.c * self.c) * (1.0 - u).powi(2)
        }
    }

    /// `E[rho(Z)]` for standard normal `Z`.
    pub fn expected_rho(&self) -> f64 {
        let c = self.c;
        let inner = half_line_integral(c, |z| self.rho(z) * std_normal_pdf(z));
        let mass = half_line_integral(c, std_normal_pdf);
        2.0 * inner + (1.0 - 2.0 * mass)
    }

    /// `(E psi'(Z))^2 / E psi(Z)^2`, the location efficiency at the normal.
    pub fn gaussian_efficiency(&self) -> f64 {
        let c = self.c;
        let b = 2.0 * half_line_integral(c, |z| self.psi_prime(z) * std_normal_pdf(z));
        let a = 2.0 * half_line_integral(c, |z| self.psi(z).powi(2) * std_normal_pdf(z));
        b * b / a
    }
}

/// Solve for the bisquare constant that meets `target`.
pub fn tuning_constant(target: Target) -> Result<f64> {
    match target {
        Target::BreakdownPoint(b) => {
            if !(b > 0.0 && b <= 0.5) {
                return Err(Error::InvalidInput(format!(
                    "breakdown point {b} outside (0, 0.5]"
                )));
            }
            // E rho(Z/c) decreases in c.
            bisect(|c| LossFamily::bisquare(c).expected_rho() - b)
        }
        Target::GaussianEfficiency(e) => {
            if !(e > 0.5 && e < 1.0) {
                return Err(Error::InvalidInput(format!(
                    "efficiency {e} outside (0.5, 1)"
                )));
            }
            bisect(|c| LossFamily::bisquare(c).gaussian_efficiency() - e)
        }
    }
}

fn bisect(f: impl Fn(f64) -> f64) -> Result<f64> {
    let (mut lo, mut hi) = BRACKET;
    let (mut f_lo, f_hi) = (f(lo), f(hi));
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::CalibrationFailure { lo, hi });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid);
        if f_mid.abs() <= ROOT_TOL || hi - lo <= 4.0 * f64::EPSILON * mid {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

const GL_NODES: usize = 64;

/// Gauss-Legendre nodes and weights on [-1, 1], computed once by Newton's method.
fn gauss_legendre() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = GL_NODES;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        (nodes, weights)
    })
}

/// `int_0^c f(z) dz`. The bisquare pieces are polynomial times a Gaussian on
/// this interval, so a fixed rule is accurate to rounding.
fn half_line_integral(c: f64, f: impl Fn(f64) -> f64) -> f64 {
    let (nodes, weights) = gauss_legendre();
    let half = 0.5 * c;
    nodes
        .iter()
        .zip(weights)
        .map(|(&x, &w)| w * f(half * (x + 1.0)))
        .sum::<f64>()
        * half
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rho_values() {
        let f = LossFamily::bisquare(2.0);
        assert_eq!(f.rho(0.0), 0.0);
        assert_eq!(f.rho(2.0), 1.0);
        assert_eq!(f.rho(4.0), 1.0);
        assert_relative_eq!(f.rho(1.0), 0.578125, epsilon = 1e-15);
        assert_eq!(f.rho(-1.3), f.rho(1.3));
    }

    #[test]
    fn psi_values() {
        for c in [1.0, 1.5476, 3.44, 4.685] {
            let f = LossFamily::bisquare(c);
            assert_eq!(f.psi(0.0), 0.0);
            assert_eq!(f.psi(c), 0.0);
            assert_relative_eq!(f.psi(c / 2.0), 1.6875 / c, epsilon = 1e-12);
            assert_relative_eq!(f.psi(-c / 3.0), -f.psi(c / 3.0));
        }
    }

    #[test]
    fn psi_prime_values() {
        let c = 3.0;
        let f = LossFamily::bisquare(c);
        assert_relative_eq!(f.psi_prime(0.0), 6.0 / (c * c), epsilon = 1e-15);
        assert_eq!(f.psi_prime(c), 0.0);
        // continuity at the boundary
        assert!(f.psi_prime(c * (1.0 - 1e-9)).abs() < 1e-7);
        let h = 1e-5;
        for k in -9..=9 {
            let t = 0.1 * k as f64 * c;
            let fd = (f.psi(t + h) - f.psi(t - h)) / (2.0 * h);
            assert!((f.psi_prime(t) - fd).abs() <= 1e-6, "t = {t}");
        }
    }

    #[test]
    fn weight_values() {
        let c = 2.5;
        let f = LossFamily::bisquare(c);
        assert_relative_eq!(f.weight(0.0), 6.0 / (c * c));
        assert_eq!(f.weight(0.0), f.psi_prime(0.0));
        assert_eq!(f.weight(2.0 * c), 0.0);
        assert_relative_eq!(f.weight(c / 2.0), 3.375 / (c * c), epsilon = 1e-14);
        assert_relative_eq!(f.weight(0.7), f.psi(0.7) / 0.7, epsilon = 1e-14);
    }

    #[test]
    fn rejects_out_of_range_targets() {
        assert!(tuning_constant(Target::BreakdownPoint(0.6)).is_err());
        assert!(tuning_constant(Target::BreakdownPoint(0.0)).is_err());
        assert!(tuning_constant(Target::GaussianEfficiency(0.4)).is_err());
        assert!(tuning_constant(Target::GaussianEfficiency(1.0)).is_err());
    }

    #[test]
    fn breakdown_calibration_hits_target() {
        let c = tuning_constant(Target::BreakdownPoint(0.5)).unwrap();
        let f = LossFamily::bisquare(c);
        assert!((f.expected_rho() - 0.5).abs() <= 1e-10);
    }

    #[test]
    fn expected_rho_decreases_in_c() {
        let mut prev = f64::INFINITY;
        for k in 1..=1000 {
            let c = 0.1 * k as f64;
            let v = LossFamily::bisquare(c).expected_rho();
            assert!(v < prev);
            prev = v;
        }
        assert!(prev < 1e-3);
    }
}
