//! Bisquare tuning constants and the M-scale of a residual vector.

use mmbridge::losses::{LossFamily, Target};
use mmbridge::scale::{mad_scale, m_scale};

fn main() -> mmbridge::Result<()> {
    let rho0 = LossFamily::calibrated(Target::BreakdownPoint(0.5))?;
    println!("c0 (50% breakdown)   = {:.4}", rho0.c);
    for eff in [0.85, 0.90, 0.95] {
        let rho1 = LossFamily::calibrated(Target::GaussianEfficiency(eff))?;
        println!("c1 ({:.0}% efficiency) = {:.4}", eff * 100.0, rho1.c);
    }
    let rho = LossFamily::bisquare(1.0);
    println!("rho(0.5) at c = 1     = {}", rho.rho(0.5));

    let mut r: Vec<f64> = (0..20).map(|i| (i as f64 - 9.5) / 5.0).collect();
    r.extend([40.0, -55.0, 80.0]);
    let s = m_scale(&r, &rho0, 0.5)?;
    println!("residual MAD scale    = {:.4}", mad_scale(&r));
    println!("M-scale               = {:.4} ({} iterations)", s.sigma, s.iterations);
    Ok(())
}
