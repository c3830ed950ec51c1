//! S start, MM refinement, and sandwich standard errors on data with gross outliers.

use mmbridge::simlab::{generate_stream, Case, ErrorDist, Scenario};
use mmbridge::{losses::Target, mm_fit, s_fit, sandwich_cov, LossFamily, MmConfig, SConfig};

fn main() -> mmbridge::Result<()> {
    let scenario = Scenario::new(Case::Case1Vertical, 200, 0.2, 0.5, ErrorDist::Normal, 3);
    let g = generate_stream(&scenario, 0)?;
    let rho0 = LossFamily::calibrated(Target::BreakdownPoint(0.5))?;
    let rho1 = LossFamily::calibrated(Target::GaussianEfficiency(0.85))?;

    let s = s_fit(&g.data, &rho0, &SConfig::with_seed(3))?;
    let mm = mm_fit(&g.data, &s.beta, s.scale.sigma, &rho1, &MmConfig::default())?;
    let cov = sandwich_cov(&mm, &g.data, &rho1)?;
    let se = cov.std_errors();

    println!("S scale {:.4}, MM converged in {} iterations", s.scale.sigma, mm.iterations);
    println!("{:>4} {:>8} {:>8} {:>8}", "j", "true", "MM", "se");
    for j in 0..g.data.p() {
        println!("{:>4} {:>8.3} {:>8.3} {:>8.3}", j + 1, g.beta_true[j], mm.beta[j], se[j]);
    }
    Ok(())
}
