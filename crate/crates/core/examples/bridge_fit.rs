//! LQA bridge fits over a few penalty levels and exponents.

use mmbridge::simlab::{generate_stream, Case, ErrorDist, Scenario};
use mmbridge::{losses::Target, lqa_fit, mm_fit, s_fit, LossFamily, LqaConfig, MmConfig, PenaltySpec, SConfig};

fn main() -> mmbridge::Result<()> {
    let scenario = Scenario::new(Case::Case1Heavy, 200, 0.0, 0.5, ErrorDist::StudentT(3.0), 5);
    let g = generate_stream(&scenario, 0)?;
    let rho0 = LossFamily::calibrated(Target::BreakdownPoint(0.5))?;
    let rho1 = LossFamily::calibrated(Target::GaussianEfficiency(0.85))?;
    let s = s_fit(&g.data, &rho0, &SConfig::with_seed(5))?;
    let mm = mm_fit(&g.data, &s.beta, s.scale.sigma, &rho1, &MmConfig::default())?;

    for gamma in [0.7, 1.0, 2.0] {
        for lambda in [0.0, 2.0, 8.0] {
            let penalty = PenaltySpec::new(lambda, gamma)?;
            let fit = lqa_fit(&g.data, mm.sigma, &rho1, &penalty, &mm.beta, &LqaConfig::default())?;
            let beta: Vec<String> = fit.beta.iter().map(|b| format!("{b:7.3}")).collect();
            println!(
                "gamma {gamma:.1} lambda {lambda:4.1}: [{}] active {} iters {}",
                beta.join(" "),
                fit.active_set.len(),
                fit.iterations
            );
        }
    }
    Ok(())
}
