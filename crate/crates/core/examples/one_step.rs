//! Closed-form one-step estimator next to the iterated LQA fit.

use mmbridge::simlab::{generate_stream, Case, ErrorDist, Scenario};
use mmbridge::{losses::Target, lqa_fit, mm_fit, one_step, s_fit, LossFamily, LqaConfig, MmConfig, PenaltySpec, SConfig};

fn main() -> mmbridge::Result<()> {
    let scenario = Scenario::new(Case::Case1Heavy, 200, 0.0, 0.5, ErrorDist::StudentT(3.0), 8);
    let g = generate_stream(&scenario, 0)?;
    let rho0 = LossFamily::calibrated(Target::BreakdownPoint(0.5))?;
    let rho1 = LossFamily::calibrated(Target::GaussianEfficiency(0.85))?;
    let s = s_fit(&g.data, &rho0, &SConfig::with_seed(8))?;
    let mm = mm_fit(&g.data, &s.beta, s.scale.sigma, &rho1, &MmConfig::default())?;

    let penalty = PenaltySpec::new(4.0, 1.0)?;
    let os = one_step(&mm, &g.data, &rho1, &penalty, 1e-5)?;
    let lqa = lqa_fit(&g.data, mm.sigma, &rho1, &penalty, &mm.beta, &LqaConfig::default())?;
    println!("{:>4} {:>8} {:>10} {:>10}", "j", "MM", "one-step", "LQA");
    for j in 0..g.data.p() {
        println!("{:>4} {:>8.4} {:>10.4} {:>10.4}", j + 1, mm.beta[j], os[j], lqa.beta[j]);
    }
    Ok(())
}
