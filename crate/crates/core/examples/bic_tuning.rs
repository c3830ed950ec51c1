//! BIC path over the default robust lambda grid.

use mmbridge::simlab::{generate_stream, Case, ErrorDist, Scenario};
use mmbridge::tuning::robust_grid;
use mmbridge::{losses::Target, mm_fit, s_fit, select_lambda, LossFamily, LqaConfig, MmConfig, SConfig};

fn main() -> mmbridge::Result<()> {
    let scenario = Scenario::new(Case::Case1Leverage, 200, 0.2, 0.5, ErrorDist::Normal, 2);
    let g = generate_stream(&scenario, 0)?;
    let rho0 = LossFamily::calibrated(Target::BreakdownPoint(0.5))?;
    let rho1 = LossFamily::calibrated(Target::GaussianEfficiency(0.85))?;
    let s = s_fit(&g.data, &rho0, &SConfig::with_seed(2))?;
    let mm = mm_fit(&g.data, &s.beta, s.scale.sigma, &rho1, &MmConfig::default())?;

    let grid = robust_grid(&g.data, &mm, &rho1, 30, 1e-4);
    let t = select_lambda(&g.data, mm.sigma, &rho1, 1.0, &grid, &mm.beta, &LqaConfig::default())?;
    println!("{:>12} {:>10} {:>9} {:>6}", "lambda", "bic", "trace(H)", "active");
    for (i, p) in t.grid.iter().enumerate() {
        let mark = if i == t.selected_index { " <" } else { "" };
        println!("{:>12.4} {:>10.3} {:>9.3} {:>6}{mark}", p.lambda, p.bic, p.hat_trace, p.n_active);
    }
    let beta: Vec<String> = t.selected.beta.iter().map(|b| format!("{b:.3}")).collect();
    println!("selected beta: [{}]", beta.join(", "));
    Ok(())
}
