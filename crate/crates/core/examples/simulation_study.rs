//! Small Monte Carlo study of all four estimators under leverage contamination.

use mmbridge::io::report_text;
use mmbridge::simlab::{run_study, Case, ErrorDist, EstimatorConfig, Method, Scenario};

fn main() -> mmbridge::Result<()> {
    let scenario = Scenario::new(Case::Case1Leverage, 100, 0.1, 0.5, ErrorDist::Normal, 11);
    let report = run_study(&scenario, 20, &Method::ALL, &EstimatorConfig::default())?;
    print!("{}", report_text(&report));
    Ok(())
}
