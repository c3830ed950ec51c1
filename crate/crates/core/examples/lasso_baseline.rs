//! Least-squares LASSO with BIC, on clean and on leverage-contaminated data.

use mmbridge::baseline::select_lasso;
use mmbridge::simlab::{generate_stream, model_error, Case, ErrorDist, Scenario};
use mmbridge::tuning::default_grid;

fn main() -> mmbridge::Result<()> {
    for eps in [0.0, 0.1] {
        let scenario = Scenario::new(Case::Case1Leverage, 200, eps, 0.5, ErrorDist::Normal, 4);
        let g = generate_stream(&scenario, 0)?;
        let t = select_lasso(&g.data, &default_grid(&g.data, 50, 1e-4))?;
        let b = &t.selected.beta;
        let shown: Vec<String> = b.iter().map(|v| format!("{v:.3}")).collect();
        println!(
            "eps {eps}: lambda {:.3}, beta [{}], model error {:.4}",
            t.selected.lambda,
            shown.join(", "),
            model_error(b, &g.beta_true, &g.v)?
        );
    }
    Ok(())
}
