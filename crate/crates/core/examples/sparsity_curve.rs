//! Exact-zero recovery at the rate lambda_n = n^0.75 as n grows.

use mmbridge::simlab::{sparsity_curve, EstimatorConfig};

fn main() -> mmbridge::Result<()> {
    let points = sparsity_curve(1.0, &[100, 200, 400, 800], 20, 0.75, 1.0, 17, &EstimatorConfig::default())?;
    println!("{:>5} {:>9} {:>9} {:>9}", "n", "lambda", "fraction", "all-zero");
    for p in points {
        println!("{:>5} {:>9.2} {:>9.3} {:>9.3}", p.n, p.lambda, p.fraction, p.all_zero_fraction);
    }
    Ok(())
}
