//! Repeated 2:1 train/test splits on a CSV file, as the `crossval` command does.

use mmbridge::cli::crossval;
use mmbridge::io::read_csv;
use mmbridge::simlab::{generate_stream, Case, ErrorDist, EstimatorConfig, Method, Scenario};

fn main() -> mmbridge::Result<()> {
    let scenario = Scenario::new(Case::Case1Vertical, 60, 0.1, 1.0, ErrorDist::Normal, 9);
    let g = generate_stream(&scenario, 0)?;
    let dir = std::env::temp_dir().join("mmbridge-crossval-example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("data.csv");
    let mut csv = String::from("x1,x2,x3,x4,x5,x6,x7,x8,y\n");
    for i in 0..g.data.n() {
        let row: Vec<String> = g.data.x.row(i).iter().chain([g.data.y[i]].iter()).map(|v| v.to_string()).collect();
        csv += &(row.join(",") + "\n");
    }
    std::fs::write(&path, csv)?;

    let data = read_csv(&path, None)?;
    let res = crossval(&data, 40, 20, 10, &Method::ALL, &EstimatorConfig::default(), true, false, 9)?;
    for (k, m) in res.methods.iter().enumerate() {
        println!("{:<8} mean squared prediction error {:.4}", m.name(), res.mean(k));
    }
    Ok(())
}
