//! The `mmbridge` command line.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::io::{self, aligned_table, sig6, SavedFit};
use crate::losses::{DEFAULT_BREAKDOWN, DEFAULT_EFFICIENCY};
use crate::mm::{mm_fit, sandwich_cov, MmFit};
use crate::mmbr::{fit_from_coefficients, hat_trace, lqa_fit, one_step, BrFit, LqaConfig, PenaltySpec};
use crate::scale::{mad_scale, median_in_place};
use crate::simlab::{
    fit_methods, run_study, sparsity_curve, stream_rng, Case, ErrorDist, EstimatorConfig, Method, Scenario,
};
use crate::sinit::s_fit;
use crate::tuning::{bic, log_grid, robust_grid, select_lambda, select_one_step, TuneResult};

#[derive(Debug, Parser)]
#[command(name = "mmbridge", version, about = "Robust MM-bridge penalized regression")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit at a single lambda.
    Fit(FitArgs),
    /// Choose lambda by BIC over a grid.
    Tune(TuneArgs),
    /// Monte Carlo study on a contaminated design.
    Simulate(SimArgs),
    /// Apply a saved fit to new data.
    Predict(PredictArgs),
    /// Repeated train/test splits, mean squared prediction error per method.
    Crossval(CrossvalArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ErrArg {
    T1,
    T3,
    Normal,
}

impl From<ErrArg> for ErrorDist {
    fn from(e: ErrArg) -> Self {
        match e {
            ErrArg::T1 => ErrorDist::StudentT(1.0),
            ErrArg::T3 => ErrorDist::StudentT(3.0),
            ErrArg::Normal => ErrorDist::Normal,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct EstimatorArgs {
    /// Bridge exponent.
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    /// Gaussian efficiency of the MM loss.
    #[arg(long, default_value_t = DEFAULT_EFFICIENCY)]
    pub efficiency: f64,
    /// Breakdown point of the initial S scale.
    #[arg(long, default_value_t = DEFAULT_BREAKDOWN)]
    pub bdp: f64,
    /// Coefficients below this are set to zero during the LQA iterations.
    #[arg(long, default_value_t = crate::mmbr::DEFAULT_CUTOFF)]
    pub cutoff: f64,
    /// LQA stopping tolerance (defaults to the cutoff).
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

impl EstimatorArgs {
    pub fn config(&self) -> Result<EstimatorConfig> {
        if !(self.gamma > 0.0) {
            return Err(Error::InvalidInput(format!("gamma must be > 0, got {}", self.gamma)));
        }
        if !(self.cutoff > 0.0) {
            return Err(Error::InvalidInput(format!("cutoff must be > 0, got {}", self.cutoff)));
        }
        let mut cfg = EstimatorConfig {
            gamma: self.gamma,
            breakdown: self.bdp,
            efficiency: self.efficiency,
            lqa: LqaConfig::with_cutoff(self.cutoff),
            ..EstimatorConfig::default()
        };
        if let Some(tol) = self.tol {
            cfg.lqa.tol = tol;
        }
        cfg.lqa.max_iter = self.max_iter;
        cfg.mm.max_iter = self.max_iter;
        cfg.s.rng_seed = self.seed;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// CSV file with a header row.
    pub input: PathBuf,
    /// Response column (default: the last column).
    #[arg(long)]
    pub response: Option<String>,
    /// Median-center y and X and report the implied intercept.
    #[arg(long)]
    pub intercept: bool,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub est: EstimatorArgs,
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
    /// Report the unpenalized MM estimate with sandwich standard errors.
    #[arg(long)]
    pub mm_only: bool,
    /// Use the closed-form one-step estimator instead of the LQA iterations.
    #[arg(long)]
    pub one_step: bool,
    /// Scale predictors by their MAD before fitting.
    #[arg(long, num_args = 0..=1, default_value_t = false, default_missing_value = "true")]
    pub standardize: bool,
    /// Save the coefficients as a `name=value` file for `predict`.
    #[arg(long)]
    pub save: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct TuneArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub est: EstimatorArgs,
    /// Log-spaced grid `min:max:count`; default is derived from the MM fit.
    #[arg(long)]
    pub lambda_grid: Option<String>,
    /// Tune the one-step estimator instead of the LQA fit.
    #[arg(long)]
    pub one_step: bool,
    #[arg(long, num_args = 0..=1, default_value_t = true, default_missing_value = "true")]
    pub standardize: bool,
    /// Print the BIC at every grid point.
    #[arg(long)]
    pub path: bool,
    #[arg(long)]
    pub save: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SimArgs {
    #[arg(long, default_value = "case1-heavy")]
    pub case: String,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    /// Number of predictors (fixed by the case; accepted for checking).
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long, default_value_t = 0.0)]
    pub eps: f64,
    #[arg(long, default_value_t = 0.5)]
    pub sigma: f64,
    #[arg(long, value_enum, default_value_t = ErrArg::T3)]
    pub err: ErrArg,
    /// Leverage magnitude (Case 3).
    #[arg(long = "K", default_value_t = 1.0)]
    pub k: f64,
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    /// Comma-separated subset of lasso,mm,onestep,mmbr.
    #[arg(long, default_value = "lasso,mm,onestep,mmbr")]
    pub methods: String,
    /// Write per-replication estimates as CSV.
    #[arg(long)]
    pub replicates: Option<PathBuf>,
    /// Run the fixed-rate sparsity curve over these sample sizes instead.
    #[arg(long, value_delimiter = ',')]
    pub sparsity: Option<Vec<usize>>,
    /// Rate exponent for the sparsity curve, `lambda_n = n^a`.
    #[arg(long, default_value_t = 0.75)]
    pub rate: f64,
    #[command(flatten)]
    pub est: EstimatorArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    /// File written by `fit --save` or `tune --save`.
    #[arg(long)]
    pub fit: PathBuf,
    /// CSV holding (at least) the fitted predictor columns.
    pub input: PathBuf,
    /// Response column; when present the mean squared prediction error is reported.
    #[arg(long)]
    pub response: Option<String>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CrossvalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub est: EstimatorArgs,
    /// Training rows per split (default: two thirds of n).
    #[arg(long)]
    pub n_train: Option<usize>,
    /// Test rows per split (default: the rest).
    #[arg(long)]
    pub n_test: Option<usize>,
    /// Number of random splits.
    #[arg(long, default_value_t = 10)]
    pub reps: usize,
    #[arg(long, default_value = "lasso,mm,onestep,mmbr")]
    pub methods: String,
    #[arg(long, num_args = 0..=1, default_value_t = false, default_missing_value = "true")]
    pub standardize: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// Parse `min:max:count` into an ascending log grid.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidInput(format!("lambda grid {spec:?} is not min:max:count"));
    let parts: Vec<&str> = spec.split(':').collect();
    let [lo, hi, count] = parts[..] else { return Err(bad()) };
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    let count: usize = count.trim().parse().map_err(|_| bad())?;
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) || count == 0 {
        return Err(Error::InvalidInput(format!(
            "lambda grid needs 0 < min <= max and count >= 1, got {spec:?}"
        )));
    }
    Ok(log_grid(lo, hi, count, false))
}

pub fn parse_methods(list: &str) -> Result<Vec<Method>> {
    let methods: Vec<Method> = list
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| Method::parse(s).ok_or_else(|| Error::InvalidInput(format!("unknown method {s:?}"))))
        .collect::<Result<_>>()?;
    if methods.is_empty() {
        return Err(Error::InvalidInput("no methods given".into()));
    }
    Ok(methods)
}

/// Centering and scaling applied before fitting, undone on the coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Transform {
    pub x_center: DVector<f64>,
    pub y_center: f64,
    pub x_scale: DVector<f64>,
}

impl Transform {
    pub fn fit(data: &Dataset, intercept: bool, standardize: bool) -> Result<Self> {
        let p = data.p();
        let col = |j: usize| data.x.column(j).iter().copied().collect::<Vec<f64>>();
        let x_center = if intercept {
            DVector::from_fn(p, |j, _| median_in_place(&mut col(j)))
        } else {
            DVector::zeros(p)
        };
        let y_center = if intercept {
            median_in_place(&mut data.y.iter().copied().collect::<Vec<_>>())
        } else {
            0.0
        };
        let x_scale = if standardize {
            let s = DVector::from_fn(p, |j, _| mad_scale(&col(j)));
            if let Some(j) = s.iter().position(|v| !(*v > 0.0)) {
                return Err(Error::Data(format!(
                    "column {:?} has zero MAD and cannot be standardized",
                    data.names[j]
                )));
            }
            s
        } else {
            DVector::from_element(p, 1.0)
        };
        Ok(Self { x_center, y_center, x_scale })
    }

    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        let x = DMatrix::from_fn(data.n(), data.p(), |i, j| {
            (data.x[(i, j)] - self.x_center[j]) / self.x_scale[j]
        });
        let y = data.y.add_scalar(-self.y_center);
        Dataset::with_names(x, y, data.names.clone())
    }

    /// Coefficients and intercept on the original scale.
    pub fn back(&self, beta: &DVector<f64>) -> (DVector<f64>, f64) {
        let b = beta.component_div(&self.x_scale);
        let intercept = self.y_center - self.x_center.dot(&b);
        (b, intercept)
    }
}

struct Prepared {
    raw: Dataset,
    work: Dataset,
    transform: Transform,
}

fn prepare(args: &DataArgs, standardize: bool) -> Result<Prepared> {
    let raw = io::read_csv(&args.input, args.response.as_deref())?;
    let transform = Transform::fit(&raw, args.intercept, standardize)?;
    let work = transform.apply(&raw)?;
    Ok(Prepared { raw, work, transform })
}

fn mm_stage(data: &Dataset, cfg: &EstimatorConfig) -> Result<MmFit> {
    let (rho0, rho1) = cfg.losses()?;
    let s = s_fit(data, &rho0, &cfg.s)?;
    mm_fit(data, &s.beta, s.scale.sigma, &rho1, &cfg.mm)
}

struct Summary {
    title: String,
    names: Vec<String>,
    beta: DVector<f64>,
    std_err: Option<DVector<f64>>,
    intercept: f64,
    scalars: Vec<(String, String)>,
}

fn render(summary: &Summary, format: Format) -> String {
    let mut header = vec!["term", "estimate"];
    if summary.std_err.is_some() {
        header.push("std_error");
    }
    let mut rows: Vec<Vec<String>> = summary
        .names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let mut r = vec![name.clone(), num(summary.beta[j], format)];
            if let Some(se) = &summary.std_err {
                r.push(num(se[j], format));
            }
            r
        })
        .collect();
    let mut icpt = vec!["(intercept)".to_string(), num(summary.intercept, format)];
    if summary.std_err.is_some() {
        icpt.push(String::new());
    }
    rows.push(icpt);
    match format {
        Format::Csv => {
            let mut s = header.join(",") + "\n";
            for r in &rows {
                s += &(r.join(",") + "\n");
            }
            for (k, v) in &summary.scalars {
                s += &format!("# {k}={v}\n");
            }
            s
        }
        Format::Text => {
            let mut s = summary.title.clone() + "\n";
            for (k, v) in &summary.scalars {
                s += &format!("{k}: {v}\n");
            }
            s + &aligned_table(&header, &rows)
        }
    }
}

fn num(x: f64, format: Format) -> String {
    match format {
        Format::Text => sig6(x),
        Format::Csv => format!("{x:e}"),
    }
}

fn active_names(names: &[String], beta: &DVector<f64>) -> String {
    let active: Vec<&str> = names
        .iter()
        .zip(beta.iter())
        .filter(|(_, b)| **b != 0.0)
        .map(|(n, _)| n.as_str())
        .collect();
    if active.is_empty() {
        "(none)".into()
    } else {
        active.join(" ")
    }
}

fn save_fit(path: Option<&Path>, names: &[String], beta: &DVector<f64>, sigma: f64, penalty: &PenaltySpec, intercept: f64) -> Result<()> {
    if let Some(path) = path {
        io::write_fit(
            path,
            &SavedFit {
                names: names.to_vec(),
                beta: beta.clone(),
                sigma,
                lambda: penalty.lambda,
                gamma: penalty.gamma,
                intercept,
            },
        )?;
    }
    Ok(())
}

fn br_scalars(fit: &BrFit, bic_value: f64, names: &[String], beta: &DVector<f64>) -> Vec<(String, String)> {
    vec![
        ("lambda".into(), sig6(fit.penalty.lambda)),
        ("gamma".into(), sig6(fit.penalty.gamma)),
        ("sigma".into(), sig6(fit.sigma)),
        ("active".into(), active_names(names, beta)),
        ("hat_trace".into(), sig6(fit.hat_trace)),
        ("bic".into(), sig6(bic_value)),
        ("iterations".into(), fit.iterations.to_string()),
        ("converged".into(), fit.converged.to_string()),
    ]
}

pub fn cmd_fit(args: &FitArgs) -> Result<String> {
    let cfg = args.est.config()?;
    let (_, rho1) = cfg.losses()?;
    let prep = prepare(&args.data, args.standardize)?;
    let mm = mm_stage(&prep.work, &cfg)?;
    let names = prep.raw.names.clone();

    if args.mm_only {
        let (beta, intercept) = prep.transform.back(&mm.beta);
        let se = sandwich_cov(&mm, &prep.work, &rho1)
            .ok()
            .map(|c| c.std_errors().component_div(&prep.transform.x_scale));
        let penalty = PenaltySpec::new(0.0, cfg.gamma)?;
        save_fit(args.save.as_deref(), &names, &beta, mm.sigma, &penalty, intercept)?;
        let summary = Summary {
            title: "MM estimate".into(),
            names,
            beta,
            std_err: se,
            intercept,
            scalars: vec![
                ("sigma".into(), sig6(mm.sigma)),
                ("objective".into(), sig6(mm.objective)),
                ("iterations".into(), mm.iterations.to_string()),
                ("converged".into(), mm.converged.to_string()),
            ],
        };
        return Ok(render(&summary, args.output.format));
    }

    let penalty = PenaltySpec::new(args.lambda, cfg.gamma)?;
    let fit = if mm.sigma == 0.0 {
        fit_from_coefficients(&prep.work, mm.beta.clone(), 0.0, &rho1, &penalty)?
    } else if args.one_step {
        let b = one_step(&mm, &prep.work, &rho1, &penalty, cfg.lqa.cutoff)?;
        fit_from_coefficients(&prep.work, b, mm.sigma, &rho1, &penalty)?
    } else {
        let mut fit = lqa_fit(&prep.work, mm.sigma, &rho1, &penalty, &mm.beta, &cfg.lqa)?;
        fit.hat_trace = hat_trace(&prep.work, &fit, &rho1)?;
        fit
    };
    let b = bic(&prep.work, &fit, &rho1);
    let (beta, intercept) = prep.transform.back(&fit.beta);
    save_fit(args.save.as_deref(), &names, &beta, fit.sigma, &penalty, intercept)?;
    let summary = Summary {
        title: if args.one_step { "one-step MM-bridge estimate" } else { "MM-bridge estimate" }.into(),
        scalars: br_scalars(&fit, b.value, &names, &beta),
        names,
        beta,
        std_err: None,
        intercept,
    };
    Ok(render(&summary, args.output.format))
}

fn path_table(t: &TuneResult, format: Format) -> String {
    let header = ["lambda", "bic", "hat_trace", "n_active", "iterations", "failure"];
    let rows: Vec<Vec<String>> = t
        .grid
        .iter()
        .map(|g| {
            vec![
                num(g.lambda, format),
                num(g.bic, format),
                num(g.hat_trace, format),
                g.n_active.to_string(),
                g.iterations.to_string(),
                g.failure.clone().unwrap_or_default(),
            ]
        })
        .collect();
    match format {
        Format::Text => aligned_table(&header, &rows),
        Format::Csv => {
            let mut s = header.join(",") + "\n";
            for r in rows {
                s += &(r.join(",") + "\n");
            }
            s
        }
    }
}

pub fn cmd_tune(args: &TuneArgs) -> Result<String> {
    let cfg = args.est.config()?;
    let (_, rho1) = cfg.losses()?;
    let prep = prepare(&args.data, args.standardize)?;
    let mm = mm_stage(&prep.work, &cfg)?;
    if mm.sigma == 0.0 {
        return Err(Error::Data("the data are fitted exactly (zero residual scale); nothing to tune".into()));
    }
    let grid = match &args.lambda_grid {
        Some(spec) => parse_grid(spec)?,
        None => robust_grid(&prep.work, &mm, &rho1, cfg.grid_count, cfg.grid_ratio),
    };
    let t = if args.one_step {
        select_one_step(&prep.work, &mm, &rho1, cfg.gamma, &grid, cfg.lqa.cutoff)?
    } else {
        select_lambda(&prep.work, mm.sigma, &rho1, cfg.gamma, &grid, &mm.beta, &cfg.lqa)?
    };
    let names = prep.raw.names.clone();
    let (beta, intercept) = prep.transform.back(&t.selected.beta);
    save_fit(args.save.as_deref(), &names, &beta, t.selected.sigma, &t.selected.penalty, intercept)?;
    let summary = Summary {
        title: format!("BIC-selected {} estimate ({} grid points)", if args.one_step { "one-step" } else { "MM-bridge" }, grid.len()),
        scalars: br_scalars(&t.selected, t.selected_bic, &names, &beta),
        names,
        beta,
        std_err: None,
        intercept,
    };
    let mut out = render(&summary, args.output.format);
    if args.path {
        out.push('\n');
        out += &path_table(&t, args.output.format);
    }
    Ok(out)
}

pub fn cmd_simulate(args: &SimArgs) -> Result<String> {
    let cfg = args.est.config()?;
    if let Some(n_grid) = &args.sparsity {
        let points = sparsity_curve(cfg.gamma, n_grid, args.reps, args.rate, args.sigma, args.est.seed, &cfg)?;
        return Ok(match args.output.format {
            Format::Csv => io::sparsity_csv(&points),
            Format::Text => {
                let rows: Vec<Vec<String>> = points
                    .iter()
                    .map(|p| vec![p.n.to_string(), sig6(p.lambda), sig6(p.fraction), sig6(p.all_zero_fraction)])
                    .collect();
                aligned_table(&["n", "lambda", "fraction", "all_zero_fraction"], &rows)
            }
        });
    }
    let case = Case::parse(&args.case).ok_or_else(|| Error::InvalidInput(format!("unknown case {:?}", args.case)))?;
    let mut scenario = Scenario::new(case, args.n, args.eps, args.sigma, args.err.into(), args.est.seed);
    scenario.k = args.k;
    if let Some(p) = args.p {
        if p != scenario.p {
            return Err(Error::InvalidInput(format!(
                "{} fixes p = {}, got --p {p}",
                case.name(),
                scenario.p
            )));
        }
    }
    let methods = parse_methods(&args.methods)?;
    let report = run_study(&scenario, args.reps, &methods, &cfg)?;
    if let Some(path) = &args.replicates {
        std::fs::write(path, io::replicates_csv(&report.replicates))?;
    }
    Ok(match args.output.format {
        Format::Csv => io::report_csv(&report.rows),
        Format::Text => io::report_text(&report),
    })
}

pub fn cmd_predict(args: &PredictArgs) -> Result<String> {
    let fit = io::read_fit(&args.fit)?;
    let table = io::read_table(&args.input)?;
    let cols = fit
        .names
        .iter()
        .map(|n| table.column_index(n))
        .collect::<Result<Vec<_>>>()?;
    let pred = fit.predict(&table.matrix(&cols));
    let response = match &args.response {
        Some(name) => Some(table.column(table.column_index(name)?)),
        None => None,
    };
    let format = args.output.format;
    let mut out = String::new();
    if let Some(y) = &response {
        let mspe = (y - &pred).norm_squared() / y.len() as f64;
        out += &match format {
            Format::Csv => format!("# mspe={mspe:e}\n"),
            Format::Text => format!("mean squared prediction error: {}\n", sig6(mspe)),
        };
    }
    match format {
        Format::Csv => {
            out += "prediction\n";
            for v in pred.iter() {
                out += &format!("{v:e}\n");
            }
        }
        Format::Text => {
            let rows: Vec<Vec<String>> = pred
                .iter()
                .enumerate()
                .map(|(i, v)| vec![(i + 1).to_string(), sig6(*v)])
                .collect();
            out += &aligned_table(&["row", "prediction"], &rows);
        }
    }
    Ok(out)
}

/// Mean squared prediction error per method over repeated random splits.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossvalResult {
    pub n_train: usize,
    pub n_test: usize,
    pub methods: Vec<Method>,
    /// `errors[k][r]`: method `k`, split `r`; NaN when the fit failed.
    pub errors: Vec<Vec<f64>>,
}

impl CrossvalResult {
    pub fn mean(&self, k: usize) -> f64 {
        let ok: Vec<f64> = self.errors[k].iter().copied().filter(|v| v.is_finite()).collect();
        if ok.is_empty() {
            f64::NAN
        } else {
            ok.iter().sum::<f64>() / ok.len() as f64
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub fn crossval(
    data: &Dataset,
    n_train: usize,
    n_test: usize,
    reps: usize,
    methods: &[Method],
    cfg: &EstimatorConfig,
    intercept: bool,
    standardize: bool,
    seed: u64,
) -> Result<CrossvalResult> {
    if n_train + n_test > data.n() || n_test == 0 {
        return Err(Error::InvalidInput(format!(
            "split {n_train}+{n_test} does not fit in n = {}",
            data.n()
        )));
    }
    if n_train <= data.p() {
        return Err(Error::UnsupportedDimension { n: n_train, p: data.p() });
    }
    if reps == 0 {
        return Err(Error::InvalidInput("reps must be >= 1".into()));
    }
    let (rho0, rho1) = cfg.losses()?;
    let mut errors = vec![Vec::with_capacity(reps); methods.len()];
    for r in 0..reps {
        let mut rng = stream_rng(seed, r as u64);
        let mut idx: Vec<usize> = (0..data.n()).collect();
        idx.shuffle(&mut rng);
        let train = data.subset(&idx[..n_train]);
        let test = data.subset(&idx[n_train..n_train + n_test]);
        let tr = Transform::fit(&train, intercept, standardize)?;
        let work = tr.apply(&train)?;
        let est = fit_methods(&work, methods, cfg, &rho0, &rho1, seed.wrapping_add(r as u64));
        for (k, (_, beta)) in est.estimates.iter().enumerate() {
            let e = match beta {
                Ok(b) => {
                    let (b, a) = tr.back(b);
                    let pred = (&test.x * b).add_scalar(a);
                    (&test.y - pred).norm_squared() / n_test as f64
                }
                Err(_) => f64::NAN,
            };
            errors[k].push(e);
        }
    }
    Ok(CrossvalResult {
        n_train,
        n_test,
        methods: methods.to_vec(),
        errors,
    })
}

pub fn cmd_crossval(args: &CrossvalArgs) -> Result<String> {
    let cfg = args.est.config()?;
    let data = io::read_csv(&args.data.input, args.data.response.as_deref())?;
    let n = data.n();
    let n_train = args.n_train.unwrap_or_else(|| match args.n_test {
        Some(t) => n.saturating_sub(t),
        None => (2 * n).div_ceil(3),
    });
    let n_test = args.n_test.unwrap_or(n.saturating_sub(n_train));
    let methods = parse_methods(&args.methods)?;
    let res = crossval(&data, n_train, n_test, args.reps, &methods, &cfg, args.data.intercept, args.standardize, args.est.seed)?;
    let failures = |k: usize| res.errors[k].iter().filter(|v| !v.is_finite()).count();
    Ok(match args.output.format {
        Format::Csv => {
            let mut s = String::from("method,mspe,failures\n");
            for (k, m) in res.methods.iter().enumerate() {
                s += &format!("{},{:e},{}\n", m.name(), res.mean(k), failures(k));
            }
            s
        }
        Format::Text => {
            let rows: Vec<Vec<String>> = res
                .methods
                .iter()
                .enumerate()
                .map(|(k, m)| vec![m.name().to_string(), sig6(res.mean(k)), failures(k).to_string()])
                .collect();
            format!("{} splits, {} train / {} test rows\n", args.reps, n_train, n_test)
                + &aligned_table(&["method", "mspe", "failures"], &rows)
        }
    })
}

fn out_path(cmd: &Command) -> Option<&Path> {
    match cmd {
        Command::Fit(a) => a.output.out.as_deref(),
        Command::Tune(a) => a.output.out.as_deref(),
        Command::Simulate(a) => a.output.out.as_deref(),
        Command::Predict(a) => a.output.out.as_deref(),
        Command::Crossval(a) => a.output.out.as_deref(),
    }
}

/// Run a parsed command and return its report text.
pub fn execute(cli: &Cli) -> Result<String> {
    match &cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Tune(a) => cmd_tune(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Crossval(a) => cmd_crossval(a),
    }
}

pub fn exit_code(e: &Error) -> u8 {
    if e.is_data_error() {
        2
    } else {
        3
    }
}

/// Entry point shared by the binary: 0 on success, 2 on data errors, 3 on numerical failures.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(&cli).and_then(|text| io::emit(out_path(&cli.command), &text)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_spec() {
        let g = parse_grid("0.1:10:3").unwrap();
        assert_eq!(g.len(), 3);
        assert!((g[1] - 1.0).abs() < 1e-12);
        assert!(parse_grid("0:1:3").is_err());
        assert!(parse_grid("1:2").is_err());
        assert!(parse_grid("2:1:3").is_err());
    }

    #[test]
    fn methods_list() {
        assert_eq!(parse_methods("mm, mmbr").unwrap(), vec![Method::Mm, Method::MmBr]);
        assert!(parse_methods("ols").is_err());
    }

    #[test]
    fn transform_round_trip() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 10.0, 2.0, 30.0, 3.0, 20.0, 5.0, 50.0]);
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        let d = Dataset::new(x, y).unwrap();
        let t = Transform::fit(&d, true, true).unwrap();
        let w = t.apply(&d).unwrap();
        let beta_w = DVector::from_vec(vec![0.5, -0.25]);
        let (b, a) = t.back(&beta_w);
        let direct = (&d.x * &b).add_scalar(a);
        let via = (&w.x * &beta_w).add_scalar(t.y_center);
        assert!((direct - via).amax() < 1e-12);
    }

    #[test]
    fn cli_parses_flags() {
        let cli = Cli::try_parse_from([
            "mmbridge", "simulate", "--case", "case3", "--K", "20", "--err", "normal", "--eps", "0.2", "--reps", "3",
        ])
        .unwrap();
        let Command::Simulate(a) = cli.command else { panic!() };
        assert_eq!(a.k, 20.0);
        assert_eq!(a.err, ErrArg::Normal);
        let cli = Cli::try_parse_from(["mmbridge", "tune", "d.csv", "--standardize", "false"]).unwrap();
        let Command::Tune(a) = cli.command else { panic!() };
        assert!(!a.standardize);
        let cli = Cli::try_parse_from(["mmbridge", "tune", "d.csv"]).unwrap();
        let Command::Tune(a) = cli.command else { panic!() };
        assert!(a.standardize);
        let cli = Cli::try_parse_from(["mmbridge", "fit", "d.csv", "--standardize"]).unwrap();
        let Command::Fit(a) = cli.command else { panic!() };
        assert!(a.standardize);
    }
}
