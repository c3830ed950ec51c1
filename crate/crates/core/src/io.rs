//! CSV ingestion, saved-fit files, and report output.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::simlab::{Method, MethodRow, ReplicateRecord, SimReport, SparsityPoint};

/// A numeric table with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Data(format!("no column named {name:?}")))
    }

    pub fn column(&self, j: usize) -> DVector<f64> {
        DVector::from_iterator(self.rows.len(), self.rows.iter().map(|r| r[j]))
    }

    /// Matrix of the named columns, in the given order.
    pub fn matrix(&self, cols: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows.len(), cols.len(), |i, j| self.rows[i][cols[j]])
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))
}

/// Parse comma-separated numbers under a header. Rows are numbered from the
/// header (row 1), so the first data row is row 2.
pub fn read_table_from<R: Read>(input: R) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_reader(input);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(Error::Data("missing header row".into()));
    }
    let mut rows = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let row_no = k + 2;
        let rec = rec.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths { expected_len, len, .. } => Error::Data(format!(
                "row {row_no} has {len} fields, expected {expected_len}"
            )),
            _ => Error::Csv(e),
        })?;
        let mut row = Vec::with_capacity(header.len());
        for (j, cell) in rec.iter().enumerate() {
            let v: f64 = cell.parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(|| Error::Parse {
                row: row_no,
                column: header[j].clone(),
                value: cell.to_string(),
            })?;
            row.push(v);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Data("no data rows after the header".into()));
    }
    Ok(Table { header, rows })
}

pub fn read_table(path: &Path) -> Result<Table> {
    read_table_from(open(path)?)
}

/// Load a regression dataset; the response defaults to the last column.
pub fn read_csv(path: &Path, response: Option<&str>) -> Result<Dataset> {
    dataset_from_table(&read_table(path)?, response)
}

pub fn dataset_from_table(table: &Table, response: Option<&str>) -> Result<Dataset> {
    let yj = match response {
        Some(name) => table.column_index(name)?,
        None => table.header.len() - 1,
    };
    let cols: Vec<usize> = (0..table.header.len()).filter(|&j| j != yj).collect();
    if cols.is_empty() {
        return Err(Error::Data("no predictor columns".into()));
    }
    let names = cols.iter().map(|&j| table.header[j].clone()).collect();
    let data = Dataset::with_names(table.matrix(&cols), table.column(yj), names)?;
    data.require_tall()?;
    Ok(data)
}

/// Coefficients saved by `fit`/`tune` and consumed by `predict`.
#[derive(Debug, Clone, PartialEq)]
pub struct SavedFit {
    pub names: Vec<String>,
    pub beta: DVector<f64>,
    pub sigma: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub intercept: f64,
}

impl SavedFit {
    /// `intercept + x^T beta` for every row of `x`.
    pub fn predict(&self, x: &DMatrix<f64>) -> DVector<f64> {
        (x * &self.beta).add_scalar(self.intercept)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (name, b) in self.names.iter().zip(self.beta.iter()) {
            let _ = writeln!(s, "beta.{name}={b:e}");
        }
        let _ = writeln!(s, "sigma={:e}", self.sigma);
        let _ = writeln!(s, "lambda={:e}", self.lambda);
        let _ = writeln!(s, "gamma={:e}", self.gamma);
        let _ = writeln!(s, "intercept={:e}", self.intercept);
        s
    }

    pub fn from_reader<R: BufRead>(input: R) -> Result<Self> {
        let mut names = Vec::new();
        let mut beta = Vec::new();
        let mut scalars: HashMap<String, f64> = HashMap::new();
        for (k, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Data(format!("line {}: expected name=value", k + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            let v: f64 = value.parse().map_err(|_| Error::Parse {
                row: k + 1,
                column: key.to_string(),
                value: value.to_string(),
            })?;
            if let Some(name) = key.strip_prefix("beta.") {
                names.push(name.to_string());
                beta.push(v);
            } else {
                scalars.insert(key.to_string(), v);
            }
        }
        if beta.is_empty() {
            return Err(Error::Data("saved fit has no beta.<name> entries".into()));
        }
        let get = |k: &str| {
            scalars
                .get(k)
                .copied()
                .ok_or_else(|| Error::Data(format!("saved fit is missing {k:?}")))
        };
        Ok(SavedFit {
            names,
            beta: DVector::from_vec(beta),
            sigma: get("sigma")?,
            lambda: get("lambda")?,
            gamma: get("gamma")?,
            intercept: scalars.get("intercept").copied().unwrap_or(0.0),
        })
    }
}

pub fn write_fit(path: &Path, fit: &SavedFit) -> Result<()> {
    std::fs::write(path, fit.to_text())?;
    Ok(())
}

pub fn read_fit(path: &Path) -> Result<SavedFit> {
    SavedFit::from_reader(BufReader::new(open(path)?))
}

/// `x` to 6 significant digits.
pub fn sig6(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0".into();
    }
    let e = x.abs().log10().floor() as i32;
    if (-4..6).contains(&e) {
        format!("{:.*}", (5 - e) as usize, x)
    } else {
        format!("{x:.5e}")
    }
}

/// Left-aligned first column, right-aligned rest.
pub fn aligned_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut width: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in width.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cells: &mut dyn Iterator<Item = &str>| {
        let mut s = String::new();
        for (j, c) in cells.enumerate() {
            if j == 0 {
                let _ = write!(s, "{c:<w$}", w = width[0]);
            } else {
                let _ = write!(s, "  {c:>w$}", w = width[j]);
            }
        }
        s.push('\n');
        s
    };
    let mut out = line(&mut header.iter().copied());
    for r in rows {
        out += &line(&mut r.iter().map(String::as_str));
    }
    out
}

const REPORT_HEADER: [&str; 6] = ["method", "correct", "incorrect", "mean_mse", "median_mse", "failures"];

/// Numbers use the shortest exact representation, so reading back is lossless.
pub fn report_csv(rows: &[MethodRow]) -> String {
    let mut s = REPORT_HEADER.join(",");
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{:e},{:e},{:e},{:e},{}",
            r.method.name(),
            r.correct,
            r.incorrect,
            r.mean_mse,
            r.median_mse,
            r.failures
        );
    }
    s
}

pub fn report_text(report: &SimReport) -> String {
    let sc = &report.scenario;
    let mut out = format!(
        "{} n={} p={} eps={} sigma={} errors={} K={} reps={} seed={}\n",
        sc.case.name(),
        sc.n,
        sc.p,
        sig6(sc.epsilon),
        sig6(sc.sigma),
        sc.errors.name(),
        sig6(sc.k),
        report.reps,
        sc.seed
    );
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.method.name().to_string(),
                sig6(r.correct),
                sig6(r.incorrect),
                sig6(r.mean_mse),
                sig6(r.median_mse),
                r.failures.to_string(),
            ]
        })
        .collect();
    out += &aligned_table(&REPORT_HEADER, &rows);
    out
}

pub fn read_report_csv<R: Read>(input: R) -> Result<Vec<MethodRow>> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row_no = k + 2;
        let cell = |j: usize| rec.get(j).unwrap_or("");
        let num = |j: usize| -> Result<f64> {
            cell(j).parse().map_err(|_| Error::Parse {
                row: row_no,
                column: REPORT_HEADER[j].to_string(),
                value: cell(j).to_string(),
            })
        };
        let method = Method::parse(cell(0)).ok_or_else(|| Error::Parse {
            row: row_no,
            column: "method".into(),
            value: cell(0).to_string(),
        })?;
        out.push(MethodRow {
            method,
            correct: num(1)?,
            incorrect: num(2)?,
            mean_mse: num(3)?,
            median_mse: num(4)?,
            failures: num(5)? as usize,
        });
    }
    Ok(out)
}

/// One row per replication and method, with the coefficient vector spread over columns.
pub fn replicates_csv(records: &[ReplicateRecord]) -> String {
    let p = records.first().map_or(0, |r| r.beta.len());
    let mut s = String::from("replication,method,mse,correct,incorrect");
    for j in 1..=p {
        let _ = write!(s, ",beta{j}");
    }
    s.push('\n');
    for r in records {
        let _ = write!(s, "{},{},{:e},{},{}", r.replication, r.method.name(), r.mse, r.correct, r.incorrect);
        for b in r.beta.iter() {
            let _ = write!(s, ",{b:e}");
        }
        s.push('\n');
    }
    s
}

pub fn sparsity_csv(points: &[SparsityPoint]) -> String {
    let mut s = String::from("n,lambda,fraction,all_zero_fraction\n");
    for p in points {
        let _ = writeln!(s, "{},{:e},{:e},{:e}", p.n, p.lambda, p.fraction, p.all_zero_fraction);
    }
    s
}

/// Write `text` to `path`, or to stdout when `path` is `None`.
pub fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}
