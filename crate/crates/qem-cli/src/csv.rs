//! RFC-4180 CSV emission and parsing for results and ZNE sweeps.
//!
//! One results row per estimator: `method,n_shots,mean,variance,bias,mse,
//! overhead,seed`. Floats use Rust's shortest-round-trip formatting, '.'
//! decimal separator, UTF-8, so identical runs produce byte-identical files.

use std::fmt::Write as _;

use qem_core::stats::EstimatorReport;

pub const RESULTS_HEADER: &str = "method,n_shots,mean,variance,bias,mse,overhead,seed";
pub const SWEEP_HEADER: &str = "lambda,mean,variance";

#[derive(Debug, Clone)]
pub struct ResultRow {
    pub method: String,
    pub n_shots: u64,
    pub mean: f64,
    pub variance: f64,
    pub bias: Option<f64>,
    pub mse: Option<f64>,
    /// The method's formula (predicted) overhead.
    pub overhead: f64,
    pub seed: u64,
}

impl ResultRow {
    pub fn from_report(method: &str, report: &EstimatorReport, overhead: f64, seed: u64) -> Self {
        ResultRow {
            method: method.to_string(),
            n_shots: report.n_shots,
            mean: report.mean,
            variance: report.variance,
            bias: report.bias,
            mse: report.mse,
            overhead,
            seed,
        }
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

pub fn write_results(rows: &[ResultRow]) -> String {
    let mut out = String::new();
    out.push_str(RESULTS_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.method,
            r.n_shots,
            r.mean,
            r.variance,
            fmt_opt(r.bias),
            fmt_opt(r.mse),
            r.overhead,
            r.seed
        );
    }
    out
}

pub fn write_sweep(points: &[(f64, f64, f64)]) -> String {
    let mut out = String::new();
    out.push_str(SWEEP_HEADER);
    out.push('\n');
    for (lambda, mean, variance) in points {
        let _ = writeln!(out, "{lambda},{mean},{variance}");
    }
    out
}

#[derive(Debug)]
pub struct CsvError(pub String);

impl std::fmt::Display for CsvError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "malformed csv: {}", self.0)
    }
}

pub fn parse_results(text: &str) -> Result<Vec<ResultRow>, CsvError> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| CsvError(String::from("empty file")))?;
    if header.trim() != RESULTS_HEADER {
        return Err(CsvError(format!("unexpected header '{header}'")));
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(CsvError(format!(
                "line {}: expected 8 fields, found {}",
                lineno + 2,
                fields.len()
            )));
        }
        let parse_f = |s: &str, what: &str| -> Result<f64, CsvError> {
            s.parse::<f64>()
                .map_err(|_| CsvError(format!("line {}: bad {what} '{s}'", lineno + 2)))
        };
        let parse_opt = |s: &str, what: &str| -> Result<Option<f64>, CsvError> {
            if s.is_empty() {
                Ok(None)
            } else {
                parse_f(s, what).map(Some)
            }
        };
        rows.push(ResultRow {
            method: fields[0].to_string(),
            n_shots: fields[1]
                .parse()
                .map_err(|_| CsvError(format!("line {}: bad n_shots", lineno + 2)))?,
            mean: parse_f(fields[2], "mean")?,
            variance: parse_f(fields[3], "variance")?,
            bias: parse_opt(fields[4], "bias")?,
            mse: parse_opt(fields[5], "mse")?,
            overhead: parse_f(fields[6], "overhead")?,
            seed: fields[7]
                .parse()
                .map_err(|_| CsvError(format!("line {}: bad seed", lineno + 2)))?,
        });
    }
    if rows.is_empty() {
        return Err(CsvError(String::from("no data rows")));
    }
    Ok(rows)
}
