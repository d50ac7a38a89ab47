//! `qem compare`: per-method table and MSE ranking from a results.csv.
//!
//! Measured overhead is the per-shot variance ratio against the raw row;
//! the predicted column replays the formula overhead the run recorded.

use crate::csv::{parse_results, CsvError, ResultRow};

pub fn compare(text: &str) -> Result<String, CsvError> {
    let rows = parse_results(text)?;
    let raw = rows
        .iter()
        .find(|r| r.method == "raw")
        .ok_or_else(|| CsvError(String::from("no raw row to compare against")))?
        .clone();

    let methods: Vec<&ResultRow> = rows.iter().filter(|r| r.method != "ideal").collect();
    if methods.is_empty() {
        return Err(CsvError(String::from("no method rows")));
    }

    let mut out = String::new();
    out.push_str(
        "method      mean           bias           variance       mse            measured_oh  predicted_oh\n",
    );
    for r in &methods {
        let measured = if raw.variance > 0.0 && r.n_shots > 1 {
            format!("{:<12.4}", r.variance / raw.variance)
        } else {
            format!("{:<12}", "-")
        };
        out.push_str(&format!(
            "{:<10}  {:<13.6}  {:<13}  {:<13.6}  {:<13}  {}  {:<12.4}\n",
            r.method,
            r.mean,
            r.bias.map(|b| format!("{b:.6}")).unwrap_or_else(|| String::from("-")),
            r.variance,
            r.mse.map(|m| format!("{m:.3e}")).unwrap_or_else(|| String::from("-")),
            measured,
            r.overhead,
        ));
    }

    // Bias-variance tradeoff ranking by MSE (ascending).
    let mut ranked: Vec<&&ResultRow> = methods.iter().filter(|r| r.mse.is_some()).collect();
    ranked.sort_by(|a, b| {
        a.mse
            .unwrap()
            .partial_cmp(&b.mse.unwrap())
            .expect("finite mse")
            .then_with(|| a.method.cmp(&b.method))
    });
    out.push_str("\nranking by MSE (bias² + variance/n_shots):\n");
    for (place, r) in ranked.iter().enumerate() {
        out.push_str(&format!(
            "  {}. {} (mse {:.3e})\n",
            place + 1,
            r.method,
            r.mse.unwrap()
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csv::{write_results, ResultRow};

    fn row(method: &str, mean: f64, var: f64, bias: f64, n: u64, overhead: f64) -> ResultRow {
        ResultRow {
            method: method.to_string(),
            n_shots: n,
            mean,
            variance: var,
            bias: Some(bias),
            mse: Some(bias * bias + var / n as f64),
            overhead,
            seed: 1,
        }
    }

    #[test]
    fn ranks_by_mse_and_reports_ratios() {
        let rows = vec![
            row("ideal", 1.0, 0.0, 0.0, 1, 1.0),
            row("raw", 0.8, 1.0, -0.2, 10_000, 1.0),
            row("pec", 1.0, 54.0, 0.0, 10_000, 54.6),
            row("zne", 0.9, 9.0, -0.1, 10_000, 9.0),
        ];
        let text = write_results(&rows);
        let report = compare(&text).unwrap();
        assert!(report.contains("ranking by MSE"));
        // PEC has the smallest MSE here (bias 0 dominates), then zne, then raw.
        let pec_pos = report.find("1. pec").unwrap();
        let zne_pos = report.find("2. zne").unwrap();
        assert!(pec_pos < zne_pos);
        assert!(report.contains("54.6"));
    }

    #[test]
    fn missing_raw_row_is_an_error() {
        let rows = vec![row("ideal", 1.0, 0.0, 0.0, 1, 1.0)];
        let text = write_results(&rows);
        assert!(compare(&text).is_err());
    }

    #[test]
    fn empty_csv_is_an_error() {
        assert!(compare("").is_err());
        assert!(compare("method,n_shots,mean,variance,bias,mse,overhead,seed\n").is_err());
    }
}
