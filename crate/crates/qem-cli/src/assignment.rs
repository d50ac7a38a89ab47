//! Assignment-matrix persistence (row-major JSON; column-stochasticity is
//! re-asserted on load).

use serde::{Deserialize, Serialize};

use qem_core::readout::AssignmentMatrix;
use qem_core::RMatrix;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssignmentFile {
    pub n_qubits: usize,
    pub form: String,
    /// Row-major 2^N × 2^N entries (full form).
    #[serde(default)]
    pub entries: Option<Vec<Vec<f64>>>,
    /// Per-qubit 2×2 factors (tensor form).
    #[serde(default)]
    pub factors: Option<Vec<[[f64; 2]; 2]>>,
}

#[derive(Debug)]
pub struct AssignmentIoError(pub String);

impl std::fmt::Display for AssignmentIoError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "assignment matrix: {}", self.0)
    }
}

pub fn to_json(a: &AssignmentMatrix) -> Result<String, AssignmentIoError> {
    let file = match a {
        AssignmentMatrix::Full { n_qubits, matrix } => {
            let dim = 1usize << n_qubits;
            let entries: Vec<Vec<f64>> = (0..dim)
                .map(|i| (0..dim).map(|j| matrix[(i, j)]).collect())
                .collect();
            AssignmentFile {
                n_qubits: *n_qubits,
                form: String::from("full"),
                entries: Some(entries),
                factors: None,
            }
        }
        AssignmentMatrix::Tensor { n_qubits, factors } => AssignmentFile {
            n_qubits: *n_qubits,
            form: String::from("tensor"),
            entries: None,
            factors: Some(factors.clone()),
        },
    };
    serde_json::to_string_pretty(&file).map_err(|e| AssignmentIoError(e.to_string()))
}

pub fn from_json(text: &str) -> Result<AssignmentMatrix, AssignmentIoError> {
    let file: AssignmentFile =
        serde_json::from_str(text).map_err(|e| AssignmentIoError(e.to_string()))?;
    match file.form.as_str() {
        "full" => {
            let entries = file
                .entries
                .ok_or_else(|| AssignmentIoError(String::from("full form needs 'entries'")))?;
            let dim = 1usize << file.n_qubits;
            if entries.len() != dim || entries.iter().any(|r| r.len() != dim) {
                return Err(AssignmentIoError(format!(
                    "entries must be {dim}×{dim} row-major"
                )));
            }
            let mut m = RMatrix::zeros(dim, dim);
            for (i, row) in entries.iter().enumerate() {
                for (j, v) in row.iter().enumerate() {
                    m[(i, j)] = *v;
                }
            }
            AssignmentMatrix::from_full(file.n_qubits, m)
                .map_err(|e| AssignmentIoError(e.to_string()))
        }
        "tensor" => {
            let factors = file
                .factors
                .ok_or_else(|| AssignmentIoError(String::from("tensor form needs 'factors'")))?;
            if factors.len() != file.n_qubits {
                return Err(AssignmentIoError(format!(
                    "expected {} factors",
                    file.n_qubits
                )));
            }
            AssignmentMatrix::from_tensor(factors).map_err(|e| AssignmentIoError(e.to_string()))
        }
        other => Err(AssignmentIoError(format!("unknown form '{other}'"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_round_trip_and_stochastic_check() {
        let m = RMatrix::from_rows(&[&[0.9, 0.05], &[0.1, 0.95]]);
        let a = AssignmentMatrix::from_full(1, m).unwrap();
        let text = to_json(&a).unwrap();
        let back = from_json(&text).unwrap();
        assert!(
            back.full_matrix()
                .unwrap()
                .max_abs_diff(&a.full_matrix().unwrap())
                < 1e-15
        );

        // Column sums re-asserted on load.
        let broken = text.replace("0.9,", "0.7,");
        assert!(from_json(&broken).is_err());
    }
}
