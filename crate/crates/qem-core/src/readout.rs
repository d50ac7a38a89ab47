//! Measurement error mitigation: assignment-matrix calibration, linear-solve
//! inversion, iterative Bayesian unfolding and twirled rescaling.
//!
//! Assignment matrices are column-stochastic: A[x][y] is the probability of
//! reading bitstring x when the ideal outcome is y, so p_noisy = A·p_ideal.
//! Expectation recovery always goes through linear solves on the LU
//! factorization, never an explicit inverse; the 1-norm condition estimate
//! is reported alongside.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::channel::Channel;
use crate::error::{Error, Result};
use crate::linalg::Lu;
use crate::matrix::RMatrix;
use crate::pauli::PauliString;
use crate::state::DensityMatrix;

/// Full assignment matrices are capped at 10 qubits (2^10 × 2^10).
pub const FULL_MODE_CAP: usize = 10;

const LEAKAGE_TOL: f64 = 1e-10;
const STOCHASTIC_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssignmentForm {
    Full,
    Tensor,
}

/// Column-stochastic readout transition matrix.
#[derive(Debug, Clone)]
pub enum AssignmentMatrix {
    Full { n_qubits: usize, matrix: RMatrix },
    /// Per-qubit 2×2 factors; the full matrix is their Kronecker product.
    Tensor { n_qubits: usize, factors: Vec<[[f64; 2]; 2]> },
}

impl AssignmentMatrix {
    pub fn from_full(n_qubits: usize, matrix: RMatrix) -> Result<Self> {
        let a = AssignmentMatrix::Full { n_qubits, matrix };
        a.validate()?;
        Ok(a)
    }

    pub fn from_tensor(factors: Vec<[[f64; 2]; 2]>) -> Result<Self> {
        let a = AssignmentMatrix::Tensor { n_qubits: factors.len(), factors };
        a.validate()?;
        Ok(a)
    }

    pub fn n_qubits(&self) -> usize {
        match self {
            AssignmentMatrix::Full { n_qubits, .. }
            | AssignmentMatrix::Tensor { n_qubits, .. } => *n_qubits,
        }
    }

    pub fn dim(&self) -> usize {
        1usize << self.n_qubits()
    }

    /// Columns sum to 1 and entries lie in [0, 1].
    #[allow(clippy::needless_range_loop)]
    pub fn validate(&self) -> Result<()> {
        match self {
            AssignmentMatrix::Full { n_qubits, matrix } => {
                if *n_qubits > FULL_MODE_CAP {
                    return Err(Error::TooManyQubits { n: *n_qubits, cap: FULL_MODE_CAP });
                }
                let dim = 1usize << n_qubits;
                if matrix.rows() != dim || matrix.cols() != dim {
                    return Err(Error::DimensionMismatch { expected: dim, got: matrix.rows() });
                }
                for j in 0..dim {
                    let mut col = 0.0;
                    for i in 0..dim {
                        let v = matrix[(i, j)];
                        if !(-STOCHASTIC_TOL..=1.0 + STOCHASTIC_TOL).contains(&v) {
                            return Err(Error::InvalidArgument(format!(
                                "assignment entry ({i},{j}) = {v} outside [0,1]"
                            )));
                        }
                        col += v;
                    }
                    if (col - 1.0).abs() > STOCHASTIC_TOL {
                        return Err(Error::InvalidArgument(format!(
                            "column {j} sums to {col}, not 1"
                        )));
                    }
                }
                Ok(())
            }
            AssignmentMatrix::Tensor { factors, .. } => {
                for (q, f) in factors.iter().enumerate() {
                    for y in 0..2 {
                        let col = f[0][y] + f[1][y];
                        if (col - 1.0).abs() > STOCHASTIC_TOL {
                            return Err(Error::InvalidArgument(format!(
                                "qubit {q} column {y} sums to {col}"
                            )));
                        }
                    }
                }
                Ok(())
            }
        }
    }

    /// Expand to the dense 2^N × 2^N matrix.
    pub fn full_matrix(&self) -> Result<RMatrix> {
        match self {
            AssignmentMatrix::Full { matrix, .. } => Ok(matrix.clone()),
            AssignmentMatrix::Tensor { n_qubits, factors } => {
                if *n_qubits > FULL_MODE_CAP {
                    return Err(Error::TooManyQubits { n: *n_qubits, cap: FULL_MODE_CAP });
                }
                let mut acc = RMatrix::identity(1);
                for f in factors {
                    let fm = RMatrix::from_rows(&[&[f[0][0], f[0][1]], &[f[1][0], f[1][1]]]);
                    acc = acc.kron(&fm);
                }
                Ok(acc)
            }
        }
    }
}

/// A (possibly quasi-) probability vector over bitstrings, indexed by
/// computational basis state (qubit 0 = most significant bit).
#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutDistribution {
    pub probs: Vec<f64>,
    /// Set when inversion produced negative entries.
    pub quasi: bool,
}

impl ReadoutDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-8 {
            return Err(Error::InvalidArgument(format!("distribution sums to {total}")));
        }
        if probs.iter().any(|p| *p < -1e-12) {
            return Err(Error::InvalidProbability(
                probs.iter().cloned().fold(f64::INFINITY, f64::min),
            ));
        }
        Ok(ReadoutDistribution { probs, quasi: false })
    }

    pub fn from_state(state: &DensityMatrix) -> Self {
        ReadoutDistribution { probs: state.z_diagonal(), quasi: false }
    }

    pub fn l1_distance(&self, other: &ReadoutDistribution) -> f64 {
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .sum()
    }
}

/// Calibrate the assignment matrix of a measurement noise channel by
/// preparing every computational basis state (or per-qubit states in tensor
/// mode) and reading the output distribution. The channel must preserve the
/// computational subspace; off-diagonal leakage above 1e−10 is an error.
#[allow(clippy::needless_range_loop)]
pub fn calibrate(
    meas_channel: &Channel,
    n_qubits: usize,
    mode: AssignmentForm,
) -> Result<AssignmentMatrix> {
    if meas_channel.n_qubits() != n_qubits {
        return Err(Error::DimensionMismatch {
            expected: n_qubits,
            got: meas_channel.n_qubits(),
        });
    }
    let targets: Vec<usize> = (0..n_qubits).collect();
    match mode {
        AssignmentForm::Full => {
            if n_qubits > FULL_MODE_CAP {
                return Err(Error::TooManyQubits { n: n_qubits, cap: FULL_MODE_CAP });
            }
            let dim = 1usize << n_qubits;
            let mut a = RMatrix::zeros(dim, dim);
            for y in 0..dim {
                let prepared = DensityMatrix::basis_state(n_qubits, y)?;
                let out = meas_channel.apply_to(&prepared, &targets)?;
                check_leakage(&out)?;
                for x in 0..dim {
                    a[(x, y)] = out.matrix()[(x, x)].re;
                }
            }
            AssignmentMatrix::from_full(n_qubits, a)
        }
        AssignmentForm::Tensor => {
            let mut factors = Vec::with_capacity(n_qubits);
            for q in 0..n_qubits {
                let mut f = [[0.0; 2]; 2];
                for y in 0..2 {
                    let idx = if y == 1 { 1usize << (n_qubits - 1 - q) } else { 0 };
                    let prepared = DensityMatrix::basis_state(n_qubits, idx)?;
                    let out = meas_channel.apply_to(&prepared, &targets)?;
                    check_leakage(&out)?;
                    // Marginal outcome distribution of qubit q.
                    for b in 0..out.dim() {
                        let x = (b >> (n_qubits - 1 - q)) & 1;
                        f[x][y] += out.matrix()[(b, b)].re;
                    }
                }
                factors.push(f);
            }
            AssignmentMatrix::from_tensor(factors)
        }
    }
}

fn check_leakage(state: &DensityMatrix) -> Result<()> {
    let dim = state.dim();
    for i in 0..dim {
        for j in 0..dim {
            if i != j && state.matrix()[(i, j)].norm() > LEAKAGE_TOL {
                return Err(Error::InvalidChannel(format!(
                    "measurement channel leaks off the computational subspace \
                     (|ρ[{i},{j}]| = {:e})",
                    state.matrix()[(i, j)].norm()
                )));
            }
        }
    }
    Ok(())
}

/// Forward-noise a distribution: p_noisy = A·p.
pub fn forward(a: &AssignmentMatrix, p: &ReadoutDistribution) -> Result<ReadoutDistribution> {
    let m = a.full_matrix()?;
    if p.probs.len() != m.cols() {
        return Err(Error::DimensionMismatch { expected: m.cols(), got: p.probs.len() });
    }
    Ok(ReadoutDistribution { probs: m.matvec(&p.probs), quasi: p.quasi })
}

/// Solve A·p0 = p_noisy. The result can carry small negative entries and is
/// tagged quasi; the estimated 1-norm condition number is returned with it.
pub fn invert(
    a: &AssignmentMatrix,
    p_noisy: &ReadoutDistribution,
) -> Result<(ReadoutDistribution, f64)> {
    let m = a.full_matrix()?;
    if p_noisy.probs.len() != m.rows() {
        return Err(Error::DimensionMismatch { expected: m.rows(), got: p_noisy.probs.len() });
    }
    let lu = Lu::factor(&m)?;
    let cond = lu.condition_estimate(m.norm_1());
    let probs = lu.solve(&p_noisy.probs);
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidArgument(format!(
            "inverted distribution sums to {total}"
        )));
    }
    let quasi = probs.iter().any(|p| *p < 0.0);
    Ok((ReadoutDistribution { probs, quasi }, cond))
}

/// Ideal expectation O⃗ᵀ A⁻¹ p_noisy, via one transposed solve per spectrum
/// (never an explicit inverse).
pub fn mitigated_expectation(
    a: &AssignmentMatrix,
    spectrum: &[f64],
    p_noisy: &ReadoutDistribution,
) -> Result<f64> {
    let m = a.full_matrix()?;
    if spectrum.len() != m.rows() || p_noisy.probs.len() != m.rows() {
        return Err(Error::DimensionMismatch { expected: m.rows(), got: spectrum.len() });
    }
    let lu = Lu::factor(&m)?;
    // O⃗ᵀ A⁻¹ p = (A⁻ᵀ O⃗)ᵀ p.
    let weights = lu.solve_transposed(spectrum);
    Ok(weights.iter().zip(&p_noisy.probs).map(|(w, p)| w * p).sum())
}

/// Per-outcome weights (A⁻ᵀ O⃗) of the mitigated estimator; entry x is the
/// value a single shot on outcome x contributes.
pub fn mitigation_weights(a: &AssignmentMatrix, spectrum: &[f64]) -> Result<Vec<f64>> {
    let m = a.full_matrix()?;
    let lu = Lu::factor(&m)?;
    Ok(lu.solve_transposed(spectrum))
}

/// Iterative Bayesian unfolding: p ← p ⊙ Aᵀ(p_noisy ⊘ A p), initialized
/// uniform. Stops after `iterations` or when the L1 change drops below
/// 1e−10, whichever comes first (a convention, not paper-derived). Iterates
/// stay on the probability simplex.
pub fn ibu(
    a: &AssignmentMatrix,
    p_noisy: &ReadoutDistribution,
    iterations: usize,
) -> Result<ReadoutDistribution> {
    if p_noisy.probs.iter().any(|p| *p < 0.0) {
        return Err(Error::InvalidArgument(String::from("IBU needs nonnegative input")));
    }
    let m = a.full_matrix()?;
    let dim = m.rows();
    let mut p = vec![1.0 / dim as f64; dim];
    for _ in 0..iterations {
        let ap = m.matvec(&p);
        let ratio: Vec<f64> = p_noisy
            .probs
            .iter()
            .zip(&ap)
            .map(|(pn, d)| pn / d.max(1e-15))
            .collect();
        let back = m.transpose().matvec(&ratio);
        let mut next: Vec<f64> = p.iter().zip(&back).map(|(pi, b)| pi * b).collect();
        // Guard rounding drift off the simplex.
        let total: f64 = next.iter().sum();
        if total > 0.0 {
            for v in next.iter_mut() {
                *v /= total;
            }
        }
        let delta: f64 = next.iter().zip(&p).map(|(a, b)| (a - b).abs()).sum();
        p = next;
        if delta < 1e-10 {
            break;
        }
    }
    Ok(ReadoutDistribution { probs: p, quasi: false })
}

/// Twirl a measurement channel by random bit flips: (1/2^N) Σ_v X^v Λ X^v
/// over v ∈ {I, X}^⊗N. This diagonalizes the channel's action in the
/// Z-string basis.
pub fn bitflip_twirl(meas_channel: &Channel, n_qubits: usize) -> Result<Channel> {
    let dim = 1usize << n_qubits;
    let mut kraus: Vec<crate::matrix::CMatrix> = Vec::new();
    let weight = 1.0 / (dim as f64);
    for v in 0..dim {
        // X^v as a Pauli matrix on the support.
        let mut xs = PauliString::identity(n_qubits);
        for q in 0..n_qubits {
            if (v >> (n_qubits - 1 - q)) & 1 == 1 {
                xs = xs.mul(&PauliString::single(n_qubits, q, 'X')?)?;
            }
        }
        let xm = xs.matrix();
        // Conjugated channel in Kraus form: √w · X^v K X^v.
        match meas_channel {
            Channel::Pauli { probs, .. } => {
                for (p, q) in probs {
                    if *q == 0.0 {
                        continue;
                    }
                    let km = p.matrix().scale(num_complex::Complex64::new(
                        (q * weight).sqrt(),
                        0.0,
                    ));
                    kraus.push(xm.mul(&km).mul(&xm));
                }
            }
            Channel::Kraus { ops, .. } => {
                for k in ops {
                    let km = k.scale(num_complex::Complex64::new(weight.sqrt(), 0.0));
                    kraus.push(xm.mul(&km).mul(&xm));
                }
            }
        }
    }
    Channel::from_kraus(n_qubits, kraus)
}

/// Rescaling factor D_x = ⟨⟨Z^x| Λ |Z^x⟩⟩ = Tr[Z^x Λ(Z^x)]/2^N for the
/// Z-string with support mask `z_string`.
pub fn z_factor(meas_channel: &Channel, z_string: &PauliString) -> Result<f64> {
    if z_string.x_mask() != 0 {
        return Err(Error::InvalidArgument(String::from("not a Z-type string")));
    }
    let zm = z_string.matrix();
    let out = meas_channel.apply_to_operator(&zm)?;
    let val = zm.mul(&out).trace() / (1u64 << z_string.n_qubits()) as f64;
    Ok(val.re)
}

/// Recover ideal expectations from twirled-noisy ones: ideal = D_x⁻¹·noisy.
/// Factors with |D| < 1e−6 are unrecoverable.
pub fn twirled_rescale(factors: &[f64], noisy_values: &[f64]) -> Result<Vec<f64>> {
    if factors.len() != noisy_values.len() {
        return Err(Error::DimensionMismatch {
            expected: factors.len(),
            got: noisy_values.len(),
        });
    }
    factors
        .iter()
        .zip(noisy_values)
        .map(|(d, v)| {
            if d.abs() < 1e-6 {
                Err(Error::Singular(format!("rescale factor {d:e} below threshold")))
            } else {
                Ok(v / d)
            }
        })
        .collect()
}
