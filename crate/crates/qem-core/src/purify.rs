//! Purification-based mitigation: virtual distillation via matrix powers,
//! the cyclic-shift identity as an independent cross-check, echo
//! verification, and the McWeeny iteration.
//!
//! Virtual distillation is computed algebraically as Tr[Oρ^M]/Tr[ρ^M]; the
//! measurement-circuit realizations are hardware strategies the simulator
//! does not need. The cyclic-shift route Tr[S_M O_1 ρ^{⊗M}] is kept as a
//! small-size oracle because the identity between the two is the content of
//! the method.

use alloc::format;
use alloc::vec::Vec;
use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::hermitian_eigen;
use crate::matrix::CMatrix;
use crate::pauli::Observable;
use crate::state::DensityMatrix;

/// Guard for the 2^{M·N} cyclic-shift construction.
pub const SWAP_CHECK_QUBIT_CAP: usize = 12;

/// Result of a purification estimate.
#[derive(Debug, Clone)]
pub struct PurifiedEstimate {
    pub value: f64,
    /// Purification degree M (2 for echo verification).
    pub degree: usize,
    /// Tr[ρ^M] (or Tr[ρ̄ρ] for echo verification).
    pub trace_rho_m: f64,
    /// Tr[ρ^M]⁻² for virtual distillation (post-processing scaling),
    /// Tr[ρ̄ρ]⁻¹ for echo verification (post-selection scaling).
    pub overhead: f64,
}

/// Tr[Oρ^M] / Tr[ρ^M] by repeated Hermitian matrix multiplication.
pub fn vd_expectation(
    rho: &DensityMatrix,
    obs: &Observable,
    degree: usize,
) -> Result<PurifiedEstimate> {
    if degree < 1 {
        return Err(Error::InvalidArgument(format!("degree {degree} must be ≥ 1")));
    }
    let mut power = rho.matrix().clone();
    for _ in 1..degree {
        power = power.mul(rho.matrix());
    }
    let trace_m = power.trace().re;
    if trace_m <= 1e-14 {
        return Err(Error::InvalidArgument(format!("vanishing Tr[ρ^M] = {trace_m:e}")));
    }
    let numer = obs.matrix().mul(&power).trace();
    if numer.im.abs() > 1e-10 {
        return Err(Error::InvalidArgument(format!(
            "imaginary residue {:e} in Tr[Oρ^M]",
            numer.im
        )));
    }
    Ok(PurifiedEstimate {
        value: numer.re / trace_m,
        degree,
        trace_rho_m: trace_m,
        overhead: 1.0 / (trace_m * trace_m),
    })
}

/// The purified state ρ^M / Tr[ρ^M] itself (for fidelity bookkeeping).
pub fn purified_state(rho: &DensityMatrix, degree: usize) -> Result<DensityMatrix> {
    let mut power = rho.matrix().clone();
    for _ in 1..degree {
        power = power.mul(rho.matrix());
    }
    let trace_m = power.trace().re;
    if trace_m <= 1e-14 {
        return Err(Error::InvalidArgument(format!("vanishing Tr[ρ^M] = {trace_m:e}")));
    }
    Ok(DensityMatrix::from_matrix_unchecked(
        rho.n_qubits(),
        power.scale(Complex64::new(1.0 / trace_m, 0.0)),
    ))
}

/// Independent oracle for `vd_expectation`: Tr[S_M O_1 ρ^{⊗M}], contracted
/// against the explicitly built cyclic-shift permutation on M copies
/// (composed from transversal per-qubit-position shifts). Returns the raw
/// trace, which must equal Tr[Oρ^M].
pub fn vd_swap_check(rho: &DensityMatrix, obs: &Observable, degree: usize) -> Result<f64> {
    let n = rho.n_qubits();
    if degree < 1 {
        return Err(Error::InvalidArgument(format!("degree {degree} must be ≥ 1")));
    }
    if degree * n > SWAP_CHECK_QUBIT_CAP {
        return Err(Error::TooManyQubits { n: degree * n, cap: SWAP_CHECK_QUBIT_CAP });
    }
    let perm = cyclic_shift_permutation(degree, n);
    let d = 1usize << n;
    let big = d.pow(degree as u32);
    let o_mat = obs.matrix();
    let rho_m = rho.matrix();

    // Tr[S X] = Σ_b X[b, σ(b)] with X = O_1 ρ^{⊗M}; the only sum inside is
    // over the first copy's index because O_1 acts there alone.
    let mut acc = Complex64::new(0.0, 0.0);
    for b in 0..big {
        let c = perm[b];
        // Copy-wise decomposition, copy 0 is the most significant block.
        let mut term = Complex64::new(0.0, 0.0);
        let b1 = block(b, 0, degree, n);
        for e1 in 0..d {
            let o = o_mat[(b1, e1)];
            if o == Complex64::new(0.0, 0.0) {
                continue;
            }
            let mut prod = o * rho_m[(e1, block(c, 0, degree, n))];
            for m in 1..degree {
                prod *= rho_m[(block(b, m, degree, n), block(c, m, degree, n))];
            }
            term += prod;
        }
        acc += term;
    }
    if acc.im.abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "imaginary residue {:e} in the shift trace",
            acc.im
        )));
    }
    Ok(acc.re)
}

/// Index of copy `m` inside a composite basis index (copy 0 most
/// significant).
#[inline]
fn block(index: usize, m: usize, copies: usize, n: usize) -> usize {
    (index >> ((copies - 1 - m) * n)) & ((1 << n) - 1)
}

/// The cyclic shift σ on M copies of N qubits, built from transversal
/// per-qubit shifts: bit (copy m, qubit q) of σ(b) is bit (copy m+1, qubit q)
/// of b.
pub fn cyclic_shift_permutation(copies: usize, n: usize) -> Vec<usize> {
    let big = (1usize << n).pow(copies as u32);
    (0..big)
        .map(|b| {
            let mut out = 0usize;
            for q in 0..n {
                for m in 0..copies {
                    let src = (copies - 1 - ((m + 1) % copies)) * n + (n - 1 - q);
                    let dst = (copies - 1 - m) * n + (n - 1 - q);
                    if (b >> src) & 1 == 1 {
                        out |= 1 << dst;
                    }
                }
            }
            out
        })
        .collect()
}

/// Echo verification: Tr[O(ρ̄ρ + ρρ̄)] / (2 Tr[ρ̄ρ]), the degree-2 purified
/// state with a (usually equally noisy, possibly ideal) echo copy ρ̄.
/// Overhead is the post-selection scaling Tr[ρ̄ρ]⁻¹.
pub fn echo_verification(
    rho: &DensityMatrix,
    rho_bar: &DensityMatrix,
    obs: &Observable,
) -> Result<PurifiedEstimate> {
    if rho.n_qubits() != rho_bar.n_qubits() {
        return Err(Error::DimensionMismatch {
            expected: rho.n_qubits(),
            got: rho_bar.n_qubits(),
        });
    }
    let cross = rho_bar.matrix().mul(rho.matrix());
    let overlap = cross.trace().re;
    if overlap <= 1e-14 {
        return Err(Error::InvalidArgument(format!("vanishing Tr[ρ̄ρ] = {overlap:e}")));
    }
    let sym = cross.add(&rho.matrix().mul(rho_bar.matrix()));
    let numer = obs.matrix().mul(&sym).trace();
    if numer.im.abs() > 1e-10 {
        return Err(Error::InvalidArgument(format!(
            "imaginary residue {:e} in the echo numerator",
            numer.im
        )));
    }
    Ok(PurifiedEstimate {
        value: numer.re / (2.0 * overlap),
        degree: 2,
        trace_rho_m: overlap,
        overhead: 1.0 / overlap,
    })
}

/// The echo-verified effective state (ρ̄ρ + ρρ̄) / (2 Tr[ρ̄ρ]).
pub fn echo_state(rho: &DensityMatrix, rho_bar: &DensityMatrix) -> Result<DensityMatrix> {
    let cross = rho_bar.matrix().mul(rho.matrix());
    let overlap = cross.trace().re;
    if overlap <= 1e-14 {
        return Err(Error::InvalidArgument(format!("vanishing Tr[ρ̄ρ] = {overlap:e}")));
    }
    let sym = cross.add(&rho.matrix().mul(rho_bar.matrix()));
    Ok(DensityMatrix::from_matrix_unchecked(
        rho.n_qubits(),
        sym.scale(Complex64::new(0.5 / overlap, 0.0)),
    ))
}

/// McWeeny iteration D ← 3D² − 2D³ until ‖D² − D‖_F < tol. Eigenvalues
/// above ½ flow to 1 and below ½ to 0; a spectrum stuck at ½ is flagged as
/// non-convergent rather than silently accepted.
pub fn mcweeny(d: &CMatrix, tol: f64, max_iter: usize) -> Result<CMatrix> {
    if !d.is_square() {
        return Err(Error::DimensionMismatch { expected: d.rows(), got: d.cols() });
    }
    let herm = d.hermitian_residual();
    if herm > 1e-9 {
        return Err(Error::NotHermitian { residual: herm });
    }
    // Sanity window on the spectrum.
    let eig = hermitian_eigen(d, 1e-13)?;
    let (min, max) = (eig.values[0], *eig.values.last().expect("nonempty"));
    if min < -0.1 || max > 1.1 {
        return Err(Error::InvalidArgument(format!(
            "eigenvalues [{min}, {max}] outside the sanity window [−0.1, 1.1]"
        )));
    }

    let mut cur = d.clone();
    for iter in 0..max_iter {
        let sq = cur.mul(&cur);
        let residual = sq.sub(&cur).frobenius_norm();
        if residual < tol {
            return Ok(cur);
        }
        let cube = sq.mul(&cur);
        let next = sq.scale(Complex64::new(3.0, 0.0)).sub(&cube.scale(Complex64::new(2.0, 0.0)));
        let step = next.max_abs_diff(&cur);
        if step < 1e-15 {
            // Fixed point away from idempotency (eigenvalue at ½).
            return Err(Error::NonConvergent { iterations: iter, residual });
        }
        cur = next;
    }
    let residual = cur.mul(&cur).sub(&cur).frobenius_norm();
    Err(Error::NonConvergent { iterations: max_iter, residual })
}

/// Dominant-eigenvector diagnostics: (p1, p2, ⟨φ1|O|φ1⟩).
pub fn dominant_expectation(rho: &DensityMatrix, obs: &Observable) -> Result<(f64, f64, f64)> {
    let (values, vectors) = rho.spectrum()?;
    let p1 = values[0];
    let p2 = values.get(1).copied().unwrap_or(0.0);
    let dim = rho.dim();
    let o = obs.matrix();
    let mut val = Complex64::new(0.0, 0.0);
    for i in 0..dim {
        for j in 0..dim {
            val += vectors[(i, 0)].conj() * o[(i, j)] * vectors[(j, 0)];
        }
    }
    Ok((p1, p2, val.re))
}
