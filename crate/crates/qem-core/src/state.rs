//! Exact density-matrix states.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::hermitian_eigen;
use crate::matrix::{CMatrix, C_ONE};
use crate::pauli::Observable;
use crate::rng::RngStream;

/// Hard cap on dense simulation size (2^12 × 2^12 complex doubles).
pub const MAX_QUBITS: usize = 12;

const TRACE_TOL: f64 = 1e-12;
const HERM_TOL: f64 = 1e-12;
const EIG_FLOOR: f64 = -1e-10;

/// An exact 2^N × 2^N density matrix.
///
/// Values are immutable from the caller's point of view: every operation
/// returns a new state. Internally the evolution routines mutate scratch
/// copies to avoid churn.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    mat: CMatrix,
}

impl DensityMatrix {
    /// |0…0⟩⟨0…0|.
    pub fn zero_state(n_qubits: usize) -> Result<Self> {
        Self::basis_state(n_qubits, 0)
    }

    /// |b⟩⟨b| for a computational basis index `b`.
    pub fn basis_state(n_qubits: usize, b: usize) -> Result<Self> {
        check_qubits(n_qubits)?;
        let dim = 1usize << n_qubits;
        if b >= dim {
            return Err(Error::InvalidArgument(format!("basis index {b} out of range")));
        }
        let mut mat = CMatrix::zeros(dim, dim);
        mat[(b, b)] = C_ONE;
        Ok(DensityMatrix { n_qubits, mat })
    }

    /// I/2^N.
    pub fn maximally_mixed(n_qubits: usize) -> Result<Self> {
        check_qubits(n_qubits)?;
        let dim = 1usize << n_qubits;
        let mut mat = CMatrix::zeros(dim, dim);
        let w = Complex64::new(1.0 / dim as f64, 0.0);
        for i in 0..dim {
            mat[(i, i)] = w;
        }
        Ok(DensityMatrix { n_qubits, mat })
    }

    /// |ψ⟩⟨ψ| from an amplitude vector (normalized by the caller).
    pub fn from_statevector(amps: &[Complex64]) -> Result<Self> {
        let dim = amps.len();
        if !dim.is_power_of_two() || dim == 0 {
            return Err(Error::InvalidArgument(format!("bad statevector length {dim}")));
        }
        let n_qubits = dim.trailing_zeros() as usize;
        check_qubits(n_qubits)?;
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidState(format!("statevector norm² = {norm}")));
        }
        let mut mat = CMatrix::zeros(dim, dim);
        for i in 0..dim {
            for j in 0..dim {
                mat[(i, j)] = amps[i] * amps[j].conj();
            }
        }
        Ok(DensityMatrix { n_qubits, mat })
    }

    /// Wrap a raw matrix, enforcing the state invariants
    /// (Hermitian, unit trace, eigenvalues ≥ −1e−10).
    pub fn from_matrix(mat: CMatrix) -> Result<Self> {
        if !mat.is_square() || !mat.rows().is_power_of_two() {
            return Err(Error::InvalidState(format!("bad dimension {}", mat.rows())));
        }
        let n_qubits = mat.rows().trailing_zeros() as usize;
        check_qubits(n_qubits)?;
        let dm = DensityMatrix { n_qubits, mat };
        dm.validate()?;
        Ok(dm)
    }

    /// As `from_matrix` but skipping the eigenvalue check (used on hot paths
    /// where positivity is preserved by construction).
    pub(crate) fn from_matrix_unchecked(n_qubits: usize, mat: CMatrix) -> Self {
        DensityMatrix { n_qubits, mat }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1usize << self.n_qubits
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn trace(&self) -> Complex64 {
        self.mat.trace()
    }

    /// Tr[ρ²]; equals Σ|ρ_ij|² for Hermitian ρ.
    pub fn purity(&self) -> f64 {
        self.mat.data().iter().map(|z| z.norm_sqr()).sum()
    }

    /// Check the full type invariants: Hermitian and unit trace to 1e−12,
    /// eigenvalues above −1e−10.
    pub fn validate(&self) -> Result<()> {
        let herm = self.mat.hermitian_residual();
        if herm > HERM_TOL {
            return Err(Error::NotHermitian { residual: herm });
        }
        let tr = self.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace = {tr}")));
        }
        let eig = hermitian_eigen(&self.mat, 1e-13)?;
        if let Some(min) = eig.values.first() {
            if *min < EIG_FLOOR {
                return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
            }
        }
        Ok(())
    }

    /// Cheap per-step invariant check (trace and Hermiticity only).
    pub fn check_trace_hermitian(&self) -> Result<()> {
        let herm = self.mat.hermitian_residual();
        if herm > HERM_TOL {
            return Err(Error::NotHermitian { residual: herm });
        }
        let tr = self.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace = {tr}")));
        }
        Ok(())
    }

    /// Eigenvalues ascending (clipped at −1e−10 by the caller if needed).
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(hermitian_eigen(&self.mat, 1e-13)?.values)
    }

    /// Spectral decomposition with eigenvalues sorted descending and clipped
    /// below at −1e−10; used by purification diagnostics.
    pub fn spectrum(&self) -> Result<(Vec<f64>, CMatrix)> {
        let eig = hermitian_eigen(&self.mat, 1e-13)?;
        let n = eig.values.len();
        let mut values: Vec<f64> = eig.values.iter().rev().map(|v| v.max(-1e-10)).collect();
        let mut vectors = CMatrix::zeros(n, n);
        for col in 0..n {
            for row in 0..n {
                vectors[(row, col)] = eig.vectors[(row, n - 1 - col)];
            }
        }
        // Guard against -0.0 noise.
        for v in values.iter_mut() {
            if *v == 0.0 {
                *v = 0.0;
            }
        }
        Ok((values, vectors))
    }

    /// Tr[Oρ]; errors if the imaginary residue exceeds 1e−10.
    pub fn expectation(&self, obs: &Observable) -> Result<f64> {
        if obs.n_qubits() != self.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.n_qubits,
                got: obs.n_qubits(),
            });
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for (c, p) in obs.terms() {
            acc += c * p.trace_with(&self.mat);
        }
        if acc.im.abs() > 1e-10 {
            return Err(Error::InvalidArgument(format!(
                "expectation has imaginary residue {:e}",
                acc.im
            )));
        }
        Ok(acc.re)
    }

    /// Overlap Tr[ρ_pure ρ] with a pure reference; this is the fidelity
    /// convention used throughout (F = ⟨ψ|ρ|ψ⟩).
    pub fn overlap(&self, other: &DensityMatrix) -> Result<f64> {
        if other.n_qubits != self.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.n_qubits,
                got: other.n_qubits,
            });
        }
        // Tr[AB] for Hermitian A, B.
        let dim = self.dim();
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..dim {
            for j in 0..dim {
                acc += self.mat[(i, j)] * other.mat[(j, i)];
            }
        }
        Ok(acc.re)
    }

    /// Convex mixture `(1−w)·self + w·other`.
    pub fn mix_with(&self, other: &DensityMatrix, w: f64) -> Result<Self> {
        if other.n_qubits != self.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.n_qubits,
                got: other.n_qubits,
            });
        }
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::InvalidProbability(w));
        }
        let mut mat = self.mat.scale(Complex64::new(1.0 - w, 0.0));
        mat.add_scaled(w, &other.mat);
        Ok(DensityMatrix {
            n_qubits: self.n_qubits,
            mat,
        })
    }

    /// ρ → U ρ U† with `u` acting on `targets` (targets[0] is the gate's
    /// most significant qubit).
    pub fn apply_unitary(&self, u: &CMatrix, targets: &[usize]) -> Result<Self> {
        let mut out = self.clone();
        out.apply_unitary_in_place(u, targets)?;
        Ok(out)
    }

    pub(crate) fn apply_unitary_in_place(&mut self, u: &CMatrix, targets: &[usize]) -> Result<()> {
        let k = targets.len();
        let gd = 1usize << k;
        if u.rows() != gd || u.cols() != gd {
            return Err(Error::DimensionMismatch {
                expected: gd,
                got: u.rows(),
            });
        }
        for (i, t) in targets.iter().enumerate() {
            if *t >= self.n_qubits {
                return Err(Error::InvalidArgument(format!("target {t} out of range")));
            }
            if targets[..i].contains(t) {
                return Err(Error::InvalidArgument(format!("duplicate target {t}")));
            }
        }

        let n = self.n_qubits;
        let dim = 1usize << n;
        // Index-space bit for each gate qubit (gate qubit 0 = msb of gate idx).
        let bits: Vec<usize> = targets.iter().map(|t| 1usize << (n - 1 - t)).collect();
        let gate_mask: usize = bits.iter().sum();
        let offsets: Vec<usize> = (0..gd)
            .map(|g| {
                let mut off = 0usize;
                for (j, bit) in bits.iter().enumerate() {
                    if g >> (k - 1 - j) & 1 == 1 {
                        off |= bit;
                    }
                }
                off
            })
            .collect();

        let mut gather = vec![Complex64::new(0.0, 0.0); gd];

        // Left multiply: rows.
        for base in 0..dim {
            if base & gate_mask != 0 {
                continue;
            }
            for col in 0..dim {
                for (g, off) in offsets.iter().enumerate() {
                    gather[g] = self.mat[(base | off, col)];
                }
                for (r, off) in offsets.iter().enumerate() {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (c, gv) in gather.iter().enumerate() {
                        acc += u[(r, c)] * gv;
                    }
                    self.mat[(base | off, col)] = acc;
                }
            }
        }
        // Right multiply by U†: columns.
        for base in 0..dim {
            if base & gate_mask != 0 {
                continue;
            }
            for row in 0..dim {
                for (g, off) in offsets.iter().enumerate() {
                    gather[g] = self.mat[(row, base | off)];
                }
                for (cidx, off) in offsets.iter().enumerate() {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (r, gv) in gather.iter().enumerate() {
                        // (ρ U†)_{·,c} = Σ_r ρ_{·,r} conj(U_{c,r})
                        acc += gv * u[(cidx, r)].conj();
                    }
                    self.mat[(row, base | off)] = acc;
                }
            }
        }
        Ok(())
    }

    /// Probabilities of computational basis outcomes (the diagonal).
    pub fn z_diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.mat[(i, i)].re.max(0.0)).collect()
    }

    /// Sample a computational basis outcome index.
    pub fn sample_basis_index(&self, rng: &mut RngStream) -> usize {
        let probs = self.z_diagonal();
        sample_index(&probs, rng)
    }
}

pub(crate) fn sample_index(probs: &[f64], rng: &mut RngStream) -> usize {
    let total: f64 = probs.iter().sum();
    let mut u = rng.next_f64() * total;
    for (i, p) in probs.iter().enumerate() {
        u -= p;
        if u <= 0.0 {
            return i;
        }
    }
    probs.len() - 1
}

fn check_qubits(n: usize) -> Result<()> {
    if n == 0 || n > MAX_QUBITS {
        return Err(Error::TooManyQubits { n, cap: MAX_QUBITS });
    }
    Ok(())
}

/// One projective shot of a single-Pauli observable under the Born rule.
///
/// The returned value is `coeff × (±1)` (or `coeff` itself for the identity
/// term), so its expectation over shots is Tr[Oρ].
pub fn sample_shot(state: &DensityMatrix, obs: &Observable, rng: &mut RngStream) -> Result<f64> {
    if !obs.is_single_pauli() {
        return Err(Error::CompositeObservable);
    }
    let (coeff, pauli) = &obs.terms()[0];
    if pauli.is_identity() {
        return Ok(*coeff);
    }
    let mean = state.expectation(obs)? / coeff;
    let p_plus = ((1.0 + mean) / 2.0).clamp(0.0, 1.0);
    let eigen = if rng.next_f64() < p_plus { 1.0 } else { -1.0 };
    Ok(coeff * eigen)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::C_ZERO;
    use crate::pauli::PauliString;

    pub(crate) fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn h_gate() -> CMatrix {
        let s = 1.0 / 2.0f64.sqrt();
        CMatrix::from_rows(&[&[c(s, 0.0), c(s, 0.0)], &[c(s, 0.0), c(-s, 0.0)]])
    }

    #[test]
    fn zero_state_is_valid() {
        let rho = DensityMatrix::zero_state(2).unwrap();
        rho.validate().unwrap();
        assert!((rho.purity() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn x_flips_zero_to_one() {
        let x = CMatrix::from_rows(&[&[C_ZERO, C_ONE], &[C_ONE, C_ZERO]]);
        let rho = DensityMatrix::zero_state(1).unwrap();
        let out = rho.apply_unitary(&x, &[0]).unwrap();
        assert_eq!(out.matrix()[(1, 1)], C_ONE);
        assert_eq!(out.matrix()[(0, 0)], C_ZERO);
    }

    #[test]
    fn identity_leaves_state() {
        let rho = DensityMatrix::maximally_mixed(2).unwrap();
        let out = rho.apply_unitary(&CMatrix::identity(4), &[0, 1]).unwrap();
        assert!(out.matrix().max_abs_diff(rho.matrix()) < 1e-15);
    }

    #[test]
    fn hadamard_gives_plus_state() {
        // 2×2 arithmetic oracle: H|0⟩⟨0|H = |+⟩⟨+| so ⟨X⟩ = 1.
        let rho = DensityMatrix::zero_state(1).unwrap();
        let out = rho.apply_unitary(&h_gate(), &[0]).unwrap();
        let x = Observable::from_label("X").unwrap();
        assert!((out.expectation(&x).unwrap() - 1.0).abs() < 1e-12);
        out.check_trace_hermitian().unwrap();
    }

    #[test]
    fn bell_state_zz_and_xx() {
        // 4×4 arithmetic oracle for ⟨ZZ⟩ = ⟨XX⟩ = 1 on (|00⟩+|11⟩)/√2.
        let s = 1.0 / 2.0f64.sqrt();
        let bell =
            DensityMatrix::from_statevector(&[c(s, 0.0), C_ZERO, C_ZERO, c(s, 0.0)]).unwrap();
        let zz = Observable::from_label("ZZ").unwrap();
        let xx = Observable::from_label("XX").unwrap();
        assert!((bell.expectation(&zz).unwrap() - 1.0).abs() < 1e-12);
        assert!((bell.expectation(&xx).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn z_on_mixed_state_is_zero() {
        let rho = DensityMatrix::maximally_mixed(1).unwrap();
        let z = Observable::from_label("Z").unwrap();
        assert_eq!(rho.expectation(&z).unwrap(), 0.0);
    }

    #[test]
    fn apply_matches_kron_embedding() {
        // Compare subset application against an explicitly embedded unitary
        // on 3 qubits, for both target orders of a two-qubit gate.
        let cnot = CMatrix::from_rows(&[
            &[C_ONE, C_ZERO, C_ZERO, C_ZERO],
            &[C_ZERO, C_ONE, C_ZERO, C_ZERO],
            &[C_ZERO, C_ZERO, C_ZERO, C_ONE],
            &[C_ZERO, C_ZERO, C_ONE, C_ZERO],
        ]);
        let mut rng = RngStream::from_seed(9);
        // Random product state on 3 qubits.
        let mut amps: Vec<Complex64> = (0..8)
            .map(|_| c(rng.next_f64() - 0.5, rng.next_f64() - 0.5))
            .collect();
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        for a in amps.iter_mut() {
            *a /= norm;
        }
        let rho = DensityMatrix::from_statevector(&amps).unwrap();

        // Targets [0, 2]: embed via permutation-free explicit matrix.
        let full = embed(&cnot, &[0, 2], 3);
        let fast = rho.apply_unitary(&cnot, &[0, 2]).unwrap();
        let slow = DensityMatrix::from_matrix_unchecked(
            3,
            full.mul(rho.matrix()).mul(&full.adjoint()),
        );
        assert!(fast.matrix().max_abs_diff(slow.matrix()) < 1e-12);

        // Reversed order [2, 0].
        let full_r = embed(&cnot, &[2, 0], 3);
        let fast_r = rho.apply_unitary(&cnot, &[2, 0]).unwrap();
        let slow_r = DensityMatrix::from_matrix_unchecked(
            3,
            full_r.mul(rho.matrix()).mul(&full_r.adjoint()),
        );
        assert!(fast_r.matrix().max_abs_diff(slow_r.matrix()) < 1e-12);
    }

    /// Test-only dense embedding of a k-qubit gate into an N-qubit register.
    fn embed(u: &CMatrix, targets: &[usize], n: usize) -> CMatrix {
        let dim = 1usize << n;
        let k = targets.len();
        let mut full = CMatrix::zeros(dim, dim);
        for col in 0..dim {
            for row in 0..dim {
                // Row and column must agree outside the targets.
                let mut same = true;
                for q in 0..n {
                    if targets.contains(&q) {
                        continue;
                    }
                    let b = n - 1 - q;
                    if (row >> b & 1) != (col >> b & 1) {
                        same = false;
                        break;
                    }
                }
                if !same {
                    continue;
                }
                let mut gr = 0usize;
                let mut gc = 0usize;
                for (j, t) in targets.iter().enumerate() {
                    let b = n - 1 - t;
                    gr |= ((row >> b) & 1) << (k - 1 - j);
                    gc |= ((col >> b) & 1) << (k - 1 - j);
                }
                full[(row, col)] = u[(gr, gc)];
            }
        }
        full
    }

    #[test]
    fn shot_sampling_matches_born_rule() {
        // Z on ρ = 0.8|0⟩⟨0| + 0.2|1⟩⟨1| → +1 with probability 0.8.
        let rho = DensityMatrix::zero_state(1)
            .unwrap()
            .mix_with(&DensityMatrix::basis_state(1, 1).unwrap(), 0.2)
            .unwrap();
        let z = Observable::from_label("Z").unwrap();
        let mut plus = 0usize;
        let shots = 100_000;
        for i in 0..shots {
            let mut rng = RngStream::from_parts(11, 0, i);
            if sample_shot(&rho, &z, &mut rng).unwrap() > 0.0 {
                plus += 1;
            }
        }
        let frac = plus as f64 / shots as f64;
        assert!((frac - 0.8).abs() < 0.005, "frac = {frac}");
    }

    #[test]
    fn shot_on_pure_z_eigenstate_is_deterministic() {
        let rho = DensityMatrix::zero_state(1).unwrap();
        let z = Observable::from_label("Z").unwrap();
        let mut rng = RngStream::from_seed(0);
        for _ in 0..100 {
            assert_eq!(sample_shot(&rho, &z, &mut rng).unwrap(), 1.0);
        }
    }

    #[test]
    fn composite_observable_rejected_by_sampler() {
        let rho = DensityMatrix::zero_state(1).unwrap();
        let obs = Observable::new(
            1,
            vec![
                (1.0, PauliString::from_label("Z").unwrap()),
                (0.5, PauliString::from_label("X").unwrap()),
            ],
        )
        .unwrap();
        let mut rng = RngStream::from_seed(0);
        assert!(matches!(
            sample_shot(&rho, &obs, &mut rng),
            Err(Error::CompositeObservable)
        ));
    }
}
