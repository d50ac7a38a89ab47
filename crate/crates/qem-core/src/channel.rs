//! Quantum channels: stochastic Pauli mixtures and general Kraus maps.
//!
//! The default depolarizing convention is ρ → (1−p)ρ + p·I/2^k on the
//! k-qubit support. In Pauli form that is q_I = 1−p+p/4^k with the remaining
//! weight spread uniformly over the non-identity strings, so the fault
//! probability in the sense of the fault-location convention is
//! p·(4^k−1)/4^k, not p.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::matrix::{CMatrix, RMatrix};
use crate::pauli::PauliString;
use crate::state::DensityMatrix;

/// Completeness tolerance for Kraus sets and probability normalization.
const COMPLETE_TOL: f64 = 1e-10;

/// A CPTP map on a small (1- or 2-qubit, occasionally larger) support.
#[derive(Debug, Clone)]
pub enum Channel {
    /// Stochastic Pauli channel: conjugation by `P` with probability `q`.
    Pauli {
        n_qubits: usize,
        probs: Vec<(PauliString, f64)>,
    },
    /// General Kraus form, Σ K†K = I.
    Kraus { n_qubits: usize, ops: Vec<CMatrix> },
}

impl Channel {
    pub fn identity(n_qubits: usize) -> Self {
        Channel::Pauli {
            n_qubits,
            probs: vec![(PauliString::identity(n_qubits), 1.0)],
        }
    }

    /// ρ → (1−p)ρ + p·I/2^k (see module docs for the convention).
    pub fn depolarizing(n_qubits: usize, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidProbability(p));
        }
        let count = 4usize.pow(n_qubits as u32);
        let mut probs = Vec::with_capacity(count);
        for pauli in pauli_basis(n_qubits) {
            let q = if pauli.is_identity() {
                1.0 - p + p / count as f64
            } else {
                p / count as f64
            };
            probs.push((pauli, q));
        }
        Ok(Channel::Pauli { n_qubits, probs })
    }

    /// Single-qubit dephasing: Z with probability p.
    pub fn dephasing(p: f64) -> Result<Self> {
        Self::pauli_mixture(1, &[("Z", p)])
    }

    /// Single-qubit bit flip: X with probability p.
    pub fn bit_flip(p: f64) -> Result<Self> {
        Self::pauli_mixture(1, &[("X", p)])
    }

    /// Channel applying each listed non-identity Pauli with the given
    /// probability and the identity with the remaining weight.
    pub fn pauli_mixture(n_qubits: usize, errors: &[(&str, f64)]) -> Result<Self> {
        let mut probs = vec![(PauliString::identity(n_qubits), 0.0)];
        let mut total = 0.0;
        for (label, p) in errors {
            if *p < 0.0 {
                return Err(Error::InvalidProbability(*p));
            }
            let pauli = PauliString::from_label(label)?;
            if pauli.n_qubits() != n_qubits {
                return Err(Error::DimensionMismatch {
                    expected: n_qubits,
                    got: pauli.n_qubits(),
                });
            }
            if pauli.is_identity() {
                return Err(Error::InvalidChannel(String::from(
                    "identity listed as an error term",
                )));
            }
            total += p;
            probs.push((pauli, *p));
        }
        if total > 1.0 + COMPLETE_TOL {
            return Err(Error::InvalidProbability(total));
        }
        probs[0].1 = (1.0 - total).max(0.0);
        Ok(Channel::Pauli { n_qubits, probs })
    }

    /// Explicit Pauli probabilities (must sum to 1).
    pub fn from_pauli_probs(n_qubits: usize, probs: Vec<(PauliString, f64)>) -> Result<Self> {
        let ch = Channel::Pauli { n_qubits, probs };
        ch.validate()?;
        Ok(ch)
    }

    /// Unitary error channel ρ → UρU†.
    pub fn unitary(u: CMatrix) -> Result<Self> {
        if !u.is_square() || !u.rows().is_power_of_two() || u.rows() < 2 {
            return Err(Error::InvalidChannel(format!("bad unitary dimension {}", u.rows())));
        }
        if !u.is_unitary(1e-10) {
            return Err(Error::InvalidChannel(String::from("matrix is not unitary")));
        }
        let n_qubits = u.rows().trailing_zeros() as usize;
        Ok(Channel::Kraus { n_qubits, ops: vec![u] })
    }

    /// Coherent Z over-rotation: U = diag(e^{−iθ}, e^{iθ}).
    pub fn coherent_z(theta: f64) -> Self {
        let u = CMatrix::from_rows(&[
            &[Complex64::new(theta.cos(), -theta.sin()), Complex64::new(0.0, 0.0)],
            &[Complex64::new(0.0, 0.0), Complex64::new(theta.cos(), theta.sin())],
        ]);
        Channel::Kraus { n_qubits: 1, ops: vec![u] }
    }

    pub fn from_kraus(n_qubits: usize, ops: Vec<CMatrix>) -> Result<Self> {
        let ch = Channel::Kraus { n_qubits, ops };
        ch.validate()?;
        Ok(ch)
    }

    pub fn n_qubits(&self) -> usize {
        match self {
            Channel::Pauli { n_qubits, .. } | Channel::Kraus { n_qubits, .. } => *n_qubits,
        }
    }

    pub fn is_pauli(&self) -> bool {
        matches!(self, Channel::Pauli { .. })
    }

    pub fn pauli_probs(&self) -> Option<&[(PauliString, f64)]> {
        match self {
            Channel::Pauli { probs, .. } => Some(probs),
            Channel::Kraus { .. } => None,
        }
    }

    /// Completeness: probabilities on the simplex, or Σ K†K = I to 1e−10.
    pub fn validate(&self) -> Result<()> {
        match self {
            Channel::Pauli { n_qubits, probs } => {
                let mut total = 0.0;
                for (p, q) in probs {
                    if p.n_qubits() != *n_qubits {
                        return Err(Error::DimensionMismatch {
                            expected: *n_qubits,
                            got: p.n_qubits(),
                        });
                    }
                    if *q < -COMPLETE_TOL {
                        return Err(Error::InvalidProbability(*q));
                    }
                    total += q;
                }
                if (total - 1.0).abs() > COMPLETE_TOL {
                    return Err(Error::InvalidChannel(format!(
                        "Pauli probabilities sum to {total}"
                    )));
                }
                Ok(())
            }
            Channel::Kraus { n_qubits, ops } => {
                let dim = 1usize << n_qubits;
                let mut acc = CMatrix::zeros(dim, dim);
                for k in ops {
                    if k.rows() != dim || k.cols() != dim {
                        return Err(Error::DimensionMismatch { expected: dim, got: k.rows() });
                    }
                    acc = acc.add(&k.adjoint().mul(k));
                }
                let res = acc.max_abs_diff(&CMatrix::identity(dim));
                if res > COMPLETE_TOL {
                    return Err(Error::InvalidChannel(format!(
                        "Kraus completeness residual {res:e}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Probability weight of the identity component (Pauli form only).
    pub fn identity_weight(&self) -> Option<f64> {
        self.pauli_probs().map(|probs| {
            probs
                .iter()
                .filter(|(p, _)| p.is_identity())
                .map(|(_, q)| *q)
                .sum()
        })
    }

    /// Split a Pauli channel into (p_f, normalized error part) at its
    /// maximal identity coefficient, the fault-location convention.
    pub fn split_fault(&self) -> Result<(f64, Channel)> {
        let probs = self.pauli_probs().ok_or_else(|| {
            Error::InvalidChannel(String::from(
                "fault split requires a Pauli channel; twirl first",
            ))
        })?;
        let q_id: f64 = probs
            .iter()
            .filter(|(p, _)| p.is_identity())
            .map(|(_, q)| *q)
            .sum();
        let p_f = (1.0 - q_id).clamp(0.0, 1.0);
        if p_f <= 0.0 {
            return Ok((0.0, Channel::identity(self.n_qubits())));
        }
        let error: Vec<(PauliString, f64)> = probs
            .iter()
            .filter(|(p, q)| !p.is_identity() && *q > 0.0)
            .map(|(p, q)| (*p, q / p_f))
            .collect();
        Ok((
            p_f,
            Channel::Pauli { n_qubits: self.n_qubits(), probs: error },
        ))
    }

    /// Apply the channel to `targets` of a state: ρ → Σ K ρ K†.
    pub fn apply_to(&self, state: &DensityMatrix, targets: &[usize]) -> Result<DensityMatrix> {
        if targets.len() != self.n_qubits() {
            return Err(Error::DimensionMismatch {
                expected: self.n_qubits(),
                got: targets.len(),
            });
        }
        match self {
            Channel::Pauli { probs, .. } => {
                let dim = state.dim();
                let mut acc = CMatrix::zeros(dim, dim);
                for (p, q) in probs {
                    if *q == 0.0 {
                        continue;
                    }
                    if p.is_identity() {
                        acc.add_scaled(*q, state.matrix());
                    } else {
                        let branch = state.apply_unitary(&p.matrix(), targets)?;
                        acc.add_scaled(*q, branch.matrix());
                    }
                }
                Ok(DensityMatrix::from_matrix_unchecked(state.n_qubits(), acc))
            }
            Channel::Kraus { ops, .. } => {
                let dim = state.dim();
                let mut acc = CMatrix::zeros(dim, dim);
                for k in ops {
                    let branch = state.apply_unitary(k, targets)?;
                    acc.add_scaled(1.0, branch.matrix());
                }
                Ok(DensityMatrix::from_matrix_unchecked(state.n_qubits(), acc))
            }
        }
    }

    /// Pauli transfer matrix R_ij = Tr[P_i Λ(P_j)] / 2^k over the canonical
    /// Pauli basis of the support.
    pub fn transfer_matrix(&self) -> Result<RMatrix> {
        let k = self.n_qubits();
        let basis = pauli_basis(k);
        let dim = 1usize << k;
        let count = basis.len();
        let mut r = RMatrix::zeros(count, count);
        for (j, pj) in basis.iter().enumerate() {
            // Λ(P_j) as a dense matrix, built by linearity from the channel.
            let pj_mat = pj.matrix();
            let out = self.apply_to_operator(&pj_mat)?;
            for (i, pi) in basis.iter().enumerate() {
                let val = pi.matrix().mul(&out).trace() / dim as f64;
                if val.im.abs() > 1e-9 {
                    return Err(Error::InvalidChannel(format!(
                        "transfer entry ({i},{j}) has imaginary part {:e}",
                        val.im
                    )));
                }
                r[(i, j)] = val.re;
            }
        }
        Ok(r)
    }

    /// Apply the channel map to an arbitrary operator on its own support
    /// (not necessarily a state); used for transfer-matrix construction.
    pub(crate) fn apply_to_operator(&self, op: &CMatrix) -> Result<CMatrix> {
        match self {
            Channel::Pauli { probs, .. } => {
                let mut acc = CMatrix::zeros(op.rows(), op.cols());
                for (p, q) in probs {
                    if *q == 0.0 {
                        continue;
                    }
                    let pm = p.matrix();
                    let conj = pm.mul(op).mul(&pm.adjoint());
                    acc.add_scaled(*q, &conj);
                }
                Ok(acc)
            }
            Channel::Kraus { ops, .. } => {
                let mut acc = CMatrix::zeros(op.rows(), op.cols());
                for k in ops {
                    acc.add_scaled(1.0, &k.mul(op).mul(&k.adjoint()));
                }
                Ok(acc)
            }
        }
    }

    /// Twirl over the Pauli group of the support: keeps the diagonal of the
    /// Pauli transfer matrix and yields a stochastic Pauli channel.
    /// Idempotent; guarded to 2-qubit supports.
    pub fn pauli_twirl(&self) -> Result<Channel> {
        let k = self.n_qubits();
        if k > 2 {
            return Err(Error::TooManyQubits { n: k, cap: 2 });
        }
        let basis = pauli_basis(k);
        let r = self.transfer_matrix()?;
        let count = basis.len();
        // Pauli fidelities are the transfer diagonal; invert the
        // Walsh–Hadamard-type relation f_b = Σ_k q_k χ(k,b).
        let mut probs = Vec::with_capacity(count);
        for (ki, kp) in basis.iter().enumerate() {
            let mut q = 0.0;
            for (bi, bp) in basis.iter().enumerate() {
                let chi = if kp.commutes_with(bp) { 1.0 } else { -1.0 };
                q += chi * r[(bi, bi)];
            }
            q /= count as f64;
            if q < -1e-9 {
                return Err(Error::InvalidChannel(format!(
                    "twirl produced negative probability {q:e}"
                )));
            }
            probs.push((basis[ki], q.max(0.0)));
        }
        let ch = Channel::Pauli { n_qubits: k, probs };
        ch.validate()?;
        Ok(ch)
    }
}

/// Canonical Pauli basis of a k-qubit support: index digits (I, X, Y, Z)
/// with qubit 0 as the most significant digit.
pub fn pauli_basis(k: usize) -> Vec<PauliString> {
    let count = 4usize.pow(k as u32);
    let mut out = Vec::with_capacity(count);
    for t in 0..count {
        let mut p = PauliString::identity(k);
        for q in 0..k {
            let digit = t >> (2 * (k - 1 - q)) & 3;
            let ch = ['I', 'X', 'Y', 'Z'][digit];
            p = p.mul(&PauliString::single(k, q, ch).expect("valid")).expect("same width");
        }
        out.push(p);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::Observable;

    #[test]
    fn depolarizing_zero_is_identity() {
        let ch = Channel::depolarizing(1, 0.0).unwrap();
        let rho = DensityMatrix::zero_state(1).unwrap();
        let out = ch.apply_to(&rho, &[0]).unwrap();
        assert!(out.matrix().max_abs_diff(rho.matrix()) < 1e-15);
    }

    #[test]
    fn depolarizing_convention_gives_one_minus_p() {
        // ⟨Z⟩ = 1−p on |0⟩⟨0| under ρ → (1−p)ρ + p·I/2.
        let p = 0.3;
        let ch = Channel::depolarizing(1, p).unwrap();
        let rho = DensityMatrix::zero_state(1).unwrap();
        let out = ch.apply_to(&rho, &[0]).unwrap();
        let z = Observable::from_label("Z").unwrap();
        assert!((out.expectation(&z).unwrap() - (1.0 - p)).abs() < 1e-12);
        out.check_trace_hermitian().unwrap();
    }

    #[test]
    fn dephasing_half_kills_coherence() {
        // Kraus-sum oracle: ⟨X⟩ = 1−2p on |+⟩⟨+|, zero at p = 1/2.
        let s = 1.0 / 2.0f64.sqrt();
        let plus = DensityMatrix::from_statevector(&[
            Complex64::new(s, 0.0),
            Complex64::new(s, 0.0),
        ])
        .unwrap();
        let ch = Channel::dephasing(0.5).unwrap();
        let out = ch.apply_to(&plus, &[0]).unwrap();
        let x = Observable::from_label("X").unwrap();
        assert!(out.expectation(&x).unwrap().abs() < 1e-12);
    }

    #[test]
    fn kraus_completeness_enforced() {
        let bad = Channel::from_kraus(
            1,
            vec![CMatrix::identity(2).scale(Complex64::new(0.9, 0.0))],
        );
        assert!(matches!(bad, Err(Error::InvalidChannel(_))));
    }

    #[test]
    fn twirl_of_depolarizing_is_itself() {
        let ch = Channel::depolarizing(1, 0.2).unwrap();
        let tw = ch.pauli_twirl().unwrap();
        let before = ch.transfer_matrix().unwrap();
        let after = tw.transfer_matrix().unwrap();
        assert!(before.max_abs_diff(&after) < 1e-12);
    }

    #[test]
    fn twirl_of_identity_is_identity() {
        let ch = Channel::identity(1);
        let tw = ch.pauli_twirl().unwrap();
        assert!((tw.identity_weight().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn twirl_of_coherent_z_is_dephasing() {
        // Brute-force oracle: average the four conjugated transfer matrices
        // and compare, then check the closed form q_Z = sin²θ.
        let theta = 0.37;
        let ch = Channel::coherent_z(theta);
        let tw = ch.pauli_twirl().unwrap();

        let basis = pauli_basis(1);
        let r = ch.transfer_matrix().unwrap();
        let mut avg = RMatrix::zeros(4, 4);
        for p in &basis {
            // Transfer of the conjugation map of P is diagonal ±1.
            let mut rp = RMatrix::zeros(4, 4);
            for (i, b) in basis.iter().enumerate() {
                rp[(i, i)] = if p.commutes_with(b) { 1.0 } else { -1.0 };
            }
            let conj = rp.mul(&r).mul(&rp);
            for i in 0..4 {
                for j in 0..4 {
                    avg[(i, j)] += conj[(i, j)] / 4.0;
                }
            }
        }
        let tw_r = tw.transfer_matrix().unwrap();
        assert!(tw_r.max_abs_diff(&avg) < 1e-10);

        let qz: f64 = tw
            .pauli_probs()
            .unwrap()
            .iter()
            .find(|(p, _)| p.to_label() == "Z")
            .map(|(_, q)| *q)
            .unwrap();
        assert!((qz - theta.sin().powi(2)).abs() < 1e-12);

        // Off-diagonal transfer entries vanish after the twirl.
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    assert!(tw_r[(i, j)].abs() < 1e-10);
                }
            }
        }

        // Idempotence.
        let tw2 = tw.pauli_twirl().unwrap();
        assert!(tw2.transfer_matrix().unwrap().max_abs_diff(&tw_r) < 1e-12);
    }

    #[test]
    fn twirl_guard_rejects_large_support() {
        let ch = Channel::identity(3);
        assert!(matches!(ch.pauli_twirl(), Err(Error::TooManyQubits { .. })));
    }

    #[test]
    fn split_fault_depolarizing() {
        // Depolarizing-(I/2) p has identity weight 1−3p/4.
        let p = 0.2;
        let ch = Channel::depolarizing(1, p).unwrap();
        let (p_f, err) = ch.split_fault().unwrap();
        assert!((p_f - 0.75 * p).abs() < 1e-12);
        // Error part is the uniform X/Y/Z mixture.
        let probs = err.pauli_probs().unwrap();
        assert_eq!(probs.len(), 3);
        for (_, q) in probs {
            assert!((q - 1.0 / 3.0).abs() < 1e-12);
        }
    }
}
