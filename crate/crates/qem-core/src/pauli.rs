//! Pauli strings and Pauli-sum observables.
//!
//! A `PauliString` is stored as `i^k · X^x Z^z` with per-qubit X/Z bit masks
//! and a power-of-i phase, which makes products, commutation checks and
//! traces against density matrices cheap bit arithmetic. Qubit 0 is the
//! leftmost character of a label like `"XYZ"` and the most significant bit
//! of a computational basis index.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matrix::{CMatrix, C_ONE, C_ZERO};

/// Reverse the low `n` bits of `mask` (qubit-indexed mask → index-bit mask).
fn reverse_bits(mask: u64, n: usize) -> u64 {
    let mut out = 0u64;
    for q in 0..n {
        if mask >> q & 1 == 1 {
            out |= 1 << (n - 1 - q);
        }
    }
    out
}

/// A Pauli operator on `n_qubits` qubits with an explicit phase in
/// {+1, +i, −1, −i}.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PauliString {
    n_qubits: usize,
    x_mask: u64,
    z_mask: u64,
    /// Power of i, modulo 4.
    phase_pow: u8,
}

impl PauliString {
    pub fn identity(n_qubits: usize) -> Self {
        PauliString {
            n_qubits,
            x_mask: 0,
            z_mask: 0,
            phase_pow: 0,
        }
    }

    /// Single-qubit Pauli embedded on qubit `q`.
    pub fn single(n_qubits: usize, q: usize, which: char) -> Result<Self> {
        if q >= n_qubits {
            return Err(Error::InvalidArgument(format!("qubit {q} out of range")));
        }
        let bit = 1u64 << q;
        let (x, z, k) = match which {
            'I' => (0, 0, 0),
            'X' => (bit, 0, 0),
            'Y' => (bit, bit, 1),
            'Z' => (0, bit, 0),
            other => {
                return Err(Error::InvalidArgument(format!("unknown Pauli '{other}'")));
            }
        };
        Ok(PauliString {
            n_qubits,
            x_mask: x,
            z_mask: z,
            phase_pow: k,
        })
    }

    /// Parse a label like `"XYZI"`; leftmost character acts on qubit 0.
    pub fn from_label(label: &str) -> Result<Self> {
        let n = label.chars().count();
        if n == 0 || n > 64 {
            return Err(Error::InvalidArgument(format!("bad Pauli label '{label}'")));
        }
        let mut p = PauliString::identity(n);
        for (q, ch) in label.chars().enumerate() {
            let factor = PauliString::single(n, q, ch)?;
            p = p.mul(&factor)?;
        }
        Ok(p)
    }

    pub fn to_label(&self) -> String {
        let mut s = String::new();
        let mut y_count = 0u8;
        for q in 0..self.n_qubits {
            let x = self.x_mask >> q & 1 == 1;
            let z = self.z_mask >> q & 1 == 1;
            s.push(match (x, z) {
                (false, false) => 'I',
                (true, false) => 'X',
                (false, true) => 'Z',
                (true, true) => {
                    y_count = y_count.wrapping_add(1);
                    'Y'
                }
            });
        }
        let residual = (self.phase_pow + 4 - (y_count % 4)) % 4;
        match residual {
            0 => s,
            1 => format!("i*{s}"),
            2 => format!("-{s}"),
            _ => format!("-i*{s}"),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn x_mask(&self) -> u64 {
        self.x_mask
    }

    pub fn z_mask(&self) -> u64 {
        self.z_mask
    }

    pub fn phase(&self) -> Complex64 {
        match self.phase_pow % 4 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.x_mask == 0 && self.z_mask == 0
    }

    /// Number of qubits acted on non-trivially.
    pub fn weight(&self) -> usize {
        (self.x_mask | self.z_mask).count_ones() as usize
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.n_qubits)
            .filter(|q| (self.x_mask | self.z_mask) >> q & 1 == 1)
            .collect()
    }

    /// Product of two Pauli strings; the result is again a Pauli string.
    pub fn mul(&self, rhs: &PauliString) -> Result<PauliString> {
        if self.n_qubits != rhs.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.n_qubits,
                got: rhs.n_qubits,
            });
        }
        // Z^{z1} X^{x2} = (−1)^{|z1 ∧ x2|} X^{x2} Z^{z1}
        let swaps = (self.z_mask & rhs.x_mask).count_ones() as u8;
        Ok(PauliString {
            n_qubits: self.n_qubits,
            x_mask: self.x_mask ^ rhs.x_mask,
            z_mask: self.z_mask ^ rhs.z_mask,
            phase_pow: (self.phase_pow + rhs.phase_pow + 2 * (swaps % 2)) % 4,
        })
    }

    pub fn commutes_with(&self, rhs: &PauliString) -> bool {
        let a = (self.x_mask & rhs.z_mask).count_ones();
        let b = (self.z_mask & rhs.x_mask).count_ones();
        (a + b).is_multiple_of(2)
    }

    /// Qubit-wise commutation: on every qubit the single-qubit factors are
    /// equal or at least one of them is the identity.
    pub fn qubitwise_commutes_with(&self, rhs: &PauliString) -> bool {
        for q in 0..self.n_qubits {
            let a = (self.x_mask >> q & 1, self.z_mask >> q & 1);
            let b = (rhs.x_mask >> q & 1, rhs.z_mask >> q & 1);
            if a != (0, 0) && b != (0, 0) && a != b {
                return false;
            }
        }
        true
    }

    /// Hermitian iff the phase parity matches the overlap of X and Z masks
    /// (i^{2k} = (−1)^{|x∧z|}).
    pub fn is_hermitian(&self) -> bool {
        let xz = (self.x_mask & self.z_mask).count_ones() as u8;
        self.phase_pow % 2 == xz % 2
    }

    /// Single-qubit factor at `q` as one of 'I', 'X', 'Y', 'Z'.
    pub fn factor(&self, q: usize) -> char {
        let x = self.x_mask >> q & 1 == 1;
        let z = self.z_mask >> q & 1 == 1;
        match (x, z) {
            (false, false) => 'I',
            (true, false) => 'X',
            (false, true) => 'Z',
            (true, true) => 'Y',
        }
    }

    /// Split into `sign × canonical` where canonical is the +1-phase
    /// labeled Pauli (the form `from_label` produces). Errors when the
    /// residual phase is ±i (anti-Hermitian overall).
    pub fn canonical_hermitian(&self) -> Result<(f64, PauliString)> {
        let y_count = (self.x_mask & self.z_mask).count_ones() as u8;
        let canon = PauliString {
            n_qubits: self.n_qubits,
            x_mask: self.x_mask,
            z_mask: self.z_mask,
            phase_pow: y_count % 4,
        };
        match (self.phase_pow + 4 - canon.phase_pow) % 4 {
            0 => Ok((1.0, canon)),
            2 => Ok((-1.0, canon)),
            _ => Err(Error::InvalidArgument(format!(
                "Pauli {} carries a ±i phase",
                self.to_label()
            ))),
        }
    }

    /// Dense matrix representation.
    pub fn matrix(&self) -> CMatrix {
        let n = self.n_qubits;
        let dim = 1usize << n;
        let xi = reverse_bits(self.x_mask, n) as usize;
        let zi = reverse_bits(self.z_mask, n) as usize;
        let ph = self.phase();
        let mut m = CMatrix::zeros(dim, dim);
        for col in 0..dim {
            let row = col ^ xi;
            let sign = if ((col & zi).count_ones()).is_multiple_of(2) {
                C_ONE
            } else {
                -C_ONE
            };
            m[(row, col)] = ph * sign;
        }
        m
    }

    /// `Tr[P ρ]` for a density matrix given as a dense `dim × dim` array.
    pub(crate) fn trace_with(&self, rho: &CMatrix) -> Complex64 {
        let n = self.n_qubits;
        let dim = 1usize << n;
        debug_assert_eq!(rho.rows(), dim);
        let xi = reverse_bits(self.x_mask, n) as usize;
        let zi = reverse_bits(self.z_mask, n) as usize;
        let mut acc = C_ZERO;
        for m in 0..dim {
            let v = rho[(m, m ^ xi)];
            if ((m & zi).count_ones()).is_multiple_of(2) {
                acc += v;
            } else {
                acc -= v;
            }
        }
        self.phase() * acc
    }
}

/// A Hermitian observable as a real-weighted Pauli sum.
#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    n_qubits: usize,
    terms: Vec<(f64, PauliString)>,
}

impl Observable {
    pub fn new(n_qubits: usize, terms: Vec<(f64, PauliString)>) -> Result<Self> {
        for (_, p) in &terms {
            if p.n_qubits() != n_qubits {
                return Err(Error::DimensionMismatch {
                    expected: n_qubits,
                    got: p.n_qubits(),
                });
            }
            if !p.is_hermitian() {
                return Err(Error::InvalidArgument(format!(
                    "non-Hermitian Pauli term {}",
                    p.to_label()
                )));
            }
        }
        Ok(Observable { n_qubits, terms })
    }

    pub fn single(coeff: f64, pauli: PauliString) -> Result<Self> {
        Self::new(pauli.n_qubits(), vec![(coeff, pauli)])
    }

    /// Parse a single Pauli label with unit coefficient.
    pub fn from_label(label: &str) -> Result<Self> {
        Self::single(1.0, PauliString::from_label(label)?)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn terms(&self) -> &[(f64, PauliString)] {
        &self.terms
    }

    pub fn is_single_pauli(&self) -> bool {
        self.terms.len() == 1
    }

    /// Upper bound on the spectral radius: Σ|c|.
    pub fn coefficient_bound(&self) -> f64 {
        self.terms.iter().map(|(c, _)| c.abs()).sum()
    }

    pub fn matrix(&self) -> CMatrix {
        let dim = 1usize << self.n_qubits;
        let mut m = CMatrix::zeros(dim, dim);
        for (c, p) in &self.terms {
            m.add_scaled(*c, &p.matrix());
        }
        m
    }

    /// Largest absolute eigenvalue (the ∞-norm of the operator).
    pub fn norm_inf(&self) -> Result<f64> {
        let eig = crate::linalg::hermitian_eigen(&self.matrix(), 1e-13)?;
        Ok(eig
            .values
            .iter()
            .map(|v| v.abs())
            .fold(0.0, f64::max))
    }

    /// Diagonal of the observable in the computational basis, indexed by
    /// basis state. Errors if any term is off-diagonal (has an X component).
    pub fn z_spectrum(&self) -> Result<Vec<f64>> {
        let dim = 1usize << self.n_qubits;
        let mut spec = vec![0.0; dim];
        for (c, p) in &self.terms {
            if p.x_mask() != 0 {
                return Err(Error::InvalidArgument(format!(
                    "term {} is not diagonal in the computational basis",
                    p.to_label()
                )));
            }
            let zi = reverse_bits(p.z_mask(), self.n_qubits) as usize;
            let ph = p.phase().re;
            for (b, slot) in spec.iter_mut().enumerate() {
                let sign = if (b & zi).count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
                *slot += c * ph * sign;
            }
        }
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn labels_round_trip() {
        for label in ["X", "ZIZ", "XYZI", "YY"] {
            let p = PauliString::from_label(label).unwrap();
            assert_eq!(p.to_label(), label);
            assert!(p.is_hermitian());
        }
    }

    #[test]
    fn products_match_matrices() {
        let x = PauliString::from_label("X").unwrap();
        let z = PauliString::from_label("Z").unwrap();
        let y = PauliString::from_label("Y").unwrap();
        // XZ = −iY
        let xz = x.mul(&z).unwrap();
        assert_eq!(xz.matrix().max_abs_diff(&y.matrix().scale(Complex64::new(0.0, -1.0))), 0.0);
        // Y² = I
        let yy = y.mul(&y).unwrap();
        assert!(yy.is_identity());
        assert_eq!(yy.phase(), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn commutation_rules() {
        let xx = PauliString::from_label("XX").unwrap();
        let zz = PauliString::from_label("ZZ").unwrap();
        let zi = PauliString::from_label("ZI").unwrap();
        assert!(xx.commutes_with(&zz));
        assert!(!xx.qubitwise_commutes_with(&zz));
        assert!(!xx.commutes_with(&zi));
        assert!(zz.qubitwise_commutes_with(&zi));
    }

    #[test]
    fn matrix_of_y_is_standard() {
        let y = PauliString::from_label("Y").unwrap().matrix();
        assert_eq!(y[(0, 1)], Complex64::new(0.0, -1.0));
        assert_eq!(y[(1, 0)], Complex64::new(0.0, 1.0));
    }

    #[test]
    fn z_spectrum_of_zz() {
        let obs = Observable::from_label("ZZ").unwrap();
        assert_eq!(obs.z_spectrum().unwrap(), vec![1.0, -1.0, -1.0, 1.0]);
    }

    #[test]
    fn norm_inf_of_pauli_sum() {
        let n = Observable::new(
            2,
            vec![
                (0.5, PauliString::from_label("XX").unwrap()),
                (0.25, PauliString::from_label("ZZ").unwrap()),
            ],
        )
        .unwrap();
        // XX and ZZ commute; eigenvalues ±0.5 ± 0.25.
        assert!((n.norm_inf().unwrap() - 0.75).abs() < 1e-10);
    }

    proptest! {
        // Closure: products of Pauli strings are Pauli strings whose matrix
        // is the product of the factor matrices, and squares are ±identity.
        #[test]
        fn product_closure(xa in 0u64..8, za in 0u64..8, xb in 0u64..8, zb in 0u64..8) {
            let a = PauliString { n_qubits: 3, x_mask: xa, z_mask: za, phase_pow: ((xa & za).count_ones() % 4) as u8 };
            let b = PauliString { n_qubits: 3, x_mask: xb, z_mask: zb, phase_pow: ((xb & zb).count_ones() % 4) as u8 };
            let ab = a.mul(&b).unwrap();
            let diff = ab.matrix().max_abs_diff(&a.matrix().mul(&b.matrix()));
            prop_assert!(diff < 1e-12);

            let sq = a.mul(&a).unwrap();
            prop_assert!(sq.is_identity());
            prop_assert!((sq.phase() - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        }
    }
}
