//! Noisy circuits: ordered gate locations, each optionally carrying a fault.
//!
//! A location stores its noise as "identity with probability 1−p_f, the
//! normalized error part with probability p_f". Noise boosting rescales p_f
//! only and never reshapes the error part, so a boosted circuit has exactly
//! the same error model at a scaled rate. The caller supplies p_f explicitly
//! (or uses `Channel::split_fault` to derive the maximal-identity split).

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::channel::Channel;
use crate::error::{Error, Result};
use crate::matrix::{CMatrix, C_ONE, C_ZERO};
use crate::state::{DensityMatrix, MAX_QUBITS};

/// A unitary gate bound to target qubits. `targets[0]` is the gate matrix's
/// most significant qubit.
#[derive(Debug, Clone)]
pub struct Gate {
    pub name: String,
    pub matrix: CMatrix,
    pub targets: Vec<usize>,
}

impl Gate {
    pub fn new(name: &str, matrix: CMatrix, targets: &[usize]) -> Result<Self> {
        let dim = 1usize << targets.len();
        if matrix.rows() != dim || matrix.cols() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: matrix.rows() });
        }
        if !matrix.is_unitary(1e-10) {
            return Err(Error::InvalidArgument(format!("gate '{name}' is not unitary")));
        }
        Ok(Gate {
            name: String::from(name),
            matrix,
            targets: targets.to_vec(),
        })
    }
}

/// Fault attached to a location: the normalized error part fires with
/// probability p_f.
#[derive(Debug, Clone)]
pub struct Fault {
    pub error_part: Channel,
    pub p_f: f64,
}

#[derive(Debug, Clone)]
pub struct Location {
    pub gate: Gate,
    pub fault: Option<Fault>,
}

/// An ordered list of noisy gate locations on a fixed register.
#[derive(Debug, Clone)]
pub struct NoisyCircuit {
    n_qubits: usize,
    locations: Vec<Location>,
}

impl NoisyCircuit {
    pub fn new(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::TooManyQubits { n: n_qubits, cap: MAX_QUBITS });
        }
        Ok(NoisyCircuit { n_qubits, locations: Vec::new() })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn locations(&self) -> &[Location] {
        &self.locations
    }

    pub fn push(&mut self, location: Location) -> Result<()> {
        for t in &location.gate.targets {
            if *t >= self.n_qubits {
                return Err(Error::InvalidArgument(format!("target {t} out of range")));
            }
        }
        if let Some(fault) = &location.fault {
            if !(0.0..1.0).contains(&fault.p_f) {
                return Err(Error::InvalidProbability(fault.p_f));
            }
            if fault.error_part.n_qubits() != location.gate.targets.len() {
                return Err(Error::DimensionMismatch {
                    expected: location.gate.targets.len(),
                    got: fault.error_part.n_qubits(),
                });
            }
            fault.error_part.validate()?;
        }
        self.locations.push(location);
        Ok(())
    }

    /// Append a noiseless gate.
    pub fn gate(&mut self, name: &str, matrix: CMatrix, targets: &[usize]) -> Result<&mut Self> {
        let g = Gate::new(name, matrix, targets)?;
        self.push(Location { gate: g, fault: None })?;
        Ok(self)
    }

    /// Append a gate whose location faults with probability `p_f`, applying
    /// `error_part`.
    pub fn noisy_gate(
        &mut self,
        name: &str,
        matrix: CMatrix,
        targets: &[usize],
        error_part: Channel,
        p_f: f64,
    ) -> Result<&mut Self> {
        let g = Gate::new(name, matrix, targets)?;
        self.push(Location {
            gate: g,
            fault: Some(Fault { error_part, p_f }),
        })?;
        Ok(self)
    }

    /// Circuit fault rate λ = Σ_f p_f.
    pub fn fault_rate(&self) -> f64 {
        self.locations
            .iter()
            .filter_map(|l| l.fault.as_ref().map(|f| f.p_f))
            .sum()
    }

    /// Fault-free probability P0 = Π_f (1 − p_f).
    pub fn fault_free_probability(&self) -> f64 {
        self.locations
            .iter()
            .filter_map(|l| l.fault.as_ref().map(|f| 1.0 - f.p_f))
            .product()
    }

    /// Run with every fault probability multiplied by `noise_scale`.
    /// Scale 0 reproduces the ideal circuit exactly; scale 1 is the native
    /// noise level. Trace and Hermiticity are asserted after every location.
    pub fn run(&self, noise_scale: f64) -> Result<DensityMatrix> {
        if noise_scale < 0.0 {
            return Err(Error::InvalidArgument(format!("negative noise scale {noise_scale}")));
        }
        let mut state = DensityMatrix::zero_state(self.n_qubits)?;
        for (idx, loc) in self.locations.iter().enumerate() {
            state.apply_unitary_in_place(&loc.gate.matrix, &loc.gate.targets)?;
            if let Some(fault) = &loc.fault {
                let q = noise_scale * fault.p_f;
                if q > 0.0 {
                    if q >= 1.0 {
                        return Err(Error::NoiseScaleTooLarge { location: idx, effective: q });
                    }
                    let errored = fault.error_part.apply_to(&state, &loc.gate.targets)?;
                    state = state.mix_with(&errored, q)?;
                }
            }
            state.check_trace_hermitian()?;
        }
        Ok(state)
    }

    /// Noiseless output ρ0.
    pub fn ideal_state(&self) -> Result<DensityMatrix> {
        self.run(0.0)
    }

    /// Poisson-limit global-depolarizing realization of this circuit's noise:
    /// ρ_λ = e^{−sλ} ρ0 + (1 − e^{−sλ}) I/2^N at noise scale s.
    ///
    /// Under this model a traceless observable decays exactly exponentially
    /// in the scale, which per-location faults (affine in s per location)
    /// cannot reproduce; it backs the exponential-extrapolation and
    /// purification overhead analyses.
    pub fn global_depolarizing_state(&self, noise_scale: f64) -> Result<DensityMatrix> {
        if noise_scale < 0.0 {
            return Err(Error::InvalidArgument(format!("negative noise scale {noise_scale}")));
        }
        let p0 = poisson_fault_free(noise_scale * self.fault_rate());
        let ideal = self.ideal_state()?;
        let mixed = DensityMatrix::maximally_mixed(self.n_qubits)?;
        ideal.mix_with(&mixed, 1.0 - p0)
    }

    /// Indices of locations holding single-qubit gates.
    pub fn single_qubit_slots(&self) -> Vec<usize> {
        self.locations
            .iter()
            .enumerate()
            .filter(|(_, l)| l.gate.targets.len() == 1)
            .map(|(i, _)| i)
            .collect()
    }

    /// Copy of the circuit with single-qubit gate matrices replaced
    /// slot-by-slot; faults are untouched. `replacements` pairs a location
    /// index (which must hold a single-qubit gate) with the new matrix.
    pub fn with_single_qubit_gates(&self, replacements: &[(usize, CMatrix)]) -> Result<Self> {
        let mut out = self.clone();
        for (idx, m) in replacements {
            let loc = out
                .locations
                .get_mut(*idx)
                .ok_or_else(|| Error::InvalidArgument(format!("no location {idx}")))?;
            if loc.gate.targets.len() != 1 {
                return Err(Error::InvalidArgument(format!(
                    "location {idx} is not a single-qubit gate"
                )));
            }
            if m.rows() != 2 || !m.is_unitary(1e-10) {
                return Err(Error::InvalidArgument(String::from("replacement is not a 1q unitary")));
            }
            loc.gate.matrix = m.clone();
            loc.gate.name = String::from("c1q");
        }
        Ok(out)
    }
}

/// Poisson approximation of the fault-free probability, P0 = e^{−λ}.
pub fn poisson_fault_free(lambda: f64) -> f64 {
    (-lambda).exp()
}

/// Standard gate matrices.
pub mod gates {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    pub fn identity1() -> CMatrix {
        CMatrix::identity(2)
    }

    pub fn x() -> CMatrix {
        CMatrix::from_rows(&[&[C_ZERO, C_ONE], &[C_ONE, C_ZERO]])
    }

    pub fn y() -> CMatrix {
        CMatrix::from_rows(&[&[C_ZERO, c(0.0, -1.0)], &[c(0.0, 1.0), C_ZERO]])
    }

    pub fn z() -> CMatrix {
        CMatrix::from_rows(&[&[C_ONE, C_ZERO], &[C_ZERO, -C_ONE]])
    }

    pub fn h() -> CMatrix {
        let s = 1.0 / 2.0f64.sqrt();
        CMatrix::from_rows(&[&[c(s, 0.0), c(s, 0.0)], &[c(s, 0.0), c(-s, 0.0)]])
    }

    pub fn s() -> CMatrix {
        CMatrix::from_rows(&[&[C_ONE, C_ZERO], &[C_ZERO, c(0.0, 1.0)]])
    }

    pub fn sdg() -> CMatrix {
        CMatrix::from_rows(&[&[C_ONE, C_ZERO], &[C_ZERO, c(0.0, -1.0)]])
    }

    pub fn t() -> CMatrix {
        let s = 1.0 / 2.0f64.sqrt();
        CMatrix::from_rows(&[&[C_ONE, C_ZERO], &[C_ZERO, c(s, s)]])
    }

    pub fn tdg() -> CMatrix {
        let s = 1.0 / 2.0f64.sqrt();
        CMatrix::from_rows(&[&[C_ONE, C_ZERO], &[C_ZERO, c(s, -s)]])
    }

    pub fn rx(theta: f64) -> CMatrix {
        let (ct, st) = ((theta / 2.0).cos(), (theta / 2.0).sin());
        CMatrix::from_rows(&[&[c(ct, 0.0), c(0.0, -st)], &[c(0.0, -st), c(ct, 0.0)]])
    }

    pub fn ry(theta: f64) -> CMatrix {
        let (ct, st) = ((theta / 2.0).cos(), (theta / 2.0).sin());
        CMatrix::from_rows(&[&[c(ct, 0.0), c(-st, 0.0)], &[c(st, 0.0), c(ct, 0.0)]])
    }

    pub fn rz(theta: f64) -> CMatrix {
        let (ct, st) = ((theta / 2.0).cos(), (theta / 2.0).sin());
        CMatrix::from_rows(&[&[c(ct, -st), C_ZERO], &[C_ZERO, c(ct, st)]])
    }

    /// CNOT with targets[0] as control.
    pub fn cnot() -> CMatrix {
        CMatrix::from_rows(&[
            &[C_ONE, C_ZERO, C_ZERO, C_ZERO],
            &[C_ZERO, C_ONE, C_ZERO, C_ZERO],
            &[C_ZERO, C_ZERO, C_ZERO, C_ONE],
            &[C_ZERO, C_ZERO, C_ONE, C_ZERO],
        ])
    }

    pub fn cz() -> CMatrix {
        CMatrix::from_rows(&[
            &[C_ONE, C_ZERO, C_ZERO, C_ZERO],
            &[C_ZERO, C_ONE, C_ZERO, C_ZERO],
            &[C_ZERO, C_ZERO, C_ONE, C_ZERO],
            &[C_ZERO, C_ZERO, C_ZERO, -C_ONE],
        ])
    }

    pub fn swap() -> CMatrix {
        CMatrix::from_rows(&[
            &[C_ONE, C_ZERO, C_ZERO, C_ZERO],
            &[C_ZERO, C_ZERO, C_ONE, C_ZERO],
            &[C_ZERO, C_ONE, C_ZERO, C_ZERO],
            &[C_ZERO, C_ZERO, C_ZERO, C_ONE],
        ])
    }

    /// Look a standard gate up by name; rotation gates take `angle`.
    pub fn by_name(name: &str, angle: Option<f64>) -> Result<CMatrix> {
        let need_angle = || {
            angle.ok_or_else(|| Error::InvalidArgument(format!("gate '{name}' needs an angle")))
        };
        Ok(match name {
            "i" | "id" => identity1(),
            "x" => x(),
            "y" => y(),
            "z" => z(),
            "h" => h(),
            "s" => s(),
            "sdg" => sdg(),
            "t" => t(),
            "tdg" => tdg(),
            "rx" => rx(need_angle()?),
            "ry" => ry(need_angle()?),
            "rz" => rz(need_angle()?),
            "cnot" | "cx" => cnot(),
            "cz" => cz(),
            "swap" => swap(),
            other => {
                return Err(Error::InvalidArgument(format!("unknown gate '{other}'")));
            }
        })
    }
}

/// The 24-element single-qubit Clifford group, deterministic order.
///
/// Generated as the closure of {H, S} under multiplication with global
/// phases canonicalized (first significant entry made real positive).
pub fn single_qubit_cliffords() -> Vec<CMatrix> {
    fn canonicalize(m: &CMatrix) -> CMatrix {
        let mut phase = C_ONE;
        for v in m.data() {
            if v.norm() > 1e-8 {
                phase = v / v.norm();
                break;
            }
        }
        m.scale(phase.conj())
    }
    fn key(m: &CMatrix) -> Vec<i64> {
        m.data()
            .iter()
            .flat_map(|v| {
                [
                    (v.re * 1e6).round() as i64,
                    (v.im * 1e6).round() as i64,
                ]
            })
            .collect()
    }

    let gens = [gates::h(), gates::s()];
    let mut elems: Vec<CMatrix> = vec![canonicalize(&CMatrix::identity(2))];
    let mut keys: Vec<Vec<i64>> = vec![key(&elems[0])];
    let mut frontier = elems.clone();
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for m in &frontier {
            for g in &gens {
                let prod = canonicalize(&g.mul(m));
                let k = key(&prod);
                if !keys.contains(&k) {
                    keys.push(k);
                    elems.push(prod.clone());
                    next.push(prod);
                }
            }
        }
        frontier = next;
    }
    debug_assert_eq!(elems.len(), 24);
    // Deterministic order independent of discovery order.
    let mut order: Vec<usize> = (0..elems.len()).collect();
    order.sort_by(|&a, &b| key(&elems[a]).cmp(&key(&elems[b])));
    order.into_iter().map(|i| elems[i].clone()).collect()
}

/// Clifford conjugation test: U P U† stays in the Pauli group (up to phase
/// ±1, ±i) for every generator P.
pub fn is_clifford(u: &CMatrix) -> bool {
    if !u.is_square() || !u.rows().is_power_of_two() || !u.is_unitary(1e-9) {
        return false;
    }
    let k = u.rows().trailing_zeros() as usize;
    let phases = [
        C_ONE,
        Complex64::new(0.0, 1.0),
        -C_ONE,
        Complex64::new(0.0, -1.0),
    ];
    let basis = crate::channel::pauli_basis(k);
    // Generators: X_q and Z_q for each qubit of the support.
    for q in 0..k {
        for which in ['X', 'Z'] {
            let p = crate::pauli::PauliString::single(k, q, which).expect("valid");
            let conj = u.mul(&p.matrix()).mul(&u.adjoint());
            let mut found = false;
            'search: for cand in &basis {
                let cm = cand.matrix();
                for ph in phases {
                    if conj.max_abs_diff(&cm.scale(ph)) < 1e-8 {
                        found = true;
                        break 'search;
                    }
                }
            }
            if !found {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::Observable;

    #[test]
    fn fault_rate_and_fault_free_probability() {
        let mut c = NoisyCircuit::new(1).unwrap();
        c.noisy_gate("i", gates::identity1(), &[0], Channel::dephasing(1.0).unwrap().split_fault().unwrap().1, 0.1)
            .unwrap()
            .noisy_gate("i", gates::identity1(), &[0], Channel::bit_flip(1.0).unwrap().split_fault().unwrap().1, 0.2)
            .unwrap();
        assert!((c.fault_rate() - 0.3).abs() < 1e-15);
        assert!((c.fault_free_probability() - 0.72).abs() < 1e-15);

        let empty = NoisyCircuit::new(1).unwrap();
        assert_eq!(empty.fault_rate(), 0.0);
        assert_eq!(empty.fault_free_probability(), 1.0);
    }

    #[test]
    fn hundred_locations_poisson_agreement() {
        // Π(1−0.01) over 100 locations vs e^{−1}: within 2%.
        let mut c = NoisyCircuit::new(1).unwrap();
        let err = Channel::dephasing(1.0).unwrap().split_fault().unwrap().1;
        for _ in 0..100 {
            c.noisy_gate("i", gates::identity1(), &[0], err.clone(), 0.01).unwrap();
        }
        assert!((c.fault_rate() - 1.0).abs() < 1e-12);
        let exact = c.fault_free_probability();
        let poisson = poisson_fault_free(c.fault_rate());
        assert!((exact - 0.99f64.powi(100)).abs() < 1e-12);
        assert!((exact - poisson).abs() / poisson < 0.02);
    }

    #[test]
    fn scale_zero_is_ideal_scale_one_is_native() {
        // {H, dephasing 0.1, H} measured in Z: HZH = X picks up 1−2p.
        let mut c = NoisyCircuit::new(1).unwrap();
        let zerr = Channel::pauli_mixture(1, &[("Z", 1.0)]).unwrap();
        c.gate("h", gates::h(), &[0]).unwrap();
        c.noisy_gate("i", gates::identity1(), &[0], zerr, 0.1).unwrap();
        c.gate("h", gates::h(), &[0]).unwrap();

        let z = Observable::from_label("Z").unwrap();
        let ideal = c.run(0.0).unwrap();
        assert!((ideal.expectation(&z).unwrap() - 1.0).abs() < 1e-12);

        let noisy = c.run(1.0).unwrap();
        assert!((noisy.expectation(&z).unwrap() - 0.8).abs() < 1e-12);

        // Scale 2 doubles the effective fault probability: 1−2·0.2 = 0.6.
        let boosted = c.run(2.0).unwrap();
        assert!((boosted.expectation(&z).unwrap() - 0.6).abs() < 1e-12);
    }

    #[test]
    fn overboost_is_rejected() {
        let mut c = NoisyCircuit::new(1).unwrap();
        let zerr = Channel::pauli_mixture(1, &[("Z", 1.0)]).unwrap();
        c.noisy_gate("i", gates::identity1(), &[0], zerr, 0.3).unwrap();
        assert!(matches!(
            c.run(4.0),
            Err(Error::NoiseScaleTooLarge { .. })
        ));
    }

    #[test]
    fn ideal_run_matches_gate_composition() {
        // run(0) equals the noiseless composition of the gate matrices.
        let mut c = NoisyCircuit::new(2).unwrap();
        let zerr = Channel::pauli_mixture(1, &[("Z", 1.0)]).unwrap();
        c.gate("h", gates::h(), &[0]).unwrap();
        c.noisy_gate("i", gates::identity1(), &[0], zerr, 0.2).unwrap();
        c.gate("cnot", gates::cnot(), &[0, 1]).unwrap();

        let ideal = c.run(0.0).unwrap();
        let full = gates::h().kron(&CMatrix::identity(2));
        let u = gates::cnot().mul(&full);
        let rho0 = DensityMatrix::zero_state(2).unwrap();
        let want = u.mul(rho0.matrix()).mul(&u.adjoint());
        assert!(ideal.matrix().max_abs_diff(&want) < 1e-10);
    }

    #[test]
    fn global_depolarizing_family_is_exact_exponential() {
        let mut c = NoisyCircuit::new(2).unwrap();
        let zerr = Channel::pauli_mixture(1, &[("Z", 1.0)]).unwrap();
        c.gate("h", gates::h(), &[0]).unwrap();
        c.gate("cnot", gates::cnot(), &[0, 1]).unwrap();
        c.noisy_gate("i", gates::identity1(), &[0], zerr, 0.25).unwrap();

        let zz = Observable::from_label("ZZ").unwrap();
        for scale in [0.0, 0.7, 1.0, 2.5] {
            let rho = c.global_depolarizing_state(scale).unwrap();
            let want = (-(scale * 0.25)).exp();
            assert!((rho.expectation(&zz).unwrap() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn clifford_group_has_24_elements_and_passes_checks() {
        let cliffords = single_qubit_cliffords();
        assert_eq!(cliffords.len(), 24);
        for m in &cliffords {
            assert!(m.is_unitary(1e-10));
            assert!(is_clifford(m));
        }
        // Deterministic order.
        let again = single_qubit_cliffords();
        for (a, b) in cliffords.iter().zip(again.iter()) {
            assert!(a.max_abs_diff(b) < 1e-12);
        }
    }

    #[test]
    fn clifford_check_accepts_cnot_rejects_t() {
        assert!(is_clifford(&gates::cnot()));
        assert!(is_clifford(&gates::cz()));
        assert!(is_clifford(&gates::h()));
        assert!(!is_clifford(&gates::t()));
        assert!(!is_clifford(&gates::rx(0.3)));
    }
}
