//! Symmetry verification and subspace expansion.
//!
//! Both methods extract a corrected state from the same noisy ρ: symmetry
//! verification projects onto a symmetry sector, Π = Π_i (1 + s_i S_i)/2,
//! while subspace expansion applies an optimized operator Γ_w = Σ w_i G_i
//! and renormalizes. Using the symmetry operators as the expansion basis
//! recovers the symmetry subspace, which the tests exercise as a
//! cross-check between the two routes.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::circuit::{gates, NoisyCircuit};
use crate::error::{Error, Result};
use crate::linalg::hermitian_eigen;
use crate::matrix::{CMatrix, C_ONE};
use crate::pauli::{Observable, PauliString};
use crate::rng::RngStream;
use crate::state::{sample_index, DensityMatrix};
use crate::stats::{mean_and_variance, EstimatorReport};
use crate::EvalMode;

/// A set of commuting Pauli symmetries with their target eigenvalues.
#[derive(Debug, Clone)]
pub struct SymmetrySpec {
    ops: Vec<PauliString>,
    sectors: Vec<i8>,
}

impl SymmetrySpec {
    pub fn new(ops: Vec<PauliString>, sectors: Vec<i8>) -> Result<Self> {
        if ops.is_empty() || ops.len() != sectors.len() {
            return Err(Error::InvalidArgument(format!(
                "need matching operators and sectors ({} vs {})",
                ops.len(),
                sectors.len()
            )));
        }
        for s in &sectors {
            if *s != 1 && *s != -1 {
                return Err(Error::InvalidArgument(format!("sector {s} must be ±1")));
            }
        }
        for (i, a) in ops.iter().enumerate() {
            if !a.is_hermitian() {
                return Err(Error::InvalidArgument(format!(
                    "symmetry {} is not Hermitian",
                    a.to_label()
                )));
            }
            let sq = a.mul(a)?;
            if !sq.is_identity() || (sq.phase() - C_ONE).norm() > 1e-15 {
                return Err(Error::InvalidArgument(format!(
                    "symmetry {} does not square to the identity",
                    a.to_label()
                )));
            }
            for b in &ops[..i] {
                if !a.commutes_with(b) {
                    return Err(Error::InvalidArgument(format!(
                        "symmetries {} and {} do not commute",
                        a.to_label(),
                        b.to_label()
                    )));
                }
            }
        }
        Ok(SymmetrySpec { ops, sectors })
    }

    /// Single Pauli symmetry with its sector.
    pub fn single(op: PauliString, sector: i8) -> Result<Self> {
        Self::new(vec![op], vec![sector])
    }

    pub fn ops(&self) -> &[PauliString] {
        &self.ops
    }

    pub fn sectors(&self) -> &[i8] {
        &self.sectors
    }

    pub fn n_qubits(&self) -> usize {
        self.ops[0].n_qubits()
    }

    /// Pauli expansion of the sector projector Π = Π_i (1 + s_i S_i)/2.
    pub fn projector_terms(&self) -> Result<Vec<(f64, PauliString)>> {
        let n = self.n_qubits();
        let mut terms: Vec<(f64, PauliString)> = vec![(1.0, PauliString::identity(n))];
        for (op, s) in self.ops.iter().zip(&self.sectors) {
            let mut next = Vec::with_capacity(terms.len() * 2);
            for (c, p) in &terms {
                next.push((0.5 * c, *p));
                let prod = p.mul(op)?;
                let (sign, canon) = prod.canonical_hermitian()?;
                next.push((0.5 * c * (*s as f64) * sign, canon));
            }
            terms = merge_terms(next);
        }
        Ok(terms)
    }

    /// Dense projector matrix; idempotent and Hermitian by construction.
    pub fn projector(&self) -> Result<CMatrix> {
        let dim = 1usize << self.n_qubits();
        let mut pi = CMatrix::zeros(dim, dim);
        for (c, p) in self.projector_terms()? {
            pi.add_scaled(c, &p.matrix());
        }
        debug_assert!(pi.hermitian_residual() < 1e-12);
        debug_assert!(pi.mul(&pi).max_abs_diff(&pi) < 1e-12);
        Ok(pi)
    }
}

fn merge_terms(terms: Vec<(f64, PauliString)>) -> Vec<(f64, PauliString)> {
    let mut map: BTreeMap<(u64, u64), (f64, PauliString)> = BTreeMap::new();
    for (c, p) in terms {
        map.entry((p.x_mask(), p.z_mask()))
            .and_modify(|e| e.0 += c)
            .or_insert((c, p));
    }
    map.into_values().filter(|(c, _)| c.abs() > 1e-15).collect()
}

/// ΠρΠ / Tr[ΠρΠ] and the pass rate Tr[Πρ].
pub fn postselect_state(rho: &DensityMatrix, pi: &CMatrix) -> Result<(DensityMatrix, f64)> {
    let projected = pi.mul(rho.matrix()).mul(pi);
    let pass = projected.trace().re;
    if pass <= 1e-14 {
        return Err(Error::InvalidArgument(format!(
            "state has no weight in the symmetry sector (pass rate {pass:e})"
        )));
    }
    let state = DensityMatrix::from_matrix_unchecked(
        rho.n_qubits(),
        projected.scale(Complex64::new(1.0 / pass, 0.0)),
    );
    Ok((state, pass))
}

/// Post-processing quotient Tr[ΠOΠρ] / Tr[Πρ]; identical to measuring `obs`
/// on the post-selected state.
pub fn sv_postprocess(rho: &DensityMatrix, pi: &CMatrix, obs: &Observable) -> Result<f64> {
    let (state, _) = postselect_state(rho, pi)?;
    state.expectation(obs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SvMode {
    /// Measure the symmetries alongside the observable and discard failures;
    /// needs qubit-wise commutation. Overhead 1/pass.
    Direct,
    /// Estimate Tr[ΠOΠρ] and Tr[Πρ] separately and take the quotient.
    /// Overhead 1/pass².
    PostProcess,
}

#[derive(Debug, Clone)]
pub struct SvRun {
    pub report: EstimatorReport,
    /// Exact pass rate Tr[Πρ] in exact mode, the measured fraction or
    /// estimated denominator in sampled mode.
    pub pass_rate: f64,
    pub predicted_overhead: f64,
}

/// Shot-level symmetry verification of a noisy circuit.
pub fn sv_shot_mitigate(
    circuit: &NoisyCircuit,
    sym: &SymmetrySpec,
    obs: &Observable,
    mode: SvMode,
    eval: EvalMode,
    shots: u64,
    seed: u64,
) -> Result<SvRun> {
    let rho = circuit.run(1.0)?;
    let ideal = circuit.ideal_state()?.expectation(obs)?;
    sv_shot_mitigate_on_state(&rho, ideal, sym, obs, mode, eval, shots, seed)
}

/// As `sv_shot_mitigate`, on an already-prepared noisy state with an
/// explicit ideal reference.
#[allow(clippy::too_many_arguments)]
pub fn sv_shot_mitigate_on_state(
    rho: &DensityMatrix,
    ideal: f64,
    sym: &SymmetrySpec,
    obs: &Observable,
    mode: SvMode,
    eval: EvalMode,
    shots: u64,
    seed: u64,
) -> Result<SvRun> {
    if sym.n_qubits() != rho.n_qubits() {
        return Err(Error::DimensionMismatch {
            expected: rho.n_qubits(),
            got: sym.n_qubits(),
        });
    }
    let pi = sym.projector()?;
    let exact_pass = pi.mul(rho.matrix()).trace().re;
    let predicted_overhead = match mode {
        SvMode::Direct => 1.0 / exact_pass,
        SvMode::PostProcess => 1.0 / (exact_pass * exact_pass),
    };

    if eval == EvalMode::Exact {
        let value = sv_postprocess(rho, &pi, obs)?;
        return Ok(SvRun {
            report: EstimatorReport::exact(value, Some(ideal)),
            pass_rate: exact_pass,
            predicted_overhead,
        });
    }

    match mode {
        SvMode::Direct => direct_shots(rho, sym, obs, ideal, shots, seed, predicted_overhead),
        SvMode::PostProcess => {
            postprocess_shots(rho, sym, obs, ideal, shots, seed, predicted_overhead)
        }
    }
}

fn direct_shots(
    rho: &DensityMatrix,
    sym: &SymmetrySpec,
    obs: &Observable,
    ideal: f64,
    shots: u64,
    seed: u64,
    predicted_overhead: f64,
) -> Result<SvRun> {
    if !obs.is_single_pauli() {
        return Err(Error::CompositeObservable);
    }
    let (coeff, pauli) = &obs.terms()[0];
    let n = rho.n_qubits();

    // One product basis must diagonalize the observable and every symmetry:
    // qubit-wise commutation.
    let mut basis = vec!['I'; n];
    let mut pick = |q: usize, f: char| -> Result<()> {
        if f == 'I' {
            return Ok(());
        }
        if basis[q] == 'I' {
            basis[q] = f;
            Ok(())
        } else if basis[q] == f {
            Ok(())
        } else {
            Err(Error::NotQubitwiseCommuting)
        }
    };
    for q in 0..n {
        pick(q, pauli.factor(q))?;
        for s in sym.ops() {
            pick(q, s.factor(q))?;
        }
    }

    // Rotate each qubit's basis onto Z and read the diagonal.
    let mut rotated = rho.clone();
    for (q, w) in basis.iter().enumerate() {
        let r = match w {
            'X' => gates::h(),
            'Y' => gates::h().mul(&gates::sdg()),
            _ => continue,
        };
        rotated = rotated.apply_unitary(&r, &[q])?;
    }
    let pmf = rotated.z_diagonal();

    let bit_sign = |outcome: usize, q: usize| -> f64 {
        if (outcome >> (n - 1 - q)) & 1 == 0 {
            1.0
        } else {
            -1.0
        }
    };

    let mut kept = Vec::new();
    for i in 0..shots {
        let mut rng = RngStream::from_parts(seed, 0x57, i);
        let outcome = sample_index(&pmf, &mut rng);
        let mut pass = true;
        for (s, sector) in sym.ops().iter().zip(sym.sectors()) {
            let mut val = 1.0;
            for q in s.support() {
                val *= bit_sign(outcome, q);
            }
            if val != *sector as f64 {
                pass = false;
                break;
            }
        }
        if !pass {
            continue;
        }
        let mut oval = *coeff;
        for q in pauli.support() {
            oval *= bit_sign(outcome, q);
        }
        kept.push(oval);
    }

    let pass_rate = kept.len() as f64 / shots as f64;
    if kept.len() < 2 {
        return Err(Error::TooFewSamples { got: kept.len(), need: 2 });
    }
    Ok(SvRun {
        report: EstimatorReport::from_samples(&kept, Some(ideal))?,
        pass_rate,
        predicted_overhead,
    })
}

fn postprocess_shots(
    rho: &DensityMatrix,
    sym: &SymmetrySpec,
    obs: &Observable,
    ideal: f64,
    shots: u64,
    seed: u64,
    predicted_overhead: f64,
) -> Result<SvRun> {
    // Pauli expansions of O_sym = ΠOΠ and Π.
    let proj_terms = sym.projector_terms()?;
    let mut num_terms: Vec<(f64, PauliString)> = Vec::new();
    for (c1, p1) in &proj_terms {
        for (co, po) in obs.terms() {
            let left = p1.mul(po)?;
            for (c2, p2) in &proj_terms {
                let prod = left.mul(p2)?;
                let (sign, canon) = prod.canonical_hermitian()?;
                num_terms.push((c1 * co * c2 * sign, canon));
            }
        }
    }
    let num_terms = merge_terms(num_terms);

    let num_shots = shots / 2;
    let den_shots = shots - num_shots;
    let num = sample_pauli_sum(rho, &num_terms, num_shots, seed, 0x5a)?;
    let den = sample_pauli_sum(rho, &proj_terms, den_shots, seed, 0x5b)?;

    let (num_mean, num_var) = mean_and_variance(&num);
    let (den_mean, den_var) = mean_and_variance(&den);
    if den_mean.abs() < 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "estimated pass rate {den_mean:e} too small for the quotient"
        )));
    }
    let value = num_mean / den_mean;
    // Delta method on the ratio of independent means.
    let var_of_mean = num_var / (num_shots as f64 * den_mean * den_mean)
        + den_var * (num_mean * num_mean) / (den_shots as f64 * den_mean.powi(4));
    let report = EstimatorReport::from_moments(
        value,
        var_of_mean * shots as f64,
        shots,
        Some(ideal),
    );
    Ok(SvRun { report, pass_rate: den_mean, predicted_overhead })
}

/// Shot-sample a real Pauli sum Σ c_i P_i: each shot draws one term with
/// probability ∝ |c| and measures it projectively.
fn sample_pauli_sum(
    rho: &DensityMatrix,
    terms: &[(f64, PauliString)],
    shots: u64,
    seed: u64,
    stream: u64,
) -> Result<Vec<f64>> {
    let obs = Observable::new(rho.n_qubits(), terms.to_vec())?;
    crate::zne::sample_observable_shots(rho, &obs, shots, seed, stream)
}

/// A linearly independent set of expansion operators G_i; by convention the
/// first is the identity.
#[derive(Debug, Clone)]
pub struct ExpansionBasis {
    n_qubits: usize,
    ops: Vec<CMatrix>,
    labels: Vec<String>,
}

impl ExpansionBasis {
    pub fn from_paulis(paulis: &[PauliString]) -> Result<Self> {
        if paulis.is_empty() {
            return Err(Error::InvalidArgument(String::from("empty basis")));
        }
        let n = paulis[0].n_qubits();
        for p in paulis {
            if p.n_qubits() != n {
                return Err(Error::DimensionMismatch { expected: n, got: p.n_qubits() });
            }
        }
        let ops = paulis.iter().map(|p| p.matrix()).collect();
        let labels = paulis.iter().map(|p| p.to_label()).collect();
        let basis = ExpansionBasis { n_qubits: n, ops, labels };
        basis.check_independence()?;
        Ok(basis)
    }

    pub fn from_matrices(n_qubits: usize, ops: Vec<CMatrix>) -> Result<Self> {
        let dim = 1usize << n_qubits;
        for m in &ops {
            if m.rows() != dim || m.cols() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: m.rows() });
            }
        }
        let labels = (0..ops.len()).map(|i| format!("G{i}")).collect();
        let basis = ExpansionBasis { n_qubits, ops, labels };
        basis.check_independence()?;
        Ok(basis)
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn ops(&self) -> &[CMatrix] {
        &self.ops
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Gram-matrix rank check of linear independence.
    fn check_independence(&self) -> Result<()> {
        let m = self.ops.len();
        let dim = 1usize << self.n_qubits;
        let mut gram = CMatrix::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                gram[(i, j)] = self.ops[i].adjoint().mul(&self.ops[j]).trace() / dim as f64;
            }
        }
        let eig = hermitian_eigen(&gram, 1e-13)?;
        let max = eig.values.last().copied().unwrap_or(0.0);
        if eig.values[0] < 1e-10 * max.max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "expansion basis is linearly dependent (Gram eigenvalue {:e})",
                eig.values[0]
            )));
        }
        Ok(())
    }
}

/// Matrix elements H̄_ij = Tr[G_i† H G_j ρ] and S̄_ij = Tr[G_i† G_j ρ].
pub fn build_subspace_matrices(
    rho: &DensityMatrix,
    hamiltonian: &Observable,
    basis: &ExpansionBasis,
) -> Result<(CMatrix, CMatrix)> {
    if basis.n_qubits != rho.n_qubits() {
        return Err(Error::DimensionMismatch {
            expected: rho.n_qubits(),
            got: basis.n_qubits,
        });
    }
    let m = basis.len();
    let h_mat = hamiltonian.matrix();
    let mut hbar = CMatrix::zeros(m, m);
    let mut sbar = CMatrix::zeros(m, m);
    for i in 0..m {
        let gi_dag = basis.ops[i].adjoint();
        for j in 0..m {
            let gj_rho = basis.ops[j].mul(rho.matrix());
            hbar[(i, j)] = gi_dag.mul(&h_mat).mul(&gj_rho).trace();
            sbar[(i, j)] = gi_dag.mul(&gj_rho).trace();
        }
    }
    for (name, mat) in [("Hbar", &mut hbar), ("Sbar", &mut sbar)] {
        let res = mat.hermitian_residual();
        if res > 1e-10 {
            return Err(Error::NotHermitian { residual: res });
        }
        let _ = name;
        // Symmetrize away representation noise.
        for i in 0..m {
            for j in i..m {
                let avg = 0.5 * (mat[(i, j)] + mat[(j, i)].conj());
                mat[(i, j)] = avg;
                mat[(j, i)] = avg.conj();
            }
        }
    }
    Ok((hbar, sbar))
}

#[derive(Debug, Clone)]
pub struct GevpSolution {
    /// Ascending generalized eigenvalues over the retained subspace.
    pub energies: Vec<f64>,
    /// S̄-normalized weight vectors (w† S̄ w = 1), matching `energies`.
    pub weights: Vec<Vec<Complex64>>,
}

/// Canonical-orthogonalization solve of H̄ W = S̄ W E: S̄ directions with
/// eigenvalue below `threshold · max` are projected out, the reduced
/// ordinary problem is solved, and ties in the energies are broken by
/// lexicographic weight order for determinism.
pub fn solve_gevp(hbar: &CMatrix, sbar: &CMatrix, threshold: f64) -> Result<GevpSolution> {
    let m = hbar.rows();
    if sbar.rows() != m || !hbar.is_square() || !sbar.is_square() {
        return Err(Error::DimensionMismatch { expected: m, got: sbar.rows() });
    }
    let s_eig = hermitian_eigen(sbar, 1e-13)?;
    let smax = s_eig.values.last().copied().unwrap_or(0.0);
    if smax <= 0.0 {
        return Err(Error::InvalidArgument(String::from("S̄ has no positive directions")));
    }
    let kept: Vec<usize> = (0..m)
        .filter(|&i| s_eig.values[i] >= threshold * smax && s_eig.values[i] > 0.0)
        .collect();
    if kept.is_empty() {
        return Err(Error::InvalidArgument(String::from(
            "no S̄ directions survive the threshold",
        )));
    }
    let r = kept.len();
    let mut x = CMatrix::zeros(m, r);
    for (col, &i) in kept.iter().enumerate() {
        let scale = 1.0 / s_eig.values[i].sqrt();
        for row in 0..m {
            x[(row, col)] = s_eig.vectors[(row, i)] * scale;
        }
    }
    let reduced = x.adjoint().mul(hbar).mul(&x);
    let h_eig = hermitian_eigen(&reduced, 1e-13)?;

    let mut pairs: Vec<(f64, Vec<Complex64>)> = (0..r)
        .map(|j| {
            let mut w = vec![Complex64::new(0.0, 0.0); m];
            for row in 0..m {
                let mut acc = Complex64::new(0.0, 0.0);
                for col in 0..r {
                    acc += x[(row, col)] * h_eig.vectors[(col, j)];
                }
                w[row] = acc;
            }
            canonicalize_phase(&mut w);
            (h_eig.values[j], w)
        })
        .collect();

    pairs.sort_by(|a, b| {
        let tol = 1e-10 * (1.0 + a.0.abs().max(b.0.abs()));
        if (a.0 - b.0).abs() <= tol {
            lex_key(&a.1).cmp(&lex_key(&b.1))
        } else {
            a.0.partial_cmp(&b.0).expect("finite energies")
        }
    });

    Ok(GevpSolution {
        energies: pairs.iter().map(|(e, _)| *e).collect(),
        weights: pairs.into_iter().map(|(_, w)| w).collect(),
    })
}

fn canonicalize_phase(w: &mut [Complex64]) {
    let mut best = 0usize;
    let mut best_norm = 0.0;
    for (i, v) in w.iter().enumerate() {
        if v.norm() > best_norm + 1e-12 {
            best_norm = v.norm();
            best = i;
        }
    }
    if best_norm > 0.0 {
        let phase = w[best] / best_norm;
        for v in w.iter_mut() {
            *v *= phase.conj();
        }
    }
}

fn lex_key(w: &[Complex64]) -> Vec<i64> {
    w.iter()
        .flat_map(|v| [(v.re * 1e9).round() as i64, (v.im * 1e9).round() as i64])
        .collect()
}

/// The effective expanded state Γ_w ρ Γ_w† / Tr[Γ_w ρ Γ_w†].
pub fn expanded_state(
    rho: &DensityMatrix,
    basis: &ExpansionBasis,
    weights: &[Complex64],
) -> Result<DensityMatrix> {
    if weights.len() != basis.len() {
        return Err(Error::DimensionMismatch { expected: basis.len(), got: weights.len() });
    }
    let dim = 1usize << basis.n_qubits;
    let mut gamma = CMatrix::zeros(dim, dim);
    for (w, g) in weights.iter().zip(basis.ops()) {
        for i in 0..dim {
            for j in 0..dim {
                gamma[(i, j)] += w * g[(i, j)];
            }
        }
    }
    let transformed = gamma.mul(rho.matrix()).mul(&gamma.adjoint());
    let norm = transformed.trace().re;
    if norm.abs() < 1e-14 {
        return Err(Error::InvalidArgument(format!("vanishing normalization {norm:e}")));
    }
    Ok(DensityMatrix::from_matrix_unchecked(
        basis.n_qubits,
        transformed.scale(Complex64::new(1.0 / norm, 0.0)),
    ))
}

/// Tr[O ρ_sub] for the expanded state.
pub fn expanded_expectation(
    rho: &DensityMatrix,
    obs: &Observable,
    basis: &ExpansionBasis,
    weights: &[Complex64],
) -> Result<f64> {
    expanded_state(rho, basis, weights)?.expectation(obs)
}

#[derive(Debug, Clone)]
pub struct SubspaceRun {
    pub report: EstimatorReport,
    pub energies: Vec<f64>,
    /// Set when the minimum GEVP energy undershoots the true ground energy
    /// of the Hamiltonian (possible for mixed ρ; reported, not corrected).
    pub below_true_ground: bool,
}

/// End-to-end subspace expansion: build matrices on the noisy state, solve,
/// and evaluate the observable on the ground-weight expanded state.
pub fn subspace_mitigate(
    circuit: &NoisyCircuit,
    obs: &Observable,
    hamiltonian: &Observable,
    basis: &ExpansionBasis,
    threshold: f64,
) -> Result<SubspaceRun> {
    let rho = circuit.run(1.0)?;
    let ideal = circuit.ideal_state()?.expectation(obs)?;
    subspace_mitigate_on_state(&rho, ideal, obs, hamiltonian, basis, threshold)
}

/// As `subspace_mitigate`, on an already-prepared noisy state.
pub fn subspace_mitigate_on_state(
    rho: &DensityMatrix,
    ideal: f64,
    obs: &Observable,
    hamiltonian: &Observable,
    basis: &ExpansionBasis,
    threshold: f64,
) -> Result<SubspaceRun> {
    let (hbar, sbar) = build_subspace_matrices(rho, hamiltonian, basis)?;
    let sol = solve_gevp(&hbar, &sbar, threshold)?;
    let value = expanded_expectation(rho, obs, basis, &sol.weights[0])?;

    let h_eig = hermitian_eigen(&hamiltonian.matrix(), 1e-13)?;
    let ground = h_eig.values[0];
    let below = sol.energies[0] < ground - 1e-9;

    Ok(SubspaceRun {
        report: EstimatorReport::exact(value, Some(ideal)),
        energies: sol.energies,
        below_true_ground: below,
    })
}
