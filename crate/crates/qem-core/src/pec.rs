//! Probabilistic error cancellation.
//!
//! Each noisy location U_p = (1−p)U + pN is rewritten as
//! U = (1/(1−p))·U_p − (p/(1−p))·N U, a two-term quasiprobability over
//! operations the simulator can execute exactly. Sampling one term per
//! location with probability ∝ |α| and carrying the product of signs and
//! γ = Σ|α| factors gives an unbiased estimator of the ideal expectation.
//!
//! Non-Pauli location noise is Pauli-twirled first (the random-Pauli
//! compilation realizes the twirl exactly, so the executed ensemble is the
//! twirled circuit); the decomposition itself rejects untwirled channels.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::channel::{pauli_basis, Channel};
use crate::circuit::{Location, NoisyCircuit};
use crate::error::{Error, Result};
use crate::matrix::{CMatrix, RMatrix};
use crate::pauli::{Observable, PauliString};
use crate::rng::RngStream;
use crate::state::DensityMatrix;
use crate::stats::{AliasTable, EstimatorReport};
use crate::zne::sample_observable_once;
use crate::EvalMode;

/// Cap on exactly enumerated basis sequences.
pub const ENUMERATION_CAP: usize = 4096;

/// One executable basis operation: a unitary followed by a channel sequence.
#[derive(Debug, Clone)]
pub struct LocOp {
    pub unitary: CMatrix,
    pub targets: Vec<usize>,
    pub posts: Vec<Channel>,
}

impl LocOp {
    pub fn apply(&self, state: &DensityMatrix) -> Result<DensityMatrix> {
        let mut out = state.apply_unitary(&self.unitary, &self.targets)?;
        for post in &self.posts {
            out = post.apply_to(&out, &self.targets)?;
        }
        Ok(out)
    }

    /// Pauli transfer matrix of the whole operation on its local support.
    pub fn transfer(&self) -> Result<RMatrix> {
        let mut r = Channel::unitary(self.unitary.clone())?.transfer_matrix()?;
        for post in &self.posts {
            r = post.transfer_matrix()?.mul(&r);
        }
        Ok(r)
    }
}

/// Signed decomposition of an ideal operation over executable noisy ones.
#[derive(Debug, Clone)]
pub struct GateDecomposition {
    pub terms: Vec<(f64, LocOp)>,
    /// γ = Σ|α|, the one-norm paid per sampled location.
    pub gamma: f64,
}

impl GateDecomposition {
    fn from_terms(terms: Vec<(f64, LocOp)>) -> Self {
        let gamma = terms.iter().map(|(a, _)| a.abs()).sum();
        GateDecomposition { terms, gamma }
    }

    /// Σ α_n T(B_n), for checking against the ideal operation's transfer.
    pub fn combined_transfer(&self) -> Result<RMatrix> {
        let first = self.terms[0].1.transfer()?;
        let mut acc = RMatrix::zeros(first.rows(), first.cols());
        for (alpha, op) in &self.terms {
            let t = op.transfer()?;
            for i in 0..acc.rows() {
                for j in 0..acc.cols() {
                    acc[(i, j)] += alpha * t[(i, j)];
                }
            }
        }
        Ok(acc)
    }
}

/// Quasiprobability inverse of a stochastic Pauli channel over Pauli
/// insertions: diagonalize the Pauli transfer matrix (a Walsh–Hadamard-type
/// transform of the probabilities), invert the diagonal, transform back.
/// Each term executes the noisy channel followed by one Pauli.
pub fn invert_pauli_channel(ch: &Channel) -> Result<GateDecomposition> {
    let k = ch.n_qubits();
    if k > 2 {
        return Err(Error::TooManyQubits { n: k, cap: 2 });
    }
    let probs = ch.pauli_probs().ok_or_else(|| {
        Error::InvalidChannel(String::from("inverse needs a stochastic Pauli channel"))
    })?;
    let basis = pauli_basis(k);
    let count = basis.len();

    // Pauli fidelities f_b = Σ_k q_k χ(k, b).
    let mut fidelities = vec![0.0f64; count];
    for (bi, b) in basis.iter().enumerate() {
        for (p, q) in probs {
            fidelities[bi] += if p.commutes_with(b) { *q } else { -*q };
        }
    }
    for (bi, f) in fidelities.iter().enumerate() {
        if f.abs() < 1e-12 {
            return Err(Error::Singular(format!(
                "Pauli fidelity of {} is zero; channel not invertible",
                basis[bi].to_label()
            )));
        }
    }

    // Quasiprobabilities c_j = (1/4^k) Σ_b χ(j, b) / f_b.
    let mut terms = Vec::with_capacity(count);
    for j in &basis {
        let mut c = 0.0;
        for (bi, b) in basis.iter().enumerate() {
            let chi = if j.commutes_with(b) { 1.0 } else { -1.0 };
            c += chi / fidelities[bi];
        }
        c /= count as f64;
        if c.abs() < 1e-15 {
            continue;
        }
        let insertion = Channel::from_pauli_probs(k, vec![(*j, 1.0)])?;
        terms.push((
            c,
            LocOp {
                unitary: CMatrix::identity(1 << k),
                targets: (0..k).collect(),
                posts: vec![ch.clone(), insertion],
            },
        ));
    }
    Ok(GateDecomposition::from_terms(terms))
}

/// Pauli-twirl a location's error part if needed and return the effective
/// (p_f, Pauli error part) pair. Twirling may shift weight back onto the
/// identity, so the pair is re-split at the maximal identity coefficient.
fn effective_fault(loc: &Location) -> Result<Option<(f64, Channel)>> {
    let Some(fault) = &loc.fault else {
        return Ok(None);
    };
    if fault.p_f == 0.0 {
        return Ok(None);
    }
    let pauli_part = if fault.error_part.is_pauli() {
        fault.error_part.clone()
    } else {
        fault.error_part.pauli_twirl()?
    };
    // Recombine with the identity and split at maximal identity weight.
    let k = pauli_part.n_qubits();
    let mut combined: Vec<(PauliString, f64)> =
        vec![(PauliString::identity(k), 1.0 - fault.p_f)];
    for (p, q) in pauli_part.pauli_probs().expect("pauli form") {
        if p.is_identity() {
            combined[0].1 += fault.p_f * q;
        } else {
            combined.push((*p, fault.p_f * q));
        }
    }
    let full = Channel::from_pauli_probs(k, combined)?;
    let (p_f, error_part) = full.split_fault()?;
    if p_f == 0.0 {
        return Ok(None);
    }
    Ok(Some((p_f, error_part)))
}

fn two_term_decomposition(
    loc: &Location,
    p_f: f64,
    error_part: &Channel,
    residual_p: f64,
) -> Result<GateDecomposition> {
    if residual_p > p_f {
        return Err(Error::InvalidArgument(format!(
            "residual probability {residual_p} exceeds native {p_f}"
        )));
    }
    let k = loc.gate.targets.len();
    // Full noisy location channel: identity with 1−p, error part with p.
    let mut full: Vec<(PauliString, f64)> = vec![(PauliString::identity(k), 1.0 - p_f)];
    for (p, q) in error_part.pauli_probs().ok_or_else(|| {
        Error::InvalidChannel(String::from("decomposition needs Pauli noise; twirl first"))
    })? {
        full.push((*p, p_f * q));
    }
    let noisy_op = LocOp {
        unitary: loc.gate.matrix.clone(),
        targets: loc.gate.targets.clone(),
        posts: vec![Channel::from_pauli_probs(k, full)?],
    };
    let forced_error_op = LocOp {
        unitary: loc.gate.matrix.clone(),
        targets: loc.gate.targets.clone(),
        posts: vec![error_part.clone()],
    };
    let a1 = (1.0 - residual_p) / (1.0 - p_f);
    let a2 = (residual_p - p_f) / (1.0 - p_f);
    let mut terms = vec![(a1, noisy_op)];
    if a2 != 0.0 {
        terms.push((a2, forced_error_op));
    }
    Ok(GateDecomposition::from_terms(terms))
}

/// Decomposition of a location's ideal gate over its noisy implementations.
/// In the canonical stochastic-Pauli case γ = (1+p)/(1−p).
pub fn decompose_noisy_gate(loc: &Location) -> Result<GateDecomposition> {
    match &loc.fault {
        None => {
            let op = LocOp {
                unitary: loc.gate.matrix.clone(),
                targets: loc.gate.targets.clone(),
                posts: vec![],
            };
            Ok(GateDecomposition::from_terms(vec![(1.0, op)]))
        }
        Some(fault) => {
            if !fault.error_part.is_pauli() {
                return Err(Error::InvalidChannel(String::from(
                    "non-Pauli noise passed untwirled; apply pauli_twirl first",
                )));
            }
            match effective_fault(loc)? {
                None => decompose_noisy_gate(&Location { gate: loc.gate.clone(), fault: None }),
                Some((p_f, error_part)) => two_term_decomposition(loc, p_f, &error_part, 0.0),
            }
        }
    }
}

/// Product of per-location γ², the circuit-level sampling overhead.
pub fn circuit_overhead(c: &NoisyCircuit) -> Result<f64> {
    let mut acc = 1.0;
    for loc in c.locations() {
        let gamma = match effective_fault(loc)? {
            None => 1.0,
            Some((p_f, _)) => (1.0 + p_f) / (1.0 - p_f),
        };
        acc *= gamma * gamma;
    }
    Ok(acc)
}

/// Prepared per-location decompositions for repeated sampling.
pub struct PecSampler {
    n_qubits: usize,
    decomps: Vec<(GateDecomposition, AliasTable)>,
    gamma_total: f64,
}

impl PecSampler {
    /// Full cancellation: residual fault rate zero.
    pub fn new(c: &NoisyCircuit) -> Result<Self> {
        Self::with_residual_fraction(c, 0.0)
    }

    /// Partial cancellation: each location keeps `fraction` of its fault
    /// probability, so the residual circuit fault rate is fraction·λ.
    pub fn with_residual_fraction(c: &NoisyCircuit, fraction: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&fraction) {
            return Err(Error::InvalidArgument(format!("residual fraction {fraction}")));
        }
        let mut decomps = Vec::with_capacity(c.locations().len());
        let mut gamma_total = 1.0;
        for loc in c.locations() {
            let decomp = match effective_fault(loc)? {
                None => decompose_noisy_gate(&Location { gate: loc.gate.clone(), fault: None })?,
                Some((p_f, error_part)) => {
                    two_term_decomposition(loc, p_f, &error_part, fraction * p_f)?
                }
            };
            gamma_total *= decomp.gamma;
            let weights: Vec<f64> = decomp.terms.iter().map(|(a, _)| a.abs()).collect();
            let alias = AliasTable::new(&weights)?;
            decomps.push((decomp, alias));
        }
        Ok(PecSampler { n_qubits: c.n_qubits(), decomps, gamma_total })
    }

    /// Π γ_m over locations.
    pub fn gamma_total(&self) -> f64 {
        self.gamma_total
    }

    /// Predicted sampling overhead Π γ_m².
    pub fn predicted_overhead(&self) -> f64 {
        self.gamma_total * self.gamma_total
    }

    /// One shot: sample a basis term per location, run, measure, and scale
    /// by the product of signs and γ_total. Fully determined by
    /// (seed, shot index).
    pub fn shot_value(&self, obs: &Observable, seed: u64, index: u64) -> Result<f64> {
        let mut rng = RngStream::from_parts(seed, 0x9ec, index);
        let mut state = DensityMatrix::zero_state(self.n_qubits)?;
        let mut sign = 1.0;
        for (decomp, alias) in &self.decomps {
            let idx = alias.sample(&mut rng);
            let (alpha, op) = &decomp.terms[idx];
            if *alpha < 0.0 {
                sign = -sign;
            }
            state = op.apply(&state)?;
        }
        let shot = sample_observable_once(&state, obs, obs.coefficient_bound(), &mut rng)?;
        Ok(self.gamma_total * sign * shot)
    }

    /// Exact expectation of the full signed mixture by enumerating every
    /// basis sequence; guarded by `ENUMERATION_CAP`.
    pub fn exact_value(&self, obs: &Observable) -> Result<f64> {
        let mut branches = 1usize;
        for (decomp, _) in &self.decomps {
            branches = branches.saturating_mul(decomp.terms.len());
            if branches > ENUMERATION_CAP {
                return Err(Error::EnumerationTooLarge {
                    branches,
                    cap: ENUMERATION_CAP,
                });
            }
        }
        let init = DensityMatrix::zero_state(self.n_qubits)?;
        self.enumerate(0, &init, 1.0, obs)
    }

    fn enumerate(
        &self,
        depth: usize,
        state: &DensityMatrix,
        weight: f64,
        obs: &Observable,
    ) -> Result<f64> {
        if depth == self.decomps.len() {
            return Ok(weight * state.expectation(obs)?);
        }
        let mut acc = 0.0;
        for (alpha, op) in &self.decomps[depth].0.terms {
            let next = op.apply(state)?;
            acc += self.enumerate(depth + 1, &next, weight * alpha, obs)?;
        }
        Ok(acc)
    }
}

#[derive(Debug, Clone)]
pub struct PecRun {
    pub report: EstimatorReport,
    pub gamma: f64,
    pub predicted_overhead: f64,
}

/// Full probabilistic error cancellation of a circuit.
pub fn pec_mitigate(
    c: &NoisyCircuit,
    obs: &Observable,
    mode: EvalMode,
    shots: u64,
    seed: u64,
) -> Result<PecRun> {
    run_sampler(PecSampler::new(c)?, c, obs, mode, shots, seed)
}

/// Partial cancellation down to the target circuit fault rate; the residual
/// estimator is unbiased for a circuit run at λ_target.
pub fn partial_pec(
    c: &NoisyCircuit,
    obs: &Observable,
    lambda_target: f64,
    mode: EvalMode,
    shots: u64,
    seed: u64,
) -> Result<PecRun> {
    let lambda = c.fault_rate();
    if lambda_target < 0.0 || lambda_target > lambda + 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "target fault rate {lambda_target} outside [0, {lambda}]"
        )));
    }
    let fraction = if lambda == 0.0 { 0.0 } else { lambda_target / lambda };
    run_sampler(
        PecSampler::with_residual_fraction(c, fraction)?,
        c,
        obs,
        mode,
        shots,
        seed,
    )
}

fn run_sampler(
    sampler: PecSampler,
    c: &NoisyCircuit,
    obs: &Observable,
    mode: EvalMode,
    shots: u64,
    seed: u64,
) -> Result<PecRun> {
    let ideal = c.ideal_state()?.expectation(obs)?;
    let report = match mode {
        EvalMode::Exact => EstimatorReport::exact(sampler.exact_value(obs)?, Some(ideal)),
        EvalMode::Sampled => {
            let mut samples = Vec::with_capacity(shots as usize);
            for i in 0..shots {
                samples.push(sampler.shot_value(obs, seed, i)?);
            }
            EstimatorReport::from_samples(&samples, Some(ideal))?
        }
    };
    Ok(PecRun {
        report,
        gamma: sampler.gamma_total(),
        predicted_overhead: sampler.predicted_overhead(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::gates;

    #[test]
    fn invert_identity_channel_is_trivial() {
        let ch = Channel::identity(1);
        let d = invert_pauli_channel(&ch).unwrap();
        assert_eq!(d.terms.len(), 1);
        assert!((d.gamma - 1.0).abs() < 1e-12);
    }

    #[test]
    fn invert_dephasing_closed_form() {
        // Inverse of Z-with-probability-p: {(1−p)/(1−2p) I, −p/(1−2p) Z},
        // γ = 1/(1−2p). Verified by 2×2 linear-system arithmetic.
        let p = 0.1;
        let ch = Channel::dephasing(p).unwrap();
        let d = invert_pauli_channel(&ch).unwrap();
        assert!((d.gamma - 1.0 / (1.0 - 2.0 * p)).abs() < 1e-12);
        let mut coeffs: Vec<f64> = d.terms.iter().map(|(a, _)| *a).collect();
        coeffs.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert!((coeffs[0] - 0.9 / 0.8).abs() < 1e-12);
        assert!((coeffs[1] + 0.1 / 0.8).abs() < 1e-12);

        // Applying the channel then the sampled inverse is the identity in
        // expectation: Σ c_k T(P_k ∘ ch) = I (brute-force transfer check).
        let combined = d.combined_transfer().unwrap();
        assert!(combined.max_abs_diff(&RMatrix::identity(4)) < 1e-8);
    }

    #[test]
    fn invert_depolarizing_matches_brute_force() {
        // γ from the transfer-diagonal inverse of depolarizing-(I/2) p.
        // Brute force gives (2+p)/(2(1−p)); this equals the two-term form
        // (1+p')/(1−p') at the rewriting p' = 3p/(4−p).
        let p = 0.1;
        let ch = Channel::depolarizing(1, p).unwrap();
        let d = invert_pauli_channel(&ch).unwrap();

        // Independent brute force: numerically invert the 4×4 transfer
        // matrix and solve for quasiprobabilities over Pauli conjugations.
        let r = ch.transfer_matrix().unwrap();
        let basis = pauli_basis(1);
        // R is diagonal; the inverse diagonal is 1/f. Solve M c = g where
        // M[b][k] = χ(k,b) and g[b] = 1/f_b.
        let mut m = RMatrix::zeros(4, 4);
        for (bi, b) in basis.iter().enumerate() {
            for (ki, k) in basis.iter().enumerate() {
                m[(bi, ki)] = if k.commutes_with(b) { 1.0 } else { -1.0 };
            }
        }
        let g: Vec<f64> = (0..4).map(|bi| 1.0 / r[(bi, bi)]).collect();
        let lu = crate::linalg::Lu::factor(&m).unwrap();
        let c = lu.solve(&g);
        let gamma_brute: f64 = c.iter().map(|v| v.abs()).sum();

        assert!((d.gamma - gamma_brute).abs() < 1e-10);
        assert!((gamma_brute - (2.0 + p) / (2.0 * (1.0 - p))).abs() < 1e-12);
        let p_eff = 3.0 * p / (4.0 - p);
        assert!((gamma_brute - (1.0 + p_eff) / (1.0 - p_eff)).abs() < 1e-12);

        let combined = d.combined_transfer().unwrap();
        assert!(combined.max_abs_diff(&RMatrix::identity(4)) < 1e-8);
    }

    #[test]
    fn invert_rejects_singular_fidelity() {
        // Dephasing at p = 1/2 has zero X/Y fidelities.
        let ch = Channel::dephasing(0.5).unwrap();
        assert!(matches!(invert_pauli_channel(&ch), Err(Error::Singular(_))));
    }

    fn noisy_location(p: f64) -> Location {
        Location {
            gate: crate::circuit::Gate::new("h", gates::h(), &[0]).unwrap(),
            fault: Some(crate::circuit::Fault {
                error_part: Channel::pauli_mixture(1, &[("Z", 1.0)]).unwrap(),
                p_f: p,
            }),
        }
    }

    #[test]
    fn gate_decomposition_gammas() {
        // p = 0 → γ = 1; p = 0.01 → γ² ≈ 1.0406; p = 0.5 → γ² = 9.
        let clean = Location {
            gate: crate::circuit::Gate::new("h", gates::h(), &[0]).unwrap(),
            fault: None,
        };
        assert!((decompose_noisy_gate(&clean).unwrap().gamma - 1.0).abs() < 1e-15);

        let d = decompose_noisy_gate(&noisy_location(0.01)).unwrap();
        assert!((d.gamma * d.gamma - 1.0406).abs() < 1e-3);
        assert!((d.gamma * d.gamma - (1.01f64 / 0.99).powi(2)).abs() < 1e-12);

        let d5 = decompose_noisy_gate(&noisy_location(0.5)).unwrap();
        assert!((d5.gamma * d5.gamma - 9.0).abs() < 1e-12);
    }

    #[test]
    fn decomposition_transfer_matches_ideal_gate() {
        // Σ α_n T(B_n) = T(ideal) entrywise.
        for p in [0.02, 0.1, 0.3] {
            let loc = noisy_location(p);
            let d = decompose_noisy_gate(&loc).unwrap();
            let ideal = Channel::unitary(gates::h()).unwrap().transfer_matrix().unwrap();
            assert!(d.combined_transfer().unwrap().max_abs_diff(&ideal) < 1e-8);
            assert!(d.gamma >= 1.0);
        }
    }

    #[test]
    fn untwirled_kraus_noise_is_rejected_by_decompose() {
        let loc = Location {
            gate: crate::circuit::Gate::new("h", gates::h(), &[0]).unwrap(),
            fault: Some(crate::circuit::Fault {
                error_part: Channel::coherent_z(0.2),
                p_f: 0.1,
            }),
        };
        assert!(matches!(
            decompose_noisy_gate(&loc),
            Err(Error::InvalidChannel(_))
        ));
    }

    fn dephasing_chain(n_qubits: usize, locs: usize, p: f64) -> NoisyCircuit {
        let mut c = NoisyCircuit::new(n_qubits).unwrap();
        let zerr = Channel::pauli_mixture(1, &[("Z", 1.0)]).unwrap();
        c.gate("h", gates::h(), &[0]).unwrap();
        if n_qubits == 2 {
            c.gate("cnot", gates::cnot(), &[0, 1]).unwrap();
        }
        for i in 0..locs {
            c.noisy_gate("i", gates::identity1(), &[i % n_qubits], zerr.clone(), p).unwrap();
        }
        c
    }

    #[test]
    fn circuit_overhead_product_vs_exponential() {
        // 100 locations at p = 0.01: Π((1.01/0.99)²) ≈ 54.6, within 0.1% of e⁴.
        let c = dephasing_chain(1, 100, 0.01);
        let got = circuit_overhead(&c).unwrap();
        let product = (1.01f64 / 0.99).powi(200);
        assert!((got - product).abs() < 1e-9);
        let e4 = 4.0f64.exp();
        assert!((got - e4).abs() / e4 < 1e-3);

        // Noiseless circuit → 1.
        let mut clean = NoisyCircuit::new(1).unwrap();
        clean.gate("h", gates::h(), &[0]).unwrap();
        assert_eq!(circuit_overhead(&clean).unwrap(), 1.0);
    }

    #[test]
    fn extreme_rate_exceeds_postselection_floor() {
        // λ = 5: PEC pays e^{20}, strictly above the ideal post-selection
        // floor e^{5} ≈ 150.
        let c = dephasing_chain(1, 100, 0.05);
        let overhead = circuit_overhead(&c).unwrap();
        let floor = 5.0f64.exp();
        assert!((floor - 148.413).abs() < 0.1);
        assert!(overhead > 20.0f64.exp() * 0.9);
        assert!(overhead > floor);
    }

    #[test]
    fn exact_enumeration_is_unbiased_and_raw_is_not() {
        // 2-qubit, 5-location dephasing circuit at p = 0.05: all 2^5 basis
        // sequences enumerated with exact weights.
        let c = dephasing_chain(2, 5, 0.05);
        let xx = Observable::from_label("XX").unwrap();
        let ideal = c.ideal_state().unwrap().expectation(&xx).unwrap();
        let run = pec_mitigate(&c, &xx, EvalMode::Exact, 0, 1).unwrap();
        assert!(
            (run.report.mean - ideal).abs() <= 1e-9,
            "pec bias {}",
            run.report.mean - ideal
        );
        let raw = c.run(1.0).unwrap().expectation(&xx).unwrap();
        assert!((raw - ideal).abs() > 0.01, "raw bias too small");
    }

    #[test]
    fn exact_enumeration_cancels_twirled_coherent_noise() {
        // Coherent Z over-rotations are twirled to dephasing before
        // decomposition; the executed (twirled) ensemble is cancelled exactly.
        let mut c = NoisyCircuit::new(1).unwrap();
        c.gate("h", gates::h(), &[0]).unwrap();
        c.noisy_gate("i", gates::identity1(), &[0], Channel::coherent_z(0.9), 0.2).unwrap();
        let x = Observable::from_label("X").unwrap();
        let run = pec_mitigate(&c, &x, EvalMode::Exact, 0, 1).unwrap();
        assert!(run.report.bias.unwrap().abs() < 1e-9);
    }

    #[test]
    fn enumeration_guard_trips() {
        let c = dephasing_chain(1, 13, 0.01);
        let z = Observable::from_label("Z").unwrap();
        assert!(matches!(
            pec_mitigate(&c, &z, EvalMode::Exact, 0, 1),
            Err(Error::EnumerationTooLarge { .. })
        ));
    }

    #[test]
    fn sampled_pec_within_four_sigma() {
        let c = dephasing_chain(2, 5, 0.05);
        let xx = Observable::from_label("XX").unwrap();
        let ideal = c.ideal_state().unwrap().expectation(&xx).unwrap();
        let shots = 200_000;
        let run = pec_mitigate(&c, &xx, EvalMode::Sampled, shots, 42).unwrap();
        let sigma = (run.report.variance / shots as f64).sqrt();
        assert!(
            (run.report.mean - ideal).abs() < 4.0 * sigma,
            "mean {} ideal {ideal} sigma {sigma}",
            run.report.mean
        );
    }

    #[test]
    fn partial_pec_matches_reduced_rate_circuit() {
        // target = λ → no-op (raw noisy value); target = 0 → full PEC;
        // intermediate targets reproduce the circuit run at the reduced rate.
        let c = dephasing_chain(2, 4, 0.08);
        let xx = Observable::from_label("XX").unwrap();
        let lambda = c.fault_rate();

        let noop = partial_pec(&c, &xx, lambda, EvalMode::Exact, 0, 1).unwrap();
        let raw = c.run(1.0).unwrap().expectation(&xx).unwrap();
        assert!((noop.report.mean - raw).abs() < 1e-12);
        assert!((noop.gamma - 1.0).abs() < 1e-12);

        let full = partial_pec(&c, &xx, 0.0, EvalMode::Exact, 0, 1).unwrap();
        let ideal = c.ideal_state().unwrap().expectation(&xx).unwrap();
        assert!((full.report.mean - ideal).abs() < 1e-9);

        let half = partial_pec(&c, &xx, lambda / 2.0, EvalMode::Exact, 0, 1).unwrap();
        let reduced = c.run(0.5).unwrap().expectation(&xx).unwrap();
        assert!((half.report.mean - reduced).abs() < 1e-10);
    }

    #[test]
    fn partial_pec_overhead_tracks_exponential_law() {
        // λ = 1 over 100 gates, target 0.5λ: predicted Πγ² ≈ e^{4·0.5} = e².
        let c = dephasing_chain(1, 100, 0.01);
        let sampler = PecSampler::with_residual_fraction(&c, 0.5).unwrap();
        let want = 2.0f64.exp();
        assert!(
            (sampler.predicted_overhead() - want).abs() / want < 0.05,
            "overhead {} vs {want}",
            sampler.predicted_overhead()
        );
        let z = Observable::from_label("Z").unwrap();
        assert!(partial_pec(&c, &z, 2.0, EvalMode::Exact, 0, 1).is_err());
    }
}
