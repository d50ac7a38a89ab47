//! Learning-based rescale-and-shift.
//!
//! Training circuits replace every single-qubit gate of the primary circuit
//! with random elements of the 24-element single-qubit Clifford group while
//! keeping every error channel and fault probability untouched, so the
//! variants see exactly the primary's fault distribution. A least-squares
//! fit of E0 ≈ θ0 + θ1·E on (ideal, noisy) training pairs then transfers to
//! the primary circuit; under global depolarizing noise the transfer is
//! exact because the fitted relation is exactly linear.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::circuit::{is_clifford, single_qubit_cliffords, NoisyCircuit};
use crate::error::{Error, Result};
use crate::matrix::CMatrix;
use crate::pauli::Observable;
use crate::rng::RngStream;
use crate::stats::EstimatorReport;

/// Training data: (ideal value, noisy value) pairs with circuit descriptors.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    pub pairs: Vec<(f64, f64)>,
    pub provenance: Vec<String>,
}

impl TrainingSet {
    pub fn new(pairs: Vec<(f64, f64)>, provenance: Vec<String>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::InvalidArgument(String::from("empty training set")));
        }
        Ok(TrainingSet { pairs, provenance })
    }

    /// Keep only the `k` circuits with the largest |ideal| values (the
    /// truncation heuristic; off by default in the pipeline).
    pub fn truncate_top(mut self, k: usize) -> Self {
        let mut order: Vec<usize> = (0..self.pairs.len()).collect();
        order.sort_by(|&a, &b| {
            self.pairs[b]
                .0
                .abs()
                .partial_cmp(&self.pairs[a].0.abs())
                .expect("finite values")
        });
        order.truncate(k.max(1));
        order.sort_unstable();
        self.pairs = order.iter().map(|&i| self.pairs[i]).collect();
        self.provenance = order
            .iter()
            .map(|&i| self.provenance.get(i).cloned().unwrap_or_default())
            .collect();
        self
    }
}

/// Check that every multi-qubit gate is Clifford (conjugation test on the
/// Pauli generators); single-qubit gates may be anything.
pub fn check_multiqubit_clifford(c: &NoisyCircuit) -> Result<()> {
    for (i, loc) in c.locations().iter().enumerate() {
        if loc.gate.targets.len() >= 2 && !is_clifford(&loc.gate.matrix) {
            return Err(Error::NonCliffordGate { location: i });
        }
    }
    Ok(())
}

/// Random Clifford variants of the primary circuit. Every single-qubit gate
/// is replaced by a uniformly random element of the 24-element group;
/// channels and fault probabilities are untouched, so each variant's fault
/// rate equals the primary's.
pub fn make_clifford_variants(
    c: &NoisyCircuit,
    count: usize,
    rng: &mut RngStream,
) -> Result<Vec<NoisyCircuit>> {
    check_multiqubit_clifford(c)?;
    let group = single_qubit_cliffords();
    let slots = c.single_qubit_slots();
    let mut variants = Vec::with_capacity(count);
    for _ in 0..count {
        let replacements: Vec<(usize, CMatrix)> = slots
            .iter()
            .map(|&slot| (slot, group[rng.next_below(group.len())].clone()))
            .collect();
        variants.push(c.with_single_qubit_gates(&replacements)?);
    }
    Ok(variants)
}

/// All 24 variants of a circuit with exactly one single-qubit gate slot
/// (exhaustive mode).
pub fn exhaustive_variants_single_slot(c: &NoisyCircuit) -> Result<Vec<NoisyCircuit>> {
    check_multiqubit_clifford(c)?;
    let slots = c.single_qubit_slots();
    if slots.len() != 1 {
        return Err(Error::InvalidArgument(format!(
            "exhaustive enumeration needs exactly one single-qubit slot, found {}",
            slots.len()
        )));
    }
    single_qubit_cliffords()
        .into_iter()
        .map(|g| c.with_single_qubit_gates(&[(slots[0], g)]))
        .collect()
}

/// Build (ideal, noisy) pairs for a set of variants. The noisy value comes
/// from the supplied evaluator so the caller controls the noise realization
/// and shot model; ideal values are noiseless-simulator expectations.
pub fn build_training_set<F>(
    variants: &[NoisyCircuit],
    obs: &Observable,
    mut noisy_eval: F,
) -> Result<TrainingSet>
where
    F: FnMut(&NoisyCircuit) -> Result<f64>,
{
    let mut pairs = Vec::with_capacity(variants.len());
    let mut provenance = Vec::with_capacity(variants.len());
    for (i, v) in variants.iter().enumerate() {
        let ideal = v.ideal_state()?.expectation(obs)?;
        let noisy = noisy_eval(v)?;
        pairs.push((ideal, noisy));
        provenance.push(format!("clifford-variant-{i}"));
    }
    TrainingSet::new(pairs, provenance)
}

/// Ordinary least squares for E0 = θ0 + θ1·E over the training pairs.
/// Degenerate designs (all noisy values equal) are rejected.
pub fn fit_rescale_shift(ts: &TrainingSet) -> Result<(f64, f64)> {
    if ts.pairs.len() < 2 {
        return Err(Error::TooFewSamples { got: ts.pairs.len(), need: 2 });
    }
    let n = ts.pairs.len() as f64;
    let mean_e: f64 = ts.pairs.iter().map(|(_, e)| e).sum::<f64>() / n;
    let mean_e0: f64 = ts.pairs.iter().map(|(e0, _)| e0).sum::<f64>() / n;
    let var_e: f64 = ts.pairs.iter().map(|(_, e)| (e - mean_e) * (e - mean_e)).sum();
    let cov: f64 = ts
        .pairs
        .iter()
        .map(|(e0, e)| (e - mean_e) * (e0 - mean_e0))
        .sum();
    if var_e < 1e-14 {
        return Err(Error::Singular(format!(
            "all noisy training values equal ({mean_e}); cannot fit a rescale"
        )));
    }
    let theta1 = cov / var_e;
    let theta0 = mean_e0 - theta1 * mean_e;
    Ok((theta0, theta1))
}

/// Closed-form global-depolarizing correction:
/// (noisy − (1−P0)·Tr[O]/2^N) / P0.
pub fn depolarizing_rescale(p0: f64, obs: &Observable, noisy_value: f64) -> Result<f64> {
    if !(p0 > 0.0 && p0 <= 1.0) {
        return Err(Error::InvalidProbability(p0));
    }
    let n = obs.n_qubits();
    let dim = (1u64 << n) as f64;
    // Tr[O] = 2^N × (identity coefficient); non-identity Paulis are traceless.
    let trace_o: f64 = obs
        .terms()
        .iter()
        .filter(|(_, p)| p.is_identity())
        .map(|(c, p)| c * p.phase().re * dim)
        .sum();
    Ok((noisy_value - (1.0 - p0) * trace_o / dim) / p0)
}

/// Solve Tr[ρ²] = P0²(1 − 2⁻ᴺ) + 2⁻ᴺ for the fault-free probability of the
/// global-depolarizing mixture ρ = P0·ρ0 + (1−P0)·I/2^N, taking the
/// nonnegative root. (Expanded: Tr[ρ²] = P0² + 2P0(1−P0)/2^N + (1−P0)²/2^N;
/// the maximally mixed floor is purity 2⁻ᴺ.)
pub fn purity_estimate_p0(purity: f64, n_qubits: usize) -> Result<f64> {
    let floor = 1.0 / (1u64 << n_qubits) as f64;
    if purity < floor - 1e-12 || purity > 1.0 + 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "purity {purity} outside [{floor}, 1]"
        )));
    }
    let ratio = ((purity - floor) / (1.0 - floor)).max(0.0);
    Ok(ratio.sqrt().min(1.0))
}

#[derive(Debug, Clone)]
pub struct LearnRun {
    pub report: EstimatorReport,
    pub theta0: f64,
    pub theta1: f64,
}

/// Fit on Clifford variants of the primary and apply θ to the primary's
/// noisy value. The evaluator supplies noisy values for the variants and
/// the primary alike.
pub fn learn_mitigate<F>(
    primary: &NoisyCircuit,
    obs: &Observable,
    train_count: usize,
    truncate_top: Option<usize>,
    seed: u64,
    mut noisy_eval: F,
) -> Result<LearnRun>
where
    F: FnMut(&NoisyCircuit) -> Result<f64>,
{
    let mut rng = RngStream::from_parts(seed, 0x1ea, 0);
    let variants = make_clifford_variants(primary, train_count, &mut rng)?;
    let mut ts = build_training_set(&variants, obs, &mut noisy_eval)?;
    if let Some(k) = truncate_top {
        ts = ts.truncate_top(k);
    }
    let (theta0, theta1) = fit_rescale_shift(&ts)?;
    let noisy_primary = noisy_eval(primary)?;
    let value = theta0 + theta1 * noisy_primary;
    let ideal = primary.ideal_state()?.expectation(obs)?;
    Ok(LearnRun {
        report: EstimatorReport::exact(value, Some(ideal)),
        theta0,
        theta1,
    })
}
