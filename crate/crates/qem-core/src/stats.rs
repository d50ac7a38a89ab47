//! Estimator bookkeeping and Monte Carlo sampling of signed mixtures.
//!
//! Variance conventions: `EstimatorReport.variance` is always the per-shot
//! (single-circuit-run) variance; the variance of the reported mean is
//! `variance / n_shots`. Overhead comparisons between methods use per-shot
//! variances. Reductions use pairwise summation so results do not depend on
//! the order shots were collected in.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::state::DensityMatrix;
#[allow(unused_imports)]
use num_traits::Float;

/// Pairwise (cascade) summation.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
        }
    }
}

/// Pairwise mean and unbiased sample variance.
pub fn mean_and_variance(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    let mean = pairwise_sum(values) / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = pairwise_sum(&sq) / (n as f64 - 1.0);
    (mean, var)
}

/// Summary of one estimation run.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorReport {
    pub mean: f64,
    /// Per-shot variance.
    pub variance: f64,
    pub n_shots: u64,
    pub reference: Option<f64>,
    pub bias: Option<f64>,
    pub mse: Option<f64>,
}

impl EstimatorReport {
    /// Summarize raw per-shot samples (the spec's `summarize` operation).
    pub fn from_samples(samples: &[f64], reference: Option<f64>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::TooFewSamples { got: samples.len(), need: 2 });
        }
        let (mean, variance) = mean_and_variance(samples);
        Ok(Self::from_moments(mean, variance, samples.len() as u64, reference))
    }

    /// Build from already-reduced moments (per-shot variance).
    pub fn from_moments(mean: f64, variance: f64, n_shots: u64, reference: Option<f64>) -> Self {
        let bias = reference.map(|r| mean - r);
        let mse = bias.map(|b| b * b + variance / n_shots as f64);
        EstimatorReport { mean, variance, n_shots, reference, bias, mse }
    }

    /// Deterministic (exact-mode) result: zero variance, one nominal shot.
    pub fn exact(value: f64, reference: Option<f64>) -> Self {
        Self::from_moments(value, 0.0, 1, reference)
    }
}

/// Sampling overhead as a variance ratio, Var[em] / Var[raw].
pub fn sampling_overhead(var_em: f64, var_raw: f64) -> Result<f64> {
    if var_raw <= 0.0 {
        return Err(Error::InvalidArgument(format!("nonpositive raw variance {var_raw}")));
    }
    Ok(var_em / var_raw)
}

/// Hoeffding sample count: ceil( ln(2/δ) · range² / (2ε²) ).
pub fn hoeffding_samples(range: f64, epsilon: f64, delta: f64) -> Result<u64> {
    if range < 0.0 || epsilon <= 0.0 || delta <= 0.0 || delta >= 1.0 {
        return Err(Error::InvalidArgument(format!(
            "bad Hoeffding inputs range={range} eps={epsilon} delta={delta}"
        )));
    }
    let raw = (2.0 / delta).ln() * range * range / (2.0 * epsilon * epsilon);
    Ok(raw.ceil() as u64)
}

/// O(1) categorical sampling (Vose alias method).
#[derive(Debug, Clone)]
pub struct AliasTable {
    prob: Vec<f64>,
    alias: Vec<usize>,
}

impl AliasTable {
    pub fn new(weights: &[f64]) -> Result<Self> {
        let n = weights.len();
        if n == 0 {
            return Err(Error::EmptyMix);
        }
        let total: f64 = weights.iter().sum();
        // NaN-safe positivity guard.
        if total.partial_cmp(&0.0) != Some(core::cmp::Ordering::Greater)
            || weights.iter().any(|w| *w < 0.0)
        {
            return Err(Error::InvalidArgument(format!("bad weight vector (sum {total})")));
        }
        let mut prob: Vec<f64> = weights.iter().map(|w| w * n as f64 / total).collect();
        let mut alias = alloc::vec![0usize; n];
        let mut small: Vec<usize> = Vec::new();
        let mut large: Vec<usize> = Vec::new();
        for (i, p) in prob.iter().enumerate() {
            if *p < 1.0 {
                small.push(i);
            } else {
                large.push(i);
            }
        }
        while let (Some(s), Some(l)) = (small.pop(), large.pop()) {
            alias[s] = l;
            prob[l] = prob[l] + prob[s] - 1.0;
            if prob[l] < 1.0 {
                small.push(l);
            } else {
                large.push(l);
            }
        }
        for i in small.into_iter().chain(large) {
            prob[i] = 1.0;
        }
        Ok(AliasTable { prob, alias })
    }

    pub fn sample(&self, rng: &mut RngStream) -> usize {
        let i = rng.next_below(self.prob.len());
        if rng.next_f64() < self.prob[i] {
            i
        } else {
            self.alias[i]
        }
    }

    pub fn len(&self) -> usize {
        self.prob.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prob.is_empty()
    }
}

/// One executable branch of a signed mixture: produces a single shot value.
pub trait Variant {
    fn eval(&self, rng: &mut RngStream) -> f64;
}

impl<F: Fn(&mut RngStream) -> f64> Variant for F {
    fn eval(&self, rng: &mut RngStream) -> f64 {
        self(rng)
    }
}

/// A signed weighted collection of executable variants representing
/// Σ_n α_n E[variant_n].
pub struct QuasiMix<V: Variant> {
    terms: Vec<(f64, V)>,
    one_norm: f64,
    alias: AliasTable,
}

impl<V: Variant> QuasiMix<V> {
    pub fn new(terms: Vec<(f64, V)>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::EmptyMix);
        }
        let weights: Vec<f64> = terms.iter().map(|(a, _)| a.abs()).collect();
        let one_norm: f64 = weights.iter().sum();
        if one_norm.partial_cmp(&0.0) != Some(core::cmp::Ordering::Greater) {
            return Err(Error::InvalidArgument(format!("mix one-norm {one_norm}")));
        }
        let alias = AliasTable::new(&weights)?;
        Ok(QuasiMix { terms, one_norm, alias })
    }

    /// A = Σ|α_n|.
    pub fn one_norm(&self) -> f64 {
        self.one_norm
    }

    pub fn terms(&self) -> &[(f64, V)] {
        &self.terms
    }

    /// Monte Carlo sampling overhead C = A².
    pub fn overhead(&self) -> f64 {
        self.one_norm * self.one_norm
    }

    /// Naive term-by-term cost K·Σ|α|² (Cauchy–Schwarz upper route).
    pub fn naive_overhead(&self) -> f64 {
        let k = self.terms.len() as f64;
        k * self.terms.iter().map(|(a, _)| a * a).sum::<f64>()
    }

    /// One sample: draw term n with probability |α_n|/A, evaluate it, and
    /// scale by A·sign(α_n).
    pub fn sample_one(&self, rng: &mut RngStream) -> f64 {
        let idx = self.alias.sample(rng);
        let (alpha, variant) = &self.terms[idx];
        let sign = if *alpha >= 0.0 { 1.0 } else { -1.0 };
        self.one_norm * sign * variant.eval(rng)
    }

    /// Counter-split shot loop: shot i is fully determined by
    /// (seed, stream, i), independent of evaluation order.
    pub fn sample_shots(&self, shots: u64, seed: u64, stream: u64) -> Vec<f64> {
        (0..shots)
            .map(|i| {
                let mut rng = RngStream::from_parts(seed, stream, i);
                self.sample_one(&mut rng)
            })
            .collect()
    }
}

/// Fidelity improvement Tr[ρ0 ρ_em] / Tr[ρ0 ρ] for a pure ideal state.
pub fn fidelity_boost(
    rho_em: &DensityMatrix,
    rho: &DensityMatrix,
    rho0: &DensityMatrix,
) -> Result<f64> {
    if (rho0.purity() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidState(format!(
            "reference state is not pure (purity {})",
            rho0.purity()
        )));
    }
    let denom = rho0.overlap(rho)?;
    if denom.abs() < 1e-15 {
        return Err(Error::InvalidArgument(format!("vanishing base fidelity {denom:e}")));
    }
    Ok(rho0.overlap(rho_em)? / denom)
}

/// How the error-mitigated state is extracted: direct post-selection or
/// post-processing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtractionMode {
    PostSelect,
    PostProcess,
}

/// Extraction rate: boost/overhead for post-selection, boost/√overhead for
/// post-processing.
pub fn extraction_rate(boost: f64, overhead: f64, mode: ExtractionMode) -> Result<f64> {
    if overhead < 1.0 {
        return Err(Error::InvalidArgument(format!("overhead {overhead} below 1")));
    }
    Ok(match mode {
        ExtractionMode::PostSelect => boost / overhead,
        ExtractionMode::PostProcess => boost / overhead.sqrt(),
    })
}

/// Upper bound on the mitigated bias: 2‖O‖∞ √(1 − F(ρ0, ρ_em)).
/// F below 0 is clamped (quasi-states can overshoot 1).
pub fn bias_fidelity_bound(norm_inf: f64, fidelity: f64) -> f64 {
    2.0 * norm_inf * (1.0 - fidelity).max(0.0).sqrt()
}
