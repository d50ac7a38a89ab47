//! Zero-noise extrapolation: probe boosted noise levels, fit, read off the
//! zero-noise intercept.
//!
//! Boosting is exact in simulation: every location's fault probability is
//! multiplied by the node's scale factor, leaving the error model untouched.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::circuit::NoisyCircuit;
use crate::error::{Error, Result};
use crate::matrix::RMatrix;
use crate::pauli::Observable;
use crate::rng::RngStream;
use crate::state::{sample_shot, DensityMatrix};
use crate::stats::{mean_and_variance, EstimatorReport};
use crate::EvalMode;

/// Extrapolation model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZneModel {
    /// Polynomial interpolation through all nodes, evaluated at zero.
    Richardson,
    /// Least-squares polynomial of the given degree.
    Polynomial(usize),
    /// value = a·e^{−bλ} via log-linear regression on |value|.
    Exponential,
}

#[derive(Debug, Clone)]
pub struct ZneConfig {
    /// Noise scales, strictly increasing, first node ≥ 1 (the native level).
    pub nodes: Vec<f64>,
    pub model: ZneModel,
    pub shots_per_node: u64,
}

impl ZneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nodes.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 nodes, got {}",
                self.nodes.len()
            )));
        }
        if self.nodes[0] < 1.0 {
            return Err(Error::InvalidArgument(format!(
                "first node {} is below the native noise level",
                self.nodes[0]
            )));
        }
        for w in self.nodes.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::InvalidArgument(format!(
                    "nodes not strictly increasing at {} → {}",
                    w[0], w[1]
                )));
            }
        }
        if let ZneModel::Polynomial(degree) = self.model {
            if self.nodes.len() < degree + 1 {
                return Err(Error::InvalidArgument(format!(
                    "degree-{degree} polynomial needs {} nodes",
                    degree + 1
                )));
            }
        }
        Ok(())
    }
}

/// Richardson weights γ_m = Π_{k≠m} λ_k/(λ_k − λ_m); they sum to 1.
/// A single node degenerates to the passthrough coefficient 1.
pub fn richardson_coefficients(nodes: &[f64]) -> Result<Vec<f64>> {
    if nodes.is_empty() {
        return Err(Error::InvalidArgument(String::from("no nodes")));
    }
    for (i, a) in nodes.iter().enumerate() {
        if *a == 0.0 {
            return Err(Error::InvalidArgument(format!("node {i} is zero")));
        }
        for b in &nodes[..i] {
            if (a - b).abs() < 1e-14 {
                return Err(Error::InvalidArgument(format!("duplicate node {a}")));
            }
        }
    }
    Ok((0..nodes.len())
        .map(|m| {
            nodes
                .iter()
                .enumerate()
                .filter(|(k, _)| *k != m)
                .map(|(_, lk)| lk / (lk - nodes[m]))
                .product()
        })
        .collect())
}

/// Monte Carlo sampling overhead (Σ|γ_m|)² of the Richardson combination.
pub fn richardson_overhead(nodes: &[f64]) -> Result<f64> {
    let gammas = richardson_coefficients(nodes)?;
    let one_norm: f64 = gammas.iter().map(|g| g.abs()).sum();
    Ok(one_norm * one_norm)
}

/// Least-squares fit of value = a·e^{−bλ} by linear regression of ln|value|
/// on λ. All values must share one sign and be nonzero; the sign is restored
/// on `a`. Mixed-sign data is rejected rather than guessed.
pub fn fit_exponential(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    if points.len() < 2 {
        return Err(Error::TooFewSamples { got: points.len(), need: 2 });
    }
    let sign = if points[0].1 > 0.0 {
        1.0
    } else if points[0].1 < 0.0 {
        -1.0
    } else {
        return Err(Error::InvalidArgument(format!("zero value at λ = {}", points[0].0)));
    };
    for (l, v) in points {
        if *v == 0.0 || v.signum() != sign {
            return Err(Error::InvalidArgument(format!(
                "exponential fit needs same-sign nonzero values (λ = {l}, value = {v})"
            )));
        }
    }
    // Ordinary least squares of ln|v| = α − bλ.
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|(l, _)| l).sum();
    let sy: f64 = points.iter().map(|(_, v)| v.abs().ln()).sum();
    let sxx: f64 = points.iter().map(|(l, _)| l * l).sum();
    let sxy: f64 = points.iter().map(|(l, v)| l * v.abs().ln()).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-14 {
        return Err(Error::Singular(String::from("degenerate λ design")));
    }
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    Ok((sign * intercept.exp(), -slope))
}

/// Least-squares polynomial fit; returns coefficients ascending in degree.
pub fn fit_polynomial(points: &[(f64, f64)], degree: usize) -> Result<Vec<f64>> {
    let n = points.len();
    let p = degree + 1;
    if n < p {
        return Err(Error::TooFewSamples { got: n, need: p });
    }
    // Normal equations on the Vandermonde design.
    let mut ata = RMatrix::zeros(p, p);
    let mut aty = vec![0.0; p];
    for (x, y) in points {
        let mut powers = vec![1.0; 2 * degree + 1];
        for k in 1..powers.len() {
            powers[k] = powers[k - 1] * x;
        }
        for i in 0..p {
            aty[i] += y * powers[i];
            for j in 0..p {
                ata[(i, j)] += powers[i + j];
            }
        }
    }
    let lu = crate::linalg::Lu::factor(&ata)?;
    Ok(lu.solve(&aty))
}

/// Weights w such that the degree-`degree` least-squares value at λ = 0 is
/// Σ w_m y_m; used for variance propagation.
fn polynomial_zero_weights(lambdas: &[f64], degree: usize) -> Result<Vec<f64>> {
    let p = degree + 1;
    let mut ata = RMatrix::zeros(p, p);
    for x in lambdas {
        let mut powers = vec![1.0; 2 * degree + 1];
        for k in 1..powers.len() {
            powers[k] = powers[k - 1] * x;
        }
        for i in 0..p {
            for j in 0..p {
                ata[(i, j)] += powers[i + j];
            }
        }
    }
    let lu = crate::linalg::Lu::factor(&ata)?;
    let mut e0 = vec![0.0; p];
    e0[0] = 1.0;
    let z = lu.solve(&e0);
    Ok(lambdas
        .iter()
        .map(|x| {
            let mut pow = 1.0;
            let mut acc = 0.0;
            for zj in &z {
                acc += zj * pow;
                pow *= x;
            }
            acc
        })
        .collect())
}

/// Extrapolate a set of (λ, value) points to λ = 0 under the given model.
pub fn extrapolate_to_zero(points: &[(f64, f64)], model: ZneModel) -> Result<f64> {
    match model {
        ZneModel::Richardson => {
            let nodes: Vec<f64> = points.iter().map(|(l, _)| *l).collect();
            let gammas = richardson_coefficients(&nodes)?;
            Ok(points.iter().zip(&gammas).map(|((_, v), g)| g * v).sum())
        }
        ZneModel::Polynomial(degree) => Ok(fit_polynomial(points, degree)?[0]),
        ZneModel::Exponential => fit_exponential(points).map(|(a, _)| a),
    }
}

/// Per-node measurement record.
#[derive(Debug, Clone)]
pub struct NodeSample {
    pub scale: f64,
    pub mean: f64,
    /// Per-shot variance at this node (0 in exact mode).
    pub variance: f64,
    pub n_shots: u64,
}

#[derive(Debug, Clone)]
pub struct ZneRun {
    pub report: EstimatorReport,
    pub nodes: Vec<NodeSample>,
    /// (Σ|γ|)² for Richardson, the generic mix overhead otherwise.
    pub predicted_overhead: f64,
}

/// Sample `shots` measurement values of `obs` on a fixed state. Composite
/// observables are decomposed: each shot draws one Pauli term with
/// probability ∝ |coefficient| and rescales by the one-norm.
pub fn sample_observable_shots(
    state: &DensityMatrix,
    obs: &Observable,
    shots: u64,
    seed: u64,
    stream: u64,
) -> Result<Vec<f64>> {
    if obs.terms().is_empty() {
        return Err(Error::EmptyMix);
    }
    let one_norm = obs.coefficient_bound();
    let mut out = Vec::with_capacity(shots as usize);
    for i in 0..shots {
        let mut rng = RngStream::from_parts(seed, stream, i);
        out.push(sample_observable_once(state, obs, one_norm, &mut rng)?);
    }
    Ok(out)
}

/// One measurement value of `obs` (single shot); composite observables draw
/// one term with probability ∝ |coefficient| and rescale by `one_norm`.
pub fn sample_observable_once(
    state: &DensityMatrix,
    obs: &Observable,
    one_norm: f64,
    rng: &mut RngStream,
) -> Result<f64> {
    let terms = obs.terms();
    if terms.len() == 1 {
        return sample_shot(state, obs, rng);
    }
    // Draw a term with probability |c|/Σ|c|.
    let mut u = rng.next_f64() * one_norm;
    let mut chosen = terms.len() - 1;
    for (i, (c, _)) in terms.iter().enumerate() {
        u -= c.abs();
        if u <= 0.0 {
            chosen = i;
            break;
        }
    }
    let (c, p) = &terms[chosen];
    let single = Observable::single(1.0, *p)?;
    let shot = sample_shot(state, &single, rng)?;
    Ok(one_norm * c.signum() * shot)
}

/// Run the full pipeline: evaluate each node, fit, report the zero-noise
/// estimate with the ideal value as reference.
pub fn zne_mitigate(
    circuit: &NoisyCircuit,
    obs: &Observable,
    cfg: &ZneConfig,
    mode: EvalMode,
    seed: u64,
) -> Result<ZneRun> {
    let ideal = circuit.ideal_state()?.expectation(obs)?;
    zne_mitigate_with(|scale| circuit.run(scale), ideal, obs, cfg, mode, seed)
}

/// As `zne_mitigate`, but over an arbitrary boosted-state source (e.g. the
/// global-depolarizing family); `ideal` is the zero-noise reference.
pub fn zne_mitigate_with<F>(
    source: F,
    ideal: f64,
    obs: &Observable,
    cfg: &ZneConfig,
    mode: EvalMode,
    seed: u64,
) -> Result<ZneRun>
where
    F: Fn(f64) -> Result<DensityMatrix>,
{
    cfg.validate()?;

    let mut nodes = Vec::with_capacity(cfg.nodes.len());
    for (ni, scale) in cfg.nodes.iter().enumerate() {
        let state = source(*scale)?;
        match mode {
            EvalMode::Exact => {
                let mean = state.expectation(obs)?;
                nodes.push(NodeSample { scale: *scale, mean, variance: 0.0, n_shots: 0 });
            }
            EvalMode::Sampled => {
                let samples =
                    sample_observable_shots(&state, obs, cfg.shots_per_node, seed, ni as u64)?;
                let (mean, variance) = mean_and_variance(&samples);
                nodes.push(NodeSample {
                    scale: *scale,
                    mean,
                    variance,
                    n_shots: cfg.shots_per_node,
                });
            }
        }
    }

    let points: Vec<(f64, f64)> = nodes.iter().map(|n| (n.scale, n.mean)).collect();
    let value = extrapolate_to_zero(&points, cfg.model)?;

    // Variance of the zero-noise estimate, propagated through the fit.
    let scales: Vec<f64> = nodes.iter().map(|n| n.scale).collect();
    let weights: Vec<f64> = match cfg.model {
        ZneModel::Richardson => richardson_coefficients(&scales)?,
        ZneModel::Polynomial(d) => polynomial_zero_weights(&scales, d)?,
        ZneModel::Exponential => {
            // Delta method through the log-linear fit: the OLS intercept
            // weights composed with d(ln|y_m|)/dy_m = 1/y_m.
            let n = scales.len() as f64;
            let sx: f64 = scales.iter().sum();
            let sxx: f64 = scales.iter().map(|x| x * x).sum();
            let denom = n * sxx - sx * sx;
            scales
                .iter()
                .zip(nodes.iter())
                .map(|(x, node)| {
                    let w_intercept = (sxx - sx * x) / denom;
                    let guard = if node.mean.abs() < 1e-300 { 1e-300 } else { node.mean };
                    value * w_intercept / guard
                })
                .collect()
        }
    };

    let mean_variance: f64 = nodes
        .iter()
        .zip(&weights)
        .map(|(node, w)| {
            if node.n_shots == 0 {
                0.0
            } else {
                w * w * node.variance / node.n_shots as f64
            }
        })
        .sum();

    let total_shots: u64 = nodes.iter().map(|n| n.n_shots).sum();
    let report = match mode {
        EvalMode::Exact => EstimatorReport::exact(value, Some(ideal)),
        EvalMode::Sampled => EstimatorReport::from_moments(
            value,
            mean_variance * total_shots as f64,
            total_shots.max(1),
            Some(ideal),
        ),
    };

    let predicted_overhead = match cfg.model {
        ZneModel::Richardson => richardson_overhead(&scales)?,
        _ => {
            let one_norm: f64 = weights.iter().map(|w| w.abs()).sum();
            one_norm * one_norm
        }
    };

    Ok(ZneRun { report, nodes, predicted_overhead })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::Channel;
    use crate::circuit::gates;

    #[test]
    fn coefficients_two_and_three_nodes() {
        // Forced by the product formula: (1,2) → (2,−1); (1,2,3) → (3,−3,1).
        let g2 = richardson_coefficients(&[1.0, 2.0]).unwrap();
        assert!((g2[0] - 2.0).abs() < 1e-12 && (g2[1] + 1.0).abs() < 1e-12);

        let g3 = richardson_coefficients(&[1.0, 2.0, 3.0]).unwrap();
        let want = [3.0, -3.0, 1.0];
        for (g, w) in g3.iter().zip(want) {
            assert!((g - w).abs() < 1e-12);
        }
        // Cross-checks: Σγ = 1, Σγλ = 0, Σγλ² = 0.
        let sum: f64 = g3.iter().sum();
        let s1: f64 = g3.iter().zip([1.0, 2.0, 3.0]).map(|(g, l)| g * l).sum();
        let s2: f64 = g3.iter().zip([1.0, 2.0, 3.0]).map(|(g, l)| g * l * l).sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert!(s1.abs() < 1e-12 && s2.abs() < 1e-12);
    }

    #[test]
    fn single_node_passthrough_and_duplicates_rejected() {
        assert_eq!(richardson_coefficients(&[2.0]).unwrap(), alloc::vec![1.0]);
        assert!(richardson_coefficients(&[1.0, 1.0]).is_err());
        assert!(richardson_coefficients(&[0.0, 1.0]).is_err());
    }

    #[test]
    fn equal_gap_overhead_formula() {
        // (2^M − 1)² for equal-gap nodes, M = 2..6.
        for m in 2usize..=6 {
            let nodes: Vec<f64> = (1..=m).map(|k| k as f64).collect();
            let want = ((1u64 << m) - 1) as f64;
            let got = richardson_overhead(&nodes).unwrap();
            assert!((got - want * want).abs() < 1e-6 * want * want, "M={m}: {got}");
        }
        // Nodes (1,3) → coefficients (1.5, −0.5) → overhead 4.
        assert!((richardson_overhead(&[1.0, 3.0]).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn richardson_reproduces_low_degree_polynomials() {
        let mut rng = crate::rng::RngStream::from_seed(31);
        for m in 2usize..=5 {
            let coeffs: Vec<f64> = (0..m).map(|_| rng.next_f64() * 4.0 - 2.0).collect();
            let nodes: Vec<f64> = (1..=m).map(|k| 0.3 * k as f64).collect();
            let points: Vec<(f64, f64)> = nodes
                .iter()
                .map(|l| {
                    let mut pow = 1.0;
                    let mut acc = 0.0;
                    for c in &coeffs {
                        acc += c * pow;
                        pow *= l;
                    }
                    (*l, acc)
                })
                .collect();
            let est = extrapolate_to_zero(&points, ZneModel::Richardson).unwrap();
            assert!((est - coeffs[0]).abs() < 1e-9, "degree {}", m - 1);
        }
    }

    #[test]
    fn exponential_fit_recovers_exactly() {
        let points: Vec<(f64, f64)> =
            [1.0f64, 2.0, 3.0].iter().map(|l| (*l, 0.7 * (-l).exp())).collect();
        let (a, b) = fit_exponential(&points).unwrap();
        assert!((a - 0.7).abs() < 1e-10);
        assert!((b - 1.0).abs() < 1e-10);

        // Constant data → b = 0.
        let flat = [(1.0, 0.4), (2.0, 0.4), (3.0, 0.4)];
        let (a, b) = fit_exponential(&flat).unwrap();
        assert!((a - 0.4).abs() < 1e-12 && b.abs() < 1e-12);

        // Negative-sign data keeps its sign.
        let neg: Vec<(f64, f64)> =
            [1.0f64, 2.0].iter().map(|l| (*l, -0.5 * (-0.3 * l).exp())).collect();
        let (a, b) = fit_exponential(&neg).unwrap();
        assert!((a + 0.5).abs() < 1e-10 && (b - 0.3).abs() < 1e-10);
    }

    #[test]
    fn exponential_fit_rejects_mixed_sign_and_zero() {
        assert!(fit_exponential(&[(1.0, 0.5), (2.0, -0.5)]).is_err());
        assert!(fit_exponential(&[(1.0, 0.0), (2.0, 0.5)]).is_err());
    }

    #[test]
    fn richardson_bias_on_exponential_truth() {
        // Synthetic truth e^{−λ} probed at λ_m = m·0.1: the bias magnitude
        // shrinks monotonically with M and stays under 1.5·λ1^M.
        let lambda1 = 0.1;
        let mut last = f64::INFINITY;
        for m in 2usize..=5 {
            let points: Vec<(f64, f64)> = (1..=m)
                .map(|k| {
                    let l = lambda1 * k as f64;
                    (l, (-l).exp())
                })
                .collect();
            let est = extrapolate_to_zero(&points, ZneModel::Richardson).unwrap();
            let bias = (est - 1.0).abs();
            assert!(bias < last, "M={m} bias {bias} ≥ previous {last}");
            if m <= 4 {
                assert!(bias <= 1.5 * lambda1.powi(m as i32), "M={m} bias {bias}");
            }
            last = bias;
        }
    }

    #[test]
    fn documented_two_node_bias_on_exponential_truth() {
        // Closed-form oracle: Richardson on (1, 2) for e^{−0.2λ} gives
        // 2e^{−0.2} − e^{−0.4} ≈ 0.96714.
        let truth = |l: f64| (-0.2 * l).exp();
        let points = [(1.0, truth(1.0)), (2.0, truth(2.0))];
        let est = extrapolate_to_zero(&points, ZneModel::Richardson).unwrap();
        let want = 2.0 * (-0.2f64).exp() - (-0.4f64).exp();
        assert!((est - want).abs() < 1e-12);
        assert!((est - 0.96714).abs() < 5e-6);
        assert!((est - 1.0 + 0.0328585).abs() < 5e-8);

        // Three nodes shrink the bias by an order of λ.
        let p3 = [(1.0, truth(1.0)), (2.0, truth(2.0)), (3.0, truth(3.0))];
        let est3 = extrapolate_to_zero(&p3, ZneModel::Richardson).unwrap();
        assert!((est3 - 1.0).abs() < (est - 1.0).abs());
    }

    fn dephasing_circuit(p: f64) -> NoisyCircuit {
        let mut c = NoisyCircuit::new(1).unwrap();
        let zerr = Channel::pauli_mixture(1, &[("Z", 1.0)]).unwrap();
        c.gate("h", gates::h(), &[0]).unwrap();
        c.noisy_gate("i", gates::identity1(), &[0], zerr, p).unwrap();
        c.gate("h", gates::h(), &[0]).unwrap();
        c
    }

    #[test]
    fn zero_noise_circuit_is_exact_for_any_model() {
        let mut c = NoisyCircuit::new(1).unwrap();
        c.gate("h", gates::h(), &[0]).unwrap();
        c.gate("h", gates::h(), &[0]).unwrap();
        let z = Observable::from_label("Z").unwrap();
        for model in [ZneModel::Richardson, ZneModel::Polynomial(1)] {
            let cfg = ZneConfig { nodes: alloc::vec![1.0, 2.0], model, shots_per_node: 0 };
            let run = zne_mitigate(&c, &z, &cfg, EvalMode::Exact, 1).unwrap();
            assert!((run.report.mean - 1.0).abs() < 1e-12);
            assert_eq!(run.report.bias, Some(0.0));
        }
    }

    #[test]
    fn richardson_on_circuit_with_linear_truth_is_exact() {
        // One dephasing location: ⟨Z⟩(s) = 1 − 2ps is degree-1 in the scale,
        // so two-node Richardson recovers the ideal exactly.
        let c = dephasing_circuit(0.1);
        let z = Observable::from_label("Z").unwrap();
        let cfg = ZneConfig {
            nodes: alloc::vec![1.0, 2.0],
            model: ZneModel::Richardson,
            shots_per_node: 0,
        };
        let run = zne_mitigate(&c, &z, &cfg, EvalMode::Exact, 1).unwrap();
        assert!(run.report.bias.unwrap().abs() < 1e-12);
        assert!((run.predicted_overhead - 9.0).abs() < 1e-12);
        assert_eq!(run.nodes.len(), 2);
        assert!((run.nodes[0].mean - 0.8).abs() < 1e-12);
        assert!((run.nodes[1].mean - 0.6).abs() < 1e-12);
    }

    #[test]
    fn exponential_model_exact_on_global_depolarizing_family() {
        // Traceless observable on the Poisson global-depolarizing family
        // decays exactly exponentially; the fit recovers the ideal.
        let mut c = NoisyCircuit::new(2).unwrap();
        let zerr = Channel::pauli_mixture(1, &[("Z", 1.0)]).unwrap();
        c.gate("h", gates::h(), &[0]).unwrap();
        c.gate("cnot", gates::cnot(), &[0, 1]).unwrap();
        c.noisy_gate("i", gates::identity1(), &[0], zerr, 0.4).unwrap();
        let zz = Observable::from_label("ZZ").unwrap();
        let ideal = c.ideal_state().unwrap().expectation(&zz).unwrap();

        let points: Vec<(f64, f64)> = [1.0, 2.0, 3.0]
            .iter()
            .map(|s| {
                let rho = c.global_depolarizing_state(*s).unwrap();
                (*s, rho.expectation(&zz).unwrap())
            })
            .collect();
        let est = extrapolate_to_zero(&points, ZneModel::Exponential).unwrap();
        assert!((est - ideal).abs() < 1e-10);
    }

    #[test]
    fn sampled_mode_is_deterministic_and_near_truth() {
        let c = dephasing_circuit(0.1);
        let z = Observable::from_label("Z").unwrap();
        let cfg = ZneConfig {
            nodes: alloc::vec![1.0, 2.0],
            model: ZneModel::Richardson,
            shots_per_node: 50_000,
        };
        let a = zne_mitigate(&c, &z, &cfg, EvalMode::Sampled, 7).unwrap();
        let b = zne_mitigate(&c, &z, &cfg, EvalMode::Sampled, 7).unwrap();
        assert_eq!(a.report.mean, b.report.mean);
        // 4σ band around the unbiased truth.
        let sigma = (a.report.variance / a.report.n_shots as f64).sqrt();
        assert!((a.report.mean - 1.0).abs() < 4.0 * sigma + 1e-9, "mean {}", a.report.mean);
    }
}
