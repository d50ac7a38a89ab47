//! Cross-module behavioral invariants on randomized circuits.

use qem_core::channel::Channel;
use qem_core::circuit::{gates, NoisyCircuit};
use qem_core::pauli::{Observable, PauliString};
use qem_core::pec;
use qem_core::rng::RngStream;
use qem_core::stats;
use qem_core::zne;
use qem_core::EvalMode;

/// Random Clifford circuit with random stochastic Pauli noise at every
/// location; per-location fault probability at most `p_max`.
fn random_clifford_circuit(
    n_qubits: usize,
    locations: usize,
    p_max: f64,
    rng: &mut RngStream,
) -> NoisyCircuit {
    let mut c = NoisyCircuit::new(n_qubits).unwrap();
    for _ in 0..locations {
        let p_f = p_max * (0.3 + 0.7 * rng.next_f64());
        // Random error mixture over X, Y, Z.
        let mut w = [rng.next_f64() + 0.05, rng.next_f64() + 0.05, rng.next_f64() + 0.05];
        let total: f64 = w.iter().sum();
        for v in w.iter_mut() {
            *v /= total;
        }
        let error = Channel::pauli_mixture(1, &[("X", w[0]), ("Y", w[1]), ("Z", w[2])]).unwrap();

        match rng.next_below(4) {
            0 => {
                c.noisy_gate("h", gates::h(), &[rng.next_below(n_qubits)], error, p_f)
                    .unwrap();
            }
            1 => {
                c.noisy_gate("s", gates::s(), &[rng.next_below(n_qubits)], error, p_f)
                    .unwrap();
            }
            2 if n_qubits >= 2 => {
                let a = rng.next_below(n_qubits);
                let mut b = rng.next_below(n_qubits);
                while b == a {
                    b = rng.next_below(n_qubits);
                }
                // Two-qubit gate with single-qubit noise folded onto a
                // follow-up identity location keeps channel supports simple.
                c.gate("cnot", gates::cnot(), &[a, b]).unwrap();
                c.noisy_gate("i", gates::identity1(), &[a], error, p_f).unwrap();
            }
            _ => {
                c.noisy_gate("x", gates::x(), &[rng.next_below(n_qubits)], error, p_f)
                    .unwrap();
            }
        }
    }
    c
}

fn random_pauli_observable(n_qubits: usize, rng: &mut RngStream) -> Observable {
    loop {
        let label: String = (0..n_qubits)
            .map(|_| ['I', 'X', 'Y', 'Z'][rng.next_below(4)])
            .collect();
        let p = PauliString::from_label(&label).unwrap();
        if !p.is_identity() {
            return Observable::single(1.0, p).unwrap();
        }
    }
}

#[test]
fn pauli_expectations_decay_monotonically_with_noise_scale() {
    // For Pauli observables on Clifford circuits with stochastic Pauli
    // noise, |⟨O⟩| never grows as the noise scale is boosted over the
    // geometric grid {0, 1, 2, 4}.
    let mut rng = RngStream::from_seed(404);
    for trial in 0..25 {
        let n = 1 + rng.next_below(3);
        let c = random_clifford_circuit(n, 4 + rng.next_below(6), 0.12, &mut rng);
        let obs = random_pauli_observable(n, &mut rng);
        let mut last = f64::INFINITY;
        for scale in [0.0, 1.0, 2.0, 4.0] {
            let value = c.run(scale).unwrap().expectation(&obs).unwrap().abs();
            assert!(
                value <= last + 1e-12,
                "trial {trial}: |⟨O⟩| grew from {last} to {value} at scale {scale}"
            );
            last = value;
        }
    }
}

#[test]
fn pec_variance_ratio_matches_gamma_product_on_random_circuits() {
    // Measured per-shot variance ratio within 10% of Π γ² across 20
    // randomized circuits with λ ∈ [0.1, 1]. Observables are chosen with
    // zero ideal expectation so the mixture-variance assumption holds.
    let mut rng = RngStream::from_seed(777);
    let shots = 60_000u64;
    let mut done = 0usize;
    let mut attempts = 0usize;
    while done < 20 {
        attempts += 1;
        assert!(attempts < 400, "could not find enough zero-expectation instances");
        let n = 1 + rng.next_below(2);
        let locations = 3 + rng.next_below(8);
        let p_max = (0.1 + 0.9 * rng.next_f64()) / locations as f64;
        let c = random_clifford_circuit(n, locations, p_max, &mut rng);
        let lambda = c.fault_rate();
        if !(0.05..=1.0).contains(&lambda) {
            continue;
        }
        let obs = random_pauli_observable(n, &mut rng);
        let ideal = c.ideal_state().unwrap().expectation(&obs).unwrap();
        if ideal.abs() > 1e-9 {
            continue; // stabilizer expectations are 0 or ±1; keep the zeros
        }

        let run = pec::pec_mitigate(&c, &obs, EvalMode::Sampled, shots, 31 + done as u64)
            .unwrap();
        let noisy = c.run(1.0).unwrap();
        let raw = zne::sample_observable_shots(&noisy, &obs, shots, 97 + done as u64, 5)
            .unwrap();
        let raw_report = stats::EstimatorReport::from_samples(&raw, None).unwrap();
        let measured = stats::sampling_overhead(run.report.variance, raw_report.variance)
            .unwrap();
        let predicted = run.predicted_overhead;
        assert!(
            (measured - predicted).abs() / predicted < 0.10,
            "instance {done}: measured {measured} predicted {predicted} (λ = {lambda})"
        );
        done += 1;
    }
}

#[test]
fn gamma_is_one_exactly_for_noiseless_locations() {
    // γ ≥ 1 with equality iff the location is noiseless.
    let mut rng = RngStream::from_seed(11);
    let c = random_clifford_circuit(2, 6, 0.1, &mut rng);
    for loc in c.locations() {
        let d = pec::decompose_noisy_gate(loc).unwrap();
        match &loc.fault {
            None => assert!((d.gamma - 1.0).abs() < 1e-15),
            Some(f) if f.p_f == 0.0 => assert!((d.gamma - 1.0).abs() < 1e-15),
            Some(_) => assert!(d.gamma > 1.0),
        }
    }
}
