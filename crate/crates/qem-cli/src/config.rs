//! JSON experiment configuration: the schema the `qem` CLI owns.
//!
//! Pauli labels read left to right from qubit 0 ("ZZI" puts Z on qubits 0
//! and 1). Named location noise is split at its maximal identity
//! coefficient, so a `depolarizing` entry with parameter p carries the
//! fault probability p·(4^k−1)/4^k of the ρ → (1−p)ρ + p·I/2^k channel.

use std::collections::BTreeMap;

use serde::Deserialize;

use qem_core::channel::Channel;
use qem_core::circuit::{gates, NoisyCircuit};
use qem_core::pauli::{Observable, PauliString};
use qem_core::readout::AssignmentForm;
use qem_core::symx::SymmetrySpec;
use qem_core::zne::{ZneConfig, ZneModel};
use qem_core::EvalMode;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n_qubits: usize,
    pub mode: Mode,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_shots")]
    pub shots: u64,
    #[serde(default)]
    pub noise_model: NoiseModelKind,
    pub circuit: Vec<GateSpec>,
    pub observable: Vec<TermSpec>,
    #[serde(default)]
    pub measurement_noise: Option<MeasurementNoiseSpec>,
    pub methods: Vec<MethodSpec>,
}

fn default_shots() -> u64 {
    100_000
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Exact,
    Sampled,
}

impl Mode {
    pub fn eval(self) -> EvalMode {
        match self {
            Mode::Exact => EvalMode::Exact,
            Mode::Sampled => EvalMode::Sampled,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NoiseModelKind {
    /// Each location applies its own error channel (the default).
    #[default]
    PerLocation,
    /// Poisson-limit global depolarizing at the circuit fault rate:
    /// ρ_λ = e^{−λ}ρ0 + (1−e^{−λ})I/2^N.
    GlobalDepolarizing,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateSpec {
    pub gate: String,
    pub targets: Vec<usize>,
    #[serde(default)]
    pub angle: Option<f64>,
    #[serde(default)]
    pub noise: Option<NoiseSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseSpec {
    /// ρ → (1−p)ρ + p·I/2^k on the gate's support.
    Depolarizing { p: f64 },
    /// Z with probability p (single-qubit support).
    Dephasing { p: f64 },
    /// X with probability p (single-qubit support).
    BitFlip { p: f64 },
    /// Explicit non-identity Pauli error probabilities on the support.
    Pauli { probs: BTreeMap<String, f64> },
    /// Coherent Z over-rotation by `angle`, fired with probability p.
    CoherentZ { angle: f64, p: f64 },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub coeff: f64,
    pub pauli: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementNoiseSpec {
    /// Independent readout flip probability per qubit.
    #[serde(default)]
    pub per_qubit_flip: Vec<f64>,
    /// Correlated joint flips: each entry flips all listed qubits together.
    #[serde(default)]
    pub correlated_flips: Vec<CorrelatedFlip>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelatedFlip {
    pub qubits: Vec<usize>,
    pub p: f64,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum MethodSpec {
    Raw,
    Zne {
        nodes: Vec<f64>,
        model: ZneModelSpec,
        #[serde(default)]
        degree: Option<usize>,
    },
    Pec {
        #[serde(default)]
        pec_mode: Option<Mode>,
        #[serde(default)]
        lambda_target: Option<f64>,
    },
    Readout {
        /// Path to a persisted assignment matrix; calibrated on the fly
        /// from `measurement_noise` when absent.
        #[serde(default)]
        assignment: Option<String>,
        #[serde(default = "default_form")]
        form: FormSpec,
        #[serde(default)]
        use_ibu: bool,
        #[serde(default = "default_ibu_iterations")]
        iterations: usize,
    },
    Symmetry {
        symmetries: Vec<SymmetryEntry>,
        #[serde(default)]
        sv_mode: SvModeSpec,
    },
    Subspace {
        basis: Vec<String>,
        #[serde(default)]
        hamiltonian: Option<Vec<TermSpec>>,
        #[serde(default = "default_gevp_threshold")]
        threshold: f64,
    },
    Vd {
        copies: usize,
    },
    Ev,
    Learn {
        train_count: usize,
        #[serde(default)]
        truncate_top: Option<usize>,
    },
}

fn default_form() -> FormSpec {
    FormSpec::Full
}

fn default_ibu_iterations() -> usize {
    100
}

fn default_gevp_threshold() -> f64 {
    1e-10
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZneModelSpec {
    Richardson,
    Polynomial,
    Exponential,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormSpec {
    Full,
    Tensor,
}

impl FormSpec {
    pub fn form(self) -> AssignmentForm {
        match self {
            FormSpec::Full => AssignmentForm::Full,
            FormSpec::Tensor => AssignmentForm::Tensor,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymmetryEntry {
    pub pauli: String,
    pub sector: i8,
}

#[derive(Debug, Clone, Copy, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SvModeSpec {
    Direct,
    #[default]
    Postprocess,
}

/// A schema or semantic problem in the configuration (exit code 2).
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| ConfigError(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if self.mode == Mode::Sampled && self.seed.is_none() {
            return Err(ConfigError(String::from("sampled mode requires a seed")));
        }
        if self.observable.is_empty() {
            return Err(ConfigError(String::from("observable has no terms")));
        }
        if self.methods.is_empty() {
            return Err(ConfigError(String::from("no method blocks")));
        }
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    /// Build the noisy circuit from the gate list.
    pub fn build_circuit(&self) -> Result<NoisyCircuit, ConfigError> {
        let mut circuit = NoisyCircuit::new(self.n_qubits)
            .map_err(|e| ConfigError(e.to_string()))?;
        for (i, spec) in self.circuit.iter().enumerate() {
            let matrix = gates::by_name(&spec.gate, spec.angle)
                .map_err(|e| ConfigError(format!("gate {i}: {e}")))?;
            let expect_dim = 1usize << spec.targets.len();
            if matrix.rows() != expect_dim {
                return Err(ConfigError(format!(
                    "gate {i} ('{}') expects {} target(s)",
                    spec.gate,
                    (matrix.rows() as f64).log2() as usize
                )));
            }
            match &spec.noise {
                None => {
                    circuit
                        .gate(&spec.gate, matrix, &spec.targets)
                        .map_err(|e| ConfigError(format!("gate {i}: {e}")))?;
                }
                Some(noise) => {
                    let k = spec.targets.len();
                    let (p_f, error_part) = build_fault(noise, k)
                        .map_err(|e| ConfigError(format!("gate {i} noise: {e}")))?;
                    if p_f == 0.0 {
                        circuit
                            .gate(&spec.gate, matrix, &spec.targets)
                            .map_err(|e| ConfigError(format!("gate {i}: {e}")))?;
                    } else {
                        circuit
                            .noisy_gate(&spec.gate, matrix, &spec.targets, error_part, p_f)
                            .map_err(|e| ConfigError(format!("gate {i}: {e}")))?;
                    }
                }
            }
        }
        Ok(circuit)
    }

    pub fn build_observable(&self) -> Result<Observable, ConfigError> {
        build_observable_from(&self.observable, self.n_qubits)
    }

    /// The measurement noise channel, when configured.
    pub fn build_measurement_channel(&self) -> Result<Option<Channel>, ConfigError> {
        let Some(spec) = &self.measurement_noise else {
            return Ok(None);
        };
        if !spec.per_qubit_flip.is_empty() && spec.per_qubit_flip.len() != self.n_qubits {
            return Err(ConfigError(format!(
                "per_qubit_flip needs {} entries",
                self.n_qubits
            )));
        }
        // Compose independent and correlated flips by XOR convolution of
        // their X-mask distributions.
        let mut dist: BTreeMap<u64, f64> = BTreeMap::new();
        dist.insert(0, 1.0);
        let convolve = |dist: &mut BTreeMap<u64, f64>, mask: u64, p: f64| {
            let mut next: BTreeMap<u64, f64> = BTreeMap::new();
            for (m, w) in dist.iter() {
                *next.entry(*m).or_insert(0.0) += w * (1.0 - p);
                *next.entry(m ^ mask).or_insert(0.0) += w * p;
            }
            *dist = next;
        };
        for (q, p) in spec.per_qubit_flip.iter().enumerate() {
            if !(0.0..=1.0).contains(p) {
                return Err(ConfigError(format!("flip probability {p} for qubit {q}")));
            }
            convolve(&mut dist, 1 << q, *p);
        }
        for corr in &spec.correlated_flips {
            if !(0.0..=1.0).contains(&corr.p) {
                return Err(ConfigError(format!("correlated flip probability {}", corr.p)));
            }
            let mut mask = 0u64;
            for q in &corr.qubits {
                if *q >= self.n_qubits {
                    return Err(ConfigError(format!("correlated flip qubit {q} out of range")));
                }
                mask |= 1 << q;
            }
            convolve(&mut dist, mask, corr.p);
        }
        let mut probs = Vec::new();
        for (mask, w) in dist {
            let mut p = PauliString::identity(self.n_qubits);
            for q in 0..self.n_qubits {
                if mask >> q & 1 == 1 {
                    p = p
                        .mul(&PauliString::single(self.n_qubits, q, 'X').expect("valid"))
                        .expect("same width");
                }
            }
            probs.push((p, w));
        }
        let ch = Channel::from_pauli_probs(self.n_qubits, probs)
            .map_err(|e| ConfigError(e.to_string()))?;
        Ok(Some(ch))
    }
}

pub fn build_observable_from(
    terms: &[TermSpec],
    n_qubits: usize,
) -> Result<Observable, ConfigError> {
    let mut parsed = Vec::with_capacity(terms.len());
    for t in terms {
        let p = PauliString::from_label(&t.pauli)
            .map_err(|e| ConfigError(format!("pauli '{}': {e}", t.pauli)))?;
        if p.n_qubits() != n_qubits {
            return Err(ConfigError(format!(
                "pauli '{}' has {} qubits, circuit has {n_qubits}",
                t.pauli,
                p.n_qubits()
            )));
        }
        parsed.push((t.coeff, p));
    }
    Observable::new(n_qubits, parsed).map_err(|e| ConfigError(e.to_string()))
}

pub fn build_symmetry(
    entries: &[SymmetryEntry],
    n_qubits: usize,
) -> Result<SymmetrySpec, ConfigError> {
    let mut ops = Vec::with_capacity(entries.len());
    let mut sectors = Vec::with_capacity(entries.len());
    for e in entries {
        let p = PauliString::from_label(&e.pauli)
            .map_err(|err| ConfigError(format!("symmetry '{}': {err}", e.pauli)))?;
        if p.n_qubits() != n_qubits {
            return Err(ConfigError(format!(
                "symmetry '{}' does not match the register",
                e.pauli
            )));
        }
        ops.push(p);
        sectors.push(e.sector);
    }
    SymmetrySpec::new(ops, sectors).map_err(|e| ConfigError(e.to_string()))
}

pub fn build_zne_config(
    nodes: &[f64],
    model: ZneModelSpec,
    degree: Option<usize>,
    shots_per_node: u64,
) -> Result<ZneConfig, ConfigError> {
    let model = match model {
        ZneModelSpec::Richardson => ZneModel::Richardson,
        ZneModelSpec::Exponential => ZneModel::Exponential,
        ZneModelSpec::Polynomial => {
            let d = degree.ok_or_else(|| {
                ConfigError(String::from("polynomial model needs a degree"))
            })?;
            ZneModel::Polynomial(d)
        }
    };
    let cfg = ZneConfig { nodes: nodes.to_vec(), model, shots_per_node };
    cfg.validate().map_err(|e| ConfigError(e.to_string()))?;
    Ok(cfg)
}

/// Split a named noise spec into (p_f, normalized error part).
fn build_fault(noise: &NoiseSpec, k: usize) -> qem_core::Result<(f64, Channel)> {
    match noise {
        NoiseSpec::Depolarizing { p } => Channel::depolarizing(k, *p)?.split_fault(),
        NoiseSpec::Dephasing { p } => {
            require_single(k)?;
            Channel::dephasing(*p)?.split_fault()
        }
        NoiseSpec::BitFlip { p } => {
            require_single(k)?;
            Channel::bit_flip(*p)?.split_fault()
        }
        NoiseSpec::Pauli { probs } => {
            let pairs: Vec<(&str, f64)> =
                probs.iter().map(|(label, p)| (label.as_str(), *p)).collect();
            Channel::pauli_mixture(k, &pairs)?.split_fault()
        }
        NoiseSpec::CoherentZ { angle, p } => {
            require_single(k)?;
            Ok((*p, Channel::coherent_z(*angle)))
        }
    }
}

fn require_single(k: usize) -> qem_core::Result<()> {
    if k != 1 {
        return Err(qem_core::Error::InvalidArgument(String::from(
            "this noise kind has single-qubit support",
        )));
    }
    Ok(())
}
