//! Method-block orchestration for `qem run`.
//!
//! Every run emits an `ideal` reference row and a `raw` unmitigated row
//! first, then one row per configured method (a configured `raw` block is
//! already covered). The `overhead` column carries each method's formula
//! prediction; `qem compare` derives measured variance-ratio overheads from
//! the variance columns.

use std::cell::RefCell;
use std::path::Path;
use std::time::Instant;

use qem_core::pauli::Observable;
use qem_core::readout::{self, ReadoutDistribution};
use qem_core::rng::RngStream;
use qem_core::state::DensityMatrix;
use qem_core::stats::{mean_and_variance, EstimatorReport};
use qem_core::symx::{self, SvMode};
use qem_core::zne;
use qem_core::{learn, pec, purify, EvalMode, NoisyCircuit};

use crate::assignment;
use crate::config::{
    build_observable_from, build_symmetry, build_zne_config, ConfigError, ExperimentConfig,
    MethodSpec, Mode, NoiseModelKind, SvModeSpec,
};
use crate::csv::{self, ResultRow};
use crate::threads;

pub struct RunOutput {
    pub results_csv: String,
    pub sweep_csv: Option<String>,
}

#[derive(Debug)]
pub enum RunError {
    /// Schema or semantic configuration problem (exit 2).
    Config(ConfigError),
    /// Simulation failure (exit 3).
    Simulation(String),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "{e}"),
            RunError::Simulation(msg) => write!(f, "simulation error: {msg}"),
        }
    }
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

fn sim_err(e: qem_core::Error) -> RunError {
    RunError::Simulation(e.to_string())
}

struct Context {
    circuit: NoisyCircuit,
    obs: Observable,
    noisy: DensityMatrix,
    ideal_value: f64,
    mode: Mode,
    shots: u64,
    seed: u64,
    noise_model: NoiseModelKind,
    threads: usize,
}

impl Context {
    fn noisy_state_at(&self, scale: f64) -> qem_core::Result<DensityMatrix> {
        match self.noise_model {
            NoiseModelKind::PerLocation => self.circuit.run(scale),
            NoiseModelKind::GlobalDepolarizing => self.circuit.global_depolarizing_state(scale),
        }
    }

    /// Per-shot sampling of the observable on a fixed state, parallel over
    /// the counter-split index range.
    fn sample_state(
        &self,
        state: &DensityMatrix,
        stream: u64,
    ) -> Result<Vec<f64>, qem_core::Error> {
        let one_norm = self.obs.coefficient_bound();
        threads::run_shots(self.shots, self.threads, |i| {
            let mut rng = RngStream::from_parts(self.seed, stream, i);
            zne::sample_observable_once(state, &self.obs, one_norm, &mut rng)
        })
    }
}

pub fn execute(cfg: &ExperimentConfig, config_dir: &Path) -> Result<RunOutput, RunError> {
    let circuit = cfg.build_circuit()?;
    let obs = cfg.build_observable()?;
    let ideal_state = circuit.ideal_state().map_err(sim_err)?;
    let ideal_value = ideal_state.expectation(&obs).map_err(sim_err)?;

    let ctx = Context {
        noisy: match cfg.noise_model {
            NoiseModelKind::PerLocation => circuit.run(1.0).map_err(sim_err)?,
            NoiseModelKind::GlobalDepolarizing => {
                circuit.global_depolarizing_state(1.0).map_err(sim_err)?
            }
        },
        circuit,
        obs,
        ideal_value,
        mode: cfg.mode,
        shots: cfg.shots,
        seed: cfg.seed(),
        noise_model: cfg.noise_model,
        threads: threads::thread_count(),
    };

    let mut rows = Vec::new();
    rows.push(ResultRow::from_report(
        "ideal",
        &EstimatorReport::exact(ctx.ideal_value, Some(ctx.ideal_value)),
        1.0,
        ctx.seed,
    ));
    rows.push(raw_row(&ctx)?);

    let mut sweep: Option<String> = None;
    for (idx, spec) in cfg.methods.iter().enumerate() {
        let stream = 1 + idx as u64;
        match spec {
            MethodSpec::Raw => {} // already emitted
            MethodSpec::Zne { nodes, model, degree } => {
                let (row, sweep_csv) = run_zne(&ctx, nodes, *model, *degree, stream)?;
                rows.push(row);
                if sweep.is_none() {
                    sweep = Some(sweep_csv);
                } else {
                    eprintln!("warning: multiple zne blocks; sweep.csv keeps the first");
                }
            }
            MethodSpec::Pec { pec_mode, lambda_target } => {
                rows.push(run_pec(&ctx, *pec_mode, *lambda_target)?);
            }
            MethodSpec::Readout { assignment, form, use_ibu, iterations } => {
                rows.push(run_readout(
                    &ctx,
                    cfg,
                    config_dir,
                    assignment.as_deref(),
                    form.form(),
                    *use_ibu,
                    *iterations,
                    stream,
                )?);
            }
            MethodSpec::Symmetry { symmetries, sv_mode } => {
                let spec = build_symmetry(symmetries, ctx.circuit.n_qubits())?;
                let mode = match sv_mode {
                    SvModeSpec::Direct => SvMode::Direct,
                    SvModeSpec::Postprocess => SvMode::PostProcess,
                };
                let run = symx::sv_shot_mitigate_on_state(
                    &ctx.noisy,
                    ctx.ideal_value,
                    &spec,
                    &ctx.obs,
                    mode,
                    ctx.mode.eval(),
                    ctx.shots,
                    ctx.seed.wrapping_add(stream),
                )
                .map_err(sim_err)?;
                rows.push(ResultRow::from_report(
                    "symmetry",
                    &run.report,
                    run.predicted_overhead,
                    ctx.seed,
                ));
            }
            MethodSpec::Subspace { basis, hamiltonian, threshold } => {
                rows.push(run_subspace(&ctx, basis, hamiltonian.as_deref(), *threshold)?);
            }
            MethodSpec::Vd { copies } => {
                let est = purify::vd_expectation(&ctx.noisy, &ctx.obs, *copies)
                    .map_err(sim_err)?;
                rows.push(ResultRow::from_report(
                    "vd",
                    &EstimatorReport::exact(est.value, Some(ctx.ideal_value)),
                    est.overhead,
                    ctx.seed,
                ));
            }
            MethodSpec::Ev => {
                let est = purify::echo_verification(&ctx.noisy, &ctx.noisy, &ctx.obs)
                    .map_err(sim_err)?;
                rows.push(ResultRow::from_report(
                    "ev",
                    &EstimatorReport::exact(est.value, Some(ctx.ideal_value)),
                    est.overhead,
                    ctx.seed,
                ));
            }
            MethodSpec::Learn { train_count, truncate_top } => {
                rows.push(run_learn(&ctx, *train_count, *truncate_top, stream)?);
            }
        }
    }

    Ok(RunOutput { results_csv: csv::write_results(&rows), sweep_csv: sweep })
}

fn raw_row(ctx: &Context) -> Result<ResultRow, RunError> {
    let report = match ctx.mode {
        Mode::Exact => EstimatorReport::exact(
            ctx.noisy.expectation(&ctx.obs).map_err(sim_err)?,
            Some(ctx.ideal_value),
        ),
        Mode::Sampled => {
            let samples = ctx.sample_state(&ctx.noisy, 0).map_err(sim_err)?;
            EstimatorReport::from_samples(&samples, Some(ctx.ideal_value)).map_err(sim_err)?
        }
    };
    Ok(ResultRow::from_report("raw", &report, 1.0, ctx.seed))
}

fn run_zne(
    ctx: &Context,
    nodes: &[f64],
    model: crate::config::ZneModelSpec,
    degree: Option<usize>,
    stream: u64,
) -> Result<(ResultRow, String), RunError> {
    let shots_per_node = match ctx.mode {
        Mode::Exact => 0,
        Mode::Sampled => ctx.shots / nodes.len().max(1) as u64,
    };
    let zcfg = build_zne_config(nodes, model, degree, shots_per_node)?;
    // Per-node wall-clock is reported (not asserted): boosted circuits may
    // cost more on hardware, so the sweep timing is surfaced on stderr.
    let timings: RefCell<Vec<(f64, u128)>> = RefCell::new(Vec::new());
    let run = zne::zne_mitigate_with(
        |scale| {
            let t0 = Instant::now();
            let state = ctx.noisy_state_at(scale);
            timings.borrow_mut().push((scale, t0.elapsed().as_micros()));
            state
        },
        ctx.ideal_value,
        &ctx.obs,
        &zcfg,
        ctx.mode.eval(),
        ctx.seed.wrapping_add(stream),
    )
    .map_err(sim_err)?;
    for (scale, micros) in timings.borrow().iter() {
        eprintln!("zne node scale {scale}: state evaluation {micros} µs");
    }

    let base_rate = ctx.circuit.fault_rate();
    let mut points: Vec<(f64, f64, f64)> = run
        .nodes
        .iter()
        .map(|n| (n.scale * base_rate, n.mean, n.variance))
        .collect();
    points.push((0.0, run.report.mean, run.report.variance));
    let sweep_csv = csv::write_sweep(&points);

    Ok((
        ResultRow::from_report("zne", &run.report, run.predicted_overhead, ctx.seed),
        sweep_csv,
    ))
}

fn run_pec(
    ctx: &Context,
    mode_override: Option<Mode>,
    lambda_target: Option<f64>,
) -> Result<ResultRow, RunError> {
    if ctx.noise_model != NoiseModelKind::PerLocation {
        return Err(RunError::Config(ConfigError(String::from(
            "pec needs per-location noise (it decomposes gate by gate)",
        ))));
    }
    let eval = mode_override.unwrap_or(ctx.mode).eval();
    let sampler = match lambda_target {
        None => pec::PecSampler::new(&ctx.circuit),
        Some(target) => {
            let lambda = ctx.circuit.fault_rate();
            if target < 0.0 || target > lambda + 1e-12 {
                return Err(RunError::Config(ConfigError(format!(
                    "lambda_target {target} outside [0, {lambda}]"
                ))));
            }
            let fraction = if lambda == 0.0 { 0.0 } else { target / lambda };
            pec::PecSampler::with_residual_fraction(&ctx.circuit, fraction)
        }
    }
    .map_err(sim_err)?;

    let report = match eval {
        EvalMode::Exact => EstimatorReport::exact(
            sampler.exact_value(&ctx.obs).map_err(sim_err)?,
            Some(ctx.ideal_value),
        ),
        EvalMode::Sampled => {
            let samples = threads::run_shots(ctx.shots, ctx.threads, |i| {
                sampler.shot_value(&ctx.obs, ctx.seed, i)
            })
            .map_err(sim_err)?;
            EstimatorReport::from_samples(&samples, Some(ctx.ideal_value)).map_err(sim_err)?
        }
    };
    Ok(ResultRow::from_report(
        "pec",
        &report,
        sampler.predicted_overhead(),
        ctx.seed,
    ))
}

#[allow(clippy::too_many_arguments)]
fn run_readout(
    ctx: &Context,
    cfg: &ExperimentConfig,
    config_dir: &Path,
    assignment_path: Option<&str>,
    form: qem_core::readout::AssignmentForm,
    use_ibu: bool,
    iterations: usize,
    stream: u64,
) -> Result<ResultRow, RunError> {
    let meas = cfg
        .build_measurement_channel()?
        .ok_or_else(|| ConfigError(String::from("readout method needs measurement_noise")))?;
    let a = match assignment_path {
        Some(path) => {
            let resolved = config_dir.join(path);
            let text = std::fs::read_to_string(&resolved).map_err(|e| {
                RunError::Config(ConfigError(format!("read {}: {e}", resolved.display())))
            })?;
            assignment::from_json(&text)
                .map_err(|e| RunError::Config(ConfigError(e.to_string())))?
        }
        None => readout::calibrate(&meas, ctx.circuit.n_qubits(), form).map_err(sim_err)?,
    };
    let spectrum = ctx
        .obs
        .z_spectrum()
        .map_err(|e| RunError::Config(ConfigError(format!("readout method: {e}"))))?;

    // True noisy outcome distribution: measurement noise applied to the
    // final state.
    let targets: Vec<usize> = (0..ctx.circuit.n_qubits()).collect();
    let noised = meas.apply_to(&ctx.noisy, &targets).map_err(sim_err)?;
    let p_noisy = ReadoutDistribution::from_state(&noised);
    let weights = readout::mitigation_weights(&a, &spectrum).map_err(sim_err)?;

    let report = match ctx.mode {
        Mode::Exact => {
            let value = if use_ibu {
                let unfolded = readout::ibu(&a, &p_noisy, iterations).map_err(sim_err)?;
                spectrum.iter().zip(&unfolded.probs).map(|(s, p)| s * p).sum()
            } else {
                readout::mitigated_expectation(&a, &spectrum, &p_noisy).map_err(sim_err)?
            };
            EstimatorReport::exact(value, Some(ctx.ideal_value))
        }
        Mode::Sampled => {
            // Sample outcomes, score each shot by the solved weights
            // (A⁻ᵀO⃗); their mean is the mitigated expectation.
            let probs = p_noisy.probs.clone();
            let samples = threads::run_shots(ctx.shots, ctx.threads, |i| {
                let mut rng = RngStream::from_parts(ctx.seed, stream, i);
                let mut u = rng.next_f64();
                let mut outcome = probs.len() - 1;
                for (x, p) in probs.iter().enumerate() {
                    u -= p;
                    if u <= 0.0 {
                        outcome = x;
                        break;
                    }
                }
                Ok(weights[outcome])
            })
            .map_err(sim_err)?;
            if use_ibu {
                // Unfold the empirical distribution; the per-shot variance
                // of the linear estimator is kept as a proxy spread.
                let mut counts = vec![0u64; p_noisy.probs.len()];
                let (_, variance) = mean_and_variance(&samples);
                for i in 0..ctx.shots {
                    let mut rng = RngStream::from_parts(ctx.seed, stream, i);
                    let mut u = rng.next_f64();
                    let mut outcome = p_noisy.probs.len() - 1;
                    for (x, p) in p_noisy.probs.iter().enumerate() {
                        u -= p;
                        if u <= 0.0 {
                            outcome = x;
                            break;
                        }
                    }
                    counts[outcome] += 1;
                }
                let empirical = ReadoutDistribution {
                    probs: counts.iter().map(|c| *c as f64 / ctx.shots as f64).collect(),
                    quasi: false,
                };
                let unfolded = readout::ibu(&a, &empirical, iterations).map_err(sim_err)?;
                let value: f64 =
                    spectrum.iter().zip(&unfolded.probs).map(|(s, p)| s * p).sum();
                EstimatorReport::from_moments(
                    value,
                    variance,
                    ctx.shots,
                    Some(ctx.ideal_value),
                )
            } else {
                EstimatorReport::from_samples(&samples, Some(ctx.ideal_value))
                    .map_err(sim_err)?
            }
        }
    };

    // Range-ratio (Hoeffding) overhead of the weighted estimator.
    let spread = |v: &[f64]| {
        let max = v.iter().cloned().fold(f64::MIN, f64::max);
        let min = v.iter().cloned().fold(f64::MAX, f64::min);
        max - min
    };
    let spec_range = spread(&spectrum).max(1e-12);
    let weight_range = spread(&weights);
    let overhead = (weight_range / spec_range).powi(2).max(1.0);
    Ok(ResultRow::from_report("readout", &report, overhead, ctx.seed))
}

fn run_subspace(
    ctx: &Context,
    basis_labels: &[String],
    hamiltonian: Option<&[crate::config::TermSpec]>,
    threshold: f64,
) -> Result<ResultRow, RunError> {
    let mut paulis = Vec::with_capacity(basis_labels.len());
    for label in basis_labels {
        paulis.push(
            qem_core::pauli::PauliString::from_label(label)
                .map_err(|e| ConfigError(format!("basis '{label}': {e}")))?,
        );
    }
    let basis = symx::ExpansionBasis::from_paulis(&paulis)
        .map_err(|e| RunError::Config(ConfigError(e.to_string())))?;
    let ham = match hamiltonian {
        Some(terms) => build_observable_from(terms, ctx.circuit.n_qubits())?,
        None => ctx.obs.clone(),
    };
    let run = symx::subspace_mitigate_on_state(
        &ctx.noisy,
        ctx.ideal_value,
        &ctx.obs,
        &ham,
        &basis,
        threshold,
    )
    .map_err(sim_err)?;
    if run.below_true_ground {
        eprintln!(
            "warning: subspace ground energy {} undershoots the Hamiltonian's true \
             ground energy (mixed-state GEVP has no variational guarantee)",
            run.energies[0]
        );
    }
    // Subspace costs are problem-specific (basis-size measurements); no
    // closed-form overhead is predicted.
    Ok(ResultRow::from_report("subspace", &run.report, 1.0, ctx.seed))
}

fn run_learn(
    ctx: &Context,
    train_count: usize,
    truncate_top: Option<usize>,
    stream: u64,
) -> Result<ResultRow, RunError> {
    let mut rng = RngStream::from_parts(ctx.seed, stream, 0);
    let variants =
        learn::make_clifford_variants(&ctx.circuit, train_count, &mut rng).map_err(sim_err)?;

    let variant_counter = RefCell::new(0u64);
    let noisy_eval = |c: &NoisyCircuit| -> qem_core::Result<f64> {
        let state = match ctx.noise_model {
            NoiseModelKind::PerLocation => c.run(1.0)?,
            NoiseModelKind::GlobalDepolarizing => c.global_depolarizing_state(1.0)?,
        };
        match ctx.mode {
            Mode::Exact => state.expectation(&ctx.obs),
            Mode::Sampled => {
                let id = *variant_counter.borrow();
                *variant_counter.borrow_mut() += 1;
                let samples = zne::sample_observable_shots(
                    &state,
                    &ctx.obs,
                    ctx.shots,
                    ctx.seed,
                    (stream << 16) | id,
                )?;
                Ok(mean_and_variance(&samples).0)
            }
        }
    };

    let mut ts = learn::build_training_set(&variants, &ctx.obs, noisy_eval).map_err(sim_err)?;
    if let Some(k) = truncate_top {
        ts = ts.truncate_top(k);
    }
    let (theta0, theta1) = learn::fit_rescale_shift(&ts).map_err(sim_err)?;

    let report = match ctx.mode {
        Mode::Exact => {
            let noisy_primary = ctx.noisy.expectation(&ctx.obs).map_err(sim_err)?;
            EstimatorReport::exact(theta0 + theta1 * noisy_primary, Some(ctx.ideal_value))
        }
        Mode::Sampled => {
            let samples = ctx.sample_state(&ctx.noisy, stream << 20).map_err(sim_err)?;
            let (mean, variance) = mean_and_variance(&samples);
            EstimatorReport::from_moments(
                theta0 + theta1 * mean,
                theta1 * theta1 * variance,
                ctx.shots,
                Some(ctx.ideal_value),
            )
        }
    };
    // Rescaling multiplies the shot noise by θ1².
    let overhead = (theta1 * theta1).max(1.0);
    Ok(ResultRow::from_report("learn", &report, overhead, ctx.seed))
}
