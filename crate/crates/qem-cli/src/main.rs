//! `qem` experiment runner.
//!
//! Commands:
//!   qem run <config.json> [--out-dir DIR]
//!   qem calibrate-readout <config.json> -o <A.json> [--form full|tensor]
//!   qem compare <results.csv>
//!
//! Exit codes: 0 success, 2 usage/schema error, 3 simulation failure.

mod assignment;
mod compare;
mod config;
mod csv;
mod runner;
mod threads;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use config::{ExperimentConfig, FormSpec};

fn print_usage() {
    eprintln!("Usage: qem <command> [args]");
    eprintln!();
    eprintln!("  run <config.json> [--out-dir DIR]   Run every method block; writes");
    eprintln!("                                      results.csv (and sweep.csv for zne)");
    eprintln!("  calibrate-readout <config.json> -o <A.json> [--form full|tensor]");
    eprintln!("                                      Calibrate the assignment matrix of the");
    eprintln!("                                      config's measurement noise");
    eprintln!("  compare <results.csv>               Bias/variance/overhead table and");
    eprintln!("                                      MSE ranking");
    eprintln!();
    eprintln!("  QEM_THREADS caps shot-evaluation parallelism (results are identical");
    eprintln!("  for any thread count).");
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    if args.len() < 2 {
        print_usage();
        return ExitCode::from(2);
    }
    match args[1].as_str() {
        "run" => cmd_run(&args[2..]),
        "calibrate-readout" => cmd_calibrate(&args[2..]),
        "compare" => cmd_compare(&args[2..]),
        "--help" | "-h" | "help" => {
            print_usage();
            ExitCode::SUCCESS
        }
        other => {
            eprintln!("unknown command '{other}'");
            print_usage();
            ExitCode::from(2)
        }
    }
}

fn load_config(path: &str) -> Result<(ExperimentConfig, PathBuf), ExitCode> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("cannot read {path}: {e}");
            return Err(ExitCode::from(2));
        }
    };
    match ExperimentConfig::from_json(&text) {
        Ok(cfg) => {
            let dir = Path::new(path)
                .parent()
                .map(Path::to_path_buf)
                .unwrap_or_else(|| PathBuf::from("."));
            Ok((cfg, dir))
        }
        Err(e) => {
            eprintln!("{e}");
            Err(ExitCode::from(2))
        }
    }
}

fn cmd_run(args: &[String]) -> ExitCode {
    let mut config_path: Option<&str> = None;
    let mut out_dir = PathBuf::from(".");
    let mut i = 0;
    while i < args.len() {
        match args[i].as_str() {
            "--out-dir" => {
                i += 1;
                let Some(dir) = args.get(i) else {
                    eprintln!("--out-dir needs a value");
                    return ExitCode::from(2);
                };
                out_dir = PathBuf::from(dir);
            }
            other if config_path.is_none() => config_path = Some(other),
            other => {
                eprintln!("unexpected argument '{other}'");
                return ExitCode::from(2);
            }
        }
        i += 1;
    }
    let Some(path) = config_path else {
        eprintln!("run needs a config file");
        return ExitCode::from(2);
    };
    let (cfg, config_dir) = match load_config(path) {
        Ok(v) => v,
        Err(code) => return code,
    };

    match runner::execute(&cfg, &config_dir) {
        Ok(output) => {
            if let Err(e) = std::fs::create_dir_all(&out_dir) {
                eprintln!("cannot create {}: {e}", out_dir.display());
                return ExitCode::from(3);
            }
            let results_path = out_dir.join("results.csv");
            if let Err(e) = std::fs::write(&results_path, &output.results_csv) {
                eprintln!("cannot write {}: {e}", results_path.display());
                return ExitCode::from(3);
            }
            println!("wrote {}", results_path.display());
            if let Some(sweep) = &output.sweep_csv {
                let sweep_path = out_dir.join("sweep.csv");
                if let Err(e) = std::fs::write(&sweep_path, sweep) {
                    eprintln!("cannot write {}: {e}", sweep_path.display());
                    return ExitCode::from(3);
                }
                println!("wrote {}", sweep_path.display());
            }
            ExitCode::SUCCESS
        }
        Err(runner::RunError::Config(e)) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
        Err(runner::RunError::Simulation(e)) => {
            eprintln!("simulation error: {e}");
            ExitCode::from(3)
        }
    }
}

fn cmd_calibrate(args: &[String]) -> ExitCode {
    let mut config_path: Option<&str> = None;
    let mut out_path: Option<&str> = None;
    let mut form = FormSpec::Full;
    let mut i = 0;
    while i < args.len() {
        match args[i].as_str() {
            "-o" | "--output" => {
                i += 1;
                out_path = args.get(i).map(String::as_str);
            }
            "--form" => {
                i += 1;
                form = match args.get(i).map(String::as_str) {
                    Some("full") => FormSpec::Full,
                    Some("tensor") => FormSpec::Tensor,
                    other => {
                        eprintln!("--form must be full or tensor, got {other:?}");
                        return ExitCode::from(2);
                    }
                };
            }
            other if config_path.is_none() => config_path = Some(other),
            other => {
                eprintln!("unexpected argument '{other}'");
                return ExitCode::from(2);
            }
        }
        i += 1;
    }
    let (Some(path), Some(out)) = (config_path, out_path) else {
        eprintln!("calibrate-readout needs a config file and -o <A.json>");
        return ExitCode::from(2);
    };
    let (cfg, _) = match load_config(path) {
        Ok(v) => v,
        Err(code) => return code,
    };
    let channel = match cfg.build_measurement_channel() {
        Ok(Some(ch)) => ch,
        Ok(None) => {
            eprintln!("config error: calibrate-readout needs measurement_noise");
            return ExitCode::from(2);
        }
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };
    match qem_core::readout::calibrate(&channel, cfg.n_qubits, form.form()) {
        Ok(a) => match assignment::to_json(&a) {
            Ok(text) => {
                if let Err(e) = std::fs::write(out, text) {
                    eprintln!("cannot write {out}: {e}");
                    return ExitCode::from(3);
                }
                println!("wrote {out}");
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("{e}");
                ExitCode::from(3)
            }
        },
        Err(e) => {
            eprintln!("calibration failed: {e}");
            ExitCode::from(3)
        }
    }
}

fn cmd_compare(args: &[String]) -> ExitCode {
    let [path] = args else {
        eprintln!("compare needs exactly one results.csv argument");
        return ExitCode::from(2);
    };
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("cannot read {path}: {e}");
            return ExitCode::from(2);
        }
    };
    match compare::compare(&text) {
        Ok(report) => {
            print!("{report}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
    }
}
