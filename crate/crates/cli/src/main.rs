//! `inertia`: forward solves, verification checks, probes and reconstruction
//! experiments driven by a JSON config.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use inertia::error::Error;
use inertia::harness::{
    adjoint_check, echo_config, gradient_check, grid_convergence, run_experiment, state_csv, sweep,
    ExperimentConfig, Setup,
};
use inertia::inversion::{tcc_probe, StopReason};

/// Environment variable overriding the output directory.
const OUT_ENV: &str = "INERTIA_OUT_DIR";

#[derive(Parser, Debug)]
#[command(
    name = "inertia",
    version,
    about = "Inertial-wave solver and (γ, Ω) reconstruction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// JSON experiment config; defaults are used for missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated `dotted.key=value` overrides, e.g. `n=200,noise.relative_level=0.05`.
    #[arg(long)]
    overrides: Option<String>,
    /// Output directory (also `INERTIA_OUT_DIR`); defaults to `out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// More progress output on stderr.
    #[arg(short, long, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve at the true parameters and write `state.csv`.
    Forward(Common),
    /// Run one synthetic reconstruction.
    Reconstruct(Common),
    /// Check the sensitivity/adjoint inner-product identity.
    AdjointCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Compare misfit gradients with central differences.
    GradientCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 5)]
        directions: usize,
        #[arg(long, default_value_t = 1e-5)]
        step: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
    /// Sample the tangential cone ratio around the truth.
    Tcc(Common),
    /// Run the sweep described by the `sweep` section of the config.
    Sweep(Common),
    /// State error against the closed-form truth under refinement.
    GridConvergence {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "50,100,200,400")]
        sizes: Vec<usize>,
    },
}

/// Failure carried to the exit code and `error.json`.
struct Failure {
    kind: String,
    message: String,
    code: u8,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) | Error::Usage(_) => 2,
            Error::NearResonance { .. } | Error::Internal(_) => 3,
            Error::Io(_) => 1,
        };
        Failure {
            kind: e.kind().to_string(),
            message: e.to_string(),
            code,
        }
    }
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Failure {
            kind: "config".into(),
            message: message.into(),
            code: 2,
        }
    }

    fn numerical(kind: &str, message: impl Into<String>) -> Self {
        Failure {
            kind: kind.into(),
            message: message.into(),
            code: 3,
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Splits on commas outside brackets and braces.
fn split_overrides(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    for ch in text.chars() {
        match ch {
            '[' | '{' => depth += 1,
            ']' | '}' => depth -= 1,
            ',' if depth == 0 => {
                out.push(std::mem::take(&mut cur));
                continue;
            }
            _ => {}
        }
        cur.push(ch);
    }
    out.push(cur);
    out.into_iter()
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

fn apply_override(doc: &mut Value, item: &str) -> CliResult<()> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| Failure::config(format!("override `{item}` is not key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = node.as_object_mut().ok_or_else(|| {
            Failure::config(format!("override key `{key}` descends into a non-object"))
        })?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj.entry(part.to_string()).or_insert_with(|| json!({}));
    }
    Ok(())
}

fn resolve(common: &Common) -> CliResult<(ExperimentConfig, PathBuf)> {
    let base = match &common.config {
        Some(path) => fs::read_to_string(path)
            .map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))?,
        None => "{}".to_string(),
    };
    let mut doc: Value = serde_json::from_str(&base)
        .map_err(|e| Failure::config(format!("invalid config JSON: {e}")))?;
    // Fill defaults first so overrides can address nested keys.
    let defaults: ExperimentConfig =
        serde_json::from_value(doc.clone()).map_err(|e| Failure::config(e.to_string()))?;
    doc = serde_json::to_value(&defaults).map_err(|e| Failure::config(e.to_string()))?;
    if let Some(text) = &common.overrides {
        for item in split_overrides(text) {
            apply_override(&mut doc, &item)?;
        }
    }
    let mut config: ExperimentConfig =
        serde_json::from_value(doc).map_err(|e| Failure::config(e.to_string()))?;
    let out = common
        .out
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .or_else(|| config.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    config.output.dir = Some(out.clone());
    config.validate()?;
    echo_config(&config, &out)?;
    Ok((config, out))
}

fn write(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| Error::from(e).into())
}

fn run(command: &Command, verbose: u8, dir: &mut Option<PathBuf>) -> CliResult<String> {
    let mut resolve = |c: &Common| -> CliResult<(ExperimentConfig, PathBuf)> {
        let (config, out) = resolve(c)?;
        *dir = Some(out.clone());
        Ok((config, out))
    };
    match command {
        Command::Forward(common) => {
            let (config, out) = resolve(common)?;
            let setup = Setup::new(&config)?;
            let psi = setup.state(&config)?;
            write(&out.join("state.csv"), &state_csv(&setup.grid, &psi))?;
            let exact = setup.truth.psi_exact(&setup.grid);
            let err = setup.grid.norm_l2(&psi.sub(&exact)?) / setup.grid.norm_l2(&exact);
            Ok(format!(
                "forward n={} m={} omega={} rel_l2_error={err:.3e}",
                config.n, config.m, config.omega_freq
            ))
        }
        Command::Reconstruct(common) => {
            let (config, _) = resolve(common)?;
            let (record, _) = run_experiment(&config, "reconstruct")?;
            let line = format!(
                "reconstruct K={} stop={:?} residual={:.3e} rel_err_gamma={:.3e} rel_err_omega={:.3e} wall_ms={:.0}",
                record.stop_index,
                record.stop_reason.unwrap_or(StopReason::MaxIter),
                record.final_residual,
                record.rel_err_gamma,
                record.rel_err_omega,
                record.wall_ms
            );
            match record.stop_reason {
                Some(StopReason::NearResonance) => Err(Failure::numerical("near_resonance", line)),
                Some(StopReason::LineSearchFailure) => {
                    Err(Failure::numerical("line_search_failure", line))
                }
                _ => Ok(line),
            }
        }
        Command::AdjointCheck {
            common,
            trials,
            seed,
            tol,
        } => {
            let (config, out) = resolve(common)?;
            let worst = adjoint_check(&config, *trials, *seed)?;
            write(
                &out.join("adjoint_check.json"),
                &json!({ "max_relative_mismatch": worst, "trials": trials, "tol": tol })
                    .to_string(),
            )?;
            let line = format!(
                "adjoint-check scheme={} max_rel_mismatch={worst:.3e}",
                config.scheme.label()
            );
            if worst <= *tol {
                Ok(line)
            } else {
                Err(Failure::numerical("adjoint_mismatch", line))
            }
        }
        Command::GradientCheck {
            common,
            directions,
            step,
            seed,
            tol,
        } => {
            let (config, out) = resolve(common)?;
            let worst = gradient_check(&config, *directions, *step, *seed)?;
            write(
                &out.join("gradient_check.json"),
                &json!({ "max_relative_error": worst, "step": step, "tol": tol }).to_string(),
            )?;
            let line = format!("gradient-check max_rel_error={worst:.3e} step={step:e}");
            if worst <= *tol {
                Ok(line)
            } else {
                Err(Failure::numerical("gradient_mismatch", line))
            }
        }
        Command::Tcc(common) => {
            let (config, out) = resolve(common)?;
            let setup = Setup::new(&config)?;
            let problem = setup.problem(&config)?;
            let center = setup.truth.parameters(&setup.grid);
            let report = tcc_probe(&problem, &center, &config.probe)?;
            let mut csv = String::from("ratio,distance,data_distance,remainder\n");
            for s in &report.samples {
                let _ = writeln!(
                    csv,
                    "{:e},{:e},{:e},{:e}",
                    s.ratio, s.distance, s.data_distance, s.remainder
                );
            }
            write(&out.join("tcc_samples.csv"), &csv)?;
            Ok(format!(
                "tcc radius={} max_ratio={:.3e} median_ratio={:.3e} skipped={}",
                report.radius, report.max_ratio, report.median_ratio, report.skipped
            ))
        }
        Command::Sweep(common) => {
            let (config, _) = resolve(common)?;
            let (records, _) = sweep(&config, &config.sweep)?;
            let failed = records.iter().filter(|r| r.error.is_some()).count();
            if verbose > 0 {
                for r in &records {
                    eprintln!(
                        "{} K={} rel_err_omega={:.3e}",
                        r.run_id, r.stop_index, r.rel_err_omega
                    );
                }
            }
            Ok(format!("sweep runs={} failed={failed}", records.len()))
        }
        Command::GridConvergence { common, sizes } => {
            let (config, out) = resolve(common)?;
            let rows = grid_convergence(&config, sizes)?;
            let mut csv = String::from("n,rel_l2_error,order\n");
            for r in &rows {
                let order = r.order.map_or(String::new(), |o| format!("{o:.4}"));
                let _ = writeln!(csv, "{},{:e},{order}", r.n, r.error);
            }
            write(&out.join("convergence.csv"), &csv)?;
            let last = rows.last().and_then(|r| r.order).unwrap_or(f64::NAN);
            Ok(format!(
                "grid-convergence sizes={} last_order={last:.3}",
                rows.len()
            ))
        }
    }
}

fn common(command: &Command) -> &Common {
    match command {
        Command::Forward(c) | Command::Reconstruct(c) | Command::Tcc(c) | Command::Sweep(c) => c,
        Command::AdjointCheck { common, .. }
        | Command::GradientCheck { common, .. }
        | Command::GridConvergence { common, .. } => common,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let c = common(&cli.command);
    let mut dir = None;
    match run(&cli.command, c.verbose, &mut dir) {
        Ok(line) => {
            println!("{line}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            let dir = dir
                .or_else(|| c.out.clone())
                .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("out"));
            let doc = json!({ "kind": f.kind, "message": f.message, "exit_code": f.code });
            if fs::create_dir_all(&dir).is_ok() {
                let _ = fs::write(
                    dir.join("error.json"),
                    serde_json::to_string_pretty(&doc).unwrap_or_default(),
                );
            }
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
