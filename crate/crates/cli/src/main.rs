//! Command-line driver for band-tracking experiments.
//!
//! Exit codes: 0 every summary check passed; 1 at least one check failed;
//! 2 configuration error (bad flags, bad config file, broken invariant);
//! 3 numerical abort (non-finite statistics, ODE blow-up, degenerate data).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bandlab::experiments::{
    run_experiment, write_outputs, ExperimentConfig, ExperimentKind,
};
use bandlab::Error;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "bandlab",
    version,
    about = "Simulation experiments for band tracking under proportional trading costs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and emit CSV artifacts plus a summary table.
    Run {
        /// Experiment name; see `bandlab list`.
        experiment: String,
        /// Flat key=value config file applied over the experiment defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Master seed override.
        #[arg(long)]
        seed: Option<u64>,
        /// Path-count override.
        #[arg(long)]
        paths: Option<usize>,
        /// Fixed step size, replacing the per-run coupling rule dt = δ²/100.
        #[arg(long)]
        dt: Option<f64>,
        /// Output directory for CSV artifacts (none = print summary only).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Restrict the band-width grid to a single δ.
        #[arg(long)]
        delta: Option<f64>,
        /// Restrict the cost-rate grid to a single ε.
        #[arg(long)]
        epsilon: Option<f64>,
        /// Market price of risk; sets the price drift to λ·σ.
        #[arg(long)]
        lambda: Option<f64>,
        /// Worker threads. Changes wall-clock time only, never output bytes.
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Check a config file against every invariant and list violations.
    Validate {
        /// Config file to check; must contain an `experiment=` key.
        #[arg(long)]
        config: PathBuf,
    },
    /// List available experiments.
    List,
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::List => {
            for kind in ExperimentKind::all() {
                println!("{:<16} {}", kind.name(), kind.describe());
            }
            ExitCode::SUCCESS
        }
        Command::Validate { config } => validate_command(&config),
        Command::Run {
            experiment,
            config,
            seed,
            paths,
            dt,
            out,
            delta,
            epsilon,
            lambda,
            workers,
        } => {
            let Some(kind) = ExperimentKind::parse(&experiment) else {
                eprintln!(
                    "config error: unknown experiment '{experiment}' (valid: {})",
                    ExperimentKind::all()
                        .iter()
                        .map(|k| k.name())
                        .collect::<Vec<_>>()
                        .join(", ")
                );
                return ExitCode::from(2);
            };
            let mut cfg = ExperimentConfig::defaults(kind);
            if let Some(path) = config {
                if let Err(msg) = apply_config_file(&mut cfg, &path) {
                    eprintln!("config error: {msg}");
                    return ExitCode::from(2);
                }
            }
            // Flags win over the config file.
            if let Some(s) = seed {
                cfg.master_seed = s;
            }
            if let Some(n) = paths {
                cfg.n_paths = n;
            }
            if let Some(x) = dt {
                cfg.dt = Some(x);
            }
            if let Some(d) = delta {
                cfg.delta_grid = vec![d];
            }
            if let Some(e) = epsilon {
                cfg.epsilon_grid = vec![e];
            }
            if let Some(l) = lambda {
                cfg.lambda = Some(l);
            }
            if let Some(dir) = out {
                cfg.output_dir = Some(dir);
            }
            run_command(&cfg, workers)
        }
    }
}

fn run_command(cfg: &ExperimentConfig, workers: usize) -> ExitCode {
    let violations = cfg.validate();
    if !violations.is_empty() {
        for v in &violations {
            eprintln!("config error: {v}");
        }
        return ExitCode::from(2);
    }
    let output = match run_experiment(cfg, workers) {
        Ok(output) => output,
        Err(e) => {
            let code = exit_code_for(&e);
            eprintln!(
                "{}: {e}",
                if code == 2 { "config error" } else { "numerical abort" }
            );
            return ExitCode::from(code);
        }
    };
    if cfg.output_dir.is_some() {
        match write_outputs(cfg, &output) {
            Ok(paths) => {
                for p in paths {
                    println!("wrote {}", p.display());
                }
            }
            Err(e) => {
                eprintln!("numerical abort: {e}");
                return ExitCode::from(3);
            }
        }
    }
    for c in &output.criteria {
        println!(
            "{}: observed={} expected={} tolerance={} {}",
            c.name,
            c.observed,
            c.expected,
            c.tolerance,
            if c.pass { "PASS" } else { "FAIL" }
        );
    }
    if output.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn validate_command(path: &Path) -> ExitCode {
    let kind = match experiment_key(path) {
        Ok(kind) => kind,
        Err(msg) => {
            eprintln!("config error: {msg}");
            return ExitCode::from(2);
        }
    };
    let mut cfg = ExperimentConfig::defaults(kind);
    if let Err(msg) = apply_config_file(&mut cfg, path) {
        eprintln!("config error: {msg}");
        return ExitCode::from(2);
    }
    let violations = cfg.validate();
    if violations.is_empty() {
        println!("ok: {} configuration satisfies all invariants", kind.name());
        ExitCode::SUCCESS
    } else {
        for v in &violations {
            eprintln!("config error: {v}");
        }
        ExitCode::from(2)
    }
}

/// First pass over a config file: find the `experiment=` key.
fn experiment_key(path: &Path) -> Result<ExperimentKind, String> {
    let text =
        fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some((key, value)) = line.split_once('=') {
            if key.trim() == "experiment" {
                let value = value.trim();
                return ExperimentKind::parse(value).ok_or_else(|| {
                    anchored(path, idx + 1, &format!("unknown experiment '{value}'"))
                });
            }
        }
    }
    Err(format!("{}: missing required key 'experiment'", path.display()))
}

/// Applies a flat key=value config file over `cfg`. Errors are anchored to
/// the offending line as `file:line: message`.
fn apply_config_file(cfg: &mut ExperimentConfig, path: &Path) -> Result<(), String> {
    let text =
        fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(anchored(path, line_no, "expected key=value"));
        };
        apply_key(cfg, key.trim(), value.trim())
            .map_err(|msg| anchored(path, line_no, &msg))?;
    }
    Ok(())
}

fn anchored(path: &Path, line: usize, msg: &str) -> String {
    format!("{}:{line}: {msg}", path.display())
}

fn apply_key(cfg: &mut ExperimentConfig, key: &str, value: &str) -> Result<(), String> {
    match key {
        "experiment" => {
            let kind = ExperimentKind::parse(value)
                .ok_or_else(|| format!("unknown experiment '{value}'"))?;
            if kind != cfg.experiment {
                return Err(format!(
                    "config file sets experiment={value}, but {} was requested",
                    cfg.experiment.name()
                ));
            }
        }
        "horizon" => cfg.horizon = parse_num::<f64>(key, value)?,
        "n_paths" => cfg.n_paths = parse_num::<usize>(key, value)?,
        "master_seed" => cfg.master_seed = parse_num::<u64>(key, value)?,
        "p" => cfg.p = parse_num::<f64>(key, value)?,
        "delta_grid" => cfg.delta_grid = parse_grid(key, value)?,
        "epsilon_grid" => cfg.epsilon_grid = parse_grid(key, value)?,
        "dt" => {
            cfg.dt = if value == "auto" { None } else { Some(parse_num::<f64>(key, value)?) }
        }
        "lambda" => {
            cfg.lambda =
                if value == "auto" { None } else { Some(parse_num::<f64>(key, value)?) }
        }
        "mu_s" => cfg.mu_s = parse_num::<f64>(key, value)?,
        "sigma_s" => cfg.sigma_s = parse_num::<f64>(key, value)?,
        "s0" => cfg.s0 = parse_num::<f64>(key, value)?,
        "risk_aversion" => cfg.risk_aversion = parse_num::<f64>(key, value)?,
        "iota" => cfg.iota = parse_num::<f64>(key, value)?,
        "kim_omberg" => {
            cfg.kim_omberg = value
                .parse::<bool>()
                .map_err(|_| format!("invalid value for {key}: '{value}' (want true/false)"))?
        }
        "lambda_rev" => cfg.lambda_rev = parse_num::<f64>(key, value)?,
        "mu_bar" => cfg.mu_bar = parse_num::<f64>(key, value)?,
        "sigma_mu" => cfg.sigma_mu = parse_num::<f64>(key, value)?,
        "rho" => cfg.rho = parse_num::<f64>(key, value)?,
        "mu0" => cfg.mu0 = parse_num::<f64>(key, value)?,
        "riccati_steps" => cfg.riccati_steps = parse_num::<usize>(key, value)?,
        "output_dir" => cfg.output_dir = Some(PathBuf::from(value)),
        _ => return Err(format!("unknown key '{key}'")),
    }
    Ok(())
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String> {
    value.parse::<T>().map_err(|_| format!("invalid value for {key}: '{value}'"))
}

fn parse_grid(key: &str, value: &str) -> Result<Vec<f64>, String> {
    value
        .split(',')
        .map(|tok| parse_num::<f64>(key, tok.trim()))
        .collect()
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::InvalidParameter { .. } | Error::InvalidGrid(_) | Error::ShapeMismatch(_) => 2,
        Error::NonFinite { .. } | Error::OdeBlowUp { .. } | Error::DegenerateSample(_) => 3,
    }
}
