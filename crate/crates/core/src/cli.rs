//! Command-line surface of `cir-usv`.
//!
//! Every command renders its numeric output to a string so that it can be
//! written to stdout or to `--out`. When `--out` is given, a run manifest is
//! written next to it as `<out>.manifest.json`. Exit codes: 0 decided /
//! success, 1 Monte Carlo check outside tolerance, 2 invalid input, 3
//! numerical failure.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::kernel::{
    term_structure_kernel, KernelDecomposition, DEFAULT_N_SAMPLES, DEFAULT_RANK_TOL,
    DEFAULT_TAU_MAX,
};
use crate::model::{usv_family_3f, validate, CirModel, ModelError, UsvFamilyParams};
use crate::montecarlo::{mc_bond_price, simulate_paths, Recording, SimConfig};
use crate::pricing::{bond_price, vol_decomposition};
use crate::riccati::solve_riccati;
use crate::usv::{matrix_rows, usv_certificate, DEFAULT_USV_TOL};

pub const THREADS_ENV: &str = "CIR_USV_THREADS";
/// `validate-mc` passes iff `|z| <= 4`.
pub const MC_Z_LIMIT: f64 = 4.0;

#[derive(Debug, Parser)]
#[command(
    name = "cir-usv",
    version,
    about = "Multi-factor CIR term structures and unspanned stochastic volatility"
)]
pub struct Cli {
    /// Write the result here instead of stdout; a manifest goes to `<out>.manifest.json`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decide whether a model exhibits unspanned stochastic volatility.
    CheckUsv {
        /// Model JSON file, or `-` for stdin.
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TAU_MAX)]
        tau_max: f64,
        #[arg(long, default_value_t = DEFAULT_N_SAMPLES)]
        n_samples: usize,
        #[arg(long, default_value_t = DEFAULT_RANK_TOL)]
        rank_tol: f64,
        #[arg(long, default_value_t = DEFAULT_USV_TOL)]
        tol: f64,
    },
    /// Emit a member of the three-factor USV family as model JSON.
    MakeFamily {
        #[arg(long, allow_negative_numbers = true)]
        beta11: f64,
        #[arg(long, allow_negative_numbers = true)]
        beta22: f64,
        #[arg(long, allow_negative_numbers = true)]
        beta23: f64,
        #[arg(long, allow_negative_numbers = true)]
        rho2: f64,
        #[arg(
            long,
            value_delimiter = ',',
            allow_hyphen_values = true,
            default_value = "0.1,0.1,0.1"
        )]
        b: Vec<f64>,
    },
    /// Tabulate A(tau), B(tau) and the bond price at x0.
    Curve {
        #[arg(long)]
        model: PathBuf,
        /// Comma-separated state; defaults to all ones.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x0: Option<Vec<f64>>,
        #[arg(long, default_value_t = DEFAULT_TAU_MAX)]
        tau_max: f64,
        #[arg(long, default_value_t = 301)]
        n: usize,
    },
    /// Compare the analytic bond price with a Monte Carlo estimate.
    ValidateMc {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 100_000)]
        n_paths: usize,
        #[arg(long, default_value_t = 0.002)]
        dt: f64,
        /// Bond maturity T.
        #[arg(long, default_value_t = 1.0)]
        maturity: f64,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x0: Option<Vec<f64>>,
    },
    /// Loadings of the log-bond return variance on (Z, U) per maturity.
    VolDecomp {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0,0.5,1,2,5,10")]
        taus: Vec<f64>,
        /// Explicit S as rows separated by ';', entries by ','.
        #[arg(long, allow_hyphen_values = true, requires = "l")]
        s: Option<String>,
        /// Explicit L in the same format as --s.
        #[arg(long, allow_hyphen_values = true, requires = "s")]
        l: Option<String>,
    },
    /// Dump simulated paths as CSV.
    Simulate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x0: Option<Vec<f64>>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        n_paths: usize,
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
        #[arg(long, default_value_t = 1.0)]
        horizon: f64,
        /// Keep every k-th step.
        #[arg(long, default_value_t = 1)]
        record_every: usize,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) | CliError::Io(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

fn numeric(e: impl std::fmt::Display) -> CliError {
    CliError::Numeric(e.to_string())
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub model_hash: Option<String>,
    pub tool_version: String,
    pub started_unix_ms: u128,
    pub wall_clock_ms: u128,
    pub seed: Option<u64>,
}

/// Rendered output of one command.
#[derive(Debug)]
pub struct Outcome {
    pub output: String,
    pub exit_code: i32,
    /// Diagnostics for stderr.
    pub notes: Vec<String>,
    pub manifest: RunManifest,
}

/// Reads and validates a model file; `-` reads stdin.
pub fn load_model(path: &Path) -> Result<CirModel, CliError> {
    let text = if path == Path::new("-") {
        std::io::read_to_string(std::io::stdin())
            .map_err(|e| CliError::Input(format!("cannot read stdin: {e}")))?
    } else {
        std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?
    };
    parse_model(&text)
}

pub fn parse_model(text: &str) -> Result<CirModel, CliError> {
    let model: CirModel = serde_json::from_str(text).map_err(|e| {
        CliError::Input(format!(
            "malformed model JSON at line {}, column {}: {e}",
            e.line(),
            e.column()
        ))
    })?;
    let report = validate(&model);
    if !report.ok {
        return Err(CliError::Input(format!("invalid model: {report}")));
    }
    Ok(model)
}

/// SHA-256 of the canonical JSON encoding of the model.
pub fn model_hash(model: &CirModel) -> String {
    let canonical = serde_json::to_string(model).expect("model serializes");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

/// Shortest round-trip decimal representation used in CSV output; `-0.0` prints as `0.0`.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0.0".into();
    }
    format!("{x:?}")
}

fn state_or_ones(x0: &Option<Vec<f64>>, d: usize) -> Result<Vec<f64>, CliError> {
    let x = x0.clone().unwrap_or_else(|| vec![1.0; d]);
    if x.len() != d {
        return Err(CliError::Input(format!(
            "x0 has length {}, model has d = {d}",
            x.len()
        )));
    }
    if x.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(CliError::Input("x0 must be finite and >= 0".into()));
    }
    Ok(x)
}

fn parse_matrix(text: &str, name: &str) -> Result<DMatrix<f64>, CliError> {
    let rows: Vec<Vec<f64>> = text
        .split(';')
        .map(|row| {
            row.split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|e| CliError::Input(format!("--{name}: bad number {v:?}: {e}")))
                })
                .collect()
        })
        .collect::<Result<_, _>>()?;
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(CliError::Input(format!(
            "--{name}: rows have different lengths"
        )));
    }
    Ok(DMatrix::from_row_iterator(
        rows.len(),
        ncols,
        rows.into_iter().flatten(),
    ))
}

fn now_ms() -> u128 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

/// Runs one command. The numeric output depends only on the arguments.
pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let started = now_ms();
    let clock = std::time::Instant::now();
    let (name, config, model, seed, output, exit_code, notes) = match &cli.command {
        Command::CheckUsv {
            model,
            tau_max,
            n_samples,
            rank_tol,
            tol,
        } => {
            let m = load_model(model)?;
            let kd = term_structure_kernel(&m, *tau_max, *n_samples, *rank_tol).map_err(numeric)?;
            let cert = usv_certificate(&m, &kd, *tol).map_err(numeric)?;
            let doc = json!({
                "usv": cert.usv,
                "d": m.d,
                "m": cert.m,
                "kernel_basis": kd.kernel_vectors(),
                "s": matrix_rows(&kd.s),
                "l": matrix_rows(&kd.l),
                "singular_values": kd.singular_values,
                "coefficients": cert.coefficients,
                "max_abs_coefficient": cert.max_abs_coefficient,
                "witness": cert.witness,
                "witness_value": cert.witness_value,
                "threshold": cert.threshold,
                "tol": tol,
                "tau_max": tau_max,
                "n_samples": n_samples,
                "rank_tol": rank_tol,
                "warnings": kd.warnings,
            });
            let config = json!({
                "model": model, "tau_max": tau_max, "n_samples": n_samples,
                "rank_tol": rank_tol, "tol": tol,
            });
            let out = serde_json::to_string_pretty(&doc).expect("json") + "\n";
            (
                "check-usv",
                config,
                Some(m),
                None,
                out,
                0,
                kd.warnings.clone(),
            )
        }
        Command::MakeFamily {
            beta11,
            beta22,
            beta23,
            rho2,
            b,
        } => {
            let p = UsvFamilyParams {
                beta11: *beta11,
                beta22: *beta22,
                beta23: *beta23,
                rho2: *rho2,
            };
            let b3: [f64; 3] = b
                .as_slice()
                .try_into()
                .map_err(|_| CliError::Input(format!("--b needs 3 values, got {}", b.len())))?;
            let m = usv_family_3f(&p, b3).map_err(|e| match e {
                ModelError::Invalid(r) => CliError::Input(format!("constraint violated: {r}")),
                other => CliError::Input(other.to_string()),
            })?;
            let out = serde_json::to_string_pretty(&m).expect("json") + "\n";
            let config =
                json!({"beta11": beta11, "beta22": beta22, "beta23": beta23, "rho2": rho2, "b": b});
            ("make-family", config, Some(m), None, out, 0, Vec::new())
        }
        Command::Curve {
            model,
            x0,
            tau_max,
            n,
        } => {
            let m = load_model(model)?;
            let x = state_or_ones(x0, m.d)?;
            if *n < 2 || !(*tau_max > 0.0) {
                return Err(CliError::Input("need --n >= 2 and --tau-max > 0".into()));
            }
            let sol = solve_riccati(&m, *tau_max, *n).map_err(numeric)?;
            let mut out = String::from("tau,A");
            for i in 1..=m.d {
                write!(out, ",B_{i}").unwrap();
            }
            out.push_str(",price\n");
            for (k, &tau) in sol.tau_grid.iter().enumerate() {
                let price = bond_price(&m, &sol, tau, &x).map_err(numeric)?;
                write!(out, "{},{}", fmt_num(tau), fmt_num(sol.a[k])).unwrap();
                for v in &sol.b[k] {
                    write!(out, ",{}", fmt_num(*v)).unwrap();
                }
                writeln!(out, ",{}", fmt_num(price)).unwrap();
            }
            let config = json!({"model": model, "x0": x, "tau_max": tau_max, "n": n});
            ("curve", config, Some(m), None, out, 0, Vec::new())
        }
        Command::ValidateMc {
            model,
            seed,
            n_paths,
            dt,
            maturity,
            x0,
        } => {
            let m = load_model(model)?;
            let x = state_or_ones(x0, m.d)?;
            if !(*maturity >= 0.0) {
                return Err(CliError::Input("--maturity must be >= 0".into()));
            }
            let cfg = SimConfig::new(*n_paths, *dt, *maturity, *seed)
                .with_record(Recording::Times(vec![*maturity]));
            cfg.n_steps().map_err(|e| CliError::Input(e.to_string()))?;
            let sol = solve_riccati(&m, maturity.max(*dt), 2).map_err(numeric)?;
            let analytic = bond_price(&m, &sol, *maturity, &x).map_err(numeric)?;
            let paths = simulate_paths(&m, &x, &cfg).map_err(numeric)?;
            let est = mc_bond_price(&paths, *maturity).map_err(numeric)?;
            let z = est.z_score(analytic);
            let pass = z.abs() <= MC_Z_LIMIT;
            let mut notes = Vec::new();
            if est.suspicious_variance() {
                notes.push("warning: standard error exceeds the estimate".to_string());
            }
            let doc = json!({
                "analytic": analytic,
                "mc": est,
                "z_score": z,
                "pass": pass,
                "z_limit": MC_Z_LIMIT,
                "seed": seed,
                "n_paths": n_paths,
                "dt": dt,
                "maturity": maturity,
                "x0": x,
            });
            let out = serde_json::to_string_pretty(&doc).expect("json") + "\n";
            let config = json!({"model": model, "seed": seed, "n_paths": n_paths, "dt": dt, "maturity": maturity, "x0": x});
            (
                "validate-mc",
                config,
                Some(m),
                Some(*seed),
                out,
                if pass { 0 } else { 1 },
                notes,
            )
        }
        Command::VolDecomp { model, taus, s, l } => {
            let m = load_model(model)?;
            if taus.iter().any(|t| !(*t >= 0.0)) {
                return Err(CliError::Input("--taus must be >= 0".into()));
            }
            let tau_max = taus.iter().copied().fold(DEFAULT_TAU_MAX, f64::max);
            let kd = match (s, l) {
                (Some(s), Some(l)) => {
                    let s = parse_matrix(s, "s")?;
                    let l = parse_matrix(l, "l")?;
                    if s.ncols() != m.d {
                        return Err(CliError::Input(format!(
                            "--s must have d = {} columns",
                            m.d
                        )));
                    }
                    KernelDecomposition::from_maps(s, l)
                        .map_err(|e| CliError::Input(e.to_string()))?
                }
                _ => term_structure_kernel(&m, tau_max, DEFAULT_N_SAMPLES, DEFAULT_RANK_TOL)
                    .map_err(numeric)?,
            };
            let sol = solve_riccati(&m, tau_max, 2).map_err(numeric)?;
            let mut out = String::from("tau");
            for j in 1..=kd.m {
                write!(out, ",z_{j}").unwrap();
            }
            for j in 1..=(m.d - kd.m) {
                write!(out, ",u_{j}").unwrap();
            }
            out.push('\n');
            for &tau in taus {
                let vd = vol_decomposition(&m, &kd, &sol, tau).map_err(numeric)?;
                out.push_str(&fmt_num(tau));
                for c in vd.z_coeffs.iter().chain(&vd.u_coeffs) {
                    write!(out, ",{}", fmt_num(*c)).unwrap();
                }
                out.push('\n');
            }
            let mut notes = kd.warnings.clone();
            if kd.m == m.d {
                notes.push("note: m = d, the model has no unspanned factors".into());
            }
            let config = json!({"model": model, "taus": taus, "s": s, "l": l});
            ("vol-decomp", config, Some(m), None, out, 0, notes)
        }
        Command::Simulate {
            model,
            x0,
            seed,
            n_paths,
            dt,
            horizon,
            record_every,
        } => {
            let m = load_model(model)?;
            let x = state_or_ones(x0, m.d)?;
            let cfg = SimConfig::new(*n_paths, *dt, *horizon, *seed)
                .with_record(Recording::Stride(*record_every));
            cfg.n_steps().map_err(|e| CliError::Input(e.to_string()))?;
            let paths = simulate_paths(&m, &x, &cfg).map_err(numeric)?;
            let mut out = String::from("path_id,t");
            for i in 1..=m.d {
                write!(out, ",X_{i}").unwrap();
            }
            out.push_str(",int_r\n");
            for p in 0..paths.n_paths() {
                for k in 0..paths.n_snapshots() {
                    write!(out, "{p},{}", fmt_num(paths.times[k])).unwrap();
                    for v in paths.state(p, k) {
                        write!(out, ",{}", fmt_num(*v)).unwrap();
                    }
                    writeln!(out, ",{}", fmt_num(paths.integrated_rate(p, k))).unwrap();
                }
            }
            let config = json!({
                "model": model, "x0": x, "record_every": record_every,
                "sim": serde_json::to_value(&cfg).expect("json"),
            });
            ("simulate", config, Some(m), Some(*seed), out, 0, Vec::new())
        }
    };
    Ok(Outcome {
        output,
        exit_code,
        notes,
        manifest: RunManifest {
            command: name.to_string(),
            config,
            model_hash: model.as_ref().map(model_hash),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            started_unix_ms: started,
            wall_clock_ms: clock.elapsed().as_millis(),
            seed,
        },
    })
}

/// Sidecar path of the manifest for an output file.
pub fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

/// Writes the outcome to `--out` (plus manifest) or stdout, and returns the exit code.
pub fn emit(cli: &Cli, outcome: &Outcome) -> Result<i32, CliError> {
    match &cli.out {
        Some(path) => {
            std::fs::write(path, &outcome.output)?;
            let manifest = serde_json::to_string_pretty(&outcome.manifest).expect("json") + "\n";
            std::fs::write(manifest_path(path), manifest)?;
        }
        None => print!("{}", outcome.output),
    }
    for note in &outcome.notes {
        eprintln!("{note}");
    }
    Ok(outcome.exit_code)
}
