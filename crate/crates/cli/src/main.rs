//! `reluscape` command-line tool.
//!
//! Exit codes: 0 success, 1 verdict failure under `--strict` (or a failed
//! `verify`), 2 input error, 3 enumeration budget exceeded.

mod analyze;
mod gencheck;
mod io;
mod report;
mod scan;
mod train;
mod verify;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use reluscape::cells::DEFAULT_TAU;

use crate::analyze::AnalysisOptions;
use crate::report::{Outcome, Report};

#[derive(Parser, Debug)]
#[command(name = "reluscape", version, about = "Loss-landscape analysis of leaky-ReLU hinge networks")]
struct Cli {
    /// Seed for random search, probing and training (overrides a config seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Absolute Clarke-residual threshold (default scales with the generator norms).
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Exit with status 1 when an applicable theorem predicate fails.
    #[arg(long, global = true)]
    strict: bool,
    /// Directory for the report and artifacts; without it the report goes to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Loss, cell, criticality, classification and theorem verdicts at a point.
    Analyze {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        params: PathBuf,
        /// Sign dead-band for the activation pattern.
        #[arg(long, default_value_t = DEFAULT_TAU)]
        tau: f64,
        /// Skip the minimum classification.
        #[arg(long)]
        no_classify: bool,
    },
    /// Multi-start subgradient training from a JSON config.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// Config override `key=value` (value parsed as JSON when possible).
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
    },
    /// Loss and cell map on a 2D slice, written as scan.csv.
    Scan {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        params: PathBuf,
        /// Two coordinate names such as `W1[0,0] V[0,0]`.
        #[arg(long, num_args = 2, required = true)]
        axes: Vec<String>,
        /// Points per axis.
        #[arg(long, default_value_t = 41)]
        grid: usize,
        /// Offset range `LO,HI` added to both coordinates.
        #[arg(long, default_value = "-1,1", allow_hyphen_values = true)]
        range: String,
        #[arg(long, default_value_t = DEFAULT_TAU)]
        tau: f64,
    },
    /// Decide whether a dataset is generic or rare.
    Gencheck {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        alpha: f64,
        /// Number of hidden layers.
        #[arg(long)]
        depth: usize,
    },
    /// Recompute an archived report from its inputs and compare.
    Verify {
        #[arg(long)]
        report: PathBuf,
    },
}

/// Error with an exit status.
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        let budget = error.chain().any(|e| {
            matches!(
                e.downcast_ref::<reluscape::Error>(),
                Some(
                    reluscape::Error::BudgetExceeded { .. }
                        | reluscape::Error::TooManyZeros { .. }
                        | reluscape::Error::TooManyCells { .. }
                )
            )
        });
        Failure {
            code: if budget { 3 } else { 2 },
            error,
        }
    }
}

fn absolute(p: &Path) -> Result<PathBuf> {
    std::fs::canonicalize(p).with_context(|| format!("cannot resolve {}", p.display()))
}

fn parse_range(s: &str) -> Result<(f64, f64)> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| anyhow!("range must look like LO,HI, got '{s}'"))?;
    let parse = |v: &str| v.trim().parse::<f64>().map_err(|_| anyhow!("invalid range bound '{v}'"));
    Ok((parse(a)?, parse(b)?))
}

fn emit(cli: &Cli, report: &Report) -> Result<Value> {
    let json = report.to_json();
    match &cli.out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let path = dir.join("report.json");
            io::write_json(&path, &json)?;
            println!("wrote {} (digest {})", path.display(), json["digest"].as_str().unwrap_or(""));
        }
        None => println!("{}", serde_json::to_string_pretty(&json)?),
    }
    Ok(json)
}

fn analysis_options(cli: &Cli, tau: f64, classify: bool) -> AnalysisOptions {
    AnalysisOptions {
        tau,
        eps_crit: cli.tol,
        seed: cli.seed.unwrap_or(0),
        classify,
    }
}

fn cmd_analyze(cli: &Cli, data: &Path, params: &Path, tau: f64, classify: bool) -> Result<Report> {
    let (d, db) = io::load_dataset(data)?;
    let (a, pb) = io::load_archive(params)?;
    let opts = analysis_options(cli, tau, classify);
    Ok(Report {
        command: "analyze".into(),
        seed: opts.seed,
        config: json!({ "tau": tau, "tol": cli.tol, "classify": classify }),
        inputs: vec![("data".into(), io::sha256_hex(&db)), ("params".into(), io::sha256_hex(&pb))],
        invocation: json!({ "data": absolute(data)?, "params": absolute(params)? }),
        outcome: analyze::analyze(&a, &d, &opts)?,
    })
}

fn cmd_train(cli: &Cli, data: &Path, config: &Path, sets: &[String]) -> Result<Report> {
    let (d, db) = io::load_dataset(data)?;
    let cb = io::read_bytes(config)?;
    let mut raw: Value = serde_json::from_slice(&cb)
        .map_err(|e| anyhow!("config JSON: {e}"))
        .with_context(|| format!("in {}", config.display()))?;
    io::apply_overrides(&mut raw, sets)?;
    if let Some(s) = cli.seed {
        raw["seed"] = json!(s);
    }
    let cfg: train::TrainConfig = serde_json::from_value(raw).map_err(|e| anyhow!("config: {e}"))?;
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
    let opts = analysis_options(cli, DEFAULT_TAU, false);
    let outcome = train::train(&cfg, &d, &opts, &out)?;
    Ok(Report {
        command: "train".into(),
        seed: cfg.seed,
        config: json!({ "train": cfg, "tol": cli.tol, "tau": DEFAULT_TAU }),
        inputs: vec![("data".into(), io::sha256_hex(&db))],
        invocation: json!({ "data": absolute(data)?, "config": absolute(config)? }),
        outcome,
    })
}

fn cmd_scan(cli: &Cli, data: &Path, params: &Path, axes: &[String], n: usize, range: &str, tau: f64) -> Result<Report> {
    let (d, db) = io::load_dataset(data)?;
    let (a, pb) = io::load_archive(params)?;
    let io::Archive::Network(p) = a else {
        return Err(anyhow!("scan needs a single network, not a replicated archive"));
    };
    let spec = scan::ScanSpec {
        axes: scan::resolve_axes(&p, axes)?,
        n,
        range: parse_range(range)?,
        tau,
    };
    let rows = scan::scan(&p, &d, &spec)?;
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)?;
    let csv_path = dir.join("scan.csv");
    let csv = scan::to_csv(&rows)?;
    std::fs::write(&csv_path, &csv).with_context(|| format!("cannot write {}", csv_path.display()))?;
    let csv_sha = io::sha256_hex(&csv);
    let cells: std::collections::BTreeSet<u64> = rows.iter().filter_map(|r| r.cell_hash).collect();
    Ok(Report {
        command: "scan".into(),
        seed: cli.seed.unwrap_or(0),
        config: json!({ "axes": axes, "grid": n, "range": [spec.range.0, spec.range.1], "tau": tau }),
        inputs: vec![("data".into(), io::sha256_hex(&db)), ("params".into(), io::sha256_hex(&pb))],
        invocation: json!({ "data": absolute(data)?, "params": absolute(params)?, "csv": absolute(&csv_path)? }),
        outcome: Outcome {
            results: json!({
                "points": rows.len(),
                "distinct_cells": cells.len(),
                "boundary_points": rows.iter().filter(|r| r.zero_count > 0).count(),
                "csv_sha256": csv_sha,
            }),
            ..Outcome::default()
        },
    })
}

fn cmd_gencheck(cli: &Cli, data: &Path, alpha: f64, depth: usize) -> Result<Report> {
    let (d, db) = io::load_dataset(data)?;
    Ok(Report {
        command: "gencheck".into(),
        seed: cli.seed.unwrap_or(0),
        config: json!({ "alpha": alpha, "depth": depth }),
        inputs: vec![("data".into(), io::sha256_hex(&db))],
        invocation: json!({ "data": absolute(data)? }),
        outcome: gencheck::gencheck(&d, alpha, depth)?,
    })
}

fn run(cli: &Cli) -> Result<Outcome, Failure> {
    let report = match &cli.command {
        Command::Analyze {
            data,
            params,
            tau,
            no_classify,
        } => cmd_analyze(cli, data, params, *tau, !no_classify)?,
        Command::Train { data, config, sets } => cmd_train(cli, data, config, sets)?,
        Command::Scan {
            data,
            params,
            axes,
            grid,
            range,
            tau,
        } => cmd_scan(cli, data, params, axes, *grid, range, *tau)?,
        Command::Gencheck { data, alpha, depth } => cmd_gencheck(cli, data, *alpha, *depth)?,
        Command::Verify { report } => verify::verify(report)?,
    };
    emit(cli, &report)?;
    Ok(report.outcome)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let verifying = matches!(cli.command, Command::Verify { .. });
    match run(&cli) {
        Ok(outcome) => {
            if (cli.strict || verifying) && outcome.any_failed() {
                for v in outcome.verdicts.iter().filter(|v| v.failed()) {
                    eprintln!("verdict failed: {} ({})", v.name, v.details.join("; "));
                }
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
