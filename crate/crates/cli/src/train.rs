//! Multi-start training with archived final points.

use std::path::Path;

use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use reluscape::optimize::{multi_start, DescentConfig, Model, Objective, Point, Schedule};
use reluscape::{Dataset, NetworkShape};

use crate::analyze::{analyze, AnalysisOptions};
use crate::io::{archive_to_json, write_json, Archive};
use crate::report::Outcome;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Binary,
    Multiclass,
    Penalty,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    Constant,
    InvSqrt,
}

/// Training config. Every key can be overridden with `--set key=value`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub mode: Mode,
    pub alpha: f64,
    /// Hidden widths `d_1..d_L`.
    pub hidden: Vec<usize>,
    #[serde(default = "defaults::yes")]
    pub output_bias: bool,
    #[serde(default = "defaults::schedule")]
    pub schedule: ScheduleKind,
    #[serde(default = "defaults::eta")]
    pub eta: f64,
    #[serde(default = "defaults::max_iters")]
    pub max_iters: usize,
    #[serde(default = "defaults::starts")]
    pub starts: usize,
    #[serde(default = "defaults::one")]
    pub init_scale: f64,
    #[serde(default = "defaults::one")]
    pub gamma: f64,
    #[serde(default = "defaults::eps_crit")]
    pub eps_crit: f64,
    #[serde(default = "defaults::check_every")]
    pub check_every: usize,
    #[serde(default = "defaults::yes")]
    pub snap: bool,
    #[serde(default)]
    pub seed: u64,
}

mod defaults {
    use super::ScheduleKind;
    pub fn yes() -> bool {
        true
    }
    pub fn schedule() -> ScheduleKind {
        ScheduleKind::InvSqrt
    }
    pub fn eta() -> f64 {
        0.5
    }
    pub fn max_iters() -> usize {
        20_000
    }
    pub fn starts() -> usize {
        10
    }
    pub fn one() -> f64 {
        1.0
    }
    pub fn eps_crit() -> f64 {
        1e-6
    }
    pub fn check_every() -> usize {
        100
    }
}

impl TrainConfig {
    pub fn model(&self, data: &Dataset) -> Result<(Model, Objective)> {
        let mut dims = vec![data.dim()];
        dims.extend(&self.hidden);
        let out = match self.mode {
            Mode::Binary => {
                if !data.is_binary() {
                    bail!("binary mode needs labels 1/-1");
                }
                1
            }
            Mode::Multiclass => {
                if data.is_binary() {
                    bail!("multiclass mode needs class labels 1..R");
                }
                data.num_classes()
            }
            Mode::Penalty => {
                if data.is_binary() {
                    bail!("penalty mode needs class labels 1..R");
                }
                1
            }
        };
        dims.push(out);
        let mut shape = NetworkShape::new(dims, self.alpha)?;
        if !self.output_bias {
            shape = shape.without_output_bias();
        }
        Ok(match self.mode {
            Mode::Penalty => (
                Model::Replicated {
                    shape,
                    classes: data.num_classes(),
                    gamma: self.gamma,
                },
                Objective::Penalty(data.clone()),
            ),
            _ => (Model::Network(shape), Objective::Hinge(data.clone())),
        })
    }

    pub fn descent(&self, eps_override: Option<f64>) -> DescentConfig {
        DescentConfig {
            schedule: match self.schedule {
                ScheduleKind::Constant => Schedule::Constant(self.eta),
                ScheduleKind::InvSqrt => Schedule::InvSqrt(self.eta),
            },
            max_iters: self.max_iters,
            eps_crit: eps_override.unwrap_or(self.eps_crit),
            check_every: self.check_every,
            snap: self.snap,
            ..DescentConfig::default()
        }
    }
}

pub fn run_file(rank: usize) -> String {
    format!("params/run_{rank:03}.json")
}

/// Verdicts and summary at an archived final point.
pub fn final_point(archive: &Archive, data: &Dataset, opts: &AnalysisOptions) -> Result<Outcome> {
    analyze(archive, data, &AnalysisOptions { classify: false, ..opts.clone() })
}

/// Trains, writes `best_params.json` and `params/run_NNN.json` under `out`, and
/// returns the outcome.
pub fn train(cfg: &TrainConfig, data: &Dataset, opts: &AnalysisOptions, out: &Path) -> Result<Outcome> {
    if cfg.starts == 0 {
        bail!("starts must be at least 1");
    }
    let (model, objective) = cfg.model(data)?;
    let runs = multi_start(&objective, &model, cfg.starts, cfg.init_scale, cfg.seed, &cfg.descent(opts.eps_crit))?;
    std::fs::create_dir_all(out.join("params"))?;
    let mut rows = Vec::new();
    let mut verdicts = Vec::new();
    let mut warnings = Vec::new();
    for (rank, t) in runs.iter().enumerate() {
        let archive = match &t.final_point {
            Point::Network(p) => Archive::Network(p.clone()),
            Point::Replicated(r) => Archive::Replicated(r.clone()),
        };
        let file = run_file(rank);
        write_json(&out.join(&file), &archive_to_json(&archive))?;
        if rank == 0 {
            write_json(&out.join("best_params.json"), &archive_to_json(&archive))?;
        }
        let summary = final_point(&archive, data, opts)?;
        for mut v in summary.verdicts {
            v.name = format!("run_{rank:03}.{}", v.name);
            verdicts.push(v);
        }
        warnings.extend(summary.warnings.into_iter().map(|w| format!("run {rank}: {w}")));
        if !t.final_loss.is_finite() {
            warnings.push(format!("run {rank}: non-finite final loss"));
        }
        rows.push(json!({
            "rank": rank,
            "seed": t.seed,
            "params_file": file,
            "final_loss": t.final_loss,
            "iterations": t.iterations,
            "stopped_early": t.stopped_early,
            "snapped": t.snapped,
            "trajectory_digest": format!("{:016x}", t.digest()),
            "cells_visited": t.occupancy.len(),
            "point": summary.results,
        }));
    }
    let max_dev = match &runs[0].final_point {
        Point::Replicated(_) => rows
            .iter()
            .filter_map(|r| r["point"]["replicas"]["max_deviation"].as_f64())
            .fold(0.0, f64::max)
            .into(),
        Point::Network(_) => Value::Null,
    };
    Ok(Outcome {
        results: json!({
            "mode": cfg.mode,
            "best": { "rank": 0, "loss": runs[0].final_loss, "params_file": "best_params.json" },
            "runs": rows,
            "max_replica_deviation": max_dev,
        }),
        verdicts,
        warnings,
    })
}
