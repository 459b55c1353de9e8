//! Loss, cell, criticality, classification and theorem predicates at one point.

use anyhow::Result;
use serde_json::{json, Value};

use reluscape::cells::{cell_of, signature, CellLocation};
use reluscape::clarke::{is_critical, CriticalityCertificate, CriticalityOptions};
use reluscape::landscape::{classify_minimum, deep_linear_check, thm4_check, thm6_check, ClassifyOptions};
use reluscape::loss::total_loss;
use reluscape::penalty::{criticality, e_gamma, multiclass_alpha0_check, penalty_r, thm7_check, ReplicatedParams};
use reluscape::{Dataset, Error, Params};

use crate::io::Archive;
use crate::report::{Outcome, VerdictEntry};

/// Per-class residual threshold for the penalty exactness check.
pub const CLASS_EPS: f64 = 1e-5;

#[derive(Clone, Debug)]
pub struct AnalysisOptions {
    pub tau: f64,
    pub eps_crit: Option<f64>,
    pub seed: u64,
    pub classify: bool,
}

impl AnalysisOptions {
    fn criticality(&self) -> CriticalityOptions {
        CriticalityOptions {
            tau: self.tau,
            eps_crit: self.eps_crit,
            ..CriticalityOptions::default()
        }
    }
}

/// Turns a precondition failure into a non-applicable entry.
fn predicate(name: &str, r: reluscape::Result<VerdictEntry>) -> Result<VerdictEntry> {
    match r {
        Ok(v) => Ok(v),
        Err(Error::Precondition(why)) => Ok(VerdictEntry::not_applicable(name, why)),
        Err(e) => Err(e.into()),
    }
}

fn certificate_json(c: &CriticalityCertificate) -> Value {
    json!({
        "critical": c.is_critical(),
        "residual_norm": c.residual_norm,
        "eps_crit": c.eps_crit,
        "adjacent_cells": c.cells.len(),
        "theta": c.theta,
    })
}

/// Theorem predicates that constrain a network with this slope, depth and label type.
pub fn network_verdicts(p: &Params, data: &Dataset, cert: &CriticalityCertificate, tau: f64) -> Result<Vec<VerdictEntry>> {
    let mut out = Vec::new();
    if !data.is_binary() {
        return Ok(out);
    }
    let (alpha, depth) = (p.shape.alpha, p.shape.depth());
    if alpha > 0.0 && depth == 1 {
        out.push(predicate(
            "leaky_zero_loss",
            thm4_check(p, data, cert).map(|v| VerdictEntry::from_verdict("leaky_zero_loss", &v)),
        )?);
    }
    if alpha == 0.0 && depth == 1 {
        out.push(predicate(
            "relu_blind_side",
            thm6_check(p, data, cert, tau).map(|r| VerdictEntry::from_verdict("relu_blind_side", &r.verdict)),
        )?);
    }
    if alpha == 1.0 {
        out.push(predicate(
            "deep_linear_optimum",
            deep_linear_check(p, data, cert).map(|r| VerdictEntry::from_verdict("deep_linear_optimum", &r.verdict)),
        )?);
    }
    Ok(out)
}

pub fn analyze_network(p: &Params, data: &Dataset, opts: &AnalysisOptions) -> Result<Outcome> {
    let loss = total_loss(p, data)?;
    let sig = signature(p, data, opts.tau)?;
    let cell = match cell_of(p, data, opts.tau)? {
        CellLocation::Cell(u) => Value::String(u.hex()),
        CellLocation::Boundary(_) => Value::Null,
    };
    let mut warnings = Vec::new();
    let (cert, classification) = if opts.classify {
        let c = classify_minimum(
            p,
            data,
            &ClassifyOptions {
                criticality: opts.criticality(),
                seed: opts.seed,
                ..ClassifyOptions::default()
            },
        )?;
        let j = json!({
            "kind": format!("{:?}", c.kind),
            "on_boundary": c.on_boundary,
            "best_decrease": finite_or_null(c.best_decrease),
            "flat_cells": c.flat_cells.iter().map(|u| u.hex()).collect::<Vec<_>>(),
        });
        (c.certificate, j)
    } else {
        (is_critical(p, data, &opts.criticality())?.1, Value::Null)
    };
    if cert.cells.len() > 1 && sig.zero_count() == 0 {
        warnings.push("several adjacent cells at a smooth point".into());
    }
    let verdicts = network_verdicts(p, data, &cert, opts.tau)?;
    Ok(Outcome {
        results: json!({
            "model": "network",
            "loss": loss,
            "num_params": p.shape.num_params(),
            "zero_count": sig.zero_count(),
            "cell_hash": cell,
            "criticality": certificate_json(&cert),
            "classification": classification,
        }),
        verdicts,
        warnings,
    })
}

pub fn analyze_replicated(reps: &ReplicatedParams, data: &Dataset, opts: &AnalysisOptions) -> Result<Outcome> {
    let objective = e_gamma(reps, data)?;
    let (_, cert) = criticality(reps, data, &opts.criticality())?;
    let mut verdicts = Vec::new();
    let mut deviation = json!({ "max_deviation": reps.max_deviation() });
    match thm7_check(reps, data, &cert, CLASS_EPS) {
        Ok(r) => {
            deviation["tolerance"] = json!(r.tol_rep);
            deviation["class_residuals"] = json!(r.class_residuals);
            verdicts.push(VerdictEntry::from_verdict("penalty_exactness", &r.verdict));
        }
        Err(Error::Precondition(why)) => verdicts.push(VerdictEntry::not_applicable("penalty_exactness", why)),
        Err(e) => return Err(e.into()),
    }
    let shape = reps.shape();
    if shape.alpha == 0.0 && shape.depth() == 1 {
        verdicts.push(predicate(
            "multiclass_relu_blind_side",
            multiclass_alpha0_check(reps, data, &cert).map(|v| VerdictEntry::from_verdict("multiclass_relu_blind_side", &v)),
        )?);
    }
    Ok(Outcome {
        results: json!({
            "model": "replicated",
            "classes": reps.num_classes(),
            "gamma": reps.gamma,
            "objective": objective,
            "penalty": penalty_r(reps)?,
            "replicas": deviation,
            "criticality": certificate_json(&cert),
        }),
        verdicts,
        warnings: Vec::new(),
    })
}

pub fn analyze(archive: &Archive, data: &Dataset, opts: &AnalysisOptions) -> Result<Outcome> {
    match archive {
        Archive::Network(p) => analyze_network(p, data, opts),
        Archive::Replicated(r) => analyze_replicated(r, data, opts),
    }
}

pub fn finite_or_null(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}
