//! Recomputes an archived report from its inputs.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde_json::{json, Value};

use crate::analyze::{analyze, AnalysisOptions};
use crate::io;
use crate::report::{recompute_digest, Outcome, Report, VerdictEntry};
use crate::{gencheck, scan, train};

struct Checks(Vec<VerdictEntry>);

impl Checks {
    fn add(&mut self, name: &str, ok: bool, detail: impl Into<String>) {
        self.0.push(VerdictEntry {
            name: name.to_string(),
            passed: ok,
            applicable: true,
            details: vec![detail.into()],
        });
    }

    fn same(&mut self, name: &str, archived: &Value, recomputed: &Value) {
        let ok = archived == recomputed;
        let detail = if ok {
            "identical".to_string()
        } else {
            format!("archived {archived} vs recomputed {recomputed}")
        };
        self.add(name, ok, detail);
    }
}

fn path_of(inv: &Value, key: &str) -> Result<PathBuf> {
    inv[key]
        .as_str()
        .map(PathBuf::from)
        .ok_or_else(|| anyhow!("report invocation lacks '{key}'"))
}

fn input_hash<'a>(report: &'a Value, key: &str) -> Option<&'a str> {
    report["metadata"]["input_sha256"][key].as_str()
}

/// Loads an input and checks it still hashes to the archived value.
fn load_checked(report: &Value, key: &str, checks: &mut Checks) -> Result<(PathBuf, Vec<u8>)> {
    let path = path_of(&report["invocation"], key)?;
    let bytes = io::read_bytes(&path)?;
    let h = io::sha256_hex(&bytes);
    checks.add(
        &format!("input.{key}"),
        Some(h.as_str()) == input_hash(report, key),
        format!("{} sha256 {h}", path.display()),
    );
    Ok((path, bytes))
}

fn options(report: &Value, classify: bool) -> Result<AnalysisOptions> {
    let cfg = &report["metadata"]["config"];
    Ok(AnalysisOptions {
        tau: cfg["tau"].as_f64().ok_or_else(|| anyhow!("report config lacks tau"))?,
        eps_crit: cfg["tol"].as_f64(),
        seed: report["metadata"]["seed"].as_u64().unwrap_or(0),
        classify,
    })
}

fn compare_outcome(checks: &mut Checks, report: &Value, o: &Outcome) {
    checks.same("results", &report["results"], &o.results);
    checks.same("verdicts", &report["verdicts"], &json!(o.verdicts));
}

fn verify_train(report: &Value, base: &Path, checks: &mut Checks) -> Result<()> {
    let (path, _) = load_checked(report, "data", checks)?;
    let (data, _) = io::load_dataset(&path)?;
    let opts = options(report, false)?;
    let runs = report["results"]["runs"]
        .as_array()
        .ok_or_else(|| anyhow!("train report lacks runs"))?;
    for row in runs {
        let rank = row["rank"].as_u64().unwrap_or(0) as usize;
        let file = row["params_file"].as_str().map(str::to_string).unwrap_or_else(|| train::run_file(rank));
        let (archive, _) = io::load_archive(&base.join(&file))?;
        let o = train::final_point(&archive, &data, &opts)?;
        checks.same(&format!("run_{rank:03}.point"), &row["point"], &o.results);
        let loss = o.results.get("loss").or_else(|| o.results.get("objective")).cloned().unwrap_or(Value::Null);
        checks.same(&format!("run_{rank:03}.final_loss"), &row["final_loss"], &loss);
        let prefix = format!("run_{rank:03}.");
        let archived: Vec<&Value> = report["verdicts"]
            .as_array()
            .into_iter()
            .flatten()
            .filter(|v| v["name"].as_str().is_some_and(|n| n.starts_with(&prefix)))
            .collect();
        let recomputed: Vec<Value> = o
            .verdicts
            .iter()
            .map(|v| {
                let mut j = json!(v);
                j["name"] = json!(format!("{prefix}{}", v.name));
                j
            })
            .collect();
        checks.same(&format!("{prefix}verdicts"), &json!(archived), &json!(recomputed));
    }
    Ok(())
}

pub fn verify(path: &Path) -> Result<Report> {
    let bytes = io::read_bytes(path)?;
    let report: Value = serde_json::from_slice(&bytes)
        .map_err(|e| anyhow!("report JSON: {e}"))
        .with_context(|| format!("in {}", path.display()))?;
    let mut checks = Checks(Vec::new());
    let digest = report["digest"].as_str().unwrap_or("");
    checks.add("digest", recompute_digest(&report).as_deref() == Some(digest), format!("archived {digest}"));
    let command = report["command"].as_str().unwrap_or("").to_string();
    match command.as_str() {
        "analyze" => {
            let (dp, _) = load_checked(&report, "data", &mut checks)?;
            let (pp, _) = load_checked(&report, "params", &mut checks)?;
            let (data, _) = io::load_dataset(&dp)?;
            let (archive, _) = io::load_archive(&pp)?;
            let classify = report["metadata"]["config"]["classify"].as_bool().unwrap_or(true);
            compare_outcome(&mut checks, &report, &analyze(&archive, &data, &options(&report, classify)?)?);
        }
        "gencheck" => {
            let (dp, _) = load_checked(&report, "data", &mut checks)?;
            let (data, _) = io::load_dataset(&dp)?;
            let cfg = &report["metadata"]["config"];
            let alpha = cfg["alpha"].as_f64().ok_or_else(|| anyhow!("report config lacks alpha"))?;
            let depth = cfg["depth"].as_u64().ok_or_else(|| anyhow!("report config lacks depth"))? as usize;
            compare_outcome(&mut checks, &report, &gencheck::gencheck(&data, alpha, depth)?);
        }
        "scan" => {
            let (dp, _) = load_checked(&report, "data", &mut checks)?;
            let (pp, _) = load_checked(&report, "params", &mut checks)?;
            let (data, _) = io::load_dataset(&dp)?;
            let (io::Archive::Network(p), _) = io::load_archive(&pp)? else {
                bail!("scan report refers to a replicated archive");
            };
            let cfg = &report["metadata"]["config"];
            let axes: Vec<String> = serde_json::from_value(cfg["axes"].clone())?;
            let range: (f64, f64) = serde_json::from_value(cfg["range"].clone())?;
            let spec = scan::ScanSpec {
                axes: scan::resolve_axes(&p, &axes)?,
                n: cfg["grid"].as_u64().unwrap_or(0) as usize,
                range,
                tau: cfg["tau"].as_f64().unwrap_or(reluscape::cells::DEFAULT_TAU),
            };
            let csv = scan::to_csv(&scan::scan(&p, &data, &spec)?)?;
            checks.same("csv_sha256", &report["results"]["csv_sha256"], &json!(io::sha256_hex(&csv)));
        }
        "train" => {
            let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
            verify_train(&report, &base, &mut checks)?;
        }
        other => bail!("cannot verify a '{other}' report"),
    }
    let failed = checks.0.iter().filter(|c| c.failed()).count();
    Ok(Report {
        command: "verify".into(),
        seed: 0,
        config: json!({}),
        inputs: vec![("report".into(), io::sha256_hex(&bytes))],
        invocation: json!({ "report": std::fs::canonicalize(path)? }),
        outcome: Outcome {
            results: json!({
                "target_command": command,
                "target_digest": digest,
                "checks": checks.0.len(),
                "mismatches": failed,
            }),
            verdicts: checks.0,
            warnings: Vec::new(),
        },
    })
}
