//! Run reports and their digests.

use serde::Serialize;
use serde_json::{json, Map, Value};

use reluscape::landscape::Verdict;

use crate::io::sha256_hex;

#[derive(Clone, Debug, Serialize)]
pub struct VerdictEntry {
    pub name: String,
    pub passed: bool,
    pub applicable: bool,
    pub details: Vec<String>,
}

impl VerdictEntry {
    pub fn from_verdict(name: &str, v: &Verdict) -> Self {
        Self {
            name: name.to_string(),
            passed: v.passed,
            applicable: v.applicable,
            details: v.details.clone(),
        }
    }

    /// A predicate whose hypotheses do not hold here.
    pub fn not_applicable(name: &str, why: impl Into<String>) -> Self {
        Self {
            name: name.to_string(),
            passed: true,
            applicable: false,
            details: vec![why.into()],
        }
    }

    pub fn failed(&self) -> bool {
        self.applicable && !self.passed
    }
}

/// Everything a command computes, independent of where its inputs live.
#[derive(Clone, Debug, Default)]
pub struct Outcome {
    pub results: Value,
    pub verdicts: Vec<VerdictEntry>,
    pub warnings: Vec<String>,
}

impl Outcome {
    pub fn any_failed(&self) -> bool {
        self.verdicts.iter().any(VerdictEntry::failed)
    }
}

pub struct Report {
    pub command: String,
    pub seed: u64,
    pub config: Value,
    pub inputs: Vec<(String, String)>,
    pub invocation: Value,
    pub outcome: Outcome,
}

impl Report {
    /// Digested body: command, metadata, results, verdicts and warnings.
    /// File paths live only in `invocation`, outside the digest.
    fn body(&self) -> Value {
        let inputs: Map<String, Value> = self
            .inputs
            .iter()
            .map(|(k, h)| (k.clone(), Value::String(h.clone())))
            .collect();
        json!({
            "command": self.command,
            "metadata": {
                "seed": self.seed,
                "config": self.config,
                "config_digest": sha256_hex(serde_json::to_string(&self.config).unwrap().as_bytes()),
                "input_sha256": inputs,
                "versions": {
                    "reluscape": reluscape::VERSION,
                    "reluscape-cli": env!("CARGO_PKG_VERSION"),
                },
            },
            "results": self.outcome.results,
            "verdicts": self.outcome.verdicts,
            "warnings": self.outcome.warnings,
        })
    }

    pub fn digest_of(body: &Value) -> String {
        sha256_hex(serde_json::to_string(body).unwrap().as_bytes())
    }

    pub fn to_json(&self) -> Value {
        let mut body = self.body();
        let digest = Self::digest_of(&body);
        let obj = body.as_object_mut().unwrap();
        obj.insert("digest".into(), Value::String(digest));
        obj.insert("invocation".into(), self.invocation.clone());
        body
    }
}

/// Recomputes the digest of a report as read back from disk.
pub fn recompute_digest(report: &Value) -> Option<String> {
    let mut body = report.as_object()?.clone();
    body.remove("digest");
    body.remove("invocation");
    Some(Report::digest_of(&Value::Object(body)))
}
