//! Rare/generic decision for a dataset.

use anyhow::{bail, Result};
use serde_json::json;

use reluscape::landscape::{rare_system_holds, genericity, GenericityVerdict};
use reluscape::Dataset;

use crate::report::Outcome;

pub fn gencheck(data: &Dataset, alpha: f64, depth: usize) -> Result<Outcome> {
    if !(0.0..=1.0).contains(&alpha) {
        bail!("alpha must lie in [0, 1]");
    }
    let results = match genericity(data, alpha, depth)? {
        GenericityVerdict::Generic => json!({ "verdict": "Generic", "witness": null }),
        GenericityVerdict::Rare(w) => {
            if !rare_system_holds(data, &w.eps, &w.lambda) {
                bail!("internal error: rare witness failed re-verification");
            }
            json!({
                "verdict": "Rare",
                "witness": {
                    "lambda_power": w.lambda_power,
                    "lambda": w.lambda,
                    "eps": w.eps,
                    "eps_total": w.eps_total,
                    "verified": true,
                },
            })
        }
    };
    Ok(Outcome {
        results: json!({
            "alpha": alpha,
            "depth": depth,
            "points": data.len(),
            "classes": data.num_classes(),
            "genericity": results,
        }),
        verdicts: Vec::new(),
        warnings: Vec::new(),
    })
}
