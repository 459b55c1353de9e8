//! Loss and cell map over a two-coordinate affine slice.


use anyhow::{anyhow, bail, Result};
use rayon::prelude::*;

use reluscape::cells::signature;
use reluscape::cells::cell_hash;
use reluscape::loss::total_loss;
use reluscape::{Dataset, Params};

#[derive(Clone, Debug, PartialEq)]
pub struct ScanRow {
    pub t1: f64,
    pub t2: f64,
    pub loss: f64,
    /// `None` on the non-differentiable set.
    pub cell_hash: Option<u64>,
    pub zero_count: usize,
}

pub struct ScanSpec {
    pub axes: [usize; 2],
    pub n: usize,
    pub range: (f64, f64),
    pub tau: f64,
}

pub fn resolve_axes(p: &Params, names: &[String]) -> Result<[usize; 2]> {
    if names.len() != 2 {
        bail!("need exactly two axes, got {}", names.len());
    }
    let idx = |name: &str| {
        p.shape.coordinate_index(name).ok_or_else(|| {
            anyhow!(
                "unknown parameter coordinate '{name}'; valid names look like {}",
                p.shape.coordinate_names().into_iter().take(4).collect::<Vec<_>>().join(", ")
            )
        })
    };
    let axes = [idx(&names[0])?, idx(&names[1])?];
    if axes[0] == axes[1] {
        bail!("the two axes must differ");
    }
    Ok(axes)
}

/// Grid value `lo + i (hi − lo)/(n − 1)`, with the midpoint landing on 0 for symmetric ranges.
fn grid(range: (f64, f64), n: usize, i: usize) -> f64 {
    if n == 1 {
        return range.0;
    }
    range.0 + (range.1 - range.0) * i as f64 / (n - 1) as f64
}

/// `ω + t1 e_a + t2 e_b` over an `n × n` grid, row-major in `t1`.
pub fn scan(p: &Params, data: &Dataset, spec: &ScanSpec) -> Result<Vec<ScanRow>> {
    if spec.n == 0 {
        bail!("grid size must be positive");
    }
    if !(spec.range.0 < spec.range.1) {
        bail!("range must satisfy lo < hi");
    }
    let base = p.to_flat();
    let n = spec.n;
    (0..n * n)
        .into_par_iter()
        .map(|k| {
            let (t1, t2) = (grid(spec.range, n, k / n), grid(spec.range, n, k % n));
            let mut x = base.clone();
            x[spec.axes[0]] += t1;
            x[spec.axes[1]] += t2;
            let q = Params::from_flat(&p.shape, &x)?;
            let sig = signature(&q, data, spec.tau)?;
            Ok(ScanRow {
                t1,
                t2,
                loss: total_loss(&q, data)?,
                cell_hash: sig.is_smooth().then(|| cell_hash(sig.entries())),
                zero_count: sig.zero_count(),
            })
        })
        .collect()
}

pub fn to_csv(rows: &[ScanRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["t1", "t2", "loss", "cell_hash", "zero_count"])?;
    for r in rows {
        w.write_record([
            r.t1.to_string(),
            r.t2.to_string(),
            r.loss.to_string(),
            r.cell_hash.map_or_else(|| "N".to_string(), |h| format!("{h:016x}")),
            r.zero_count.to_string(),
        ])?;
    }
    w.into_inner().map_err(|e| anyhow!("csv: {e}"))
}
