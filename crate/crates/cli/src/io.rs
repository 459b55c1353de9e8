//! Dataset, parameter and config file formats.

use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use reluscape::data::Targets;
use reluscape::linalg::Matrix;
use reluscape::penalty::ReplicatedParams;
use reluscape::{Dataset, NetworkShape, Params};

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("cannot read {}", path.display()))
}

/// Labels as written in a file: `±1` for binary data, `1..R` for classes. Without
/// an explicit kind, labels all in `{1, -1}` read as binary.
fn targets_from_labels(labels: &[i64], kind: Option<&str>, num_classes: Option<usize>) -> Result<Targets> {
    let binary = match kind {
        Some("binary") => true,
        Some("multiclass") => false,
        Some(other) => bail!("unknown dataset kind '{other}' (binary or multiclass)"),
        None => labels.iter().all(|&l| l == 1 || l == -1),
    };
    if binary {
        if let Some(i) = labels.iter().position(|&l| l != 1 && l != -1) {
            bail!("point {}: binary labels must be 1 or -1, got {}", i + 1, labels[i]);
        }
        return Ok(Targets::Binary(labels.iter().map(|&l| l as i8).collect()));
    }
    if let Some(i) = labels.iter().position(|&l| l < 1) {
        bail!("point {}: class labels start at 1, got {}", i + 1, labels[i]);
    }
    let max = labels.iter().copied().max().unwrap_or(0) as usize;
    let r = num_classes.unwrap_or(max);
    if max > r {
        bail!("label {max} exceeds the declared {r} classes");
    }
    if r < 2 {
        bail!("multiclass data need at least two classes (use labels 1/-1 for binary data)");
    }
    Ok(Targets::Classes {
        labels: labels.iter().map(|&l| (l - 1) as usize).collect(),
        num_classes: r,
    })
}

fn build_dataset(points: Vec<Vec<f64>>, targets: Targets, weights: Option<Vec<f64>>, normalize: bool) -> Result<Dataset> {
    let d = match weights {
        Some(w) if normalize => Dataset::normalized(points, targets, w),
        Some(w) => Dataset::new(points, targets, w),
        None => Dataset::uniform(points, targets),
    };
    d.map_err(|e| anyhow!("invalid dataset: {e}"))
}

/// CSV with header `x1..xd,label[,weight]`; a weight column is rescaled to sum 1.
pub fn parse_csv_dataset(bytes: &[u8]) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes);
    let header: Vec<String> = rdr.headers().context("line 1: missing header")?.iter().map(str::to_string).collect();
    let label_col = header
        .iter()
        .position(|h| h == "label")
        .ok_or_else(|| anyhow!("line 1: header needs a 'label' column"))?;
    let weight_col = header.iter().position(|h| h == "weight");
    let x_cols: Vec<usize> = (0..label_col).collect();
    for (j, &c) in x_cols.iter().enumerate() {
        if header[c] != format!("x{}", j + 1) {
            bail!("line 1: expected column 'x{}', found '{}'", j + 1, header[c]);
        }
    }
    if x_cols.is_empty() {
        bail!("line 1: no feature columns x1..xd before 'label'");
    }
    if let Some(extra) = header.iter().enumerate().find(|&(i, _)| i > label_col && Some(i) != weight_col) {
        bail!("line 1: unexpected column '{}'", extra.1);
    }
    let (mut points, mut labels, mut weights) = (Vec::new(), Vec::new(), Vec::new());
    for (row, rec) in rdr.records().enumerate() {
        let line = row + 2;
        let rec = rec.with_context(|| format!("line {line}: malformed row"))?;
        if rec.len() != header.len() {
            bail!("line {line}: expected {} fields, found {}", header.len(), rec.len());
        }
        let num = |c: usize| -> Result<f64> {
            let v: f64 = rec[c]
                .parse()
                .map_err(|_| anyhow!("line {line}: field '{}': invalid number '{}'", header[c], &rec[c]))?;
            if !v.is_finite() {
                bail!("line {line}: field '{}': value must be finite", header[c]);
            }
            Ok(v)
        };
        points.push(x_cols.iter().map(|&c| num(c)).collect::<Result<Vec<_>>>()?);
        labels.push(
            rec[label_col]
                .parse::<i64>()
                .map_err(|_| anyhow!("line {line}: field 'label': invalid integer '{}'", &rec[label_col]))?,
        );
        if let Some(c) = weight_col {
            weights.push(num(c)?);
        }
    }
    if points.is_empty() {
        bail!("dataset has no rows");
    }
    let targets = targets_from_labels(&labels, None, None)?;
    build_dataset(points, targets, weight_col.map(|_| weights), true)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetJson {
    points: Vec<Vec<f64>>,
    labels: Vec<i64>,
    #[serde(default)]
    weights: Option<Vec<f64>>,
    #[serde(default)]
    kind: Option<String>,
    #[serde(default)]
    num_classes: Option<usize>,
}

pub fn parse_json_dataset(bytes: &[u8]) -> Result<Dataset> {
    let j: DatasetJson = serde_json::from_slice(bytes).map_err(|e| anyhow!("dataset JSON: {e}"))?;
    let targets = targets_from_labels(&j.labels, j.kind.as_deref(), j.num_classes)?;
    build_dataset(j.points, targets, j.weights, false)
}

/// Reads a dataset, choosing the format by extension (`.json`, otherwise CSV).
pub fn load_dataset(path: &Path) -> Result<(Dataset, Vec<u8>)> {
    let bytes = read_bytes(path)?;
    let d = if path.extension().is_some_and(|e| e == "json") {
        parse_json_dataset(&bytes)
    } else {
        parse_csv_dataset(&bytes)
    }
    .with_context(|| format!("in {}", path.display()))?;
    Ok((d, bytes))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeJson {
    pub dims: Vec<usize>,
    pub alpha: f64,
    #[serde(default = "yes")]
    pub output_bias: bool,
}

fn yes() -> bool {
    true
}

/// Row-major network archive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsJson {
    pub shape: ShapeJson,
    pub weights: Vec<Vec<Vec<f64>>>,
    pub biases: Vec<Vec<f64>>,
    pub head: Vec<Vec<f64>>,
    #[serde(default)]
    pub head_bias: Option<Vec<f64>>,
}

/// Replicated archive used by the penalty mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplicatedJson {
    pub gamma: f64,
    pub replicas: Vec<ParamsJson>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Archive {
    Network(Params),
    Replicated(ReplicatedParams),
}

pub fn shape_from_json(s: &ShapeJson) -> Result<NetworkShape> {
    let shape = NetworkShape::new(s.dims.clone(), s.alpha).map_err(|e| anyhow!("shape: {e}"))?;
    Ok(if s.output_bias { shape } else { shape.without_output_bias() })
}

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<Matrix<f64>> {
    Matrix::from_rows(rows).map_err(|e| anyhow!("{what}: {e}"))
}

pub fn params_from_json(j: &ParamsJson) -> Result<Params> {
    let shape = shape_from_json(&j.shape)?;
    let weights = j
        .weights
        .iter()
        .enumerate()
        .map(|(i, w)| matrix(w, &format!("weights[{i}]")))
        .collect::<Result<Vec<_>>>()?;
    let out = shape.output_dim();
    let head_bias = match (&j.head_bias, shape.output_bias) {
        (Some(b), true) => b.clone(),
        (None, true) => bail!("head_bias is required when output_bias is true"),
        (Some(b), false) if b.iter().any(|&x| x != 0.0) => bail!("head_bias must be absent or zero without output bias"),
        _ => vec![0.0; out],
    };
    let p = Params {
        shape,
        weights,
        biases: j.biases.clone(),
        head: matrix(&j.head, "head")?,
        head_bias,
    };
    p.validate().map_err(|e| anyhow!("params: {e}"))?;
    Ok(p)
}

pub fn params_to_json(p: &Params) -> ParamsJson {
    ParamsJson {
        shape: ShapeJson {
            dims: p.shape.dims.clone(),
            alpha: p.shape.alpha,
            output_bias: p.shape.output_bias,
        },
        weights: p.weights.iter().map(|w| w.to_rows()).collect(),
        biases: p.biases.clone(),
        head: p.head.to_rows(),
        head_bias: p.shape.output_bias.then(|| p.head_bias.clone()),
    }
}

pub fn archive_to_json(a: &Archive) -> Value {
    match a {
        Archive::Network(p) => serde_json::to_value(params_to_json(p)).unwrap(),
        Archive::Replicated(r) => serde_json::to_value(ReplicatedJson {
            gamma: r.gamma,
            replicas: r.replicas.iter().map(params_to_json).collect(),
        })
        .unwrap(),
    }
}

pub fn parse_archive(bytes: &[u8]) -> Result<Archive> {
    let v: Value = serde_json::from_slice(bytes).map_err(|e| anyhow!("params JSON: {e}"))?;
    if v.get("replicas").is_some() {
        let j: ReplicatedJson = serde_json::from_value(v).map_err(|e| anyhow!("params JSON: {e}"))?;
        let reps = j.replicas.iter().map(params_from_json).collect::<Result<Vec<_>>>()?;
        Ok(Archive::Replicated(ReplicatedParams::new(reps, j.gamma).map_err(|e| anyhow!("replicas: {e}"))?))
    } else {
        let j: ParamsJson = serde_json::from_value(v).map_err(|e| anyhow!("params JSON: {e}"))?;
        Ok(Archive::Network(params_from_json(&j)?))
    }
}

pub fn load_archive(path: &Path) -> Result<(Archive, Vec<u8>)> {
    let bytes = read_bytes(path)?;
    let a = parse_archive(&bytes).with_context(|| format!("in {}", path.display()))?;
    Ok((a, bytes))
}

pub fn write_json(path: &Path, v: &impl Serialize) -> Result<()> {
    let s = serde_json::to_string_pretty(v)?;
    fs::write(path, s + "\n").with_context(|| format!("cannot write {}", path.display()))
}

/// Applies `key=value` overrides to a JSON object; values parse as JSON, falling back to strings.
pub fn apply_overrides(config: &mut Value, sets: &[String]) -> Result<()> {
    let obj = config
        .as_object_mut()
        .ok_or_else(|| anyhow!("config must be a JSON object"))?;
    for s in sets {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| anyhow!("--set expects key=value, got '{s}'"))?;
        let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
        obj.insert(k.trim().to_string(), value);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_roundtrip_bitwise() {
        let shape = NetworkShape::new(vec![2, 2, 1], 0.25).unwrap();
        let vals = [0.1 + 0.2, 1e-300, -5e-324, 1.0 / 3.0, 2f64.powi(60), -0.0, 123456.789e-7, f64::MAX];
        let mut flat = vals.to_vec();
        flat.push(std::f64::consts::PI);
        let p = Params::from_flat(&shape, &flat).unwrap();
        let text = serde_json::to_string(&archive_to_json(&Archive::Network(p.clone()))).unwrap();
        let Archive::Network(q) = parse_archive(text.as_bytes()).unwrap() else { panic!() };
        let bits = |p: &Params| p.to_flat().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&p), bits(&q));
    }

    #[test]
    fn json_dataset_with_explicit_weights() {
        let d = parse_json_dataset(br#"{"points":[[0.0],[1.0],[2.0]],"labels":[1,3,2],"weights":[0.5,0.25,0.25]}"#).unwrap();
        assert_eq!(d.num_classes(), 3);
        assert_eq!(d.class_of(1), Some(2));
        assert!(parse_json_dataset(br#"{"points":[[0.0]],"labels":[1],"weights":[0.4]}"#).is_err());
    }

    #[test]
    fn csv_header_is_checked() {
        assert!(parse_csv_dataset(b"x1,x3,label\n0,0,1\n").is_err());
        assert!(parse_csv_dataset(b"x1,label,extra\n0,1,2\n").is_err());
        let d = parse_csv_dataset(b"x1,label,weight\n0,1,3\n1,-1,1\n").unwrap();
        assert_eq!(d.weights(), &[0.75, 0.25]);
    }

    #[test]
    fn overrides_parse_json_values() {
        let mut v = serde_json::json!({"alpha": 0.0, "hidden": [2]});
        apply_overrides(&mut v, &["alpha=0.25".into(), "hidden=[3,3]".into(), "mode=penalty".into()]).unwrap();
        assert_eq!(v, serde_json::json!({"alpha": 0.25, "hidden": [3, 3], "mode": "penalty"}));
        assert!(apply_overrides(&mut v, &["novalue".into()]).is_err());
    }
}
