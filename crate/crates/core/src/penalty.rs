//! Exact-penalty multiclass objective with replicated hidden layers.

use crate::cells::CellId;
use crate::clarke::{certify, clarke_generators, is_critical, CriticalityCertificate, CriticalityOptions};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::landscape::{separability, Verdict};
use crate::linalg::norm;
use crate::loss::{point_losses, total_loss};
use crate::network::{NetworkShape, Params};

pub const MAX_PRODUCT_CELLS: usize = 1 << 12;

/// One single-output network per class; replica `r` carries hidden parameters
/// `ω̆^(r)` and the head `(v_r, c_r)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplicatedParams {
    pub replicas: Vec<Params<f64>>,
    pub gamma: f64,
}

impl ReplicatedParams {
    pub fn new(replicas: Vec<Params<f64>>, gamma: f64) -> Result<Self> {
        if replicas.is_empty() {
            return Err(Error::InvalidInput("need at least one replica".into()));
        }
        if !(gamma > 0.0) {
            return Err(Error::InvalidInput(format!("penalty strength {gamma} must be positive")));
        }
        let shape = &replicas[0].shape;
        if shape.output_dim() != 1 {
            return Err(Error::Shape("replicas must have a single output".into()));
        }
        if replicas.iter().any(|p| p.shape != *shape) {
            return Err(Error::Shape("replicas must share one shape".into()));
        }
        for p in &replicas {
            p.validate()?;
        }
        Ok(Self { replicas, gamma })
    }

    /// Replicates the hidden layers of a multi-output network, one head row per class.
    pub fn from_shared(params: &Params<f64>, gamma: f64) -> Result<Self> {
        let r_n = params.shape.output_dim();
        let mut dims = params.shape.dims.clone();
        *dims.last_mut().unwrap() = 1;
        let shape = NetworkShape {
            dims,
            ..params.shape.clone()
        };
        let replicas = (0..r_n)
            .map(|r| {
                let mut p = Params::zeros(&shape);
                p.weights = params.weights.clone();
                p.biases = params.biases.clone();
                p.head.row_mut(0).copy_from_slice(params.head.row(r));
                p.head_bias[0] = params.head_bias[r];
                p
            })
            .collect();
        Self::new(replicas, gamma)
    }

    pub fn shape(&self) -> &NetworkShape {
        &self.replicas[0].shape
    }

    pub fn num_classes(&self) -> usize {
        self.replicas.len()
    }

    /// Number of hidden parameters, which lead each replica's flat vector.
    pub fn hidden_len(&self) -> usize {
        let s = self.shape();
        s.slots()[s.depth()].weights
    }

    pub fn replica_len(&self) -> usize {
        self.shape().num_params()
    }

    /// Mean hidden parameters `(ω̄, b̄)` in flat layout.
    pub fn mean_hidden(&self) -> Vec<f64> {
        let h = self.hidden_len();
        let mut m = vec![0.0; h];
        for p in &self.replicas {
            for (mi, x) in m.iter_mut().zip(&p.to_flat()[..h]) {
                *mi += x;
            }
        }
        let r = self.replicas.len() as f64;
        m.iter_mut().for_each(|x| *x /= r);
        m
    }

    /// Replica `r` with its hidden layers replaced by the mean.
    pub fn averaged_replica(&self, r: usize) -> Params<f64> {
        let mut flat = self.replicas[r].to_flat();
        let m = self.mean_hidden();
        flat[..m.len()].copy_from_slice(&m);
        Params::from_flat(self.shape(), &flat).expect("same shape")
    }

    /// Multi-output network with mean hidden layers and stacked heads.
    pub fn shared_params(&self) -> Params<f64> {
        let mut dims = self.shape().dims.clone();
        *dims.last_mut().unwrap() = self.replicas.len();
        let shape = NetworkShape {
            dims,
            ..self.shape().clone()
        };
        let avg = self.averaged_replica(0);
        let mut p = Params::zeros(&shape);
        p.weights = avg.weights;
        p.biases = avg.biases;
        for (r, rep) in self.replicas.iter().enumerate() {
            p.head.row_mut(r).copy_from_slice(rep.head.row(0));
            p.head_bias[r] = rep.head_bias[0];
        }
        p
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.replicas.iter().flat_map(|p| p.to_flat()).collect()
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        let n = self.replica_len();
        for (p, chunk) in self.replicas.iter_mut().zip(flat.chunks(n)) {
            p.set_flat(chunk);
        }
    }

    /// Largest `‖ω^(ℓ,r) − ω̄^(ℓ)‖ + ‖b^(ℓ,r) − b̄^(ℓ)‖` over layers and replicas.
    pub fn max_deviation(&self) -> f64 {
        let m = self.mean_hidden();
        let slots = self.shape().slots();
        let mut worst: f64 = 0.0;
        for p in &self.replicas {
            let f = p.to_flat();
            for s in &slots[..self.shape().depth()] {
                let w = s.weights..s.weights + s.rows * s.cols;
                let b = s.bias.unwrap()..s.bias.unwrap() + s.rows;
                let dw: f64 = w.map(|j| (f[j] - m[j]).powi(2)).sum::<f64>().sqrt();
                let db: f64 = b.map(|j| (f[j] - m[j]).powi(2)).sum::<f64>().sqrt();
                worst = worst.max(dw + db);
            }
        }
        worst
    }
}

fn check_classes(reps: &ReplicatedParams, data: &Dataset<f64>) -> Result<()> {
    if data.num_classes() != reps.num_classes() {
        return Err(Error::Shape(format!(
            "{} replicas for {} classes",
            reps.num_classes(),
            data.num_classes()
        )));
    }
    Ok(())
}

/// `R/(R−1) Σ_ℓ Σ_r ‖ω^(ℓ,r) − ω̄^(ℓ)‖² + ‖b^(ℓ,r) − b̄^(ℓ)‖²`.
pub fn penalty_r(reps: &ReplicatedParams) -> Result<f64> {
    let r_n = reps.num_classes();
    if r_n < 2 {
        return Err(Error::InvalidInput("penalty needs at least two replicas".into()));
    }
    let m = reps.mean_hidden();
    let h = m.len();
    let s: f64 = reps
        .replicas
        .iter()
        .map(|p| p.to_flat()[..h].iter().zip(&m).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
        .sum();
    Ok(r_n as f64 / (r_n as f64 - 1.0) * s)
}

/// Gradient of the (unscaled) penalty in the concatenated replica layout:
/// `2R/(R−1) (ω^(r) − ω̄)` on hidden entries, zero on heads.
pub fn penalty_gradient(reps: &ReplicatedParams) -> Result<Vec<f64>> {
    let r_n = reps.num_classes();
    if r_n < 2 {
        return Err(Error::InvalidInput("penalty needs at least two replicas".into()));
    }
    let m = reps.mean_hidden();
    let n = reps.replica_len();
    let c = 2.0 * r_n as f64 / (r_n as f64 - 1.0);
    let mut g = vec![0.0; n * r_n];
    for (r, p) in reps.replicas.iter().enumerate() {
        let f = p.to_flat();
        for j in 0..m.len() {
            g[r * n + j] = c * (f[j] - m[j]);
        }
    }
    Ok(g)
}

/// `Σ_r L^(r)(ω^(r)) + γ R`.
pub fn e_gamma(reps: &ReplicatedParams, data: &Dataset<f64>) -> Result<f64> {
    check_classes(reps, data)?;
    let mut total = 0.0;
    for (r, p) in reps.replicas.iter().enumerate() {
        total += total_loss(p, &data.binary_view(r))?;
    }
    Ok(total + reps.gamma * penalty_r(reps)?)
}

/// A generator of the subdifferential of `E_γ` on one product cell.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductGenerator {
    pub cells: Vec<CellId>,
    pub gradient: Vec<f64>,
}

/// Product-cell generators: per-class cell gradients plus the smooth penalty gradient.
pub fn subgrad_e(reps: &ReplicatedParams, data: &Dataset<f64>, tau: f64, max_zeros: usize) -> Result<Vec<ProductGenerator>> {
    check_classes(reps, data)?;
    let per_class: Vec<_> = reps
        .replicas
        .iter()
        .enumerate()
        .map(|(r, p)| clarke_generators(p, &data.binary_view(r), tau, max_zeros))
        .collect::<Result<_>>()?;
    let count = per_class.iter().try_fold(1usize, |acc, g| acc.checked_mul(g.len()));
    match count {
        Some(c) if c <= MAX_PRODUCT_CELLS => {}
        _ => {
            return Err(Error::TooManyCells {
                count: count.unwrap_or(usize::MAX),
                limit: MAX_PRODUCT_CELLS,
            })
        }
    }
    let pen: Vec<f64> = penalty_gradient(reps)?.into_iter().map(|g| reps.gamma * g).collect();
    let n = reps.replica_len();
    let mut out = vec![ProductGenerator {
        cells: Vec::new(),
        gradient: pen,
    }];
    for (r, gens) in per_class.iter().enumerate() {
        let mut next = Vec::with_capacity(out.len() * gens.len());
        for base in &out {
            for g in gens {
                let mut pg = base.clone();
                pg.cells.push(g.cell.clone());
                for (a, b) in pg.gradient[r * n..(r + 1) * n].iter_mut().zip(&g.gradient) {
                    *a += b;
                }
                next.push(pg);
            }
        }
        out = next;
    }
    Ok(out)
}

/// Concatenates per-class cell identifiers into one product identifier.
pub(crate) fn product_id(cells: &[CellId]) -> CellId {
    let entries = cells.iter().flat_map(|c| c.entries().iter().copied()).collect();
    CellId::new(entries).expect("±1 entries")
}

/// Clarke criticality of `E_γ`.
pub fn criticality(reps: &ReplicatedParams, data: &Dataset<f64>, opts: &CriticalityOptions) -> Result<(bool, CriticalityCertificate)> {
    let gens = subgrad_e(reps, data, opts.tau, opts.max_zeros)?;
    let (cells, grads) = gens
        .into_iter()
        .map(|g| (product_id(&g.cells), g.gradient))
        .unzip();
    let cert = certify(cells, grads, opts.eps_crit)?;
    Ok((cert.is_critical(), cert))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Thm7Report {
    pub verdict: Verdict,
    pub max_deviation: f64,
    pub tol_rep: f64,
    pub class_residuals: Vec<f64>,
}

/// Exactness of the penalty at a critical point of `E_γ`: equal replicas and a
/// Clarke-critical one-versus-all problem per class at the mean hidden layers.
pub fn thm7_check(
    reps: &ReplicatedParams,
    data: &Dataset<f64>,
    cert: &CriticalityCertificate,
    class_eps: f64,
) -> Result<Thm7Report> {
    check_classes(reps, data)?;
    if !cert.is_critical() {
        return Err(Error::Precondition(format!(
            "not a critical point of the penalized objective: residual {:e}",
            cert.residual_norm
        )));
    }
    let max_deviation = reps.max_deviation();
    let tol_rep = 1e-5 * (1.0 + norm(&reps.mean_hidden()));
    let mut class_residuals = Vec::with_capacity(reps.num_classes());
    for r in 0..reps.num_classes() {
        let p = reps.averaged_replica(r);
        let (_, c) = is_critical(&p, &data.binary_view(r), &CriticalityOptions::with_eps(class_eps))?;
        class_residuals.push(c.residual_norm);
    }
    let ok_dev = max_deviation <= tol_rep;
    let ok_res = class_residuals.iter().all(|&r| r <= class_eps);
    Ok(Thm7Report {
        verdict: Verdict {
            passed: ok_dev && ok_res,
            applicable: true,
            details: vec![
                format!("max replica deviation {max_deviation:e} (tolerance {tol_rep:e})"),
                format!("per-class residuals {class_residuals:?}"),
            ],
        },
        max_deviation,
        tol_rep,
        class_residuals,
    })
}

/// ReLU multiclass: an unsolved (point, class) pair is ignored by every neuron
/// that class uses, `(v_r)_k σ(⟨w_k, x⟩ + b_k) = 0`.
pub fn multiclass_alpha0_check(reps: &ReplicatedParams, data: &Dataset<f64>, cert: &CriticalityCertificate) -> Result<Verdict> {
    check_classes(reps, data)?;
    let shape = reps.shape();
    if shape.alpha != 0.0 || shape.depth() != 1 {
        return Err(Error::Precondition("needs leak slope 0 and one hidden layer".into()));
    }
    if !cert.is_critical() {
        return Err(Error::Precondition("not a critical point of the penalized objective".into()));
    }
    for r in 0..reps.num_classes() {
        if separability(&data.binary_view(r))?.is_none() {
            return Err(Error::Precondition(format!("class {r} is not linearly separable")));
        }
    }
    let mut details = Vec::new();
    for (r, p) in reps.replicas.iter().enumerate() {
        let view = data.binary_view(r);
        let losses = point_losses(p, &view)?;
        for (i, &l) in losses.iter().enumerate() {
            if l <= 1e-9 {
                continue;
            }
            let a = &p.forward_unchecked(view.point(i)).preactivations[0];
            for (k, &ak) in a.iter().enumerate() {
                let s = p.head[(0, k)].abs() * ak.max(0.0);
                if s > 1e-9 {
                    details.push(format!("point {i}, class {r}, neuron {k}: {s:e}"));
                }
            }
        }
    }
    Ok(Verdict {
        passed: details.is_empty(),
        applicable: true,
        details,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_reps(vals: &[f64]) -> ReplicatedParams {
        // d = 1, one hidden neuron: hidden parameters are (w, b).
        let shape = NetworkShape::new(vec![1, 1, 1], 0.5).unwrap();
        let reps = vals
            .iter()
            .map(|&v| Params::from_flat(&shape, &[v, 0.0, 1.0, 0.0]).unwrap())
            .collect();
        ReplicatedParams::new(reps, 1.0).unwrap()
    }

    #[test]
    fn two_replica_formula() {
        assert_eq!(penalty_r(&scalar_reps(&[0.0, 2.0])).unwrap(), 4.0);
        assert_eq!(penalty_r(&scalar_reps(&[1.5, 1.5, 1.5])).unwrap(), 0.0);
        assert!(penalty_r(&scalar_reps(&[1.0])).is_err());
    }

    #[test]
    fn permutation_and_offset_invariance() {
        let a = penalty_r(&scalar_reps(&[0.3, -1.0, 2.0])).unwrap();
        let b = penalty_r(&scalar_reps(&[2.0, 0.3, -1.0])).unwrap();
        let c = penalty_r(&scalar_reps(&[5.3, 4.0, 7.0])).unwrap();
        assert!((a - b).abs() < 1e-14 && (a - c).abs() < 1e-12);
    }

    #[test]
    fn rejects_nonpositive_gamma() {
        let shape = NetworkShape::new(vec![1, 1, 1], 0.5).unwrap();
        assert!(ReplicatedParams::new(vec![Params::zeros(&shape)], 0.0).is_err());
    }
}
