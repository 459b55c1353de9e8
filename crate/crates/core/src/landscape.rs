//! Theorem predicates and oracles for one-hidden-layer and deep-linear landscapes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::cells::{cell_of, incidence_set, signature, CellId, CellLocation};
use crate::clarke::{is_critical, CriticalityCertificate, CriticalityOptions};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{dot, norm, Matrix};
use crate::loss::{point_losses, total_loss};
use crate::lp::LinearProgram;
use crate::multilinear::{
    decomposition_l1, flat_cell_test_l1, flat_cell_test_sampled, frozen_from_cell, frozen_from_signs,
    FrozenActivation,
};
use crate::network::{NetworkShape, Params};

/// `⟨q, y x⟩ + β y ≥ m` for every point, with `‖q‖₂ = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct SeparatingHyperplane {
    pub q: Vec<f64>,
    pub beta: f64,
    pub margin: f64,
}

fn binary_labels(data: &Dataset<f64>) -> Result<Vec<f64>> {
    (0..data.len())
        .map(|i| {
            data.label(i)
                .map(f64::from)
                .ok_or_else(|| Error::Unsupported("binary labels required".into()))
        })
        .collect()
}

/// Margin-maximizing separating hyperplane, or `None` when the classes overlap.
pub fn separability(data: &Dataset<f64>) -> Result<Option<SeparatingHyperplane>> {
    let y = binary_labels(data)?;
    let d = data.dim();
    let reach = data
        .points()
        .iter()
        .map(|p| p.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let beta_bound = 4.0 * (1.0 + reach);
    let mut lp = LinearProgram::maximize();
    let q: Vec<usize> = (0..d).map(|_| lp.var(0.0, -1.0, 1.0)).collect();
    let beta = lp.var(0.0, -beta_bound, beta_bound);
    let m = lp.var(1.0, f64::NEG_INFINITY, f64::INFINITY);
    for (p, &yi) in data.points().iter().zip(&y) {
        let mut terms: Vec<(usize, f64)> = q.iter().zip(p).map(|(&v, &x)| (v, yi * x)).collect();
        terms.push((beta, yi));
        terms.push((m, -1.0));
        lp.ge(&terms, 0.0);
    }
    let Some((_, sol)) = lp.solve()? else {
        return Err(Error::Lp("separability program reported infeasible".into()));
    };
    let mut qv: Vec<f64> = sol[..d].to_vec();
    let mut b = sol[d];
    let n = norm(&qv);
    if n < 1e-12 {
        qv = vec![0.0; d];
        qv[0] = 1.0;
    } else {
        qv.iter_mut().for_each(|x| *x /= n);
        b /= n;
    }
    let margin = data
        .points()
        .iter()
        .zip(&y)
        .map(|(p, &yi)| yi * dot(&qv, p) + b * yi)
        .fold(f64::INFINITY, f64::min);
    Ok((margin > 1e-9).then_some(SeparatingHyperplane {
        q: qv,
        beta: b,
        margin,
    }))
}

/// Witness that a dataset is rare.
#[derive(Clone, Debug, PartialEq)]
pub struct RareWitness {
    /// Exponent `j` of `λ^(i) = α^j`.
    pub lambda_power: Vec<usize>,
    pub lambda: Vec<f64>,
    /// `ε^(i,r)`; own-class entries are always 0.
    pub eps: Vec<Vec<u8>>,
    /// `ε^(i) = Σ_{r ≠ class(i)} ε^(i,r)`.
    pub eps_total: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum GenericityVerdict {
    Generic,
    Rare(RareWitness),
}

pub const GENERICITY_BUDGET: f64 = 16_777_216.0;

/// The two equality families defining rare data, for every class `r`
/// (binary data read as two classes).
pub fn rare_system_holds(data: &Dataset<f64>, eps: &[Vec<u8>], lambdas: &[f64]) -> bool {
    const TOL: f64 = 1e-10;
    let n = data.len();
    let r_n = data.num_classes();
    let d = data.dim();
    let total = |i: usize| -> f64 {
        let own = data.class_index(i);
        (0..r_n).filter(|&r| r != own).map(|r| f64::from(eps[i][r])).sum()
    };
    for r in 0..r_n {
        let mut vx = vec![0.0; d];
        let mut s = 0.0;
        for i in 0..n {
            let coef = if data.class_index(i) == r { total(i) } else { -f64::from(eps[i][r]) };
            if coef == 0.0 {
                continue;
            }
            let w = coef * lambdas[i] * data.weight(i);
            s += w;
            for (v, &x) in vx.iter_mut().zip(data.point(i)) {
                *v += w * x;
            }
        }
        if s.abs() > TOL || vx.iter().any(|v| v.abs() > TOL) {
            return false;
        }
    }
    true
}

/// Exhaustive rare/generic decision.
///
/// Only the off-class indicators `ε^(i,r)`, `r ≠ class(i)`, enter the system, so
/// only those are enumerated (and must not all vanish).
pub fn genericity(data: &Dataset<f64>, alpha: f64, depth: usize) -> Result<GenericityVerdict> {
    let n = data.len();
    let r_n = data.num_classes();
    let size = ((depth + 1) as f64).powi(n as i32) * 2f64.powi((n * r_n) as i32);
    if size > GENERICITY_BUDGET {
        return Err(Error::BudgetExceeded {
            size,
            limit: GENERICITY_BUDGET,
        });
    }
    let slots: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| {
            let own = data.class_index(i);
            (0..r_n).filter(move |&r| r != own).map(move |r| (i, r))
        })
        .collect();
    let powers: Vec<f64> = (0..=depth).map(|j| alpha.powi(j as i32)).collect();
    let n_lambda = (depth + 1).pow(n as u32);
    let witness = (1u64..1u64 << slots.len()).into_par_iter().find_map_first(|mask| {
        let mut eps = vec![vec![0u8; r_n]; n];
        for (b, &(i, r)) in slots.iter().enumerate() {
            eps[i][r] = (mask >> b & 1) as u8;
        }
        let mut lambda = vec![0.0; n];
        let mut power = vec![0usize; n];
        for idx in 0..n_lambda {
            let mut rest = idx;
            for i in 0..n {
                power[i] = rest % (depth + 1);
                lambda[i] = powers[power[i]];
                rest /= depth + 1;
            }
            if rare_system_holds(data, &eps, &lambda) {
                let eps_total = eps
                    .iter()
                    .enumerate()
                    .map(|(i, e)| {
                        let own = data.class_index(i);
                        (0..r_n).filter(|&r| r != own).map(|r| u32::from(e[r])).sum()
                    })
                    .collect();
                return Some(RareWitness {
                    lambda_power: power.clone(),
                    lambda: lambda.clone(),
                    eps: eps.clone(),
                    eps_total,
                });
            }
        }
        None
    });
    Ok(witness.map_or(GenericityVerdict::Generic, GenericityVerdict::Rare))
}

fn require_binary_l1(params: &Params<f64>, data: &Dataset<f64>) -> Result<()> {
    if params.shape.depth() != 1 || !data.is_binary() {
        return Err(Error::Precondition(
            "needs one hidden layer and binary labels".into(),
        ));
    }
    Ok(())
}

/// `ρ^(i)_k = Σ_u θ^(u) μ^(i) ε^(i,u) λ_k^(i,u)` as an `N × K` matrix.
pub fn rho_coefficients(
    cert: &CriticalityCertificate,
    data: &Dataset<f64>,
    shape: &NetworkShape,
) -> Result<Matrix<f64>> {
    if shape.depth() != 1 || !data.is_binary() {
        return Err(Error::Unsupported("needs one hidden layer and binary labels".into()));
    }
    let k_n = shape.dims[1];
    let mut rho = Matrix::zeros(data.len(), k_n);
    for (u, &th) in cert.cells.iter().zip(&cert.theta) {
        let f: FrozenActivation<f64> = frozen_from_cell(u, shape)?;
        for i in 0..data.len() {
            for k in 0..k_n {
                rho[(i, k)] += th * data.weight(i) * f.eps[i][0] * f.lambda[i][0][k];
            }
        }
    }
    Ok(rho)
}

/// Outcome of a theorem predicate.
#[derive(Clone, Debug, PartialEq)]
pub struct Verdict {
    pub passed: bool,
    /// False when the theorem's conclusion does not constrain this point.
    pub applicable: bool,
    pub details: Vec<String>,
}

impl Verdict {
    fn vacuous(why: &str) -> Self {
        Self {
            passed: true,
            applicable: false,
            details: vec![why.to_string()],
        }
    }
}

fn require_critical(cert: &CriticalityCertificate) -> Result<()> {
    if !cert.is_critical() {
        return Err(Error::Precondition(format!(
            "not a critical point: residual {:e} > {:e}",
            cert.residual_norm, cert.eps_crit
        )));
    }
    Ok(())
}

fn require_separable(data: &Dataset<f64>) -> Result<SeparatingHyperplane> {
    separability(data)?.ok_or_else(|| Error::Precondition("data are not linearly separable".into()))
}

/// Leaky slope: a critical point has `v = 0` or zero loss.
pub fn thm4_check(params: &Params<f64>, data: &Dataset<f64>, cert: &CriticalityCertificate) -> Result<Verdict> {
    if params.shape.alpha <= 0.0 {
        return Err(Error::Precondition("needs a positive leak slope".into()));
    }
    require_binary_l1(params, data)?;
    require_separable(data)?;
    require_critical(cert)?;
    let v = norm(params.head.row(0));
    let loss = total_loss(params, data)?;
    if v <= 1e-9 {
        return Ok(Verdict::vacuous("v = 0"));
    }
    Ok(Verdict {
        passed: loss <= 1e-6,
        applicable: true,
        details: vec![format!("|v| = {v:e}, loss = {loss:e}")],
    })
}

/// An unsolved point seen by a neuron with nonzero output weight.
#[derive(Clone, Debug, PartialEq)]
pub struct BlindViolation {
    pub point: usize,
    pub neuron: usize,
    pub preactivation: f64,
    pub v: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Thm6Report {
    pub verdict: Verdict,
    pub unsolved: Vec<usize>,
    pub violations: Vec<BlindViolation>,
}

/// ReLU: every unsolved point lies on the blind side of every neuron with `v_k ≠ 0`.
pub fn thm6_check(
    params: &Params<f64>,
    data: &Dataset<f64>,
    cert: &CriticalityCertificate,
    tau: f64,
) -> Result<Thm6Report> {
    if params.shape.alpha != 0.0 {
        return Err(Error::Precondition("needs leak slope 0".into()));
    }
    require_binary_l1(params, data)?;
    require_separable(data)?;
    require_critical(cert)?;
    let losses = point_losses(params, data)?;
    let unsolved: Vec<usize> = (0..data.len()).filter(|&i| losses[i] > 1e-9).collect();
    let mut violations = Vec::new();
    for &i in &unsolved {
        let a = &params.forward_unchecked(data.point(i)).preactivations[0];
        for (k, &ak) in a.iter().enumerate() {
            let v = params.head[(0, k)];
            if v.abs() > 1e-9 && ak > tau {
                violations.push(BlindViolation {
                    point: i,
                    neuron: k,
                    preactivation: ak,
                    v,
                });
            }
        }
    }
    let verdict = Verdict {
        passed: violations.is_empty(),
        applicable: true,
        details: vec![format!("{} unsolved, {} violations", unsolved.len(), violations.len())],
    };
    Ok(Thm6Report {
        verdict,
        unsolved,
        violations,
    })
}

/// Equal total weight on both classes (to 1e-12), the balance hypothesis for `v = 0` minima.
pub fn class_weights_balanced(data: &Dataset<f64>) -> Result<bool> {
    let y = binary_labels(data)?;
    let s: f64 = y.iter().zip(data.weights()).map(|(y, w)| y * w).sum();
    Ok(s.abs() <= 1e-12)
}

/// A perturbation direction from the descent lemmas and its predicted decrease.
#[derive(Clone, Debug, PartialEq)]
pub struct DescentProbe {
    pub which: u8,
    pub neuron: usize,
    /// Flat parameter direction.
    pub direction: Vec<f64>,
    /// Predicted decrease `linear · t + quadratic · t²` (exact change for probe 2).
    pub linear: f64,
    pub quadratic: f64,
    /// `(t, L(ω) − L(ω + t d))` at `t ∈ {1e-4, 1e-5, 1e-6}`.
    pub observed: Vec<(f64, f64)>,
}

impl DescentProbe {
    pub fn predicted(&self, t: f64) -> f64 {
        self.linear * t + self.quadratic * t * t
    }

    pub fn best_decrease(&self) -> f64 {
        self.observed.iter().map(|o| o.1).fold(f64::NEG_INFINITY, f64::max)
    }
}

pub const PROBE_STEPS: [f64; 3] = [1e-4, 1e-5, 1e-6];

/// Frozen pattern of the cell entered along `dir`; remaining zeros are resolved
/// to the inactive side, which only lowers the predicted bounds.
fn entered_cell(params: &Params<f64>, data: &Dataset<f64>, dir: &[f64]) -> Result<FrozenActivation<f64>> {
    let x: Vec<f64> = params.to_flat().iter().zip(dir).map(|(a, b)| a + 1e-7 * b).collect();
    let p = Params::from_flat(&params.shape, &x)?;
    let sig = signature(&p, data, 0.0)?;
    frozen_from_signs(&sig.resolved(-1), &params.shape)
}

pub fn descent_probe(
    params: &Params<f64>,
    data: &Dataset<f64>,
    h: &SeparatingHyperplane,
    which: u8,
    k: usize,
) -> Result<DescentProbe> {
    require_binary_l1(params, data)?;
    let shape = &params.shape;
    let k_n = shape.dims[1];
    if k >= k_n {
        return Err(Error::InvalidInput(format!("neuron {k} out of range")));
    }
    let slots = shape.slots();
    let (hid, out) = (slots[0], slots[1]);
    let w_off = hid.weights + k * hid.cols;
    let b_off = hid.bias.unwrap() + k;
    let v_off = out.weights + k;
    let v = params.head.row(0);
    let v_zero = v.iter().all(|x| x.abs() <= 1e-12);
    let mut dir = vec![0.0; shape.num_params()];
    let s_sum = |f: &FrozenActivation<f64>| -> f64 {
        (0..data.len())
            .map(|i| data.weight(i) * f.eps[i][0] * f.lambda[i][0][k])
            .sum()
    };
    let first_order = |f: &FrozenActivation<f64>| -> Result<f64> {
        let c = decomposition_l1(data, f, shape)?;
        Ok(dot(&c.a[k], params.weights[0].row(k)) + c.alpha[k] * params.biases[0][k])
    };
    let (linear, quadratic) = match which {
        1 => {
            let vk = v[k];
            if vk == 0.0 {
                return Err(Error::Precondition("probe 1 needs v_k ≠ 0".into()));
            }
            let sg = vk.signum();
            for (j, &q) in h.q.iter().enumerate() {
                dir[w_off + j] = sg * q;
            }
            dir[b_off] = sg * h.beta;
            let f = entered_cell(params, data, &dir)?;
            (vk.abs() * h.margin * s_sum(&f), 0.0)
        }
        2 => {
            let c = if shape.output_bias { params.head_bias[0] } else { 0.0 };
            if !v_zero || (c.abs() - 1.0).abs() <= 1e-12 {
                return Err(Error::Precondition("probe 2 needs v = 0 and c ∉ {−1, 1}".into()));
            }
            dir[v_off] = 1.0;
            let sig = signature(params, data, 0.0)?;
            let f = frozen_from_signs(&sig.resolved(-1), shape)?;
            (first_order(&f)?, 0.0)
        }
        3 => {
            if !v_zero {
                return Err(Error::Precondition("probe 3 needs v = 0".into()));
            }
            for (j, &q) in h.q.iter().enumerate() {
                dir[w_off + j] = q;
            }
            dir[b_off] = h.beta;
            dir[v_off] = 1.0;
            let f = entered_cell(params, data, &dir)?;
            (first_order(&f)?, h.margin * s_sum(&f))
        }
        _ => return Err(Error::InvalidInput(format!("unknown probe {which}"))),
    };
    let base = total_loss(params, data)?;
    let flat = params.to_flat();
    let mut p = params.clone();
    let mut observed = Vec::with_capacity(PROBE_STEPS.len());
    for &t in &PROBE_STEPS {
        let x: Vec<f64> = flat.iter().zip(&dir).map(|(a, d)| a + t * d).collect();
        p.set_flat(&x);
        observed.push((t, base - total_loss(&p, data)?));
    }
    Ok(DescentProbe {
        which,
        neuron: k,
        direction: dir,
        linear,
        quadratic,
        observed,
    })
}

/// All probes whose preconditions hold at `params`.
pub fn applicable_probes(params: &Params<f64>, data: &Dataset<f64>, h: &SeparatingHyperplane) -> Result<Vec<DescentProbe>> {
    let k_n = params.shape.dims[1];
    let mut out = Vec::new();
    for which in 1..=3u8 {
        for k in 0..k_n {
            match descent_probe(params, data, h, which, k) {
                Ok(p) => out.push(p),
                Err(Error::Precondition(_)) => {}
                Err(e) => return Err(e),
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MinimumKind {
    FlatTypeI,
    SharpTypeII,
    NotMinimum,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MinimumClassification {
    pub kind: MinimumKind,
    pub certificate: CriticalityCertificate,
    pub flat_cells: Vec<CellId>,
    pub on_boundary: bool,
    /// Largest loss decrease found by probes and random search.
    pub best_decrease: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassifyOptions {
    pub criticality: CriticalityOptions,
    pub samples: usize,
    pub radii: Vec<f64>,
    pub flat_tol: f64,
    pub flat_samples: usize,
    pub seed: u64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self {
            criticality: CriticalityOptions::default(),
            samples: 1000,
            radii: vec![1e-3, 1e-5],
            flat_tol: 1e-10,
            flat_samples: 16,
            seed: 0x5eed,
        }
    }
}

pub const DECREASE_TOL: f64 = 1e-9;

/// Largest decrease found by uniform sampling in balls of the given radii.
pub fn random_search(params: &Params<f64>, data: &Dataset<f64>, samples: usize, radii: &[f64], seed: u64) -> Result<f64> {
    let base = total_loss(params, data)?;
    let flat = params.to_flat();
    let n = flat.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = params.clone();
    let mut best = f64::NEG_INFINITY;
    for &r in radii {
        for _ in 0..samples {
            let dir: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            let s = r * rng.random::<f64>().powf(1.0 / n as f64) / norm(&dir).max(1e-300);
            let x: Vec<f64> = flat.iter().zip(&dir).map(|(a, d)| a + s * d).collect();
            p.set_flat(&x);
            best = best.max(base - total_loss(&p, data)?);
        }
    }
    Ok(best)
}

fn cell_is_flat(
    u: &CellId,
    member: Option<&Params<f64>>,
    params: &Params<f64>,
    data: &Dataset<f64>,
    opts: &ClassifyOptions,
) -> Result<bool> {
    if params.shape.depth() == 1 && data.is_binary() {
        let f = frozen_from_cell(u, &params.shape)?;
        let c = decomposition_l1(data, &f, &params.shape)?;
        return Ok(flat_cell_test_l1(&c, opts.flat_tol));
    }
    let Some(member) = member else {
        return Ok(false);
    };
    match flat_cell_test_sampled(u, member, data, opts.flat_samples, opts.criticality.tau, opts.seed) {
        Ok(b) => Ok(b),
        Err(Error::SamplingFailed { .. }) => Ok(false),
        Err(e) => Err(e),
    }
}

/// Empirical type I / type II classification of a candidate local minimum.
///
/// Order: criticality, then descent probes and random search (any decrease above
/// 1e-9 rules out a minimum), then flatness of the containing or adjacent cells,
/// then location on the non-differentiable set.
pub fn classify_minimum(params: &Params<f64>, data: &Dataset<f64>, opts: &ClassifyOptions) -> Result<MinimumClassification> {
    let (critical, cert) = is_critical(params, data, &opts.criticality)?;
    let on_boundary = matches!(cell_of(params, data, opts.criticality.tau)?, CellLocation::Boundary(_));
    let mut out = MinimumClassification {
        kind: MinimumKind::NotMinimum,
        certificate: cert,
        flat_cells: Vec::new(),
        on_boundary,
        best_decrease: f64::NEG_INFINITY,
    };
    if !critical {
        return Ok(out);
    }
    let mut best = random_search(params, data, opts.samples, &opts.radii, opts.seed)?;
    if params.shape.depth() == 1 && data.is_binary() {
        if let Some(h) = separability(data)? {
            for probe in applicable_probes(params, data, &h)? {
                best = best.max(probe.best_decrease());
            }
        }
    }
    out.best_decrease = best;
    if best > DECREASE_TOL {
        return Ok(out);
    }
    let inc = incidence_set(params, data, opts.criticality.tau, opts.criticality.max_zeros)?;
    let base = params.to_flat();
    for c in &inc.cells {
        let member = if inc.zero_count == 0 {
            Some(params.clone())
        } else {
            c.direction.as_ref().and_then(|d| {
                let dn = norm(d).max(1e-300);
                let t = 1e-6 * (1.0 + norm(&base)) / dn;
                let x: Vec<f64> = base.iter().zip(d).map(|(a, b)| a + t * b).collect();
                let p = Params::from_flat(&params.shape, &x).ok()?;
                match cell_of(&p, data, 0.0).ok()? {
                    CellLocation::Cell(id) if id == c.id => Some(p),
                    _ => None,
                }
            })
        };
        if cell_is_flat(&c.id, member.as_ref(), params, data, opts)? {
            out.flat_cells.push(c.id.clone());
        }
    }
    out.kind = if !out.flat_cells.is_empty() {
        MinimumKind::FlatTypeI
    } else if on_boundary {
        MinimumKind::SharpTypeII
    } else {
        MinimumKind::Inconclusive
    };
    Ok(out)
}

/// `v̄ = (W^(L) ⋯ W^(1))ᵀ v`.
pub fn collapsed_weights(params: &Params<f64>) -> Vec<f64> {
    let mut v = params.head.row(0).to_vec();
    for w in params.weights.iter().rev() {
        v = w.tr_matvec(&v);
    }
    v
}

/// Optimal value of the convex hinge problem `min Σ μ σ(1 − y(⟨w, x⟩ + c))`, solved
/// exactly as a linear program. `with_bias = false` fixes `c = 0`.
pub fn convex_hinge_optimum(data: &Dataset<f64>, with_bias: bool) -> Result<(f64, Vec<f64>, f64)> {
    let y = binary_labels(data)?;
    let d = data.dim();
    let mut lp = LinearProgram::minimize();
    let w: Vec<usize> = (0..d).map(|_| lp.var(0.0, f64::NEG_INFINITY, f64::INFINITY)).collect();
    let c = with_bias.then(|| lp.var(0.0, f64::NEG_INFINITY, f64::INFINITY));
    for (i, (p, &yi)) in data.points().iter().zip(&y).enumerate() {
        let xi = lp.var(data.weight(i), 0.0, f64::INFINITY);
        // ξ + y⟨w, x⟩ + y c ≥ 1
        let mut terms: Vec<(usize, f64)> = w.iter().zip(p).map(|(&v, &x)| (v, yi * x)).collect();
        if let Some(c) = c {
            terms.push((c, yi));
        }
        terms.push((xi, 1.0));
        lp.ge(&terms, 1.0);
    }
    let (obj, sol) = lp
        .solve()?
        .ok_or_else(|| Error::Lp("convex hinge program infeasible".into()))?;
    Ok((obj, sol[..d].to_vec(), c.map_or(0.0, |c| sol[c])))
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeepLinearReport {
    pub verdict: Verdict,
    pub vbar: Vec<f64>,
    pub loss: f64,
    pub convex_optimum: f64,
    pub gap: f64,
}

/// Linear network: a critical point with `v̄ ≠ 0` attains the convex optimum.
pub fn deep_linear_check(params: &Params<f64>, data: &Dataset<f64>, cert: &CriticalityCertificate) -> Result<DeepLinearReport> {
    if params.shape.alpha != 1.0 {
        return Err(Error::Precondition("needs leak slope 1".into()));
    }
    if !data.is_binary() {
        return Err(Error::Precondition("needs binary labels".into()));
    }
    require_critical(cert)?;
    let vbar = collapsed_weights(params);
    let loss = total_loss(params, data)?;
    let (opt, _, _) = convex_hinge_optimum(data, params.shape.output_bias)?;
    let gap = loss - opt;
    let verdict = if norm(&vbar) <= 1e-9 {
        Verdict::vacuous("collapsed weights vanish")
    } else {
        Verdict {
            passed: gap <= 1e-5,
            applicable: true,
            details: vec![format!("loss {loss:e}, optimum {opt:e}, gap {gap:e}")],
        }
    };
    Ok(DeepLinearReport {
        verdict,
        vbar,
        loss,
        convex_optimum: opt,
        gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Targets;

    #[test]
    fn symmetric_pair_margin() {
        let d = Dataset::uniform(vec![vec![1.0], vec![-1.0]], Targets::Binary(vec![1, -1])).unwrap();
        let h = separability(&d).unwrap().unwrap();
        assert!((h.q[0] - 1.0).abs() < 1e-9);
        assert!(h.beta.abs() < 1e-9);
        assert!((h.margin - 1.0).abs() < 1e-9);
    }

    #[test]
    fn contradictory_labels_not_separable() {
        let d = Dataset::uniform(vec![vec![0.5, 1.0], vec![0.5, 1.0]], Targets::Binary(vec![1, -1])).unwrap();
        assert!(separability(&d).unwrap().is_none());
    }

    #[test]
    fn single_class_is_separable() {
        let d = Dataset::uniform(vec![vec![0.0, 1.0], vec![2.0, -1.0]], Targets::Binary(vec![1, 1])).unwrap();
        assert!(separability(&d).unwrap().is_some());
    }

    #[test]
    fn convex_optimum_of_overlapping_points() {
        let d = Dataset::uniform(vec![vec![0.0], vec![0.0]], Targets::Binary(vec![1, -1])).unwrap();
        let (opt, _, _) = convex_hinge_optimum(&d, true).unwrap();
        assert!((opt - 1.0).abs() < 1e-9);
    }
}
