//! Deterministic full-batch subgradient descent with cell-occupancy accounting.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cells::{cell_hash, signature, signature_values, DEFAULT_MAX_ZEROS, DEFAULT_TAU};
use crate::clarke::{is_critical, CriticalityCertificate, CriticalityOptions};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{dot, norm, solve_spd, Matrix};
use crate::loss::total_loss;
use crate::multilinear::{cell_gradient, entry_gradient, frozen_from_signs};
use crate::network::{NetworkShape, Params};
use crate::penalty::{criticality, e_gamma, penalty_gradient, ReplicatedParams};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Schedule {
    Constant(f64),
    /// `dt_j = η0 / √(j+1)`
    InvSqrt(f64),
}

impl Schedule {
    pub fn step(&self, j: usize) -> f64 {
        match *self {
            Schedule::Constant(eta) => eta,
            Schedule::InvSqrt(eta0) => eta0 / ((j + 1) as f64).sqrt(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DescentConfig {
    pub schedule: Schedule,
    pub max_iters: usize,
    pub eps_crit: f64,
    pub tau: f64,
    /// Iterations between criticality checks.
    pub check_every: usize,
    pub max_zeros: usize,
    /// Keep every `thin`-th iterate (0 keeps none).
    pub thin: usize,
    /// Project onto nearby kinks at each check and stop if the projection is critical.
    pub snap: bool,
    pub divergence: f64,
}

impl Default for DescentConfig {
    fn default() -> Self {
        Self {
            schedule: Schedule::InvSqrt(0.1),
            max_iters: 10_000,
            eps_crit: 1e-6,
            tau: DEFAULT_TAU,
            check_every: 100,
            max_zeros: DEFAULT_MAX_ZEROS,
            thin: 100,
            snap: true,
            divergence: 1e6,
        }
    }
}

/// What is minimized. Binary or multiclass hinge follows the dataset's targets.
#[derive(Clone, Debug, PartialEq)]
pub enum Objective {
    Hinge(Dataset<f64>),
    Penalty(Dataset<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Point {
    Network(Params<f64>),
    Replicated(ReplicatedParams),
}

impl Point {
    pub fn to_flat(&self) -> Vec<f64> {
        match self {
            Point::Network(p) => p.to_flat(),
            Point::Replicated(r) => r.to_flat(),
        }
    }

    fn with_flat(&self, x: &[f64]) -> Point {
        let mut p = self.clone();
        match &mut p {
            Point::Network(n) => n.set_flat(x),
            Point::Replicated(r) => r.set_flat(x),
        }
        p
    }
}

/// Architecture used to draw random initial points.
#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    Network(NetworkShape),
    /// `classes` single-output replicas of `shape`.
    Replicated {
        shape: NetworkShape,
        classes: usize,
        gamma: f64,
    },
}

impl Model {
    pub fn num_params(&self) -> usize {
        match self {
            Model::Network(s) => s.num_params(),
            Model::Replicated { shape, classes, .. } => shape.num_params() * classes,
        }
    }

    pub fn point(&self, flat: &[f64]) -> Result<Point> {
        match self {
            Model::Network(s) => Ok(Point::Network(Params::from_flat(s, flat)?)),
            Model::Replicated { shape, classes, gamma } => {
                if flat.len() != shape.num_params() * classes {
                    return Err(Error::Shape("wrong number of replicated parameters".into()));
                }
                let reps = flat
                    .chunks(shape.num_params())
                    .map(|c| Params::from_flat(shape, c))
                    .collect::<Result<_>>()?;
                Ok(Point::Replicated(ReplicatedParams::new(reps, *gamma)?))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub seed: u64,
    /// `(iteration, flat parameters)` for the kept iterates.
    pub iterates: Vec<(usize, Vec<f64>)>,
    /// Loss at every visited iterate, including the final point.
    pub losses: Vec<f64>,
    pub steps: Vec<f64>,
    /// Step counts per cell hash (zeros resolved to `+1`).
    pub occupancy: BTreeMap<u64, usize>,
    pub final_point: Point,
    pub final_loss: f64,
    /// Certificate at the final point, when the incidence enumeration succeeded.
    pub certificate: Option<CriticalityCertificate>,
    pub stopped_early: bool,
    /// The final point was obtained by projecting onto nearby kinks.
    pub snapped: bool,
    pub iterations: usize,
}

impl Trajectory {
    pub fn occupancy_fractions(&self) -> BTreeMap<u64, f64> {
        let total: usize = self.occupancy.values().sum();
        self.occupancy
            .iter()
            .map(|(&k, &v)| (k, v as f64 / total.max(1) as f64))
            .collect()
    }

    pub fn is_critical(&self) -> bool {
        self.certificate.as_ref().is_some_and(|c| c.is_critical())
    }

    /// FNV-1a over losses, steps, occupancy and the final point bits.
    pub fn digest(&self) -> u64 {
        let mut bytes = Vec::new();
        for v in self.losses.iter().chain(&self.steps).chain(&self.final_point.to_flat()) {
            bytes.extend_from_slice(&v.to_bits().to_le_bytes());
        }
        for (k, v) in &self.occupancy {
            bytes.extend_from_slice(&k.to_le_bytes());
            bytes.extend_from_slice(&(*v as u64).to_le_bytes());
        }
        bytes.push(u8::from(self.stopped_early));
        bytes.push(u8::from(self.snapped));
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in bytes {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h
    }
}

/// Uniform view of the objectives over flat parameter vectors.
struct Problem<'a> {
    template: Point,
    data: &'a Dataset<f64>,
    views: Vec<Dataset<f64>>,
    tau: f64,
}

impl<'a> Problem<'a> {
    fn new(objective: &'a Objective, init: &Point, tau: f64) -> Result<Self> {
        let (data, views) = match (objective, init) {
            (Objective::Hinge(d), Point::Network(p)) => {
                p.validate()?;
                total_loss(p, d)?;
                (d, Vec::new())
            }
            (Objective::Penalty(d), Point::Replicated(r)) => {
                e_gamma(r, d)?;
                (d, (0..r.num_classes()).map(|c| d.binary_view(c)).collect())
            }
            _ => {
                return Err(Error::InvalidInput(
                    "hinge objectives take network parameters, the penalty takes replicas".into(),
                ))
            }
        };
        Ok(Self {
            template: init.clone(),
            data,
            views,
            tau,
        })
    }

    /// `(params, data, offset)` for every network block of the flat vector.
    fn blocks<'b>(&'b self, point: &'b Point) -> Vec<(&'b Params<f64>, &'b Dataset<f64>, usize)> {
        match point {
            Point::Network(p) => vec![(p, self.data, 0)],
            Point::Replicated(r) => {
                let n = r.replica_len();
                r.replicas
                    .iter()
                    .zip(&self.views)
                    .enumerate()
                    .map(|(i, (p, v))| (p, v, i * n))
                    .collect()
            }
        }
    }

    fn loss(&self, point: &Point) -> Result<f64> {
        match point {
            Point::Network(p) => total_loss(p, self.data),
            Point::Replicated(r) => e_gamma(r, self.data),
        }
    }

    /// Step direction (zeros resolved to `+1`) and the hash of the selected cell.
    fn step_gradient(&self, point: &Point) -> Result<(Vec<f64>, u64)> {
        let n_total = point.to_flat().len();
        let mut grad = vec![0.0; n_total];
        let mut pattern = Vec::new();
        for (p, d, off) in self.blocks(point) {
            let signs = signature(p, d, self.tau)?.resolved(1);
            let frozen = frozen_from_signs(&signs, &p.shape)?;
            let g = cell_gradient(p, &frozen, d)?;
            grad[off..off + g.len()].copy_from_slice(&g);
            pattern.extend(signs);
        }
        if let Point::Replicated(r) = point {
            for (a, b) in grad.iter_mut().zip(penalty_gradient(r)?) {
                *a += r.gamma * b;
            }
        }
        Ok((grad, cell_hash(&pattern)))
    }

    fn certify(&self, point: &Point, eps_crit: f64, max_zeros: usize) -> Result<CriticalityCertificate> {
        let opts = CriticalityOptions {
            tau: self.tau,
            max_zeros,
            eps_crit: Some(eps_crit),
        };
        match point {
            Point::Network(p) => is_critical(p, self.data, &opts).map(|r| r.1),
            Point::Replicated(r) => criticality(r, self.data, &opts).map(|r| r.1),
        }
    }

    /// Values and gradients of all signature entries.
    fn entries(&self, point: &Point) -> Result<Vec<(f64, Vec<f64>)>> {
        let n_total = point.to_flat().len();
        let mut out = Vec::new();
        for (p, d, off) in self.blocks(point) {
            let sig = signature(p, d, self.tau)?;
            let vals = signature_values(p, d)?;
            let frozen = frozen_from_signs(&sig.resolved(1), &p.shape)?;
            for (j, &a) in vals.iter().enumerate() {
                let g = entry_gradient(p, &frozen, d, sig.coord(j));
                let mut full = vec![0.0; n_total];
                full[off..off + g.len()].copy_from_slice(&g);
                out.push((a, full));
            }
        }
        Ok(out)
    }

    /// Gauss-Newton projection onto `{a_j = 0 : j ∈ set}`.
    fn project(&self, x: &[f64], set: &[usize]) -> Result<Option<Vec<f64>>> {
        let scale = 1.0 + norm(x);
        let mut y = x.to_vec();
        for _ in 0..50 {
            let e = self.entries(&self.template.with_flat(&y))?;
            let a: Vec<f64> = set.iter().map(|&j| e[j].0).collect();
            if a.iter().all(|v| v.abs() <= 1e-13) {
                return Ok(Some(y));
            }
            let rows: Vec<&Vec<f64>> = set.iter().map(|&j| &e[j].1).collect();
            let k = rows.len();
            let mut gram = Matrix::zeros(k, k);
            for p in 0..k {
                for q in 0..=p {
                    let v = dot(rows[p], rows[q]);
                    gram[(p, q)] = v;
                    gram[(q, p)] = v;
                }
            }
            let Some(c) = solve_spd(&gram, &a) else {
                return Ok(None);
            };
            let mut delta = vec![0.0; y.len()];
            for (ci, r) in c.iter().zip(&rows) {
                for (d, &g) in delta.iter_mut().zip(r.iter()) {
                    *d -= ci * g;
                }
            }
            if !(norm(&delta) <= 0.1 * scale) {
                return Ok(None);
            }
            for (yi, d) in y.iter_mut().zip(&delta) {
                *yi += d;
            }
        }
        Ok(None)
    }

    /// Looks for a critical point obtained by zeroing the nearest signature entries.
    fn snap(&self, x: &[f64], ceiling: f64, cfg: &DescentConfig) -> Result<Option<(Vec<f64>, CriticalityCertificate)>> {
        let point = self.template.with_flat(x);
        let entries = self.entries(&point)?;
        let scale = 1.0 + norm(x);
        let mut cands: Vec<(f64, usize)> = entries
            .iter()
            .enumerate()
            .filter_map(|(j, (a, g))| {
                let gn = norm(g);
                (gn > 1e-12 && a.abs() / gn <= 0.05 * scale).then_some((a.abs() / gn, j))
            })
            .collect();
        cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        cands.truncate(8);
        for k in 1..=cands.len() {
            let set: Vec<usize> = cands[..k].iter().map(|c| c.1).collect();
            let Some(y) = self.project(x, &set)? else {
                continue;
            };
            let q = self.template.with_flat(&y);
            let after = self.entries(&q)?;
            let kept = entries.iter().zip(&after).enumerate().all(|(j, (b, a))| {
                set.contains(&j) || (b.0.abs() <= self.tau) || (a.0 * b.0 > 0.0 && a.0.abs() > self.tau)
            });
            if !kept || self.loss(&q)? > ceiling {
                continue;
            }
            match self.certify(&q, cfg.eps_crit, cfg.max_zeros) {
                Ok(cert) if cert.is_critical() => return Ok(Some((y, cert))),
                Ok(_) | Err(Error::TooManyZeros { .. }) | Err(Error::TooManyCells { .. }) => {}
                Err(Error::NonConvergence { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        Ok(None)
    }
}

fn recoverable(e: &Error) -> bool {
    matches!(
        e,
        Error::TooManyZeros { .. } | Error::TooManyCells { .. } | Error::NonConvergence { .. }
    )
}

/// Full-batch subgradient descent `ω ← ω − dt_j g_j`.
///
/// At boundary iterates the step uses the cell obtained by resolving zero
/// signature entries to `+1`. Criticality is checked every `check_every` steps.
pub fn subgradient_descent(objective: &Objective, init: &Point, cfg: &DescentConfig, seed: u64) -> Result<Trajectory> {
    let prob = Problem::new(objective, init, cfg.tau)?;
    let mut x = init.to_flat();
    let mut losses = Vec::new();
    let mut steps = Vec::new();
    let mut iterates = Vec::new();
    let mut occupancy = BTreeMap::new();
    let mut certificate = None;
    let mut stopped_early = false;
    let mut snapped = false;
    let mut recent_best = f64::INFINITY;
    let mut iterations = 0;
    for j in 0..=cfg.max_iters {
        let point = prob.template.with_flat(&x);
        let loss = prob.loss(&point)?;
        if !loss.is_finite() || loss > cfg.divergence {
            return Err(Error::Diverged { iteration: j, loss });
        }
        losses.push(loss);
        recent_best = recent_best.min(loss);
        if cfg.thin > 0 && j % cfg.thin == 0 {
            iterates.push((j, x.clone()));
        }
        if cfg.check_every > 0 && j % cfg.check_every == 0 {
            match prob.certify(&point, cfg.eps_crit, cfg.max_zeros) {
                Ok(cert) if cert.is_critical() => {
                    certificate = Some(cert);
                    stopped_early = true;
                    break;
                }
                Ok(_) => {}
                Err(e) if recoverable(&e) => {}
                Err(e) => return Err(e),
            }
            if cfg.snap && j > 0 {
                let ceiling = recent_best + 1e-6 * (1.0 + recent_best.abs());
                if let Some((y, cert)) = prob.snap(&x, ceiling, cfg)? {
                    x = y;
                    let l = prob.loss(&prob.template.with_flat(&x))?;
                    losses.push(l);
                    certificate = Some(cert);
                    stopped_early = true;
                    snapped = true;
                    break;
                }
            }
            recent_best = loss;
        }
        if j == cfg.max_iters {
            break;
        }
        let (g, hash) = prob.step_gradient(&point)?;
        *occupancy.entry(hash).or_insert(0) += 1;
        let dt = cfg.schedule.step(j);
        steps.push(dt);
        for (xi, gi) in x.iter_mut().zip(&g) {
            *xi -= dt * gi;
        }
        iterations = j + 1;
    }
    let final_point = prob.template.with_flat(&x);
    if certificate.is_none() {
        certificate = match prob.certify(&final_point, cfg.eps_crit, cfg.max_zeros) {
            Ok(c) => Some(c),
            Err(e) if recoverable(&e) => None,
            Err(e) => return Err(e),
        };
    }
    if cfg.thin > 0 && iterates.last().map(|l| l.0) != Some(iterations) {
        iterates.push((iterations, x.clone()));
    }
    let final_loss = *losses.last().unwrap();
    Ok(Trajectory {
        seed,
        iterates,
        losses,
        steps,
        occupancy,
        final_point,
        final_loss,
        certificate,
        stopped_early,
        snapped,
        iterations,
    })
}

/// SplitMix64 finalizer applied to `seed + counter`.
pub fn derive_seed(seed: u64, counter: u64) -> u64 {
    let mut z = seed.wrapping_add(counter.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Initial point with entries uniform in `[−init_scale, init_scale]`.
pub fn random_init(model: &Model, init_scale: f64, seed: u64) -> Result<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let flat: Vec<f64> = (0..model.num_params())
        .map(|_| rng.random_range(-init_scale..=init_scale))
        .collect();
    model.point(&flat)
}

/// Independent runs from random initializations, sorted by final loss.
pub fn multi_start(
    objective: &Objective,
    model: &Model,
    n_starts: usize,
    init_scale: f64,
    seed: u64,
    cfg: &DescentConfig,
) -> Result<Vec<Trajectory>> {
    if n_starts == 0 {
        return Err(Error::InvalidInput("need at least one start".into()));
    }
    let mut runs: Vec<(usize, Trajectory)> = (0..n_starts)
        .into_par_iter()
        .map(|i| {
            let s = derive_seed(seed, i as u64);
            let init = random_init(model, init_scale, s)?;
            subgradient_descent(objective, &init, cfg, s).map(|t| (i, t))
        })
        .collect::<Result<_>>()?;
    runs.sort_by(|a, b| a.1.final_loss.total_cmp(&b.1.final_loss).then(a.0.cmp(&b.0)));
    Ok(runs.into_iter().map(|r| r.1).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Targets;

    fn pair() -> Dataset<f64> {
        Dataset::uniform(vec![vec![1.0], vec![-1.0]], Targets::Binary(vec![1, -1])).unwrap()
    }

    #[test]
    fn schedules() {
        assert_eq!(Schedule::Constant(0.3).step(7), 0.3);
        assert_eq!(Schedule::InvSqrt(0.5).step(3), 0.25);
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_eq!(derive_seed(9, 4), derive_seed(9, 4));
    }

    #[test]
    fn rejects_mismatched_point() {
        let shape = NetworkShape::new(vec![1, 1, 1], 0.25).unwrap();
        let reps = ReplicatedParams::new(vec![Params::zeros(&shape); 2], 1.0).unwrap();
        let err = subgradient_descent(&Objective::Hinge(pair()), &Point::Replicated(reps), &DescentConfig::default(), 0);
        assert!(err.is_err());
    }

    #[test]
    fn divergence_guard() {
        let shape = NetworkShape::new(vec![1, 1, 1], 0.25).unwrap();
        let init = random_init(&Model::Network(shape), 1.0, 3).unwrap();
        let cfg = DescentConfig {
            schedule: Schedule::Constant(1e4),
            divergence: 10.0,
            max_iters: 100,
            ..DescentConfig::default()
        };
        assert!(matches!(
            subgradient_descent(&Objective::Hinge(pair()), &init, &cfg, 0),
            Err(Error::Diverged { .. })
        ));
    }
}
