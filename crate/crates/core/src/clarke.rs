//! Clarke subdifferential as a hull of adjacent-cell gradients, and criticality.

use crate::cells::{incidence_set, CellId, DEFAULT_MAX_ZEROS, DEFAULT_TAU};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{dot, norm, solve_spd, Matrix};
use crate::multilinear::{cell_gradient, frozen_from_cell};
use crate::network::Params;

/// Gradient of the loss restricted to one adjacent cell.
#[derive(Clone, Debug, PartialEq)]
pub struct Generator {
    pub cell: CellId,
    pub gradient: Vec<f64>,
}

pub fn clarke_generators(
    params: &Params<f64>,
    data: &Dataset<f64>,
    tau: f64,
    max_zeros: usize,
) -> Result<Vec<Generator>> {
    let inc = incidence_set(params, data, tau, max_zeros)?;
    inc.cells
        .into_iter()
        .map(|c| {
            let frozen = frozen_from_cell(&c.id, &params.shape)?;
            let gradient = cell_gradient(params, &frozen, data)?;
            Ok(Generator {
                cell: c.id,
                gradient,
            })
        })
        .collect()
}

/// Result of the minimum-norm-point computation.
#[derive(Clone, Debug, PartialEq)]
pub struct MinNormPoint {
    pub theta: Vec<f64>,
    pub point: Vec<f64>,
    pub norm: f64,
    pub major_cycles: usize,
    /// Norm of the iterate after each major cycle.
    pub norm_history: Vec<f64>,
}

pub const MAX_MAJOR_CYCLES: usize = 10_000;

fn combine(gens: &[Vec<f64>], support: &[usize], weights: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; gens[0].len()];
    for (&s, &w) in support.iter().zip(weights) {
        for (xi, &g) in x.iter_mut().zip(&gens[s]) {
            *xi += w * g;
        }
    }
    x
}

/// Minimizer of `‖Σ β_i g_i‖` over the affine hull of the support.
fn affine_minimizer(gens: &[Vec<f64>], support: &[usize]) -> Option<Vec<f64>> {
    let k = support.len();
    let mut m = Matrix::zeros(k, k);
    for a in 0..k {
        for b in 0..=a {
            let v = 1.0 + dot(&gens[support[a]], &gens[support[b]]);
            m[(a, b)] = v;
            m[(b, a)] = v;
        }
    }
    let beta = solve_spd(&m, &vec![1.0; k])?;
    let s: f64 = beta.iter().sum();
    if !s.is_finite() || s.abs() < 1e-300 {
        return None;
    }
    Some(beta.into_iter().map(|b| b / s).collect())
}

/// Wolfe's minimum-norm-point algorithm over the convex hull of `generators`.
///
/// Stops when `‖x‖² − min_j ⟨x, g_j⟩ ≤ tol · max(1, max_j ‖g_j‖²)`.
pub fn min_norm_point(generators: &[Vec<f64>], tol: f64) -> Result<MinNormPoint> {
    if generators.is_empty() {
        return Err(Error::InvalidInput("need at least one generator".into()));
    }
    let n_gen = generators.len();
    let scale = generators
        .iter()
        .map(|g| dot(g, g))
        .fold(1.0, f64::max);
    let eps_w = 1e-14;
    let start = (0..n_gen)
        .min_by(|&a, &b| dot(&generators[a], &generators[a]).total_cmp(&dot(&generators[b], &generators[b])))
        .unwrap();
    let mut support = vec![start];
    let mut weights = vec![1.0];
    let mut x = generators[start].clone();
    let mut history = vec![norm(&x)];
    let finish = |support: &[usize], weights: &[f64], x: Vec<f64>, cycles, history| {
        let mut theta = vec![0.0; n_gen];
        for (&s, &w) in support.iter().zip(weights) {
            theta[s] += w;
        }
        MinNormPoint {
            theta,
            norm: norm(&x),
            point: x,
            major_cycles: cycles,
            norm_history: history,
        }
    };
    for cycle in 1..=MAX_MAJOR_CYCLES {
        let xx = dot(&x, &x);
        let (j, xg) = (0..n_gen)
            .map(|j| (j, dot(&x, &generators[j])))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if xx - xg <= tol * scale || support.contains(&j) {
            return Ok(finish(&support, &weights, x, cycle, history));
        }
        support.push(j);
        weights.push(0.0);
        loop {
            let Some(beta) = affine_minimizer(generators, &support) else {
                // Affinely dependent support; drop the newest point and stop.
                support.pop();
                weights.pop();
                return Ok(finish(&support, &weights, x, cycle, history));
            };
            if beta.iter().all(|&b| b > eps_w) {
                weights = beta;
                break;
            }
            let mut step = 1.0f64;
            for (&w, &b) in weights.iter().zip(&beta) {
                if b <= eps_w && w - b > 0.0 {
                    step = step.min(w / (w - b));
                }
            }
            for (w, &b) in weights.iter_mut().zip(&beta) {
                *w = (1.0 - step) * *w + step * b;
            }
            let keep: Vec<bool> = weights.iter().map(|&w| w > eps_w).collect();
            let mut k = 0;
            support.retain(|_| {
                k += 1;
                keep[k - 1]
            });
            let mut k = 0;
            weights.retain(|_| {
                k += 1;
                keep[k - 1]
            });
            let s: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= s);
            if support.len() <= 1 {
                if support.is_empty() {
                    support.push(j);
                    weights.push(1.0);
                }
                break;
            }
        }
        let next = combine(generators, &support, &weights);
        let nn = norm(&next);
        if nn > *history.last().unwrap() * (1.0 + 1e-12) + 1e-300 {
            // Rounding broke monotonicity; keep the better iterate.
            return Ok(finish(&support, &weights, next, cycle, history));
        }
        x = next;
        history.push(nn);
    }
    Err(Error::NonConvergence {
        cycles: MAX_MAJOR_CYCLES,
        best_norm: *history.last().unwrap(),
    })
}

/// Simplex weights over the adjacent-cell gradients and the resulting residual.
#[derive(Clone, Debug, PartialEq)]
pub struct CriticalityCertificate {
    pub cells: Vec<CellId>,
    pub theta: Vec<f64>,
    pub residual: Vec<f64>,
    pub residual_norm: f64,
    pub eps_crit: f64,
    pub gradients: Vec<Vec<f64>>,
}

impl CriticalityCertificate {
    pub fn is_critical(&self) -> bool {
        self.residual_norm <= self.eps_crit
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CriticalityOptions {
    pub tau: f64,
    pub max_zeros: usize,
    /// Absolute threshold; `None` uses `1e-6 · (1 + median generator norm)`.
    pub eps_crit: Option<f64>,
}

impl Default for CriticalityOptions {
    fn default() -> Self {
        Self {
            tau: DEFAULT_TAU,
            max_zeros: DEFAULT_MAX_ZEROS,
            eps_crit: None,
        }
    }
}

impl CriticalityOptions {
    pub fn with_eps(eps_crit: f64) -> Self {
        Self {
            eps_crit: Some(eps_crit),
            ..Self::default()
        }
    }
}

pub fn default_eps_crit(gradients: &[Vec<f64>]) -> f64 {
    let mut norms: Vec<f64> = gradients.iter().map(|g| norm(g)).collect();
    norms.sort_by(f64::total_cmp);
    let median = if norms.is_empty() {
        0.0
    } else if norms.len() % 2 == 1 {
        norms[norms.len() / 2]
    } else {
        0.5 * (norms[norms.len() / 2 - 1] + norms[norms.len() / 2])
    };
    1e-6 * (1.0 + median)
}

/// Builds a certificate from explicit generators.
pub fn certify(cells: Vec<CellId>, gradients: Vec<Vec<f64>>, eps_crit: Option<f64>) -> Result<CriticalityCertificate> {
    let mnp = min_norm_point(&gradients, 1e-15)?;
    let residual = combine(&gradients, &(0..gradients.len()).collect::<Vec<_>>(), &mnp.theta);
    let eps_crit = eps_crit.unwrap_or_else(|| default_eps_crit(&gradients));
    Ok(CriticalityCertificate {
        cells,
        theta: mnp.theta,
        residual_norm: norm(&residual),
        residual,
        eps_crit,
        gradients,
    })
}

/// Decides Clarke criticality of the network loss at `params`.
pub fn is_critical(
    params: &Params<f64>,
    data: &Dataset<f64>,
    opts: &CriticalityOptions,
) -> Result<(bool, CriticalityCertificate)> {
    let gens = clarke_generators(params, data, opts.tau, opts.max_zeros)?;
    let (cells, grads) = gens.into_iter().map(|g| (g.cell, g.gradient)).unzip();
    let cert = certify(cells, grads, opts.eps_crit)?;
    Ok((cert.is_critical(), cert))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn opposite_pair() {
        let r = min_norm_point(&[vec![1.0, 2.0], vec![-1.0, -2.0]], 1e-15).unwrap();
        assert!(r.norm < 1e-15);
        assert!((r.theta[0] - 0.5).abs() < 1e-12 && (r.theta[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn single_generator() {
        let r = min_norm_point(&[vec![3.0, -4.0]], 1e-15).unwrap();
        assert_eq!(r.theta, vec![1.0]);
        assert_eq!(r.norm, 5.0);
    }

    #[test]
    fn segment_projection() {
        // Hull of (1,1) and (1,-1); closest point is (1,0).
        let r = min_norm_point(&[vec![1.0, 1.0], vec![1.0, -1.0]], 1e-15).unwrap();
        assert!((r.norm - 1.0).abs() < 1e-12);
        assert!(r.norm_history.windows(2).all(|w| w[1] <= w[0] + 1e-15));
    }

    #[test]
    fn duplicate_generators() {
        let g = vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![-1.0, 0.0]];
        let r = min_norm_point(&g, 1e-15).unwrap();
        assert!(r.norm < 1e-12);
        assert!((r.theta.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
