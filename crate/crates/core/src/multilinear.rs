//! Loss restricted to a cell: frozen activations, exact gradients, the explicit
//! one-hidden-layer decomposition and flatness tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::cells::{cell_of, CellId, CellLocation, EntryCoord};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{dot, norm, Matrix};
use crate::network::{NetworkShape, Params};
use crate::scalar::Scalar;

/// Activation slopes and error indicators that fix the linear structure of a cell.
///
/// `lambda[i][l][k]` is the slope of hidden neuron `k` of layer `l + 1` at point `i`;
/// `eps[i][r]` is the hinge indicator of output `r` (a single entry in binary mode).
#[derive(Clone, Debug, PartialEq)]
pub struct FrozenActivation<T> {
    pub lambda: Vec<Vec<Vec<T>>>,
    pub eps: Vec<Vec<T>>,
}

impl<T: Scalar> FrozenActivation<T> {
    pub fn num_points(&self) -> usize {
        self.eps.len()
    }

    pub fn all_inactive(&self) -> bool {
        self.eps.iter().flatten().all(|&e| e == T::zero())
    }
}

/// Builds frozen activations from a ±1 pattern laid out like a [`crate::cells::Signature`].
pub fn frozen_from_signs<T: Scalar>(signs: &[i8], shape: &NetworkShape) -> Result<FrozenActivation<T>> {
    let per_point = shape.total_neurons();
    if per_point == 0 || !signs.len().is_multiple_of(per_point) {
        return Err(Error::Shape(format!(
            "{} sign entries do not split into blocks of {per_point}",
            signs.len()
        )));
    }
    if signs.iter().any(|&s| s != 1 && s != -1) {
        return Err(Error::InvalidInput("frozen activations need a pattern without zeros".into()));
    }
    let alpha = T::lit(shape.alpha);
    let l = shape.depth();
    let mut lambda = Vec::new();
    let mut eps = Vec::new();
    for block in signs.chunks(per_point) {
        let mut off = 0;
        let mut layers = Vec::with_capacity(l);
        for &d in &shape.dims[1..=l] {
            layers.push(
                block[off..off + d]
                    .iter()
                    .map(|&s| if s > 0 { T::one() } else { alpha })
                    .collect(),
            );
            off += d;
        }
        lambda.push(layers);
        eps.push(
            block[off..]
                .iter()
                .map(|&s| if s > 0 { T::one() } else { T::zero() })
                .collect(),
        );
    }
    Ok(FrozenActivation { lambda, eps })
}

pub fn frozen_from_cell<T: Scalar>(u: &CellId, shape: &NetworkShape) -> Result<FrozenActivation<T>> {
    frozen_from_signs(u.entries(), shape)
}

/// Frozen evaluation of one point: features `λ ⊙ a` and the output.
pub(crate) struct FrozenForward<T> {
    pub features: Vec<Vec<T>>,
    pub output: Vec<T>,
}

pub(crate) fn frozen_forward<T: Scalar>(
    params: &Params<T>,
    lambda: &[Vec<T>],
    x: &[T],
) -> FrozenForward<T> {
    let mut features = vec![x.to_vec()];
    for ((w, b), lam) in params.weights.iter().zip(&params.biases).zip(lambda) {
        let a = w.matvec(features.last().unwrap());
        features.push(
            a.iter()
                .zip(b)
                .zip(lam)
                .map(|((&a, &b), &l)| l * (a + b))
                .collect(),
        );
    }
    let mut output = params.head.matvec(features.last().unwrap());
    if params.shape.output_bias {
        for (o, &c) in output.iter_mut().zip(&params.head_bias) {
            *o = *o + c;
        }
    }
    FrozenForward { features, output }
}

/// Adds the gradient of `⟨seed, a^(layer)⟩` to `grad`, where `a^(L+1) = ŷ`.
pub(crate) fn backprop<T: Scalar>(
    params: &Params<T>,
    lambda: &[Vec<T>],
    features: &[Vec<T>],
    layer: usize,
    seed: Vec<T>,
    grad: &mut [T],
) {
    let slots = params.shape.slots();
    let depth = params.shape.depth();
    let mut g = seed;
    for l in (1..=layer).rev() {
        let s = slots[l - 1];
        let input = &features[l - 1];
        for (r, &gr) in g.iter().enumerate() {
            if gr == T::zero() {
                continue;
            }
            let row = &mut grad[s.weights + r * s.cols..s.weights + (r + 1) * s.cols];
            for (o, &xi) in row.iter_mut().zip(input) {
                *o = *o + gr * xi;
            }
            if let Some(b) = s.bias {
                grad[b + r] = grad[b + r] + gr;
            }
        }
        if l > 1 {
            let w = if l == depth + 1 { &params.head } else { &params.weights[l - 1] };
            g = w
                .tr_matvec(&g)
                .into_iter()
                .zip(&lambda[l - 2])
                .map(|(v, &lam)| v * lam)
                .collect();
        }
    }
}

fn check<T: Scalar>(params: &Params<T>, frozen: &FrozenActivation<T>, data: &Dataset<T>) -> Result<()> {
    let s = &params.shape;
    if s.input_dim() != data.dim() || s.output_dim() != data.num_outputs() {
        return Err(Error::Shape("network does not match the dataset".into()));
    }
    if frozen.num_points() != data.len() || frozen.lambda.len() != data.len() {
        return Err(Error::Shape("frozen activations do not match the dataset".into()));
    }
    let ok = frozen.eps.iter().all(|e| e.len() == s.output_dim())
        && frozen.lambda.iter().all(|p| {
            p.len() == s.depth() && p.iter().zip(&s.dims[1..]).all(|(v, &d)| v.len() == d)
        });
    if !ok {
        return Err(Error::Shape("frozen activations do not match the network".into()));
    }
    Ok(())
}

/// Loss of point `i` under the frozen pattern, together with the output seed of its gradient.
fn point_terms<T: Scalar>(out: &[T], eps: &[T], data: &Dataset<T>, i: usize) -> (T, Vec<T>) {
    let mu = data.weight(i);
    match data.label(i) {
        Some(y) => {
            let y = T::lit(f64::from(y));
            let e = eps[0];
            (mu * e * (T::one() - y * out[0]), vec![-mu * e * y])
        }
        None => {
            let r0 = data.class_index(i);
            let mut loss = -T::one();
            let mut seed = vec![T::zero(); out.len()];
            for (r, &e) in eps.iter().enumerate() {
                if r == r0 {
                    loss = loss + e;
                } else {
                    loss = loss + e * (T::one() + out[r] - out[r0]);
                    seed[r] = seed[r] + mu * e;
                    seed[r0] = seed[r0] - mu * e;
                }
            }
            (mu * loss, seed)
        }
    }
}

/// Loss with every nonlinearity replaced by its frozen diagonal coefficient.
pub fn cell_loss<T: Scalar>(params: &Params<T>, frozen: &FrozenActivation<T>, data: &Dataset<T>) -> Result<T> {
    check(params, frozen, data)?;
    Ok((0..data.len())
        .map(|i| {
            let f = frozen_forward(params, &frozen.lambda[i], data.point(i));
            point_terms(&f.output, &frozen.eps[i], data, i).0
        })
        .sum())
}

/// Exact gradient of [`cell_loss`] in the flat parameter layout.
pub fn cell_gradient<T: Scalar>(
    params: &Params<T>,
    frozen: &FrozenActivation<T>,
    data: &Dataset<T>,
) -> Result<Vec<T>> {
    check(params, frozen, data)?;
    let mut grad = vec![T::zero(); params.shape.num_params()];
    let out_layer = params.shape.depth() + 1;
    for i in 0..data.len() {
        let f = frozen_forward(params, &frozen.lambda[i], data.point(i));
        let (_, seed) = point_terms(&f.output, &frozen.eps[i], data, i);
        if seed.iter().all(|&s| s == T::zero()) {
            continue;
        }
        backprop(params, &frozen.lambda[i], &f.features, out_layer, seed, &mut grad);
    }
    Ok(grad)
}

/// Gradient of one signature entry (pre-activation or hinge argument) under `frozen`.
pub fn entry_gradient<T: Scalar>(
    params: &Params<T>,
    frozen: &FrozenActivation<T>,
    data: &Dataset<T>,
    coord: EntryCoord,
) -> Vec<T> {
    let i = coord.point;
    let lambda = &frozen.lambda[i];
    let f = frozen_forward(params, lambda, data.point(i));
    let mut grad = vec![T::zero(); params.shape.num_params()];
    let out_layer = params.shape.depth() + 1;
    let width = params.shape.dims[coord.layer];
    let mut seed = vec![T::zero(); width];
    if coord.layer < out_layer {
        seed[coord.neuron] = T::one();
    } else {
        match data.label(i) {
            Some(y) => seed[0] = -T::lit(f64::from(y)),
            None => {
                let r0 = data.class_index(i);
                if coord.neuron == r0 {
                    return grad;
                }
                seed[coord.neuron] = T::one();
                seed[r0] = -T::one();
            }
        }
    }
    backprop(params, lambda, &f.features, coord.layer, seed, &mut grad);
    grad
}

/// Coefficients of the one-hidden-layer binary decomposition
/// `L = δ − Σ_k v_k(⟨a_k, w_k⟩ + α_k b_k) − γ c` on a cell.
#[derive(Clone, Debug, PartialEq)]
pub struct DecompositionL1 {
    pub a: Vec<Vec<f64>>,
    pub alpha: Vec<f64>,
    pub gamma: f64,
    pub delta: f64,
    pub has_output_bias: bool,
}

impl DecompositionL1 {
    pub fn evaluate(&self, params: &Params<f64>) -> f64 {
        let mut loss = self.delta;
        for (k, (a, al)) in self.a.iter().zip(&self.alpha).enumerate() {
            let v = params.head[(0, k)];
            loss -= v * (dot(a, params.weights[0].row(k)) + al * params.biases[0][k]);
        }
        if self.has_output_bias {
            loss -= self.gamma * params.head_bias[0];
        }
        loss
    }
}

pub fn decomposition_l1(
    data: &Dataset<f64>,
    frozen: &FrozenActivation<f64>,
    shape: &NetworkShape,
) -> Result<DecompositionL1> {
    if shape.depth() != 1 || !data.is_binary() {
        return Err(Error::Unsupported(
            "explicit decomposition needs one hidden layer and binary labels".into(),
        ));
    }
    if frozen.num_points() != data.len() {
        return Err(Error::Shape("frozen activations do not match the dataset".into()));
    }
    let k_n = shape.dims[1];
    let d = data.dim();
    let mut out = DecompositionL1 {
        a: vec![vec![0.0; d]; k_n],
        alpha: vec![0.0; k_n],
        gamma: 0.0,
        delta: 0.0,
        has_output_bias: shape.output_bias,
    };
    for i in 0..data.len() {
        let mu = data.weight(i);
        let y = f64::from(data.label(i).unwrap());
        let e = frozen.eps[i][0];
        if e == 0.0 {
            continue;
        }
        out.delta += mu * e;
        out.gamma += mu * y * e;
        for k in 0..k_n {
            let s = mu * y * e * frozen.lambda[i][0][k];
            out.alpha[k] += s;
            for (a, &x) in out.a[k].iter_mut().zip(data.point(i)) {
                *a += s * x;
            }
        }
    }
    Ok(out)
}

/// Hessian of [`cell_loss`] by central differences of the exact gradient, symmetrized.
pub fn hessian(params: &Params<f64>, frozen: &FrozenActivation<f64>, data: &Dataset<f64>) -> Result<Matrix<f64>> {
    const H: f64 = 1e-5;
    let n = params.shape.num_params();
    let base = params.to_flat();
    let mut h = Matrix::zeros(n, n);
    let mut p = params.clone();
    for j in 0..n {
        let mut x = base.clone();
        x[j] = base[j] + H;
        p.set_flat(&x);
        let gp = cell_gradient(&p, frozen, data)?;
        x[j] = base[j] - H;
        p.set_flat(&x);
        let gm = cell_gradient(&p, frozen, data)?;
        for i in 0..n {
            h[(i, j)] = (gp[i] - gm[i]) / (2.0 * H);
        }
    }
    for i in 0..n {
        for j in 0..i {
            let s = 0.5 * (h[(i, j)] + h[(j, i)]);
            h[(i, j)] = s;
            h[(j, i)] = s;
        }
    }
    Ok(h)
}

/// Exact flatness test on the explicit coefficients.
pub fn flat_cell_test_l1(coeffs: &DecompositionL1, tol: f64) -> bool {
    coeffs.a.iter().all(|a| norm(a) <= tol)
        && coeffs.alpha.iter().all(|a| a.abs() <= tol)
        && (!coeffs.has_output_bias || coeffs.gamma.abs() <= tol)
}

/// Sampled flatness test for any depth.
///
/// Draws `m` points of cell `u` by rejection sampling in balls around `member`,
/// halving the radius after each failed batch, and checks that the cell gradient
/// vanishes and the cell loss is constant at all of them.
pub fn flat_cell_test_sampled(
    u: &CellId,
    member: &Params<f64>,
    data: &Dataset<f64>,
    m: usize,
    tau: f64,
    seed: u64,
) -> Result<bool> {
    const TOL: f64 = 1e-9;
    let frozen = frozen_from_cell(u, &member.shape)?;
    let base = member.to_flat();
    let n = base.len();
    let mut radius = 0.1 * (1.0 + norm(&base));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_attempts = 100 * m.max(1);
    let batch = m.max(8);
    let mut attempts = 0;
    let mut found = 0;
    let mut losses = Vec::with_capacity(m);
    let mut p = member.clone();
    while found < m {
        let mut hits = 0;
        for _ in 0..batch {
            if attempts >= max_attempts || found >= m {
                break;
            }
            attempts += 1;
            let dir: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            let scale = radius * rng.random::<f64>().powf(1.0 / n as f64) / norm(&dir).max(1e-300);
            let x: Vec<f64> = base.iter().zip(&dir).map(|(b, d)| b + scale * d).collect();
            p.set_flat(&x);
            match cell_of(&p, data, tau)? {
                CellLocation::Cell(id) if id == *u => {}
                _ => continue,
            }
            hits += 1;
            found += 1;
            let g = cell_gradient(&p, &frozen, data)?;
            if norm(&g) > TOL {
                return Ok(false);
            }
            losses.push(cell_loss(&p, &frozen, data)?);
        }
        if found >= m {
            break;
        }
        if attempts >= max_attempts {
            return Err(Error::SamplingFailed {
                found,
                wanted: m,
                attempts,
            });
        }
        if hits == 0 {
            radius *= 0.5;
        }
    }
    let lo = losses.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = losses.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(hi - lo <= TOL)
}

/// Checks the three equality families satisfied by every flat cell:
/// `x`-weighted with `λ`, scalar with `λ`, and scalar without `λ`, for all classes `r`.
///
/// `eps[i][r]` are the error indicators (own-class entries are ignored) and
/// `lambdas[i]` the per-point powers of the leak slope. Binary data are read as
/// two classes.
pub fn weirdcond_check(data: &Dataset<f64>, eps: &[Vec<u8>], lambdas: &[f64]) -> bool {
    const TOL: f64 = 1e-10;
    let r_n = data.num_classes();
    let n = data.len();
    if eps.len() != n || lambdas.len() != n || eps.iter().any(|e| e.len() != r_n) {
        return false;
    }
    let total: Vec<f64> = (0..n)
        .map(|i| {
            let own = data.class_index(i);
            (0..r_n).filter(|&r| r != own).map(|r| f64::from(eps[i][r])).sum()
        })
        .collect();
    let d = data.dim();
    for r in 0..r_n {
        let mut vx = vec![0.0; d];
        let (mut s_lam, mut s_plain) = (0.0, 0.0);
        for i in 0..n {
            let mu = data.weight(i);
            let coef = if data.class_index(i) == r { total[i] } else { -f64::from(eps[i][r]) };
            s_plain += coef * mu;
            s_lam += coef * lambdas[i] * mu;
            for (v, &x) in vx.iter_mut().zip(data.point(i)) {
                *v += coef * lambdas[i] * mu * x;
            }
        }
        if s_plain.abs() > TOL || s_lam.abs() > TOL || vx.iter().any(|v| v.abs() > TOL) {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Targets;

    fn toy() -> (Params<f64>, Dataset<f64>) {
        let shape = NetworkShape::new(vec![2, 3, 1], 0.25).unwrap();
        let flat: Vec<f64> = (0..shape.num_params()).map(|i| ((i * 7 % 11) as f64 - 5.0) / 4.0).collect();
        let p = Params::from_flat(&shape, &flat).unwrap();
        let d = Dataset::uniform(
            vec![vec![0.2, -0.4], vec![1.0, 0.3], vec![-0.7, 0.9]],
            Targets::Binary(vec![1, -1, 1]),
        )
        .unwrap();
        (p, d)
    }

    #[test]
    fn all_positive_and_all_negative_patterns() {
        let shape = NetworkShape::new(vec![2, 3, 1], 0.0).unwrap();
        let f: FrozenActivation<f64> = frozen_from_signs(&[1; 8], &shape).unwrap();
        assert!(f.lambda.iter().flatten().flatten().all(|&l| l == 1.0));
        assert!(f.eps.iter().flatten().all(|&e| e == 1.0));
        let f: FrozenActivation<f64> = frozen_from_signs(&[-1; 8], &shape).unwrap();
        assert!(f.lambda.iter().flatten().flatten().all(|&l| l == 0.0));
        assert!(f.all_inactive());
        assert!(frozen_from_signs::<f64>(&[0; 4], &shape).is_err());
    }

    #[test]
    fn inactive_pattern_has_zero_loss_and_gradient() {
        let (p, d) = toy();
        let f: FrozenActivation<f64> = frozen_from_signs(&[-1; 12], &p.shape).unwrap();
        assert_eq!(cell_loss(&p, &f, &d).unwrap(), 0.0);
        assert!(cell_gradient(&p, &f, &d).unwrap().iter().all(|&g| g == 0.0));
        assert!(hessian(&p, &f, &d).unwrap().as_slice().iter().all(|&h| h == 0.0));
    }

    #[test]
    fn single_point_decomposition() {
        let d = Dataset::uniform(vec![vec![0.5, -2.0]], Targets::Binary(vec![-1])).unwrap();
        let shape = NetworkShape::new(vec![2, 2, 1], 0.5).unwrap();
        let f: FrozenActivation<f64> = frozen_from_signs(&[1, -1, 1], &shape).unwrap();
        let c = decomposition_l1(&d, &f, &shape).unwrap();
        assert_eq!(c.a[0], vec![-0.5, 2.0]);
        assert_eq!(c.a[1], vec![-0.25, 1.0]);
        assert_eq!(c.alpha, vec![-1.0, -0.5]);
        assert_eq!((c.gamma, c.delta), (-1.0, 1.0));
    }

    #[test]
    fn decomposition_rejects_deep_networks() {
        let (_, d) = toy();
        let shape = NetworkShape::new(vec![2, 2, 2, 1], 0.5).unwrap();
        let f: FrozenActivation<f64> = frozen_from_signs(&[1; 15], &shape).unwrap();
        assert!(matches!(decomposition_l1(&d, &f, &shape), Err(Error::Unsupported(_))));
    }

    #[test]
    fn weirdcond_trivial_and_nontrivial() {
        let t = Targets::Classes { labels: vec![0, 1], num_classes: 2 };
        let d = Dataset::uniform(vec![vec![1.0], vec![1.0]], t).unwrap();
        assert!(weirdcond_check(&d, &[vec![0, 0], vec![0, 0]], &[1.0, 1.0]));
        assert!(weirdcond_check(&d, &[vec![0, 1], vec![1, 0]], &[1.0, 1.0]));
        assert!(!weirdcond_check(&d, &[vec![0, 1], vec![0, 0]], &[1.0, 1.0]));
    }
}
