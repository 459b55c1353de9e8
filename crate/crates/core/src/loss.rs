//! Hinge criteria and the weighted network loss.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::network::Params;
use crate::scalar::Scalar;

#[inline]
fn relu<T: Scalar>(x: T) -> T {
    x.max(T::zero())
}

/// `σ(1 − y ŷ)`
pub fn hinge_binary<T: Scalar>(y_hat: T, y: i8) -> T {
    relu(T::one() - T::lit(f64::from(y)) * y_hat)
}

/// `Σ_{r≠r0} σ(1 + ŷ_r − ŷ_{r0})` with a 0-based class index.
pub fn hinge_multi<T: Scalar>(y_hat: &[T], r0: usize) -> Result<T> {
    if r0 >= y_hat.len() {
        return Err(Error::InvalidInput(format!(
            "class {r0} out of range for {} outputs",
            y_hat.len()
        )));
    }
    let top = y_hat[r0];
    Ok(y_hat
        .iter()
        .enumerate()
        .filter(|&(r, _)| r != r0)
        .map(|(_, &v)| relu(T::one() + v - top))
        .sum())
}

/// Vector form `−1 + ⟨1, σ((I − 1⊗y) ŷ + 1)⟩` of the multiclass hinge.
pub fn hinge_multi_vector<T: Scalar>(y_hat: &[T], y: &[T]) -> Result<T> {
    if y.len() != y_hat.len() {
        return Err(Error::Shape("target and output lengths differ".into()));
    }
    let yy: T = y.iter().zip(y_hat).map(|(&a, &b)| a * b).sum();
    let s: T = y_hat.iter().map(|&v| relu(v - yy + T::one())).sum();
    Ok(s - T::one())
}

fn check(params: &Params<impl Scalar>, data: &Dataset<impl Scalar>) -> Result<()> {
    if params.shape.input_dim() != data.dim() {
        return Err(Error::Shape(format!(
            "network input {} vs data dimension {}",
            params.shape.input_dim(),
            data.dim()
        )));
    }
    if params.shape.output_dim() != data.num_outputs() {
        return Err(Error::Shape(format!(
            "network has {} outputs, data needs {}",
            params.shape.output_dim(),
            data.num_outputs()
        )));
    }
    Ok(())
}

/// Loss of a single point; binary or multiclass depending on the targets.
pub fn point_loss<T: Scalar>(params: &Params<T>, data: &Dataset<T>, i: usize) -> T {
    let out = params.forward_unchecked(data.point(i)).output;
    match data.label(i) {
        Some(y) => hinge_binary(out[0], y),
        None => hinge_multi(&out, data.class_index(i)).expect("validated class"),
    }
}

/// Per-point losses in dataset order (unweighted).
pub fn point_losses<T: Scalar>(params: &Params<T>, data: &Dataset<T>) -> Result<Vec<T>> {
    check(params, data)?;
    Ok((0..data.len()).map(|i| point_loss(params, data, i)).collect())
}

/// `L(ω) = Σ_i μ^(i) ℓ(ŷ^(i), y^(i))`.
pub fn total_loss<T: Scalar>(params: &Params<T>, data: &Dataset<T>) -> Result<T> {
    check(params, data)?;
    Ok((0..data.len())
        .map(|i| data.weight(i) * point_loss(params, data, i))
        .sum())
}

/// One-versus-all loss of class `r` with weights `μ^(i)`.
pub fn per_class_loss<T: Scalar>(params: &Params<T>, data: &Dataset<T>, r: usize) -> Result<T> {
    check_ova(params, data, r)?;
    let mut total = T::zero();
    for i in 0..data.len() {
        let out = params.forward_unchecked(data.point(i)).output;
        let sign = if data.class_index(i) == r { -T::one() } else { T::one() };
        total = total + data.weight(i) * relu(T::one() + sign * out[r]);
    }
    Ok(total)
}

/// `Σ_r` of [`per_class_loss`].
pub fn ova_loss<T: Scalar>(params: &Params<T>, data: &Dataset<T>) -> Result<T> {
    (0..data.num_classes())
        .map(|r| per_class_loss(params, data, r))
        .sum()
}

fn check_ova(params: &Params<impl Scalar>, data: &Dataset<impl Scalar>, r: usize) -> Result<()> {
    if data.is_binary() {
        return Err(Error::Unsupported("one-versus-all loss needs class targets".into()));
    }
    check(params, data)?;
    if r >= data.num_classes() {
        return Err(Error::InvalidInput(format!("class {r} out of range")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_values() {
        assert_eq!(hinge_binary(0.0, 1), 1.0);
        assert_eq!(hinge_binary(2.0, 1), 0.0);
        assert_eq!(hinge_binary(-0.5, 1), 1.5);
    }

    #[test]
    fn multi_values() {
        assert_eq!(hinge_multi(&[0.0; 4], 2).unwrap(), 3.0);
        assert_eq!(hinge_multi(&[5.0, 0.0, 0.0], 0).unwrap(), 0.0);
        assert!(hinge_multi(&[0.0, 1.0], 2).is_err());
    }

    #[test]
    fn multi_forms_agree() {
        let y_hat = [0.3, -1.2, 0.9];
        for r in 0..3 {
            let mut y = [0.0; 3];
            y[r] = 1.0;
            let a = hinge_multi(&y_hat, r).unwrap();
            let b: f64 = hinge_multi_vector(&y_hat, &y).unwrap();
            assert!((a - b).abs() < 1e-15);
        }
    }
}
