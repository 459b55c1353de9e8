//! Fully connected leaky-ReLU networks.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Layer widths `d_0, …, d_{L+1}` and leak slope.
///
/// `output_bias = false` drops the output bias `c` (the simplified model used for
/// several worked examples); everything else treats the network uniformly.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkShape {
    pub dims: Vec<usize>,
    pub alpha: f64,
    pub output_bias: bool,
}

/// Location of one layer's weights and bias inside the flat parameter vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerSlot {
    pub weights: usize,
    pub bias: Option<usize>,
    pub rows: usize,
    pub cols: usize,
}

impl NetworkShape {
    pub fn new(dims: Vec<usize>, alpha: f64) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::Shape("need at least input and output widths".into()));
        }
        if dims.contains(&0) {
            return Err(Error::Shape("all widths must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidInput(format!("leak slope {alpha} outside [0,1]")));
        }
        Ok(Self {
            dims,
            alpha,
            output_bias: true,
        })
    }

    pub fn without_output_bias(mut self) -> Self {
        self.output_bias = false;
        self
    }

    /// Number of hidden layers `L`.
    pub fn depth(&self) -> usize {
        self.dims.len() - 2
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    /// `D = d_1 + … + d_{L+1}`.
    pub fn total_neurons(&self) -> usize {
        self.dims[1..].iter().sum()
    }

    /// Slots for layers `1..=L+1`; the last one holds `V` and `c`.
    pub fn slots(&self) -> Vec<LayerSlot> {
        let mut off = 0;
        let n = self.dims.len() - 1;
        (0..n)
            .map(|l| {
                let (rows, cols) = (self.dims[l + 1], self.dims[l]);
                let weights = off;
                off += rows * cols;
                let bias = if l + 1 < n || self.output_bias {
                    off += rows;
                    Some(off - rows)
                } else {
                    None
                };
                LayerSlot {
                    weights,
                    bias,
                    rows,
                    cols,
                }
            })
            .collect()
    }

    pub fn num_params(&self) -> usize {
        let s = self.slots();
        let last = s.last().unwrap();
        last.bias.map_or(last.weights + last.rows * last.cols, |b| b + last.rows)
    }

    /// Human-readable name of every flat coordinate, e.g. `W1[0,1]`, `b2[0]`, `V[0,3]`, `c[0]`.
    pub fn coordinate_names(&self) -> Vec<String> {
        let l_out = self.depth() + 1;
        let mut names = Vec::with_capacity(self.num_params());
        for (l, s) in self.slots().iter().enumerate() {
            let (w, b) = if l + 1 == l_out {
                ("V".to_string(), "c".to_string())
            } else {
                (format!("W{}", l + 1), format!("b{}", l + 1))
            };
            for r in 0..s.rows {
                for c in 0..s.cols {
                    names.push(format!("{w}[{r},{c}]"));
                }
            }
            if s.bias.is_some() {
                names.extend((0..s.rows).map(|r| format!("{b}[{r}]")));
            }
        }
        names
    }

    pub fn coordinate_index(&self, name: &str) -> Option<usize> {
        self.coordinate_names().iter().position(|n| n == name)
    }
}

/// Network parameters `ω = (W^(1..L), b^(1..L), V, c)`.
///
/// `head_bias` is all zeros and excluded from the flat layout when the shape has
/// no output bias.
#[derive(Clone, Debug, PartialEq)]
pub struct Params<T> {
    pub shape: NetworkShape,
    pub weights: Vec<Matrix<T>>,
    pub biases: Vec<Vec<T>>,
    pub head: Matrix<T>,
    pub head_bias: Vec<T>,
}

/// Intermediate values of a forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct Forward<T> {
    /// `x^(0), …, x^(L)`.
    pub features: Vec<Vec<T>>,
    /// `W^(ℓ) x^(ℓ−1) + b^(ℓ)` for `ℓ = 1..=L`.
    pub preactivations: Vec<Vec<T>>,
    pub output: Vec<T>,
}

#[inline]
pub fn leaky_relu<T: Scalar>(x: T, alpha: T) -> T {
    alpha * x.min(T::zero()) + x.max(T::zero())
}

pub fn leaky_relu_vec<T: Scalar>(x: &[T], alpha: T) -> Vec<T> {
    x.iter().map(|&v| leaky_relu(v, alpha)).collect()
}

impl<T: Scalar> Params<T> {
    pub fn zeros(shape: &NetworkShape) -> Self {
        let l = shape.depth();
        let d = &shape.dims;
        Self {
            shape: shape.clone(),
            weights: (0..l).map(|i| Matrix::zeros(d[i + 1], d[i])).collect(),
            biases: (0..l).map(|i| vec![T::zero(); d[i + 1]]).collect(),
            head: Matrix::zeros(d[l + 1], d[l]),
            head_bias: vec![T::zero(); d[l + 1]],
        }
    }

    /// Checks shapes against `shape` and finiteness of every entry.
    pub fn validate(&self) -> Result<()> {
        let s = &self.shape;
        let l = s.depth();
        let d = &s.dims;
        if self.weights.len() != l || self.biases.len() != l {
            return Err(Error::Shape(format!("expected {l} hidden layers")));
        }
        for i in 0..l {
            let w = &self.weights[i];
            if w.rows() != d[i + 1] || w.cols() != d[i] || self.biases[i].len() != d[i + 1] {
                return Err(Error::Shape(format!("layer {} has the wrong shape", i + 1)));
            }
        }
        if self.head.rows() != d[l + 1] || self.head.cols() != d[l] || self.head_bias.len() != d[l + 1] {
            return Err(Error::Shape("output layer has the wrong shape".into()));
        }
        if self.to_flat().iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("non-finite parameter".into()));
        }
        Ok(())
    }

    pub fn to_flat(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.shape.num_params());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.as_slice());
            out.extend_from_slice(b);
        }
        out.extend_from_slice(self.head.as_slice());
        if self.shape.output_bias {
            out.extend_from_slice(&self.head_bias);
        }
        out
    }

    pub fn from_flat(shape: &NetworkShape, flat: &[T]) -> Result<Self> {
        if flat.len() != shape.num_params() {
            return Err(Error::Shape(format!(
                "{} values for {} parameters",
                flat.len(),
                shape.num_params()
            )));
        }
        let mut p = Self::zeros(shape);
        p.set_flat(flat);
        Ok(p)
    }

    /// Overwrites all parameters from a flat vector of the right length.
    pub fn set_flat(&mut self, flat: &[T]) {
        let l = self.shape.depth();
        for (i, s) in self.shape.slots().into_iter().enumerate() {
            let n = s.rows * s.cols;
            let w = &flat[s.weights..s.weights + n];
            let (mat, bias) = if i < l {
                (&mut self.weights[i], Some(&mut self.biases[i]))
            } else {
                (&mut self.head, s.bias.map(|_| &mut self.head_bias))
            };
            mat.as_mut_slice().copy_from_slice(w);
            if let (Some(b), Some(off)) = (bias, s.bias) {
                b.copy_from_slice(&flat[off..off + s.rows]);
            }
        }
    }

    pub fn forward(&self, x: &[T]) -> Result<Forward<T>> {
        if x.len() != self.shape.input_dim() {
            return Err(Error::Shape(format!(
                "input has dimension {}, network expects {}",
                x.len(),
                self.shape.input_dim()
            )));
        }
        Ok(self.forward_unchecked(x))
    }

    pub(crate) fn forward_unchecked(&self, x: &[T]) -> Forward<T> {
        let alpha = T::lit(self.shape.alpha);
        let mut features = vec![x.to_vec()];
        let mut preactivations = Vec::with_capacity(self.weights.len());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            let mut a = w.matvec(features.last().unwrap());
            for (ai, &bi) in a.iter_mut().zip(b) {
                *ai = *ai + bi;
            }
            features.push(leaky_relu_vec(&a, alpha));
            preactivations.push(a);
        }
        let mut output = self.head.matvec(features.last().unwrap());
        if self.shape.output_bias {
            for (o, &c) in output.iter_mut().zip(&self.head_bias) {
                *o = *o + c;
            }
        }
        Forward {
            features,
            preactivations,
            output,
        }
    }

    /// Network output `ŷ` only.
    pub fn predict(&self, x: &[T]) -> Result<Vec<T>> {
        self.forward(x).map(|f| f.output)
    }

    pub fn cast<U: Scalar>(&self) -> Params<U> {
        let c = |x: T| U::lit(x.to_f64_lossy());
        Params {
            shape: self.shape.clone(),
            weights: self.weights.iter().map(|w| w.map(c)).collect(),
            biases: self.biases.iter().map(|b| b.iter().map(|&x| c(x)).collect()).collect(),
            head: self.head.map(c),
            head_bias: self.head_bias.iter().map(|&x| c(x)).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leaky_relu_branches() {
        assert_eq!(leaky_relu(-2.0, 0.25), -0.5);
        assert_eq!(leaky_relu(3.0, 0.7), 3.0);
        assert_eq!(leaky_relu(0.0, 0.3), 0.0);
    }

    #[test]
    fn hand_evaluated_forward() {
        let shape = NetworkShape::new(vec![1, 1, 1], 0.0).unwrap();
        let p = Params::from_flat(&shape, &[1.0, -1.0, 1.0, 0.0]).unwrap();
        let f = p.forward(&[2.0]).unwrap();
        assert_eq!(f.features[1], vec![1.0]);
        assert_eq!(f.output, vec![1.0]);
    }

    #[test]
    fn no_hidden_layer_is_affine() {
        let shape = NetworkShape::new(vec![2, 1], 0.5).unwrap();
        let p = Params::from_flat(&shape, &[2.0, -1.0, 0.5]).unwrap();
        assert_eq!(p.predict(&[1.0, 3.0]).unwrap(), vec![-0.5]);
    }

    #[test]
    fn flat_round_trip_and_names() {
        let shape = NetworkShape::new(vec![2, 3, 2], 0.1).unwrap();
        let flat: Vec<f64> = (0..shape.num_params()).map(|i| i as f64).collect();
        let p = Params::from_flat(&shape, &flat).unwrap();
        assert_eq!(p.to_flat(), flat);
        let names = shape.coordinate_names();
        assert_eq!(names.len(), shape.num_params());
        assert_eq!(names[1], "W1[0,1]");
        assert_eq!(names[6], "b1[0]");
        assert_eq!(names.last().unwrap(), "c[1]");
        let nb = shape.clone().without_output_bias();
        assert_eq!(nb.num_params(), shape.num_params() - 2);
    }

    #[test]
    fn dimension_mismatch() {
        let shape = NetworkShape::new(vec![2, 1], 0.5).unwrap();
        let p = Params::<f64>::zeros(&shape);
        assert!(matches!(p.forward(&[1.0]), Err(Error::Shape(_))));
    }
}
