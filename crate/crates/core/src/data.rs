//! Weighted labelled datasets.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Labels of a dataset: binary `±1` or one-hot classes (stored as 0-based indices).
#[derive(Clone, Debug, PartialEq)]
pub enum Targets {
    Binary(Vec<i8>),
    Classes { labels: Vec<usize>, num_classes: usize },
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Binary(y) => y.len(),
            Targets::Classes { labels, .. } => labels.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T> {
    points: Vec<Vec<T>>,
    targets: Targets,
    weights: Vec<T>,
}

const WEIGHT_SUM_TOL: f64 = 1e-12;

impl<T: Scalar> Dataset<T> {
    /// Validates shapes, positivity of the weights and `Σ μ = 1`.
    pub fn new(points: Vec<Vec<T>>, targets: Targets, weights: Vec<T>) -> Result<Self> {
        let n = points.len();
        if n == 0 {
            return Err(Error::InvalidInput("dataset has no points".into()));
        }
        let d = points[0].len();
        if d == 0 {
            return Err(Error::InvalidInput("points have dimension 0".into()));
        }
        if let Some(i) = points.iter().position(|p| p.len() != d) {
            return Err(Error::Shape(format!(
                "point {i} has dimension {} but point 0 has {d}",
                points[i].len()
            )));
        }
        if points.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("non-finite coordinate".into()));
        }
        if targets.len() != n || weights.len() != n {
            return Err(Error::Shape(format!(
                "{n} points, {} targets, {} weights",
                targets.len(),
                weights.len()
            )));
        }
        match &targets {
            Targets::Binary(y) => {
                if let Some(i) = y.iter().position(|&v| v != 1 && v != -1) {
                    return Err(Error::InvalidInput(format!(
                        "binary label of point {i} is {}, expected ±1",
                        y[i]
                    )));
                }
            }
            Targets::Classes { labels, num_classes } => {
                if *num_classes < 2 {
                    return Err(Error::InvalidInput("need at least two classes".into()));
                }
                if let Some(i) = labels.iter().position(|&c| c >= *num_classes) {
                    return Err(Error::InvalidInput(format!(
                        "class of point {i} out of range"
                    )));
                }
            }
        }
        if let Some(i) = weights.iter().position(|&w| !(w > T::zero()) || !w.is_finite()) {
            return Err(Error::InvalidInput(format!("weight of point {i} is not positive")));
        }
        let total: T = weights.iter().copied().sum();
        if (total.to_f64_lossy() - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidInput(format!("weights sum to {total}, expected 1")));
        }
        Ok(Self {
            points,
            targets,
            weights,
        })
    }

    /// Equal weights `1/N`.
    pub fn uniform(points: Vec<Vec<T>>, targets: Targets) -> Result<Self> {
        let n = points.len();
        let w = T::one() / T::from_usize(n.max(1)).unwrap();
        Self::new(points, targets, vec![w; n])
    }

    /// Rescales positive weights so that they sum to one.
    pub fn normalized(points: Vec<Vec<T>>, targets: Targets, weights: Vec<T>) -> Result<Self> {
        let total: T = weights.iter().copied().sum();
        if !(total > T::zero()) {
            return Err(Error::InvalidInput("weights must have a positive sum".into()));
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        Self::new(points, targets, weights)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn points(&self) -> &[Vec<T>] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[T] {
        &self.points[i]
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn weight(&self, i: usize) -> T {
        self.weights[i]
    }

    pub fn targets(&self) -> &Targets {
        &self.targets
    }

    pub fn is_binary(&self) -> bool {
        matches!(self.targets, Targets::Binary(_))
    }

    /// Binary label `y^(i)`; `None` in class mode.
    pub fn label(&self, i: usize) -> Option<i8> {
        match &self.targets {
            Targets::Binary(y) => Some(y[i]),
            Targets::Classes { .. } => None,
        }
    }

    /// Class index (0-based); `None` in binary mode.
    pub fn class_of(&self, i: usize) -> Option<usize> {
        match &self.targets {
            Targets::Binary(_) => None,
            Targets::Classes { labels, .. } => Some(labels[i]),
        }
    }

    /// Number of network outputs: 1 in binary mode, `R` otherwise.
    pub fn num_outputs(&self) -> usize {
        match &self.targets {
            Targets::Binary(_) => 1,
            Targets::Classes { num_classes, .. } => *num_classes,
        }
    }

    /// Number of classes, counting binary data as two classes.
    pub fn num_classes(&self) -> usize {
        match &self.targets {
            Targets::Binary(_) => 2,
            Targets::Classes { num_classes, .. } => *num_classes,
        }
    }

    /// Class index with binary data read as two classes (`+1 ↦ 0`, `−1 ↦ 1`).
    pub fn class_index(&self, i: usize) -> usize {
        match &self.targets {
            Targets::Binary(y) => usize::from(y[i] < 0),
            Targets::Classes { labels, .. } => labels[i],
        }
    }

    pub fn one_hot(&self, i: usize) -> Vec<T> {
        let mut y = vec![T::zero(); self.num_classes()];
        y[self.class_index(i)] = T::one();
        y
    }

    /// One-versus-all view of class `r`: label `+1` for members of `r`, `−1` otherwise.
    pub fn binary_view(&self, r: usize) -> Dataset<T> {
        let y = (0..self.len())
            .map(|i| if self.class_index(i) == r { 1 } else { -1 })
            .collect();
        Dataset {
            points: self.points.clone(),
            targets: Targets::Binary(y),
            weights: self.weights.clone(),
        }
    }

    pub fn cast<U: Scalar>(&self) -> Dataset<U> {
        let c = |x: T| U::lit(x.to_f64_lossy());
        Dataset {
            points: self
                .points
                .iter()
                .map(|p| p.iter().map(|&x| c(x)).collect())
                .collect(),
            targets: self.targets.clone(),
            weights: self.weights.iter().map(|&w| c(w)).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unnormalized_weights() {
        let err = Dataset::new(vec![vec![0.0]], Targets::Binary(vec![1]), vec![0.5]).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
        let ok = Dataset::normalized(vec![vec![0.0]], Targets::Binary(vec![1]), vec![0.5]).unwrap();
        assert_eq!(ok.weight(0), 1.0);
    }

    #[test]
    fn rejects_bad_labels() {
        assert!(Dataset::uniform(vec![vec![0.0]], Targets::Binary(vec![0])).is_err());
        let t = Targets::Classes { labels: vec![2], num_classes: 2 };
        assert!(Dataset::uniform(vec![vec![0.0f64]], t).is_err());
    }

    #[test]
    fn binary_view_marks_members() {
        let t = Targets::Classes { labels: vec![0, 1, 1], num_classes: 3 };
        let d = Dataset::uniform(vec![vec![0.0], vec![1.0], vec![2.0]], t).unwrap();
        assert_eq!(d.binary_view(1).targets(), &Targets::Binary(vec![-1, 1, 1]));
        assert_eq!(d.one_hot(0), vec![1.0, 0.0, 0.0]);
    }
}
