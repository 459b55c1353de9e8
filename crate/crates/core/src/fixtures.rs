//! Worked example: ten planar points and three local minima of a two-neuron ReLU net.

use crate::data::{Dataset, Targets};
use crate::network::{NetworkShape, Params};

/// Five circles (label `+1`) followed by five triangles (label `−1`), equal weights.
pub fn three_minima_dataset() -> Dataset<f64> {
    let points = vec![
        vec![-0.5, -0.2],
        vec![-0.1, -0.4],
        vec![-0.2, 1.3],
        vec![0.2, 1.4],
        vec![0.0, 1.7],
        vec![1.6, 1.3],
        vec![2.0, 1.5],
        vec![1.9, 1.2],
        vec![1.9, 1.8],
        vec![2.0, -0.3],
    ];
    let labels = vec![1, 1, 1, 1, 1, -1, -1, -1, -1, -1];
    Dataset::uniform(points, Targets::Binary(labels)).expect("valid fixture")
}

/// ReLU, two hidden neurons, no output bias.
pub fn three_minima_shape() -> NetworkShape {
    NetworkShape::new(vec![2, 2, 1], 0.0)
        .expect("valid shape")
        .without_output_bias()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Panel {
    /// Every point solved, loss 0.
    A,
    /// Three points blind to both neurons, loss 3/10.
    B,
    /// Both neurons blind to every point, loss 1.
    C,
}

pub fn three_minima_params(panel: Panel) -> Params<f64> {
    // (w1, b1, v1, w2, b2, v2)
    let (w1, b1, v1, w2, b2, v2) = match panel {
        Panel::A => ([-1.0, 0.0], 0.6, 5.0, [1.0, 0.0], -1.4, -10.0),
        Panel::B => ([-1.5, 1.9], -1.35, 2.0, [1.7, 1.4], -4.31, -10.0),
        Panel::C => ([-1.0, 0.0], -1.0, 1.0, [1.0, 0.0], -3.0, -1.0),
    };
    let flat = [w1[0], w1[1], w2[0], w2[1], b1, b2, v1, v2];
    Params::from_flat(&three_minima_shape(), &flat).expect("valid fixture")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::total_loss;

    #[test]
    fn panel_losses() {
        let d = three_minima_dataset();
        for (p, want) in [(Panel::A, 0.0), (Panel::B, 0.3), (Panel::C, 1.0)] {
            let l = total_loss(&three_minima_params(p), &d).unwrap();
            assert!((l - want).abs() <= 1e-12, "{p:?}: {l}");
        }
    }
}
