#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use reluscape::cells::{cell_of, CellLocation};
use reluscape::data::Targets;
use reluscape::{Dataset, NetworkShape, Params};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_vec(rng: &mut ChaCha8Rng, n: usize, s: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-s..=s)).collect()
}

/// Random dataset with `outputs == 1` meaning binary labels.
pub fn random_dataset(rng: &mut ChaCha8Rng, n: usize, d: usize, outputs: usize) -> Dataset {
    let points: Vec<Vec<f64>> = (0..n).map(|_| uniform_vec(rng, d, 1.5)).collect();
    let targets = if outputs == 1 {
        Targets::Binary((0..n).map(|_| if rng.random_bool(0.5) { 1 } else { -1 }).collect())
    } else {
        Targets::Classes {
            labels: (0..n).map(|_| rng.random_range(0..outputs)).collect(),
            num_classes: outputs,
        }
    };
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..1.0)).collect();
    Dataset::normalized(points, targets, w).unwrap()
}

pub fn random_shape(rng: &mut ChaCha8Rng, depth: usize, d: usize, outputs: usize, alpha: f64) -> NetworkShape {
    let mut dims = vec![d];
    for _ in 0..depth {
        dims.push(rng.random_range(1..=3));
    }
    dims.push(outputs);
    NetworkShape::new(dims, alpha).unwrap()
}

pub fn random_params(rng: &mut ChaCha8Rng, shape: &NetworkShape, s: f64) -> Params {
    Params::from_flat(shape, &uniform_vec(rng, shape.num_params(), s)).unwrap()
}

/// Random instance with `L ∈ {1,2}`, `d ≤ 4`, `N ≤ 8`, `α ∈ {0, 0.25, 1}`,
/// binary or up-to-3-class targets, at a smooth point.
pub fn smooth_instance(rng: &mut ChaCha8Rng) -> (Params, Dataset) {
    loop {
        let depth = rng.random_range(1..=2);
        let d = rng.random_range(1..=4);
        let n = rng.random_range(1..=8);
        let alpha = [0.0, 0.25, 1.0][rng.random_range(0..3)];
        let outputs = [1, 1, 2, 3][rng.random_range(0..4)];
        let data = random_dataset(rng, n, d, outputs);
        let shape = random_shape(rng, depth, d, outputs, alpha);
        let p = random_params(rng, &shape, 1.5);
        if let CellLocation::Cell(_) = cell_of(&p, &data, 1e-9).unwrap() {
            return (p, data);
        }
    }
}

/// Three planar clusters, each linearly separable from the other two.
pub fn three_clusters(rng: &mut ChaCha8Rng, per_class: usize) -> Dataset {
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for c in 0..3 {
        let a = 2.0 * std::f64::consts::PI * c as f64 / 3.0;
        for _ in 0..per_class {
            points.push(vec![
                2.0 * a.cos() + rng.random_range(-0.3..0.3),
                2.0 * a.sin() + rng.random_range(-0.3..0.3),
            ]);
            labels.push(c);
        }
    }
    Dataset::uniform(points, Targets::Classes { labels, num_classes: 3 }).unwrap()
}

/// Two labelled clouds in the plane that overlap.
pub fn overlapping_binary(rng: &mut ChaCha8Rng, n: usize) -> Dataset {
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for i in 0..n {
        let y: i8 = if i % 2 == 0 { 1 } else { -1 };
        let c = f64::from(y) * 0.5;
        points.push(vec![c + rng.random_range(-1.0..1.0), c + rng.random_range(-1.0..1.0)]);
        labels.push(y);
    }
    Dataset::uniform(points, Targets::Binary(labels)).unwrap()
}

pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}
