mod common;

use proptest::prelude::*;

use common::*;
use reluscape::data::Targets;
use reluscape::loss::{hinge_binary, hinge_multi, hinge_multi_vector, ova_loss, per_class_loss, total_loss};
use reluscape::{leaky_relu, Dataset, NetworkShape, Params, ParamsF32};

proptest! {
    #[test]
    fn multiclass_hinge_forms_agree(y in prop::collection::vec(-3.0f64..3.0, 2..6), r0 in 0usize..6) {
        let r0 = r0 % y.len();
        let mut e = vec![0.0; y.len()];
        e[r0] = 1.0;
        let a = hinge_multi(&y, r0).unwrap();
        let b = hinge_multi_vector(&y, &e).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
    }

    #[test]
    fn leaky_relu_is_piecewise_linear(x in -5.0f64..5.0, alpha in 0.0f64..1.0) {
        let want = if x >= 0.0 { x } else { alpha * x };
        prop_assert_eq!(leaky_relu(x, alpha), want);
    }

    #[test]
    fn binary_hinge_matches_definition(y_hat in -4.0f64..4.0, pos in any::<bool>()) {
        let y: i8 = if pos { 1 } else { -1 };
        prop_assert_eq!(hinge_binary(y_hat, y), (1.0 - f64::from(y) * y_hat).max(0.0));
    }

    #[test]
    fn flat_roundtrip_is_bitwise(seed in any::<u64>()) {
        let mut r = rng(seed);
        let shape = random_shape(&mut r, 2, 3, 2, 0.25);
        let p = random_params(&mut r, &shape, 2.0);
        let q = Params::from_flat(&shape, &p.to_flat()).unwrap();
        prop_assert_eq!(p, q);
    }
}

/// Forward pass written out by hand for a [2, 2, 1] network.
#[test]
fn forward_matches_hand_computation() {
    let shape = NetworkShape::new(vec![2, 2, 1], 0.5).unwrap();
    let p = Params::from_flat(&shape, &[1.0, -2.0, 0.5, 0.5, 0.1, -0.3, 2.0, -1.0, 0.25]).unwrap();
    let x = [0.4, 0.6];
    let z1 = 1.0 * 0.4 - 2.0 * 0.6 + 0.1;
    let z2 = 0.5 * 0.4 + 0.5 * 0.6 - 0.3;
    let h1 = if z1 > 0.0 { z1 } else { 0.5 * z1 };
    let h2 = if z2 > 0.0 { z2 } else { 0.5 * z2 };
    let out = 2.0 * h1 - 1.0 * h2 + 0.25;
    assert!((p.predict(&x).unwrap()[0] - out).abs() < 1e-15);
}

#[test]
fn weighted_loss_sums_point_terms() {
    let shape = NetworkShape::new(vec![1, 1, 1], 1.0).unwrap();
    let p = Params::from_flat(&shape, &[1.0, 0.0, 1.0, 0.0]).unwrap();
    let d = Dataset::new(vec![vec![0.5], vec![2.0]], Targets::Binary(vec![1, -1]), vec![0.25, 0.75]).unwrap();
    let want = 0.25 * (1.0 - 0.5) + 0.75 * (1.0 + 2.0);
    assert!((total_loss(&p, &d).unwrap() - want).abs() < 1e-15);
}

#[test]
fn ova_is_sum_of_class_losses() {
    let mut r = rng(5);
    let d = three_clusters(&mut r, 3);
    let shape = NetworkShape::new(vec![2, 3, 3], 0.25).unwrap();
    let p = random_params(&mut r, &shape, 1.0);
    let per: f64 = (0..3).map(|c| per_class_loss(&p, &d, c).unwrap()).sum();
    assert!((ova_loss(&p, &d).unwrap() - per).abs() < 1e-14);
}

#[test]
fn f32_loss_tracks_f64() {
    let mut r = rng(6);
    let d = random_dataset(&mut r, 6, 3, 1);
    let shape = random_shape(&mut r, 2, 3, 1, 0.25);
    let p = random_params(&mut r, &shape, 1.0);
    let p32: ParamsF32 = p.cast();
    let l64 = total_loss(&p, &d).unwrap();
    let l32 = total_loss(&p32, &d.cast::<f32>()).unwrap();
    assert!((f64::from(l32) - l64).abs() < 1e-5 * (1.0 + l64));
}

#[test]
fn shape_mismatch_is_an_error() {
    let mut r = rng(7);
    let d = random_dataset(&mut r, 4, 3, 1);
    let p = Params::zeros(&NetworkShape::new(vec![2, 2, 1], 0.0).unwrap());
    assert!(total_loss(&p, &d).is_err());
}
