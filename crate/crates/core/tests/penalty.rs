mod common;

use common::*;
use reluscape::clarke::CriticalityOptions;
use reluscape::loss::ova_loss;
use reluscape::penalty::{criticality, e_gamma, penalty_gradient, penalty_r, subgrad_e, ReplicatedParams};
use reluscape::NetworkShape;

fn random_reps(seed: u64, classes: usize) -> ReplicatedParams {
    let mut r = rng(seed);
    let shape = NetworkShape::new(vec![2, 3, 1], 0.25).unwrap();
    let reps = (0..classes).map(|_| random_params(&mut r, &shape, 1.0)).collect();
    ReplicatedParams::new(reps, 0.7).unwrap()
}

#[test]
fn penalty_gradient_matches_differences() {
    for seed in 0..20 {
        let mut reps = random_reps(seed, 3);
        let g = penalty_gradient(&reps).unwrap();
        let x = reps.to_flat();
        let h = 1e-6;
        for j in 0..x.len() {
            let mut y = x.clone();
            y[j] += h;
            reps.set_flat(&y);
            let p = penalty_r(&reps).unwrap();
            y[j] -= 2.0 * h;
            reps.set_flat(&y);
            let m = penalty_r(&reps).unwrap();
            reps.set_flat(&x);
            assert!(rel_err(g[j], (p - m) / (2.0 * h), 1e-3) < 1e-7);
        }
    }
}

#[test]
fn penalty_vanishes_iff_replicas_agree() {
    let mut r = rng(50);
    let shape = NetworkShape::new(vec![2, 3, 3], 0.25).unwrap();
    let shared = random_params(&mut r, &shape, 1.0);
    let reps = ReplicatedParams::from_shared(&shared, 1.0).unwrap();
    assert_eq!(penalty_r(&reps).unwrap(), 0.0);
    assert_eq!(reps.max_deviation(), 0.0);
    assert!(penalty_r(&random_reps(1, 3)).unwrap() > 0.0);
}

/// With equal replicas the penalized objective is the one-versus-all loss.
#[test]
fn e_gamma_at_equal_replicas_is_ova_loss() {
    let mut r = rng(51);
    let d = three_clusters(&mut r, 3);
    let shape = NetworkShape::new(vec![2, 3, 3], 0.25).unwrap();
    let shared = random_params(&mut r, &shape, 1.0);
    let reps = ReplicatedParams::from_shared(&shared, 2.0).unwrap();
    assert!((e_gamma(&reps, &d).unwrap() - ova_loss(&shared, &d).unwrap()).abs() < 1e-14);
    assert_eq!(reps.shared_params(), shared);
}

#[test]
fn smooth_product_point_has_one_generator() {
    let mut r = rng(52);
    let d = three_clusters(&mut r, 2);
    let reps = random_reps(53, 3);
    let gens = subgrad_e(&reps, &d, 1e-9, 20).unwrap();
    assert_eq!(gens.len(), 1);
    let x = reps.to_flat();
    let mut q = reps.clone();
    let h = 1e-7;
    for j in 0..x.len() {
        let mut y = x.clone();
        y[j] += h;
        q.set_flat(&y);
        let p = e_gamma(&q, &d).unwrap();
        y[j] -= 2.0 * h;
        q.set_flat(&y);
        let m = e_gamma(&q, &d).unwrap();
        assert!(rel_err(gens[0].gradient[j], (p - m) / (2.0 * h), 1e-3) < 1e-5);
    }
    let (crit, _) = criticality(&reps, &d, &CriticalityOptions::default()).unwrap();
    assert!(!crit);
}
