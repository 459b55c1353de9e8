mod common;

use common::*;
use rand::Rng;
use reluscape::cells::{cell_of, CellLocation};
use reluscape::clarke::{certify, clarke_generators, is_critical, min_norm_point, CriticalityOptions};
use reluscape::data::Targets;
use reluscape::fixtures::{three_minima_dataset, three_minima_params, Panel};
use reluscape::linalg::{dot, norm};
use reluscape::multilinear::{cell_gradient, frozen_from_cell};
use reluscape::{Dataset, NetworkShape, Params};

/// Closest point of the segment `[a, b]` to the origin.
fn segment_oracle(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let dd = dot(&d, &d);
    let t = if dd == 0.0 { 0.0 } else { (dot(a, &d) / dd).clamp(0.0, 1.0) };
    norm(&a.iter().zip(&d).map(|(x, y)| x - t * y).collect::<Vec<_>>())
}

#[test]
fn two_generators_match_segment_projection() {
    let mut r = rng(31);
    for _ in 0..500 {
        let dim = r.random_range(1..=5);
        let a = uniform_vec(&mut r, dim, 2.0);
        let b = uniform_vec(&mut r, dim, 2.0);
        let m = min_norm_point(&[a.clone(), b.clone()], 1e-15).unwrap();
        assert!((m.norm - segment_oracle(&a, &b)).abs() < 1e-10);
        assert!((m.theta.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(m.theta.iter().all(|&t| t >= 0.0));
    }
}

/// The hull of generators that surround the origin contains it.
#[test]
fn surrounding_generators_certify_zero() {
    let mut r = rng(32);
    for _ in 0..100 {
        let dim = r.random_range(1..=4);
        let mut gens: Vec<Vec<f64>> = (0..dim + 3).map(|_| uniform_vec(&mut r, dim, 1.0)).collect();
        let s: Vec<f64> = (0..dim).map(|j| gens.iter().map(|g| g[j]).sum()).collect();
        gens.push(s.iter().map(|x| -x).collect());
        let m = min_norm_point(&gens, 1e-15).unwrap();
        assert!(m.norm < 1e-9, "norm {}", m.norm);
        assert!(m.norm_history.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
    }
}

#[test]
fn smooth_point_generator_is_cell_gradient() {
    let mut r = rng(33);
    for _ in 0..30 {
        let (p, d) = smooth_instance(&mut r);
        let gens = clarke_generators(&p, &d, 1e-9, 20).unwrap();
        assert_eq!(gens.len(), 1);
        let CellLocation::Cell(u) = cell_of(&p, &d, 1e-9).unwrap() else { unreachable!() };
        let g = cell_gradient(&p, &frozen_from_cell(&u, &p.shape).unwrap(), &d).unwrap();
        assert_eq!(gens[0].gradient, g);
        let (crit, cert) = is_critical(&p, &d, &CriticalityOptions::default()).unwrap();
        assert_eq!(crit, norm(&g) <= cert.eps_crit);
    }
}

/// Both hinge terms sit exactly at their kinks; the cell where both are inactive
/// has zero gradient, so the point is critical.
#[test]
fn hinge_kink_is_critical() {
    let d = Dataset::uniform(vec![vec![1.0], vec![-1.0]], Targets::Binary(vec![1, -1])).unwrap();
    let shape = NetworkShape::new(vec![1, 1, 1], 1.0).unwrap().without_output_bias();
    let p = Params::from_flat(&shape, &[1.0, 0.0, 1.0]).unwrap();
    let (crit, cert) = is_critical(&p, &d, &CriticalityOptions::with_eps(1e-9)).unwrap();
    assert!(crit, "residual {}", cert.residual_norm);
    assert!(cert.cells.len() >= 2);
}

#[test]
fn three_minima_zero_loss_is_critical() {
    let d = three_minima_dataset();
    let (crit, cert) = is_critical(&three_minima_params(Panel::A), &d, &CriticalityOptions::default()).unwrap();
    assert!(crit);
    assert_eq!(cert.residual_norm, 0.0);
}

#[test]
fn certificate_residual_is_hull_point() {
    let gens = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
    let c = certify(vec![], gens, Some(1e-6)).unwrap();
    assert!((c.residual_norm - 0.5f64.sqrt()).abs() < 1e-12);
    assert!(!c.is_critical());
}
