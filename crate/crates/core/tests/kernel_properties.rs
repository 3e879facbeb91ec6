//! Invariants of the kernels over random configurations.

use halfspace::geometry::{cosh_distance, BoundaryPoint, DomainPoint, HyperPoint, ModelParams, Wall};
use halfspace::kernels::{
    global_poisson, green, killed_density, lambda_poisson, potential, transition_density, wall_mass,
};
use halfspace::quad::QuadSpec;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn point(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut c: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
    c[0] = 10f64.powf(rng.random_range(-2.0..1.0));
    c[n - 1] = 10f64.powf(rng.random_range(-2.0..2.0));
    c
}

#[test]
fn green_is_positive_and_below_the_potential() {
    let q = QuadSpec::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0;
    for n in [3usize, 4, 5] {
        for mu in [0.5, 1.0, 2.5] {
            let p = ModelParams::new(n, mu).unwrap();
            for _ in 0..10_000 {
                let x = DomainPoint::new(point(&mut rng, n)).unwrap();
                let y = DomainPoint::new(point(&mut rng, n)).unwrap();
                if cosh_distance(x.point(), y.point()).minus_one() < 1e-8 {
                    continue;
                }
                let g = green(&p, &x, &y, &q).unwrap().value;
                let v = potential(&p, x.point(), y.point(), &q).unwrap().value;
                assert!(g > 0.0, "G({x:?}, {y:?}) = {g}");
                assert!(g <= v * (1.0 + 1e-12), "G = {g} > V = {v}");
                checked += 1;
            }
        }
    }
    assert!(checked > 89_000);
}

#[test]
fn green_matches_the_difference_through_reflect() {
    let q = QuadSpec::default();
    let p = ModelParams::new(3, 1.4).unwrap();
    let x = DomainPoint::new(vec![0.7, 0.2, 1.3]).unwrap();
    let y = DomainPoint::new(vec![1.9, -0.4, 0.6]).unwrap();
    let g = green(&p, &x, &y, &q).unwrap().value;
    let ybar = y.point().reflect();
    let d = potential(&p, x.point(), y.point(), &q).unwrap().value - potential(&p, x.point(), &ybar, &q).unwrap().value;
    assert!((g - d).abs() <= 1e-13 * g, "{g} vs {d}");
}

#[test]
fn killed_density_vanishes_at_the_first_wall() {
    let q = QuadSpec::default();
    let p = ModelParams::new(3, 1.0).unwrap();
    let x = DomainPoint::new(vec![1.0, 0.0, 1.0]).unwrap();
    let mut prev = f64::INFINITY;
    for y1 in [1e-1, 1e-2, 1e-3, 1e-4] {
        let y = DomainPoint::new(vec![y1, 0.3, 1.2]).unwrap();
        let k = killed_density(&p, 1.0, &x, &y, &q).unwrap().value;
        assert!(k >= 0.0 && k < prev);
        prev = k;
    }
    assert!(prev < 1e-4);
}

#[test]
fn lambda_kernel_with_unit_data_is_a_power_of_the_height() {
    // x_n^{η−μ} ∫ P_λ(x, y) dy = 1.
    let q = QuadSpec::default().with_tol(1e-9);
    for (mu, lambda) in [(1.0, 0.5), (0.6, 2.0)] {
        let p = ModelParams::new(3, mu).unwrap().with_lambda(lambda).unwrap();
        for x in [vec![1.0, 0.0, 1.0], vec![0.4, 0.3, 2.5]] {
            let x = DomainPoint::new(x).unwrap();
            let kernel = |y: &BoundaryPoint| Ok(lambda_poisson(&p, &x, y, &q)?.value);
            let total = wall_mass(&p, &x, Wall::Wall1, kernel, &q).unwrap().value
                + wall_mass(&p, &x, Wall::Wall2, kernel, &q).unwrap().value;
            let scaled = x.point().last().powf(p.eta() - mu) * total;
            assert!((scaled - 1.0).abs() < 1e-7, "mu={mu} lambda={lambda}: {scaled}");
        }
    }
}

fn coords(n: usize) -> impl Strategy<Value = Vec<f64>> {
    (prop::collection::vec(-2.0..2.0f64, n - 1), 0.05..5.0f64).prop_map(|(mut c, h)| {
        c.push(h);
        c
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transition_density_is_quasi_symmetric(
        mu in 0.2..3.0f64,
        t in 0.3..4.0f64,
        x in coords(3),
        y in coords(3),
    ) {
        let q = QuadSpec::default();
        let p = ModelParams::new(3, mu).unwrap();
        let (hx, hy) = (HyperPoint::new(x).unwrap(), HyperPoint::new(y).unwrap());
        let a = transition_density(&p, t, &hx, &hy, &q).unwrap();
        let b = transition_density(&p, t, &hy, &hx, &q).unwrap();
        prop_assume!(a.value > 1e-250 && b.value > 1e-250);
        let expected = (hx.last() / hy.last()).powf(2.0 * (mu - p.nu()));
        let ratio = a.value / b.value;
        let slack = 1e-9 + (a.abs_error / a.value) + (b.abs_error / b.value);
        prop_assert!((ratio / expected - 1.0).abs() <= slack, "ratio {} vs {}", ratio, expected);
    }

    #[test]
    fn global_poisson_depends_on_horizontal_offset_only(
        mu in 0.2..3.0f64,
        x in coords(4),
        y in prop::collection::vec(-2.0..2.0f64, 3),
        shift in prop::collection::vec(-5.0..5.0f64, 3),
    ) {
        let p = ModelParams::new(4, mu).unwrap();
        let mut yb = y.clone();
        yb.push(0.0);
        let a = global_poisson(&p, &HyperPoint::new(x.clone()).unwrap(), &yb).unwrap();
        let mut xs = x.clone();
        let mut ys = yb.clone();
        for k in 0..3 {
            xs[k] += shift[k];
            ys[k] += shift[k];
        }
        let b = global_poisson(&p, &HyperPoint::new(xs).unwrap(), &ys).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1e-300));
    }

    #[test]
    fn potential_is_the_drift_weight_times_a_function_of_distance(
        mu in 0.2..3.0f64,
        x in coords(5),
        y in coords(5),
    ) {
        let q = QuadSpec::default();
        let p = ModelParams::new(5, mu).unwrap();
        let (hx, hy) = (HyperPoint::new(x).unwrap(), HyperPoint::new(y).unwrap());
        prop_assume!(cosh_distance(&hx, &hy).minus_one() > 1e-6);
        let a = potential(&p, &hx, &hy, &q).unwrap().value;
        let b = potential(&p, &hy, &hx, &q).unwrap().value;
        let w = (hx.last() / hy.last()).powf(2.0 * (mu - p.nu()));
        prop_assert!((a / b / w - 1.0).abs() < 1e-12);
    }
}
