//! Solver objective, gradient conventions and restart bookkeeping.

use num_complex::Complex;
use prgen::generator::{GeneratorModel, ImageTensor, Layer, Shape, SyntheticArch, SyntheticSpec};
use prgen::measure::{make_gaussian, measure_magnitude, DenseOperator, MeasurementOperator, NoiseMode};
use prgen::solver::{grad_loss, loss, project_to_range, solve};
use prgen::{seed, SolverConfig};
use rand::Rng;
use rand_distr::StandardNormal;

fn randn(n: usize, master: u64) -> Vec<f64> {
    let mut rng = seed::rng(master, &[3]);
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn model(arch: SyntheticArch, k: usize, side: usize) -> GeneratorModel<f64> {
    SyntheticSpec::new(k, Shape::new(side, side, 1), arch).build(7).unwrap().cast()
}

fn identity(n: usize) -> GeneratorModel<f64> {
    let mut weight = vec![0.0; n * n];
    for i in 0..n {
        weight[i * n + i] = 1.0;
    }
    GeneratorModel::new(vec![Layer::Dense { input: n, output: n, weight, bias: vec![0.0; n] }]).unwrap()
}

#[test]
fn zero_measurement_contributes_no_gradient() {
    let g = identity(3);
    let mut entries: Vec<Complex<f64>> = randn(12, 1).chunks(2).map(|c| Complex::new(c[0], c[1])).collect();
    entries.extend([Complex::new(0.0, 0.0); 3]);
    let with_zero = MeasurementOperator::Gaussian(DenseOperator::new(3, 3, entries.clone()).unwrap());
    let without = MeasurementOperator::Gaussian(DenseOperator::new(2, 3, entries[..6].to_vec()).unwrap());
    let z = randn(3, 2);
    let y = [0.7, 0.2, 0.9];
    let g_full = grad_loss(&g, &with_zero, &y, &z).unwrap();
    let g_trim = grad_loss(&g, &without, &y[..2], &z).unwrap();
    assert_eq!(g_full, g_trim);
    assert!(g_full.iter().all(|v| v.is_finite()));
    let gap = loss(&g, &with_zero, &y, &z).unwrap() - loss(&g, &without, &y[..2], &z).unwrap();
    assert!((gap - 0.81).abs() < 1e-12);
}

#[test]
fn gradient_vanishes_at_exact_solution() {
    let g = model(SyntheticArch::Conv, 6, 8);
    let op = make_gaussian::<f64>(40, 64, 3).unwrap();
    let z = randn(6, 4);
    let x = g.forward(&z).unwrap();
    let y = measure_magnitude(&op, &x, 0.0, NoiseMode::Relative, 0).unwrap().y;
    assert!(loss(&g, &op, &y, &z).unwrap() < 1e-26);
    assert!(grad_loss(&g, &op, &y, &z).unwrap().iter().all(|v| v.abs() < 1e-12));
}

#[test]
fn global_phase_does_not_change_loss_or_gradient() {
    let g = model(SyntheticArch::Mlp, 5, 4);
    let op = make_gaussian::<f64>(12, 16, 5).unwrap();
    let rotated = op.scaled(Complex::from_polar(1.0, 1.234));
    let y: Vec<f64> = randn(12, 6).iter().map(|v| v.abs()).collect();
    for t in 0..4 {
        let z = randn(5, 10 + t);
        let (a, b) = (loss(&g, &op, &y, &z).unwrap(), loss(&g, &rotated, &y, &z).unwrap());
        assert!((a - b).abs() < 1e-12 * a.max(1.0));
        let (ga, gb) = (grad_loss(&g, &op, &y, &z).unwrap(), grad_loss(&g, &rotated, &y, &z).unwrap());
        assert!(ga.iter().zip(&gb).all(|(p, q)| (p - q).abs() < 1e-10));
    }
}

#[test]
fn sign_flip_of_the_operator_is_invisible() {
    let g = model(SyntheticArch::Mlp, 5, 4);
    let op = make_gaussian::<f64>(12, 16, 5).unwrap();
    let neg = op.scaled(Complex::new(-1.0, 0.0));
    let y: Vec<f64> = randn(12, 6).iter().map(|v| v.abs()).collect();
    let z = randn(5, 1);
    assert_eq!(loss(&g, &op, &y, &z).unwrap(), loss(&g, &neg, &y, &z).unwrap());
}

fn problem() -> (GeneratorModel<f64>, MeasurementOperator<f64>, Vec<f64>) {
    let g = model(SyntheticArch::Conv, 6, 8);
    let op = make_gaussian::<f64>(30, 64, 11).unwrap();
    let x = g.forward(&randn(6, 12)).unwrap();
    let y = measure_magnitude(&op, &x, 2.0, NoiseMode::Relative, 13).unwrap().y;
    (g, op, y)
}

#[test]
fn restarts_depend_only_on_seed_and_index() {
    let (g, op, y) = problem();
    let cfg = SolverConfig { restarts: 5, iterations: 60, step_size: 0.05, seed: 21, ..SolverConfig::default() };
    let a = solve(&g, &op, &y, &cfg).unwrap();
    let b = solve(&g, &op, &y, &cfg).unwrap();
    assert_eq!(a.all, b.all);
    assert_eq!(a.best_index, b.best_index);

    let fewer = solve(&g, &op, &y, &SolverConfig { restarts: 3, ..cfg.clone() }).unwrap();
    assert_eq!(&a.all[..3], &fewer.all[..]);

    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let serial = single.install(|| solve(&g, &op, &y, &cfg).unwrap());
    assert_eq!(serial.all, a.all);

    let min = a.all.iter().map(|r| r.residual).fold(f64::INFINITY, f64::min);
    assert_eq!(a.best().residual, min);
    assert!(a.all.iter().position(|r| r.residual == min) == Some(a.best_index));

    let other = solve(&g, &op, &y, &SolverConfig { seed: 22, ..cfg }).unwrap();
    assert_ne!(other.all[0].z_final, a.all[0].z_final);
}

#[test]
fn loss_is_monotone_for_a_small_step() {
    let (g, op, y) = problem();
    let cfg = SolverConfig {
        restarts: 2,
        iterations: 200,
        step_size: 0.005,
        loss_trace_stride: 1,
        seed: 4,
        ..SolverConfig::default()
    };
    for r in solve(&g, &op, &y, &cfg).unwrap().all {
        assert_eq!(r.loss_trace.len(), 201);
        for w in r.loss_trace.windows(2) {
            assert!(w[1].1 <= w[0].1 + 1e-15, "{:?}", w);
        }
    }
}

fn grid_minimum(g: &GeneratorModel<f64>, target: &ImageTensor<f64>) -> f64 {
    let f = |a: f64, b: f64| -> f64 {
        let x = g.forward(&[a, b][..]).unwrap();
        x.as_slice().iter().zip(target.as_slice()).map(|(p, q)| (p - q).powi(2)).sum()
    };
    let (mut best, mut ca, mut cb, mut half) = (f64::INFINITY, 0.0, 0.0, 5.0);
    for _ in 0..8 {
        let steps = 60;
        let (mut na, mut nb) = (ca, cb);
        for i in 0..=steps {
            for j in 0..=steps {
                let a = ca - half + 2.0 * half * i as f64 / steps as f64;
                let b = cb - half + 2.0 * half * j as f64 / steps as f64;
                let v = f(a, b);
                if v < best {
                    (best, na, nb) = (v, a, b);
                }
            }
        }
        (ca, cb, half) = (na, nb, half / 8.0);
    }
    best
}

#[test]
fn range_projection_matches_grid_search_in_two_dimensions() {
    let g = model(SyntheticArch::Mlp, 2, 4);
    for t in 0..3 {
        let target: Vec<f64> = randn(16, 50 + t).iter().map(|v| 0.5 + 0.2 * v).collect();
        let target = ImageTensor::new(Shape::new(4, 4, 1), target).unwrap();
        let want = grid_minimum(&g, &target);
        let cfg = SolverConfig {
            restarts: 10,
            iterations: 2000,
            step_size: 0.1,
            line_search: true,
            seed: t,
            ..SolverConfig::default()
        };
        let got = project_to_range(&g, &target, &cfg).unwrap();
        assert!((got.residual - want).abs() <= 0.01 * want, "{} vs {}", got.residual, want);
    }
}

#[test]
fn in_range_targets_project_to_themselves() {
    let g = model(SyntheticArch::Conv, 8, 8);
    let target = g.forward(&randn(8, 77)).unwrap();
    let cfg = SolverConfig {
        restarts: 4,
        iterations: 5000,
        step_size: 0.05,
        tolerance: Some(1e-12),
        seed: 1,
        ..SolverConfig::default()
    };
    let got = project_to_range(&g, &target, &cfg).unwrap();
    assert!(got.residual < 1e-8, "{:e}", got.residual);
}

#[test]
fn mismatched_dimensions_are_reported() {
    let g = model(SyntheticArch::Mlp, 3, 4);
    let op = make_gaussian::<f64>(5, 20, 1).unwrap();
    let cfg = SolverConfig { restarts: 1, iterations: 1, ..SolverConfig::default() };
    assert!(matches!(solve(&g, &op, &[0.0; 5], &cfg), Err(prgen::Error::Dimension(_))));
    let op = make_gaussian::<f64>(5, 16, 1).unwrap();
    assert!(matches!(solve(&g, &op, &[0.0; 4], &cfg), Err(prgen::Error::Dimension(_))));
}
