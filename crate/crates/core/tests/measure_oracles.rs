//! Measurement operators against brute-force dense matrices and the
//! adjoint identity.

use prgen::generator::{ImageTensor, Shape};
use prgen::measure::{
    load_tm, make_cdp, make_cdp_grid, make_gaussian, measure_magnitude, CdpOperator, DenseOperator, MeasurementOperator,
    NoiseMode, TmDataset,
};

mod common;
use common::{brute_cdp, dot, norm, randc, randn, C};

fn tm_operator(rows: usize, cols: usize, master: u64) -> MeasurementOperator<f64> {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tm.prtm");
    TmDataset::synthetic(rows * 4, cols, 0.3, master).unwrap().save(&path).unwrap();
    MeasurementOperator::TransmissionMatrix(load_tm(&path, 0.9, rows, master).unwrap())
}

#[test]
fn cdp_apply_equals_brute_force_dense() {
    let (h, w) = (4, 4);
    let masks: Vec<Vec<C>> = (0..2)
        .map(|i| randn(16, 40 + i).into_iter().map(|t| C::from_polar(1.0, t)).collect())
        .collect();
    let sels = vec![vec![0, 3, 5, 6, 10, 15], vec![1, 2, 7, 8, 9, 11, 12, 13]];
    let op = MeasurementOperator::Cdp(CdpOperator::new(Shape::new(h, w, 1), masks.clone(), sels.clone()).unwrap());
    let dense = brute_cdp(h, w, &masks, &sels);
    for t in 0..3 {
        let x = randc(16, 60 + t);
        let got = op.apply_complex(&x).unwrap();
        assert_eq!(got.len(), dense.len());
        for (g, row) in got.iter().zip(&dense) {
            let want: C = row.iter().zip(&x).map(|(a, b)| a * b).sum();
            assert!((g - want).norm() < 1e-12, "{g} vs {want}");
        }
        let real = randn(16, 70 + t);
        let got = op.apply(&real).unwrap();
        for (g, row) in got.iter().zip(&dense) {
            let want: C = row.iter().zip(&real).map(|(a, b)| a * b).sum();
            assert!((g - want).norm() < 1e-12);
        }
    }
    let d = op.to_dense();
    for (i, row) in dense.iter().enumerate() {
        for (a, b) in d.row(i).iter().zip(row) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}

#[test]
fn adjoint_identity_holds_for_every_family() {
    let grid = Shape::new(6, 5, 2);
    let ops: Vec<(&str, MeasurementOperator<f64>)> = vec![
        ("gaussian", make_gaussian(17, 60, 3).unwrap()),
        ("cdp", make_cdp_grid(grid, 3, 20, 4).unwrap()),
        ("cdp-square", make_cdp(4, 4, 2, 16, 5).unwrap()),
        ("tm", tm_operator(25, 60, 6)),
    ];
    for (name, op) in &ops {
        for t in 0..5 {
            let x = randc(op.cols(), 100 + t);
            let v = randc(op.rows(), 200 + t);
            let ax = op.apply_complex(&x).unwrap();
            let ahv = op.apply_adjoint(&v).unwrap();
            let gap = (dot(&ax, &v) - dot(&x, &ahv)).norm() / (norm(&ax) * norm(&v));
            assert!(gap < 1e-10, "{name}: {gap:e}");

            let xr = randn(op.cols(), 300 + t);
            let axr = op.apply(&xr).unwrap();
            let re_adj = op.apply_adjoint_real(&v).unwrap();
            let lhs = dot(&axr, &v).re;
            let rhs: f64 = xr.iter().zip(&re_adj).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() / (norm(&axr) * norm(&v)) < 1e-10, "{name} real part");
        }
    }
}

#[test]
fn full_single_mask_cdp_is_an_isometry() {
    for (h, w, c) in [(4, 4, 1), (5, 7, 1), (6, 4, 3)] {
        let grid = Shape::new(h, w, c);
        let op: MeasurementOperator<f64> = make_cdp_grid(grid, 1, grid.len(), 9).unwrap();
        for t in 0..3 {
            let x = randc(grid.len(), 10 + t);
            let ax = op.apply_complex(&x).unwrap();
            assert!((norm(&ax) - norm(&x)).abs() < 1e-10 * norm(&x));
            let back = op.apply_adjoint(&ax).unwrap();
            assert!(back.iter().zip(&x).all(|(a, b)| (a - b).norm() < 1e-10));
        }
    }
}

#[test]
fn operators_are_linear() {
    let ops = [make_gaussian::<f64>(9, 16, 1).unwrap(), make_cdp(4, 4, 2, 6, 2).unwrap(), tm_operator(8, 16, 3)];
    let (a, b) = (C::new(0.3, -1.2), C::new(-2.0, 0.5));
    for op in &ops {
        let (x, y) = (randc(16, 1), randc(16, 2));
        let mix: Vec<C> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
        let lhs = op.apply_complex(&mix).unwrap();
        let (ax, ay) = (op.apply_complex(&x).unwrap(), op.apply_complex(&y).unwrap());
        for i in 0..lhs.len() {
            assert!((lhs[i] - (a * ax[i] + b * ay[i])).norm() < 1e-12);
        }
    }
}

#[test]
fn gaussian_entries_have_per_component_variance_one_over_2m() {
    let (m, n) = (200, 100);
    let op = DenseOperator::<f64>::gaussian(m, n, 12).unwrap();
    let entries = op.entries();
    let count = entries.len() as f64;
    let var_re = entries.iter().map(|e| e.re * e.re).sum::<f64>() / count;
    let var_im = entries.iter().map(|e| e.im * e.im).sum::<f64>() / count;
    let want = 1.0 / (2.0 * m as f64);
    for v in [var_re, var_im] {
        assert!((v / want - 1.0).abs() < 0.2, "variance {v} vs {want}");
    }
}

#[test]
fn relative_noise_has_requested_standard_deviation() {
    let (m, n) = (10_000, 16);
    let op = make_gaussian::<f64>(m, n, 3).unwrap();
    let x = ImageTensor::new(Shape::new(4, 4, 1), randn(n, 4).iter().map(|v| v.abs()).collect()).unwrap();
    let clean: Vec<f64> = op.apply(x.as_slice()).unwrap().iter().map(|u| u.norm()).collect();
    let rms = (clean.iter().map(|v| v * v).sum::<f64>() / m as f64).sqrt();
    for pct in [1.0, 10.0, 50.0] {
        let y = measure_magnitude(&op, &x, pct, NoiseMode::Relative, 8).unwrap();
        let resid: Vec<f64> = y.y.iter().zip(&clean).map(|(a, b)| a - b).collect();
        let mean = resid.iter().sum::<f64>() / m as f64;
        let sd = (resid.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (m - 1) as f64).sqrt();
        let want = pct / 100.0 * rms;
        assert!((sd / want - 1.0).abs() < 0.1, "{pct}%: sd {sd} vs {want}");
        assert!((y.noise_sigma / want - 1.0).abs() < 1e-12);
    }
    let abs = measure_magnitude(&op, &x, 5.0, NoiseMode::Absolute, 8).unwrap();
    assert!((abs.noise_sigma - 0.05).abs() < 1e-15);
    let quiet = measure_magnitude(&op, &x, 0.0, NoiseMode::Relative, 8).unwrap();
    assert!(quiet.y.iter().zip(&clean).all(|(a, b)| (a - b).abs() < 1e-12));
}

#[test]
fn tm_rows_are_the_stored_rows() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tm.prtm");
    let ds = TmDataset::synthetic(40, 12, 0.2, 5).unwrap();
    ds.save(&path).unwrap();
    let op = load_tm::<f64>(&path, 0.5, 6, 1).unwrap();
    for (k, &r) in op.row_indices.iter().enumerate() {
        assert!(ds.residuals[r] < 0.5);
        for (j, e) in op.dense().row(k).iter().enumerate() {
            let s = ds.matrix[r * 12 + j];
            assert_eq!((e.re, e.im), (s.re as f64, s.im as f64));
        }
    }
}
