//! The three operator families: apply, adjoint, and noisy magnitude
//! measurements.
//!
//! cargo run --example measurement_operators

use num_complex::Complex;
use prgen::generator::{ImageTensor, Shape};
use prgen::measure::{load_tm, make_cdp_grid, make_gaussian, measure_magnitude, MeasurementOperator, NoiseMode, TmDataset};

fn main() -> prgen::Result<()> {
    let shape = Shape::new(8, 8, 1);
    let x = ImageTensor::new(shape, (0..64).map(|i| ((i % 8) as f64 / 7.0).powi(2)).collect())?;

    let tm_path = std::env::temp_dir().join("prgen_measurement_operators.prtm");
    TmDataset::synthetic(400, 64, (1.0f64 / 64.0).sqrt(), 3)?.save(&tm_path)?;

    let ops: Vec<MeasurementOperator<f64>> = vec![
        make_gaussian(32, 64, 1)?,
        make_cdp_grid(shape, 2, 16, 2)?,
        MeasurementOperator::TransmissionMatrix(load_tm(&tm_path, 0.4, 32, 4)?),
    ];
    for op in &ops {
        let ax = op.apply(x.as_slice())?;
        let v: Vec<Complex<f64>> = (0..op.rows()).map(|i| Complex::new((i as f64).cos(), (i as f64).sin())).collect();
        let lhs: Complex<f64> = ax.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
        let rhs: f64 = x.as_slice().iter().zip(op.apply_adjoint(&v)?).map(|(a, b)| a * b.re).sum();
        let noisy = measure_magnitude(op, &x, 5.0, NoiseMode::Relative, 7)?;
        println!(
            "{:<8} {} x {}  Re<Ax,v> = {:+.6}  <x,Re A^H v> = {:+.6}  noise sigma {:.4}",
            op.family(),
            op.rows(),
            op.cols(),
            lhs.re,
            rhs,
            noisy.noise_sigma
        );
    }
    Ok(())
}
