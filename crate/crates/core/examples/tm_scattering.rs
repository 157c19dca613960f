//! Imaging through a scattering medium: build a transmission-matrix file,
//! keep the well-calibrated rows, zero-pad a small image onto the 40×40 grid,
//! move it into the generator range, and recover it from speckle magnitudes.
//!
//! cargo run --release --example tm_scattering

use prgen::generator::{Shape, SyntheticArch, SyntheticSpec};
use prgen::harness::ingest::fit;
use prgen::measure::{load_tm, measure_magnitude, MeasurementOperator, NoiseMode, TmDataset};
use prgen::metrics::per_pixel_error;
use prgen::solver::{project_to_range, solve};
use prgen::SolverConfig;

fn main() -> prgen::Result<()> {
    let rows = 300;
    let path = std::env::temp_dir().join("prgen_tm_scattering.prtm");
    let ds = TmDataset::synthetic(1500, 1600, (1.0 / (2.0 * rows as f64)).sqrt(), 77)?;
    ds.save(&path)?;
    let kept = prgen::measure::qualifying_rows(&ds.residuals, 0.4).len();
    println!("{kept} of {} rows have residual < 0.4", ds.rows);

    let digit = SyntheticSpec::new(10, Shape::new(28, 28, 1), SyntheticArch::Conv).build(8)?.cast::<f64>();
    let model = SyntheticSpec::new(10, Shape::new(40, 40, 1), SyntheticArch::Conv).build(7)?.cast::<f64>();
    let padded = fit(&digit.forward(&vec![0.3; 10])?, model.output_shape(), true)?;
    let range_cfg = SolverConfig { restarts: 3, iterations: 1500, ..SolverConfig::synthetic() };
    let target = project_to_range(&model, &padded, &range_cfg)?.x_hat;

    let op = MeasurementOperator::TransmissionMatrix(load_tm(&path, 0.4, rows, 1)?);
    let y = measure_magnitude(&op, &target, 0.0, NoiseMode::Relative, 0)?;
    let cfg = SolverConfig { restarts: 5, tolerance: Some(1e-12), ..SolverConfig::synthetic() };
    let best = solve(&model, &op, &y.y, &cfg)?.into_best();
    println!("per-pixel MSE {:.2e}, residual {:.2e}", per_pixel_error(&target, &best.x_hat)?, best.residual);
    Ok(())
}
