//! Recover an image in the generator range from m < n Gaussian magnitude
//! measurements.
//!
//! cargo run --release --example gaussian_recovery

use prgen::generator::{Shape, SyntheticArch, SyntheticSpec};
use prgen::measure::{make_gaussian, measure_magnitude, NoiseMode};
use prgen::metrics::{score, ScoreOptions};
use prgen::solver::solve;
use prgen::SolverConfig;

fn main() -> prgen::Result<()> {
    let model = SyntheticSpec::new(10, Shape::new(16, 16, 1), SyntheticArch::Conv).build(7)?.cast::<f64>();
    let z_true: Vec<f64> = (0..10).map(|i| ((i * 37 % 11) as f64 - 5.0) / 4.0).collect();
    let x = model.forward(&z_true)?;

    let op = make_gaussian(128, 256, 1)?;
    let y = measure_magnitude(&op, &x, 0.0, NoiseMode::Relative, 0)?;
    let cfg = SolverConfig { tolerance: Some(1e-12), ..SolverConfig::synthetic() };
    let outcome = solve(&model, &op, &y.y, &cfg)?;

    for r in &outcome.all {
        println!("restart {:>2}: residual {:.3e} after {} steps", r.restart, r.residual, r.iterations_run);
    }
    let best = outcome.best();
    let s = score(&x, &best.x_hat, ScoreOptions::default())?;
    println!("best restart {}: PSNR {:.1} dB, SSIM {:.4}", outcome.best_index, s.psnr_db, s.ssim);
    Ok(())
}
