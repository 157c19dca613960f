//! Recover an RGB image from coded diffraction patterns: two random phase
//! masks, each followed by a 2-D FFT and random subsampling.
//!
//! cargo run --release --example cdp_recovery

use prgen::generator::{Shape, SyntheticArch, SyntheticSpec};
use prgen::measure::{make_cdp_grid, measure_magnitude, NoiseMode};
use prgen::metrics::{score, ScoreOptions};
use prgen::solver::solve;
use prgen::SolverConfig;

fn main() -> prgen::Result<()> {
    let shape = Shape::new(12, 12, 3);
    let model = SyntheticSpec::new(12, shape, SyntheticArch::Dcgan).build(5)?.cast::<f64>();
    let x = model.forward(&vec![0.5; 12])?;

    for m in [96, 192, 432] {
        let op = make_cdp_grid(shape, 2, m / 2, 9)?;
        let y = measure_magnitude(&op, &x, 1.0, NoiseMode::Relative, 3)?;
        let cfg = SolverConfig { restarts: 4, iterations: 3000, ..SolverConfig::synthetic() };
        let outcome = solve(&model, &op, &y.y, &cfg)?;
        let s = score(&x, &outcome.best().x_hat, ScoreOptions::default())?;
        println!("m = {m:>3} of n = {}: PSNR {:.1} dB, SSIM {:.3}", shape.len(), s.psnr_db, s.ssim);
    }
    Ok(())
}
