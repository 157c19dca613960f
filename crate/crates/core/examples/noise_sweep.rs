//! A small sweep driven from code: noise levels × measurement counts × trials,
//! written as a report bundle.
//!
//! cargo run --release --example noise_sweep [out_dir]

use prgen::generator::{save_generator, Shape, SyntheticArch, SyntheticSpec};
use prgen::harness::{run_sweep, ExperimentConfig, OperatorFamily};

fn main() -> prgen::Result<()> {
    let out = std::env::args().nth(1).map(Into::into).unwrap_or_else(|| std::env::temp_dir().join("prgen_noise_sweep"));
    std::fs::create_dir_all(&out).map_err(|e| prgen::Error::Data(e.to_string()))?;
    let gen = out.join("generator.prgw");
    save_generator(&SyntheticSpec::new(10, Shape::new(16, 16, 1), SyntheticArch::Conv).build(7)?, &gen)?;

    let mut cfg = ExperimentConfig::new(&gen, OperatorFamily::Gaussian, vec![64, 128]);
    cfg.noise_percent = vec![0.0, 5.0, 25.0];
    cfg.dataset_count = 2;
    cfg.trials = 2;
    cfg.restarts = 3;
    cfg.iterations = 1500;
    cfg.step_size = 0.05;
    cfg.range_restarts = 2;
    cfg.range_iterations = 500;
    cfg.range_step_size = 0.05;
    cfg.out_dir = out.join("bundle");

    let report = run_sweep(&cfg)?;
    println!("{:>4} {:>6} {:>9}", "m", "noise", "psnr_orig");
    for r in &report.records {
        println!("{:>4} {:>5}% {:>9.2}", r.m, r.noise_pct, r.psnr_orig);
    }
    println!("bundle: {}", report.bundle.display());
    Ok(())
}
