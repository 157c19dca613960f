//! PSNR, SSIM, per-pixel error and sign resolution on a pair of images.
//!
//! cargo run --example metrics

use prgen::generator::{ImageTensor, Shape};
use prgen::metrics::{per_pixel_error, psnr, score, ssim_with_peak, ScoreOptions};

fn main() -> prgen::Result<()> {
    let shape = Shape::new(24, 24, 1);
    let x = ImageTensor::new(shape, (0..576).map(|i| (i % 24) as f64 / 23.0).collect())?;
    for amp in [0.0, 0.02, 0.1] {
        let y = ImageTensor::new(shape, x.as_slice().iter().enumerate().map(|(i, v)| v + amp * (i as f64).sin()).collect())?;
        println!(
            "noise {amp:<4}: PSNR {:>6.2} dB  SSIM {:.4}  MSE {:.2e}",
            psnr(&x, &y, 1.0)?,
            ssim_with_peak(&x, &y, 1.0)?.value,
            per_pixel_error(&x, &y)?
        );
    }

    let flipped = ImageTensor::new(shape, x.as_slice().iter().map(|v| -v).collect())?;
    let plain = score(&x, &flipped, ScoreOptions::default())?;
    let fixed = score(&x, &flipped, ScoreOptions { resolve_sign: true, ..Default::default() })?;
    println!("sign-flipped: PSNR {:.2} dB, after sign resolution {} dB", plain.psnr_db, fixed.psnr_db);

    let tiny = Shape::new(6, 6, 1);
    let a = ImageTensor::new(tiny, (0..36).map(|i| i as f64 / 35.0).collect())?;
    let s = ssim_with_peak(&a, &a, 1.0)?;
    println!("6x6 image: SSIM window {:?}", s.window);
    Ok(())
}
