//! Quality metrics against direct formula evaluations.

use prgen::generator::{ImageTensor, Shape};
use prgen::metrics::{per_pixel_error, psnr, resolve_sign, score, ssim, ssim_with_peak, ScoreOptions, SsimWindow};

mod common;
use common::{gaussian_weights, ssim_oracle, uniform_image};

#[test]
fn ssim_matches_two_pass_oracle() {
    let shape = Shape::new(16, 16, 1);
    let x = uniform_image(shape, 1);
    let noisy: Vec<f64> = x.as_slice().iter().zip(uniform_image(shape, 2).as_slice()).map(|(a, b)| 0.7 * a + 0.3 * b).collect();
    let y = ImageTensor::new(shape, noisy).unwrap();
    let got = ssim_with_peak(&x, &y, 1.0).unwrap();
    assert_eq!(got.window, SsimWindow::Gaussian11);
    assert!((got.value - ssim_oracle(&x, &y, &gaussian_weights(), 1.0)).abs() < 1e-9);

    let rgb = Shape::new(13, 12, 3);
    let (p, q) = (uniform_image(rgb, 3), uniform_image(rgb, 4));
    let got = ssim_with_peak(&p, &q, 2.0).unwrap().value;
    assert!((got - ssim_oracle(&p, &q, &gaussian_weights(), 2.0)).abs() < 1e-9);
}

#[test]
fn small_images_fall_back_to_a_uniform_window() {
    let shape = Shape::new(8, 9, 1);
    let (x, y) = (uniform_image(shape, 5), uniform_image(shape, 6));
    let got = ssim_with_peak(&x, &y, 1.0).unwrap();
    assert_eq!(got.window, SsimWindow::Uniform(7));
    assert!(got.fallback());
    let flat = vec![vec![1.0 / 49.0; 7]; 7];
    assert!((got.value - ssim_oracle(&x, &y, &flat, 1.0)).abs() < 1e-9);
}

#[test]
fn ssim_identity_and_symmetry() {
    let shape = Shape::new(16, 16, 2);
    let (x, y) = (uniform_image(shape, 7), uniform_image(shape, 8));
    assert!((ssim(&x, &x).unwrap() - 1.0).abs() < 1e-12);
    assert!((ssim(&x, &y).unwrap() - ssim(&y, &x).unwrap()).abs() < 1e-15);
    assert!(ssim(&x, &y).unwrap() < 0.5);
}

#[test]
fn psnr_decreases_as_error_grows() {
    let shape = Shape::new(10, 10, 1);
    let x = uniform_image(shape, 9);
    let noise = uniform_image(shape, 10);
    let mut last = f64::INFINITY;
    for scale in [0.0, 0.01, 0.05, 0.2, 0.5] {
        let y = ImageTensor::new(shape, x.as_slice().iter().zip(noise.as_slice()).map(|(a, n)| a + scale * (n - 0.5)).collect()).unwrap();
        let p = psnr(&x, &y, 1.0).unwrap();
        assert!(p < last || (scale == 0.0 && p == f64::INFINITY));
        last = p;
    }
}

#[test]
fn psnr_closed_forms_and_sign_resolution() {
    let shape = Shape::new(4, 4, 1);
    let z = ImageTensor::new(shape, vec![0.0; 16]).unwrap();
    let one = ImageTensor::new(shape, vec![1.0; 16]).unwrap();
    assert_eq!(psnr(&z, &one, 1.0).unwrap(), 0.0);
    assert_eq!(psnr(&z, &one, 10.0).unwrap(), 20.0);
    assert_eq!(psnr(&one, &one, 1.0).unwrap(), f64::INFINITY);
    assert!(psnr(&z, &one, 0.0).is_err());

    let x = uniform_image(shape, 11);
    let neg = ImageTensor::new(shape, x.as_slice().iter().map(|v| -v).collect()).unwrap();
    let (fixed, s) = resolve_sign(&x, &neg).unwrap();
    assert_eq!((fixed, s), (x.clone(), -1));
    let r = score(&x, &neg, ScoreOptions { peak: 1.0, resolve_sign: true }).unwrap();
    assert!(r.sign_resolved && r.psnr_db == f64::INFINITY && r.per_pixel_mse == 0.0);
    let plain = score(&x, &neg, ScoreOptions::default()).unwrap();
    assert_eq!(plain.per_pixel_mse, per_pixel_error(&x, &neg).unwrap());
}
